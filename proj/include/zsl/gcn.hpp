#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "zsl/linalg.hpp"
#include "zsl/matrix.hpp"
#include "zsl/rng.hpp"

namespace zsl {

/// Deep graph-convolutional regressor: per layer Z_l = act(A_hat Z_{l-1} W_l),
/// LeakyReLU between layers, no nonlinearity after the last one, row-L2
/// normalization on the final output. No biases.
template <typename T>
struct GcnModel {
    std::vector<std::size_t> layer_dims; // [k, h1, ..., D]; layer_dims.size()-1 weight matrices
    std::vector<Dense<T>> weights;       // weights[l] is layer_dims[l] x layer_dims[l+1]
    T slope = T(0.2);
    bool normalize_output = true;

    std::size_t depth() const { return weights.size(); }
};

/// Glorot-uniform init: W_l ~ U[-a, a], a = sqrt(6 / (fan_in + fan_out)).
/// Layer l draws from stream (seed, "gcn_init", l), so models of different
/// depth share their early layers' draws.
template <typename T>
GcnModel<T> init_model(const std::vector<std::size_t>& layer_dims, T slope, std::uint64_t seed,
                       bool normalize_output = true) {
    if (layer_dims.size() < 2)
        throw std::invalid_argument("init_model: need at least input and output dims");
    for (std::size_t d : layer_dims)
        if (d == 0) throw std::invalid_argument("init_model: zero layer width");
    if (!(slope > T(0) && slope < T(1)))
        throw std::invalid_argument("init_model: slope must lie in (0,1)");
    GcnModel<T> model;
    model.layer_dims = layer_dims;
    model.slope = slope;
    model.normalize_output = normalize_output;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const std::size_t fan_in = layer_dims[l];
        const std::size_t fan_out = layer_dims[l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Rng rng = Rng::stream(seed, "gcn_init", l);
        Dense<T> w(fan_in, fan_out);
        for (T& v : w.data) v = static_cast<T>(rng.next_uniform(-a, a));
        model.weights.push_back(std::move(w));
    }
    return model;
}

/// Intermediates retained by forward for the exact backward pass.
template <typename T>
struct ForwardCache {
    std::vector<Dense<T>> propagated;      // H_l = A_hat Z_{l-1}, per layer
    std::vector<Dense<T>> pre_activations; // P_l = H_l W_l, per layer
};

/// Full-graph forward: returns the n x D output (row-normalized when the
/// model says so). Pass a cache to keep what backward needs.
template <typename T>
Dense<T> forward(const GcnModel<T>& model, const Csr<T>& adj, const Dense<T>& x,
                 ForwardCache<T>* cache = nullptr) {
    if (x.cols != model.layer_dims.front())
        throw ShapeError("forward: input width does not match layer_dims[0]");
    if (adj.rows != adj.cols || adj.rows != x.rows)
        throw ShapeError("forward: adjacency must be n x n with n = input rows");
    if (cache) {
        cache->propagated.clear();
        cache->pre_activations.clear();
    }
    Dense<T> z = x;
    for (std::size_t l = 0; l < model.depth(); ++l) {
        Dense<T> h = spmm(adj, z);
        Dense<T> p = matmul(h, model.weights[l]);
        if (cache) cache->propagated.push_back(std::move(h));
        const bool last = l + 1 == model.depth();
        z = last ? p : leaky_relu(p, model.slope);
        if (cache) cache->pre_activations.push_back(std::move(p));
    }
    if (model.normalize_output) z = row_l2_normalize(z);
    return z;
}

/// Reverse-mode gradients of all W_l for upstream = dLoss/dOutput.
/// grad W_l = H_l^T delta_l with delta chained through the LeakyReLU mask
/// and A_hat (symmetric, so A_hat^T propagation reuses spmm).
template <typename T>
std::vector<Dense<T>> backward(const GcnModel<T>& model, const Csr<T>& adj,
                               const ForwardCache<T>& cache, const Dense<T>& upstream) {
    const std::size_t depth = model.depth();
    if (cache.propagated.size() != depth || cache.pre_activations.size() != depth)
        throw std::invalid_argument("backward: cache does not match model depth");
    if (!upstream.same_shape(cache.pre_activations.back()))
        throw ShapeError("backward: upstream shape does not match the forward output");

    std::vector<Dense<T>> grads(depth);
    Dense<T> delta = model.normalize_output
                         ? row_l2_normalize_grad(cache.pre_activations.back(), upstream)
                         : upstream;
    for (std::size_t l = depth; l-- > 0;) {
        if (l + 1 < depth) delta = leaky_relu_grad(cache.pre_activations[l], delta, model.slope);
        grads[l] = matmul(transpose(cache.propagated[l]), delta);
        if (l > 0) delta = spmm(adj, matmul(delta, transpose(model.weights[l])));
    }
    return grads;
}

} // namespace zsl
