#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zsl/gcn.hpp"
#include "zsl/matrix.hpp"

namespace zsl {

enum class LossMode { regression, softmax };

LossMode parse_loss_mode(std::string_view name);

/// Defaults mirror the training protocol: Adam, lr 0.001, weight decay
/// 0.0005, 300 full-batch epochs.
struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 5e-4;
    std::size_t epochs = 300;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    LossMode loss_mode = LossMode::regression;
    std::filesystem::path checkpoint_dir; // empty = no checkpoints
    std::size_t checkpoint_every = 50;
};

/// Which of the n nodes have ground-truth classifiers (the m seen classes).
struct SeenMask {
    std::vector<std::uint8_t> seen;

    std::size_t count() const {
        std::size_t m = 0;
        for (std::uint8_t f : seen) m += f ? 1 : 0;
        return m;
    }
};

/// loss = (1/m) sum_{i in seen} (1/D) ||pred_i - gt_i||^2, gradient
/// (2/(m D))(pred_i - gt_i) on seen rows and zero elsewhere. The 1/D makes
/// the magnitude width-independent.
template <typename T>
std::pair<T, Dense<T>> masked_mse_loss(const Dense<T>& pred, const Dense<T>& gt,
                                       const SeenMask& mask) {
    if (!pred.same_shape(gt)) throw ShapeError("masked_mse_loss: shape mismatch");
    if (mask.seen.size() != pred.rows) throw ShapeError("masked_mse_loss: mask length mismatch");
    const std::size_t m = mask.count();
    if (m == 0) throw std::invalid_argument("masked_mse_loss: empty mask");
    const double scale = 1.0 / (static_cast<double>(m) * static_cast<double>(pred.cols));
    Dense<T> grad(pred.rows, pred.cols);
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.rows; ++i) {
        if (!mask.seen[i]) continue;
        for (std::size_t j = 0; j < pred.cols; ++j) {
            const double d = static_cast<double>(pred(i, j)) - static_cast<double>(gt(i, j));
            loss += scale * d * d;
            grad(i, j) = static_cast<T>(2.0 * scale * d);
        }
    }
    return {static_cast<T>(loss), std::move(grad)};
}

/// Mean cross-entropy over masked-in rows; grad = (softmax - onehot)/m
/// there, zero elsewhere.
template <typename T>
std::pair<T, Dense<T>> masked_softmax_loss(const Dense<T>& logits,
                                           const std::vector<std::size_t>& labels,
                                           const SeenMask& mask) {
    if (mask.seen.size() != logits.rows) throw ShapeError("masked_softmax_loss: mask length mismatch");
    if (labels.size() != logits.rows)
        throw ShapeError("masked_softmax_loss: need one label per node");
    const std::size_t m = mask.count();
    if (m == 0) throw std::invalid_argument("masked_softmax_loss: empty mask");
    Dense<T> grad(logits.rows, logits.cols);
    double loss = 0.0;
    std::vector<double> p(logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        if (!mask.seen[i]) continue;
        if (labels[i] >= logits.cols)
            throw std::invalid_argument("masked_softmax_loss: label out of range at node " +
                                        std::to_string(i));
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < logits.cols; ++j) mx = std::max(mx, static_cast<double>(logits(i, j)));
        double z = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            p[j] = std::exp(static_cast<double>(logits(i, j)) - mx);
            z += p[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) p[j] /= z;
        loss += -std::log(std::max(p[labels[i]], 1e-300)) / static_cast<double>(m);
        for (std::size_t j = 0; j < logits.cols; ++j) {
            const double onehot = j == labels[i] ? 1.0 : 0.0;
            grad(i, j) = static_cast<T>((p[j] - onehot) / static_cast<double>(m));
        }
    }
    return {static_cast<T>(loss), std::move(grad)};
}

/// Per-weight Adam moments plus the shared step counter.
template <typename T>
struct AdamState {
    std::vector<Dense<T>> m;
    std::vector<Dense<T>> v;
    std::uint64_t t = 0;

    static AdamState like(const GcnModel<T>& model) {
        AdamState s;
        for (const Dense<T>& w : model.weights) {
            s.m.emplace_back(w.rows, w.cols);
            s.v.emplace_back(w.rows, w.cols);
        }
        return s;
    }
};

/// Classic Adam with bias correction. Weight decay is coupled: folded into
/// the gradient (g += wd * w) before the moment updates.
template <typename T>
void adam_step(std::vector<Dense<T>>& weights, const std::vector<Dense<T>>& grads,
               AdamState<T>& state, const TrainConfig& cfg) {
    if (weights.size() != grads.size() || weights.size() != state.m.size())
        throw ShapeError("adam_step: weights/grads/state disagree");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].same_shape(grads[l])) throw ShapeError("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < weights[l].data.size(); ++i) {
            const double w = weights[l].data[i];
            const double g = static_cast<double>(grads[l].data[i]) + cfg.weight_decay * w;
            const double m = cfg.beta1 * state.m[l].data[i] + (1.0 - cfg.beta1) * g;
            const double v = cfg.beta2 * state.v[l].data[i] + (1.0 - cfg.beta2) * g * g;
            state.m[l].data[i] = static_cast<T>(m);
            state.v[l].data[i] = static_cast<T>(v);
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            weights[l].data[i] = static_cast<T>(w - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps));
        }
    }
}

template <typename T>
struct FitResult {
    GcnModel<T> model;
    AdamState<T> opt;
    std::vector<T> loss_history; // entry e = loss at the start of epoch start+e+1
};

template <typename T>
struct Checkpoint {
    GcnModel<T> model;
    std::optional<AdamState<T>> opt;
    std::size_t epoch = 0;
    std::uint64_t seed = 0;
};

/// JSON manifest {layer_dims, slope, normalize_output, seed, epoch} plus one
/// ZSLM file per weight matrix; optimizer moments ride along so training can
/// resume bit-exactly. Writes are atomic.
template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const GcnModel<T>& model, std::size_t epoch,
                     std::uint64_t seed, const AdamState<T>* opt = nullptr);

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& dir);

namespace detail {

template <typename T>
std::string layer_norms(const GcnModel<T>& model) {
    std::string out;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        double sq = 0.0;
        for (T v : model.weights[l].data) sq += static_cast<double>(v) * static_cast<double>(v);
        out += (l ? ", " : "") + ("W" + std::to_string(l) + "=" + std::to_string(std::sqrt(sq)));
    }
    return out;
}

} // namespace detail

/// The full-batch loop: epochs x (forward -> loss -> backward -> adam_step),
/// starting from `start_epoch` (0 for a fresh run; pass a checkpoint's model,
/// optimizer state and epoch to resume). Regression mode reads `gt`, softmax
/// mode reads `labels`. Checkpoints land every cfg.checkpoint_every epochs
/// and at the end when cfg.checkpoint_dir is set. A non-finite loss aborts
/// with TrainingDiverged carrying the epoch and layer norms.
template <typename T>
FitResult<T> fit(GcnModel<T> model, const Csr<T>& adj, const Dense<T>& x, const Dense<T>& gt,
                 const SeenMask& mask, const TrainConfig& cfg,
                 AdamState<T> opt_state = AdamState<T>{}, std::size_t start_epoch = 0,
                 const std::vector<std::size_t>& labels = {}) {
    FitResult<T> result;
    result.model = std::move(model);
    result.opt = opt_state.m.empty() ? AdamState<T>::like(result.model) : std::move(opt_state);
    std::size_t last_saved = std::numeric_limits<std::size_t>::max();
    const bool checkpoints = !cfg.checkpoint_dir.empty();
    for (std::size_t epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        ForwardCache<T> cache;
        const Dense<T> out = forward(result.model, adj, x, &cache);
        T loss;
        Dense<T> upstream;
        if (cfg.loss_mode == LossMode::regression)
            std::tie(loss, upstream) = masked_mse_loss(out, gt, mask);
        else
            std::tie(loss, upstream) = masked_softmax_loss(out, labels, mask);
        if (!std::isfinite(static_cast<double>(loss)))
            throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                                   "; layer norms: " + detail::layer_norms(result.model));
        const auto grads = backward(result.model, adj, cache, upstream);
        adam_step(result.model.weights, grads, result.opt, cfg);
        result.loss_history.push_back(loss);
        if (checkpoints && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
            save_checkpoint(cfg.checkpoint_dir, result.model, epoch, cfg.seed, &result.opt);
            last_saved = epoch;
        }
    }
    if (checkpoints && last_saved != cfg.epochs)
        save_checkpoint(cfg.checkpoint_dir, result.model, cfg.epochs, cfg.seed, &result.opt);
    return result;
}

/// loss_history as CSV `epoch,loss`, epochs 1-based.
void save_loss_history(const std::filesystem::path& path, const std::vector<float>& history,
                       std::size_t start_epoch = 0);

} // namespace zsl
