#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "test_support.hpp"
#include "zsl/io.hpp"
#include "zsl/kgraph.hpp"
#include "zsl/linalg.hpp"
#include "zsl/train.hpp"

using namespace zsl;
using namespace zsltest;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
    const fs::path dir = fs::path("train_scratch") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// 10-node fixture used by the loop tests: inputs, a normalized regression
/// target correlated with them, and a 6-seen mask.
struct TinyTask {
    Csr<float> adj;
    Dense<float> x;
    Dense<float> gt;
    SeenMask mask;
};

TinyTask tiny_task() {
    TinyTask t;
    const auto g = make_random_graph(10, 18, 12);
    t.adj = normalize_adjacency<float>(g);
    Rng rng(91);
    t.x = random_dense<float>(10, 4, rng);
    t.gt = row_l2_normalize(random_dense<float>(10, 3, rng));
    t.mask.seen.assign(10, 0);
    for (std::size_t i = 0; i < 6; ++i) t.mask.seen[i] = 1;
    return t;
}

TrainConfig tiny_config(std::size_t epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = 5;
    return cfg;
}

} // namespace

TEST_CASE("masked mse hand case") {
    Dense<double> pred(2, 2), gt(2, 2);
    pred.data = {1.0, 0.0, 9.0, 9.0};
    gt.data = {0.0, 1.0, -3.0, 4.0};
    SeenMask mask;
    mask.seen = {1, 0};
    const auto [loss, grad] = masked_mse_loss(pred, gt, mask);
    CHECK(loss == doctest::Approx(1.0));
    CHECK(grad(0, 0) == doctest::Approx(1.0));
    CHECK(grad(0, 1) == doctest::Approx(-1.0));
    CHECK(grad(1, 0) == 0.0);
    CHECK(grad(1, 1) == 0.0);
}

TEST_CASE("masked mse ignores unseen rows entirely") {
    Rng rng(7);
    auto pred = random_dense<double>(4, 3, rng);
    auto gt = random_dense<double>(4, 3, rng);
    SeenMask mask;
    mask.seen = {1, 1, 0, 0};
    const auto [loss_a, grad_a] = masked_mse_loss(pred, gt, mask);
    Dense<double> gt2 = gt;
    gt2(2, 0) = 99.0;
    gt2(3, 2) = -99.0;
    const auto [loss_b, grad_b] = masked_mse_loss(pred, gt2, mask);
    CHECK(loss_a == loss_b);
    CHECK(grad_a.data == grad_b.data);
    Dense<double> same = gt;
    SeenMask all;
    all.seen = {1, 1, 1, 1};
    const auto [zero_loss, zero_grad] = masked_mse_loss(gt, same, all);
    CHECK(zero_loss == 0.0);
    for (double v : zero_grad.data) CHECK(v == 0.0);
}

TEST_CASE("masked mse gradient matches finite differences") {
    Rng rng(17);
    const auto pred = random_dense<double>(5, 4, rng);
    const auto gt = random_dense<double>(5, 4, rng);
    SeenMask mask;
    mask.seen = {1, 0, 1, 1, 0};
    const auto [loss, grad] = masked_mse_loss(pred, gt, mask);
    const auto numeric = finite_diff(pred, [&](const Dense<double>& probe) {
        return static_cast<double>(masked_mse_loss(probe, gt, mask).first);
    });
    CHECK(max_rel_err(grad, numeric) < 1e-6);
}

TEST_CASE("masked mse empty mask throws") {
    Dense<double> a(2, 2), b(2, 2);
    SeenMask mask;
    mask.seen = {0, 0};
    CHECK_THROWS_AS(masked_mse_loss(a, b, mask), std::invalid_argument);
}

TEST_CASE("masked softmax loss basics") {
    // uniform logits: loss = ln C
    Dense<double> logits(2, 4);
    SeenMask mask;
    mask.seen = {1, 1};
    const std::vector<std::size_t> labels{1, 3};
    const auto [loss, grad] = masked_softmax_loss(logits, labels, mask);
    CHECK(loss == doctest::Approx(std::log(4.0)));

    // an enormous correct logit drives the loss to zero
    Dense<double> peaked(1, 3);
    peaked.data = {50.0, 0.0, 0.0};
    SeenMask one;
    one.seen = {1};
    const auto [small, g2] = masked_softmax_loss(peaked, {0}, one);
    CHECK(small < 1e-12);
}

TEST_CASE("masked softmax hand case") {
    Dense<double> logits(3, 2);
    logits.data = {2.0, 1.0, 0.0, 0.5, -1.0, 3.0};
    SeenMask mask;
    mask.seen = {1, 1, 0};
    const std::vector<std::size_t> labels{0, 1, 0};
    const auto [loss, grad] = masked_softmax_loss(logits, labels, mask);
    const double p0 = std::exp(2.0) / (std::exp(2.0) + std::exp(1.0));
    const double p1 = std::exp(0.5) / (std::exp(0.0) + std::exp(0.5));
    const double expected = (-std::log(p0) - std::log(p1)) / 2.0;
    CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
    CHECK(grad(0, 0) == doctest::Approx((p0 - 1.0) / 2.0));
    CHECK(grad(2, 0) == 0.0);
    CHECK_THROWS_AS(masked_softmax_loss(logits, {0, 5, 0}, mask), std::invalid_argument);
}

TEST_CASE("adam zero gradient and zero decay is the identity") {
    auto model = init_model<float>({3, 2}, 0.2f, 4);
    const auto before = model.weights[0].data;
    AdamState<float> state = AdamState<float>::like(model);
    std::vector<Dense<float>> grads{Dense<float>(3, 2)};
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    adam_step(model.weights, grads, state, cfg);
    CHECK(model.weights[0].data == before);
}

TEST_CASE("adam first step matches the scalar reference trace") {
    // w=1, g=1, lr=0.001, wd=0: m_hat = 1, v_hat = 1, so w' = 1 - lr/(1+eps)
    std::vector<Dense<double>> w{Dense<double>(1, 1, 1.0)};
    std::vector<Dense<double>> g{Dense<double>(1, 1, 1.0)};
    AdamState<double> state;
    state.m.emplace_back(1, 1);
    state.v.emplace_back(1, 1);
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    adam_step(w, g, state, cfg);
    CHECK(state.t == 1);
    CHECK(w[0].data[0] == doctest::Approx(1.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adam trajectories are deterministic") {
    auto a = init_model<float>({4, 3}, 0.2f, 9);
    auto b = a;
    AdamState<float> sa = AdamState<float>::like(a);
    AdamState<float> sb = AdamState<float>::like(b);
    TrainConfig cfg;
    Rng rng(31);
    for (int step = 0; step < 5; ++step) {
        std::vector<Dense<float>> grads{random_dense<float>(4, 3, rng)};
        adam_step(a.weights, grads, sa, cfg);
        adam_step(b.weights, grads, sb, cfg);
    }
    CHECK(a.weights[0].data == b.weights[0].data);
}

TEST_CASE("fit with zero learning rate keeps the init") {
    const auto t = tiny_task();
    auto model = init_model<float>({4, 5, 3}, 0.2f, 2);
    const auto init_weights = model.weights;
    TrainConfig cfg = tiny_config(10);
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.0;
    const auto run = fit(std::move(model), t.adj, t.x, t.gt, t.mask, cfg);
    for (std::size_t l = 0; l < run.model.weights.size(); ++l)
        CHECK(run.model.weights[l].data == init_weights[l].data);
    CHECK(run.loss_history.size() == 10);
}

TEST_CASE("fit halves the loss on the tiny fixture") {
    const auto t = tiny_task();
    auto model = init_model<float>({4, 8, 3}, 0.2f, 3);
    const auto run = fit(std::move(model), t.adj, t.x, t.gt, t.mask, tiny_config(300));
    REQUIRE(run.loss_history.size() == 300);
    CHECK(run.loss_history.back() < 0.5f * run.loss_history.front());
}

TEST_CASE("fit loss is non-increasing over 50-epoch windows on the fixture") {
    const auto t = tiny_task();
    auto model = init_model<float>({4, 8, 3}, 0.2f, 3);
    const auto run = fit(std::move(model), t.adj, t.x, t.gt, t.mask, tiny_config(300));
    std::size_t upticks = 0;
    for (std::size_t e = 1; e < run.loss_history.size(); ++e)
        if (run.loss_history[e] > run.loss_history[e - 1]) ++upticks;
    for (std::size_t e = 50; e < run.loss_history.size(); ++e)
        CHECK(run.loss_history[e] <= run.loss_history[e - 50]);
    CHECK(upticks <= 5);
}

TEST_CASE("unseen ground truth rows never influence training") {
    const auto t = tiny_task();
    auto gt2 = t.gt;
    for (std::size_t i = 0; i < 10; ++i) {
        if (t.mask.seen[i]) continue;
        for (std::size_t j = 0; j < gt2.cols; ++j) gt2(i, j) = 123.0f + static_cast<float>(j);
    }
    auto model_a = init_model<float>({4, 6, 3}, 0.2f, 7);
    auto model_b = model_a;
    const auto run_a = fit(std::move(model_a), t.adj, t.x, t.gt, t.mask, tiny_config(40));
    const auto run_b = fit(std::move(model_b), t.adj, t.x, gt2, t.mask, tiny_config(40));
    CHECK(run_a.loss_history == run_b.loss_history);
    for (std::size_t l = 0; l < run_a.model.weights.size(); ++l)
        CHECK(run_a.model.weights[l].data == run_b.model.weights[l].data);
}

TEST_CASE("checkpoint round trip preserves model and optimizer bits") {
    const fs::path dir = scratch("roundtrip");
    const auto t = tiny_task();
    auto model = init_model<float>({4, 5, 3}, 0.2f, 6);
    const auto run = fit(std::move(model), t.adj, t.x, t.gt, t.mask, tiny_config(7));
    save_checkpoint(dir, run.model, 7, 5, &run.opt);
    const auto ckpt = load_checkpoint<float>(dir);
    CHECK(ckpt.epoch == 7);
    CHECK(ckpt.seed == 5);
    CHECK(ckpt.model.layer_dims == run.model.layer_dims);
    for (std::size_t l = 0; l < run.model.weights.size(); ++l)
        CHECK(ckpt.model.weights[l].data == run.model.weights[l].data);
    REQUIRE(ckpt.opt.has_value());
    CHECK(ckpt.opt->t == run.opt.t);
    for (std::size_t l = 0; l < run.opt.m.size(); ++l) {
        CHECK(ckpt.opt->m[l].data == run.opt.m[l].data);
        CHECK(ckpt.opt->v[l].data == run.opt.v[l].data);
    }
}

TEST_CASE("resume from a checkpoint continues bit-exactly") {
    const fs::path dir = scratch("resume");
    const auto t = tiny_task();

    auto model = init_model<float>({4, 5, 3}, 0.2f, 8);
    TrainConfig full_cfg = tiny_config(60);
    const auto full = fit(model, t.adj, t.x, t.gt, t.mask, full_cfg);

    TrainConfig half_cfg = tiny_config(25);
    half_cfg.checkpoint_dir = dir;
    half_cfg.checkpoint_every = 25;
    fit(model, t.adj, t.x, t.gt, t.mask, half_cfg);

    const auto ckpt = load_checkpoint<float>(dir);
    REQUIRE(ckpt.epoch == 25);
    REQUIRE(ckpt.opt.has_value());
    TrainConfig rest_cfg = tiny_config(60);
    const auto resumed = fit(ckpt.model, t.adj, t.x, t.gt, t.mask, rest_cfg, *ckpt.opt, ckpt.epoch);

    CHECK(resumed.loss_history.size() == 35);
    for (std::size_t l = 0; l < full.model.weights.size(); ++l)
        CHECK(full.model.weights[l].data == resumed.model.weights[l].data);
}

TEST_CASE("fit with zero epochs writes the init checkpoint") {
    const fs::path dir = scratch("zero_epochs");
    const auto t = tiny_task();
    auto model = init_model<float>({4, 5, 3}, 0.2f, 14);
    const auto init_weights = model.weights;
    TrainConfig cfg = tiny_config(0);
    cfg.checkpoint_dir = dir;
    const auto run = fit(std::move(model), t.adj, t.x, t.gt, t.mask, cfg);
    CHECK(run.loss_history.empty());
    const auto ckpt = load_checkpoint<float>(dir);
    CHECK(ckpt.epoch == 0);
    for (std::size_t l = 0; l < init_weights.size(); ++l)
        CHECK(ckpt.model.weights[l].data == init_weights[l].data);
}

TEST_CASE("softmax training mode runs through fit") {
    const auto g = make_random_graph(8, 12, 3);
    const auto adj = normalize_adjacency<float>(g);
    Rng rng(71);
    const auto x = random_dense<float>(8, 4, rng);
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 8; ++i) labels.push_back(i % 3);
    SeenMask mask;
    mask.seen.assign(8, 1);
    mask.seen[6] = mask.seen[7] = 0;
    auto model = init_model<float>({4, 6, 3}, 0.2f, 1, /*normalize_output=*/false);
    TrainConfig cfg = tiny_config(150);
    cfg.loss_mode = LossMode::softmax;
    const Dense<float> unused_gt(8, 3);
    const auto run = fit(std::move(model), adj, x, unused_gt, mask, cfg, AdamState<float>{}, 0, labels);
    CHECK(run.loss_history.back() < run.loss_history.front());
}

TEST_CASE("loss history csv format") {
    const fs::path dir = scratch("csv");
    save_loss_history(dir / "loss.csv", {0.5f, 0.25f});
    const auto lines = read_lines(dir / "loss.csv");
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "epoch,loss");
    CHECK(lines[1] == "1,0.5");
    CHECK(lines[2] == "2,0.25");
}
