#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "test_support.hpp"
#include "zsl/kgraph.hpp"
#include "zsl/linalg.hpp"
#include "zsl/zeroshot.hpp"

using namespace zsl;
using namespace zsltest;

namespace {

/// Independent top-k oracle: full sort of the candidate list per image by
/// (score desc, id asc), then count label ranks.
std::vector<double> topk_oracle(const DenseMatrix& scores, const std::vector<std::size_t>& labels,
                                const std::vector<std::size_t>& ks,
                                std::vector<std::size_t> candidates) {
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::vector<double> hits(ks.size(), 0.0);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        std::vector<std::size_t> order = candidates;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (scores(i, a) != scores(i, b)) return scores(i, a) > scores(i, b);
            return a < b;
        });
        for (std::size_t t = 0; t < ks.size(); ++t) {
            const std::size_t depth = std::min(ks[t], order.size());
            for (std::size_t r = 0; r < depth; ++r) {
                if (order[r] == labels[i]) {
                    hits[t] += 1.0;
                    break;
                }
            }
        }
    }
    for (double& h : hits) h /= static_cast<double>(scores.rows);
    return hits;
}

ClassifierMatrix unit_classifiers(std::size_t classes, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    ClassifierMatrix cm;
    cm.matrix = row_l2_normalize(random_dense<float>(classes, dim, rng));
    cm.normalized = true;
    cm.class_ids.resize(classes);
    std::iota(cm.class_ids.begin(), cm.class_ids.end(), std::size_t(0));
    return cm;
}

} // namespace

TEST_CASE("score images basics") {
    const auto cm = unit_classifiers(3, 4, 2);
    DenseMatrix features(2, 4);
    for (std::size_t j = 0; j < 4; ++j) features(0, j) = cm.matrix(1, j); // equals class 1 row
    const auto scores = score_images(features, cm);
    CHECK(scores(0, 1) == doctest::Approx(1.0));
    CHECK(scores(0, 0) < 1.0);
    CHECK(scores(0, 2) < 1.0);
    for (std::size_t c = 0; c < 3; ++c) CHECK(scores(1, c) == 0.0f); // zero feature
}

TEST_CASE("score images hand product") {
    ClassifierMatrix cm;
    cm.matrix = DenseMatrix(2, 3);
    cm.matrix.data = {1, 0, 2, 0, 1, -1};
    cm.class_ids = {0, 1};
    cm.normalized = true;
    DenseMatrix f(2, 3);
    f.data = {1, 2, 3, -1, 0, 1};
    const auto s = score_images(f, cm);
    CHECK(s(0, 0) == doctest::Approx(7.0));
    CHECK(s(0, 1) == doctest::Approx(-1.0));
    CHECK(s(1, 0) == doctest::Approx(1.0));
    CHECK(s(1, 1) == doctest::Approx(-1.0));
    DenseMatrix bad(1, 2);
    CHECK_THROWS_AS(score_images(bad, cm), ShapeError);
}

TEST_CASE("evaluate topk perfect and exhaustive retrieval") {
    DenseMatrix scores(3, 4);
    const std::vector<std::size_t> labels{0, 1, 2};
    for (std::size_t i = 0; i < 3; ++i) scores(i, labels[i]) = 1.0f;
    const std::vector<std::size_t> candidates{0, 1, 2, 3};
    const auto perfect = evaluate_topk(scores, labels, {1, 2, 5}, candidates, EvalSetting::unseen_only);
    for (double h : perfect.hits) CHECK(h == doctest::Approx(1.0));

    DenseMatrix noise(3, 4);
    Rng rng(4);
    for (float& v : noise.data) v = static_cast<float>(rng.next_unit());
    const auto exhaustive = evaluate_topk(noise, labels, {4}, candidates, EvalSetting::unseen_only);
    CHECK(exhaustive.hits[0] == doctest::Approx(1.0));
}

TEST_CASE("evaluate topk hand case agrees with the sort oracle") {
    DenseMatrix scores(3, 4);
    scores.data = {0.9f, 0.8f, 0.7f, 0.6f, 0.1f, 0.9f, 0.9f, 0.2f, 0.5f, 0.5f, 0.5f, 0.5f};
    const std::vector<std::size_t> labels{2, 2, 3};
    const std::vector<std::size_t> candidates{0, 1, 2, 3};
    const std::vector<std::size_t> ks{1, 2, 3};
    const auto report = evaluate_topk(scores, labels, ks, candidates, EvalSetting::unseen_only);
    const auto oracle = topk_oracle(scores, labels, ks, candidates);
    REQUIRE(report.hits.size() == oracle.size());
    for (std::size_t t = 0; t < oracle.size(); ++t) CHECK(report.hits[t] == doctest::Approx(oracle[t]));
    // image 1: ties at 0.9 for classes 1,2 break toward class 1; label 2 is rank 2
    CHECK(report.hits[0] == doctest::Approx(0.0));
    // image 2: all tied, ids 0,1,2 occupy the top 3, label 3 is rank 4
    CHECK(report.hits[2] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("evaluate topk random oracle sweep both settings") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng = Rng::stream(seed, "topk_prop");
        const std::size_t images = 1 + rng.next_below(20);
        const std::size_t classes = 2 + rng.next_below(29);
        auto scores = random_dense<float>(images, classes, rng);
        // quantize some scores to force ties
        for (float& v : scores.data)
            if (rng.next_unit() < 0.3) v = std::round(v * 4.0f) / 4.0f;
        const std::size_t num_cand = 1 + rng.next_below(classes);
        auto candidates = sample_indices(classes, num_cand, rng);
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < images; ++i)
            labels.push_back(candidates[rng.next_below(candidates.size())]);
        const std::vector<std::size_t> ks{1, 2, 5, 10, 20};

        const auto setting = seed % 2 == 0 ? EvalSetting::unseen_only : EvalSetting::generalized;
        const auto report = evaluate_topk(scores, labels, ks, candidates, setting);
        const auto oracle = topk_oracle(scores, labels, ks, candidates);
        for (std::size_t t = 0; t < ks.size(); ++t) CHECK(report.hits[t] == doctest::Approx(oracle[t]));
        for (std::size_t t = 1; t < ks.size(); ++t) CHECK(report.hits[t] >= report.hits[t - 1]);
    }
}

TEST_CASE("evaluate topk is invariant to positive row rescaling") {
    Rng rng(8);
    auto scores = random_dense<float>(4, 6, rng, 0.1, 1.0);
    const std::vector<std::size_t> labels{0, 1, 2, 3};
    const std::vector<std::size_t> candidates{0, 1, 2, 3, 4, 5};
    const auto base = evaluate_topk(scores, labels, {1, 2, 3}, candidates, EvalSetting::unseen_only);
    auto scaled = scores;
    for (std::size_t j = 0; j < scaled.cols; ++j) scaled(2, j) *= 8.0f; // exact power of two
    const auto after = evaluate_topk(scaled, labels, {1, 2, 3}, candidates, EvalSetting::unseen_only);
    CHECK(base.hits == after.hits);
}

TEST_CASE("evaluate topk error paths") {
    DenseMatrix scores(2, 3);
    const std::vector<std::size_t> labels{0, 2};
    CHECK_THROWS_AS(evaluate_topk(scores, labels, {1}, {}, EvalSetting::unseen_only),
                    std::invalid_argument);
    CHECK_THROWS_AS(evaluate_topk(scores, labels, {1}, {0, 1}, EvalSetting::unseen_only),
                    std::invalid_argument); // label 2 not a candidate
    const auto generalized = evaluate_topk(scores, labels, {1}, {0, 1}, EvalSetting::generalized);
    CHECK(generalized.num_candidates == 2); // same labels tolerated when generalized
}

TEST_CASE("generalized candidate superset never beats unseen-only") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = Rng::stream(seed, "superset");
        const std::size_t images = 5 + rng.next_below(10);
        const auto scores = random_dense<float>(images, 12, rng);
        std::vector<std::size_t> unseen{0, 1, 2, 3};
        std::vector<std::size_t> all(12);
        std::iota(all.begin(), all.end(), std::size_t(0));
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < images; ++i) labels.push_back(unseen[rng.next_below(4)]);
        const std::vector<std::size_t> ks{1, 2, 5};
        const auto narrow = evaluate_topk(scores, labels, ks, unseen, EvalSetting::unseen_only);
        const auto wide = evaluate_topk(scores, labels, ks, all, EvalSetting::generalized);
        for (std::size_t t = 0; t < ks.size(); ++t) CHECK(wide.hits[t] <= narrow.hits[t] + 1e-12);
    }
}

TEST_CASE("conse with T=1 ranks by the argmax seen class embedding") {
    Rng rng(3);
    const std::size_t m = 4, k = 5, n = 7;
    const auto seen_embed = random_dense<float>(m, k, rng);
    const auto class_embed = random_dense<float>(n, k, rng);
    DenseMatrix probs(1, m);
    probs.data = {0.1f, 0.6f, 0.2f, 0.1f};
    const auto scores = conse_scores(probs, seen_embed, {}, class_embed, 1);

    // cosine of candidate c against seen row 1 directly
    for (std::size_t c = 0; c < n; ++c) {
        double dot = 0.0, a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            dot += seen_embed(1, j) * class_embed(c, j);
            a += seen_embed(1, j) * seen_embed(1, j);
            b += class_embed(c, j) * class_embed(c, j);
        }
        CHECK(scores(0, c) == doctest::Approx(dot / std::sqrt(a * b)).epsilon(1e-5));
    }
}

TEST_CASE("conse with all mass on one class matches T=1 for any T") {
    Rng rng(5);
    const std::size_t m = 5, k = 4, n = 6;
    const auto seen_embed = random_dense<float>(m, k, rng);
    const auto class_embed = random_dense<float>(n, k, rng);
    DenseMatrix probs(1, m);
    probs(0, 2) = 1.0f;
    const auto t1 = conse_scores(probs, seen_embed, {}, class_embed, 1);
    const auto tm = conse_scores(probs, seen_embed, {}, class_embed, m);
    for (std::size_t c = 0; c < n; ++c)
        CHECK(t1(0, c) == doctest::Approx(tm(0, c)).epsilon(1e-6));
}

TEST_CASE("conse hand case with T equal to all seen classes") {
    DenseMatrix seen_embed(3, 2);
    seen_embed.data = {1, 0, 0, 1, 1, 1};
    DenseMatrix probs(1, 3);
    probs.data = {0.5f, 0.3f, 0.2f};
    DenseMatrix class_embed(2, 2);
    class_embed.data = {1, 0, 0, 1};
    const auto scores = conse_scores(probs, seen_embed, {}, class_embed, 3);
    // combined = (0.5*(1,0) + 0.3*(0,1) + 0.2*(1,1)) / 3 = (0.7, 0.5)/3
    const double norm = std::sqrt(0.7 * 0.7 + 0.5 * 0.5);
    CHECK(scores(0, 0) == doctest::Approx(0.7 / norm).epsilon(1e-6));
    CHECK(scores(0, 1) == doctest::Approx(0.5 / norm).epsilon(1e-6));
    CHECK_THROWS_AS(conse_scores(probs, seen_embed, {}, class_embed, 0), std::invalid_argument);
    CHECK_THROWS_AS(conse_scores(probs, seen_embed, {}, class_embed, 4), std::invalid_argument);
}

TEST_CASE("distance analysis hand case against the brute-force oracle") {
    // path graph 0-1-2-3-4; training classes {0, 1, 4}, unseen {2, 3}
    KnowledgeGraph g;
    for (std::size_t i = 0; i < 5; ++i) {
        g.node_names.push_back("n" + std::to_string(i));
        g.seed_flags.push_back(1);
    }
    for (std::size_t i = 0; i + 1 < 5; ++i) g.edges.push_back({i, i + 1, 1.0});

    ClassifierMatrix training;
    training.matrix = DenseMatrix(3, 2);
    training.matrix.data = {1, 0, 0, 1, 1, 1};
    training.class_ids = {0, 1, 4};

    ClassifierMatrix predicted;
    predicted.matrix = DenseMatrix(2, 2);
    predicted.matrix.data = {0, 1, 5, 5};
    predicted.class_ids = {2, 3};

    // unseen 2 within 3 hops of {0,1,4}: distances to rows (1,0),(0,1),(1,1)
    // = sqrt(2), 0, 1 -> min 0. unseen 3 within 3 hops of {0? no (3 hops: 0 is
    // 3 away -> yes), 1? 2 away yes, 4 one away}: min over all three rows.
    const auto distances = classifier_neighbor_distances(predicted, training, g, 3);
    REQUIRE(distances.size() == 2);
    CHECK(distances[0] == doctest::Approx(0.0));
    const double d3 = std::min({std::hypot(5.0 - 1.0, 5.0 - 0.0), std::hypot(5.0 - 0.0, 5.0 - 1.0),
                                std::hypot(5.0 - 1.0, 5.0 - 1.0)});
    CHECK(distances[1] == doctest::Approx(d3));
}

TEST_CASE("distance analysis marks unreachable classes infinite") {
    KnowledgeGraph g;
    for (std::size_t i = 0; i < 4; ++i) {
        g.node_names.push_back("n" + std::to_string(i));
        g.seed_flags.push_back(1);
    }
    g.edges = {{0, 1, 1.0}, {2, 3, 1.0}}; // two components
    ClassifierMatrix training;
    training.matrix = DenseMatrix(1, 2, 1.0f);
    training.class_ids = {0};
    ClassifierMatrix predicted;
    predicted.matrix = DenseMatrix(2, 2, 0.5f);
    predicted.class_ids = {1, 2};
    const auto distances = classifier_neighbor_distances(predicted, training, g, 3);
    REQUIRE(distances.size() == 2);
    CHECK(std::isfinite(distances[0]));
    CHECK(std::isinf(distances[1]));
}

TEST_CASE("unit-norm classifiers keep distances within the chord bound") {
    Rng rng(10);
    const auto g = make_random_graph(12, 20, 5);
    ClassifierMatrix training;
    training.matrix = row_l2_normalize(random_dense<float>(6, 8, rng));
    training.class_ids = {0, 1, 2, 3, 4, 5};
    ClassifierMatrix predicted;
    predicted.matrix = row_l2_normalize(random_dense<float>(6, 8, rng));
    predicted.class_ids = {6, 7, 8, 9, 10, 11};
    for (double d : classifier_neighbor_distances(predicted, training, g, 12)) {
        CHECK(d >= 0.0);
        CHECK(d <= 2.0 + 1e-6);
    }
}

TEST_CASE("mlp baseline is a function of the embedding only") {
    Rng rng(21);
    const std::size_t n = 12, k = 5, d = 4;
    auto embeddings = random_dense<float>(n, k, rng);
    // unseen class 11 shares its embedding with seen class 0
    for (std::size_t j = 0; j < k; ++j) embeddings(11, j) = embeddings(0, j);
    const auto gt = row_l2_normalize(random_dense<float>(n, d, rng));
    SeenMask mask;
    mask.seen.assign(n, 1);
    mask.seen[10] = mask.seen[11] = 0;
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 3;
    const auto predicted = mlp_baseline(embeddings, gt, mask, {8, 8}, cfg);
    REQUIRE(predicted.matrix.rows == n);
    for (std::size_t j = 0; j < d; ++j)
        CHECK(predicted.matrix(11, j) == predicted.matrix(0, j));
}

TEST_CASE("mlp baseline with zero epochs still emits unit rows") {
    Rng rng(33);
    const auto embeddings = random_dense<float>(10, 4, rng, 0.2, 1.0);
    const auto gt = row_l2_normalize(random_dense<float>(10, 3, rng));
    SeenMask mask;
    mask.seen.assign(10, 1);
    mask.seen[9] = 0;
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto predicted = mlp_baseline(embeddings, gt, mask, {6, 6}, cfg);
    for (std::size_t i = 0; i < predicted.matrix.rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < predicted.matrix.cols; ++j)
            sq += static_cast<double>(predicted.matrix(i, j)) * predicted.matrix(i, j);
        CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-5));
    }
    SeenMask degenerate;
    degenerate.seen.assign(10, 0);
    degenerate.seen[0] = 1;
    CHECK_THROWS_AS(mlp_baseline(embeddings, gt, degenerate, {6}, cfg), std::invalid_argument);
}

TEST_CASE("eval report json carries the schema fields") {
    EvalReport report;
    report.setting = EvalSetting::generalized;
    report.ks = {1, 5};
    report.hits = {0.25, 0.75};
    report.num_images = 8;
    report.num_candidates = 4;
    report.config_hash = "cafe";
    const std::string json = eval_report_json(report, {{"probs_source", "softmax"}});
    CHECK(json.find("\"setting\": \"generalized\"") != std::string::npos);
    CHECK(json.find("\"ks\"") != std::string::npos);
    CHECK(json.find("\"hits\"") != std::string::npos);
    CHECK(json.find("\"num_images\": 8") != std::string::npos);
    CHECK(json.find("\"config_hash\": \"cafe\"") != std::string::npos);
    CHECK(json.find("\"probs_source\": \"softmax\"") != std::string::npos);
}

TEST_CASE("features and classifiers round trip through sidecars") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path("zeroshot_scratch") / "files";
    fs::remove_all(dir);
    fs::create_directories(dir);
    Rng rng(2);
    LabeledFeatures lf;
    lf.features = random_dense<float>(4, 3, rng);
    lf.labels = {0, 0, 1, 2};
    save_features(dir / "f.zslm", lf);
    const auto lf2 = load_features(dir / "f.zslm");
    CHECK(lf2.features.data == lf.features.data);
    CHECK(lf2.labels == lf.labels);
    CHECK(lf2.image_ids.size() == 4);

    const auto cm = unit_classifiers(5, 3, 9);
    save_classifiers(dir / "c.zslm", cm);
    const auto cm2 = load_classifiers(dir / "c.zslm");
    CHECK(cm2.matrix.data == cm.matrix.data);
    CHECK(cm2.class_ids == cm.class_ids);
    CHECK(cm2.normalized == cm.normalized);
}
