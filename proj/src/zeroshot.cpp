#include "zsl/zeroshot.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "zsl/io.hpp"
#include "zsl/linalg.hpp"

namespace zsl {

std::string to_string(EvalSetting setting) {
    return setting == EvalSetting::unseen_only ? "unseen-only" : "generalized";
}

EvalSetting parse_eval_setting(std::string_view name) {
    if (name == "unseen" || name == "unseen-only") return EvalSetting::unseen_only;
    if (name == "generalized") return EvalSetting::generalized;
    throw std::invalid_argument("unknown setting '" + std::string(name) +
                                "' (expected unseen|generalized)");
}

std::string eval_report_json(const EvalReport& report,
                             const std::vector<std::pair<std::string, std::string>>& extras) {
    nlohmann::json j;
    j["setting"] = to_string(report.setting);
    j["ks"] = report.ks;
    j["hits"] = report.hits;
    j["num_images"] = report.num_images;
    j["num_candidates"] = report.num_candidates;
    j["config_hash"] = report.config_hash;
    for (const auto& [key, value] : extras) j[key] = value;
    return j.dump(2) + "\n";
}

DenseMatrix score_images(const DenseMatrix& features, const ClassifierMatrix& classifiers) {
    if (features.cols != classifiers.matrix.cols)
        throw ShapeError("score_images: feature dim does not match classifier dim");
    return matmul(features, transpose(classifiers.matrix));
}

EvalReport evaluate_topk(const DenseMatrix& scores, const std::vector<std::size_t>& true_labels,
                         const std::vector<std::size_t>& ks,
                         const std::vector<std::size_t>& candidate_classes, EvalSetting setting) {
    if (candidate_classes.empty()) throw std::invalid_argument("evaluate_topk: empty candidate set");
    if (true_labels.size() != scores.rows)
        throw ShapeError("evaluate_topk: need one label per score row");
    for (std::size_t c : candidate_classes)
        if (c >= scores.cols)
            throw std::invalid_argument("evaluate_topk: candidate class beyond score columns");
    if (setting == EvalSetting::unseen_only) {
        const std::set<std::size_t> cand(candidate_classes.begin(), candidate_classes.end());
        for (std::size_t label : true_labels)
            if (!cand.count(label))
                throw std::invalid_argument(
                    "evaluate_topk: true label " + std::to_string(label) +
                    " is not a candidate under the unseen-only setting");
    }

    EvalReport report;
    report.setting = setting;
    report.ks = ks;
    report.num_images = scores.rows;
    report.num_candidates = candidate_classes.size();

    // Deterministic candidate order: score descending, class id ascending.
    std::vector<std::size_t> order(candidate_classes.begin(), candidate_classes.end());
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    report.num_candidates = order.size();

    std::vector<std::size_t> hit_counts(ks.size(), 0);
    std::vector<std::size_t> ranked = order;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        const float* row = scores.data.data() + i * scores.cols;
        ranked = order;
        std::stable_sort(ranked.begin(), ranked.end(),
                         [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
        // rank of the true label among candidates (1-based); not found => infinite
        std::size_t rank = std::numeric_limits<std::size_t>::max();
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            if (ranked[r] == true_labels[i]) {
                rank = r + 1;
                break;
            }
        }
        for (std::size_t t = 0; t < ks.size(); ++t)
            if (rank <= ks[t]) ++hit_counts[t];
    }
    for (std::size_t t = 0; t < ks.size(); ++t)
        report.hits.push_back(static_cast<double>(hit_counts[t]) /
                              static_cast<double>(std::max<std::size_t>(scores.rows, 1)));
    return report;
}

DenseMatrix conse_scores(const DenseMatrix& seen_probs, const DenseMatrix& seen_embeddings,
                         const std::vector<std::size_t>& seen_ids,
                         const DenseMatrix& class_embeddings, std::size_t top_t) {
    const std::size_t m = seen_embeddings.rows;
    const std::size_t k = seen_embeddings.cols;
    if (seen_probs.cols != m) throw ShapeError("conse_scores: probs columns must match seen classes");
    if (class_embeddings.cols != k)
        throw ShapeError("conse_scores: embedding dims disagree");
    if (!seen_ids.empty() && seen_ids.size() != m)
        throw ShapeError("conse_scores: seen_ids length must match seen classes");
    if (top_t < 1 || top_t > m)
        throw std::invalid_argument("conse_scores: top_t must lie in [1, num seen classes]");

    // Precompute candidate norms for the cosine.
    std::vector<double> cand_norm(class_embeddings.rows);
    for (std::size_t c = 0; c < class_embeddings.rows; ++c) {
        double sq = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double v = class_embeddings(c, j);
            sq += v * v;
        }
        cand_norm[c] = std::max(std::sqrt(sq), kL2Epsilon);
    }

    DenseMatrix scores(seen_probs.rows, class_embeddings.rows);
    std::vector<std::size_t> idx(m);
    std::vector<double> combined(k);
    for (std::size_t i = 0; i < seen_probs.rows; ++i) {
        const float* prow = seen_probs.data.data() + i * m;
        for (std::size_t s = 0; s < m; ++s) idx[s] = s;
        // top-T seen classes by probability; ties toward the smaller class id
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (prow[a] != prow[b]) return prow[a] > prow[b];
            const std::size_t ida = seen_ids.empty() ? a : seen_ids[a];
            const std::size_t idb = seen_ids.empty() ? b : seen_ids[b];
            return ida < idb;
        });
        std::fill(combined.begin(), combined.end(), 0.0);
        for (std::size_t t = 0; t < top_t; ++t) {
            const std::size_t s = idx[t];
            const double p = prow[s];
            for (std::size_t j = 0; j < k; ++j) combined[j] += p * seen_embeddings(s, j);
        }
        for (double& v : combined) v /= static_cast<double>(top_t);
        double csq = 0.0;
        for (double v : combined) csq += v * v;
        const double cnorm = std::max(std::sqrt(csq), kL2Epsilon);
        for (std::size_t c = 0; c < class_embeddings.rows; ++c) {
            double dot = 0.0;
            for (std::size_t j = 0; j < k; ++j) dot += combined[j] * class_embeddings(c, j);
            scores(i, c) = static_cast<float>(dot / (cnorm * cand_norm[c]));
        }
    }
    return scores;
}

ClassifierMatrix mlp_baseline(const DenseMatrix& class_embeddings, const DenseMatrix& gt_classifiers,
                              const SeenMask& mask, const std::vector<std::size_t>& hidden,
                              const TrainConfig& cfg) {
    const std::size_t n = class_embeddings.rows;
    if (gt_classifiers.rows != n) throw ShapeError("mlp_baseline: embeddings/classifiers disagree");
    if (mask.seen.size() != n) throw ShapeError("mlp_baseline: mask length mismatch");
    if (mask.count() < 2)
        throw std::invalid_argument("mlp_baseline: need at least 2 seen classes to train");
    std::vector<std::size_t> dims;
    dims.push_back(class_embeddings.cols);
    for (std::size_t h : hidden) dims.push_back(h);
    dims.push_back(gt_classifiers.cols);
    GcnModel<float> model = init_model<float>(dims, 0.2f, cfg.seed);
    const SparseMatrix identity = SparseMatrix::identity(n);
    const auto run = fit(std::move(model), identity, class_embeddings, gt_classifiers, mask, cfg);
    ClassifierMatrix out;
    out.matrix = forward(run.model, identity, class_embeddings);
    out.normalized = run.model.normalize_output;
    out.class_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.class_ids[i] = i;
    return out;
}

std::vector<double> classifier_neighbor_distances(const ClassifierMatrix& predicted_unseen,
                                                  const ClassifierMatrix& training,
                                                  const KnowledgeGraph& graph,
                                                  std::size_t max_hops) {
    const std::size_t n = graph.node_count();
    if (predicted_unseen.matrix.cols != training.matrix.cols)
        throw ShapeError("classifier_neighbor_distances: classifier dims disagree");
    for (std::size_t id : predicted_unseen.class_ids)
        if (id >= n) throw std::invalid_argument("classifier_neighbor_distances: class not in graph");
    for (std::size_t id : training.class_ids)
        if (id >= n) throw std::invalid_argument("classifier_neighbor_distances: class not in graph");

    std::vector<std::size_t> train_row(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t r = 0; r < training.class_ids.size(); ++r) train_row[training.class_ids[r]] = r;

    const auto adj = graph.adjacency();
    std::vector<double> result;
    std::vector<std::size_t> dist(n);
    for (std::size_t r = 0; r < predicted_unseen.class_ids.size(); ++r) {
        const std::size_t source = predicted_unseen.class_ids[r];
        std::fill(dist.begin(), dist.end(), std::numeric_limits<std::size_t>::max());
        std::deque<std::size_t> queue{source};
        dist[source] = 0;
        double best = std::numeric_limits<double>::infinity();
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            if (train_row[u] != std::numeric_limits<std::size_t>::max()) {
                double sq = 0.0;
                for (std::size_t j = 0; j < training.matrix.cols; ++j) {
                    const double d = static_cast<double>(predicted_unseen.matrix(r, j)) -
                                     static_cast<double>(training.matrix(train_row[u], j));
                    sq += d * d;
                }
                best = std::min(best, std::sqrt(sq));
            }
            if (dist[u] == max_hops) continue;
            for (std::size_t v : adj[u]) {
                if (dist[v] != std::numeric_limits<std::size_t>::max()) continue;
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
        result.push_back(best);
    }
    std::sort(result.begin(), result.end());
    return result;
}

void save_features(const std::filesystem::path& path, const LabeledFeatures& lf) {
    if (lf.labels.size() != lf.features.rows)
        throw ShapeError("save_features: need one label per feature row");
    save_matrix(path, lf.features);
    nlohmann::json sidecar;
    sidecar["labels"] = lf.labels;
    if (lf.image_ids.empty()) {
        std::vector<std::string> ids;
        ids.reserve(lf.features.rows);
        for (std::size_t i = 0; i < lf.features.rows; ++i) ids.push_back("img_" + std::to_string(i));
        sidecar["image_ids"] = ids;
    } else {
        sidecar["image_ids"] = lf.image_ids;
    }
    std::filesystem::path sc = path;
    sc.replace_extension(".json");
    atomic_write(sc, sidecar.dump(2) + "\n");
}

LabeledFeatures load_features(const std::filesystem::path& path) {
    LabeledFeatures lf;
    lf.features = load_matrix<float>(path);
    std::filesystem::path sc = path;
    sc.replace_extension(".json");
    try {
        const nlohmann::json sidecar = nlohmann::json::parse(read_file(sc));
        lf.labels = sidecar.at("labels").get<std::vector<std::size_t>>();
        lf.image_ids = sidecar.at("image_ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(sc.string() + ": bad sidecar: " + e.what());
    }
    if (lf.labels.size() != lf.features.rows)
        throw FormatError(path.string() + ": sidecar labels length disagrees with matrix rows");
    return lf;
}

void save_classifiers(const std::filesystem::path& path, const ClassifierMatrix& cm) {
    if (cm.class_ids.size() != cm.matrix.rows)
        throw ShapeError("save_classifiers: need one class id per row");
    save_matrix(path, cm.matrix);
    nlohmann::json sidecar;
    sidecar["class_ids"] = cm.class_ids;
    sidecar["normalized"] = cm.normalized;
    std::filesystem::path sc = path;
    sc.replace_extension(".json");
    atomic_write(sc, sidecar.dump(2) + "\n");
}

ClassifierMatrix load_classifiers(const std::filesystem::path& path) {
    ClassifierMatrix cm;
    cm.matrix = load_matrix<float>(path);
    std::filesystem::path sc = path;
    sc.replace_extension(".json");
    try {
        const nlohmann::json sidecar = nlohmann::json::parse(read_file(sc));
        cm.class_ids = sidecar.at("class_ids").get<std::vector<std::size_t>>();
        cm.normalized = sidecar.at("normalized").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(sc.string() + ": bad sidecar: " + e.what());
    }
    if (cm.class_ids.size() != cm.matrix.rows)
        throw FormatError(path.string() + ": sidecar class_ids length disagrees with matrix rows");
    return cm;
}

} // namespace zsl
