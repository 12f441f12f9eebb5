#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zsl/kgraph.hpp"
#include "zsl/matrix.hpp"
#include "zsl/train.hpp"

namespace zsl {

/// Linear visual classifiers, one D-dimensional row per class. class_ids
/// aligns rows to graph node ids; rows of a normalized matrix have unit L2
/// norm (up to 1e-6) unless they are zero.
struct ClassifierMatrix {
    DenseMatrix matrix;
    std::vector<std::size_t> class_ids;
    bool normalized = false;
};

enum class EvalSetting { unseen_only, generalized };

std::string to_string(EvalSetting setting);
EvalSetting parse_eval_setting(std::string_view name);

/// Per-k hit rates for one evaluation run.
struct EvalReport {
    EvalSetting setting = EvalSetting::unseen_only;
    std::vector<std::size_t> ks;
    std::vector<double> hits;
    std::size_t num_images = 0;
    std::size_t num_candidates = 0;
    std::string config_hash;
};

std::string eval_report_json(const EvalReport& report,
                             const std::vector<std::pair<std::string, std::string>>& extras = {});

/// scores = features * classifiers^T (image i x class row c).
DenseMatrix score_images(const DenseMatrix& features, const ClassifierMatrix& classifiers);

/// hit@k over the candidate classes: the fraction of images whose true
/// label ranks among the k best-scoring candidates. Score columns are class
/// ids; ties break toward the smaller class id. The unseen-only setting
/// requires every true label to be a candidate.
EvalReport evaluate_topk(const DenseMatrix& scores, const std::vector<std::size_t>& true_labels,
                         const std::vector<std::size_t>& ks,
                         const std::vector<std::size_t>& candidate_classes, EvalSetting setting);

/// ConSE: per image, combine the embeddings of the top-T seen classes
/// weighted by their probabilities ((1/T) sum p_i x_i — the 1/T cannot
/// change the ranking), then score every candidate class by cosine
/// similarity to the combined embedding. Rows of the result align with
/// images, columns with class_embeddings rows.
DenseMatrix conse_scores(const DenseMatrix& seen_probs, const DenseMatrix& seen_embeddings,
                         const std::vector<std::size_t>& seen_ids,
                         const DenseMatrix& class_embeddings, std::size_t top_t);

/// Direct embedding->classifier regressor: an MLP (default hidden widths
/// 512, 512, LeakyReLU 0.2, row-normalized output) trained with the same
/// masked MSE machinery over an identity "graph" (no propagation). Returns
/// predicted classifiers for all classes; unseen rows are the baseline's
/// output.
ClassifierMatrix mlp_baseline(const DenseMatrix& class_embeddings, const DenseMatrix& gt_classifiers,
                              const SeenMask& mask, const std::vector<std::size_t>& hidden,
                              const TrainConfig& cfg);

/// For each predicted-unseen class, the minimum Euclidean distance to any
/// training classifier within max_hops in the graph; +infinity when no
/// training class is that close. Sorted ascending (infinities last).
std::vector<double> classifier_neighbor_distances(const ClassifierMatrix& predicted_unseen,
                                                  const ClassifierMatrix& training,
                                                  const KnowledgeGraph& graph,
                                                  std::size_t max_hops = 3);

/// ZSLM features plus sidecar {"labels": [...], "image_ids": [...]}.
struct LabeledFeatures {
    DenseMatrix features;
    std::vector<std::size_t> labels;
    std::vector<std::string> image_ids;
};

void save_features(const std::filesystem::path& path, const LabeledFeatures& lf);
LabeledFeatures load_features(const std::filesystem::path& path);

void save_classifiers(const std::filesystem::path& path, const ClassifierMatrix& cm);
ClassifierMatrix load_classifiers(const std::filesystem::path& path);

} // namespace zsl
