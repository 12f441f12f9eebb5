#pragma once

#include <cstdint>
#include <filesystem>

#include "zsl/embed.hpp"
#include "zsl/kgraph.hpp"
#include "zsl/train.hpp"
#include "zsl/zeroshot.hpp"

namespace zsl {

/// Generation parameters for a synthetic zero-shot world. The defaults are
/// the desk-scale fixture: 60 classes, 16-d embeddings, 24-d classifiers,
/// 30 images per class.
struct SynthConfig {
    std::size_t num_classes = 60;
    std::size_t embed_dim = 16;
    std::size_t classifier_dim = 24;
    std::size_t images_per_class = 30;
    double embed_noise = 0.1;   // times the mean prototype row norm
    double feature_noise = 0.3; // times the mean prototype row norm
    std::size_t embed_rank = 2; // rank of the prototype->embedding projection
    double embed_signal = 0.2;  // gain of the projection relative to the noise
    std::size_t extra_edges = 5;
    std::size_t diffusion_rounds = 3;
    double diffusion_self_weight = 0.5;
    std::uint64_t seed = 7;
};

/// A complete generated task: graph, inputs, ground truth, labeled image
/// features and the seen/unseen split.
struct SyntheticTask {
    KnowledgeGraph graph;
    InputMatrix input;
    ClassifierMatrix gt_classifiers;
    LabeledFeatures features;
    SeenMask seen_mask;
    SynthConfig gen_config;
};

/// Builds the world: (1) random recursive tree plus extra random edges;
/// (2) class prototypes = i.i.d. Gaussians diffused by neighbor averaging
/// over the graph, so prototypes correlate with graph structure; (3) ground
/// truth classifier = row-normalized prototype; (4) class embedding = fixed
/// random linear projection of the prototype plus Gaussian noise;
/// (5) features per class = prototype plus Gaussian noise. Deterministic
/// per (config, seed); seen_mask starts all-seen (split it afterwards).
SyntheticTask generate_world(const SynthConfig& cfg);

/// Marks ceil(fraction * n) uniformly chosen classes unseen. Deterministic
/// per seed; errors when the split would leave no seen or no unseen class.
SyntheticTask split_seen_unseen(SyntheticTask task, double unseen_fraction, std::uint64_t seed);

/// Files as the rest of the pipeline consumes them: nodes.tsv, edges.tsv,
/// input.zslm/.json, gt_classifiers.zslm/.json, features.zslm/.json,
/// seen.txt.
void save_task(const std::filesystem::path& dir, const SyntheticTask& task);

/// Loads the file set written by save_task (gen_config is not persisted).
SyntheticTask load_task(const std::filesystem::path& dir);

std::vector<std::size_t> load_seen_list(const std::filesystem::path& path);
void save_seen_list(const std::filesystem::path& path, const SeenMask& mask);

} // namespace zsl
