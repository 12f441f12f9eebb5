#include "zsl/synth.hpp"

#include <cmath>
#include <set>

#include "zsl/errors.hpp"
#include "zsl/io.hpp"
#include "zsl/linalg.hpp"

namespace zsl {

namespace {

std::string class_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "class_%03zu", i);
    return buf;
}

} // namespace

SyntheticTask generate_world(const SynthConfig& cfg) {
    if (cfg.num_classes < 10) throw std::invalid_argument("generate_world: need at least 10 classes");
    if (cfg.embed_dim == 0 || cfg.classifier_dim == 0)
        throw std::invalid_argument("generate_world: zero dimension");
    if (cfg.images_per_class == 0)
        throw std::invalid_argument("generate_world: images_per_class must be positive");
    const std::size_t n = cfg.num_classes;
    const std::size_t d = cfg.classifier_dim;
    const std::size_t k = cfg.embed_dim;

    SyntheticTask task;
    task.gen_config = cfg;

    // Random recursive tree plus extra random edges.
    Rng tree_rng = Rng::stream(cfg.seed, "tree");
    for (std::size_t i = 0; i < n; ++i) {
        task.graph.node_names.push_back(class_name(i));
        task.graph.seed_flags.push_back(1);
    }
    std::set<std::pair<std::size_t, std::size_t>> present;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t parent = static_cast<std::size_t>(tree_rng.next_below(i));
        task.graph.edges.push_back({parent, i, 1.0});
        present.insert(std::minmax(parent, i));
    }
    Rng extra_rng = Rng::stream(cfg.seed, "extra_edges");
    std::size_t added = 0;
    const std::size_t max_extra = n * (n - 1) / 2 - (n - 1);
    while (added < std::min(cfg.extra_edges, max_extra)) {
        const std::size_t u = static_cast<std::size_t>(extra_rng.next_below(n));
        const std::size_t v = static_cast<std::size_t>(extra_rng.next_below(n));
        if (u == v) continue;
        const auto key = std::minmax(u, v);
        if (!present.insert(key).second) continue;
        task.graph.edges.push_back({key.first, key.second, 1.0});
        ++added;
    }
    task.graph = symmetrize(task.graph);

    // Latent prototypes: i.i.d. Gaussians diffused along the graph so that
    // neighboring classes end up with correlated classifiers.
    Dense<double> proto(n, d);
    Rng proto_rng = Rng::stream(cfg.seed, "prototype");
    for (double& v : proto.data) v = proto_rng.next_gaussian();
    const auto adj = task.graph.adjacency();
    for (std::size_t round = 0; round < cfg.diffusion_rounds; ++round) {
        Dense<double> next(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            if (adj[i].empty()) {
                for (std::size_t j = 0; j < d; ++j) next(i, j) = proto(i, j);
                continue;
            }
            for (std::size_t j = 0; j < d; ++j) {
                double nbr = 0.0;
                for (std::size_t u : adj[i]) nbr += proto(u, j);
                nbr /= static_cast<double>(adj[i].size());
                next(i, j) = cfg.diffusion_self_weight * proto(i, j) +
                             (1.0 - cfg.diffusion_self_weight) * nbr;
            }
        }
        proto = std::move(next);
    }
    // Noise scale reference: the mean prototype row norm after diffusion.
    double proto_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sq += proto(i, j) * proto(i, j);
        proto_scale += std::sqrt(sq);
    }
    proto_scale /= static_cast<double>(n);

    // Ground truth classifiers: row-normalized prototypes.
    task.gt_classifiers.matrix = DenseMatrix(n, d);
    for (std::size_t i = 0; i < proto.data.size(); ++i)
        task.gt_classifiers.matrix.data[i] = static_cast<float>(proto.data[i]);
    task.gt_classifiers.matrix = row_l2_normalize(task.gt_classifiers.matrix);
    task.gt_classifiers.normalized = true;
    task.gt_classifiers.class_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) task.gt_classifiers.class_ids[i] = i;

    // Class embeddings: fixed random projection of the prototype plus noise.
    // The projection factors through embed_rank dimensions, so embeddings
    // see only a low-rank shadow of the prototype space; the graph carries
    // the rest. Factor scales keep the per-entry signal variance near the
    // prototype entry variance.
    const std::size_t rank = std::min(cfg.embed_rank == 0 ? k : cfg.embed_rank, std::min(d, k));
    Rng proj_rng = Rng::stream(cfg.seed, "projection");
    Dense<double> lift(d, rank);
    for (double& v : lift.data) v = proj_rng.next_gaussian() / std::sqrt(static_cast<double>(d));
    Dense<double> spread(rank, k);
    for (double& v : spread.data)
        v = cfg.embed_signal * proj_rng.next_gaussian() / std::sqrt(static_cast<double>(rank));
    const Dense<double> projection = matmul(lift, spread);
    Rng embed_rng = Rng::stream(cfg.seed, "embed_noise");
    task.input.matrix = DenseMatrix(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double v = 0.0;
            for (std::size_t a = 0; a < d; ++a) v += proto(i, a) * projection(a, j);
            v += cfg.embed_noise * proto_scale * embed_rng.next_gaussian();
            task.input.matrix(i, j) = static_cast<float>(v);
        }
    }
    task.input.coverage.assign(n, 1.0f);

    // Image features: prototype plus noise, class-major order.
    Rng feat_rng = Rng::stream(cfg.seed, "features");
    task.features.features = DenseMatrix(n * cfg.images_per_class, d);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t img = 0; img < cfg.images_per_class; ++img) {
            const std::size_t row = c * cfg.images_per_class + img;
            for (std::size_t j = 0; j < d; ++j)
                task.features.features(row, j) = static_cast<float>(
                    proto(c, j) + cfg.feature_noise * proto_scale * feat_rng.next_gaussian());
            task.features.labels.push_back(c);
            task.features.image_ids.push_back("img_" + std::to_string(row));
        }
    }

    task.seen_mask.seen.assign(n, 1);
    return task;
}

SyntheticTask split_seen_unseen(SyntheticTask task, double unseen_fraction, std::uint64_t seed) {
    if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0))
        throw std::invalid_argument("split_seen_unseen: fraction must lie in (0,1)");
    const std::size_t n = task.graph.node_count();
    const std::size_t unseen =
        static_cast<std::size_t>(std::ceil(unseen_fraction * static_cast<double>(n)));
    if (unseen == 0 || unseen >= n)
        throw std::invalid_argument("split_seen_unseen: split leaves no seen or no unseen class");
    Rng rng = Rng::stream(seed, "split");
    const auto unseen_ids = sample_indices(n, unseen, rng);
    task.seen_mask.seen.assign(n, 1);
    for (std::size_t id : unseen_ids) task.seen_mask.seen[id] = 0;
    return task;
}

void save_task(const std::filesystem::path& dir, const SyntheticTask& task) {
    std::filesystem::create_directories(dir);
    save_graph(dir / "nodes.tsv", dir / "edges.tsv", task.graph);
    save_input_matrix(dir / "input.zslm", task.input, task.graph.node_names);
    save_classifiers(dir / "gt_classifiers.zslm", task.gt_classifiers);
    save_features(dir / "features.zslm", task.features);
    save_seen_list(dir / "seen.txt", task.seen_mask);
}

SyntheticTask load_task(const std::filesystem::path& dir) {
    SyntheticTask task;
    task.graph = build_graph(dir / "nodes.tsv", dir / "edges.tsv", 0.0);
    const StoredInput stored = load_input_matrix(dir / "input.zslm");
    if (stored.node_order != task.graph.node_names)
        throw FormatError((dir / "input.zslm").string() + ": node order disagrees with nodes.tsv");
    task.input.matrix = stored.matrix;
    task.input.coverage.assign(task.graph.node_count(), 1.0f);
    task.gt_classifiers = load_classifiers(dir / "gt_classifiers.zslm");
    task.features = load_features(dir / "features.zslm");
    const auto seen = load_seen_list(dir / "seen.txt");
    task.seen_mask.seen.assign(task.graph.node_count(), 0);
    for (std::size_t id : seen) {
        if (id >= task.seen_mask.seen.size())
            throw FormatError((dir / "seen.txt").string() + ": seen id out of range");
        task.seen_mask.seen[id] = 1;
    }
    return task;
}

std::vector<std::size_t> load_seen_list(const std::filesystem::path& path) {
    std::vector<std::size_t> seen;
    const auto lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (lines[ln].empty() || lines[ln][0] == '#') continue;
        try {
            seen.push_back(std::stoul(lines[ln]));
        } catch (const std::exception&) {
            throw ParseError(path.string(), ln + 1, "expected a node id");
        }
    }
    return seen;
}

void save_seen_list(const std::filesystem::path& path, const SeenMask& mask) {
    std::string out;
    for (std::size_t i = 0; i < mask.seen.size(); ++i)
        if (mask.seen[i]) out += std::to_string(i) + "\n";
    atomic_write(path, out);
}

} // namespace zsl
