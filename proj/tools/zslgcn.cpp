// zslgcn: synthesize linear visual classifiers for unseen categories by
// propagating word embeddings through a knowledge graph with a deep GCN.
// Subcommands cover the full pipeline: task synthesis, subgraph extraction,
// training, evaluation, the ConSE baseline, ablations and the
// classifier-distance analysis.

#include <cstdio>
#include <ctime>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "zsl/embed.hpp"
#include "zsl/errors.hpp"
#include "zsl/io.hpp"
#include "zsl/kgraph.hpp"
#include "zsl/linalg.hpp"
#include "zsl/synth.hpp"
#include "zsl/train.hpp"
#include "zsl/zeroshot.hpp"

namespace fs = std::filesystem;
using namespace zsl;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 ok, 2 flag error, 3 runtime error, 4 file-format error.
enum ExitCode { kOk = 0, kFlagError = 2, kRuntimeError = 3, kFormatError = 4 };

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;

    void add_input(const fs::path& path) { inputs[path.string()] = hash_file(path); }
    void add_output(const fs::path& path) { outputs[path.string()] = hash_file(path); }

    /// Hash of all input hashes plus the argv; identifies a run's configuration.
    std::string config_hash() const {
        std::string acc;
        for (const auto& [path, hash] : inputs) acc += hash;
        for (const auto& arg : argv) acc += arg + '\0';
        return hash_bytes(acc);
    }

    void write(const fs::path& dir) const {
        nlohmann::json j;
        j["command"] = command;
        j["argv"] = argv;
        j["seed"] = seed;
        j["tool_version"] = kToolVersion;
        char stamp[32];
        const std::time_t now = std::time(nullptr);
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
        j["timestamp"] = stamp;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["config_hash"] = config_hash();
        atomic_write(dir / "manifest.json", j.dump(2) + "\n");
    }
};

std::vector<std::size_t> parse_size_list(const std::string& csv, const char* what) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t end = csv.find(',', start);
        if (end == std::string::npos) end = csv.size();
        const std::string item = csv.substr(start, end - start);
        if (item.empty()) throw CLI::ValidationError(what, "empty element in list");
        try {
            out.push_back(std::stoul(item));
        } catch (const std::exception&) {
            throw CLI::ValidationError(what, "expected integers, got '" + item + "'");
        }
        start = end + 1;
    }
    return out;
}

std::vector<double> parse_real_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t end = csv.find(',', start);
        if (end == std::string::npos) end = csv.size();
        const std::string item = csv.substr(start, end - start);
        if (item.empty()) throw CLI::ValidationError(what, "empty element in list");
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw CLI::ValidationError(what, "expected numbers, got '" + item + "'");
        }
        start = end + 1;
    }
    return out;
}

/// Embeddings argument: a .zslm input matrix (with node-order sidecar) or a
/// GloVe text file assembled against the graph under the missing policy.
DenseMatrix load_node_embeddings(const fs::path& path, const KnowledgeGraph& graph,
                                 const std::string& missing_policy) {
    if (path.extension() == ".zslm") {
        const StoredInput stored = load_input_matrix(path);
        if (stored.node_order != graph.node_names)
            throw FormatError(path.string() + ": node order disagrees with the graph");
        return stored.matrix;
    }
    const EmbeddingTable table = load_embeddings(path);
    return assemble_input_matrix(graph, table, parse_missing_policy(missing_policy)).matrix;
}

SeenMask seen_mask_from_file(const fs::path& path, std::size_t n) {
    SeenMask mask;
    mask.seen.assign(n, 0);
    for (std::size_t id : load_seen_list(path)) {
        if (id >= n)
            throw FormatError(path.string() + ": seen id " + std::to_string(id) +
                              " out of range for " + std::to_string(n) + " nodes");
        mask.seen[id] = 1;
    }
    return mask;
}

std::vector<std::size_t> full_dims(std::size_t k, const std::vector<std::size_t>& hidden,
                                   std::size_t d) {
    std::vector<std::size_t> dims{k};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(d);
    return dims;
}

ClassifierMatrix predict_classifiers(const GcnModel<float>& model, const KnowledgeGraph& graph,
                                     const DenseMatrix& x) {
    const auto adj = normalize_adjacency<float>(graph);
    ClassifierMatrix cm;
    cm.matrix = forward(model, adj, x);
    cm.normalized = model.normalize_output;
    cm.class_ids.resize(cm.matrix.rows);
    std::iota(cm.class_ids.begin(), cm.class_ids.end(), std::size_t(0));
    return cm;
}

/// Test images come from unseen classes only; seen-class images are
/// excluded whenever the seen/unseen split is known.
LabeledFeatures filter_unseen_images(const LabeledFeatures& all, const SeenMask& mask) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < all.labels.size(); ++r)
        if (all.labels[r] >= mask.seen.size() || !mask.seen[all.labels[r]]) rows.push_back(r);
    LabeledFeatures out;
    out.features = DenseMatrix(rows.size(), all.features.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < all.features.cols; ++j)
            out.features(r, j) = all.features(rows[r], j);
        out.labels.push_back(all.labels[rows[r]]);
        if (rows[r] < all.image_ids.size()) out.image_ids.push_back(all.image_ids[rows[r]]);
    }
    return out;
}

std::string format_hits_csv_row(const std::string& param, const EvalReport& report) {
    std::string row = param;
    char buf[32];
    for (double h : report.hits) {
        std::snprintf(buf, sizeof(buf), ",%.6f", h);
        row += buf;
    }
    return row + "\n";
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    std::size_t classes = 60;
    double unseen_frac = 0.15;
    std::size_t embed_dim = 16;
    std::size_t classifier_dim = 24;
    std::size_t images_per_class = 30;
    double embed_noise = 0.1;
    double feature_noise = 0.3;
    std::size_t embed_rank = 2;
    double embed_signal = 0.2;
    std::size_t extra_edges = 5;
    std::uint64_t seed = 7;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& args, Manifest manifest) {
    SynthConfig cfg;
    cfg.num_classes = args.classes;
    cfg.embed_dim = args.embed_dim;
    cfg.classifier_dim = args.classifier_dim;
    cfg.images_per_class = args.images_per_class;
    cfg.embed_noise = args.embed_noise;
    cfg.feature_noise = args.feature_noise;
    cfg.embed_rank = args.embed_rank;
    cfg.embed_signal = args.embed_signal;
    cfg.extra_edges = args.extra_edges;
    cfg.seed = args.seed;
    const SyntheticTask task = split_seen_unseen(generate_world(cfg), args.unseen_frac, args.seed);
    const fs::path dir(args.out_dir);
    save_task(dir, task);
    for (const char* name : {"nodes.tsv", "edges.tsv", "input.zslm", "input.json",
                             "gt_classifiers.zslm", "gt_classifiers.json", "features.zslm",
                             "features.json", "seen.txt"})
        manifest.add_output(dir / name);
    manifest.write(dir);
    std::printf("wrote synthetic task (%zu classes, %zu seen) to %s\n", task.graph.node_count(),
                task.seen_mask.count(), dir.string().c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// extract-subgraph

struct ExtractArgs {
    std::string nodes, edges;
    double min_confidence = 0.0;
    std::size_t max_hops = 7;
    std::string out_dir;
};

int cmd_extract_subgraph(const ExtractArgs& args, Manifest manifest) {
    manifest.add_input(args.nodes);
    manifest.add_input(args.edges);
    const KnowledgeGraph g = build_graph(args.nodes, args.edges, args.min_confidence);
    const SubgraphResult sub = extract_bfs_subgraph(symmetrize(g), args.max_hops);
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    save_graph(dir / "nodes.tsv", dir / "edges.tsv", sub.graph);
    save_id_map(dir / "idmap.tsv", sub.id_map);
    for (const char* name : {"nodes.tsv", "edges.tsv", "idmap.tsv"})
        manifest.add_output(dir / name);
    manifest.write(dir);
    std::printf("subgraph: %zu of %zu nodes, %zu of %zu edges kept\n", sub.graph.node_count(),
                g.node_count(), sub.graph.edges.size(), g.edges.size());
    return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string graph_dir;
    std::string embeddings;
    std::string gt_classifiers;
    std::string seen_list;
    std::string dims = "2048,2048,1024,1024,512";
    std::string missing_policy = "partial-average";
    double lr = 1e-3;
    double wd = 5e-4;
    std::size_t epochs = 300;
    double slope = 0.2;
    std::uint64_t seed = 0;
    std::string loss_mode = "regression";
    std::string out_dir;
};

int cmd_train(const TrainArgs& args, Manifest manifest) {
    const fs::path graph_dir(args.graph_dir);
    manifest.add_input(graph_dir / "nodes.tsv");
    manifest.add_input(graph_dir / "edges.tsv");
    manifest.add_input(args.embeddings);
    manifest.add_input(args.gt_classifiers);
    manifest.add_input(args.seen_list);

    const KnowledgeGraph graph = build_graph(graph_dir / "nodes.tsv", graph_dir / "edges.tsv", 0.0);
    const DenseMatrix x = load_node_embeddings(args.embeddings, graph, args.missing_policy);
    ClassifierMatrix gt = load_classifiers(args.gt_classifiers);
    if (gt.matrix.rows != graph.node_count())
        throw FormatError(args.gt_classifiers + ": classifier rows disagree with the graph");
    const SeenMask mask = seen_mask_from_file(args.seen_list, graph.node_count());

    // Ground truth rows are normalized once, here, per the training contract.
    if (!gt.normalized) {
        gt.matrix = row_l2_normalize(gt.matrix);
        gt.normalized = true;
    }

    TrainConfig cfg;
    cfg.learning_rate = args.lr;
    cfg.weight_decay = args.wd;
    cfg.epochs = args.epochs;
    cfg.seed = args.seed;
    cfg.loss_mode = parse_loss_mode(args.loss_mode);
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    cfg.checkpoint_dir = dir / "checkpoint";

    std::vector<std::size_t> labels;
    if (cfg.loss_mode == LossMode::softmax) {
        // softmax mode reads the target matrix as per-node class scores;
        // the label of a node is its argmax column.
        labels.resize(graph.node_count());
        for (std::size_t i = 0; i < gt.matrix.rows; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < gt.matrix.cols; ++j)
                if (gt.matrix(i, j) > gt.matrix(i, best)) best = j;
            labels[i] = best;
        }
    }

    const auto dims = full_dims(x.cols, parse_size_list(args.dims, "--dims"), gt.matrix.cols);
    auto model = init_model<float>(dims, static_cast<float>(args.slope), args.seed);
    const auto run = fit(std::move(model), normalize_adjacency<float>(graph), x, gt.matrix, mask,
                         cfg, AdamState<float>{}, 0, labels);
    save_loss_history(dir / "loss.csv", run.loss_history);

    manifest.add_output(dir / "loss.csv");
    manifest.add_output(dir / "checkpoint" / "checkpoint.json");
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        manifest.add_output(dir / "checkpoint" / ("weight_" + std::to_string(l) + ".zslm"));
    manifest.write(dir);
    std::printf("trained %zu epochs, final loss %.6g, checkpoint in %s\n", cfg.epochs,
                run.loss_history.empty() ? 0.0 : static_cast<double>(run.loss_history.back()),
                (dir / "checkpoint").string().c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint;
    std::string graph_dir;
    std::string embeddings;
    std::string features;
    std::string seen_list;
    std::string gt_classifiers; // optional; used for seen rows in generalized mode
    std::string missing_policy = "partial-average";
    std::string setting = "unseen";
    std::string ks = "1,2,5,10,20";
    std::string out;
};

int cmd_eval(const EvalArgs& args, Manifest manifest) {
    const fs::path graph_dir(args.graph_dir);
    manifest.add_input(graph_dir / "nodes.tsv");
    manifest.add_input(graph_dir / "edges.tsv");
    manifest.add_input(args.embeddings);
    manifest.add_input(args.features);
    manifest.add_input(fs::path(args.checkpoint) / "checkpoint.json");
    if (!args.seen_list.empty()) manifest.add_input(args.seen_list);
    if (!args.gt_classifiers.empty()) manifest.add_input(args.gt_classifiers);

    const KnowledgeGraph graph = build_graph(graph_dir / "nodes.tsv", graph_dir / "edges.tsv", 0.0);
    const DenseMatrix x = load_node_embeddings(args.embeddings, graph, args.missing_policy);
    const auto ckpt = load_checkpoint<float>(args.checkpoint);
    ClassifierMatrix classifiers = predict_classifiers(ckpt.model, graph, x);
    LabeledFeatures test = load_features(args.features);
    const EvalSetting setting = parse_eval_setting(args.setting);

    std::vector<std::size_t> candidates;
    if (!args.seen_list.empty()) {
        const SeenMask mask = seen_mask_from_file(args.seen_list, graph.node_count());
        test = filter_unseen_images(test, mask);
        for (std::size_t i = 0; i < graph.node_count(); ++i)
            if (setting == EvalSetting::generalized || !mask.seen[i]) candidates.push_back(i);
        if (setting == EvalSetting::generalized && !args.gt_classifiers.empty()) {
            // the paper's generalized protocol scores seen classes with their
            // real trained classifiers, unseen ones with the predictions
            const ClassifierMatrix gt = load_classifiers(args.gt_classifiers);
            if (gt.matrix.rows != graph.node_count())
                throw FormatError(args.gt_classifiers + ": classifier rows disagree with the graph");
            for (std::size_t i = 0; i < graph.node_count(); ++i) {
                if (!mask.seen[i]) continue;
                for (std::size_t j = 0; j < classifiers.matrix.cols; ++j)
                    classifiers.matrix(i, j) = gt.matrix(i, j);
            }
        }
    } else {
        if (setting == EvalSetting::generalized)
            throw std::invalid_argument("--setting generalized requires --seen-list");
        std::vector<std::size_t> sorted = test.labels;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        candidates = sorted;
    }

    const DenseMatrix scores = score_images(test.features, classifiers);
    EvalReport report = evaluate_topk(scores, test.labels, parse_size_list(args.ks, "--ks"),
                                      candidates, setting);
    report.config_hash = manifest.config_hash();
    atomic_write(args.out, eval_report_json(report));
    manifest.add_output(args.out);
    manifest.write(fs::path(args.out).parent_path());
    std::printf("%s", eval_report_json(report).c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// conse

struct ConseArgs {
    std::string features;
    std::string embeddings; // input matrix (.zslm) aligned to the graph? or per-class matrix
    std::string graph_dir;
    std::string seen_list;
    std::string gt_classifiers; // for probs via softmax
    std::string probs;          // precomputed seen-class probabilities
    std::string missing_policy = "partial-average";
    std::size_t top_t = 10;
    std::string setting = "unseen";
    std::string ks = "1,2,5,10,20";
    std::string out;
};

int cmd_conse(const ConseArgs& args, Manifest manifest) {
    const fs::path graph_dir(args.graph_dir);
    manifest.add_input(graph_dir / "nodes.tsv");
    manifest.add_input(graph_dir / "edges.tsv");
    manifest.add_input(args.embeddings);
    manifest.add_input(args.features);
    manifest.add_input(args.seen_list);

    const KnowledgeGraph graph = build_graph(graph_dir / "nodes.tsv", graph_dir / "edges.tsv", 0.0);
    const DenseMatrix class_embeddings =
        load_node_embeddings(args.embeddings, graph, args.missing_policy);
    const SeenMask mask = seen_mask_from_file(args.seen_list, graph.node_count());
    const LabeledFeatures test = filter_unseen_images(load_features(args.features), mask);

    std::vector<std::size_t> seen_ids, unseen_ids;
    for (std::size_t i = 0; i < graph.node_count(); ++i)
        (mask.seen[i] ? seen_ids : unseen_ids).push_back(i);
    DenseMatrix seen_embeddings(seen_ids.size(), class_embeddings.cols);
    for (std::size_t r = 0; r < seen_ids.size(); ++r)
        for (std::size_t j = 0; j < class_embeddings.cols; ++j)
            seen_embeddings(r, j) = class_embeddings(seen_ids[r], j);

    DenseMatrix probs;
    std::string probs_source;
    if (!args.probs.empty()) {
        manifest.add_input(args.probs);
        probs = load_matrix<float>(args.probs);
        probs_source = "file";
        if (probs.rows != test.features.rows || probs.cols != seen_ids.size())
            throw FormatError(args.probs + ": probability matrix must be num_images x num_seen");
    } else {
        if (args.gt_classifiers.empty())
            throw std::invalid_argument("conse needs --probs or --gt-classifiers");
        manifest.add_input(args.gt_classifiers);
        const ClassifierMatrix gt = load_classifiers(args.gt_classifiers);
        ClassifierMatrix seen_cls;
        seen_cls.matrix = DenseMatrix(seen_ids.size(), gt.matrix.cols);
        for (std::size_t r = 0; r < seen_ids.size(); ++r)
            for (std::size_t j = 0; j < gt.matrix.cols; ++j)
                seen_cls.matrix(r, j) = gt.matrix(seen_ids[r], j);
        seen_cls.class_ids = seen_ids;
        seen_cls.normalized = gt.normalized;
        const DenseMatrix raw = score_images(test.features, seen_cls);
        probs = DenseMatrix(raw.rows, raw.cols);
        for (std::size_t i = 0; i < raw.rows; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < raw.cols; ++j)
                mx = std::max(mx, static_cast<double>(raw(i, j)));
            double z = 0.0;
            for (std::size_t j = 0; j < raw.cols; ++j) z += std::exp(raw(i, j) - mx);
            for (std::size_t j = 0; j < raw.cols; ++j)
                probs(i, j) = static_cast<float>(std::exp(raw(i, j) - mx) / z);
        }
        probs_source = "softmax(gt-classifier scores)";
    }

    const DenseMatrix scores = conse_scores(probs, seen_embeddings, seen_ids, class_embeddings,
                                            args.top_t);
    const EvalSetting setting = parse_eval_setting(args.setting);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < graph.node_count(); ++i)
        if (setting == EvalSetting::generalized || !mask.seen[i]) candidates.push_back(i);

    EvalReport report = evaluate_topk(scores, test.labels, parse_size_list(args.ks, "--ks"),
                                      candidates, setting);
    report.config_hash = manifest.config_hash();
    const std::string json = eval_report_json(
        report, {{"probs_source", probs_source}, {"top_t", std::to_string(args.top_t)}});
    atomic_write(args.out, json);
    manifest.add_output(args.out);
    manifest.write(fs::path(args.out).parent_path());
    std::printf("%s", json.c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
    std::string task_dir;
    std::string dims = "64,64,48,48,32";
    double lr = 1e-3;
    double wd = 5e-4;
    std::size_t epochs = 300;
    std::string seeds = "1,2,3";
    std::string ks = "1,2,5";
    std::string out;
    // drop-edges
    std::string fractions = "0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5";
    // depth
    std::string layers = "2,4,6";
    // trivial
    std::string kind = "star";
};

struct AblateContext {
    SyntheticTask task;
    DenseMatrix test_features;
    std::vector<std::size_t> test_labels;
    std::vector<std::size_t> unseen_ids;
    std::vector<std::size_t> ks;
    std::vector<std::size_t> hidden;
    std::vector<std::uint64_t> seeds;
    TrainConfig base_cfg;
};

AblateContext make_ablate_context(const AblateArgs& args, Manifest& manifest) {
    AblateContext ctx;
    const fs::path dir(args.task_dir);
    for (const char* name : {"nodes.tsv", "edges.tsv", "input.zslm", "gt_classifiers.zslm",
                             "features.zslm", "seen.txt"})
        manifest.add_input(dir / name);
    ctx.task = load_task(dir);
    for (std::size_t i = 0; i < ctx.task.seen_mask.seen.size(); ++i)
        if (!ctx.task.seen_mask.seen[i]) ctx.unseen_ids.push_back(i);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < ctx.task.features.labels.size(); ++r)
        if (!ctx.task.seen_mask.seen[ctx.task.features.labels[r]]) rows.push_back(r);
    ctx.test_features = DenseMatrix(rows.size(), ctx.task.features.features.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < ctx.test_features.cols; ++j)
            ctx.test_features(r, j) = ctx.task.features.features(rows[r], j);
        ctx.test_labels.push_back(ctx.task.features.labels[rows[r]]);
    }
    ctx.ks = parse_size_list(args.ks, "--ks");
    ctx.hidden = parse_size_list(args.dims, "--dims");
    for (std::size_t s : parse_size_list(args.seeds, "--seeds")) ctx.seeds.push_back(s);
    ctx.base_cfg.learning_rate = args.lr;
    ctx.base_cfg.weight_decay = args.wd;
    ctx.base_cfg.epochs = args.epochs;
    return ctx;
}

EvalReport ablate_run(const AblateContext& ctx, const KnowledgeGraph& graph,
                      const std::vector<std::size_t>& hidden, std::uint64_t seed) {
    const auto dims =
        full_dims(ctx.task.input.matrix.cols, hidden, ctx.task.gt_classifiers.matrix.cols);
    auto model = init_model<float>(dims, 0.2f, seed);
    TrainConfig cfg = ctx.base_cfg;
    cfg.seed = seed;
    const auto run = fit(std::move(model), normalize_adjacency<float>(graph),
                         ctx.task.input.matrix, ctx.task.gt_classifiers.matrix,
                         ctx.task.seen_mask, cfg);
    ClassifierMatrix cm;
    cm.matrix = forward(run.model, normalize_adjacency<float>(graph), ctx.task.input.matrix);
    cm.normalized = true;
    cm.class_ids.resize(cm.matrix.rows);
    std::iota(cm.class_ids.begin(), cm.class_ids.end(), std::size_t(0));
    const DenseMatrix scores = score_images(ctx.test_features, cm);
    return evaluate_topk(scores, ctx.test_labels, ctx.ks, ctx.unseen_ids,
                         EvalSetting::unseen_only);
}

EvalReport average_reports(const std::vector<EvalReport>& reports) {
    EvalReport avg = reports.front();
    for (std::size_t t = 0; t < avg.hits.size(); ++t) {
        avg.hits[t] = 0.0;
        for (const auto& r : reports) avg.hits[t] += r.hits[t];
        avg.hits[t] /= static_cast<double>(reports.size());
    }
    return avg;
}

std::string csv_header(const std::string& param, const std::vector<std::size_t>& ks) {
    std::string header = param;
    for (std::size_t k : ks) header += ",hit@" + std::to_string(k);
    return header + "\n";
}

int cmd_ablate_drop_edges(const AblateArgs& args, Manifest manifest) {
    AblateContext ctx = make_ablate_context(args, manifest);
    std::string csv = csv_header("fraction", ctx.ks);
    for (double fraction : parse_real_list(args.fractions, "--fractions")) {
        std::vector<EvalReport> reports;
        for (std::uint64_t seed : ctx.seeds)
            reports.push_back(ablate_run(ctx, drop_edges(ctx.task.graph, fraction, seed),
                                         ctx.hidden, seed));
        char param[32];
        std::snprintf(param, sizeof(param), "%.2f", fraction);
        csv += format_hits_csv_row(param, average_reports(reports));
    }
    atomic_write(args.out, csv);
    manifest.add_output(args.out);
    manifest.write(fs::path(args.out).parent_path());
    std::printf("%s", csv.c_str());
    return kOk;
}

int cmd_ablate_depth(const AblateArgs& args, Manifest manifest) {
    AblateContext ctx = make_ablate_context(args, manifest);
    if (ctx.hidden.size() != 5)
        throw std::invalid_argument("depth ablation expects a 5-wide hidden spec for the 6-layer "
                                    "model (got " + std::to_string(ctx.hidden.size()) + ")");
    std::string csv = csv_header("layers", ctx.ks);
    for (std::size_t depth : parse_size_list(args.layers, "--layers")) {
        std::vector<std::size_t> hidden;
        if (depth == 6) hidden = ctx.hidden;
        else if (depth == 4) hidden = {ctx.hidden[0], ctx.hidden[2], ctx.hidden[4]};
        else if (depth == 2) hidden = {ctx.hidden[4]};
        else throw std::invalid_argument("depth ablation supports layers 2, 4 and 6");
        std::vector<EvalReport> reports;
        for (std::uint64_t seed : ctx.seeds)
            reports.push_back(ablate_run(ctx, ctx.task.graph, hidden, seed));
        csv += format_hits_csv_row(std::to_string(depth), average_reports(reports));
    }
    atomic_write(args.out, csv);
    manifest.add_output(args.out);
    manifest.write(fs::path(args.out).parent_path());
    std::printf("%s", csv.c_str());
    return kOk;
}

int cmd_ablate_trivial(const AblateArgs& args, Manifest manifest) {
    AblateContext ctx = make_ablate_context(args, manifest);
    std::string csv = csv_header("kind", ctx.ks);
    std::vector<EvalReport> reports;
    for (std::uint64_t seed : ctx.seeds) {
        if (args.kind == "star") {
            // classes become leaves 1..n of a star; the root gets a zero
            // embedding row, no ground truth and no mask entry
            const std::size_t n = ctx.task.graph.node_count();
            AblateContext star_ctx = ctx;
            star_ctx.task.graph = make_star_graph(n + 1);
            star_ctx.task.input.matrix = DenseMatrix(n + 1, ctx.task.input.matrix.cols);
            star_ctx.task.gt_classifiers.matrix =
                DenseMatrix(n + 1, ctx.task.gt_classifiers.matrix.cols);
            star_ctx.task.seen_mask.seen.assign(n + 1, 0);
            for (std::size_t c = 0; c < n; ++c) {
                for (std::size_t j = 0; j < ctx.task.input.matrix.cols; ++j)
                    star_ctx.task.input.matrix(c + 1, j) = ctx.task.input.matrix(c, j);
                for (std::size_t j = 0; j < ctx.task.gt_classifiers.matrix.cols; ++j)
                    star_ctx.task.gt_classifiers.matrix(c + 1, j) =
                        ctx.task.gt_classifiers.matrix(c, j);
                star_ctx.task.seen_mask.seen[c + 1] = ctx.task.seen_mask.seen[c];
            }
            star_ctx.task.gt_classifiers.class_ids.resize(n + 1);
            std::iota(star_ctx.task.gt_classifiers.class_ids.begin(),
                      star_ctx.task.gt_classifiers.class_ids.end(), std::size_t(0));
            for (std::size_t& label : star_ctx.test_labels) label += 1;
            for (std::size_t& id : star_ctx.unseen_ids) id += 1;
            reports.push_back(ablate_run(star_ctx, star_ctx.task.graph, ctx.hidden, seed));
        } else if (args.kind == "random") {
            const auto graph = make_random_graph(ctx.task.graph.node_count(),
                                                 ctx.task.graph.edges.size(), seed);
            reports.push_back(ablate_run(ctx, graph, ctx.hidden, seed));
        } else {
            throw std::invalid_argument("--kind must be star or random");
        }
    }
    csv += format_hits_csv_row(args.kind, average_reports(reports));
    atomic_write(args.out, csv);
    manifest.add_output(args.out);
    manifest.write(fs::path(args.out).parent_path());
    std::printf("%s", csv.c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// analyze-distances

struct DistanceArgs {
    std::string checkpoint;
    std::string graph_dir;
    std::string embeddings;
    std::string gt_classifiers;
    std::string seen_list;
    std::string missing_policy = "partial-average";
    std::size_t max_hops = 3;
    std::string out;
};

int cmd_analyze_distances(const DistanceArgs& args, Manifest manifest) {
    const fs::path graph_dir(args.graph_dir);
    manifest.add_input(graph_dir / "nodes.tsv");
    manifest.add_input(graph_dir / "edges.tsv");
    manifest.add_input(args.embeddings);
    manifest.add_input(args.gt_classifiers);
    manifest.add_input(args.seen_list);
    manifest.add_input(fs::path(args.checkpoint) / "checkpoint.json");

    const KnowledgeGraph graph = build_graph(graph_dir / "nodes.tsv", graph_dir / "edges.tsv", 0.0);
    const DenseMatrix x = load_node_embeddings(args.embeddings, graph, args.missing_policy);
    const auto ckpt = load_checkpoint<float>(args.checkpoint);
    const ClassifierMatrix all_predicted = predict_classifiers(ckpt.model, graph, x);
    const ClassifierMatrix gt = load_classifiers(args.gt_classifiers);
    const SeenMask mask = seen_mask_from_file(args.seen_list, graph.node_count());

    ClassifierMatrix predicted_unseen, training;
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
        if (mask.seen[i])
            training.class_ids.push_back(i);
        else
            predicted_unseen.class_ids.push_back(i);
    }
    predicted_unseen.matrix = DenseMatrix(predicted_unseen.class_ids.size(), all_predicted.matrix.cols);
    for (std::size_t r = 0; r < predicted_unseen.class_ids.size(); ++r)
        for (std::size_t j = 0; j < all_predicted.matrix.cols; ++j)
            predicted_unseen.matrix(r, j) = all_predicted.matrix(predicted_unseen.class_ids[r], j);
    training.matrix = DenseMatrix(training.class_ids.size(), gt.matrix.cols);
    for (std::size_t r = 0; r < training.class_ids.size(); ++r)
        for (std::size_t j = 0; j < gt.matrix.cols; ++j)
            training.matrix(r, j) = gt.matrix(training.class_ids[r], j);

    const auto distances =
        classifier_neighbor_distances(predicted_unseen, training, graph, args.max_hops);
    std::string csv = "rank,min_distance\n";
    char buf[64];
    for (std::size_t r = 0; r < distances.size(); ++r) {
        if (std::isinf(distances[r]))
            std::snprintf(buf, sizeof(buf), "%zu,inf\n", r + 1);
        else
            std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", r + 1, distances[r]);
        csv += buf;
    }
    atomic_write(args.out, csv);
    manifest.add_output(args.out);
    manifest.write(fs::path(args.out).parent_path());
    std::printf("%s", csv.c_str());
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot classifier synthesis via graph convolutions over a knowledge graph"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    Manifest manifest;
    for (int i = 0; i < argc; ++i) manifest.argv.push_back(argv[i]);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic zero-shot task");
    synth->add_option("--classes", synth_args.classes, "number of classes")->capture_default_str();
    synth->add_option("--unseen-frac", synth_args.unseen_frac, "fraction of unseen classes")
        ->capture_default_str();
    synth->add_option("--embed-dim", synth_args.embed_dim, "embedding width k")
        ->capture_default_str();
    synth->add_option("--classifier-dim", synth_args.classifier_dim, "classifier width D")
        ->capture_default_str();
    synth->add_option("--images-per-class", synth_args.images_per_class, "features per class")
        ->capture_default_str();
    synth->add_option("--embed-noise", synth_args.embed_noise, "embedding noise level")
        ->capture_default_str();
    synth->add_option("--feature-noise", synth_args.feature_noise, "feature noise level")
        ->capture_default_str();
    synth->add_option("--embed-rank", synth_args.embed_rank, "projection rank")
        ->capture_default_str();
    synth->add_option("--embed-signal", synth_args.embed_signal, "projection gain")
        ->capture_default_str();
    synth->add_option("--extra-edges", synth_args.extra_edges, "edges beyond the spanning tree")
        ->capture_default_str();
    synth->add_option("--seed", synth_args.seed, "world + split seed")->capture_default_str();
    synth->add_option("--out-dir", synth_args.out_dir, "output directory")->required();

    ExtractArgs extract_args;
    auto* extract = app.add_subcommand("extract-subgraph",
                                       "BFS subgraph of seed-to-seed walks within K hops");
    extract->add_option("--nodes", extract_args.nodes, "node TSV")->required();
    extract->add_option("--edges", extract_args.edges, "edge TSV")->required();
    extract->add_option("--min-confidence", extract_args.min_confidence, "edge threshold")
        ->capture_default_str();
    extract->add_option("--max-hops", extract_args.max_hops, "walk length bound K")
        ->capture_default_str();
    extract->add_option("--out-dir", extract_args.out_dir, "output directory")->required();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train the GCN on seen-class classifiers");
    train->add_option("--graph-dir", train_args.graph_dir, "dir with nodes.tsv/edges.tsv")
        ->required();
    train->add_option("--embeddings", train_args.embeddings,
                      "input matrix (.zslm) or GloVe text file")
        ->required();
    train->add_option("--gt-classifiers", train_args.gt_classifiers, "ZSLM ground truth")
        ->required();
    train->add_option("--seen-list", train_args.seen_list, "file of seen node ids")->required();
    train->add_option("--dims", train_args.dims, "hidden widths, comma separated")
        ->capture_default_str();
    train->add_option("--missing-policy", train_args.missing_policy,
                      "fail|zero|partial-average for GloVe inputs")
        ->capture_default_str();
    train->add_option("--lr", train_args.lr, "Adam learning rate")->capture_default_str();
    train->add_option("--wd", train_args.wd, "weight decay")->capture_default_str();
    train->add_option("--epochs", train_args.epochs, "full-batch epochs")->capture_default_str();
    train->add_option("--slope", train_args.slope, "LeakyReLU negative slope")
        ->capture_default_str();
    train->add_option("--seed", train_args.seed, "init seed")->capture_default_str();
    train->add_option("--loss-mode", train_args.loss_mode, "regression|softmax")
        ->capture_default_str();
    train->add_option("--out-dir", train_args.out_dir, "output directory")->required();

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "score test features with predicted classifiers");
    eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint directory")->required();
    eval->add_option("--graph-dir", eval_args.graph_dir, "dir with nodes.tsv/edges.tsv")
        ->required();
    eval->add_option("--embeddings", eval_args.embeddings, "input matrix or GloVe text")
        ->required();
    eval->add_option("--features", eval_args.features, "ZSLM test features")->required();
    eval->add_option("--seen-list", eval_args.seen_list,
                     "seen ids; candidates = complement (unseen) or all (generalized)");
    eval->add_option("--gt-classifiers", eval_args.gt_classifiers,
                     "seen-class classifiers for the generalized setting");
    eval->add_option("--missing-policy", eval_args.missing_policy, "for GloVe inputs")
        ->capture_default_str();
    eval->add_option("--setting", eval_args.setting, "unseen|generalized")->capture_default_str();
    eval->add_option("--ks", eval_args.ks, "hit@k cutoffs")->capture_default_str();
    eval->add_option("--out", eval_args.out, "report JSON path")->required();

    ConseArgs conse_args;
    auto* conse = app.add_subcommand("conse", "ConSE baseline evaluation");
    conse->add_option("--graph-dir", conse_args.graph_dir, "dir with nodes.tsv/edges.tsv")
        ->required();
    conse->add_option("--embeddings", conse_args.embeddings, "input matrix or GloVe text")
        ->required();
    conse->add_option("--features", conse_args.features, "ZSLM test features")->required();
    conse->add_option("--seen-list", conse_args.seen_list, "file of seen node ids")->required();
    conse->add_option("--gt-classifiers", conse_args.gt_classifiers,
                      "seen classifiers; probabilities = softmax of their scores");
    conse->add_option("--probs", conse_args.probs, "ZSLM num_images x num_seen probabilities");
    conse->add_option("--missing-policy", conse_args.missing_policy, "for GloVe inputs")
        ->capture_default_str();
    conse->add_option("--top-t", conse_args.top_t, "number of seen classes combined")
        ->capture_default_str();
    conse->add_option("--setting", conse_args.setting, "unseen|generalized")
        ->capture_default_str();
    conse->add_option("--ks", conse_args.ks, "hit@k cutoffs")->capture_default_str();
    conse->add_option("--out", conse_args.out, "report JSON path")->required();

    AblateArgs ablate_args;
    auto* ablate = app.add_subcommand("ablate", "ablation drivers over a synthetic task");
    ablate->require_subcommand(1);
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--task-dir", ablate_args.task_dir, "synth task directory")->required();
        sub->add_option("--dims", ablate_args.dims, "hidden widths of the 6-layer model")
            ->capture_default_str();
        sub->add_option("--lr", ablate_args.lr, "learning rate")->capture_default_str();
        sub->add_option("--wd", ablate_args.wd, "weight decay")->capture_default_str();
        sub->add_option("--epochs", ablate_args.epochs, "epochs per run")->capture_default_str();
        sub->add_option("--seeds", ablate_args.seeds, "train seeds, comma separated")
            ->capture_default_str();
        sub->add_option("--ks", ablate_args.ks, "hit@k cutoffs")->capture_default_str();
        sub->add_option("--out", ablate_args.out, "CSV path")->required();
    };
    auto* drop = ablate->add_subcommand("drop-edges", "metric vs dropped edge fraction");
    add_common(drop);
    drop->add_option("--fractions", ablate_args.fractions, "fractions to drop")
        ->capture_default_str();
    auto* depth = ablate->add_subcommand("depth", "metric vs model depth");
    add_common(depth);
    depth->add_option("--layers", ablate_args.layers, "depths to compare (2,4,6)")
        ->capture_default_str();
    auto* trivial = ablate->add_subcommand("trivial", "star or random graph control");
    add_common(trivial);
    trivial->add_option("--kind", ablate_args.kind, "star|random")->capture_default_str();

    DistanceArgs dist_args;
    auto* dist = app.add_subcommand("analyze-distances",
                                    "min distances from predicted to nearby training classifiers");
    dist->add_option("--checkpoint", dist_args.checkpoint, "checkpoint directory")->required();
    dist->add_option("--graph-dir", dist_args.graph_dir, "dir with nodes.tsv/edges.tsv")
        ->required();
    dist->add_option("--embeddings", dist_args.embeddings, "input matrix or GloVe text")
        ->required();
    dist->add_option("--gt-classifiers", dist_args.gt_classifiers, "ZSLM ground truth")
        ->required();
    dist->add_option("--seen-list", dist_args.seen_list, "file of seen node ids")->required();
    dist->add_option("--missing-policy", dist_args.missing_policy, "for GloVe inputs")
        ->capture_default_str();
    dist->add_option("--max-hops", dist_args.max_hops, "graph radius")->capture_default_str();
    dist->add_option("--out", dist_args.out, "CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kFlagError;
    }

    try {
        if (synth->parsed()) {
            manifest.command = "synth";
            manifest.seed = synth_args.seed;
            return cmd_synth(synth_args, std::move(manifest));
        }
        if (extract->parsed()) {
            manifest.command = "extract-subgraph";
            return cmd_extract_subgraph(extract_args, std::move(manifest));
        }
        if (train->parsed()) {
            manifest.command = "train";
            manifest.seed = train_args.seed;
            return cmd_train(train_args, std::move(manifest));
        }
        if (eval->parsed()) {
            manifest.command = "eval";
            return cmd_eval(eval_args, std::move(manifest));
        }
        if (conse->parsed()) {
            manifest.command = "conse";
            return cmd_conse(conse_args, std::move(manifest));
        }
        if (ablate->parsed()) {
            if (ablate->get_subcommand("drop-edges")->parsed()) {
                manifest.command = "ablate drop-edges";
                return cmd_ablate_drop_edges(ablate_args, std::move(manifest));
            }
            if (ablate->get_subcommand("depth")->parsed()) {
                manifest.command = "ablate depth";
                return cmd_ablate_depth(ablate_args, std::move(manifest));
            }
            manifest.command = "ablate trivial";
            return cmd_ablate_trivial(ablate_args, std::move(manifest));
        }
        if (dist->parsed()) {
            manifest.command = "analyze-distances";
            return cmd_analyze_distances(dist_args, std::move(manifest));
        }
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kFormatError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntimeError;
    }
    return kFlagError;
}
