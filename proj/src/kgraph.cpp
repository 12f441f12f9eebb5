#include "zsl/kgraph.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <limits>
#include <map>
#include <set>

#include "zsl/errors.hpp"
#include "zsl/io.hpp"

namespace zsl {

namespace {

constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '\t') {
            fields.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return fields;
}

std::size_t parse_index(const std::string& s, const std::string& file, std::size_t line) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(file, line, "expected a non-negative integer, got '" + s + "'");
    return value;
}

double parse_real(const std::string& s, const std::string& file, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(file, line, "expected a real number, got '" + s + "'");
    return value;
}

/// Canonicalize to u < v and merge duplicate pairs keeping max confidence.
std::vector<Edge> canonical_edges(const std::vector<Edge>& edges) {
    std::map<std::pair<std::size_t, std::size_t>, double> merged;
    for (const Edge& e : edges) {
        const auto key = std::minmax(e.u, e.v);
        auto [it, inserted] = merged.emplace(key, e.confidence);
        if (!inserted) it->second = std::max(it->second, e.confidence);
    }
    std::vector<Edge> out;
    out.reserve(merged.size());
    for (const auto& [key, conf] : merged) out.push_back({key.first, key.second, conf});
    return out;
}

} // namespace

std::size_t KnowledgeGraph::seed_count() const {
    std::size_t c = 0;
    for (std::uint8_t f : seed_flags) c += f ? 1 : 0;
    return c;
}

std::vector<std::vector<std::size_t>> KnowledgeGraph::adjacency() const {
    std::vector<std::set<std::size_t>> nbrs(node_count());
    for (const Edge& e : edges) {
        nbrs[e.u].insert(e.v);
        nbrs[e.v].insert(e.u);
    }
    std::vector<std::vector<std::size_t>> out(node_count());
    for (std::size_t i = 0; i < nbrs.size(); ++i) out[i].assign(nbrs[i].begin(), nbrs[i].end());
    return out;
}

KnowledgeGraph build_graph(const std::filesystem::path& node_file,
                           const std::filesystem::path& edge_file, double min_confidence) {
    KnowledgeGraph g;
    {
        const auto lines = read_lines(node_file);
        std::size_t node_id = 0;
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            if (lines[ln].empty()) continue;
            const auto fields = split_tabs(lines[ln]);
            if (fields.size() != 3)
                throw ParseError(node_file.string(), ln + 1, "expected node_id<TAB>name<TAB>is_seed");
            const std::size_t id = parse_index(fields[0], node_file.string(), ln + 1);
            if (id != node_id)
                throw ParseError(node_file.string(), ln + 1,
                                 "node_id " + fields[0] + " out of order (expected " +
                                     std::to_string(node_id) + ")");
            if (fields[1].empty())
                throw ParseError(node_file.string(), ln + 1, "empty node name");
            if (fields[2] != "0" && fields[2] != "1")
                throw ParseError(node_file.string(), ln + 1, "is_seed must be 0 or 1");
            g.node_names.push_back(fields[1]);
            g.seed_flags.push_back(fields[2] == "1" ? 1 : 0);
            ++node_id;
        }
    }
    const std::size_t n = g.node_count();
    std::vector<Edge> raw;
    {
        const auto lines = read_lines(edge_file);
        for (std::size_t ln = 0; ln < lines.size(); ++ln) {
            const std::string& line = lines[ln];
            if (line.empty() || line[0] == '#') continue;
            const auto fields = split_tabs(line);
            if (fields.size() != 2 && fields.size() != 3)
                throw ParseError(edge_file.string(), ln + 1,
                                 "expected src_id<TAB>dst_id[<TAB>confidence]");
            const std::size_t u = parse_index(fields[0], edge_file.string(), ln + 1);
            const std::size_t v = parse_index(fields[1], edge_file.string(), ln + 1);
            if (u >= n || v >= n)
                throw FormatError(edge_file.string() + ":" + std::to_string(ln + 1) +
                                  ": edge references unknown node id " +
                                  std::to_string(std::max(u, v)));
            if (u == v)
                throw ParseError(edge_file.string(), ln + 1,
                                 "self-loop on node " + std::to_string(u) + " rejected");
            double conf = 1.0;
            if (fields.size() == 3) {
                conf = parse_real(fields[2], edge_file.string(), ln + 1);
                if (!(conf >= 0.0 && conf <= 1.0))
                    throw ParseError(edge_file.string(), ln + 1, "confidence outside [0,1]");
            }
            if (conf < min_confidence) continue;
            raw.push_back({u, v, conf});
        }
    }
    g.edges = canonical_edges(raw);
    return g;
}

KnowledgeGraph symmetrize(const KnowledgeGraph& g) {
    KnowledgeGraph out = g;
    out.edges = canonical_edges(g.edges);
    return out;
}

SubgraphResult extract_bfs_subgraph(const KnowledgeGraph& g, std::size_t max_hops) {
    if (g.seed_count() == 0)
        throw std::invalid_argument("extract_bfs_subgraph: graph has no seed nodes");
    if (max_hops < 1) throw std::invalid_argument("extract_bfs_subgraph: max_hops must be >= 1");
    const std::size_t n = g.node_count();
    const auto adj = g.adjacency();

    // Multi-source BFS distance to the nearest seed.
    std::vector<std::size_t> dseed(n, kUnreached);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n; ++i) {
        if (g.seed_flags[i]) {
            dseed[i] = 0;
            queue.push_back(i);
        }
    }
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v : adj[u]) {
            if (dseed[v] == kUnreached) {
                dseed[v] = dseed[u] + 1;
                queue.push_back(v);
            }
        }
    }

    const auto canonical = canonical_edges(g.edges);
    std::vector<Edge> kept_edges;
    std::vector<std::uint8_t> keep_node(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (g.seed_flags[i]) keep_node[i] = 1;
    for (const Edge& e : canonical) {
        if (dseed[e.u] == kUnreached || dseed[e.v] == kUnreached) continue;
        if (dseed[e.u] + 1 + dseed[e.v] <= max_hops) {
            kept_edges.push_back(e);
            keep_node[e.u] = 1;
            keep_node[e.v] = 1;
        }
    }

    SubgraphResult result;
    std::vector<std::size_t> new_id(n, kUnreached);
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep_node[i]) continue;
        new_id[i] = result.graph.node_names.size();
        result.graph.node_names.push_back(g.node_names[i]);
        result.graph.seed_flags.push_back(g.seed_flags[i]);
        result.id_map.emplace_back(i, new_id[i]);
    }
    for (const Edge& e : kept_edges)
        result.graph.edges.push_back({new_id[e.u], new_id[e.v], e.confidence});
    return result;
}

KnowledgeGraph drop_edges(const KnowledgeGraph& g, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw std::invalid_argument("drop_edges: fraction must be in [0,1]");
    KnowledgeGraph out = g;
    out.edges = canonical_edges(g.edges);
    const std::size_t remove = static_cast<std::size_t>(fraction * static_cast<double>(out.edges.size()));
    if (remove == 0) return out;
    Rng rng = Rng::stream(seed, "drop_edges");
    const auto doomed = sample_indices(out.edges.size(), remove, rng);
    std::vector<Edge> kept;
    kept.reserve(out.edges.size() - remove);
    std::size_t d = 0;
    for (std::size_t i = 0; i < out.edges.size(); ++i) {
        if (d < doomed.size() && doomed[d] == i) {
            ++d;
            continue;
        }
        kept.push_back(out.edges[i]);
    }
    out.edges = std::move(kept);
    return out;
}

KnowledgeGraph make_star_graph(std::size_t n) {
    if (n < 2) throw std::invalid_argument("make_star_graph: need at least 2 nodes");
    KnowledgeGraph g;
    g.node_names.push_back("root");
    g.seed_flags.push_back(0);
    for (std::size_t i = 1; i < n; ++i) {
        g.node_names.push_back("leaf_" + std::to_string(i));
        g.seed_flags.push_back(1);
        g.edges.push_back({0, i, 1.0});
    }
    return g;
}

KnowledgeGraph make_random_graph(std::size_t n, std::size_t num_edges, std::uint64_t seed) {
    const std::size_t total_pairs = n * (n - 1) / 2;
    if (num_edges > total_pairs)
        throw std::invalid_argument("make_random_graph: num_edges exceeds n(n-1)/2");
    KnowledgeGraph g;
    for (std::size_t i = 0; i < n; ++i) {
        g.node_names.push_back("node_" + std::to_string(i));
        g.seed_flags.push_back(0);
    }
    Rng rng = Rng::stream(seed, "random_graph");
    if (num_edges * 3 < total_pairs) {
        // Sparse regime: rejection sampling over unordered pairs.
        std::set<std::pair<std::size_t, std::size_t>> chosen;
        while (chosen.size() < num_edges) {
            std::size_t u = static_cast<std::size_t>(rng.next_below(n));
            std::size_t v = static_cast<std::size_t>(rng.next_below(n));
            if (u == v) continue;
            chosen.insert(std::minmax(u, v));
        }
        for (const auto& [u, v] : chosen) g.edges.push_back({u, v, 1.0});
    } else {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        pairs.reserve(total_pairs);
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
        const auto picked = sample_indices(pairs.size(), num_edges, rng);
        for (std::size_t idx : picked) g.edges.push_back({pairs[idx].first, pairs[idx].second, 1.0});
    }
    return g;
}

void save_graph(const std::filesystem::path& node_file, const std::filesystem::path& edge_file,
                const KnowledgeGraph& g) {
    std::string nodes;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        nodes += std::to_string(i);
        nodes += '\t';
        nodes += g.node_names[i];
        nodes += '\t';
        nodes += g.seed_flags[i] ? '1' : '0';
        nodes += '\n';
    }
    atomic_write(node_file, nodes);

    std::string edges;
    char buf[64];
    for (const Edge& e : canonical_edges(g.edges)) {
        std::snprintf(buf, sizeof(buf), "%zu\t%zu\t%.9g\n", e.u, e.v, e.confidence);
        edges += buf;
    }
    atomic_write(edge_file, edges);
}

void save_id_map(const std::filesystem::path& path,
                 const std::vector<std::pair<std::size_t, std::size_t>>& id_map) {
    std::string out;
    for (const auto& [old_id, new_id] : id_map)
        out += std::to_string(old_id) + "\t" + std::to_string(new_id) + "\n";
    atomic_write(path, out);
}

} // namespace zsl
