#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "zsl/matrix.hpp"
#include "zsl/rng.hpp"

namespace zsl {

struct Edge {
    std::size_t u = 0;
    std::size_t v = 0;
    double confidence = 1.0;
};

/// Undirected knowledge graph. Edges are stored canonically (u < v) with
/// no self-loops and no duplicate pairs once symmetrized; self-loops enter
/// only inside normalize_adjacency. Seed nodes are the ones with visual
/// data, the anchors of subgraph extraction.
struct KnowledgeGraph {
    std::vector<std::string> node_names;
    std::vector<Edge> edges;
    std::vector<std::uint8_t> seed_flags;

    std::size_t node_count() const { return node_names.size(); }
    std::size_t seed_count() const;

    /// Sorted neighbor lists built from the edge set read as unordered pairs.
    std::vector<std::vector<std::size_t>> adjacency() const;
};

/// Parses the node/edge TSV files (formats below), drops edges with
/// confidence < min_confidence, merges duplicate unordered pairs keeping
/// the larger confidence.
///
/// Node file: `node_id<TAB>name<TAB>is_seed(0|1)`, node_id = 0-based line
/// order. Edge file: `src_id<TAB>dst_id<TAB>confidence` with the
/// confidence column optional (default 1.0); lines starting with `#` are
/// ignored. Malformed lines raise ParseError with the line number;
/// out-of-range ids raise FormatError.
KnowledgeGraph build_graph(const std::filesystem::path& node_file,
                           const std::filesystem::path& edge_file, double min_confidence);

/// Closes the edge set under pair reversal: every stored (u, v) becomes the
/// canonical unordered pair, duplicates merged keeping max confidence.
/// Idempotent.
KnowledgeGraph symmetrize(const KnowledgeGraph& g);

/// A_hat = D^{-1/2} (A + I) D^{-1/2} with D = diag(1 + degree), A binary.
/// Confidences never enter; they matter only for build-time thresholding.
template <typename T>
Csr<T> normalize_adjacency(const KnowledgeGraph& g) {
    const std::size_t n = g.node_count();
    const auto adj = g.adjacency();
    std::vector<double> inv_sqrt_d(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt_d[i] = 1.0 / std::sqrt(1.0 + static_cast<double>(adj[i].size()));
    Csr<T> out(n, n);
    out.row_offsets[0] = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool self_done = false;
        auto push = [&](std::size_t j) {
            out.col_indices.push_back(j);
            out.values.push_back(static_cast<T>(inv_sqrt_d[i] * inv_sqrt_d[j]));
        };
        for (std::size_t j : adj[i]) {
            if (!self_done && j > i) {
                push(i);
                self_done = true;
            }
            push(j);
        }
        if (!self_done) push(i);
        out.row_offsets[i + 1] = out.col_indices.size();
    }
    return out;
}

struct SubgraphResult {
    KnowledgeGraph graph;
    /// (old id, new id) pairs, ascending in old id.
    std::vector<std::pair<std::size_t, std::size_t>> id_map;
};

/// Keeps exactly the structure lying on some seed-to-seed walk of at most
/// max_hops edges: with dseed(x) the multi-source BFS distance to the
/// nearest seed, edge (u,v) survives iff dseed(u) + 1 + dseed(v) <= max_hops.
/// Every node incident to a kept edge survives, plus all seeds; ids are
/// re-densified and reported in id_map.
SubgraphResult extract_bfs_subgraph(const KnowledgeGraph& g, std::size_t max_hops);

/// Removes floor(fraction * |E|) edges, sampled uniformly without
/// replacement from the canonically sorted edge list. Deterministic per seed.
KnowledgeGraph drop_edges(const KnowledgeGraph& g, double fraction, std::uint64_t seed);

/// Node 0 is a non-seed root; every other node is a leaf joined only to it.
KnowledgeGraph make_star_graph(std::size_t n);

/// num_edges distinct unordered non-self pairs, uniform, deterministic per seed.
KnowledgeGraph make_random_graph(std::size_t n, std::size_t num_edges, std::uint64_t seed);

/// Writers for the TSV formats accepted by build_graph.
void save_graph(const std::filesystem::path& node_file, const std::filesystem::path& edge_file,
                const KnowledgeGraph& g);

void save_id_map(const std::filesystem::path& path,
                 const std::vector<std::pair<std::size_t, std::size_t>>& id_map);

} // namespace zsl
