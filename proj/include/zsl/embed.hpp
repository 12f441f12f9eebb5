#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zsl/kgraph.hpp"
#include "zsl/matrix.hpp"

namespace zsl {

/// Token vectors loaded from a GloVe-style text file. Tokens are
/// lowercase-folded; every vector has length dim.
struct EmbeddingTable {
    std::size_t dim = 0;
    std::unordered_map<std::string, std::vector<float>> vectors;
};

/// Parses space-separated `token v1 ... vk` lines. The dimension is
/// inferred from the first line; a later line with a different arity is a
/// ParseError naming the line. Duplicate tokens keep the first occurrence.
EmbeddingTable load_embeddings(const std::filesystem::path& path);

/// Class-name tokens: split on whitespace, '_' and '-', lowercased.
std::vector<std::string> tokenize_name(std::string_view name);

/// Arithmetic mean of the embeddings of the name's tokens that are present
/// in the table; nullopt when none are found.
std::optional<std::vector<float>> class_embedding(std::string_view name, const EmbeddingTable& table);

/// What to do with nodes whose name tokens are not all covered by the table:
///   fail            — refuse, listing the nodes (strict reproduction runs);
///   zero            — zero row unless every token was found;
///   partial_average — mean of the found tokens, zero row if none.
enum class MissingPolicy { fail, zero, partial_average };

MissingPolicy parse_missing_policy(std::string_view name);

/// The n x k GCN input matrix, row i aligned to graph node i. coverage[i]
/// is the fraction of node i's name tokens found in the table.
struct InputMatrix {
    DenseMatrix matrix;
    std::vector<float> coverage;
};

InputMatrix assemble_input_matrix(const KnowledgeGraph& g, const EmbeddingTable& table,
                                  MissingPolicy policy);

/// ZSLM matrix plus a JSON sidecar {"node_order": [...], "dim": k} at
/// `path` with extension swapped to .json.
void save_input_matrix(const std::filesystem::path& path, const InputMatrix& input,
                       const std::vector<std::string>& node_order);

struct StoredInput {
    DenseMatrix matrix;
    std::vector<std::string> node_order;
};

StoredInput load_input_matrix(const std::filesystem::path& path);

} // namespace zsl
