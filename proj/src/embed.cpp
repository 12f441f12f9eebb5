#include "zsl/embed.hpp"

#include <cctype>
#include <charconv>

#include <nlohmann/json.hpp>

#include "zsl/errors.hpp"
#include "zsl/io.hpp"

namespace zsl {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    std::filesystem::path p = path;
    p.replace_extension(".json");
    return p;
}

} // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    EmbeddingTable table;
    const auto lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        const std::string& line = lines[ln];
        if (line.empty()) continue;
        std::size_t pos = line.find(' ');
        if (pos == std::string::npos || pos == 0)
            throw ParseError(path.string(), ln + 1, "expected `token v1 ... vk`");
        std::string token = lowercase(std::string_view(line).substr(0, pos));
        std::vector<float> vec;
        while (pos < line.size()) {
            while (pos < line.size() && line[pos] == ' ') ++pos;
            if (pos == line.size()) break;
            std::size_t end = line.find(' ', pos);
            if (end == std::string::npos) end = line.size();
            float value = 0.0f;
            const char* first = line.data() + pos;
            const char* last = line.data() + end;
            const auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc() || ptr != last)
                throw ParseError(path.string(), ln + 1,
                                 "bad vector component '" + line.substr(pos, end - pos) + "'");
            vec.push_back(value);
            pos = end;
        }
        if (table.dim == 0) {
            if (vec.empty()) throw ParseError(path.string(), ln + 1, "vector has no components");
            table.dim = vec.size();
        } else if (vec.size() != table.dim) {
            throw ParseError(path.string(), ln + 1,
                             "vector has " + std::to_string(vec.size()) + " components, expected " +
                                 std::to_string(table.dim));
        }
        table.vectors.emplace(std::move(token), std::move(vec)); // first occurrence wins
    }
    return table;
}

std::vector<std::string> tokenize_name(std::string_view name) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : name) {
        if (c == '_' || c == '-' || std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

namespace {

struct NameLookup {
    std::vector<float> mean; // over found tokens; zero vector if none
    std::size_t found = 0;
    std::size_t total = 0;
};

NameLookup lookup_name(std::string_view name, const EmbeddingTable& table) {
    NameLookup r;
    r.mean.assign(table.dim, 0.0f);
    for (const std::string& token : tokenize_name(name)) {
        ++r.total;
        const auto it = table.vectors.find(token);
        if (it == table.vectors.end()) continue;
        ++r.found;
        for (std::size_t j = 0; j < table.dim; ++j) r.mean[j] += it->second[j];
    }
    if (r.found > 0)
        for (float& v : r.mean) v /= static_cast<float>(r.found);
    return r;
}

} // namespace

std::optional<std::vector<float>> class_embedding(std::string_view name, const EmbeddingTable& table) {
    NameLookup r = lookup_name(name, table);
    if (r.found == 0) return std::nullopt;
    return std::move(r.mean);
}

MissingPolicy parse_missing_policy(std::string_view name) {
    if (name == "fail") return MissingPolicy::fail;
    if (name == "zero") return MissingPolicy::zero;
    if (name == "partial-average") return MissingPolicy::partial_average;
    throw std::invalid_argument("unknown missing policy '" + std::string(name) +
                                "' (expected fail|zero|partial-average)");
}

InputMatrix assemble_input_matrix(const KnowledgeGraph& g, const EmbeddingTable& table,
                                  MissingPolicy policy) {
    const std::size_t n = g.node_count();
    InputMatrix input;
    input.matrix = DenseMatrix(n, table.dim);
    input.coverage.resize(n, 0.0f);
    std::vector<std::string> uncovered;
    for (std::size_t i = 0; i < n; ++i) {
        const NameLookup r = lookup_name(g.node_names[i], table);
        input.coverage[i] =
            r.total == 0 ? 0.0f : static_cast<float>(r.found) / static_cast<float>(r.total);
        const bool full = r.total > 0 && r.found == r.total;
        if (!full && policy == MissingPolicy::fail) {
            uncovered.push_back(g.node_names[i]);
            continue;
        }
        const bool write_row = policy == MissingPolicy::partial_average ? r.found > 0 : full;
        if (write_row)
            for (std::size_t j = 0; j < table.dim; ++j) input.matrix(i, j) = r.mean[j];
    }
    if (!uncovered.empty()) {
        std::string msg = "embedding coverage incomplete for " + std::to_string(uncovered.size()) +
                          " node(s):";
        for (const std::string& name : uncovered) msg += " " + name;
        throw std::runtime_error(msg);
    }
    return input;
}

void save_input_matrix(const std::filesystem::path& path, const InputMatrix& input,
                       const std::vector<std::string>& node_order) {
    save_matrix(path, input.matrix);
    nlohmann::json sidecar;
    sidecar["node_order"] = node_order;
    sidecar["dim"] = input.matrix.cols;
    atomic_write(sidecar_path(path), sidecar.dump(2) + "\n");
}

StoredInput load_input_matrix(const std::filesystem::path& path) {
    StoredInput stored;
    stored.matrix = load_matrix<float>(path);
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(read_file(sidecar_path(path)));
        stored.node_order = sidecar.at("node_order").get<std::vector<std::string>>();
        const std::size_t dim = sidecar.at("dim").get<std::size_t>();
        if (dim != stored.matrix.cols)
            throw FormatError(path.string() + ": sidecar dim disagrees with matrix");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(sidecar_path(path).string() + ": bad sidecar: " + e.what());
    }
    if (stored.node_order.size() != stored.matrix.rows)
        throw FormatError(path.string() + ": sidecar node_order length disagrees with matrix rows");
    return stored;
}

} // namespace zsl
