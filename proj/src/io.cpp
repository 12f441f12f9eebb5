#include "zsl/io.hpp"

#include <cstring>
#include <fstream>

#include "zsl/errors.hpp"
#include "zsl/rng.hpp"

namespace zsl {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
    return v;
}

template <typename T>
void save_matrix_impl(const std::filesystem::path& path, const Dense<T>& m) {
    std::string out;
    out.reserve(25 + m.data.size() * sizeof(T));
    out += "ZSLM";
    put_u32(out, kZslmVersion);
    out.push_back(static_cast<char>(ZslmDtype<T>::value));
    put_u64(out, m.rows);
    put_u64(out, m.cols);
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    for (T v : m.data) {
        if constexpr (sizeof(T) == 4) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(out, bits);
        } else {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put_u64(out, bits);
        }
    }
    atomic_write(path, out);
}

} // namespace

void save_matrix(const std::filesystem::path& path, const Dense<float>& m) { save_matrix_impl(path, m); }
void save_matrix(const std::filesystem::path& path, const Dense<double>& m) { save_matrix_impl(path, m); }

template <typename T>
Dense<T> load_matrix(const std::filesystem::path& path) {
    const std::string in = read_file(path);
    if (in.size() < 25 || in.compare(0, 4, "ZSLM") != 0)
        throw FormatError(path.string() + ": not a ZSLM matrix (bad magic)");
    std::size_t pos = 4;
    const std::uint32_t version = get_u32(in, pos);
    if (version != kZslmVersion)
        throw FormatError(path.string() + ": unsupported ZSLM version " + std::to_string(version));
    const std::uint8_t dtype = static_cast<std::uint8_t>(in[pos++]);
    if (dtype != ZslmDtype<T>::value)
        throw FormatError(path.string() + ": dtype " + std::to_string(dtype) +
                          " does not match the requested scalar type");
    const std::uint64_t rows = get_u64(in, pos);
    const std::uint64_t cols = get_u64(in, pos);
    const std::uint64_t count = rows * cols;
    if (in.size() != 25 + count * sizeof(T))
        throw FormatError(path.string() + ": payload size disagrees with header");
    Dense<T> m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (std::uint64_t i = 0; i < count; ++i) {
        if constexpr (sizeof(T) == 4) {
            std::uint32_t bits = get_u32(in, pos);
            std::memcpy(&m.data[i], &bits, 4);
        } else {
            std::uint64_t bits = get_u64(in, pos);
            std::memcpy(&m.data[i], &bits, 8);
        }
    }
    return m;
}

template Dense<float> load_matrix<float>(const std::filesystem::path&);
template Dense<double> load_matrix<double>(const std::filesystem::path&);

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::vector<std::string> lines;
    std::string cur;
    for (char c : bytes) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(std::move(cur));
    return lines;
}

std::string hash_bytes(const std::string& bytes) {
    const std::uint64_t h = fnv1a64(bytes);
    static const char* digits = "0123456789abcdef";
    std::string hex(16, '0');
    for (int i = 0; i < 16; ++i) hex[15 - i] = digits[(h >> (4 * i)) & 0xF];
    return hex;
}

std::string hash_file(const std::filesystem::path& path) { return hash_bytes(read_file(path)); }

} // namespace zsl
