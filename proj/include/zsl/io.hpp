#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zsl/matrix.hpp"

// ZSLM binary matrix container, shared by every module:
//   magic "ZSLM" | u32 version = 1 | u8 dtype (0 = f32, 1 = f64)
//   | u64 rows | u64 cols | row-major little-endian payload, no padding.

namespace zsl {

inline constexpr std::uint32_t kZslmVersion = 1;

template <typename T>
struct ZslmDtype;
template <>
struct ZslmDtype<float> {
    static constexpr std::uint8_t value = 0;
};
template <>
struct ZslmDtype<double> {
    static constexpr std::uint8_t value = 1;
};

void save_matrix(const std::filesystem::path& path, const Dense<float>& m);
void save_matrix(const std::filesystem::path& path, const Dense<double>& m);

/// Loads a ZSLM file whose dtype matches T; anything else is a FormatError.
template <typename T>
Dense<T> load_matrix(const std::filesystem::path& path);

/// Write-temp-then-rename, so readers never see a partial file.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

std::vector<std::string> read_lines(const std::filesystem::path& path);

/// FNV-1a 64 over the file bytes, as 16 hex digits. Integrity marker for
/// run manifests, not a cryptographic digest.
std::string hash_file(const std::filesystem::path& path);

std::string hash_bytes(const std::string& bytes);

} // namespace zsl
