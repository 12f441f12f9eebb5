#pragma once

#include <stdexcept>
#include <string>

namespace zsl {

/// Dimension mismatch between operands.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Unreadable or malformed on-disk data (bad magic, wrong version, bad schema).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed line in a text input; carries the 1-based line number.
struct ParseError : FormatError {
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : FormatError(file + ":" + std::to_string(line) + ": " + what), line_number(line) {}
    std::size_t line_number;
};

/// Training produced a non-finite loss; message carries epoch and layer norms.
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace zsl
