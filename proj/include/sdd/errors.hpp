#pragma once

#include <stdexcept>
#include <string>

namespace sdd {

// Invalid configuration or usage (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / OS level failure (CLI exit code 3).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// File exists but its contents are damaged or malformed (CLI exit code 4).
struct CorruptError : std::runtime_error {
    explicit CorruptError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed record in a text or binary stream; carries a line number when known.
struct ParseError : CorruptError {
    explicit ParseError(const std::string& msg, long line = -1)
        : CorruptError(line >= 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_number(line) {}
    long line_number;
};

// Event coordinates outside the declared geometry.
struct BoundsError : CorruptError {
    explicit BoundsError(const std::string& msg) : CorruptError(msg) {}
};

// Tensor / vector dimension mismatch.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Refusing to clobber an existing output (CLI exit code 5).
struct OverwriteError : std::runtime_error {
    explicit OverwriteError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted on a non-finite loss or gradient.
struct TrainAbort : std::runtime_error {
    explicit TrainAbort(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sdd
