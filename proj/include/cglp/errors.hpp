#pragma once

#include <stdexcept>
#include <string>

namespace cglp {

// Input that fails schema or precondition checks (CLI exit code 1).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : ValidationError {
    size_t line;
    ParseError(size_t line_no, const std::string& msg)
        : ValidationError("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

struct NotFoundError : ValidationError {
    explicit NotFoundError(const std::string& msg) : ValidationError(msg) {}
};

// Failures during execution (CLI exit code 2): I/O, numeric blow-ups, transport.
struct RuntimeError : std::runtime_error {
    explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : RuntimeError {
    explicit ShapeError(const std::string& msg) : RuntimeError(msg) {}
};

struct NumericError : RuntimeError {
    explicit NumericError(const std::string& msg) : RuntimeError(msg) {}
};

}  // namespace cglp
