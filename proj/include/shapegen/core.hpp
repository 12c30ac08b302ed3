#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace shapegen {

using complexd = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

// Bad knobs or malformed configuration: CLI exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated mathematical precondition (support escapes the box, query outside
// the characteristic grid, non-disjoint union, ...): CLI exit code 3.
struct domain_error : std::runtime_error {
    explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

// File-level failures: hash mismatch, unsupported schema version, malformed
// JSON, unreadable paths: CLI exit code 4.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace shapegen
