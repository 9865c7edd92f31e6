#pragma once

#include <stdexcept>
#include <string>

namespace ehrnet {

// Bad layer/kernel configuration: mismatched dims, invalid hyperparameters.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement discovered while wiring or executing a graph.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents (tensor files, annotation/pose documents).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside the mathematically valid domain (e.g. watts <= 0).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Scaling coefficient outside the supported range.
struct UnsupportedCoefficient : std::runtime_error {
    explicit UnsupportedCoefficient(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace ehrnet
