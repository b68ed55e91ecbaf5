#pragma once

#include <stdexcept>
#include <string>

namespace sdd {

// Shape mismatches between operands (rows/cols disagreement, odd column
// counts where an even split is required, ...).
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Scalar arguments outside their contract (t outside [0,1], lo >= hi, ...).
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed input files. Carries a byte offset (binary formats) or a line
// number (text formats); -1 when not applicable.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, long long where = -1)
        : std::runtime_error(where >= 0 ? msg + " (at " + std::to_string(where) + ")" : msg),
          where_(where) {}
    long long where() const noexcept { return where_; }

private:
    long long where_;
};

// Training produced a non-finite loss. Carries the offending step index.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& msg, long long step)
        : std::runtime_error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
    long long step() const noexcept { return step_; }

private:
    long long step_;
};

// An operation was called out of sequence (e.g. backward without a cached
// forward pass).
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

// SB targets must be exactly -1 or +1.
class LabelError : public std::invalid_argument {
public:
    explicit LabelError(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace sdd
