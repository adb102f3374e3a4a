#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lodestro {

/// Thrown when a caller violates a documented precondition.
class contract_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by the least-squares solve when R has a (numerically) zero pivot.
class rank_deficient_error : public std::runtime_error {
public:
    rank_deficient_error(std::size_t column, const std::string& what)
        : std::runtime_error(what), column_(column) {}

    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

enum class evaluation_failure { unphysical, linear_solve };

/// Raised by a fixed-point map when it cannot produce G(p).
class evaluation_error : public std::runtime_error {
public:
    evaluation_error(evaluation_failure kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] evaluation_failure kind() const noexcept { return kind_; }

private:
    evaluation_failure kind_;
};

inline void expects(bool condition, const char* message) {
    if (!condition) throw contract_error(message);
}

}  // namespace lodestro
