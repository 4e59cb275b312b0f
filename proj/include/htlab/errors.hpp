#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace htlab {

/// Root of every error thrown by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation does not hold.
class precondition_error : public error {
public:
    using error::error;
};

/// A constructed object violates its invariants (bad coefficient, bad grid, bad config value).
class validation_error : public error {
public:
    using error::error;
};

/// The v/u term was evaluated with u <= 0, or a density became non-positive.
class singularity_error : public error {
public:
    using error::error;
};

/// Hypothesis b < a_min/a_max is violated; the bound theory does not apply.
class hypothesis_error : public precondition_error {
public:
    using precondition_error::precondition_error;
};

/// An iterative procedure did not reach its tolerance.
class convergence_error : public error {
public:
    using error::error;
};

/// An internal consistency check failed (wrong K, missing sign change, ...).
class internal_error : public error {
public:
    using error::error;
};

/// Explicit time step lost positivity at a node.
class positivity_error : public error {
public:
    positivity_error(const std::string& what, std::size_t node, double suggested_dt)
        : error(what), node_(node), suggested_dt_(suggested_dt) {}

    std::size_t node() const noexcept { return node_; }
    double suggested_dt() const noexcept { return suggested_dt_; }

private:
    std::size_t node_;
    double suggested_dt_;
};

}  // namespace htlab
