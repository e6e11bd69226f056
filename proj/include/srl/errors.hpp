#pragma once

#include <stdexcept>
#include <string>

namespace srl {

// Numerical or combinatorial guard violated: non-finite data, enumeration
// too large, no solution inside a search budget.
class GuardError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Simplex pivot budget exhausted. Never converted into a status.
class IterationLimitError : public GuardError {
public:
    using GuardError::GuardError;
};

// Iterative method stopped before its optimality test passed.
class ConvergenceError : public GuardError {
public:
    using GuardError::GuardError;
};

// Two independent routes to the same quantity disagreed.
class ConsistencyError : public GuardError {
public:
    using GuardError::GuardError;
};

}  // namespace srl
