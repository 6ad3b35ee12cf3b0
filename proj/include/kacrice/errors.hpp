#pragma once

#include <stdexcept>
#include <string>

namespace kacrice {

/// A mathematical precondition does not hold (nondegeneracy, radial conditions).
class ConditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation could not reach a trustworthy answer (factorization, convergence).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kacrice
