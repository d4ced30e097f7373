#pragma once

#include <stdexcept>
#include <string>

namespace lcmdp {

/// Invalid model input: malformed curve, inconsistent scheme sizes, bad config.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Matrix factorization failed (e.g. correlation matrix not positive definite).
class DecompositionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A memory plan or size cap was exceeded; nothing was allocated.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative numerics failed to produce a usable result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lcmdp
