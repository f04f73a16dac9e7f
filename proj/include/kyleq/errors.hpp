#pragma once

#include <stdexcept>
#include <string>

namespace kyleq {

// Common base so callers can catch any solver/model failure in one handler.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A model parameter or config value violates its documented bound.
struct invalid_parameter_error : error {
    using error::error;
};

// An input left the mathematical domain of an operation (e.g. nonpositive
// terminal moment, vanishing recursion denominator).
struct domain_error : error {
    using error::error;
};

// The guaranteed sign conditions f(0) < 0 < f(upper) failed, which signals a
// corrupted upstream state rather than a root-finding problem.
struct bracket_error : error {
    using error::error;
};

// Second-order condition turned nonpositive along a backward trajectory.
struct soc_error : error {
    using error::error;
};

// An iterative search ran out of iterations or stalled.
struct convergence_error : error {
    using error::error;
};

// A sequence argument has the wrong length for the model at hand.
struct dimension_error : error {
    using error::error;
};

}  // namespace kyleq
