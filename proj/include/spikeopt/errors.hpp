#pragma once

#include <stdexcept>
#include <string>

namespace spikeopt {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An evaluated function returned NaN or infinity.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// An iterative routine exhausted its evaluation budget.
class NoConvergenceError : public Error {
public:
    using Error::Error;
};

/// Root bracket endpoints do not straddle a sign change.
class NoSignChangeError : public Error {
public:
    using Error::Error;
};

/// Adaptive ODE step size collapsed below the representable floor.
class StepUnderflowError : public Error {
public:
    using Error::Error;
};

/// A PRC inversion was requested on a non-monotone interval.
class NotMonotoneError : public Error {
public:
    using Error::Error;
};

/// Least-squares fit stalled with residual above the configured bound.
class IllConditionedError : public Error {
public:
    using Error::Error;
};

/// A bang arc would stall or reverse the phase (non-positive field).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// The requested switch level misses the PRC range of a segment.
class NoSwitchAngleError : public Error {
public:
    using Error::Error;
};

/// No candidate control word admits a charge-balanced solution.
class NoFeasibleWordError : public Error {
public:
    using Error::Error;
};

/// Unbounded-delay regime detected but no target delay was supplied.
class TargetRequiredError : public Error {
public:
    using Error::Error;
};

/// No periodic orbit found over the baseline-current search range.
class NotOscillatoryError : public Error {
public:
    using Error::Error;
};

/// The simulated trajectory never produced a spike within its budget.
class NoSpikeError : public Error {
public:
    using Error::Error;
};

/// A required input file is missing.
class MissingInputError : public Error {
public:
    using Error::Error;
};

} // namespace spikeopt
