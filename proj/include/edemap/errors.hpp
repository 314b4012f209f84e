#pragma once

#include <stdexcept>
#include <string>

namespace edemap {

// Base class for all errors raised by the library. Subclasses distinguish
// input/validation failures from numerical/convergence failures so callers
// (e.g. the CLI) can map them to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input or validation problems: bad files, bad topology, bad arguments.
struct ValidationError : Error {
    using Error::Error;
};

// Numerical or iterative failures: solves, convergence, correction.
struct NumericalError : Error {
    using Error::Error;
};

struct ParseError : ValidationError {
    using ValidationError::ValidationError;
};
struct TopologyError : ValidationError {
    using ValidationError::ValidationError;
};
struct DegenerateFaceError : ValidationError {
    using ValidationError::ValidationError;
};
struct ZeroVectorError : ValidationError {
    using ValidationError::ValidationError;
};
struct ConnectivityMismatch : ValidationError {
    using ValidationError::ValidationError;
};
struct TargetTooSmall : ValidationError {
    using ValidationError::ValidationError;
};
struct CoincidentPolesError : ValidationError {
    using ValidationError::ValidationError;
};
struct NonpositiveDensityError : ValidationError {
    using ValidationError::ValidationError;
};

struct SolveError : NumericalError {
    using NumericalError::NumericalError;
};
struct ConformalFactorZero : NumericalError {
    using NumericalError::NumericalError;
};
struct BeltramiOutOfRange : NumericalError {
    using NumericalError::NumericalError;
};
struct DenominatorNearZero : NumericalError {
    using NumericalError::NumericalError;
};
struct PoleError : NumericalError {
    using NumericalError::NumericalError;
};
struct CorrectionFailed : NumericalError {
    using NumericalError::NumericalError;
};
struct ConvergenceError : NumericalError {
    using NumericalError::NumericalError;
};
struct StepDiverged : NumericalError {
    using NumericalError::NumericalError;
};
struct LocationFailure : NumericalError {
    using NumericalError::NumericalError;
};

} // namespace edemap
