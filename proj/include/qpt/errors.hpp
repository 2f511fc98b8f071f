#pragma once

#include <stdexcept>
#include <string>

namespace qpt {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

// Dense-path size guard (n_qubits too large).
class ResourceLimit : public Error {
  public:
    using Error::Error;
};

// Operator fails a Hermiticity check.
class InvalidOperator : public Error {
  public:
    using Error::Error;
};

// Krylov propagator did not converge within the maximal subspace dimension.
class ConvergenceFailure : public Error {
  public:
    using Error::Error;
};

// Measurement record carries no usable signal (constant trajectory).
class DegenerateTrajectory : public Error {
  public:
    using Error::Error;
};

// Initial state and measurement direction are (anti)parallel.
class InvalidGeometry : public Error {
  public:
    using Error::Error;
};

// Time grid makes the least-squares design matrix rank deficient.
class DegenerateGrid : public Error {
  public:
    using Error::Error;
};

// Fitted coefficients violate the axis normalization constraints.
class InconsistentData : public Error {
  public:
    using Error::Error;
};

// Second-basis data cannot separate the remaining axis candidates.
class StillAmbiguous : public Error {
  public:
    using Error::Error;
};

// Requested operation is defined only for a narrower input class.
class Unsupported : public Error {
  public:
    using Error::Error;
};

// Rotation extraction got a reflection (determinant -1).
class InvalidRotation : public Error {
  public:
    using Error::Error;
};

// Optimizer produced a non-finite loss.
class Divergence : public Error {
  public:
    using Error::Error;
};

// Every restart of a multi-start optimization diverged.
class OptimizationFailure : public Error {
  public:
    using Error::Error;
};

}  // namespace qpt
