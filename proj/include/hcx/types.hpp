#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hcx {

/// Phase-space point (x, y, px, py) in normalized synodic coordinates.
using State4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Base class for all library errors. `exit_code` follows the CLI convention
/// (2 config, 3 numerical, 4 I/O).
class Error : public std::runtime_error {
public:
    Error(const std::string& what, int exit_code) : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what, 3) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what, 4) {}
};

/// A vector field was evaluated within the guard radius of a primary.
class SingularityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Iterative method stopped without meeting its tolerance.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double residual)
        : NumericalError(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Invariant circle is not usably hyperbolic.
class HyperbolicityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Small divisor at some Taylor order in the manifold recursion.
class ResonanceError : public NumericalError {
public:
    ResonanceError(const std::string& what, int order) : NumericalError(what), order_(order) {}
    int order() const noexcept { return order_; }

private:
    int order_;
};

} // namespace hcx
