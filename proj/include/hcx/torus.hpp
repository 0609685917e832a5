#pragma once

#include "hcx/flowmap.hpp"
#include "hcx/fourier.hpp"

#include <vector>

namespace hcx {

/// Invariant circle K of the stroboscopic map: F(K(θ)) = K(θ + ω).
struct InvariantCircle {
    PeriodicGrid K; // N x 4
    double omega = 0.0;
    ModelParams params;
    double residual = 0.0; // max_i ||F(K(θ_i)) - K(θ_i + ω)||_inf at solve time
    int iterations = 0;

    Eigen::Index size() const { return K.size(); }
    State4 point(Eigen::Index i) const { return K.values().row(i).transpose(); }
};

struct TorusSettings {
    FlowSettings flow;
    double tol = 1e-9;
    int max_iter = 15;
};

/// Images and Jacobians of the map at every grid point of a circle.
struct MapSamples {
    std::vector<State4> image;
    std::vector<Mat4> jacobian; // empty unless requested
};

MapSamples sample_map(const PeriodicGrid& K, const ModelParams& params, const FlowSettings& settings,
                      bool with_stm);

/// Max-norm residual of the invariance equation, evaluated from scratch.
double invariance_residual(const PeriodicGrid& K, double omega, const ModelParams& params,
                           const FlowSettings& settings);

/// Samples a periodic orbit of period `period` as the seed circle
/// K(θ) = γ(θ·period/2π).
PeriodicGrid circle_from_periodic_orbit(const State4& z0, double period, Eigen::Index n, const ModelParams& params,
                                        const FlowSettings& settings);

/// Rotation number 4π²/(Ω_p T) of the circle generated by an orbit of period T.
double rotation_number_from_period(double period, const ModelParams& params);

/// Symmetric periodic orbit crossing the x axis perpendicularly at t = 0 and
/// t = period/2, with state (x0, 0, 0, py0) at t = 0.
struct SymmetricOrbit {
    State4 z0;
    double period = 0.0;
    double residual = 0.0;
};

/// Differential correction of (x0, py0) at fixed period (autonomous model only).
SymmetricOrbit correct_symmetric_orbit(double x0, double py0, double period, const ModelParams& params,
                                       const FlowSettings& settings, double tol = 1e-12, int max_iter = 30);

/// Newton iteration on the Fourier grid for F(K(θ)) = K(θ + ω), with the
/// θ-translation freedom removed by holding the sine coefficient of the
/// first Fourier mode of x fixed. Throws ConvergenceError on failure.
InvariantCircle solve_invariant_circle(const PeriodicGrid& seed, double omega, const ModelParams& params,
                                       const TorusSettings& settings);

/// Frame P(θ) = [tangent, symplectic-conjugate centre, stable, unstable] with
/// DF(K(θ)) P(θ) = P(θ + ω) Λ(θ) and Λ = [[1, T, 0, 0], [0, 1, 0, 0],
/// [0, 0, λ_s, 0], [0, 0, 0, λ_u]].
struct BundleSet {
    PeriodicGrid P;       // N x 16, entries of P(θ_i) in column-major order
    PeriodicGrid T_shear; // N x 1
    double lambda_s = 0.0;
    double lambda_u = 0.0;
    double residual = 0.0;      // max_i ||DF P(θ_i) - P(θ_i+ω) Λ(θ_i)||
    double max_condition = 0.0; // largest cond(P(θ_i))

    Mat4 frame(Eigen::Index i) const;
    Mat4 reduced(Eigen::Index i) const;
    /// Column `col` of P as a grid (0 tangent, 1 centre, 2 stable, 3 unstable).
    PeriodicGrid column(int col) const;
};

BundleSet compute_bundles(const InvariantCircle& circle, const FlowSettings& settings);

/// Same as above with the map Jacobians along the circle supplied.
BundleSet compute_bundles(const InvariantCircle& circle, const std::vector<Mat4>& jacobians);

/// max_i ||DF(K(θ_i)) P(θ_i) - P(θ_i + ω) Λ(θ_i)||_inf
double bundle_residual(const BundleSet& bundles, double omega, const std::vector<Mat4>& jacobians);

/// Standard symplectic form matrix for (x, y, px, py).
Mat4 symplectic_form();

} // namespace hcx
