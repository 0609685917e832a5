#pragma once

#include "hcx/types.hpp"

namespace hcx {

enum class ModelKind { Pcrtbp, Pertbp };

/// Physical parameters of the (possibly perturbed) planar restricted problem.
///
/// For `Pertbp` the primaries follow a unit-semi-major-axis Kepler ellipse of
/// eccentricity `eps` and period 2π, so `omega_p` must be 1. For `Pcrtbp`
/// `eps` must be 0 and `omega_p` only sets the stroboscopic period 2π/Ω_p.
struct ModelParams {
    ModelKind kind = ModelKind::Pcrtbp;
    double mu = 0.0;
    double eps = 0.0;
    double omega_p = 1.0;

    /// Period of the stroboscopic map, 2π/Ω_p.
    double map_period() const { return kTwoPi / omega_p; }

    /// Throws ConfigError if any invariant is violated.
    void validate() const;

    static ModelParams pcrtbp(double mu) { return {ModelKind::Pcrtbp, mu, 0.0, 1.0}; }
    static ModelParams pertbp(double mu, double eps) { return {ModelKind::Pertbp, mu, eps, 1.0}; }
};

/// Position of the primaries along the ellipse at epoch t.
struct EllipticKinematics {
    double t = 0.0;
    double E = 0.0;   // eccentric anomaly
    double n = 1.0;   // instantaneous angular rate of the primaries' line
    double rho = 1.0; // primaries' separation, 1 - eps cos E
};

/// Geometry entering the Hamiltonian at one epoch: rotation rate and the
/// x-coordinates of both primaries (on the x axis, barycentre at origin).
struct PrimaryGeometry {
    double n = 1.0;
    double x1 = 0.0; // m1 at -mu*rho
    double x2 = 1.0; // m2 at (1-mu)*rho
    double gm1 = 1.0;
    double gm2 = 0.0;
};

/// Distance below which a vector field evaluation is treated as a collision.
inline constexpr double kSingularityRadius = 1e-12;

/// Solves Kepler's equation E - eps sin E = M. Continuous in M, with
/// E(M + 2π) = E(M) + 2π. Newton from M + eps sin M, bisection fallback.
double kepler_solve(double mean_anomaly, double eps);

EllipticKinematics elliptic_kinematics(double t, double eps);

PrimaryGeometry primary_geometry(double t, const ModelParams& params);

/// Hamilton's equations for H_eps; the PCRTBP field when eps = 0.
State4 vector_field(const State4& z, double t, const ModelParams& params);

double hamiltonian(const State4& z, double t, const ModelParams& params);

/// Jacobian of `vector_field` with respect to the state.
Mat4 variational_field(const State4& z, double t, const ModelParams& params);

} // namespace hcx
