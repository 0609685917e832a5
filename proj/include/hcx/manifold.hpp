#pragma once

#include "hcx/torus.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace hcx {

enum class ManifoldKind : std::uint8_t { Unstable = 0, Stable = 1 };

const char* to_string(ManifoldKind kind);

struct ManifoldSettings {
    int order = 10;
    double e_tol = 1e-6;
    double s_max = 10.0; // cap on the fundamental-domain search
    /// W_1 = w1_scale * (unit-RMS bundle column); 0 picks the scale that puts
    /// the truncation radius for e_tol near s = 1.
    double w1_scale = 0.0;
    FlowSettings flow;
};

/// Fourier–Taylor parameterization W(θ, s) = Σ_k W_k(θ) s^k of the stable or
/// unstable manifold of an invariant circle, conjugating F to
/// (θ, s) -> (θ + ω, λ s).
struct FourierTaylorManifold {
    std::vector<PeriodicGrid> coeffs; // W_0 = K, W_1 = bundle column, ...
    ManifoldKind kind = ManifoldKind::Unstable;
    double lambda = 0.0;
    double omega = 0.0;
    double D = 0.0;
    double e_tol = 0.0;
    double scale = 1.0; // W_1 = scale * bundle column
    ModelParams params;
    /// Max-norm residual of the order-k Taylor coefficient of
    /// F(W(θ, s)) - W(θ + ω, λ s) on the grid, k = 0..order.
    std::vector<double> order_residuals;

    int order() const { return static_cast<int>(coeffs.size()) - 1; }
    Eigen::Index size() const { return coeffs.front().size(); }

    /// W(θ_i, s) for all grid angles (N x 4).
    PeriodicGrid eval_column(double s) const;
    /// ∂_s W(θ_i, s) for all grid angles.
    PeriodicGrid eval_column_ds(double s) const;
    /// ∂_θ W(θ_i, s) for all grid angles.
    PeriodicGrid eval_column_dtheta(double s) const;
    /// W(θ, s) at an arbitrary angle: series at every θ_i, then trigonometric
    /// interpolation.
    State4 eval(double theta, double s) const;

    /// Truncated Taylor coefficients of s -> W(θ_i, s) (4 x (order+1)).
    Jet4 jet_at(Eigen::Index i) const;
};

/// Max over the grid of ||F(W(θ_i, σ)) - W(θ_i + ω, λσ)||_inf for σ on a
/// 17-point uniform sub-grid of [-s, s].
double conjugacy_residual(const FourierTaylorManifold& W, double s, const FlowSettings& settings);

/// Order-by-order solution of the invariance equation up to `settings.order`;
/// the returned manifold has D = 0 until `fundamental_domain` is applied.
FourierTaylorManifold compute_manifold(const InvariantCircle& circle, const BundleSet& bundles,
                                       ManifoldKind kind, const ManifoldSettings& settings);

/// Largest D (bracketing plus bisection) with conjugacy_residual(W, D) <= e_tol,
/// capped at s_max.
double fundamental_domain(const FourierTaylorManifold& W, double e_tol, double s_max, const FlowSettings& settings);

/// Globalized mesh of W over θ_i and a sorted s-grid.
///
/// Storage: coords[c](i, k) is component c of W(θ_i, s_k). Columns whose
/// propagation hit a singularity are filled with NaN and skipped downstream.
struct ManifoldMesh {
    std::array<Eigen::MatrixXd, 4> coords;
    std::vector<double> s_values;
    ManifoldKind kind = ManifoldKind::Unstable;
    double omega = 0.0;
    double lambda = 0.0;
    double D = 0.0;
    std::uint32_t n_max = 0;
    std::vector<std::uint32_t> boundary_columns; // columns at ±D·(layer multiplier)^n, n = 0..n_max

    Eigen::Index rows() const { return coords[0].rows(); }
    Eigen::Index cols() const { return coords[0].cols(); }
    State4 point(Eigen::Index i, Eigen::Index k) const {
        return State4(coords[0](i, k), coords[1](i, k), coords[2](i, k), coords[3](i, k));
    }
    bool column_valid(Eigen::Index k) const;
    /// s-value of the outer boundary of layer n: D λ_u^n or D λ_s^{-n}.
    double layer_radius(int n) const;
};

/// Evaluates W on s_k = kD/K_half (k = -K_half..K_half) and maps each
/// fundamental column with F^n (unstable) or F^{-n} (stable) for
/// n = 1..n_max, shifting back spectrally by ∓nω.
ManifoldMesh globalize(const FourierTaylorManifold& W, int k_half, int n_max, const FlowSettings& settings);

} // namespace hcx
