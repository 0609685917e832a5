#pragma once

#include "hcx/isect.hpp"
#include "hcx/manifold.hpp"

#include <array>
#include <string>
#include <vector>

namespace hcx {

/// A local Fourier–Taylor manifold together with the map that globalizes it.
/// Production runs pass a FlowMap; tests substitute analytic maps.
struct GlobalManifold {
    const FourierTaylorManifold* local = nullptr;
    const StroboscopicMap* map = nullptr;
};

/// Value and partials of W at one (θ, s).
struct ManifoldPoint {
    State4 value;
    State4 d_theta;
    State4 d_s;
    int m = 0; // map iterates used: F^m (unstable) or F^{-m} (stable)
};

/// Local series evaluation at an arbitrary angle: per-grid-angle series,
/// then trigonometric interpolation (θ-derivative spectrally).
ManifoldPoint eval_local(const FourierTaylorManifold& W, double theta, double s);

/// Smallest m >= 0 with |s| q^{-m} <= D, q = λ_u (unstable) or 1/λ_s (stable).
/// A relative slack of 1e-12 keeps mesh nodes on layer boundaries in the layer
/// they were generated from.
int minimal_iterates(const FourierTaylorManifold& W, double s);

/// W(θ, s) = F^m(W(θ - mω, λ_u^{-m} s)) or F^{-m}(W(θ + mω, λ_s^m s)).
/// m < 0 selects the minimal count; a larger m gives an independent route.
/// Throws ConfigError if m is below the minimal count and NumericalError on
/// propagation failures.
ManifoldPoint eval_global(const GlobalManifold& G, double theta, double s, int m = -1, bool partials = true);

using ConnectionParams = std::array<double, 4>; // θ_u, s_u, θ_s, s_s

/// f = W^u(θ_u, s_u) - W^s(θ_s, s_s) and Df = [∂θ_u f, ∂s_u f, ∂θ_s f, ∂s_s f].
struct ConnectionEval {
    State4 f;
    Mat4 Df;
    int m_u = 0;
    int m_s = 0;
};

ConnectionEval connection_function(const GlobalManifold& Wu, const GlobalManifold& Ws, const ConnectionParams& x,
                                   bool jacobian = true);

enum class RefineStatus { Converged, MaxIter, Singular, Failed };

const char* to_string(RefineStatus status);

struct RefineSettings {
    double alpha = 0.1;
    double tol = 1e-7;
    int max_iter = 200;
    double max_condition = 1e15; // beyond this Df is treated as singular
    void validate() const;
};

struct ConnectionSolution {
    ConnectionParams params{};
    State4 point = State4::Zero(); // W^u(θ_u, s_u)
    double residual_norm = 0.0;    // ||f||_2
    int iterations = 0;
    RefineStatus status = RefineStatus::Failed;
    double condition_estimate = 0.0; // cond_2(Df) at the last Jacobian
    int m_u = 0;
    int m_s = 0;
    double tof = 0.0; // (m_u + m_s) map periods
    std::vector<double> residual_history; // accepted iterates, starting with the guess
    std::vector<double> alpha_history;    // damping used for every attempted step
    std::string message;
};

/// Damped Newton on f = 0 starting from `guess`. Never throws on numerical
/// trouble; the outcome is in `status` and `message`.
ConnectionSolution refine_connection(const GlobalManifold& Wu, const GlobalManifold& Ws, const ConnectionParams& guess,
                                     const RefineSettings& settings);

ConnectionParams guess_from_record(const IntersectionRecord& record);

/// Refines every guess independently (in parallel for Backend::Parallel).
std::vector<ConnectionSolution> refine_all(const GlobalManifold& Wu, const GlobalManifold& Ws,
                                           const std::vector<ConnectionParams>& guesses,
                                           const RefineSettings& settings, Backend backend = Backend::Serial);

struct DedupSummary {
    std::size_t total = 0;
    std::size_t converged = 0;
    std::vector<std::size_t> unique;   // indices of representative solutions
    std::vector<long> representative;  // per solution: index of its representative, -1 if not converged
};

/// Groups converged solutions whose parameters agree within tol (angles
/// compared on the circle).
DedupSummary deduplicate(const std::vector<ConnectionSolution>& solutions, double tol = 1e-6);

/// ||f|| recomputed with m_u + extra and m_s + extra iterates.
double verify_residual(const GlobalManifold& Wu, const GlobalManifold& Ws, const ConnectionParams& x, int extra = 1);

/// Distance between F^{m_u + m_s} of the unstable-side fundamental point and
/// the stable-side fundamental point. Both manifolds must share one map.
double trajectory_realization_error(const GlobalManifold& Wu, const GlobalManifold& Ws,
                                    const ConnectionSolution& solution);

} // namespace hcx
