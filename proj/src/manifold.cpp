#include "hcx/manifold.hpp"

#include "hcx/log.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hcx {

namespace {

constexpr double kResonanceGap = 1e-8;
constexpr int kSubgrid = 17;

State4 row_state(const PeriodicGrid& g, Eigen::Index i) { return g.values().row(i).transpose(); }

// Linear algebra of the order-k homological equation
//   DF(K(θ)) X(θ) - μ X(θ+ω) = R(θ)
// in the bundle frame, where it reduces to scalar shift equations.
class HomologicalSolver {
public:
    HomologicalSolver(const BundleSet& b, std::vector<Mat4> jac, double omega)
        : bundles_(b), jac_(std::move(jac)), omega_(omega) {
        const Eigen::Index n = b.P.size();
        const PeriodicGrid ahead = shift(b.P, omega);
        frame_.resize(static_cast<std::size_t>(n));
        ahead_inv_.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            frame_[static_cast<std::size_t>(i)] = b.frame(i);
            Mat4 pa;
            for (int k = 0; k < 16; ++k) pa.data()[k] = ahead.values()(i, k);
            ahead_inv_[static_cast<std::size_t>(i)] = pa.inverse();
        }
    }

    const std::vector<Mat4>& jacobians() const { return jac_; }

    PeriodicGrid apply(const PeriodicGrid& X, double mu) const {
        const PeriodicGrid ahead = shift(X, omega_);
        PeriodicGrid out = PeriodicGrid::zeros(X.size(), 4);
        for (Eigen::Index i = 0; i < X.size(); ++i) {
            out.values().row(i) =
                (jac_[static_cast<std::size_t>(i)] * row_state(X, i) - mu * row_state(ahead, i)).transpose();
        }
        return out;
    }

    PeriodicGrid solve(const PeriodicGrid& R, double mu) const {
        const Eigen::Index n = R.size();
        // Λ ξ(θ) - μ ξ(θ+ω) = P(θ+ω)^{-1} R(θ)
        PeriodicGrid eta = PeriodicGrid::zeros(n, 4);
        for (Eigen::Index i = 0; i < n; ++i) {
            eta.values().row(i) = (ahead_inv_[static_cast<std::size_t>(i)] * row_state(R, i)).transpose();
        }
        auto comp = [&](int c) { return PeriodicGrid(eta.values().col(c)); };
        const PeriodicGrid xi2 = solve_shift_equation(1.0, mu, omega_, comp(1));
        PeriodicGrid rhs1 = comp(0);
        rhs1.values().col(0) -= bundles_.T_shear.values().col(0).cwiseProduct(xi2.values().col(0));
        const PeriodicGrid xi1 = solve_shift_equation(1.0, mu, omega_, rhs1);
        const PeriodicGrid xi3 = solve_shift_equation(bundles_.lambda_s, mu, omega_, comp(2));
        const PeriodicGrid xi4 = solve_shift_equation(bundles_.lambda_u, mu, omega_, comp(3));

        PeriodicGrid X = PeriodicGrid::zeros(n, 4);
        for (Eigen::Index i = 0; i < n; ++i) {
            const State4 xi(xi1.values()(i, 0), xi2.values()(i, 0), xi3.values()(i, 0), xi4.values()(i, 0));
            X.values().row(i) = (frame_[static_cast<std::size_t>(i)] * xi).transpose();
        }
        return X;
    }

private:
    const BundleSet& bundles_;
    std::vector<Mat4> jac_;
    double omega_;
    std::vector<Mat4> frame_;
    std::vector<Mat4> ahead_inv_;
};

// Taylor coefficients of F(W(θ_i, s)) for the truncated series W, to the
// degree given by the number of columns, for every grid angle.
std::vector<Jet4> compose_with_map(const std::vector<PeriodicGrid>& coeffs, int degree, const ModelParams& params,
                                   const FlowSettings& settings) {
    const Eigen::Index n = coeffs.front().size();
    std::vector<Jet4> out(static_cast<std::size_t>(n));
    detail::parallel_for(n, [&](std::int64_t i) {
        Jet4 jet = Jet4::Zero(4, degree + 1);
        for (int k = 0; k <= degree && k < static_cast<int>(coeffs.size()); ++k) {
            jet.col(k) = coeffs[static_cast<std::size_t>(k)].values().row(i).transpose();
        }
        out[static_cast<std::size_t>(i)] = strobe_map_jet(jet, 1, params, settings);
    });
    return out;
}

PeriodicGrid coefficient_grid(const std::vector<Jet4>& jets, int k) {
    PeriodicGrid g = PeriodicGrid::zeros(static_cast<Eigen::Index>(jets.size()), 4);
    for (std::size_t i = 0; i < jets.size(); ++i) g.values().row(static_cast<Eigen::Index>(i)) = jets[i].col(k).transpose();
    return g;
}

double max_abs(const PeriodicGrid& g) { return g.values().cwiseAbs().maxCoeff(); }

PeriodicGrid low_pass(const PeriodicGrid& g, Eigen::Index kmax) {
    Eigen::MatrixXcd c = spectrum(g);
    for (Eigen::Index b = 0; b < g.size(); ++b) {
        if (std::abs(symmetric_frequency(b, g.size())) > kmax) c.row(b).setZero();
    }
    return from_spectrum(c);
}

} // namespace

const char* to_string(ManifoldKind kind) { return kind == ManifoldKind::Unstable ? "unstable" : "stable"; }

PeriodicGrid FourierTaylorManifold::eval_column(double s) const {
    PeriodicGrid out = coeffs.back();
    for (int k = order() - 1; k >= 0; --k) {
        out.values() = out.values() * s + coeffs[static_cast<std::size_t>(k)].values();
    }
    return out;
}

PeriodicGrid FourierTaylorManifold::eval_column_ds(double s) const {
    PeriodicGrid out = PeriodicGrid::zeros(size(), 4);
    for (int k = order(); k >= 1; --k) {
        out.values() = out.values() * s + static_cast<double>(k) * coeffs[static_cast<std::size_t>(k)].values();
    }
    return out;
}

PeriodicGrid FourierTaylorManifold::eval_column_dtheta(double s) const { return differentiate(eval_column(s)); }

State4 FourierTaylorManifold::eval(double theta, double s) const { return trig_interp(eval_column(s), theta); }

Jet4 FourierTaylorManifold::jet_at(Eigen::Index i) const {
    Jet4 jet(4, order() + 1);
    for (int k = 0; k <= order(); ++k) jet.col(k) = coeffs[static_cast<std::size_t>(k)].values().row(i).transpose();
    return jet;
}

double conjugacy_residual(const FourierTaylorManifold& W, double s, const FlowSettings& settings) {
    double worst = 0.0;
    // Outermost samples first; they are the likeliest to fail.
    for (int j = kSubgrid / 2; j >= 0; --j) {
        for (int sign : {1, -1}) {
            if (j == 0 && sign < 0) continue;
            const double sigma = sign * s * static_cast<double>(j) / static_cast<double>(kSubgrid / 2);
            const PeriodicGrid col = W.eval_column(sigma);
            const MapSamples img = sample_map(col, W.params, settings, false);
            const PeriodicGrid target = shift(W.eval_column(W.lambda * sigma), W.omega);
            for (Eigen::Index i = 0; i < col.size(); ++i) {
                const double r = (img.image[static_cast<std::size_t>(i)] - row_state(target, i)).cwiseAbs().maxCoeff();
                worst = std::max(worst, std::isfinite(r) ? r : std::numeric_limits<double>::infinity());
            }
        }
    }
    return worst;
}

FourierTaylorManifold compute_manifold(const InvariantCircle& circle, const BundleSet& bundles, ManifoldKind kind,
                                       const ManifoldSettings& settings) {
    if (settings.order < 1) throw ConfigError("manifold order must be at least 1");
    if (!(settings.w1_scale >= 0.0)) throw ConfigError("w1_scale must be non-negative");
    const bool unstable = kind == ManifoldKind::Unstable;

    FourierTaylorManifold W;
    W.kind = kind;
    W.lambda = unstable ? bundles.lambda_u : bundles.lambda_s;
    W.omega = circle.omega;
    W.params = circle.params;
    W.coeffs = {circle.K, bundles.column(unstable ? 3 : 2)};

    const MapSamples samples = sample_map(circle.K, circle.params, settings.flow, true);
    const HomologicalSolver solver(bundles, samples.jacobian, circle.omega);

    for (int k = 2; k <= settings.order; ++k) {
        const double mu = std::pow(W.lambda, k);
        for (double centre : {1.0, bundles.lambda_s, bundles.lambda_u}) {
            if (std::abs(mu - centre) < kResonanceGap) {
                std::ostringstream err;
                err << "resonance at order " << k << ": lambda^k = " << mu << " vs multiplier " << centre;
                throw ResonanceError(err.str(), k);
            }
        }
        // With W_k = 0 the order-k coefficient of F∘W is the forcing E_k.
        const auto jets = compose_with_map(W.coeffs, k, circle.params, settings.flow);
        PeriodicGrid rhs = coefficient_grid(jets, k);
        rhs.values() *= -1.0;

        PeriodicGrid Wk = solver.solve(rhs, mu);
        // The frame is exact only to the bundle residual; polish against the
        // true operator. Only the resolved part of the defect is corrected:
        // near the Nyquist band the frame solve is not an accurate inverse.
        PeriodicGrid defect = solver.apply(Wk, mu);
        defect.values() -= rhs.values();
        for (int pass = 0; pass < 4; ++pass) {
            PeriodicGrid candidate = Wk;
            candidate.values() -= solver.solve(low_pass(defect, Wk.size() / 4), mu).values();
            PeriodicGrid next = solver.apply(candidate, mu);
            next.values() -= rhs.values();
            log::debug("order ", k, " pass ", pass, " defect ", max_abs(defect), " -> ", max_abs(next));
            if (!(max_abs(next) < max_abs(defect))) break;
            Wk = std::move(candidate);
            defect = std::move(next);
        }
        W.coeffs.push_back(std::move(Wk));
        log::debug("manifold order ", k, ": max |W_k| = ", max_abs(W.coeffs.back()));
    }

    // The length of W_1 is free. With the unit-RMS bundle column the
    // coefficients grow geometrically, so rescale s to put the truncation
    // radius (where |W_order| s^order reaches e_tol) near s = 1.
    W.scale = settings.w1_scale;
    if (W.scale == 0.0) {
        const double top = max_abs(W.coeffs.back());
        W.scale = top > 0.0 ? std::pow(settings.e_tol / top, 1.0 / W.order()) : 1.0;
        if (!std::isfinite(W.scale) || W.scale <= 0.0) W.scale = 1.0;
    }
    double ck = 1.0;
    for (auto& c : W.coeffs) {
        c.values() *= ck;
        ck *= W.scale;
    }

    // Independent check of every order from one full-degree composition.
    const auto jets = compose_with_map(W.coeffs, W.order(), circle.params, settings.flow);
    W.order_residuals.assign(static_cast<std::size_t>(W.order() + 1), 0.0);
    double lk = 1.0;
    for (int k = 0; k <= W.order(); ++k) {
        PeriodicGrid diff = coefficient_grid(jets, k);
        diff.values() -= lk * shift(W.coeffs[static_cast<std::size_t>(k)], W.omega).values();
        W.order_residuals[static_cast<std::size_t>(k)] = max_abs(diff);
        lk *= W.lambda;
    }
    return W;
}

double fundamental_domain(const FourierTaylorManifold& W, double e_tol, double s_max, const FlowSettings& settings) {
    if (!(e_tol > 0.0)) throw ConfigError("e_tol must be positive");
    if (!(s_max > 0.0) || !std::isfinite(s_max)) throw ConfigError("s_max must be positive and finite");
    if (std::isinf(e_tol)) return s_max;

    auto ok = [&](double s) { return conjugacy_residual(W, s, settings) <= e_tol; };
    double lo = 0.0;
    double hi = 0.0;
    const double start = std::min(s_max, 1e-4);
    if (ok(start)) {
        lo = start;
        while (true) {
            const double next = 2.0 * lo;
            if (next >= s_max) {
                if (ok(s_max)) return s_max;
                hi = s_max;
                break;
            }
            if (!ok(next)) {
                hi = next;
                break;
            }
            lo = next;
        }
    } else {
        hi = start;
        lo = 0.5 * start;
        while (!ok(lo)) {
            hi = lo;
            lo *= 0.5;
            if (lo < 1e-16) throw NumericalError("no fundamental domain: conjugacy fails at every tested s");
        }
    }
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    if (lo < 1e-8) log::warn("fundamental domain radius is tiny: D = ", lo);
    return lo;
}

bool ManifoldMesh::column_valid(Eigen::Index k) const {
    for (const auto& c : coords) {
        if (!c.col(k).allFinite()) return false;
    }
    return true;
}

double ManifoldMesh::layer_radius(int n) const {
    const double q = kind == ManifoldKind::Unstable ? lambda : 1.0 / lambda;
    return std::pow(q, n) * D;
}

ManifoldMesh globalize(const FourierTaylorManifold& W, int k_half, int n_max, const FlowSettings& settings) {
    if (k_half < 1) throw ConfigError("k_half must be at least 1");
    if (n_max < 0) throw ConfigError("n_max must be non-negative");
    if (!(W.D > 0.0)) throw ConfigError("manifold has no fundamental domain (D <= 0)");

    ManifoldMesh mesh;
    mesh.kind = W.kind;
    mesh.omega = W.omega;
    mesh.lambda = W.lambda;
    mesh.D = W.D;
    mesh.n_max = static_cast<std::uint32_t>(n_max);

    const Eigen::Index n = W.size();
    const int dir = W.kind == ManifoldKind::Unstable ? 1 : -1;
    const int nfund = 2 * k_half + 1;
    std::vector<double> s_fund(static_cast<std::size_t>(nfund));
    for (int k = -k_half; k <= k_half; ++k) {
        s_fund[static_cast<std::size_t>(k + k_half)] =
            (k == k_half) ? W.D : (k == -k_half ? -W.D : W.D * static_cast<double>(k) / static_cast<double>(k_half));
    }

    struct Column {
        double s;
        PeriodicGrid grid;
    };
    std::vector<Column> columns;
    std::vector<PeriodicGrid> fund;
    for (double s : s_fund) {
        fund.push_back(W.eval_column(s));
        columns.push_back({s, fund.back()});
    }

    if (n_max > 0) {
        // W(θ, q^m s) = F^{dir m}(W(θ - dir mω, s)). The shift is applied to the
        // fundamental column, which is smooth in θ, rather than to its image:
        // images of outer layers are far too wrinkled for an N-point grid.
        const std::int64_t per_layer = static_cast<std::int64_t>(nfund) * n;
        std::vector<std::vector<PeriodicGrid>> images(
            static_cast<std::size_t>(n_max), std::vector<PeriodicGrid>(static_cast<std::size_t>(nfund)));
        for (int m = 1; m <= n_max; ++m) {
            for (int k = 0; k < nfund; ++k) {
                images[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(k)] =
                    shift(fund[static_cast<std::size_t>(k)], -dir * m * W.omega);
            }
        }
        detail::parallel_for(per_layer * n_max, [&](std::int64_t t) {
            const auto m = static_cast<int>(t / per_layer) + 1;
            const auto k = static_cast<std::size_t>((t % per_layer) / n);
            const Eigen::Index i = t % n;
            if (k == static_cast<std::size_t>(k_half)) return; // s = 0 stays on the circle
            auto row = images[static_cast<std::size_t>(m - 1)][k].values().row(i);
            try {
                row = strobe_map(State4(row.transpose()), dir * m, W.params, settings).state.transpose();
            } catch (const NumericalError&) {
                row.setConstant(std::numeric_limits<double>::quiet_NaN());
            }
        });
        for (int m = 1; m <= n_max; ++m) {
            const double q = std::pow(W.kind == ManifoldKind::Unstable ? W.lambda : 1.0 / W.lambda, m);
            for (int k = 0; k < nfund; ++k) {
                if (k == k_half) continue;
                PeriodicGrid& col = images[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(k)];
                if (!col.values().allFinite()) {
                    col.values().setConstant(std::numeric_limits<double>::quiet_NaN());
                    log::warn(to_string(W.kind), " mesh column at s = ", q * s_fund[static_cast<std::size_t>(k)],
                              " hit a singularity and is excluded");
                }
                columns.push_back({q * s_fund[static_cast<std::size_t>(k)], std::move(col)});
            }
        }
    }

    std::stable_sort(columns.begin(), columns.end(), [](const Column& a, const Column& b) { return a.s < b.s; });
    std::vector<Column> unique;
    for (auto& c : columns) {
        if (!unique.empty() && std::abs(c.s - unique.back().s) <= 1e-14 * W.D) continue;
        unique.push_back(std::move(c));
    }

    const auto m = static_cast<Eigen::Index>(unique.size());
    for (auto& c : mesh.coords) c.resize(n, m);
    mesh.s_values.resize(static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto& col = unique[static_cast<std::size_t>(k)];
        mesh.s_values[static_cast<std::size_t>(k)] = col.s;
        for (int c = 0; c < 4; ++c) mesh.coords[static_cast<std::size_t>(c)].col(k) = col.grid.values().col(c);
    }
    for (int layer = 0; layer <= n_max; ++layer) {
        const double r = mesh.layer_radius(layer);
        for (double target : {-r, r}) {
            const auto it = std::lower_bound(mesh.s_values.begin(), mesh.s_values.end(), target - 1e-12 * r);
            if (it == mesh.s_values.end() || std::abs(*it - target) > 1e-12 * std::max(1.0, r)) {
                throw NumericalError("layer boundary missing from globalized s-grid");
            }
            mesh.boundary_columns.push_back(static_cast<std::uint32_t>(it - mesh.s_values.begin()));
        }
    }
    std::sort(mesh.boundary_columns.begin(), mesh.boundary_columns.end());
    return mesh;
}

} // namespace hcx
