#include "hcx/torus.hpp"

#include "parallel.hpp"

#include <cmath>
#include <sstream>

namespace hcx {

namespace {

constexpr int kPowerMaxIter = 3000;
constexpr double kPowerTol = 1e-14;
constexpr double kHyperbolicityMargin = 1e-4;
constexpr Eigen::Index kJacobianOversampling = 4;

State4 row_state(const PeriodicGrid& g, Eigen::Index i) { return g.values().row(i).transpose(); }

// Matrix of the spectral shift by rho: column m is the shift of the m-th unit vector.
Eigen::MatrixXd shift_matrix(Eigen::Index n, double rho) {
    return shift(PeriodicGrid(Eigen::MatrixXd::Identity(n, n)), rho).values();
}

// Unit vector field spanning the unstable (forward) or stable (backward)
// bundle. At each θ the direction is the dominant left singular vector of
// the cocycle product that transports vectors from θ ∓ kω to θ, with DF
// between grid points from trigonometric interpolation. Products are
// lengthened until the direction settles; signs are then made continuous.
Eigen::MatrixXcd jacobian_spectrum(const std::vector<Mat4>& jac) {
    const auto n = static_cast<Eigen::Index>(jac.size());
    Eigen::MatrixXd flat(n, 16);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < 16; ++k) flat(i, k) = jac[static_cast<std::size_t>(i)].data()[k];
    }
    return spectrum(PeriodicGrid(std::move(flat)));
}

// Dominant direction at each of n grid angles of the forward (unstable) or
// inverse (stable) cocycle product, with DF at off-grid angles interpolated
// from `df_coeffs`.
PeriodicGrid bundle_direction(const Eigen::MatrixXcd& df_coeffs, Eigen::Index n, double omega, bool unstable) {
    auto df_at = [&](double theta) {
        const Eigen::VectorXd e = trig_interp_spectrum(df_coeffs, theta);
        return Mat4(Eigen::Map<const Mat4>(e.data()));
    };

    PeriodicGrid dir = PeriodicGrid::zeros(n, 4);
    detail::parallel_for(n, [&](std::int64_t i) {
        const double theta = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
        Mat4 m = Mat4::Identity();
        State4 prev = State4::Zero();
        double change = 1.0;
        for (int k = 1; k <= kPowerMaxIter && change > kPowerTol; ++k) {
            if (unstable) {
                m = m * df_at(theta - k * omega);
            } else {
                m = m * df_at(theta + (k - 1) * omega).inverse();
            }
            m /= m.cwiseAbs().maxCoeff();
            const Eigen::JacobiSVD<Mat4> svd(m, Eigen::ComputeFullU);
            State4 u = svd.matrixU().col(0);
            if (u.dot(prev) < 0.0) u = -u;
            change = (u - prev).cwiseAbs().maxCoeff();
            prev = u;
        }
        if (change > 1e-10) {
            throw HyperbolicityError("cocycle product did not single out a dominant direction");
        }
        dir.values().row(i) = prev.transpose();
    });

    for (Eigen::Index i = 1; i < n; ++i) {
        if (dir.values().row(i).dot(dir.values().row(i - 1)) < 0.0) dir.values().row(i) *= -1.0;
    }
    if (dir.values().row(n - 1).dot(dir.values().row(0)) <= 0.0) {
        throw HyperbolicityError("hyperbolic bundle is not orientable over the circle");
    }
    return dir;
}

struct HyperbolicBundle {
    PeriodicGrid v;
    double lambda = 0.0;
};

// Rescales a unit line field u so that DF v(θ) = λ v(θ+ω) with constant λ:
// with DF u(θ) = a(θ) u(θ+ω), v = e^g u where g(θ+ω) - g(θ) = log a - log λ.
HyperbolicBundle floquet_scale(const PeriodicGrid& u, const std::vector<Mat4>& jac, double omega) {
    const Eigen::Index n = u.size();
    const PeriodicGrid ahead = shift(u, omega);
    PeriodicGrid loga = PeriodicGrid::zeros(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const State4 image = jac[static_cast<std::size_t>(i)] * row_state(u, i);
        const State4 next = row_state(ahead, i);
        const double a = image.dot(next) / next.squaredNorm();
        if (!(a > 0.0)) throw HyperbolicityError("bundle multiplier changes sign along the circle");
        loga.values()(i, 0) = std::log(a);
    }
    const double mean = loga.values().mean();
    loga.values().array() -= mean;
    const PeriodicGrid g = solve_shift_equation(-1.0, -1.0, omega, loga, 1e-13, true);

    HyperbolicBundle out{u, std::exp(mean)};
    for (Eigen::Index i = 0; i < n; ++i) out.v.values().row(i) *= std::exp(g.values()(i, 0));
    out.v.values() /= std::sqrt(out.v.values().rowwise().squaredNorm().mean());
    return out;
}

BundleSet assemble_bundles(const InvariantCircle& circle, const std::vector<Mat4>& jac,
                           const Eigen::MatrixXcd& df_coeffs);

} // namespace

Mat4 symplectic_form() {
    Mat4 j = Mat4::Zero();
    j.block<2, 2>(0, 2).setIdentity();
    j.block<2, 2>(2, 0) = -Eigen::Matrix2d::Identity();
    return j;
}

MapSamples sample_map(const PeriodicGrid& K, const ModelParams& params, const FlowSettings& settings,
                      bool with_stm) {
    const auto n = static_cast<std::size_t>(K.size());
    MapSamples out;
    out.image.resize(n);
    if (with_stm) out.jacobian.resize(n);
    detail::parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t i) {
        const auto r = strobe_map(row_state(K, i), 1, params, settings, with_stm);
        out.image[static_cast<std::size_t>(i)] = r.state;
        if (with_stm) out.jacobian[static_cast<std::size_t>(i)] = *r.stm;
    });
    return out;
}

double invariance_residual(const PeriodicGrid& K, double omega, const ModelParams& params,
                           const FlowSettings& settings) {
    const MapSamples s = sample_map(K, params, settings, false);
    const PeriodicGrid ahead = shift(K, omega);
    double r = 0.0;
    for (Eigen::Index i = 0; i < K.size(); ++i) {
        r = std::max(r, (s.image[static_cast<std::size_t>(i)] - row_state(ahead, i)).cwiseAbs().maxCoeff());
    }
    return r;
}

double rotation_number_from_period(double period, const ModelParams& params) {
    return kTwoPi * kTwoPi / (params.omega_p * period);
}

PeriodicGrid circle_from_periodic_orbit(const State4& z0, double period, Eigen::Index n, const ModelParams& params,
                                        const FlowSettings& settings) {
    PeriodicGrid K = PeriodicGrid::zeros(n, 4);
    detail::parallel_for(n, [&](std::int64_t i) {
        const double t = period * static_cast<double>(i) / static_cast<double>(n);
        K.values().row(i) = flow(z0, 0.0, t, params, settings).transpose();
    });
    return K;
}

SymmetricOrbit correct_symmetric_orbit(double x0, double py0, double period, const ModelParams& params,
                                       const FlowSettings& settings, double tol, int max_iter) {
    if (params.kind != ModelKind::Pcrtbp || params.eps != 0.0) {
        throw ConfigError("symmetric periodic orbits are corrected in the autonomous model only");
    }
    double res = 0.0;
    for (int it = 0; it <= max_iter; ++it) {
        const State4 z(x0, 0.0, 0.0, py0);
        const auto [zh, phi] = flow_with_stm(z, 0.0, 0.5 * period, params, settings);
        const Eigen::Vector2d g(zh[1], zh[2]);
        res = g.cwiseAbs().maxCoeff();
        if (res < tol) return {z, period, res};
        Eigen::Matrix2d dg;
        dg << phi(1, 0), phi(1, 3), phi(2, 0), phi(2, 3);
        const Eigen::Vector2d dx = dg.fullPivLu().solve(-g);
        x0 += dx[0];
        py0 += dx[1];
    }
    throw ConvergenceError("symmetric periodic orbit correction did not converge", res);
}

InvariantCircle solve_invariant_circle(const PeriodicGrid& seed, double omega, const ModelParams& params,
                                       const TorusSettings& settings) {
    params.validate();
    settings.flow.validate();
    if (seed.dim() != 4) throw ConfigError("circle seed must have 4 components");
    const Eigen::Index n = seed.size();
    const Eigen::Index dim = 4 * n;
    const Eigen::MatrixXd S = shift_matrix(n, omega);

    InvariantCircle circle{seed, omega, params, 0.0, 0};
    double res = 0.0;
    for (int it = 0;; ++it) {
        const MapSamples s = sample_map(circle.K, params, settings.flow, true);
        const Eigen::MatrixXd ahead = S * circle.K.values();
        Eigen::VectorXd R(dim + 1);
        for (Eigen::Index c = 0; c < 4; ++c) {
            for (Eigen::Index i = 0; i < n; ++i) R[c * n + i] = s.image[static_cast<std::size_t>(i)][c] - ahead(i, c);
        }
        R[dim] = 0.0;
        res = R.head(dim).cwiseAbs().maxCoeff();
        if (!std::isfinite(res)) throw ConvergenceError("invariance residual is not finite", res);
        if (res < settings.tol) {
            circle.residual = res;
            circle.iterations = it;
            return circle;
        }
        if (it == settings.max_iter) break;

        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(dim + 1, dim);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Mat4& df = s.jacobian[static_cast<std::size_t>(i)];
            for (Eigen::Index c = 0; c < 4; ++c) {
                for (Eigen::Index d = 0; d < 4; ++d) J(c * n + i, d * n + i) = df(c, d);
            }
        }
        for (Eigen::Index c = 0; c < 4; ++c) J.block(c * n, c * n, n, n) -= S;
        // Phase condition: the sin θ coefficient of x stays fixed.
        for (Eigen::Index i = 0; i < n; ++i) J(dim, i) = std::sin(circle.K.theta(i));

        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
        if (qr.rank() < dim) {
            std::ostringstream err;
            err << "circle Newton system is rank deficient (rank " << qr.rank() << " of " << dim << ")";
            throw ConvergenceError(err.str(), res);
        }
        const Eigen::VectorXd dx = qr.solve(-R);
        if (!dx.allFinite()) throw ConvergenceError("circle Newton step is not finite", res);
        for (Eigen::Index c = 0; c < 4; ++c) circle.K.values().col(c) += dx.segment(c * n, n);
    }
    std::ostringstream err;
    err << "invariant circle Newton did not converge in " << settings.max_iter << " steps, residual " << res;
    throw ConvergenceError(err.str(), res);
}

Mat4 BundleSet::frame(Eigen::Index i) const {
    Mat4 m;
    for (int k = 0; k < 16; ++k) m.data()[k] = P.values()(i, k);
    return m;
}

Mat4 BundleSet::reduced(Eigen::Index i) const {
    Mat4 l = Mat4::Zero();
    l(0, 0) = 1.0;
    l(0, 1) = T_shear.values()(i, 0);
    l(1, 1) = 1.0;
    l(2, 2) = lambda_s;
    l(3, 3) = lambda_u;
    return l;
}

PeriodicGrid BundleSet::column(int col) const {
    return PeriodicGrid(P.values().middleCols(4 * col, 4));
}

double bundle_residual(const BundleSet& b, double omega, const std::vector<Mat4>& jac) {
    const PeriodicGrid ahead = shift(b.P, omega);
    BundleSet shifted = b;
    shifted.P = ahead;
    double r = 0.0;
    for (Eigen::Index i = 0; i < b.P.size(); ++i) {
        const Mat4 lhs = jac[static_cast<std::size_t>(i)] * b.frame(i);
        const Mat4 rhs = shifted.frame(i) * b.reduced(i);
        r = std::max(r, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    return r;
}

BundleSet compute_bundles(const InvariantCircle& circle, const FlowSettings& settings) {
    const MapSamples s = sample_map(circle.K, circle.params, settings, true);
    // The cocycle products need DF between grid points. Interpolating it from
    // the circle's own grid leaves aliasing noise that the later shift
    // equations amplify, so sample DF on a finer grid for that step.
    const Eigen::Index fine_n = kJacobianOversampling * circle.size();
    const Eigen::MatrixXcd kc = spectrum(circle.K);
    const PeriodicGrid fine_K = PeriodicGrid::sample(fine_n, 4, [&](double theta) {
        return trig_interp_spectrum(kc, theta);
    });
    const MapSamples fine = sample_map(fine_K, circle.params, settings, true);
    return assemble_bundles(circle, s.jacobian, jacobian_spectrum(fine.jacobian));
}

BundleSet compute_bundles(const InvariantCircle& circle, const std::vector<Mat4>& jac) {
    return assemble_bundles(circle, jac, jacobian_spectrum(jac));
}

namespace {

BundleSet assemble_bundles(const InvariantCircle& circle, const std::vector<Mat4>& jac,
                           const Eigen::MatrixXcd& df_coeffs) {
    const Eigen::Index n = circle.size();
    const double omega = circle.omega;

    const PeriodicGrid tangent = differentiate(circle.K);
    const HyperbolicBundle unstable = floquet_scale(bundle_direction(df_coeffs, n, omega, true), jac, omega);
    const HyperbolicBundle stable = floquet_scale(bundle_direction(df_coeffs, n, omega, false), jac, omega);
    if (unstable.lambda - 1.0 < kHyperbolicityMargin || 1.0 / stable.lambda - 1.0 < kHyperbolicityMargin) {
        std::ostringstream err;
        err << "circle is not usably hyperbolic: lambda_u = " << unstable.lambda
            << ", lambda_s = " << stable.lambda;
        throw HyperbolicityError(err.str());
    }

    // Centre column: symplectic conjugate of the tangent, orthogonal to it and
    // symplectically orthogonal to both hyperbolic directions.
    const Mat4 J = symplectic_form();
    PeriodicGrid w = PeriodicGrid::zeros(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const State4 L = row_state(tangent, i);
        Mat4 A;
        A.row(0) = L.transpose() * J;
        A.row(1) = row_state(stable.v, i).transpose() * J;
        A.row(2) = row_state(unstable.v, i).transpose() * J;
        A.row(3) = L.transpose();
        const Eigen::FullPivLU<Mat4> lu(A);
        if (!lu.isInvertible()) throw HyperbolicityError("degenerate bundle frame");
        w.values().row(i) = lu.solve(State4(1.0, 0.0, 0.0, 0.0)).transpose();
    }

    BundleSet out;
    out.lambda_s = stable.lambda;
    out.lambda_u = unstable.lambda;
    Eigen::MatrixXd P(n, 16);
    P.middleCols(0, 4) = tangent.values();
    P.middleCols(4, 4) = w.values();
    P.middleCols(8, 4) = stable.v.values();
    P.middleCols(12, 4) = unstable.v.values();
    out.P = PeriodicGrid(std::move(P));

    const PeriodicGrid tangent_ahead = shift(tangent, omega);
    const PeriodicGrid w_ahead = shift(w, omega);
    Eigen::MatrixXd T(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const State4 z = jac[static_cast<std::size_t>(i)] * row_state(w, i) - row_state(w_ahead, i);
        const State4 La = row_state(tangent_ahead, i);
        T(i, 0) = La.dot(z) / La.squaredNorm();
    }
    out.T_shear = PeriodicGrid(std::move(T));

    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::JacobiSVD<Mat4> svd(out.frame(i));
        const auto sv = svd.singularValues();
        out.max_condition = std::max(out.max_condition, sv[0] / sv[3]);
    }
    out.residual = bundle_residual(out, omega, jac);
    return out;
}

} // namespace

} // namespace hcx
