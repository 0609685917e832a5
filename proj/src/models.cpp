#include "hcx/models.hpp"

#include <cmath>
#include <sstream>

namespace hcx {

void ModelParams::validate() const {
    std::ostringstream err;
    if (!(mu > 0.0 && mu < 1.0)) {
        err << "mu must lie in (0, 1), got " << mu;
    } else if (!(eps >= 0.0 && eps < 1.0)) {
        err << "eps must lie in [0, 1), got " << eps;
    } else if (!(omega_p > 0.0)) {
        err << "omega_p must be positive, got " << omega_p;
    } else if (kind == ModelKind::Pcrtbp && eps != 0.0) {
        err << "pcrtbp model requires eps = 0";
    } else if (kind == ModelKind::Pertbp && omega_p != 1.0) {
        err << "pertbp model has omega_p = 1 by construction";
    } else {
        return;
    }
    throw ConfigError(err.str());
}

double kepler_solve(double mean_anomaly, double eps) {
    const double pi = kTwoPi / 2.0;
    // Reduce to [-pi, pi); the solution shifts by the same multiple of 2π.
    const double wraps = std::floor((mean_anomaly + pi) / kTwoPi);
    const double M = mean_anomaly - wraps * kTwoPi;
    if (eps == 0.0) {
        return mean_anomaly;
    }

    double E = M + eps * std::sin(M);
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
        const double f = E - eps * std::sin(E) - M;
        const double df = 1.0 - eps * std::cos(E);
        const double step = f / df;
        E -= step;
        if (std::abs(step) <= 1e-16 * (1.0 + std::abs(E))) {
            converged = true;
            break;
        }
    }
    if (!converged || std::abs(E - eps * std::sin(E) - M) > 1e-14) {
        // E - M = eps sin E, so the root is bracketed by M -/+ eps.
        double lo = M - eps;
        double hi = M + eps;
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid - eps * std::sin(mid) - M > 0.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        E = 0.5 * (lo + hi);
    }
    return E + wraps * kTwoPi;
}

EllipticKinematics elliptic_kinematics(double t, double eps) {
    EllipticKinematics k;
    k.t = t;
    if (eps == 0.0) {
        k.E = t;
        return k;
    }
    // Unit semi-major axis and period 2π: mean anomaly equals t, periapse at t = 0.
    k.E = kepler_solve(t, eps);
    const double ecosE = eps * std::cos(k.E);
    k.rho = 1.0 - ecosE;
    k.n = std::sqrt(1.0 - eps * eps) / (k.rho * k.rho);
    return k;
}

PrimaryGeometry primary_geometry(double t, const ModelParams& params) {
    PrimaryGeometry g;
    g.gm1 = 1.0 - params.mu;
    g.gm2 = params.mu;
    if (params.kind == ModelKind::Pertbp && params.eps != 0.0) {
        const auto k = elliptic_kinematics(t, params.eps);
        g.n = k.n;
        g.x1 = -params.mu * k.rho;
        g.x2 = (1.0 - params.mu) * k.rho;
    } else {
        g.n = 1.0;
        g.x1 = -params.mu;
        g.x2 = 1.0 - params.mu;
    }
    return g;
}

namespace {

struct Distances {
    double dx1, dx2, r1, r2;
};

Distances distances(const State4& z, const PrimaryGeometry& g) {
    Distances d;
    d.dx1 = z[0] - g.x1;
    d.dx2 = z[0] - g.x2;
    d.r1 = std::sqrt(d.dx1 * d.dx1 + z[1] * z[1]);
    d.r2 = std::sqrt(d.dx2 * d.dx2 + z[1] * z[1]);
    if (d.r1 < kSingularityRadius || d.r2 < kSingularityRadius) {
        std::ostringstream err;
        err << "collision singularity at (x, y) = (" << z[0] << ", " << z[1] << ")";
        throw SingularityError(err.str());
    }
    return d;
}

} // namespace

State4 vector_field(const State4& z, double t, const ModelParams& params) {
    const auto g = primary_geometry(t, params);
    const auto d = distances(z, g);
    const double q1 = g.gm1 / (d.r1 * d.r1 * d.r1);
    const double q2 = g.gm2 / (d.r2 * d.r2 * d.r2);
    State4 f;
    f[0] = z[2] + g.n * z[1];
    f[1] = z[3] - g.n * z[0];
    f[2] = g.n * z[3] - q1 * d.dx1 - q2 * d.dx2;
    f[3] = -g.n * z[2] - (q1 + q2) * z[1];
    return f;
}

double hamiltonian(const State4& z, double t, const ModelParams& params) {
    const auto g = primary_geometry(t, params);
    const auto d = distances(z, g);
    return 0.5 * (z[2] * z[2] + z[3] * z[3]) + g.n * (z[2] * z[1] - z[3] * z[0]) - g.gm1 / d.r1
           - g.gm2 / d.r2;
}

Mat4 variational_field(const State4& z, double t, const ModelParams& params) {
    const auto g = primary_geometry(t, params);
    const auto d = distances(z, g);
    const double y = z[1];
    const double ir1_3 = 1.0 / (d.r1 * d.r1 * d.r1);
    const double ir2_3 = 1.0 / (d.r2 * d.r2 * d.r2);
    const double ir1_5 = ir1_3 / (d.r1 * d.r1);
    const double ir2_5 = ir2_3 / (d.r2 * d.r2);

    // Hessian of the gravitational potential gm1/r1 + gm2/r2.
    const double uxx = g.gm1 * (3.0 * d.dx1 * d.dx1 * ir1_5 - ir1_3) + g.gm2 * (3.0 * d.dx2 * d.dx2 * ir2_5 - ir2_3);
    const double uxy = 3.0 * y * (g.gm1 * d.dx1 * ir1_5 + g.gm2 * d.dx2 * ir2_5);
    const double uyy = g.gm1 * (3.0 * y * y * ir1_5 - ir1_3) + g.gm2 * (3.0 * y * y * ir2_5 - ir2_3);

    Mat4 a;
    a << 0.0, g.n, 1.0, 0.0,
        -g.n, 0.0, 0.0, 1.0,
        uxx, uxy, 0.0, g.n,
        uxy, uyy, -g.n, 0.0;
    return a;
}

} // namespace hcx
