#include "hcx/refine.hpp"

#include "hcx/log.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hcx {

namespace {

double wrap_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    return t;
}

double angle_distance(double a, double b) {
    const double d = wrap_angle(a - b);
    return std::min(d, kTwoPi - d);
}

// Signed map iterate count: W(θ, s) = F^k(W(θ - kω, λ^{-k} s)).
int signed_iterates(const FourierTaylorManifold& W, int m) {
    return W.kind == ManifoldKind::Unstable ? m : -m;
}

double condition_number(const Mat4& A) {
    const Eigen::JacobiSVD<Mat4> svd(A);
    const auto& sv = svd.singularValues();
    if (!(sv[3] > 0.0)) return std::numeric_limits<double>::infinity();
    return sv[0] / sv[3];
}

bool same_sign(double a, double b) { return (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0); }

} // namespace

ManifoldPoint eval_local(const FourierTaylorManifold& W, double theta, double s) {
    const PeriodicGrid col = W.eval_column(s);
    ManifoldPoint p;
    p.value = trig_interp(col, theta);
    p.d_theta = trig_interp(differentiate(col), theta);
    p.d_s = trig_interp(W.eval_column_ds(s), theta);
    return p;
}

int minimal_iterates(const FourierTaylorManifold& W, double s) {
    if (!(W.D > 0.0)) throw ConfigError("manifold has no fundamental domain (D <= 0)");
    const double q = W.kind == ManifoldKind::Unstable ? W.lambda : 1.0 / W.lambda;
    if (!(q > 1.0)) throw ConfigError("manifold multiplier does not expand along the layers");
    const double limit = W.D * (1.0 + 1e-12);
    int m = 0;
    double r = std::abs(s);
    while (r > limit) {
        r /= q;
        ++m;
        if (m > 10000) throw ConfigError("s is too far out to globalize");
    }
    return m;
}

ManifoldPoint eval_global(const GlobalManifold& G, double theta, double s, int m, bool partials) {
    const FourierTaylorManifold& W = *G.local;
    const int m_min = minimal_iterates(W, s);
    if (m < 0) m = m_min;
    if (m < m_min) {
        std::ostringstream err;
        err << m << " iterates do not reach the fundamental domain from s = " << s << " (need " << m_min << ")";
        throw ConfigError(err.str());
    }
    const int k = signed_iterates(W, m);
    const double shrink = std::pow(W.lambda, -k);
    const ManifoldPoint loc = eval_local(W, theta - k * W.omega, shrink * s);
    if (k == 0) return loc;

    const StrobeResult img = G.map->apply(loc.value, k, partials);
    if (!img.state.allFinite()) throw NumericalError("non-finite image while globalizing");
    ManifoldPoint p;
    p.m = m;
    p.value = img.state;
    if (partials) {
        p.d_theta = (*img.stm) * loc.d_theta;
        p.d_s = shrink * ((*img.stm) * loc.d_s);
    } else {
        p.d_theta.setConstant(std::numeric_limits<double>::quiet_NaN());
        p.d_s.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    return p;
}

ConnectionEval connection_function(const GlobalManifold& Wu, const GlobalManifold& Ws, const ConnectionParams& x,
                                   bool jacobian) {
    const ManifoldPoint u = eval_global(Wu, x[0], x[1], -1, jacobian);
    const ManifoldPoint s = eval_global(Ws, x[2], x[3], -1, jacobian);
    ConnectionEval e;
    e.f = u.value - s.value;
    e.m_u = u.m;
    e.m_s = s.m;
    if (jacobian) {
        e.Df.col(0) = u.d_theta;
        e.Df.col(1) = u.d_s;
        e.Df.col(2) = -s.d_theta;
        e.Df.col(3) = -s.d_s;
    } else {
        e.Df.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    return e;
}

const char* to_string(RefineStatus status) {
    switch (status) {
    case RefineStatus::Converged: return "converged";
    case RefineStatus::MaxIter: return "max_iter";
    case RefineStatus::Singular: return "singular";
    case RefineStatus::Failed: return "failed";
    }
    return "?";
}

void RefineSettings::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (!(tol > 0.0)) throw ConfigError("refinement tolerance must be positive");
    if (max_iter < 0) throw ConfigError("max_iter must be non-negative");
    if (!(max_condition > 1.0)) throw ConfigError("max_condition must exceed 1");
}

ConnectionSolution refine_connection(const GlobalManifold& Wu, const GlobalManifold& Ws, const ConnectionParams& guess,
                                     const RefineSettings& settings) {
    settings.validate();
    ConnectionSolution sol;
    ConnectionParams x = guess;
    x[0] = wrap_angle(x[0]);
    x[2] = wrap_angle(x[2]);
    sol.params = x;

    ConnectionEval cur;
    try {
        cur = connection_function(Wu, Ws, x, true);
    } catch (const NumericalError& e) {
        sol.status = RefineStatus::Failed;
        sol.message = std::string("guess could not be evaluated: ") + e.what();
        sol.residual_norm = std::numeric_limits<double>::infinity();
        return sol;
    }
    double r = cur.f.norm();
    sol.residual_history.push_back(r);

    auto finish = [&](RefineStatus status, std::string message) {
        sol.params = x;
        sol.residual_norm = r;
        sol.status = status;
        sol.message = std::move(message);
        sol.m_u = cur.m_u;
        sol.m_s = cur.m_s;
        sol.point = sol.residual_norm < std::numeric_limits<double>::infinity()
                        ? eval_global(Wu, x[0], x[1], -1, false).value
                        : State4::Constant(std::numeric_limits<double>::quiet_NaN());
        sol.tof = (cur.m_u + cur.m_s) * Wu.map->period();
        return sol;
    };

    if (r < settings.tol) {
        sol.condition_estimate = condition_number(cur.Df);
        return finish(RefineStatus::Converged, "");
    }

    double alpha = settings.alpha;
    int decreases = 0;
    for (int it = 1; it <= settings.max_iter; ++it) {
        sol.iterations = it;
        sol.condition_estimate = condition_number(cur.Df);
        if (!(sol.condition_estimate <= settings.max_condition)) {
            std::ostringstream msg;
            msg << "Df condition estimate " << sol.condition_estimate << " exceeds " << settings.max_condition;
            return finish(RefineStatus::Singular, msg.str());
        }
        const Eigen::ColPivHouseholderQR<Mat4> qr(cur.Df);
        const Eigen::Vector4d dx = qr.solve(-cur.f);

        // Halve until the step keeps both s on their half-layers.
        auto trial_at = [&](double a) {
            ConnectionParams t;
            for (int c = 0; c < 4; ++c) t[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)] + a * dx[c];
            return t;
        };
        ConnectionParams trial = trial_at(alpha);
        while (!(same_sign(trial[1], x[1]) && same_sign(trial[3], x[3])) && alpha > 1e-12) {
            alpha *= 0.5;
            trial = trial_at(alpha);
        }
        sol.alpha_history.push_back(alpha);
        trial[0] = wrap_angle(trial[0]);
        trial[2] = wrap_angle(trial[2]);

        bool accepted = false;
        ConnectionEval next;
        try {
            next = connection_function(Wu, Ws, trial, true);
            accepted = next.f.norm() <= r;
        } catch (const NumericalError&) {
            accepted = false;
        }
        if (!accepted) {
            alpha *= 0.5;
            decreases = 0;
            if (alpha < 1e-12) return finish(RefineStatus::MaxIter, "damping underflow: no step reduces the residual");
            continue;
        }
        x = trial;
        cur = next;
        r = cur.f.norm();
        sol.residual_history.push_back(r);
        if (r < settings.tol) {
            sol.condition_estimate = condition_number(cur.Df);
            return finish(RefineStatus::Converged, "");
        }
        if (++decreases == 2) {
            alpha = std::min(1.0, 1.5 * alpha);
            decreases = 0;
        }
    }
    std::ostringstream msg;
    msg << "no convergence in " << settings.max_iter << " iterations";
    return finish(RefineStatus::MaxIter, msg.str());
}

ConnectionParams guess_from_record(const IntersectionRecord& record) {
    return {record.theta_u, record.s_u, record.theta_s, record.s_s};
}

std::vector<ConnectionSolution> refine_all(const GlobalManifold& Wu, const GlobalManifold& Ws,
                                           const std::vector<ConnectionParams>& guesses,
                                           const RefineSettings& settings, Backend backend) {
    settings.validate();
    std::vector<ConnectionSolution> out(guesses.size());
    const auto n = static_cast<std::int64_t>(guesses.size());
    if (backend == Backend::Serial) {
        for (std::int64_t i = 0; i < n; ++i) out[i] = refine_connection(Wu, Ws, guesses[i], settings);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < n; ++i) out[i] = refine_connection(Wu, Ws, guesses[i], settings);
    }
    return out;
}

DedupSummary deduplicate(const std::vector<ConnectionSolution>& solutions, double tol) {
    DedupSummary d;
    d.total = solutions.size();
    d.representative.assign(solutions.size(), -1);
    for (std::size_t i = 0; i < solutions.size(); ++i) {
        const auto& s = solutions[i];
        if (s.status != RefineStatus::Converged) continue;
        ++d.converged;
        for (std::size_t u : d.unique) {
            const auto& p = solutions[u].params;
            const bool same = angle_distance(p[0], s.params[0]) <= tol && std::abs(p[1] - s.params[1]) <= tol &&
                              angle_distance(p[2], s.params[2]) <= tol && std::abs(p[3] - s.params[3]) <= tol;
            if (same) {
                d.representative[i] = static_cast<long>(u);
                break;
            }
        }
        if (d.representative[i] < 0) {
            d.representative[i] = static_cast<long>(i);
            d.unique.push_back(i);
        }
    }
    return d;
}

double verify_residual(const GlobalManifold& Wu, const GlobalManifold& Ws, const ConnectionParams& x, int extra) {
    const int mu = minimal_iterates(*Wu.local, x[1]) + extra;
    const int ms = minimal_iterates(*Ws.local, x[3]) + extra;
    const State4 u = eval_global(Wu, x[0], x[1], mu, false).value;
    const State4 s = eval_global(Ws, x[2], x[3], ms, false).value;
    return (u - s).norm();
}

double trajectory_realization_error(const GlobalManifold& Wu, const GlobalManifold& Ws,
                                    const ConnectionSolution& solution) {
    const auto& x = solution.params;
    const FourierTaylorManifold& U = *Wu.local;
    const FourierTaylorManifold& S = *Ws.local;
    const int mu = solution.m_u;
    const int ms = solution.m_s;
    const State4 start = eval_local(U, x[0] - mu * U.omega, std::pow(U.lambda, -mu) * x[1]).value;
    const State4 end = eval_local(S, x[2] + ms * S.omega, std::pow(S.lambda, ms) * x[3]).value;
    const State4 img = Wu.map->apply(start, mu + ms, false).state;
    return (img - end).norm();
}

} // namespace hcx
