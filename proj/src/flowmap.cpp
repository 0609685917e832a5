#include "hcx/flowmap.hpp"

#include "series.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

namespace hcx {

namespace odeint = boost::numeric::odeint;

void FlowSettings::validate() const {
    if (!(abs_tol > 0.0 && abs_tol <= 1e-3) || !(rel_tol > 0.0 && rel_tol <= 1e-3)) {
        std::ostringstream err;
        err << "integrator tolerances must lie in (0, 1e-3], got abs_tol=" << abs_tol << " rel_tol=" << rel_tol;
        throw ConfigError(err.str());
    }
    if (max_step < 0.0) {
        throw ConfigError("max_step must be non-negative");
    }
}

namespace {

// Adaptive Fehlberg 7(8) loop. Lands exactly on tf; throws on step-size
// underflow or step budget exhaustion.
template <class State, class System>
void integrate(System sys, State& x, double t0, double tf, const FlowSettings& settings) {
    if (t0 == tf) {
        return;
    }
    using Stepper = odeint::runge_kutta_fehlberg78<State>;
    auto stepper = odeint::make_controlled<Stepper>(settings.abs_tol, settings.rel_tol);

    const double dir = tf > t0 ? 1.0 : -1.0;
    double t = t0;
    double dt = dir * std::min(std::abs(tf - t0), 1e-2);
    long accepted = 0;
    long attempts = 0;
    while (true) {
        if (settings.max_step > 0.0 && std::abs(dt) > settings.max_step) {
            dt = dir * settings.max_step;
        }
        const bool last = dir * (t + dt - tf) >= 0.0;
        if (last) {
            dt = tf - t;
        }
        const auto result = stepper.try_step(sys, x, t, dt);
        ++attempts;
        if (result == odeint::success) {
            ++accepted;
            if (last) {
                return;
            }
        }
        if (std::abs(dt) < 1e-14 * std::max(1.0, std::abs(t))) {
            std::ostringstream err;
            err << "step size underflow at t = " << t;
            throw NumericalError(err.str());
        }
        if (accepted > settings.max_steps || attempts > 4 * settings.max_steps) {
            std::ostringstream err;
            err << "integration step budget exhausted at t = " << t;
            throw NumericalError(err.str());
        }
    }
}

using Plain = std::array<double, 4>;
using WithStm = std::array<double, 20>;

State4 to_state(const double* p) { return State4(p[0], p[1], p[2], p[3]); }

struct PlainSystem {
    const ModelParams* params;
    void operator()(const Plain& x, Plain& dxdt, double t) const {
        const State4 f = vector_field(to_state(x.data()), t, *params);
        for (int i = 0; i < 4; ++i) dxdt[i] = f[i];
    }
};

struct StmSystem {
    const ModelParams* params;
    void operator()(const WithStm& x, WithStm& dxdt, double t) const {
        const State4 z = to_state(x.data());
        const State4 f = vector_field(z, t, *params);
        const Mat4 a = variational_field(z, t, *params);
        for (int i = 0; i < 4; ++i) dxdt[i] = f[i];
        Eigen::Map<const Mat4> phi(x.data() + 4);
        Eigen::Map<Mat4> dphi(dxdt.data() + 4);
        dphi.noalias() = a * phi;
    }
};

// Scratch buffers for the series right-hand side; held by pointer since
// odeint copies the system functor on every step.
struct JetWorkspace {
    std::size_t deg = 0;
    std::vector<double> dx1, dx2, y2, r1sq, r2sq, q1, q2, tmp;
    explicit JetWorkspace(std::size_t d) : deg(d) {
        for (auto* v : {&dx1, &dx2, &y2, &r1sq, &r2sq, &q1, &q2, &tmp}) v->assign(d + 1, 0.0);
    }
};

struct JetSystem {
    const ModelParams* params;
    JetWorkspace* ws;
    void operator()(const std::vector<double>& z, std::vector<double>& dz, double t) const {
        const std::size_t d = ws->deg;
        const std::size_t len = d + 1;
        const double* x = z.data();
        const double* y = x + len;
        const double* px = y + len;
        const double* py = px + len;
        double* fx = dz.data();
        double* fy = fx + len;
        double* fpx = fy + len;
        double* fpy = fpx + len;

        const auto g = primary_geometry(t, *params);
        for (std::size_t k = 0; k < len; ++k) {
            ws->dx1[k] = x[k];
            ws->dx2[k] = x[k];
        }
        ws->dx1[0] -= g.x1;
        ws->dx2[0] -= g.x2;

        series::mul(y, y, ws->y2.data(), d);
        series::mul(ws->dx1.data(), ws->dx1.data(), ws->r1sq.data(), d);
        series::mul(ws->dx2.data(), ws->dx2.data(), ws->r2sq.data(), d);
        for (std::size_t k = 0; k < len; ++k) {
            ws->r1sq[k] += ws->y2[k];
            ws->r2sq[k] += ws->y2[k];
        }
        const double guard = kSingularityRadius * kSingularityRadius;
        if (ws->r1sq[0] < guard || ws->r2sq[0] < guard) {
            throw SingularityError("collision singularity during jet transport");
        }
        series::pow(ws->r1sq.data(), -1.5, ws->q1.data(), d);
        series::pow(ws->r2sq.data(), -1.5, ws->q2.data(), d);

        for (std::size_t k = 0; k < len; ++k) {
            fx[k] = px[k] + g.n * y[k];
            fy[k] = py[k] - g.n * x[k];
            fpx[k] = g.n * py[k];
            fpy[k] = -g.n * px[k];
        }
        series::mul(ws->dx1.data(), ws->q1.data(), ws->tmp.data(), d);
        for (std::size_t k = 0; k < len; ++k) fpx[k] -= g.gm1 * ws->tmp[k];
        series::mul(ws->dx2.data(), ws->q2.data(), ws->tmp.data(), d);
        for (std::size_t k = 0; k < len; ++k) fpx[k] -= g.gm2 * ws->tmp[k];
        for (std::size_t k = 0; k < len; ++k) ws->tmp[k] = g.gm1 * ws->q1[k] + g.gm2 * ws->q2[k];
        series::mul(y, ws->tmp.data(), fpy + 0, d);
        // fpy currently holds y*(gm1 q1 + gm2 q2); combine with the rotation term.
        for (std::size_t k = 0; k < len; ++k) fpy[k] = -g.n * px[k] - fpy[k];
    }
};

} // namespace

State4 flow(const State4& z, double t0, double tf, const ModelParams& params, const FlowSettings& settings) {
    Plain x{z[0], z[1], z[2], z[3]};
    integrate(PlainSystem{&params}, x, t0, tf, settings);
    return to_state(x.data());
}

std::pair<State4, Mat4> flow_with_stm(const State4& z, double t0, double tf, const ModelParams& params,
                                      const FlowSettings& settings) {
    WithStm x{};
    for (int i = 0; i < 4; ++i) x[i] = z[i];
    Eigen::Map<Mat4>(x.data() + 4).setIdentity();
    integrate(StmSystem{&params}, x, t0, tf, settings);
    return {to_state(x.data()), Eigen::Map<const Mat4>(x.data() + 4)};
}

StrobeResult strobe_map(const State4& z, int k, const ModelParams& params, const FlowSettings& settings,
                        bool with_stm) {
    const double tf = k * params.map_period();
    if (with_stm) {
        auto [state, stm] = flow_with_stm(z, 0.0, tf, params, settings);
        return {state, stm};
    }
    return {flow(z, 0.0, tf, params, settings), std::nullopt};
}

Jet4 flow_jet(const Jet4& jet, double t0, double tf, const ModelParams& params, const FlowSettings& settings) {
    const auto cols = static_cast<std::size_t>(jet.cols());
    if (cols == 0) {
        throw NumericalError("empty jet");
    }
    const std::size_t deg = cols - 1;
    std::vector<double> x(4 * cols);
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t k = 0; k < cols; ++k) x[c * cols + k] = jet(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
    }
    JetWorkspace ws(deg);
    integrate(JetSystem{&params, &ws}, x, t0, tf, settings);
    Jet4 out(4, jet.cols());
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t k = 0; k < cols; ++k) out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) = x[c * cols + k];
    }
    return out;
}

Jet4 strobe_map_jet(const Jet4& jet, int k, const ModelParams& params, const FlowSettings& settings) {
    return flow_jet(jet, 0.0, k * params.map_period(), params, settings);
}

} // namespace hcx
