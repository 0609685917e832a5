// Acceptance run: one verdict line per criterion, details indented below it.
// Exit status is nonzero if any criterion fails.

#include "oracles.hpp"
#include "support.hpp"

#include "hcx/log.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

using namespace hcx;
using namespace hcx::test;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

// Collects named checks for one criterion.
class Report {
public:
    void check(const std::string& what, bool ok, const std::string& detail = "") {
        pass_ = pass_ && ok;
        lines_.push_back(std::string(ok ? "ok    " : "FAIL  ") + what + (detail.empty() ? "" : ": " + detail));
    }
    void note(const std::string& text) { lines_.push_back("note  " + text); }
    bool pass() const { return pass_; }
    const std::vector<std::string>& lines() const { return lines_; }

private:
    bool pass_ = true;
    std::vector<std::string> lines_;
};

// ---------------------------------------------------------------------------
// Shared desk-case state, built lazily.

struct Desk {
    PipelineConfig cfg = desk_config();
    std::unique_ptr<InvariantCircle> c0, c1;
    std::unique_ptr<FourierTaylorManifold> wu, ws;
    std::unique_ptr<ManifoldMesh> mu, ms;

    const InvariantCircle& circle0() {
        if (!c0) c0 = std::make_unique<InvariantCircle>(desk_circle(0.0));
        return *c0;
    }
    const InvariantCircle& circle() {
        if (!c1) c1 = std::make_unique<InvariantCircle>(desk_circle(cfg.model.eps));
        return *c1;
    }
    void manifolds() {
        if (wu) return;
        wu = std::make_unique<FourierTaylorManifold>(manifold_from_circle(circle(), ManifoldKind::Unstable, cfg));
        ws = std::make_unique<FourierTaylorManifold>(manifold_from_circle(circle(), ManifoldKind::Stable, cfg));
    }
    void meshes() {
        manifolds();
        if (mu) return;
        mu = std::make_unique<ManifoldMesh>(globalize(*wu, cfg.k_half, cfg.n_max, cfg.flow));
        ms = std::make_unique<ManifoldMesh>(globalize(*ws, cfg.k_half, cfg.n_max, cfg.flow));
    }
};

Desk& desk() {
    static Desk d;
    return d;
}

fs::path work_dir() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "hcx_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// ---------------------------------------------------------------------------
// 1. Kepler and dynamics

void criterion_models(Report& r) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> M(-20.0, 20.0), E(0.0, 0.9);
    double kepler = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double m = M(rng), e = E(rng);
        const double ecc = kepler_solve(m, e);
        kepler = std::max(kepler, std::abs(ecc - e * std::sin(ecc) - m));
    }
    r.check("Kepler residual over 1e4 random inputs < 1e-13", kepler < 1e-13, sci(kepler));

    const double mu = desk().cfg.model.mu;
    const auto circ = ModelParams::pcrtbp(mu), ell0 = ModelParams::pertbp(mu, 0.0);
    const FlowSettings& fl = desk().cfg.flow;
    const io::Seed seed = io::read_seed(desk().cfg.seed_u);
    std::vector<State4> states{seed.state, State4(0.5, 0.3, -0.3, 0.6), State4(-0.8, 0.2, -0.1, -0.9),
                               State4(1.2, -0.4, 0.5, 1.0)};
    double field = 0.0, flows = 0.0, drift = 0.0;
    for (const State4& z : states) {
        for (double t : {0.0, 1.3, 4.0}) {
            field = std::max(field, (vector_field(z, t, circ) - vector_field(z, t, ell0)).cwiseAbs().maxCoeff());
        }
        const State4 a = flow(z, 0.0, circ.map_period(), circ, fl), b = flow(z, 0.0, ell0.map_period(), ell0, fl);
        flows = std::max(flows, (a - b).cwiseAbs().maxCoeff());
        drift = std::max(drift, std::abs(hamiltonian(a, 0.0, circ) - hamiltonian(z, 0.0, circ)));
    }
    r.check("eps = 0 elliptic model identical to the circular one", field == 0.0 && flows == 0.0,
            "field " + sci(field) + ", one-period flow " + sci(flows));
    r.check("H0 drift over one map period < 1e-10", drift < 1e-10, sci(drift));

    const auto ell = ModelParams::pertbp(mu, 0.05);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        std::uniform_real_distribution<double> u(-1.3, 1.3);
        State4 z(u(rng), u(rng), u(rng), u(rng));
        if (std::hypot(z[0] + mu, z[1]) < 0.1 || std::hypot(z[0] - 1 + mu, z[1]) < 0.1) continue;
        const double t = 0.3 * i;
        const Mat4 J = variational_field(z, t, ell);
        for (int c = 0; c < 4; ++c) {
            const double h = 1e-6;
            State4 a = z, b = z;
            a[c] += h;
            b[c] -= h;
            const State4 fd = (vector_field(a, t, ell) - vector_field(b, t, ell)) / (2 * h);
            worst = std::max(worst, (fd - J.col(c)).norm() / std::max(1.0, J.col(c).norm()));
        }
    }
    r.check("variational field vs finite differences, relative < 1e-6", worst < 1e-6, sci(worst));
    const double secs = seconds_since(t0);
    r.check("runtime < 60 s", secs < 60, sci(secs) + " s");
}

// ---------------------------------------------------------------------------
// 2. Spectral tools

void criterion_fourier(Report& r) {
    const int n = 64;
    std::mt19937_64 rng(202);
    std::normal_distribution<double> g;
    const int deg = n / 2 - 1;
    std::vector<double> a(deg + 1), b(deg + 1);
    for (int k = 0; k <= deg; ++k) {
        a[k] = g(rng);
        b[k] = g(rng);
    }
    auto f = [&](double t) {
        double v = 0;
        for (int k = 0; k <= deg; ++k) v += a[k] * std::cos(k * t) + b[k] * std::sin(k * t);
        return v;
    };
    auto df = [&](double t) {
        double v = 0;
        for (int k = 0; k <= deg; ++k) v += k * (-a[k] * std::sin(k * t) + b[k] * std::cos(k * t));
        return v;
    };
    auto grid = [&](auto fn, double off) {
        return PeriodicGrid::sample(n, 1, [&](double t) { return Eigen::VectorXd::Constant(1, fn(t + off)); });
    };
    const PeriodicGrid G = grid(f, 0.0);
    auto diff = [](const PeriodicGrid& x, const PeriodicGrid& y) {
        return (x.values() - y.values()).cwiseAbs().maxCoeff();
    };
    const double scale = G.values().cwiseAbs().maxCoeff();
    const double e_shift = diff(shift(G, 0.83), grid(f, 0.83)) / scale;
    const PeriodicGrid D = grid(df, 0.0);
    const double e_diff = diff(differentiate(G), D) / D.values().cwiseAbs().maxCoeff();
    double e_interp = 0.0;
    for (double t : {0.1, 1.7, 3.3, 5.9}) e_interp = std::max(e_interp, std::abs(trig_interp(G, t)[0] - f(t)) / scale);
    r.check("shift exact on band-limited data (relative < 1e-13)", e_shift < 1e-13, sci(e_shift));
    r.check("differentiate exact on band-limited data (relative < 1e-13)", e_diff < 1e-13, sci(e_diff));
    r.check("interpolate exact on band-limited data (relative < 1e-13)", e_interp < 1e-13, sci(e_interp));

    const double e_comp = diff(shift(shift(G, 0.4), 1.9), shift(G, 2.3)) / scale;
    const double e_period = diff(shift(G, kTwoPi), G) / scale;
    const double e_comm = diff(differentiate(shift(G, 1.1)), shift(differentiate(G), 1.1)) / scale;
    r.check("shift composition and 2pi periodicity (< 1e-12)", e_comp < 1e-12 && e_period < 1e-12,
            sci(e_comp) + ", " + sci(e_period));
    r.check("shift and differentiation commute (< 1e-12)", e_comm < 1e-12, sci(e_comm));
}

// ---------------------------------------------------------------------------
// 3. Invariant circles and bundles

void check_circle(Report& r, const std::string& label, const InvariantCircle& c, const FlowSettings& fl) {
    const double res = invariance_residual(c.K, c.omega, c.params, fl);
    r.check(label + ": invariance residual < 1e-9", res < 1e-9, sci(res));
    const BundleSet b = compute_bundles(c, fl);
    const MapSamples s = sample_map(c.K, c.params, fl, true);
    const double bres = bundle_residual(b, c.omega, s.jacobian);
    r.check(label + ": bundle residual < 1e-7", bres < 1e-7, sci(bres));
    const double prod = std::abs(b.lambda_s * b.lambda_u - 1.0);
    r.check(label + ": lambda_s < 1 < lambda_u, |lambda_s lambda_u - 1| < 1e-6",
            b.lambda_s < 1.0 && 1.0 < b.lambda_u && prod < 1e-6,
            "lambda_u " + sci(b.lambda_u) + ", product error " + sci(prod));
}

void criterion_torus(Report& r) {
    const auto t0 = Clock::now();
    Desk& d = desk();
    check_circle(r, "desk eps = 0 (N = 128)", d.circle0(), d.cfg.flow);
    check_circle(r, "desk eps = " + sci(d.cfg.model.eps) + " (N = 128)", d.circle(), d.cfg.flow);

    // Jupiter-Europa 3:4 circle at the published rotation number.
    const PipelineConfig je = load_config(data_dir() / "jupiter_europa.cfg");
    const InvariantCircle c = circle_from_seed(io::read_seed(je.seed_u), std::nullopt, je, je.n_u);
    const double domega = std::abs(c.omega - 1.559620297);
    r.check("Jupiter-Europa circle at omega = 1.559620297", domega < 1e-9, "|d omega| " + sci(domega));
    check_circle(r, "Jupiter-Europa eps = " + sci(je.model.eps) + " (N = " + std::to_string(je.n_u) + ")", c, je.flow);
    const double secs = seconds_since(t0);
    r.check("runtime < 10 min", secs < 600, sci(secs) + " s");
}

// ---------------------------------------------------------------------------
// 4. Manifolds and globalization

void criterion_manifold(Report& r) {
    const auto t0 = Clock::now();
    Desk& d = desk();
    d.meshes();
    for (const FourierTaylorManifold* W : {d.wu.get(), d.ws.get()}) {
        const std::string k = to_string(W->kind);
        const double top = *std::max_element(W->order_residuals.begin(), W->order_residuals.end());
        r.check(k + ": order residuals < 1e-9 up to order " + std::to_string(W->order()),
                top < 1e-9 && W->order() >= 10, sci(top));
        const double at_d = conjugacy_residual(*W, W->D, d.cfg.flow);
        const double beyond = conjugacy_residual(*W, 1.5 * W->D, d.cfg.flow);
        r.check(k + ": fundamental domain certificate at E_tol = " + sci(d.cfg.e_tol),
                at_d <= d.cfg.e_tol && beyond > d.cfg.e_tol,
                "D " + sci(W->D) + ", res(D) " + sci(at_d) + ", res(1.5D) " + sci(beyond));
        const PeriodicGrid X = order_two_oracle(*W, d.cfg.flow);
        const double e2 = (X.values() - W->coeffs[2].values()).cwiseAbs().maxCoeff() /
                          W->coeffs[2].values().cwiseAbs().maxCoeff();
        r.check(k + ": order-2 coefficient vs dense finite-difference solve (relative < 1e-6)", e2 < 1e-6, sci(e2));
    }
    for (const ManifoldMesh* mesh : {d.mu.get(), d.ms.get()}) {
        const bool unstable = mesh->kind == ManifoldKind::Unstable;
        const FourierTaylorManifold& W = unstable ? *d.wu : *d.ws;
        const double q = unstable ? W.lambda : 1.0 / W.lambda;
        const int dir = unstable ? 1 : -1;
        double worst = 0.0;
        int checked = 0;
        for (Eigen::Index k = 0; k < mesh->cols(); ++k) {
            const double s = mesh->s_values[static_cast<std::size_t>(k)];
            int m = 0;
            double sf = s;
            while (m <= d.cfg.n_max &&
                   std::abs(std::round(sf / W.D * d.cfg.k_half) * W.D / d.cfg.k_half - sf) > 1e-12 * W.D) {
                sf /= q;
                ++m;
            }
            if (m > d.cfg.n_max || s == 0.0) continue;
            for (Eigen::Index i = k % 11; i < mesh->rows(); i += 11) {
                const double theta = kTwoPi * static_cast<double>(i) / static_cast<double>(mesh->rows());
                const State4 z0 = W.eval(theta - dir * m * W.omega, sf);
                const State4 z = m == 0 ? z0 : strobe_map(z0, dir * m, W.params, d.cfg.flow).state;
                worst = std::max(worst, (z - mesh->point(i, k)).cwiseAbs().maxCoeff());
                ++checked;
            }
        }
        r.check(std::string(to_string(mesh->kind)) + ": mesh vs direct F^n re-propagation < 1e-8 (" +
                    std::to_string(checked) + " nodes, n_max " + std::to_string(mesh->n_max) + ")",
                worst < 1e-8 && checked > 100, sci(worst));
    }
    const double secs = seconds_since(t0);
    r.check("runtime < 15 min at N = 128, n_max = 6", secs < 900 && d.cfg.n_u == 128 && d.cfg.n_max == 6,
            sci(secs) + " s");
}

// ---------------------------------------------------------------------------
// 5. Layers

void criterion_layers(Report& r) {
    for (auto [n_max, count] : {std::pair{1, 4}, {2, 12}, {5, 36}}) {
        ManifoldMesh u, s;
        u.kind = ManifoldKind::Unstable;
        s.kind = ManifoldKind::Stable;
        u.n_max = s.n_max = static_cast<std::uint32_t>(n_max);
        const auto plan = enumerate_layer_pairs(u, s, n_max, 1.0);
        r.check("n_max = " + std::to_string(n_max) + " gives " + std::to_string(count) + " tasks",
                plan.tasks.size() == static_cast<std::size_t>(count), std::to_string(plan.tasks.size()));
    }
    Desk& d = desk();
    d.meshes();
    const double op = d.circle().params.omega_p;
    const auto plan = enumerate_layer_pairs(*d.mu, *d.ms, d.cfg.n_max, op);
    bool tof = true;
    for (const auto& t : plan.tasks) tof = tof && t.tof == kTwoPi * (t.n_u + t.n_s) / op;
    r.check("TOF annotation equals 2pi(n1 + n2)/Omega_p on the desk plan", tof);

    const FlowMap map(d.circle().params, d.cfg.flow);
    double worst = 0.0;
    int checked = 0;
    for (const ManifoldMesh* mesh : {d.mu.get(), d.ms.get()}) {
        const bool unstable = mesh->kind == ManifoldKind::Unstable;
        const FourierTaylorManifold& W = unstable ? *d.wu : *d.ws;
        const GlobalManifold G{&W, &map};
        const double q = unstable ? W.lambda : 1.0 / W.lambda;
        const int dir = unstable ? 1 : -1;
        for (int n = 1; n < d.cfg.n_max; ++n) {
            for (LayerSign sign : {LayerSign::Plus, LayerSign::Minus}) {
                const HalfLayer h = half_layer(*mesh, n, sign);
                for (std::uint32_t k = h.first; k <= h.last; k += 4) {
                    const double s = mesh->s_values[k];
                    int m = 0;
                    double sf = s;
                    while (std::abs(std::round(sf / W.D * d.cfg.k_half) * W.D / d.cfg.k_half - sf) > 1e-12 * W.D) {
                        sf /= q;
                        ++m;
                    }
                    for (Eigen::Index i = k % 23; i < mesh->rows(); i += 23) {
                        const double theta = kTwoPi * static_cast<double>(i) / static_cast<double>(mesh->rows());
                        const State4 img = map.apply(mesh->point(i, k), dir, false).state;
                        const State4 expect = eval_global(G, theta + dir * W.omega, q * s, m + 1, false).value;
                        worst = std::max(worst, (img - expect).cwiseAbs().maxCoeff());
                        ++checked;
                    }
                }
            }
        }
    }
    r.check("layer mapping (theta, s) -> (theta + omega, lambda s) at parameter level < 1e-8 (" +
                std::to_string(checked) + " nodes)",
            worst < 1e-8, sci(worst));
}

// ---------------------------------------------------------------------------
// 6. Intersection search

std::string records_text(const std::vector<IntersectionRecord>& recs, const std::string& name) {
    const fs::path p = work_dir() / (name + ".txt");
    io::write_records(p, recs);
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_isect(Report& r) {
    const auto t0 = Clock::now();
    const LayerTask task{1, LayerSign::Plus, 1, LayerSign::Plus, 2 * kTwoPi};
    std::mt19937_64 rng(606);
    int cases = 0, equal = 0, identical = 0;
    std::size_t hits = 0;
    auto run_case = [&](const ManifoldMesh& mu, const ManifoldMesh& ms) {
        const auto oracle = brute_force(HalfLayerPair(whole(mu), whole(ms)));
        const auto serial = find_intersections(whole(mu), whole(ms), task, Backend::Serial);
        const auto parallel = find_intersections(whole(mu), whole(ms), task, Backend::Parallel);
        ++cases;
        equal += same_set(oracle, serial) && same_set(oracle, parallel);
        identical += records_text(serial, "serial") == records_text(parallel, "parallel");
        hits += oracle.size();
    };
    for (int trial = 0; trial < 40; ++trial) {
        const int n1 = 8 + static_cast<int>(rng() % 25), n2 = 8 + static_cast<int>(rng() % 25);
        const int m1 = 3 + static_cast<int>(rng() % 7), m2 = 3 + static_cast<int>(rng() % 7);
        const auto fu = random_surface(rng, 1.0), fs = random_surface(rng, 1.1);
        run_case(make_mesh(ManifoldKind::Unstable, n1, m1, 0.0, 1.0, fu),
                 make_mesh(ManifoldKind::Stable, n2, m2, 0.0, 1.0, fs));
    }
    for (int trial = 0; trial < 3; ++trial) {
        const auto fu = random_surface(rng, 1.0), fs = random_surface(rng, 1.05);
        run_case(make_mesh(ManifoldKind::Unstable, 32, 9, 0.0, 1.0, fu),
                 make_mesh(ManifoldKind::Stable, 32, 9, 0.0, 1.0, fs));
    }
    // Adversarial: flat sheets crossing on vertices, edges and cell centres.
    const auto flat = [](double t, double s) { return State4(t, s, 0.0, 0.0); };
    const ManifoldMesh sheet = make_mesh(ManifoldKind::Unstable, 32, 9, 0.0, 1.0, flat);
    for (const auto& [x0, y0] : {std::pair{kTwoPi * 3 / 32, 0.5}, {kTwoPi * 3.5 / 32, 0.25},
                                 {kTwoPi * 7.5 / 32, 0.5625}, {0.0, 0.0}}) {
        run_case(sheet, make_mesh(ManifoldKind::Stable, 32, 9, 0.0, 1.0, [x0 = x0, y0 = y0](double t, double s) {
                     return State4(x0, y0, t - kTwoPi / 2, s - 0.5);
                 }));
    }
    // Adversarial: shared columns, zero-width quads, NaN nodes.
    {
        const auto fu = random_surface(rng, 1.0);
        ManifoldMesh mu = make_mesh(ManifoldKind::Unstable, 32, 9, 0.0, 1.0, fu);
        ManifoldMesh ms = make_mesh(ManifoldKind::Stable, 32, 9, 0.0, 1.0, [&](double t, double s) {
            State4 z = fu(t, s);
            z[3] += 0.4 * (s - 0.5) * std::cos(t);
            return z;
        });
        for (int c = 0; c < 4; ++c) {
            ms.coords[c].col(3) = mu.coords[c].col(3);
            mu.coords[c].col(6) = mu.coords[c].col(5);
            ms.coords[c](7, 5) = std::numeric_limits<double>::quiet_NaN();
        }
        run_case(mu, ms);
    }
    r.check("pipeline record set equals the brute-force oracle (" + std::to_string(cases) + " mesh pairs up to " +
                "(32,32,9,9), " + std::to_string(hits) + " hits)",
            equal == cases && hits > 20, std::to_string(equal) + "/" + std::to_string(cases));
    r.check("serial and parallel records byte-identical", identical == cases,
            std::to_string(identical) + "/" + std::to_string(cases));

    long violations = 0, sound_hits = 0;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto vec = [&] { return State4(u(rng), u(rng), u(rng), u(rng)); };
    for (long n = 0; n < 1'000'000; ++n) {
        const double scale = std::pow(10.0, 4 * u(rng));
        const State4 base = vec() * scale, pb = base + 0.3 * vec() * scale;
        const State4 ea = vec(), fa = vec(), eb = vec(), fb = vec();
        const double warp = (n % 4 == 0) ? 0.0 : 0.1;
        const double corners[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
        Quad4 a, b;
        for (int v = 0; v < 4; ++v) {
            a.v[v] = base + scale * (corners[v][0] * ea + corners[v][1] * fa + warp * u(rng) * vec());
            b.v[v] = pb + scale * (corners[v][0] * eb + corners[v][1] * fb + warp * u(rng) * vec());
        }
        if (n % 10 == 5) b.v[0] = a.v[2];
        if (n % 10 == 7) b.v[1] = a.v[0] + 0.5 * (a.v[1] - a.v[0]);
        bool hit = false;
        for (int tu = 0; tu < 2; ++tu) {
            for (int ts = 0; ts < 2; ++ts) {
                hit |= precise_triangle_intersection(quad_triangle(a, tu), quad_triangle(b, ts)).status ==
                       PreciseStatus::Hit;
            }
        }
        if (!hit) continue;
        ++sound_hits;
        violations += aabb_reject(a, b) || moller_reject(a, b);
    }
    r.check("rejection soundness over 1e6 random pairs (" + std::to_string(sound_hits) + " with hits)",
            violations == 0, std::to_string(violations) + " violations");

    const PairDims big{1024, 2048, 35, 35};
    r.check("pair counts for (1024,2048,35,35)",
            big.quad_pairs() == 2'424'307'712ULL && big.triangle_pairs() == 9'697'230'848ULL,
            std::to_string(big.quad_pairs()) + " quad pairs, " + std::to_string(big.triangle_pairs()) +
                " triangle pairs");

    // Backend scaling on ~1e8 pair evaluations.
    const auto fu = random_surface(rng, 1.0), fs = random_surface(rng, 1.1);
    const ManifoldMesh mu = make_mesh(ManifoldKind::Unstable, 512, 21, 0.0, 1.0, fu);
    const ManifoldMesh ms = make_mesh(ManifoldKind::Stable, 512, 21, 0.0, 1.0, fs);
    const HalfLayerPair pair(whole(mu), whole(ms));
    auto time_backend = [&](Backend b, std::vector<std::uint64_t>& out) {
        const auto t = Clock::now();
        out = pair_candidates(pair, b);
        return seconds_since(t);
    };
    std::vector<std::uint64_t> gs, gp;
    const double ts = time_backend(Backend::Serial, gs);
    const double tp = time_backend(Backend::Parallel, gp);
    const unsigned threads = std::max(std::thread::hardware_concurrency(), static_cast<unsigned>(omp_get_max_threads()));
    const std::string detail = std::to_string(pair.dims().quad_pairs()) + " pairs, serial " + sci(ts) +
                               " s, parallel " + sci(tp) + " s, speedup " + sci(ts / tp) + ", " +
                               std::to_string(threads) + " hardware threads";
    r.check("backends agree on the 1e8-pair candidate list", gs == gp);
    if (threads >= 8) {
        r.check("parallel backend >= 5x faster than serial", ts / tp >= 5.0, detail);
    } else {
        r.note("speedup requirement applies only with >= 8 hardware threads; not applicable here (" + detail + ")");
    }
    const double secs = seconds_since(t0);
    r.check("runtime < 20 min", secs < 1200, sci(secs) + " s");
}

// ---------------------------------------------------------------------------
// 7. Refinement

struct PipelineRun {
    fs::path dir;
    RunManifest manifest;
    double seconds = 0.0;
};

PipelineRun run_case(const PipelineConfig& cfg, const std::string& name) {
    PipelineRun run;
    run.dir = work_dir() / name;
    const auto t0 = Clock::now();
    run.manifest = run_pipeline(cfg, run.dir);
    run.seconds = seconds_since(t0);
    return run;
}

void criterion_refine(Report& r) {
    const auto t0 = Clock::now();
    {
        const Synthetic sy;
        const auto Gu = sy.u.global(), Gs = sy.s.global();
        std::mt19937_64 rng(707);
        std::uniform_real_distribution<double> off(-1e-2, 1e-2);
        RefineSettings rs;
        rs.tol = 1e-13;
        double worst = 0.0;
        bool all = true;
        for (int trial = 0; trial < 20; ++trial) {
            ConnectionParams guess = sy.target;
            for (auto& g : guess) g += off(rng);
            const auto sol = refine_connection(Gu, Gs, guess, rs);
            all = all && sol.status == RefineStatus::Converged;
            worst = std::max(worst, param_error(sol.params, sy.target));
        }
        r.check("synthetic affine problem: 20 guesses offset by up to 1e-2 reach the analytic intersection < 1e-10",
                all && worst < 1e-10, sci(worst));
    }

    Desk& d = desk();
    d.manifolds();
    const FlowMap map(d.circle().params, d.cfg.flow);
    const GlobalManifold Gu{d.wu.get(), &map}, Gs{d.ws.get(), &map};
    {
        const ConnectionParams x{0.8, 3.0 * d.wu->D, 2.1, -2.0 * d.ws->D};
        const ConnectionEval e = connection_function(Gu, Gs, x, true);
        double worst = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            const double h = 1e-6;
            ConnectionParams xa = x, xb = x;
            xa[c] += h;
            xb[c] -= h;
            const State4 fd = (connection_function(Gu, Gs, xa, false).f - connection_function(Gu, Gs, xb, false).f) / (2 * h);
            worst = std::max(worst, (fd - e.Df.col(static_cast<Eigen::Index>(c))).norm() / fd.norm());
        }
        r.check("desk connection Jacobian vs central differences (relative < 1e-5)", worst < 1e-5, sci(worst));
    }

    // Full pipeline on the finer desk mesh; see data/desk_refine.cfg.
    const PipelineConfig fine = load_config(data_dir() / "desk_refine.cfg");
    const PipelineRun run = run_case(fine, "desk_refine");
    const FlowMap fine_map(d.circle().params, fine.flow);
    const auto records = io::read_records(run.dir / files::records, d.circle().params.omega_p);
    const auto sols = io::read_solutions(run.dir / files::solutions);
    const FourierTaylorManifold wu = io::read_manifold(run.dir / files::manifold_u);
    const FourierTaylorManifold ws = io::read_manifold(run.dir / files::manifold_s);
    const GlobalManifold Ru{&wu, &fine_map}, Rs{&ws, &fine_map};
    const DedupSummary dd = run.manifest.dedup;
    r.note("desk pipeline (mu " + sci(fine.model.mu) + ", eps " + sci(fine.model.eps) + ", N " +
           std::to_string(fine.n_u) + ", k_half " + std::to_string(fine.k_half) + ", n_max " +
           std::to_string(fine.n_max) + "): " + std::to_string(records.size()) + " mesh hits, " +
           std::to_string(dd.converged) + " converged, " + std::to_string(dd.unique.size()) + " unique, " +
           sci(run.seconds) + " s");

    std::vector<double> initial, final_res;
    std::size_t not_converged = 0;
    for (std::size_t i = 0; i < sols.size() && i < records.size(); ++i) {
        const double r0 = connection_function(Ru, Rs, guess_from_record(records[i]), false).f.norm();
        if (sols[i].status != RefineStatus::Converged) {
            ++not_converged;
            continue;
        }
        initial.push_back(r0);
        final_res.push_back(sols[i].residual_norm);
    }
    std::sort(initial.begin(), initial.end());
    const double median0 = initial.empty() ? NAN : initial[initial.size() / 2];
    const double worst_final = final_res.empty() ? NAN : *std::max_element(final_res.begin(), final_res.end());
    r.check("desk refinement: mesh-hit residual O(1e-2) driven below 1e-7",
            !initial.empty() && median0 >= 1e-3 && median0 < 1e-1 && worst_final < 1e-7,
            std::to_string(initial.size()) + " converged guesses, initial residual median " + sci(median0) +
                " (range " + (initial.empty() ? "-" : sci(initial.front()) + " .. " + sci(initial.back())) +
                "), final max " + sci(worst_final));
    if (not_converged > 0) {
        r.note(std::to_string(not_converged) + " of " + std::to_string(sols.size()) +
               " guesses stopped without convergence and are reported as such in solutions.txt");
    }

    double traj = 0.0, verify = 0.0;
    for (std::size_t u : dd.unique) {
        traj = std::max(traj, trajectory_realization_error(Ru, Rs, sols[u]));
        verify = std::max(verify, verify_residual(Ru, Rs, sols[u].params));
    }
    r.check("trajectory realization of every unique connection < 1e-6", !dd.unique.empty() && traj < 1e-6,
            sci(traj) + " over " + std::to_string(dd.unique.size()) + " connections");
    r.note("residual through one extra map iterate per side: " + sci(verify));

    std::size_t largest = 0;
    for (std::size_t u : dd.unique) {
        largest = std::max<std::size_t>(largest, static_cast<std::size_t>(
                                                     std::count(dd.representative.begin(), dd.representative.end(),
                                                                static_cast<long>(u))));
    }
    r.check("duplicate guesses deduplicate to one solution", dd.converged > dd.unique.size() && largest >= 2,
            "largest group " + std::to_string(largest) + " guesses");
    const double secs = seconds_since(t0);
    r.check("runtime < 10 min", secs < 600, sci(secs) + " s");
}

// ---------------------------------------------------------------------------
// 8. Determinism

void criterion_determinism(Report& r) {
    const PipelineRun a = run_case(desk().cfg, "desk_a");
    const PipelineRun b = run_case(desk().cfg, "desk_b");
    std::size_t files_checked = 0, same = 0;
    for (const auto& st : a.manifest.stages) {
        for (const auto& [file, hash] : st.outputs) {
            ++files_checked;
            same += hash == io::sha256_file(b.dir / file);
        }
    }
    r.check("repeated desk pipeline runs hash-identical", files_checked > 0 && same == files_checked,
            std::to_string(same) + "/" + std::to_string(files_checked) + " stage outputs");
    r.check("manifests identical apart from timings", a.manifest.to_json(false) == b.manifest.to_json(false));
}

} // namespace

int main() {
    log::set_level(log::Level::Error);
    const std::vector<std::pair<std::string, std::function<void(Report&)>>> criteria{
        {"Kepler and dynamics", criterion_models},
        {"spectral tools", criterion_fourier},
        {"invariant circles and bundles", criterion_torus},
        {"manifolds and globalization", criterion_manifold},
        {"layers", criterion_layers},
        {"intersection search", criterion_isect},
        {"refinement", criterion_refine},
        {"end-to-end determinism", criterion_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Report rep;
        const auto t0 = Clock::now();
        try {
            criteria[i].second(rep);
        } catch (const std::exception& e) {
            rep.check("unexpected exception", false, e.what());
        }
        std::cout << (rep.pass() ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": " << criteria[i].first << " ("
                  << sci(seconds_since(t0)) << " s)\n";
        for (const auto& l : rep.lines()) std::cout << "      " << l << '\n';
        std::cout.flush();
        failed += !rep.pass();
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
    return failed == 0 ? 0 : 1;
}
