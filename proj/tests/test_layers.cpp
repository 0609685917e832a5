#include "support.hpp"

#include "hcx/layers.hpp"
#include "hcx/refine.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <tuple>

using namespace hcx;

namespace {

ManifoldMesh stub_mesh(ManifoldKind kind, int n_max) {
    ManifoldMesh m;
    m.kind = kind;
    m.n_max = static_cast<std::uint32_t>(n_max);
    return m;
}

struct Fixture {
    PipelineConfig cfg = test::desk_config();
    InvariantCircle circle = test::desk_circle(0.001);
    FourierTaylorManifold wu = manifold_from_circle(circle, ManifoldKind::Unstable, cfg);
    FourierTaylorManifold ws = manifold_from_circle(circle, ManifoldKind::Stable, cfg);
    ManifoldMesh mu = globalize(wu, cfg.k_half, 4, cfg.flow);
    ManifoldMesh ms = globalize(ws, cfg.k_half, 4, cfg.flow);
};

const Fixture& fx() {
    static const Fixture f;
    return f;
}

} // namespace

TEST_CASE("enumeration counts and time of flight") {
    const double omega_p = 1.0;
    for (auto [n_max, count] : {std::pair{1, 4}, {2, 12}, {5, 36}}) {
        const auto u = stub_mesh(ManifoldKind::Unstable, n_max), s = stub_mesh(ManifoldKind::Stable, n_max);
        const LayerPairPlan plan = enumerate_layer_pairs(u, s, n_max, omega_p);
        CHECK(plan.tasks.size() == static_cast<std::size_t>(count));
        std::set<std::tuple<int, char, int, char>> seen;
        for (const auto& t : plan.tasks) {
            CHECK((t.n_s == t.n_u || t.n_s == t.n_u - 1));
            CHECK(t.n_u >= 1);
            CHECK(t.n_s >= 1);
            CHECK(t.tof == kTwoPi * (t.n_u + t.n_s) / omega_p);
            seen.insert({t.n_u, to_char(t.sign_u), t.n_s, to_char(t.sign_s)});
        }
        CHECK(seen.size() == plan.tasks.size());
    }
    // With the core halves: (U_0,S_0) and (U_1,S_0) join the plan.
    const auto u = stub_mesh(ManifoldKind::Unstable, 2), s = stub_mesh(ManifoldKind::Stable, 2);
    const auto core = enumerate_layer_pairs(u, s, 2, 1.0, true);
    CHECK(core.tasks.size() == 20);
    CHECK(core.tasks.front().n_u == 0);
    CHECK(core.tasks.front().tof == 0.0);

    const double op = fx().circle.params.omega_p;
    CHECK(layer_time_of_flight(3, 2, op) == doctest::Approx(5 * fx().circle.params.map_period()).epsilon(1e-15));
}

TEST_CASE("enumeration argument checks") {
    const auto u = stub_mesh(ManifoldKind::Unstable, 2), s = stub_mesh(ManifoldKind::Stable, 2);
    CHECK_THROWS_AS(enumerate_layer_pairs(s, u, 2, 1.0), ConfigError);
    CHECK_THROWS_AS(enumerate_layer_pairs(u, s, 3, 1.0), ConfigError);
    CHECK_THROWS_AS(enumerate_layer_pairs(u, s, -1, 1.0), ConfigError);
    CHECK_THROWS_AS(enumerate_layer_pairs(u, s, 2, 0.0), ConfigError);
    CHECK(parse_layer_sign('+') == LayerSign::Plus);
    CHECK(parse_layer_sign('-') == LayerSign::Minus);
    CHECK_THROWS_AS(parse_layer_sign('x'), ConfigError);
}

TEST_CASE("half-layer bounds on the desk mesh") {
    const auto& f = fx();
    for (const ManifoldMesh* mesh : {&f.mu, &f.ms}) {
        for (int n = 0; n <= 4; ++n) {
            for (LayerSign sign : {LayerSign::Plus, LayerSign::Minus}) {
                const HalfLayer h = half_layer(*mesh, n, sign);
                const double inner = n == 0 ? 0.0 : mesh->layer_radius(n - 1);
                const double outer = mesh->layer_radius(n);
                const double sg = sign == LayerSign::Plus ? 1.0 : -1.0;
                CHECK(std::abs(sg * (sign == LayerSign::Plus ? h.s_lo() : h.s_hi()) - inner) <= 1e-12 * outer);
                CHECK(std::abs(sg * (sign == LayerSign::Plus ? h.s_hi() : h.s_lo()) - outer) <= 1e-12 * outer);
                CHECK(h.columns() >= 2);
            }
        }
        CHECK_THROWS_AS(half_layer(*mesh, 5, LayerSign::Plus), ConfigError);
        CHECK_THROWS_AS(half_layer(*mesh, -1, LayerSign::Plus), ConfigError);
    }
    // Adjacent half-layers share their boundary column.
    CHECK(half_layer(f.mu, 2, LayerSign::Plus).first == half_layer(f.mu, 1, LayerSign::Plus).last);
}

TEST_CASE("layer mapping at parameter level") {
    // F sends the node (θ_i, s) of U_n to (θ_i + ω, λ_u s) in U_{n+1}; F^{-1} does the
    // same for the stable side. The image is compared with the global evaluator,
    // which interpolates the local series instead of shifting mesh columns.
    const auto& f = fx();
    const FlowMap map(f.circle.params, f.cfg.flow);
    for (const ManifoldMesh* mesh : {&f.mu, &f.ms}) {
        const bool unstable = mesh->kind == ManifoldKind::Unstable;
        const FourierTaylorManifold& W = unstable ? f.wu : f.ws;
        const GlobalManifold G{&W, &map};
        const int dir = unstable ? 1 : -1;
        const double q = unstable ? W.lambda : 1.0 / W.lambda;
        double worst = 0.0;
        int checked = 0;
        for (int n = 1; n < 4; ++n) {
            for (LayerSign sign : {LayerSign::Plus, LayerSign::Minus}) {
                const HalfLayer h = half_layer(*mesh, n, sign);
                const HalfLayer next = half_layer(*mesh, n + 1, sign);
                for (std::uint32_t k = h.first; k <= h.last; k += 3) {
                    const double s = mesh->s_values[k];
                    const double image_s = q * s;
                    CHECK(std::min(next.s_lo(), next.s_hi()) <= image_s + 1e-12 * std::abs(image_s));
                    CHECK(std::max(next.s_lo(), next.s_hi()) >= image_s - 1e-12 * std::abs(image_s));
                    // Route that generated this column: s = q^m s_f with s_f on the
                    // fundamental grid. Other routes agree only to E_tol.
                    int m = 0;
                    double sf = s;
                    while (m <= 4 && std::abs(std::round(sf / W.D * f.cfg.k_half) * W.D / f.cfg.k_half - sf) >
                                         1e-12 * W.D) {
                        sf /= q;
                        ++m;
                    }
                    REQUIRE(m <= 4);
                    for (Eigen::Index i = 0; i < mesh->rows(); i += 29) {
                        const double theta = kTwoPi * static_cast<double>(i) / static_cast<double>(mesh->rows());
                        const State4 img = map.apply(mesh->point(i, k), dir, false).state;
                        const State4 expect = eval_global(G, theta + dir * W.omega, image_s, m + 1, false).value;
                        worst = std::max(worst, (img - expect).cwiseAbs().maxCoeff());
                        ++checked;
                    }
                }
            }
        }
        CHECK(checked > 60);
        CHECK(worst < 1e-8);
        MESSAGE(std::string(to_string(mesh->kind)), " layer mapping worst ", worst, " over ", checked, " nodes");
    }
}
