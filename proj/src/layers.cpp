#include "hcx/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hcx {

namespace {

bool near(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
}

} // namespace

char to_char(LayerSign sign) {
    return sign == LayerSign::Plus ? '+' : '-';
}

LayerSign parse_layer_sign(char c) {
    if (c == '+') return LayerSign::Plus;
    if (c == '-') return LayerSign::Minus;
    throw ConfigError(std::string("layer sign must be '+' or '-', got '") + c + "'");
}

double HalfLayer::s_lo() const {
    return mesh->s_values[first];
}

double HalfLayer::s_hi() const {
    return mesh->s_values[last];
}

HalfLayer half_layer(const ManifoldMesh& mesh, int n, LayerSign sign) {
    if (n < 0 || n > static_cast<int>(mesh.n_max)) {
        std::ostringstream err;
        err << "layer index " << n << " outside [0, " << mesh.n_max << "]";
        throw ConfigError(err.str());
    }
    const double inner = n == 0 ? 0.0 : mesh.layer_radius(n - 1);
    const double outer = mesh.layer_radius(n);
    const double lo = sign == LayerSign::Plus ? inner : -outer;
    const double hi = sign == LayerSign::Plus ? outer : -inner;

    const auto& s = mesh.s_values;
    auto first = std::find_if(s.begin(), s.end(), [&](double v) { return near(v, lo); });
    auto last = std::find_if(s.begin(), s.end(), [&](double v) { return near(v, hi); });
    if (first == s.end() || last == s.end() || last <= first) {
        std::ostringstream err;
        err << "half-layer " << n << to_char(sign) << " bounds [" << lo << ", " << hi
            << "] are not columns of the mesh";
        throw ConfigError(err.str());
    }
    HalfLayer h;
    h.mesh = &mesh;
    h.n = n;
    h.sign = sign;
    h.first = static_cast<std::uint32_t>(first - s.begin());
    h.last = static_cast<std::uint32_t>(last - s.begin());
    return h;
}

double layer_time_of_flight(int n_u, int n_s, double omega_p) {
    return kTwoPi * static_cast<double>(n_u + n_s) / omega_p;
}

LayerPairPlan enumerate_layer_pairs(const ManifoldMesh& u_mesh, const ManifoldMesh& s_mesh, int n_max,
                                    double omega_p, bool include_core) {
    if (n_max < 0) throw ConfigError("n_max must be non-negative");
    if (u_mesh.kind != ManifoldKind::Unstable || s_mesh.kind != ManifoldKind::Stable) {
        throw ConfigError("layer pairs need an unstable and a stable mesh, in that order");
    }
    if (static_cast<int>(u_mesh.n_max) < n_max || static_cast<int>(s_mesh.n_max) < n_max) {
        throw ConfigError("meshes are not globalized out to the requested n_max");
    }
    if (!(omega_p > 0.0)) throw ConfigError("omega_p must be positive");

    const int lowest = include_core ? 0 : 1;
    std::vector<std::pair<int, int>> layers;
    if (include_core) layers.emplace_back(0, 0);
    for (int n = 1; n <= n_max; ++n) {
        layers.emplace_back(n, n);
        if (n - 1 >= lowest) layers.emplace_back(n, n - 1);
    }

    LayerPairPlan plan;
    for (const auto& [nu, ns] : layers) {
        for (LayerSign su : {LayerSign::Plus, LayerSign::Minus}) {
            for (LayerSign ss : {LayerSign::Plus, LayerSign::Minus}) {
                plan.tasks.push_back({nu, su, ns, ss, layer_time_of_flight(nu, ns, omega_p)});
            }
        }
    }
    return plan;
}

} // namespace hcx
