#pragma once

#include "hcx/manifold.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hcx {

enum class LayerSign : std::int8_t { Plus = 1, Minus = -1 };

char to_char(LayerSign sign);
LayerSign parse_layer_sign(char c);

/// Contiguous block of mesh columns covering one half-layer.
///
/// Unstable, n >= 1: |s| in [D λ^{n-1}, D λ^n]; stable: |s| in
/// [D λ^{-(n-1)}, D λ^{-n}]. n = 0 denotes the core half [0, D] (or [-D, 0]),
/// searched only on request.
struct HalfLayer {
    const ManifoldMesh* mesh = nullptr;
    int n = 0;
    LayerSign sign = LayerSign::Plus;
    std::uint32_t first = 0; // first mesh column (inclusive)
    std::uint32_t last = 0;  // last mesh column (inclusive)

    std::uint32_t columns() const { return last - first + 1; }
    double s_lo() const;     // s_values[first]
    double s_hi() const;     // s_values[last]
};

/// Throws ConfigError if n is outside [0, n_max] or the bounds are not mesh
/// columns.
HalfLayer half_layer(const ManifoldMesh& mesh, int n, LayerSign sign);

struct LayerTask {
    int n_u = 0;
    LayerSign sign_u = LayerSign::Plus;
    int n_s = 0;
    LayerSign sign_s = LayerSign::Plus;
    double tof = 0.0; // 2π(n_u + n_s)/Ω_p
};

inline bool operator==(const LayerTask& a, const LayerTask& b) {
    return a.n_u == b.n_u && a.sign_u == b.sign_u && a.n_s == b.n_s && a.sign_s == b.sign_s;
}

struct LayerPairPlan {
    std::vector<LayerTask> tasks;
};

/// Pairs (U_n, S_n) and (U_n, S_{n-1}) for n = 1..n_max in all four sign
/// combinations. With include_core the fundamental-domain halves join as
/// layer 0, which adds (U_0, S_0) and (U_1, S_0).
LayerPairPlan enumerate_layer_pairs(const ManifoldMesh& u_mesh, const ManifoldMesh& s_mesh, int n_max,
                                    double omega_p, bool include_core = false);

/// Time of flight between fundamental domains for a hit in (U_{n_u}, S_{n_s}).
double layer_time_of_flight(int n_u, int n_s, double omega_p);

} // namespace hcx
