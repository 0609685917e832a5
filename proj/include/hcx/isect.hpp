#pragma once

#include "hcx/layers.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace hcx {

/// Linear pair id ↔ (i, j, k1, l1) with i fastest, then j, k1, l1.
struct QuadIndex {
    std::uint64_t gid = 0;
    std::uint32_t i = 0;  // unstable θ index, [0, N1)
    std::uint32_t j = 0;  // stable θ index, [0, N2)
    std::uint32_t k1 = 0; // unstable quad column, [0, M1 - 1)
    std::uint32_t l1 = 0; // stable quad column, [0, M2 - 1)
};

struct PairDims {
    std::uint64_t n1 = 0, n2 = 0, m1 = 0, m2 = 0; // N1, N2, M1, M2 (M = columns)

    std::uint64_t quad_pairs() const { return n1 * n2 * (m1 - 1) * (m2 - 1); }
    std::uint64_t triangle_pairs() const { return 4 * quad_pairs(); }
};

/// Throws ConfigError if gid >= dims.quad_pairs().
QuadIndex gid_to_cartesian(std::uint64_t gid, const PairDims& dims);
std::uint64_t cartesian_to_gid(std::uint32_t i, std::uint32_t j, std::uint32_t k1, std::uint32_t l1,
                               const PairDims& dims);

/// Vertices v00 = W(θ_i, s_k), v10 = W(θ_{i+1}, s_k), v01 = W(θ_i, s_{k+1}),
/// v11 = W(θ_{i+1}, s_{k+1}).
struct Quad4 {
    std::array<State4, 4> v;
};

using Triangle4 = std::array<State4, 3>;

/// Triangles as ordered vertex triples (x1, x2, x3): triangle 0 is
/// (v10, v00, v01) and triangle 1 is (v10, v01, v11).
Triangle4 quad_triangle(const Quad4& q, int which);

/// True when the 4D boxes are disjoint in some coordinate (touching boxes
/// are kept).
bool aabb_reject(const Quad4& a, const Quad4& b);

/// Same-side plane test in the (x, y, px) projection: true when all vertices
/// of one quad lie strictly on one side of each triangle plane of the other.
bool moller_reject(const Quad4& a, const Quad4& b);

struct PreciseHit {
    State4 point;
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

enum class PreciseStatus { Hit, Miss, Singular };

struct PreciseResult {
    PreciseStatus status = PreciseStatus::Miss;
    PreciseHit hit;
};

/// Solves x2 + a(x1-x2) + b(x3-x2) = y2 + c(y1-y2) + d(y3-y2) and accepts
/// a, b, c, d >= 0, a + b <= 1, c + d <= 1 (with 1e-12 slack). Systems with
/// reciprocal condition estimate below 1e-12 are reported as Singular.
PreciseResult precise_triangle_intersection(const Triangle4& t1, const Triangle4& t2);

enum class Backend { Serial, Parallel };

Backend parse_backend(const std::string& name);
const char* to_string(Backend backend);

struct IntersectionRecord {
    LayerTask task;
    std::uint64_t gid = 0;
    int tri_u = 0; // which triangle of the unstable quad (0 or 1)
    int tri_s = 0;
    State4 point;
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    double theta_u = 0.0, s_u = 0.0, theta_s = 0.0, s_s = 0.0;
};

struct SearchStats {
    std::uint64_t pairs = 0;
    std::uint64_t aabb_survivors = 0;
    std::uint64_t survivors = 0;
    std::uint64_t singular = 0;
    std::uint64_t hits = 0;
};

/// Quads of both half-layers flattened for the per-gid predicates.
class HalfLayerPair {
public:
    HalfLayerPair(const HalfLayer& u, const HalfLayer& s);

    const PairDims& dims() const { return dims_; }
    Quad4 quad_u(std::uint32_t i, std::uint32_t k1) const;
    Quad4 quad_s(std::uint32_t j, std::uint32_t l1) const;
    /// Stage 1 and 2 predicate for one gid (true = survives).
    bool survives(std::uint64_t gid) const;
    bool survives_aabb(std::uint64_t gid) const;

    const HalfLayer& u() const { return u_; }
    const HalfLayer& s() const { return s_; }

    struct QuadData {
        bool valid = false;
        std::array<double, 4> lo{}, hi{};
        std::array<double, 4> margin{};
        // Plane n·X = c in the (x, y, px) projection for each triangle;
        // `usable` is false for degenerate normals.
        std::array<std::array<double, 3>, 2> normal{};
        std::array<double, 2> offset{};
        std::array<bool, 2> usable{};
        std::array<std::array<double, 3>, 4> proj{};
    };
    static QuadData prepare(const Quad4& q);
    static bool boxes_disjoint(const QuadData& a, const QuadData& b);
    static bool planes_separate(const QuadData& planes, const QuadData& points);

private:
    HalfLayer u_, s_;
    PairDims dims_;
    std::vector<QuadData> qu_, qs_;
};

/// Sorted gids surviving the box and plane rejection stages.
/// chunk bounds the number of gids evaluated per batch (0 = one batch).
std::vector<std::uint64_t> pair_candidates(const HalfLayerPair& pair, Backend backend, std::uint64_t chunk = 0,
                                           SearchStats* stats = nullptr);

/// Precise tests on the given gids, parameter estimates, and removal of
/// hits repeated on shared triangle edges.
std::vector<IntersectionRecord> precise_records(const HalfLayerPair& pair, const std::vector<std::uint64_t>& gids,
                                                const LayerTask& task, SearchStats* stats = nullptr);

std::vector<IntersectionRecord> find_intersections(const HalfLayer& u, const HalfLayer& s, const LayerTask& task,
                                                   Backend backend, SearchStats* stats = nullptr);

/// Runs every task of the plan; records come back sorted by task order,
/// then gid.
std::vector<IntersectionRecord> search_plan(const ManifoldMesh& u_mesh, const ManifoldMesh& s_mesh,
                                            const LayerPairPlan& plan, Backend backend,
                                            std::vector<SearchStats>* stats = nullptr);

} // namespace hcx
