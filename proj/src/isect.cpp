#include "hcx/isect.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <omp.h>

namespace hcx {

namespace {

constexpr double kBarySlack = 1e-12;
constexpr double kMinRcond = 1e-12;
constexpr double kDuplicateTol = 1e-9;

// Slack on the rejection stages. Precise hits are accepted with a small
// barycentric slack, so the filters must keep anything that close.
constexpr double kRelativeMargin = 1e-10;
constexpr double kRoundoffMargin = 1e-13;

} // namespace

QuadIndex gid_to_cartesian(std::uint64_t gid, const PairDims& d) {
    if (gid >= d.quad_pairs()) {
        std::ostringstream err;
        err << "gid " << gid << " out of range (" << d.quad_pairs() << " quad pairs)";
        throw ConfigError(err.str());
    }
    QuadIndex q;
    q.gid = gid;
    q.i = static_cast<std::uint32_t>(gid % d.n1);
    q.j = static_cast<std::uint32_t>((gid % (d.n1 * d.n2)) / d.n1);
    q.k1 = static_cast<std::uint32_t>((gid % (d.n1 * d.n2 * (d.m1 - 1))) / (d.n1 * d.n2));
    q.l1 = static_cast<std::uint32_t>(gid / (d.n1 * d.n2 * (d.m1 - 1)));
    return q;
}

std::uint64_t cartesian_to_gid(std::uint32_t i, std::uint32_t j, std::uint32_t k1, std::uint32_t l1,
                               const PairDims& d) {
    return i + d.n1 * (j + d.n2 * (k1 + (d.m1 - 1) * static_cast<std::uint64_t>(l1)));
}

Triangle4 quad_triangle(const Quad4& q, int which) {
    if (which == 0) return {q.v[1], q.v[0], q.v[2]};
    return {q.v[1], q.v[2], q.v[3]};
}

HalfLayerPair::QuadData HalfLayerPair::prepare(const Quad4& q) {
    QuadData d;
    d.valid = true;
    for (const auto& v : q.v) d.valid = d.valid && v.allFinite();
    if (!d.valid) return d;

    double scale = 0.0;
    for (int c = 0; c < 4; ++c) {
        d.lo[c] = std::min({q.v[0][c], q.v[1][c], q.v[2][c], q.v[3][c]});
        d.hi[c] = std::max({q.v[0][c], q.v[1][c], q.v[2][c], q.v[3][c]});
        const double mag = std::max(std::abs(d.lo[c]), std::abs(d.hi[c]));
        d.margin[c] = kRelativeMargin * (d.hi[c] - d.lo[c]) + kRoundoffMargin * mag;
        if (c < 3) scale = std::max(scale, mag);
    }
    for (int v = 0; v < 4; ++v) {
        for (int c = 0; c < 3; ++c) d.proj[v][c] = q.v[v][c];
    }
    for (int t = 0; t < 2; ++t) {
        const Triangle4 tri = quad_triangle(q, t);
        const Eigen::Vector3d p1 = tri[0].head<3>(), p2 = tri[1].head<3>(), p3 = tri[2].head<3>();
        const Eigen::Vector3d n = (p1 - p2).cross(p3 - p2);
        const double len = n.norm();
        d.usable[t] = len > 1e-14 * std::max(scale * scale, 1e-300);
        for (int c = 0; c < 3; ++c) d.normal[t][c] = n[c];
        d.offset[t] = n.dot(p2);
    }
    return d;
}

bool HalfLayerPair::boxes_disjoint(const QuadData& a, const QuadData& b) {
    for (int c = 0; c < 4; ++c) {
        if (a.hi[c] + a.margin[c] < b.lo[c] - b.margin[c]) return true;
        if (b.hi[c] + b.margin[c] < a.lo[c] - a.margin[c]) return true;
    }
    return false;
}

bool HalfLayerPair::planes_separate(const QuadData& planes, const QuadData& points) {
    double scale = 0.0;
    for (const auto& p : points.proj) {
        for (double x : p) scale = std::max(scale, std::abs(x));
    }
    for (const auto& p : planes.proj) {
        for (double x : p) scale = std::max(scale, std::abs(x));
    }
    for (int t = 0; t < 2; ++t) {
        if (!planes.usable[t]) return false;
        const auto& n = planes.normal[t];
        const double nlen = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        std::array<double, 4> f{};
        double fmax = 0.0;
        for (int v = 0; v < 4; ++v) {
            const auto& p = points.proj[v];
            f[v] = n[0] * p[0] + n[1] * p[1] + n[2] * p[2] - planes.offset[t];
            fmax = std::max(fmax, std::abs(f[v]));
        }
        const double band = kRelativeMargin * fmax + kRoundoffMargin * nlen * scale;
        const bool above = std::all_of(f.begin(), f.end(), [&](double x) { return x > band; });
        const bool below = std::all_of(f.begin(), f.end(), [&](double x) { return x < -band; });
        if (!above && !below) return false;
    }
    return true;
}

bool aabb_reject(const Quad4& a, const Quad4& b) {
    const auto da = HalfLayerPair::prepare(a);
    const auto db = HalfLayerPair::prepare(b);
    if (!da.valid || !db.valid) return true;
    return HalfLayerPair::boxes_disjoint(da, db);
}

bool moller_reject(const Quad4& a, const Quad4& b) {
    const auto da = HalfLayerPair::prepare(a);
    const auto db = HalfLayerPair::prepare(b);
    if (!da.valid || !db.valid) return true;
    return HalfLayerPair::planes_separate(da, db) || HalfLayerPair::planes_separate(db, da);
}

PreciseResult precise_triangle_intersection(const Triangle4& t1, const Triangle4& t2) {
    const State4& x1 = t1[0];
    const State4& x2 = t1[1];
    const State4& x3 = t1[2];
    const State4& y1 = t2[0];
    const State4& y2 = t2[1];
    const State4& y3 = t2[2];

    Mat4 A;
    A.col(0) = x1 - x2;
    A.col(1) = x3 - x2;
    A.col(2) = -(y1 - y2);
    A.col(3) = -(y3 - y2);
    const State4 rhs = y2 - x2;

    // Column equilibration so the condition estimate reflects geometry, not
    // triangle size.
    Eigen::Vector4d colscale;
    for (int c = 0; c < 4; ++c) {
        const double norm = A.col(c).norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) return {PreciseStatus::Singular, {}};
        colscale[c] = 1.0 / norm;
    }
    const Mat4 As = A * colscale.asDiagonal();
    const Eigen::PartialPivLU<Mat4> lu(As);
    if (!(lu.rcond() >= kMinRcond)) return {PreciseStatus::Singular, {}};
    const Eigen::Vector4d sol = colscale.cwiseProduct(lu.solve(rhs));

    PreciseResult r;
    r.hit.a = sol[0];
    r.hit.b = sol[1];
    r.hit.c = sol[2];
    r.hit.d = sol[3];
    const bool inside = sol.minCoeff() >= -kBarySlack && sol[0] + sol[1] <= 1.0 + kBarySlack &&
                        sol[2] + sol[3] <= 1.0 + kBarySlack;
    if (!inside) return r;
    r.status = PreciseStatus::Hit;
    r.hit.point = x2 + sol[0] * (x1 - x2) + sol[1] * (x3 - x2);
    return r;
}

Backend parse_backend(const std::string& name) {
    if (name == "serial") return Backend::Serial;
    if (name == "parallel") return Backend::Parallel;
    throw ConfigError("backend must be 'serial' or 'parallel', got '" + name + "'");
}

const char* to_string(Backend backend) {
    return backend == Backend::Serial ? "serial" : "parallel";
}

namespace {

Quad4 mesh_quad(const ManifoldMesh& mesh, std::uint32_t first, std::uint32_t i, std::uint32_t k1) {
    const auto n = static_cast<std::uint32_t>(mesh.rows());
    const std::uint32_t ip = (i + 1) % n;
    const Eigen::Index k = first + k1;
    return Quad4{{mesh.point(i, k), mesh.point(ip, k), mesh.point(i, k + 1), mesh.point(ip, k + 1)}};
}

} // namespace

HalfLayerPair::HalfLayerPair(const HalfLayer& u, const HalfLayer& s) : u_(u), s_(s) {
    if (u.columns() < 2 || s.columns() < 2) throw ConfigError("half-layers need at least two columns");
    dims_.n1 = static_cast<std::uint64_t>(u.mesh->rows());
    dims_.n2 = static_cast<std::uint64_t>(s.mesh->rows());
    dims_.m1 = u.columns();
    dims_.m2 = s.columns();
    qu_.resize(dims_.n1 * (dims_.m1 - 1));
    qs_.resize(dims_.n2 * (dims_.m2 - 1));
    for (std::uint32_t k1 = 0; k1 + 1 < dims_.m1; ++k1) {
        for (std::uint32_t i = 0; i < dims_.n1; ++i) qu_[k1 * dims_.n1 + i] = prepare(quad_u(i, k1));
    }
    for (std::uint32_t l1 = 0; l1 + 1 < dims_.m2; ++l1) {
        for (std::uint32_t j = 0; j < dims_.n2; ++j) qs_[l1 * dims_.n2 + j] = prepare(quad_s(j, l1));
    }
}

Quad4 HalfLayerPair::quad_u(std::uint32_t i, std::uint32_t k1) const {
    return mesh_quad(*u_.mesh, u_.first, i, k1);
}

Quad4 HalfLayerPair::quad_s(std::uint32_t j, std::uint32_t l1) const {
    return mesh_quad(*s_.mesh, s_.first, j, l1);
}

bool HalfLayerPair::survives_aabb(std::uint64_t gid) const {
    const QuadIndex q = gid_to_cartesian(gid, dims_);
    const QuadData& a = qu_[q.k1 * dims_.n1 + q.i];
    const QuadData& b = qs_[q.l1 * dims_.n2 + q.j];
    return a.valid && b.valid && !boxes_disjoint(a, b);
}

bool HalfLayerPair::survives(std::uint64_t gid) const {
    const QuadIndex q = gid_to_cartesian(gid, dims_);
    const QuadData& a = qu_[q.k1 * dims_.n1 + q.i];
    const QuadData& b = qs_[q.l1 * dims_.n2 + q.j];
    if (!a.valid || !b.valid || boxes_disjoint(a, b)) return false;
    return !planes_separate(a, b) && !planes_separate(b, a);
}

std::vector<std::uint64_t> pair_candidates(const HalfLayerPair& pair, Backend backend, std::uint64_t chunk,
                                           SearchStats* stats) {
    const std::uint64_t total = pair.dims().quad_pairs();
    if (chunk == 0) chunk = total;
    std::vector<std::uint64_t> out;
    std::uint64_t aabb_count = 0;

    for (std::uint64_t start = 0; start < total; start += chunk) {
        const std::uint64_t stop = std::min(total, start + chunk);
        if (backend == Backend::Serial) {
            for (std::uint64_t g = start; g < stop; ++g) {
                if (!pair.survives_aabb(g)) continue;
                ++aabb_count;
                if (pair.survives(g)) out.push_back(g);
            }
            continue;
        }
        // Each thread compacts into its own buffer; buffers are merged and
        // sorted so the result does not depend on scheduling.
        std::vector<std::vector<std::uint64_t>> local(static_cast<std::size_t>(omp_get_max_threads()));
        std::uint64_t chunk_aabb = 0;
#pragma omp parallel reduction(+ : chunk_aabb)
        {
            auto& mine = local[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
            for (std::int64_t g = static_cast<std::int64_t>(start); g < static_cast<std::int64_t>(stop); ++g) {
                const auto gid = static_cast<std::uint64_t>(g);
                if (!pair.survives_aabb(gid)) continue;
                ++chunk_aabb;
                if (pair.survives(gid)) mine.push_back(gid);
            }
        }
        aabb_count += chunk_aabb;
        for (auto& l : local) out.insert(out.end(), l.begin(), l.end());
    }
    std::sort(out.begin(), out.end());
    if (stats != nullptr) {
        stats->pairs += total;
        stats->aabb_survivors += aabb_count;
        stats->survivors += out.size();
    }
    return out;
}

std::vector<IntersectionRecord> precise_records(const HalfLayerPair& pair, const std::vector<std::uint64_t>& gids,
                                                const LayerTask& task, SearchStats* stats) {
    const auto& um = *pair.u().mesh;
    const auto& sm = *pair.s().mesh;
    const double dtu = kTwoPi / static_cast<double>(pair.dims().n1);
    const double dts = kTwoPi / static_cast<double>(pair.dims().n2);

    std::vector<IntersectionRecord> out;
    for (std::uint64_t gid : gids) {
        const QuadIndex q = gid_to_cartesian(gid, pair.dims());
        const Quad4 qu = pair.quad_u(q.i, q.k1);
        const Quad4 qs = pair.quad_s(q.j, q.l1);
        const double su0 = um.s_values[pair.u().first + q.k1];
        const double su1 = um.s_values[pair.u().first + q.k1 + 1];
        const double ss0 = sm.s_values[pair.s().first + q.l1];
        const double ss1 = sm.s_values[pair.s().first + q.l1 + 1];
        for (int tu = 0; tu < 2; ++tu) {
            for (int ts = 0; ts < 2; ++ts) {
                const PreciseResult r = precise_triangle_intersection(quad_triangle(qu, tu), quad_triangle(qs, ts));
                if (r.status == PreciseStatus::Singular) {
                    if (stats != nullptr) ++stats->singular;
                    continue;
                }
                if (r.status != PreciseStatus::Hit) continue;
                IntersectionRecord rec;
                rec.task = task;
                rec.gid = gid;
                rec.tri_u = tu;
                rec.tri_s = ts;
                rec.point = r.hit.point;
                rec.a = r.hit.a;
                rec.b = r.hit.b;
                rec.c = r.hit.c;
                rec.d = r.hit.d;
                // Barycentric coordinates map affinely onto (θ, s) over each
                // triangle; the second triangle has base vertex v01.
                auto params = [](int tri, double a, double b, double theta0, double dtheta, double s0, double s1) {
                    if (tri == 0) return std::pair{theta0 + a * dtheta, s0 + b * (s1 - s0)};
                    return std::pair{theta0 + (a + b) * dtheta, s1 - a * (s1 - s0)};
                };
                auto [thu, su] = params(tu, rec.a, rec.b, q.i * dtu, dtu, su0, su1);
                auto [ths, ss] = params(ts, rec.c, rec.d, q.j * dts, dts, ss0, ss1);
                rec.theta_u = std::fmod(thu, kTwoPi);
                rec.s_u = su;
                rec.theta_s = std::fmod(ths, kTwoPi);
                rec.s_s = ss;
                const bool duplicate = std::any_of(out.begin(), out.end(), [&](const IntersectionRecord& o) {
                    return (o.point - rec.point).cwiseAbs().maxCoeff() <= kDuplicateTol;
                });
                if (!duplicate) out.push_back(rec);
            }
        }
    }
    if (stats != nullptr) stats->hits += out.size();
    return out;
}

std::vector<IntersectionRecord> find_intersections(const HalfLayer& u, const HalfLayer& s, const LayerTask& task,
                                                   Backend backend, SearchStats* stats) {
    const HalfLayerPair pair(u, s);
    const auto gids = pair_candidates(pair, backend, 0, stats);
    return precise_records(pair, gids, task, stats);
}

std::vector<IntersectionRecord> search_plan(const ManifoldMesh& u_mesh, const ManifoldMesh& s_mesh,
                                            const LayerPairPlan& plan, Backend backend,
                                            std::vector<SearchStats>* stats) {
    std::vector<IntersectionRecord> out;
    if (stats != nullptr) stats->assign(plan.tasks.size(), SearchStats{});
    for (std::size_t t = 0; t < plan.tasks.size(); ++t) {
        const LayerTask& task = plan.tasks[t];
        const HalfLayer u = half_layer(u_mesh, task.n_u, task.sign_u);
        const HalfLayer s = half_layer(s_mesh, task.n_s, task.sign_s);
        auto recs = find_intersections(u, s, task, backend, stats != nullptr ? &(*stats)[t] : nullptr);
        out.insert(out.end(), recs.begin(), recs.end());
    }
    return out;
}

} // namespace hcx
