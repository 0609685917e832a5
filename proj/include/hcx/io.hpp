#pragma once

#include "hcx/refine.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hcx::io {

namespace fs = std::filesystem;

// Binary files are little-endian IEEE-754; text numerics use 17 significant
// digits so every double round-trips. All failures raise IoError.

/// "ICR1": u32 N, f64 ω, 4N f64 (K coordinate-major), f64 μ, f64 ε.
void write_circle(const fs::path& path, const InvariantCircle& circle);
/// The model is PERTBP when ε > 0 and PCRTBP otherwise (Ω_p = 1).
InvariantCircle read_circle(const fs::path& path);

/// "FTM1": u32 N, u32 order, u8 kind, f64 ω, λ, D, e_tol, scale, μ, ε, Ω_p,
/// then (order+1) coefficient grids (4N f64 each, coordinate-major) and
/// (order+1) f64 order residuals.
void write_manifold(const fs::path& path, const FourierTaylorManifold& W);
FourierTaylorManifold read_manifold(const fs::path& path);

/// "MNF1" globalized mesh.
void write_mesh(const fs::path& path, const ManifoldMesh& mesh);
ManifoldMesh read_mesh(const fs::path& path);

/// One task per line: `n1 sign1 n2 sign2 tof`.
void write_plan(const fs::path& path, const LayerPairPlan& plan);
LayerPairPlan read_plan(const fs::path& path);

/// One record per line:
/// `n1 sign1 n2 sign2 gid x y px py a b c d theta_u s_u theta_s s_s`.
void write_records(const fs::path& path, const std::vector<IntersectionRecord>& records);
/// tof is recomputed from the layer indices.
std::vector<IntersectionRecord> read_records(const fs::path& path, double omega_p = 1.0);

/// One solution per line:
/// `theta_u s_u theta_s s_s x y px py residual iterations status condition m_u m_s tof`
/// followed by a '#'-prefixed dedup summary block.
void write_solutions(const fs::path& path, const std::vector<ConnectionSolution>& solutions,
                     const DedupSummary& dedup);
std::vector<ConnectionSolution> read_solutions(const fs::path& path);

enum class Projection { XYPx, XYPy };
Projection parse_projection(const std::string& name);

/// CSV `i,k,x,y,px` (or py), one row per mesh node with i fastest.
void export_mesh_csv(const fs::path& path, const ManifoldMesh& mesh, Projection projection);
/// CSV `n1,sign1,n2,sign2,gid,x,y,px` (or py).
void export_records_csv(const fs::path& path, const std::vector<IntersectionRecord>& records,
                        Projection projection);

/// Seed state file: one line `x y px py period` ('#' comments allowed).
struct Seed {
    State4 state;
    double period = 0.0;
};
Seed read_seed(const fs::path& path);

/// Lowercase hex SHA-256 of the file contents.
std::string sha256_file(const fs::path& path);

/// Number of non-empty lines not starting with '#'.
std::size_t count_data_lines(const fs::path& path);

std::string format_double(double x);

} // namespace hcx::io
