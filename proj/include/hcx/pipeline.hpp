#pragma once

#include "hcx/config.hpp"
#include "hcx/io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hcx {

/// Error raised by run_pipeline; keeps the exit code of the underlying failure.
class StageError : public Error {
public:
    StageError(const std::string& stage, const Error& cause)
        : Error("stage '" + stage + "' failed: " + cause.what(), cause.exit_code()), stage_(stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Invariant circle of the configured model grown from a periodic orbit of
/// the autonomous problem: solve at ε = 0, then continue in ε over
/// `continuation_steps` equal steps. A seed on the x axis with px = 0 is
/// first corrected as a symmetric orbit. ω defaults to the orbit's rotation
/// number.
InvariantCircle circle_from_seed(const io::Seed& seed, std::optional<double> omega, const PipelineConfig& config,
                                 int n);

/// Bundles, Taylor recursion and fundamental domain in one step.
FourierTaylorManifold manifold_from_circle(const InvariantCircle& circle, ManifoldKind kind,
                                           const PipelineConfig& config);

struct StageRecord {
    std::string name;
    double seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> outputs; // file name, sha256
};

struct TaskCounts {
    LayerTask task;
    SearchStats stats;
};

struct RunManifest {
    std::vector<StageRecord> stages;
    std::vector<TaskCounts> tasks;
    std::size_t records = 0;
    DedupSummary dedup;

    /// JSON text. With timings = false the stage durations are omitted, which
    /// makes manifests of repeated runs comparable byte for byte.
    std::string to_json(bool timings = true) const;
};

/// torus -> manifold -> globalize -> layers -> intersect -> refine, writing
/// every stage output and manifest.json into out_dir. A failing stage raises
/// StageError; outputs of completed stages stay on disk.
RunManifest run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir);

/// Fixed file names used by run_pipeline.
namespace files {
inline constexpr const char* circle_u = "circle_u.icr";
inline constexpr const char* circle_s = "circle_s.icr";
inline constexpr const char* manifold_u = "unstable.ftm";
inline constexpr const char* manifold_s = "stable.ftm";
inline constexpr const char* mesh_u = "unstable.mnf";
inline constexpr const char* mesh_s = "stable.mnf";
inline constexpr const char* plan = "plan.txt";
inline constexpr const char* records = "records.txt";
inline constexpr const char* solutions = "solutions.txt";
inline constexpr const char* manifest = "manifest.json";
} // namespace files

} // namespace hcx
