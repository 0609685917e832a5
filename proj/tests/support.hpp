#pragma once

// Shared fixtures: the desk-scale exterior circle (mu = 0.01) and small
// helpers used by several test executables.

#include "hcx/pipeline.hpp"

#include <filesystem>
#include <string>

namespace hcx::test {

inline std::filesystem::path data_dir() { return HCX_DATA_DIR; }

inline PipelineConfig desk_config() { return load_config(data_dir() / "desk.cfg"); }

/// Desk circle at the given eccentricity (continued from eps = 0).
inline InvariantCircle desk_circle(double eps, int n = 128) {
    PipelineConfig c = desk_config();
    c.model.eps = eps;
    return circle_from_seed(io::read_seed(c.seed_u), std::nullopt, c, n);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("hcx_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace hcx::test
