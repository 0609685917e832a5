#pragma once

#include "hcx/isect.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace hcx {

/// Flat `key = value` settings shared by every CLI stage. Relative paths are
/// resolved against the directory of the config file.
struct PipelineConfig {
    ModelParams model;
    FlowSettings flow;

    std::filesystem::path seed_u; // periodic orbit generating the unstable-side circle
    std::filesystem::path seed_s; // stable side; defaults to seed_u
    int n_u = 128;                // grid size of the unstable-side circle
    int n_s = 128;
    int continuation_steps = 4;   // ε-continuation steps from the autonomous circle

    int order = 10;
    int k_half = 8;
    int n_max = 4;
    double s_max = 10.0;
    double w1_scale = 0.0;
    bool include_core = false;

    double tol_torus = 1e-9;
    double e_tol = 1e-6;
    double tol_refine = 1e-7;
    double alpha = 0.1;
    int max_iter = 200;

    Backend backend = Backend::Parallel;

    /// Throws ConfigError on any violated invariant.
    void validate() const;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown or repeated
/// keys are rejected.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const PipelineConfig& config);

} // namespace hcx
