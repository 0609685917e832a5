#pragma once

#include "hcx/models.hpp"

#include <optional>

namespace hcx {

/// Tolerances for the adaptive integrator. `max_step` of 0 means uncapped.
struct FlowSettings {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    double max_step = 0.0;
    long max_steps = 2'000'000;

    void validate() const;
};

struct StrobeResult {
    State4 state;
    std::optional<Mat4> stm; // DF^k when requested
};

/// Taylor coefficients in s of a curve through phase space: column k holds the
/// s^k coefficient.
using Jet4 = Eigen::Matrix<double, 4, Eigen::Dynamic>;

State4 flow(const State4& z, double t0, double tf, const ModelParams& params, const FlowSettings& settings);

/// Flow plus state transition matrix from the exact variational equations.
std::pair<State4, Mat4> flow_with_stm(const State4& z, double t0, double tf, const ModelParams& params,
                                      const FlowSettings& settings);

/// F^k with F the time-2π/Ω_p map starting at perturbation phase 0.
StrobeResult strobe_map(const State4& z, int k, const ModelParams& params, const FlowSettings& settings,
                        bool with_stm = false);

/// Propagates a polynomial-in-s family of initial conditions through the flow
/// in truncated power-series arithmetic; returns the Taylor coefficients of
/// the image to the same degree.
Jet4 flow_jet(const Jet4& jet, double t0, double tf, const ModelParams& params, const FlowSettings& settings);

/// F^k applied to a jet of initial conditions.
Jet4 strobe_map_jet(const Jet4& jet, int k, const ModelParams& params, const FlowSettings& settings);

/// Abstract stroboscopic map. The flow-based map is the production
/// implementation; tests substitute analytic maps.
class StroboscopicMap {
public:
    virtual ~StroboscopicMap() = default;
    virtual StrobeResult apply(const State4& z, int k, bool with_stm) const = 0;
    /// Continuous time elapsed per map application.
    virtual double period() const = 0;
};

class FlowMap final : public StroboscopicMap {
public:
    FlowMap(ModelParams params, FlowSettings settings) : params_(params), settings_(settings) {}

    StrobeResult apply(const State4& z, int k, bool with_stm) const override {
        return strobe_map(z, k, params_, settings_, with_stm);
    }
    double period() const override { return params_.map_period(); }

    const ModelParams& params() const { return params_; }
    const FlowSettings& settings() const { return settings_; }

private:
    ModelParams params_;
    FlowSettings settings_;
};

} // namespace hcx
