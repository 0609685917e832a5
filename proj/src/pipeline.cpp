#include "hcx/pipeline.hpp"

#include "hcx/log.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>

namespace hcx {

namespace fs = std::filesystem;

InvariantCircle circle_from_seed(const io::Seed& seed, std::optional<double> omega, const PipelineConfig& config,
                                 int n) {
    ModelParams autonomous = ModelParams::pcrtbp(config.model.mu);
    autonomous.omega_p = config.model.omega_p;
    TorusSettings ts;
    ts.flow = config.flow;
    ts.tol = config.tol_torus;

    State4 z0 = seed.state;
    const bool symmetric = seed.state[1] == 0.0 && seed.state[2] == 0.0;
    if (symmetric) {
        const SymmetricOrbit orbit =
            correct_symmetric_orbit(seed.state[0], seed.state[3], seed.period, autonomous, config.flow);
        z0 = orbit.z0;
        log::info("seed orbit corrected to x0 = ", z0[0], ", py0 = ", z0[3], " (residual ", orbit.residual, ")");
    }
    const double w = omega ? *omega : std::fmod(rotation_number_from_period(seed.period, autonomous), kTwoPi);
    const PeriodicGrid K0 = circle_from_periodic_orbit(z0, seed.period, n, autonomous, config.flow);
    InvariantCircle circle = solve_invariant_circle(K0, w, autonomous, ts);
    log::info("circle at eps = 0: residual ", circle.residual, " after ", circle.iterations, " iterations");

    if (config.model.kind == ModelKind::Pertbp && config.model.eps > 0.0) {
        for (int j = 1; j <= config.continuation_steps; ++j) {
            const double eps = config.model.eps * j / config.continuation_steps;
            circle = solve_invariant_circle(circle.K, w, ModelParams::pertbp(config.model.mu, eps), ts);
            log::info("circle at eps = ", eps, ": residual ", circle.residual, " after ", circle.iterations,
                      " iterations");
        }
    }
    return circle;
}

FourierTaylorManifold manifold_from_circle(const InvariantCircle& circle, ManifoldKind kind,
                                           const PipelineConfig& config) {
    const BundleSet bundles = compute_bundles(circle, config.flow);
    log::info("bundles: lambda_u = ", bundles.lambda_u, ", lambda_s = ", bundles.lambda_s, ", residual ",
              bundles.residual);
    ManifoldSettings ms;
    ms.order = config.order;
    ms.e_tol = config.e_tol;
    ms.s_max = config.s_max;
    ms.w1_scale = config.w1_scale;
    ms.flow = config.flow;
    FourierTaylorManifold W = compute_manifold(circle, bundles, kind, ms);
    W.D = fundamental_domain(W, config.e_tol, config.s_max, config.flow);
    log::info(to_string(kind), " manifold: D = ", W.D, ", top order residual ", W.order_residuals.back());
    return W;
}

std::string RunManifest::to_json(bool timings) const {
    nlohmann::ordered_json j;
    j["stages"] = nlohmann::ordered_json::array();
    for (const auto& s : stages) {
        nlohmann::ordered_json st;
        st["name"] = s.name;
        if (timings) st["seconds"] = s.seconds;
        st["outputs"] = nlohmann::ordered_json::array();
        for (const auto& [file, hash] : s.outputs) st["outputs"].push_back({{"file", file}, {"sha256", hash}});
        j["stages"].push_back(st);
    }
    j["layer_pairs"] = nlohmann::ordered_json::array();
    for (const auto& t : tasks) {
        j["layer_pairs"].push_back({{"n_u", t.task.n_u},
                                    {"sign_u", std::string(1, to_char(t.task.sign_u))},
                                    {"n_s", t.task.n_s},
                                    {"sign_s", std::string(1, to_char(t.task.sign_s))},
                                    {"tof", t.task.tof},
                                    {"quad_pairs", t.stats.pairs},
                                    {"aabb_survivors", t.stats.aabb_survivors},
                                    {"survivors", t.stats.survivors},
                                    {"singular", t.stats.singular},
                                    {"hits", t.stats.hits}});
    }
    j["records"] = records;
    j["refined"] = {{"total", dedup.total}, {"converged", dedup.converged}, {"unique", dedup.unique.size()}};
    return j.dump(2) + "\n";
}

namespace {

class StageTimer {
public:
    StageTimer(RunManifest& manifest, std::string name, const fs::path& dir)
        : manifest_(manifest), dir_(dir), start_(std::chrono::steady_clock::now()) {
        record_.name = std::move(name);
        log::info("stage ", record_.name);
    }
    void output(const char* file) { files_.push_back(file); }
    void done() {
        record_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        for (const auto& f : files_) record_.outputs.emplace_back(f, io::sha256_file(dir_ / f));
        manifest_.stages.push_back(record_);
    }
    const std::string& name() const { return record_.name; }

private:
    RunManifest& manifest_;
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    StageRecord record_;
    std::vector<std::string> files_;
};

template <class F>
void run_stage(RunManifest& manifest, const char* name, const fs::path& dir, F&& body) {
    StageTimer timer(manifest, name, dir);
    try {
        body(timer);
        timer.done();
    } catch (const Error& e) {
        throw StageError(name, e);
    } catch (const std::exception& e) {
        throw StageError(name, NumericalError(e.what()));
    }
}

} // namespace

RunManifest run_pipeline(const PipelineConfig& config, const fs::path& out_dir) {
    RunManifest manifest;
    InvariantCircle cu, cs;
    FourierTaylorManifold wu, ws;
    ManifoldMesh mu, ms;
    LayerPairPlan plan;
    std::vector<IntersectionRecord> records;

    run_stage(manifest, "config", out_dir, [&](StageTimer&) {
        config.validate();
        for (const auto& p : {config.seed_u, config.seed_s}) {
            if (p.empty()) throw ConfigError("seed_u is required");
            if (!fs::exists(p)) throw IoError("seed file " + p.string() + " does not exist");
        }
        fs::create_directories(out_dir);
    });
    run_stage(manifest, "torus", out_dir, [&](StageTimer& t) {
        cu = circle_from_seed(io::read_seed(config.seed_u), std::nullopt, config, config.n_u);
        const bool same = fs::equivalent(config.seed_u, config.seed_s) && config.n_u == config.n_s;
        cs = same ? cu : circle_from_seed(io::read_seed(config.seed_s), std::nullopt, config, config.n_s);
        io::write_circle(out_dir / files::circle_u, cu);
        io::write_circle(out_dir / files::circle_s, cs);
        t.output(files::circle_u);
        t.output(files::circle_s);
    });
    run_stage(manifest, "manifold", out_dir, [&](StageTimer& t) {
        wu = manifold_from_circle(cu, ManifoldKind::Unstable, config);
        ws = manifold_from_circle(cs, ManifoldKind::Stable, config);
        io::write_manifold(out_dir / files::manifold_u, wu);
        io::write_manifold(out_dir / files::manifold_s, ws);
        t.output(files::manifold_u);
        t.output(files::manifold_s);
    });
    run_stage(manifest, "globalize", out_dir, [&](StageTimer& t) {
        mu = globalize(wu, config.k_half, config.n_max, config.flow);
        ms = globalize(ws, config.k_half, config.n_max, config.flow);
        io::write_mesh(out_dir / files::mesh_u, mu);
        io::write_mesh(out_dir / files::mesh_s, ms);
        t.output(files::mesh_u);
        t.output(files::mesh_s);
    });
    run_stage(manifest, "layers", out_dir, [&](StageTimer& t) {
        plan = enumerate_layer_pairs(mu, ms, config.n_max, config.model.omega_p, config.include_core);
        io::write_plan(out_dir / files::plan, plan);
        t.output(files::plan);
    });
    run_stage(manifest, "intersect", out_dir, [&](StageTimer& t) {
        std::vector<SearchStats> stats;
        records = search_plan(mu, ms, plan, config.backend, &stats);
        for (std::size_t i = 0; i < plan.tasks.size(); ++i) manifest.tasks.push_back({plan.tasks[i], stats[i]});
        manifest.records = records.size();
        io::write_records(out_dir / files::records, records);
        t.output(files::records);
    });
    run_stage(manifest, "refine", out_dir, [&](StageTimer& t) {
        const FlowMap map(wu.params, config.flow);
        const GlobalManifold gu{&wu, &map};
        const GlobalManifold gs{&ws, &map};
        std::vector<ConnectionParams> guesses;
        for (const auto& r : records) guesses.push_back(guess_from_record(r));
        RefineSettings rs;
        rs.alpha = config.alpha;
        rs.tol = config.tol_refine;
        rs.max_iter = config.max_iter;
        const auto solutions = refine_all(gu, gs, guesses, rs, config.backend);
        manifest.dedup = deduplicate(solutions);
        io::write_solutions(out_dir / files::solutions, solutions, manifest.dedup);
        t.output(files::solutions);
    });

    std::ofstream out(out_dir / files::manifest, std::ios::trunc);
    out << manifest.to_json();
    out.close();
    if (!out) throw IoError("cannot write " + (out_dir / files::manifest).string());
    return manifest;
}

} // namespace hcx
