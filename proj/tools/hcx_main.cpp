// Command-line front end: one subcommand per pipeline stage plus `pipeline`
// (all stages) and `export` (CSV for plotting).

#include "hcx/log.hpp"
#include "hcx/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

using namespace hcx;

namespace {

struct Globals {
    std::string config;
    std::string backend;
    std::string log_level = "warn";
};

PipelineConfig load(const Globals& g) {
    PipelineConfig c;
    if (!g.config.empty()) {
        c = load_config(g.config);
    } else {
        c.model = ModelParams::pcrtbp(0.5); // placeholder; stage inputs carry the model
    }
    if (!g.backend.empty()) c.backend = parse_backend(g.backend);
    return c;
}

void require_config(const Globals& g, const char* stage) {
    if (g.config.empty()) throw ConfigError(std::string(stage) + " needs --config");
}

void print_records_summary(const std::vector<IntersectionRecord>& records) {
    std::cout << records.size() << " intersection records\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hcx: search for and refine connections between invariant circles"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "key = value configuration file");
    app.add_option("--backend", g.backend, "serial | parallel (overrides the config)");
    app.add_option("--log-level", g.log_level, "error | warn | info | debug");

    // torus
    auto* torus = app.add_subcommand("torus", "invariant circle from a periodic-orbit seed");
    std::string seed, circle_out;
    std::optional<double> omega;
    int grid = 0;
    torus->add_option("--seed", seed, "seed file `x y px py period`")->required();
    torus->add_option("--omega", omega, "rotation number (default: from the seed period)");
    torus->add_option("--n", grid, "grid size (default: n_u from the config)");
    torus->add_option("--out", circle_out, "circle file (ICR1)")->required();

    // manifold
    auto* manifold = app.add_subcommand("manifold", "Fourier-Taylor manifold of a circle");
    std::string circle_in, kind_name = "unstable", mani_out;
    std::optional<int> order;
    std::optional<double> etol;
    manifold->add_option("--circle", circle_in, "circle file (ICR1)")->required();
    manifold->add_option("--kind", kind_name, "unstable | stable");
    manifold->add_option("--order", order, "Taylor order");
    manifold->add_option("--etol", etol, "fundamental-domain tolerance");
    manifold->add_option("--out", mani_out, "manifold file (FTM1)")->required();

    // globalize
    auto* glob = app.add_subcommand("globalize", "mesh of a manifold out to n_max layers");
    std::string mani_in, mesh_out;
    std::optional<int> nmax, khalf;
    glob->add_option("--manifold", mani_in, "manifold file (FTM1)")->required();
    glob->add_option("--nmax", nmax, "number of layers");
    glob->add_option("--khalf", khalf, "fundamental columns per half");
    glob->add_option("--out", mesh_out, "mesh file (MNF1)")->required();

    // layers
    auto* layers = app.add_subcommand("layers", "enumerate half-layer pairs");
    std::string umesh, smesh, plan_path;
    bool include_core = false;
    layers->add_option("--umesh", umesh)->required();
    layers->add_option("--smesh", smesh)->required();
    layers->add_option("--nmax", nmax, "largest layer index (default: from the config)");
    layers->add_option("--plan", plan_path, "plan output")->required();
    layers->add_flag("--include-core", include_core, "also search the fundamental domains");

    // intersect
    auto* isect = app.add_subcommand("intersect", "mesh-pair intersection search");
    std::string records_out;
    isect->add_option("--umesh", umesh)->required();
    isect->add_option("--smesh", smesh)->required();
    isect->add_option("--plan", plan_path)->required();
    isect->add_option("--out", records_out, "records output")->required();

    // refine
    auto* refine = app.add_subcommand("refine", "damped Newton refinement of mesh hits");
    std::string umani, smani, records_in, solutions_out;
    std::optional<double> alpha, tol;
    refine->add_option("--umani", umani, "unstable manifold (FTM1)")->required();
    refine->add_option("--smani", smani, "stable manifold (FTM1)")->required();
    refine->add_option("--records", records_in)->required();
    refine->add_option("--alpha", alpha, "initial damping");
    refine->add_option("--tol", tol, "residual tolerance");
    refine->add_option("--out", solutions_out)->required();

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "run every stage");
    std::string out_dir;
    pipe->add_option("--out-dir", out_dir, "directory for all stage outputs")->required();

    // export
    auto* exp = app.add_subcommand("export", "CSV plot data from a mesh or a records file");
    std::string exp_mesh, exp_records, projection = "xypx", csv_out;
    auto* mesh_opt = exp->add_option("--mesh", exp_mesh);
    auto* rec_opt = exp->add_option("--records", exp_records);
    mesh_opt->excludes(rec_opt);
    exp->add_option("--projection", projection, "xypx | xypy");
    exp->add_option("--out", csv_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        log::set_level(log::parse_level(g.log_level));
        PipelineConfig cfg = load(g);

        if (torus->parsed()) {
            require_config(g, "torus");
            const InvariantCircle c = circle_from_seed(io::read_seed(seed), omega, cfg, grid > 0 ? grid : cfg.n_u);
            io::write_circle(circle_out, c);
            std::cout << "circle N=" << c.size() << " omega=" << io::format_double(c.omega)
                      << " residual=" << c.residual << "\n";
        } else if (manifold->parsed()) {
            if (order) cfg.order = *order;
            if (etol) cfg.e_tol = *etol;
            const ManifoldKind kind = kind_name == "unstable" ? ManifoldKind::Unstable
                                      : kind_name == "stable" ? ManifoldKind::Stable
                                                              : throw ConfigError("--kind must be unstable or stable");
            InvariantCircle c = io::read_circle(circle_in);
            if (!g.config.empty()) c.params.omega_p = cfg.model.omega_p;
            const FourierTaylorManifold W = manifold_from_circle(c, kind, cfg);
            io::write_manifold(mani_out, W);
            std::cout << to_string(kind) << " manifold lambda=" << io::format_double(W.lambda)
                      << " D=" << io::format_double(W.D) << "\n";
        } else if (glob->parsed()) {
            const FourierTaylorManifold W = io::read_manifold(mani_in);
            const ManifoldMesh mesh = globalize(W, khalf.value_or(cfg.k_half), nmax.value_or(cfg.n_max), cfg.flow);
            io::write_mesh(mesh_out, mesh);
            std::cout << "mesh " << mesh.rows() << " x " << mesh.cols() << "\n";
        } else if (layers->parsed()) {
            const ManifoldMesh mu = io::read_mesh(umesh);
            const ManifoldMesh ms = io::read_mesh(smesh);
            const double omega_p = g.config.empty() ? 1.0 : cfg.model.omega_p;
            const LayerPairPlan plan = enumerate_layer_pairs(mu, ms, nmax.value_or(cfg.n_max), omega_p,
                                                             include_core || cfg.include_core);
            io::write_plan(plan_path, plan);
            std::cout << plan.tasks.size() << " layer-pair tasks\n";
        } else if (isect->parsed()) {
            const ManifoldMesh mu = io::read_mesh(umesh);
            const ManifoldMesh ms = io::read_mesh(smesh);
            const LayerPairPlan plan = io::read_plan(plan_path);
            std::vector<SearchStats> stats;
            const auto records = search_plan(mu, ms, plan, cfg.backend, &stats);
            io::write_records(records_out, records);
            for (std::size_t i = 0; i < plan.tasks.size(); ++i) {
                const auto& t = plan.tasks[i];
                std::cout << t.n_u << to_char(t.sign_u) << ' ' << t.n_s << to_char(t.sign_s) << ": "
                          << stats[i].pairs << " pairs, " << stats[i].survivors << " survivors, " << stats[i].hits
                          << " hits\n";
            }
            print_records_summary(records);
        } else if (refine->parsed()) {
            const FourierTaylorManifold wu = io::read_manifold(umani);
            const FourierTaylorManifold ws = io::read_manifold(smani);
            const FlowMap map(wu.params, cfg.flow);
            const GlobalManifold gu{&wu, &map};
            const GlobalManifold gs{&ws, &map};
            std::vector<ConnectionParams> guesses;
            for (const auto& r : io::read_records(records_in, wu.params.omega_p)) guesses.push_back(guess_from_record(r));
            RefineSettings rs;
            rs.alpha = alpha.value_or(cfg.alpha);
            rs.tol = tol.value_or(cfg.tol_refine);
            rs.max_iter = cfg.max_iter;
            const auto solutions = refine_all(gu, gs, guesses, rs, cfg.backend);
            const DedupSummary dedup = deduplicate(solutions);
            io::write_solutions(solutions_out, solutions, dedup);
            std::cout << dedup.converged << " of " << dedup.total << " converged, " << dedup.unique.size()
                      << " distinct connections\n";
        } else if (pipe->parsed()) {
            require_config(g, "pipeline");
            const RunManifest m = run_pipeline(cfg, out_dir);
            std::cout << m.records << " intersection records, " << m.dedup.unique.size()
                      << " distinct connections\n";
        } else if (exp->parsed()) {
            const io::Projection p = io::parse_projection(projection);
            if (!exp_mesh.empty()) {
                io::export_mesh_csv(csv_out, io::read_mesh(exp_mesh), p);
            } else if (!exp_records.empty()) {
                io::export_records_csv(csv_out, io::read_records(exp_records), p);
            } else {
                throw ConfigError("export needs --mesh or --records");
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
