#include "hcx/config.hpp"

#include "hcx/io.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace hcx {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0') throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    return x;
}

int parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    return static_cast<int>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

} // namespace

void PipelineConfig::validate() const {
    model.validate();
    flow.validate();
    for (int n : {n_u, n_s}) {
        if (n < 8 || n % 2 != 0) throw ConfigError("circle grid sizes must be even and at least 8");
    }
    if (continuation_steps < 1) throw ConfigError("continuation_steps must be at least 1");
    if (order < 1) throw ConfigError("order must be at least 1");
    if (k_half < 1) throw ConfigError("k_half must be at least 1");
    if (n_max < 1) throw ConfigError("n_max must be at least 1");
    if (!(s_max > 0.0)) throw ConfigError("s_max must be positive");
    if (!(w1_scale >= 0.0)) throw ConfigError("w1_scale must be non-negative");
    for (double t : {tol_torus, e_tol, tol_refine}) {
        if (!(t > 0.0)) throw ConfigError("tolerances must be positive");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (max_iter < 0) throw ConfigError("max_iter must be non-negative");
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    std::string model_name = "pertbp";
    auto path_of = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };

    const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters = {
        {"model", [&](auto&, auto& v) { model_name = v; }},
        {"mu", [&](auto& k, auto& v) { c.model.mu = parse_double(k, v); }},
        {"eps", [&](auto& k, auto& v) { c.model.eps = parse_double(k, v); }},
        {"omega_p", [&](auto& k, auto& v) { c.model.omega_p = parse_double(k, v); }},
        {"abs_tol", [&](auto& k, auto& v) { c.flow.abs_tol = parse_double(k, v); }},
        {"rel_tol", [&](auto& k, auto& v) { c.flow.rel_tol = parse_double(k, v); }},
        {"seed_u", [&](auto&, auto& v) { c.seed_u = path_of(v); }},
        {"seed_s", [&](auto&, auto& v) { c.seed_s = path_of(v); }},
        {"n_u", [&](auto& k, auto& v) { c.n_u = parse_int(k, v); }},
        {"n_s", [&](auto& k, auto& v) { c.n_s = parse_int(k, v); }},
        {"continuation_steps", [&](auto& k, auto& v) { c.continuation_steps = parse_int(k, v); }},
        {"order", [&](auto& k, auto& v) { c.order = parse_int(k, v); }},
        {"k_half", [&](auto& k, auto& v) { c.k_half = parse_int(k, v); }},
        {"n_max", [&](auto& k, auto& v) { c.n_max = parse_int(k, v); }},
        {"s_max", [&](auto& k, auto& v) { c.s_max = parse_double(k, v); }},
        {"w1_scale", [&](auto& k, auto& v) { c.w1_scale = parse_double(k, v); }},
        {"include_core", [&](auto& k, auto& v) { c.include_core = parse_bool(k, v); }},
        {"tol_torus", [&](auto& k, auto& v) { c.tol_torus = parse_double(k, v); }},
        {"e_tol", [&](auto& k, auto& v) { c.e_tol = parse_double(k, v); }},
        {"tol_refine", [&](auto& k, auto& v) { c.tol_refine = parse_double(k, v); }},
        {"alpha", [&](auto& k, auto& v) { c.alpha = parse_double(k, v); }},
        {"max_iter", [&](auto& k, auto& v) { c.max_iter = parse_int(k, v); }},
        {"backend", [&](auto&, auto& v) { c.backend = parse_backend(v); }},
    };

    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
        it->second(key, value);
    }

    if (model_name == "pcrtbp") {
        c.model.kind = ModelKind::Pcrtbp;
    } else if (model_name == "pertbp") {
        c.model.kind = ModelKind::Pertbp;
    } else {
        throw ConfigError("model must be pcrtbp or pertbp, got '" + model_name + "'");
    }
    if (c.seed_s.empty()) c.seed_s = c.seed_u;
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

std::string to_text(const PipelineConfig& c) {
    using io::format_double;
    std::ostringstream out;
    out << "model = " << (c.model.kind == ModelKind::Pcrtbp ? "pcrtbp" : "pertbp") << '\n'
        << "mu = " << format_double(c.model.mu) << '\n'
        << "eps = " << format_double(c.model.eps) << '\n'
        << "omega_p = " << format_double(c.model.omega_p) << '\n'
        << "abs_tol = " << format_double(c.flow.abs_tol) << '\n'
        << "rel_tol = " << format_double(c.flow.rel_tol) << '\n'
        << "seed_u = " << c.seed_u.string() << '\n'
        << "seed_s = " << c.seed_s.string() << '\n'
        << "n_u = " << c.n_u << '\n'
        << "n_s = " << c.n_s << '\n'
        << "continuation_steps = " << c.continuation_steps << '\n'
        << "order = " << c.order << '\n'
        << "k_half = " << c.k_half << '\n'
        << "n_max = " << c.n_max << '\n'
        << "s_max = " << format_double(c.s_max) << '\n'
        << "w1_scale = " << format_double(c.w1_scale) << '\n'
        << "include_core = " << (c.include_core ? "true" : "false") << '\n'
        << "tol_torus = " << format_double(c.tol_torus) << '\n'
        << "e_tol = " << format_double(c.e_tol) << '\n'
        << "tol_refine = " << format_double(c.tol_refine) << '\n'
        << "alpha = " << format_double(c.alpha) << '\n'
        << "max_iter = " << c.max_iter << '\n'
        << "backend = " << to_string(c.backend) << '\n';
    return out.str();
}

} // namespace hcx
