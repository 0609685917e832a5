#include "hcx/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace hcx::io {

namespace {

class BinaryWriter {
public:
    explicit BinaryWriter(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    }
    void magic(const char* m) { out_.write(m, 4); }
    template <class T>
    void put(T v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void doubles(const double* p, std::size_t n) {
        out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    }
    void close() {
        out_.close();
        if (!out_) throw IoError("write to " + path_.string() + " failed");
    }

private:
    fs::path path_;
    std::ofstream out_;
};

class BinaryReader {
public:
    explicit BinaryReader(const fs::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open " + path.string());
    }
    void expect_magic(const char* m) {
        char buf[4];
        read(buf, 4);
        if (std::memcmp(buf, m, 4) != 0) throw IoError(path_.string() + ": not a " + std::string(m, 4) + " file");
    }
    template <class T>
    T get() {
        T v;
        read(reinterpret_cast<char*>(&v), sizeof(T));
        return v;
    }
    void doubles(double* p, std::size_t n) { read(reinterpret_cast<char*>(p), n * sizeof(double)); }
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) throw IoError(path_.string() + ": trailing bytes");
    }

private:
    void read(char* p, std::size_t n) {
        in_.read(p, static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) throw IoError(path_.string() + ": truncated file");
    }
    fs::path path_;
    std::ifstream in_;
};

// Grid samples coordinate-major: all of component 0, then component 1, ...
void put_grid(BinaryWriter& w, const PeriodicGrid& g) {
    const Eigen::MatrixXd& v = g.values(); // column-major storage = coordinate-major
    w.doubles(v.data(), static_cast<std::size_t>(v.size()));
}

PeriodicGrid get_grid(BinaryReader& r, Eigen::Index n, Eigen::Index dim) {
    Eigen::MatrixXd v(n, dim);
    r.doubles(v.data(), static_cast<std::size_t>(v.size()));
    return PeriodicGrid(std::move(v));
}

ModelParams params_from(double mu, double eps, double omega_p) {
    ModelParams p = eps > 0.0 ? ModelParams::pertbp(mu, eps) : ModelParams::pcrtbp(mu);
    p.omega_p = omega_p;
    try {
        p.validate();
    } catch (const ConfigError& e) {
        throw IoError(std::string("stored model parameters are invalid: ") + e.what());
    }
    return p;
}

std::ofstream open_text(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

void close_text(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) throw IoError("write to " + path.string() + " failed");
}

// Data lines split into whitespace tokens; blank and '#' lines skipped.
std::vector<std::vector<std::string>> read_table(const fs::path& path, char sep = ' ') {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        if (sep != ' ') std::replace(line.begin(), line.end(), sep, ' ');
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        rows.push_back(std::move(tok));
    }
    return rows;
}

double to_double(const std::string& s, const fs::path& path) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw IoError(path.string() + ": bad number '" + s + "'");
    return v;
}

long long to_int(const std::string& s, const fs::path& path) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') throw IoError(path.string() + ": bad integer '" + s + "'");
    return v;
}

LayerSign to_sign(const std::string& s, const fs::path& path) {
    if (s.size() != 1) throw IoError(path.string() + ": bad layer sign '" + s + "'");
    try {
        return parse_layer_sign(s[0]);
    } catch (const ConfigError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void expect_columns(const std::vector<std::string>& row, std::size_t n, const fs::path& path) {
    if (row.size() != n) {
        std::ostringstream err;
        err << path.string() << ": expected " << n << " fields per line, found " << row.size();
        throw IoError(err.str());
    }
}

} // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_circle(const fs::path& path, const InvariantCircle& circle) {
    BinaryWriter w(path);
    w.magic("ICR1");
    w.put(static_cast<std::uint32_t>(circle.size()));
    w.put(circle.omega);
    put_grid(w, circle.K);
    w.put(circle.params.mu);
    w.put(circle.params.eps);
    w.close();
}

InvariantCircle read_circle(const fs::path& path) {
    BinaryReader r(path);
    r.expect_magic("ICR1");
    const auto n = r.get<std::uint32_t>();
    if (n < 4 || n % 2 != 0) throw IoError(path.string() + ": grid size must be even and at least 4");
    InvariantCircle c;
    c.omega = r.get<double>();
    c.K = get_grid(r, n, 4);
    const double mu = r.get<double>();
    const double eps = r.get<double>();
    r.expect_end();
    c.params = params_from(mu, eps, 1.0);
    return c;
}

void write_manifold(const fs::path& path, const FourierTaylorManifold& W) {
    BinaryWriter w(path);
    w.magic("FTM1");
    w.put(static_cast<std::uint32_t>(W.size()));
    w.put(static_cast<std::uint32_t>(W.order()));
    w.put(static_cast<std::uint8_t>(W.kind));
    for (double v : {W.omega, W.lambda, W.D, W.e_tol, W.scale, W.params.mu, W.params.eps, W.params.omega_p}) w.put(v);
    for (const auto& g : W.coeffs) put_grid(w, g);
    for (int k = 0; k <= W.order(); ++k) {
        const auto idx = static_cast<std::size_t>(k);
        w.put(idx < W.order_residuals.size() ? W.order_residuals[idx] : std::nan(""));
    }
    w.close();
}

FourierTaylorManifold read_manifold(const fs::path& path) {
    BinaryReader r(path);
    r.expect_magic("FTM1");
    const auto n = r.get<std::uint32_t>();
    const auto order = r.get<std::uint32_t>();
    const auto kind = r.get<std::uint8_t>();
    if (n < 4 || n % 2 != 0) throw IoError(path.string() + ": grid size must be even and at least 4");
    if (order < 1 || order > 1000) throw IoError(path.string() + ": implausible order");
    if (kind > 1) throw IoError(path.string() + ": bad manifold kind");
    FourierTaylorManifold W;
    W.kind = static_cast<ManifoldKind>(kind);
    W.omega = r.get<double>();
    W.lambda = r.get<double>();
    W.D = r.get<double>();
    W.e_tol = r.get<double>();
    W.scale = r.get<double>();
    const double mu = r.get<double>();
    const double eps = r.get<double>();
    const double omega_p = r.get<double>();
    for (std::uint32_t k = 0; k <= order; ++k) W.coeffs.push_back(get_grid(r, n, 4));
    W.order_residuals.resize(order + 1);
    r.doubles(W.order_residuals.data(), order + 1);
    r.expect_end();
    W.params = params_from(mu, eps, omega_p);
    return W;
}

void write_mesh(const fs::path& path, const ManifoldMesh& mesh) {
    BinaryWriter w(path);
    w.magic("MNF1");
    w.put(static_cast<std::uint32_t>(mesh.rows()));
    w.put(static_cast<std::uint32_t>(mesh.cols()));
    w.put(static_cast<std::uint8_t>(mesh.kind));
    w.put(mesh.omega);
    w.put(mesh.lambda);
    w.put(mesh.D);
    w.put(mesh.n_max);
    for (const auto& c : mesh.coords) w.doubles(c.data(), static_cast<std::size_t>(c.size()));
    w.doubles(mesh.s_values.data(), mesh.s_values.size());
    w.put(static_cast<std::uint32_t>(mesh.boundary_columns.size()));
    for (std::uint32_t b : mesh.boundary_columns) w.put(b);
    w.close();
}

ManifoldMesh read_mesh(const fs::path& path) {
    BinaryReader r(path);
    r.expect_magic("MNF1");
    const auto n = r.get<std::uint32_t>();
    const auto m = r.get<std::uint32_t>();
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) throw IoError(path.string() + ": bad manifold kind");
    if (n == 0 || m == 0) throw IoError(path.string() + ": empty mesh");
    ManifoldMesh mesh;
    mesh.kind = static_cast<ManifoldKind>(kind);
    mesh.omega = r.get<double>();
    mesh.lambda = r.get<double>();
    mesh.D = r.get<double>();
    mesh.n_max = r.get<std::uint32_t>();
    for (auto& c : mesh.coords) {
        c.resize(n, m);
        r.doubles(c.data(), static_cast<std::size_t>(c.size()));
    }
    mesh.s_values.resize(m);
    r.doubles(mesh.s_values.data(), m);
    const auto nb = r.get<std::uint32_t>();
    if (nb > m) throw IoError(path.string() + ": more boundary columns than columns");
    mesh.boundary_columns.resize(nb);
    for (auto& b : mesh.boundary_columns) {
        b = r.get<std::uint32_t>();
        if (b >= m) throw IoError(path.string() + ": boundary column out of range");
    }
    r.expect_end();
    return mesh;
}

void write_plan(const fs::path& path, const LayerPairPlan& plan) {
    auto out = open_text(path);
    for (const auto& t : plan.tasks) {
        out << t.n_u << ' ' << to_char(t.sign_u) << ' ' << t.n_s << ' ' << to_char(t.sign_s) << ' '
            << format_double(t.tof) << '\n';
    }
    close_text(out, path);
}

LayerPairPlan read_plan(const fs::path& path) {
    LayerPairPlan plan;
    for (const auto& row : read_table(path)) {
        expect_columns(row, 5, path);
        LayerTask t;
        t.n_u = static_cast<int>(to_int(row[0], path));
        t.sign_u = to_sign(row[1], path);
        t.n_s = static_cast<int>(to_int(row[2], path));
        t.sign_s = to_sign(row[3], path);
        t.tof = to_double(row[4], path);
        plan.tasks.push_back(t);
    }
    return plan;
}

void write_records(const fs::path& path, const std::vector<IntersectionRecord>& records) {
    auto out = open_text(path);
    for (const auto& r : records) {
        out << r.task.n_u << ' ' << to_char(r.task.sign_u) << ' ' << r.task.n_s << ' ' << to_char(r.task.sign_s)
            << ' ' << r.gid;
        for (int c = 0; c < 4; ++c) out << ' ' << format_double(r.point[c]);
        for (double v : {r.a, r.b, r.c, r.d, r.theta_u, r.s_u, r.theta_s, r.s_s}) out << ' ' << format_double(v);
        out << '\n';
    }
    close_text(out, path);
}

std::vector<IntersectionRecord> read_records(const fs::path& path, double omega_p) {
    std::vector<IntersectionRecord> out;
    for (const auto& row : read_table(path)) {
        expect_columns(row, 17, path);
        IntersectionRecord r;
        r.task.n_u = static_cast<int>(to_int(row[0], path));
        r.task.sign_u = to_sign(row[1], path);
        r.task.n_s = static_cast<int>(to_int(row[2], path));
        r.task.sign_s = to_sign(row[3], path);
        r.task.tof = layer_time_of_flight(r.task.n_u, r.task.n_s, omega_p);
        r.gid = static_cast<std::uint64_t>(to_int(row[4], path));
        for (int c = 0; c < 4; ++c) r.point[c] = to_double(row[static_cast<std::size_t>(5 + c)], path);
        double* fields[] = {&r.a, &r.b, &r.c, &r.d, &r.theta_u, &r.s_u, &r.theta_s, &r.s_s};
        for (std::size_t f = 0; f < 8; ++f) *fields[f] = to_double(row[9 + f], path);
        out.push_back(r);
    }
    return out;
}

void write_solutions(const fs::path& path, const std::vector<ConnectionSolution>& solutions,
                     const DedupSummary& dedup) {
    auto out = open_text(path);
    for (const auto& s : solutions) {
        for (double v : s.params) out << format_double(v) << ' ';
        for (int c = 0; c < 4; ++c) out << format_double(s.point[c]) << ' ';
        out << format_double(s.residual_norm) << ' ' << s.iterations << ' ' << to_string(s.status) << ' '
            << format_double(s.condition_estimate) << ' ' << s.m_u << ' ' << s.m_s << ' ' << format_double(s.tof)
            << '\n';
    }
    out << "# dedup total " << dedup.total << " converged " << dedup.converged << " unique " << dedup.unique.size()
        << '\n';
    for (std::size_t u : dedup.unique) {
        std::size_t members = 0;
        for (long r : dedup.representative) members += (r == static_cast<long>(u)) ? 1 : 0;
        out << "# connection " << u << " members " << members << '\n';
    }
    close_text(out, path);
}

std::vector<ConnectionSolution> read_solutions(const fs::path& path) {
    std::vector<ConnectionSolution> out;
    for (const auto& row : read_table(path)) {
        expect_columns(row, 15, path);
        ConnectionSolution s;
        for (std::size_t c = 0; c < 4; ++c) s.params[c] = to_double(row[c], path);
        for (int c = 0; c < 4; ++c) s.point[c] = to_double(row[static_cast<std::size_t>(4 + c)], path);
        s.residual_norm = to_double(row[8], path);
        s.iterations = static_cast<int>(to_int(row[9], path));
        const std::string& st = row[10];
        s.status = st == "converged"  ? RefineStatus::Converged
                   : st == "max_iter" ? RefineStatus::MaxIter
                   : st == "singular" ? RefineStatus::Singular
                   : st == "failed"   ? RefineStatus::Failed
                                      : throw IoError(path.string() + ": unknown status '" + st + "'");
        s.condition_estimate = to_double(row[11], path);
        s.m_u = static_cast<int>(to_int(row[12], path));
        s.m_s = static_cast<int>(to_int(row[13], path));
        s.tof = to_double(row[14], path);
        out.push_back(std::move(s));
    }
    return out;
}

Projection parse_projection(const std::string& name) {
    if (name == "xypx" || name == "x,y,px") return Projection::XYPx;
    if (name == "xypy" || name == "x,y,py") return Projection::XYPy;
    throw ConfigError("projection must be xypx or xypy, got '" + name + "'");
}

void export_mesh_csv(const fs::path& path, const ManifoldMesh& mesh, Projection projection) {
    auto out = open_text(path);
    const int third = projection == Projection::XYPx ? 2 : 3;
    out << "i,k,x,y," << (third == 2 ? "px" : "py") << '\n';
    for (Eigen::Index k = 0; k < mesh.cols(); ++k) {
        for (Eigen::Index i = 0; i < mesh.rows(); ++i) {
            out << i << ',' << k << ',' << format_double(mesh.coords[0](i, k)) << ','
                << format_double(mesh.coords[1](i, k)) << ',' << format_double(mesh.coords[third](i, k)) << '\n';
        }
    }
    close_text(out, path);
}

void export_records_csv(const fs::path& path, const std::vector<IntersectionRecord>& records,
                        Projection projection) {
    auto out = open_text(path);
    const int third = projection == Projection::XYPx ? 2 : 3;
    out << "n1,sign1,n2,sign2,gid,x,y," << (third == 2 ? "px" : "py") << '\n';
    for (const auto& r : records) {
        out << r.task.n_u << ',' << to_char(r.task.sign_u) << ',' << r.task.n_s << ',' << to_char(r.task.sign_s)
            << ',' << r.gid << ',' << format_double(r.point[0]) << ',' << format_double(r.point[1]) << ','
            << format_double(r.point[third]) << '\n';
    }
    close_text(out, path);
}

Seed read_seed(const fs::path& path) {
    const auto rows = read_table(path);
    if (rows.size() != 1) throw IoError(path.string() + ": expected one line `x y px py period`");
    expect_columns(rows[0], 5, path);
    Seed s;
    for (int c = 0; c < 4; ++c) s.state[c] = to_double(rows[0][static_cast<std::size_t>(c)], path);
    s.period = to_double(rows[0][4], path);
    if (!(s.period > 0.0)) throw IoError(path.string() + ": period must be positive");
    return s;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("SHA-256 init failed");
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static const char* hex = "0123456789abcdef";
    std::string outs;
    for (unsigned int i = 0; i < len; ++i) {
        outs.push_back(hex[md[i] >> 4]);
        outs.push_back(hex[md[i] & 15]);
    }
    return outs;
}

std::size_t count_data_lines(const fs::path& path) {
    return read_table(path).size();
}

} // namespace hcx::io
