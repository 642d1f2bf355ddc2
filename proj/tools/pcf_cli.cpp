#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcf/besov.hpp"
#include "pcf/cells.hpp"
#include "pcf/critical.hpp"
#include "pcf/descriptor.hpp"
#include "pcf/errors.hpp"
#include "pcf/function.hpp"
#include "pcf/graph.hpp"
#include "pcf/harmonic.hpp"
#include "pcf/io.hpp"
#include "pcf/resistance.hpp"
#include "pcf/spectral.hpp"

#ifndef PCF_VERSION
#define PCF_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace pcf;

namespace {

class BudgetError : public Error {
public:
    using Error::Error;
};

struct Config {
    std::string preset;
    std::string descriptor_path;
    std::string out;
    std::string cache_dir;
    std::size_t budget_cells = BuildOptions{}.max_cells;
    std::size_t budget_vertices = BuildOptions{}.max_vertices;
    int level = 4;
    int levels = -1;
    std::string p = "2";
    std::string q = "2";
    double sigma = 0.5;
    std::uint64_t seed = 7;
    std::string method = "haar";
    std::string function_path;
    std::optional<double> constant;
    std::vector<double> boundary;
    double pmin = 1.0;
    double pmax = 8.0;
    int pcount = 15;
    std::vector<double> pextra;
    int dirs = 50;
    std::size_t count = 0;
    bool values_only = false;
    std::size_t n = 40;
    std::string family = "random-tent";
    int heat_k = 0;
    std::int64_t x = -1;
    std::int64_t y = -1;
    std::size_t pairs = 0;
    std::vector<std::string> argv;
};

double parse_exponent(const std::string& s, const char* what) {
    if (s == "inf" || s == "infinity") return INFINITY;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw SchemaError(std::string("bad value for ") + what + ": '" + s + "'");
    }
}

std::string hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Writes to a sibling temporary and renames it into place.
void write_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write " + tmp.string());
        out << bytes;
        if (!out) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ordered_json number(double x) {
    if (std::isfinite(x)) return x;
    return csv_number(x);
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), j.empty() ? 0 : static_cast<Eigen::Index>(j[0].size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    return m;
}

/// Level caches keyed by the descriptor's content hash. Disabled when no root is set.
class Cache {
public:
    Cache(const std::string& root, const FractalDescriptor& desc) {
        if (!root.empty()) dir_ = fs::path(root) / hex(content_hash(desc));
    }

    bool enabled() const { return !dir_.empty(); }

    HarmonicStructure harmonic(const FractalDescriptor& desc) {
        const fs::path file = dir_ / "harmonic.json";
        if (enabled() && fs::exists(file)) {
            try {
                return load_harmonic(desc, nlohmann::json::parse(read_file(file)));
            } catch (const nlohmann::json::exception&) {
                // Unreadable entry: rebuild below and overwrite it.
            }
        }
        auto hs = derive_extension(desc);
        if (enabled()) {
            write_atomic(dir_ / "descriptor.json", to_json(desc));
            write_atomic(file, harmonic_json(hs).dump());
        }
        return hs;
    }

    SpectralData spectrum(const HarmonicStructure& hs, const Hierarchy& h, int m, std::size_t count,
                          const EigOptions& opts) {
        const fs::path file = dir_ / ("spectrum-m" + std::to_string(m) + "-n" + std::to_string(count) +
                                      (opts.values_only ? "-values" : "-pairs") + ".bin");
        if (enabled() && fs::exists(file)) {
            if (auto s = load_spectrum(file, m)) return *s;
        }
        auto spec = neumann_eigs(hs, h, m, count, opts);
        if (enabled()) write_atomic(file, spectrum_bytes(spec));
        return spec;
    }

private:
    static ordered_json harmonic_json(const HarmonicStructure& hs) {
        ordered_json j;
        j["mu"] = hs.mu;
        ordered_json ext = ordered_json::array();
        for (const auto& a : hs.extension) ext.push_back(matrix_json(a));
        j["extension"] = ext;
        j["alpha"] = std::vector<double>(hs.alpha.data(), hs.alpha.data() + hs.alpha.size());
        j["gram"] = matrix_json(hs.gram);
        j["boundary_fill"] = matrix_json(hs.boundary_fill);
        j["trace_residual"] = hs.trace_residual;
        j["boundary_trace_residual"] = hs.boundary_trace_residual;
        return j;
    }

    static HarmonicStructure load_harmonic(const FractalDescriptor& desc, const nlohmann::json& j) {
        HarmonicStructure hs;
        hs.descriptor = desc;
        hs.dims = dims(desc);
        hs.mu = j.at("mu").get<std::vector<double>>();
        for (const auto& a : j.at("extension")) hs.extension.push_back(matrix_from(a));
        const auto alpha = j.at("alpha").get<std::vector<double>>();
        hs.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
        hs.gram = matrix_from(j.at("gram"));
        hs.boundary_fill = matrix_from(j.at("boundary_fill"));
        hs.trace_residual = j.at("trace_residual");
        hs.boundary_trace_residual = j.at("boundary_trace_residual");
        return hs;
    }

    template <class T>
    static void put(std::string& s, const T& v) {
        s.append(reinterpret_cast<const char*>(&v), sizeof v);
    }

    static std::string spectrum_bytes(const SpectralData& s) {
        std::string b;
        put(b, static_cast<std::int64_t>(s.mass.size()));
        put(b, static_cast<std::int64_t>(s.values.size()));
        put(b, static_cast<std::int64_t>(s.vectors.cols()));
        put(b, static_cast<std::uint8_t>(s.complete));
        b.append(reinterpret_cast<const char*>(s.mass.data()), sizeof(double) * static_cast<std::size_t>(s.mass.size()));
        b.append(reinterpret_cast<const char*>(s.values.data()),
                 sizeof(double) * static_cast<std::size_t>(s.values.size()));
        b.append(reinterpret_cast<const char*>(s.vectors.data()),
                 sizeof(double) * static_cast<std::size_t>(s.vectors.size()));
        return b;
    }

    static std::optional<SpectralData> load_spectrum(const fs::path& file, int m) {
        const std::string b = read_file(file);
        std::size_t at = 0;
        auto get = [&](void* dst, std::size_t n) {
            if (at + n > b.size()) return false;
            std::memcpy(dst, b.data() + at, n);
            at += n;
            return true;
        };
        std::int64_t n = 0, k = 0, cols = 0;
        std::uint8_t complete = 0;
        if (!get(&n, 8) || !get(&k, 8) || !get(&cols, 8) || !get(&complete, 1)) return std::nullopt;
        SpectralData s;
        s.level = m;
        s.complete = complete != 0;
        s.mass.resize(n);
        s.values.resize(k);
        s.vectors.resize(cols > 0 ? n : 0, cols);
        if (!get(s.mass.data(), 8 * static_cast<std::size_t>(n)) || !get(s.values.data(), 8 * static_cast<std::size_t>(k)) ||
            !get(s.vectors.data(), 8 * static_cast<std::size_t>(s.vectors.size())) || at != b.size())
            return std::nullopt;
        return s;
    }

    fs::path dir_;
};

struct Context {
    const Config& cfg;
    std::string command;
    FractalDescriptor desc;
    BuildOptions build;
    Cache cache;
    std::vector<std::string> artifacts;
    bool stochastic = false;

    Context(const Config& c, std::string cmd, FractalDescriptor d)
        : cfg(c), command(std::move(cmd)), desc(std::move(d)), cache(c.cache_dir, desc) {
        build.max_cells = c.budget_cells;
        build.max_vertices = c.budget_vertices;
    }

    std::string source_name() const { return cfg.preset.empty() ? desc.name : cfg.preset; }

    Hierarchy hierarchy(int m) const {
        if (m < 0) throw SchemaError("level must be non-negative");
        try {
            return Hierarchy(desc, m, build);
        } catch (const LevelTooLarge& e) {
            throw BudgetError(e.what());
        }
    }

    void emit(const fs::path& path, const std::string& bytes) {
        write_atomic(path, bytes);
        artifacts.push_back(path.string());
    }

    std::string require_out() const {
        if (cfg.out.empty()) throw SchemaError(command + " needs --out");
        return cfg.out;
    }
};

FractalDescriptor load_input(const Config& cfg) {
    if (cfg.preset.empty() == cfg.descriptor_path.empty())
        throw SchemaError("exactly one of --preset and --descriptor is required");
    if (!cfg.preset.empty()) return preset(cfg.preset);
    return load_descriptor_file(cfg.descriptor_path);
}

std::string csv_list(const std::vector<std::pair<std::string, double>>& row) {
    std::string s;
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + csv_number(row[i].second);
    return s;
}

// ---- commands ----

void cmd_info(Context& ctx) {
    const auto hs = ctx.cache.harmonic(ctx.desc);
    const auto& d = hs.dims;
    ordered_json j;
    j["name"] = ctx.desc.name;
    j["branches"] = ctx.desc.branches;
    j["prototype_vertices"] = ctx.desc.prototype_size;
    j["boundary"] = ctx.desc.boundary;
    j["interior"] = ctx.desc.interior();
    j["r"] = ctx.desc.r;
    j["base_scale"] = ctx.desc.min_r();
    j["d_H"] = d.hausdorff;
    j["d_W"] = d.walk;
    j["d_S"] = d.spectral;
    j["trace_residual"] = hs.trace_residual;
    j["boundary_trace_residual"] = hs.boundary_trace_residual;
    j["alpha"] = std::vector<double>(hs.alpha.data(), hs.alpha.data() + hs.alpha.size());
    j["content_hash"] = hex(content_hash(ctx.desc));
    std::printf("%s: N=%d, |V0|=%d, r=%.17g\n", ctx.desc.name.c_str(), ctx.desc.branches, ctx.desc.prototype_size,
                ctx.desc.min_r());
    std::printf("d_H=%.17g\nd_W=%.17g\nd_S=%.17g\n", d.hausdorff, d.walk, d.spectral);
    std::printf("trace residual=%.3e (boundary %.3e)\n", hs.trace_residual, hs.boundary_trace_residual);
    if (!ctx.cfg.out.empty()) ctx.emit(ctx.cfg.out, j.dump(2) + "\n");
}

void cmd_partition(Context& ctx) {
    const auto part = [&] {
        try {
            return build_partition(ctx.desc, ctx.cfg.level, ctx.build);
        } catch (const LevelTooLarge& e) {
            throw BudgetError(e.what());
        }
    }();
    std::string s = "index,word,r_w,mu_w\n";
    for (std::size_t i = 0; i < part.words.size(); ++i)
        s += std::to_string(i) + "," + format_word(part.words[i]) + "," +
             csv_number(word_resistance(ctx.desc, part.words[i])) + "," + csv_number(part.mu[i]) + "\n";
    ctx.emit(ctx.require_out(), s);
    std::printf("|Lambda_%d| = %zu\n", ctx.cfg.level, part.words.size());
}

void cmd_laplacian(Context& ctx) {
    const auto h = ctx.hierarchy(ctx.cfg.level);
    const auto op = assemble_graph_laplacian(h, ctx.cfg.level);
    std::ostringstream mtx, ids;
    write_matrix_market(mtx, op);
    write_id_map(ids, h.table(ctx.cfg.level));
    const std::string out = ctx.require_out();
    ctx.emit(out, mtx.str());
    ctx.emit(out + ".ids.csv", ids.str());
    std::printf("%ld vertices\n", static_cast<long>(op.size()));
}

void cmd_extend(Context& ctx) {
    const auto hs = ctx.cache.harmonic(ctx.desc);
    if (ctx.cfg.boundary.size() != ctx.desc.boundary.size())
        throw SchemaError("--boundary needs " + std::to_string(ctx.desc.boundary.size()) + " values");
    const auto h = ctx.hierarchy(ctx.cfg.level);
    Eigen::VectorXd b(static_cast<Eigen::Index>(ctx.cfg.boundary.size()));
    for (std::size_t i = 0; i < ctx.cfg.boundary.size(); ++i) b(static_cast<Eigen::Index>(i)) = ctx.cfg.boundary[i];
    const auto f = harmonic_extend(hs, h, b, ctx.cfg.level);
    std::ostringstream s;
    write_vertex_function(s, ctx.source_name(), f);
    ctx.emit(ctx.require_out(), s.str());
    std::printf("E_%d = %.17g, E_0 = %.17g\n", ctx.cfg.level, energy(h, f), prototype_energy(ctx.desc, hs.fill(b)));
}

void cmd_resistance(Context& ctx) {
    const int m = ctx.cfg.level;
    const auto h = ctx.hierarchy(m);
    const auto n = h.table(m).vertex_count;
    const ResistanceSolver solver(assemble_graph_laplacian(h, m));
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    if (ctx.cfg.x >= 0 || ctx.cfg.y >= 0) {
        if (ctx.cfg.x < 0 || ctx.cfg.y < 0 || static_cast<std::size_t>(ctx.cfg.x) >= n ||
            static_cast<std::size_t>(ctx.cfg.y) >= n)
            throw SchemaError("--x and --y must both be vertex ids below " + std::to_string(n));
        pairs.emplace_back(static_cast<std::uint32_t>(ctx.cfg.x), static_cast<std::uint32_t>(ctx.cfg.y));
    } else {
        if (ctx.cfg.pairs == 0) throw SchemaError("resistance needs --x/--y or --pairs");
        ctx.stochastic = true;
        std::mt19937_64 rng(ctx.cfg.seed);
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
        for (std::size_t i = 0; i < ctx.cfg.pairs; ++i) {
            const auto a = pick(rng);
            const auto b = pick(rng);
            pairs.emplace_back(a, b);
        }
    }
    std::string s = "x,y,R\n";
    for (const auto& [a, b] : pairs) s += std::to_string(a) + "," + std::to_string(b) + "," + csv_number(solver.resistance(a, b)) + "\n";
    if (ctx.cfg.out.empty())
        std::fputs(s.c_str(), stdout);
    else
        ctx.emit(ctx.cfg.out, s);
}

VertexFunction input_function(Context& ctx, const HarmonicStructure& hs, const Hierarchy& h, double sigma) {
    const int m = ctx.cfg.level;
    if (!ctx.cfg.function_path.empty()) {
        std::istringstream in(read_file(ctx.cfg.function_path));
        auto f = read_vertex_function(in);
        if (f.level > h.max_level() ||
            static_cast<std::size_t>(f.values.size()) != h.table(f.level).vertex_count)
            throw DimensionMismatch("function does not match the vertex table of its level");
        return f;
    }
    if (ctx.cfg.constant) {
        VertexFunction f{m, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(h.table(m).vertex_count), *ctx.cfg.constant)};
        return f;
    }
    ctx.stochastic = true;
    return tent_family(hs, h, m, sigma, 1, ctx.cfg.seed)[0];
}

void cmd_besov(Context& ctx) {
    const double p = parse_exponent(ctx.cfg.p, "--p");
    const double q = parse_exponent(ctx.cfg.q, "--q");
    const double sigma = ctx.cfg.sigma;
    const int top = ctx.cfg.levels >= 0 ? ctx.cfg.levels : ctx.cfg.level;
    const auto hs = ctx.cache.harmonic(ctx.desc);
    const auto h = ctx.hierarchy(std::max(ctx.cfg.level, top));
    auto f = input_function(ctx, hs, h, sigma);
    if (f.level < top) f = refine(hs, h, f, top);
    NormOptions opts;
    opts.max_level = top;
    SeminormReport rep;
    const auto& method = ctx.cfg.method;
    if (method == "haar") {
        rep = lambda_norm_haar(hs, h, to_piecewise(h, f), p, q, sigma, opts);
    } else if (method == "graph") {
        rep = lambda_norm_graph(hs, h, f, p, q, sigma, opts);
    } else if (method == "tent") {
        rep = lambda_norm_tent(hs, h, tent_interpolation(hs, h, f), p, q, sigma, opts);
    } else if (method == "direct") {
        const IpQuadrature quad(hs, h, f.level);
        rep = lambda_norm_direct(hs, h, quad, to_piecewise(h, f), p, q, sigma, opts);
    } else {
        throw SchemaError("unknown method '" + method + "'");
    }
    // Haar and tent carry E[f] and f_0 at level 0; count that level with the L^p part.
    const bool zeroth = method == "haar" || method == "tent";
    std::vector<double> c;
    for (const auto& l : rep.levels)
        if (!zeroth || l.level > 0) c.push_back(l.contribution);
    const double semi = lq_aggregate(c, q);
    const double lp = lp_norm(hs, h, to_piecewise(h, f), p).value;
    ordered_json j;
    j["report"] = nlohmann::ordered_json::parse(report_json(rep));
    j["lp_norm"] = number(lp);
    j["seminorm"] = number(semi);
    j["norm"] = number(lp + semi);
    j["level_zero_in_seminorm"] = !zeroth;
    j["function"] = ctx.cfg.function_path.empty() ? (ctx.cfg.constant ? "constant" : "random-tent") : ctx.cfg.function_path;
    const std::string text = j.dump(2) + "\n";
    std::printf("seminorm=%s norm=%s\n", csv_number(semi).c_str(), csv_number(lp + semi).c_str());
    if (!ctx.cfg.out.empty()) ctx.emit(ctx.cfg.out, text);
}

std::vector<double> p_values(const Config& cfg) {
    if (cfg.pmin < 1.0 || cfg.pmax > 64.0 || cfg.pmin > cfg.pmax || cfg.pcount < 1)
        throw SchemaError("p grid must lie in [1, 64]");
    return p_grid(cfg.pmin, cfg.pmax, cfg.pcount, cfg.pextra);
}

void cmd_critical(Context& ctx) {
    ctx.stochastic = true;
    const auto hs = ctx.cache.harmonic(ctx.desc);
    const int levels = ctx.cfg.levels >= 0 ? ctx.cfg.levels : 7;
    if (levels < 4) throw SchemaError("--levels must be at least 4");
    const auto ps = p_values(ctx.cfg);
    const auto curve = critical_curve(hs, ps, levels, ctx.cfg.seed, ctx.cfg.dirs);
    ctx.emit(ctx.require_out(), curve_csv(curve));
    const auto rep = bounds_check(curve);
    for (const auto& c : rep.checks) std::printf("%-24s %s %s\n", c.name.c_str(), c.passed ? "ok" : "VIOLATED", c.detail.c_str());
}

void cmd_regions(Context& ctx) {
    ctx.stochastic = true;
    const auto hs = ctx.cache.harmonic(ctx.desc);
    const int levels = ctx.cfg.levels >= 0 ? ctx.cfg.levels : 7;
    if (levels < 4) throw SchemaError("--levels must be at least 4");
    const auto ps = p_values(ctx.cfg);
    const auto curve = critical_curve(hs, ps, levels, ctx.cfg.seed, ctx.cfg.dirs);
    std::vector<double> c;
    for (const auto& pt : curve.points) c.push_back(pt.c_hat);
    std::string s = "inv_p,L1,L2,C_hat,C_lower,C_upper\n";
    for (const auto& r : region_curves(hs.dims, ps, c))
        s += csv_list({{"", r.inv_p}, {"", r.l1}, {"", r.l2}, {"", r.c_hat}, {"", r.c_lower}, {"", r.c_upper}}) + "\n";
    ctx.emit(ctx.require_out(), s);
}

void cmd_spectrum(Context& ctx) {
    const auto hs = ctx.cache.harmonic(ctx.desc);
    const auto h = ctx.hierarchy(ctx.cfg.level);
    EigOptions opts;
    opts.values_only = ctx.cfg.values_only;
    const auto spec = ctx.cache.spectrum(hs, h, ctx.cfg.level, ctx.cfg.count, opts);
    std::string s = "k,lambda\n";
    for (Eigen::Index k = 0; k < spec.values.size(); ++k) s += std::to_string(k) + "," + csv_number(spec.values(k)) + "\n";
    ctx.emit(ctx.require_out(), s);
    if (spec.values.size() > 2) {
        const auto w = weyl_slope(spec.values);
        std::printf("%ld eigenvalues; Weyl slope %.6f (d_S/2 = %.6f)\n", static_cast<long>(spec.values.size()), w.slope,
                    hs.dims.spectral / 2);
    }
}

void cmd_equivalence(Context& ctx) {
    ctx.stochastic = true;
    const double p = parse_exponent(ctx.cfg.p, "--p");
    const double q = parse_exponent(ctx.cfg.q, "--q");
    Family fam;
    if (ctx.cfg.family == "random-tent")
        fam = Family::RandomTent;
    else if (ctx.cfg.family == "harmonic")
        fam = Family::Harmonic;
    else if (ctx.cfg.family == "near-harmonic")
        fam = Family::NearHarmonic;
    else
        throw SchemaError("unknown family '" + ctx.cfg.family + "'");
    const auto hs = ctx.cache.harmonic(ctx.desc);
    const auto h = ctx.hierarchy(ctx.cfg.level);
    EquivalenceOptions opts;
    opts.heat.k = ctx.cfg.heat_k;
    const auto rep =
        equivalence_experiment(hs, h, p, q, ctx.cfg.sigma, ctx.cfg.level, ctx.cfg.n, ctx.cfg.seed, fam, opts);
    ctx.emit(ctx.require_out(), equivalence_json(rep));
    std::printf("region %s, Lambda via %s, spread %.6g\n", rep.region.c_str(), rep.lambda_method.c_str(), rep.spread);
    for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

void write_manifest(const Context& ctx, double seconds) {
    for (const auto& a : ctx.artifacts) {
        ordered_json m;
        m["artifact"] = fs::path(a).filename().string();
        m["command"] = ctx.command;
        m["argv"] = ctx.cfg.argv;
        ordered_json in;
        if (!ctx.cfg.preset.empty()) in["preset"] = ctx.cfg.preset;
        if (!ctx.cfg.descriptor_path.empty()) in["descriptor_path"] = ctx.cfg.descriptor_path;
        in["descriptor_hash"] = hex(content_hash(ctx.desc));
        in["descriptor"] = nlohmann::ordered_json::parse(to_json(ctx.desc));
        if (!ctx.cfg.function_path.empty()) in["function_path"] = ctx.cfg.function_path;
        m["inputs"] = in;
        m["version"] = PCF_VERSION;
        m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                     std::to_string(EIGEN_MINOR_VERSION);
        if (ctx.stochastic) m["seed"] = ctx.cfg.seed;
        m["wall_time_seconds"] = seconds;
        write_atomic(a + ".manifest.json", m.dump(2) + "\n");
    }
}

} // namespace

int main(int argc, char** argv) {
    Config cfg;
    for (int i = 0; i < argc; ++i) cfg.argv.emplace_back(argv[i]);
    if (const char* env = std::getenv("PCF_CACHE_DIR")) cfg.cache_dir = env;

    CLI::App app{"Function spaces on p.c.f. self-similar sets"};
    app.require_subcommand(1);
    app.set_version_flag("--version", PCF_VERSION);

    auto common = [&](CLI::App* sub) {
        auto* pr = sub->add_option("--preset", cfg.preset, "interval, sg, vicsek or vicsek2k1:<k>");
        auto* de = sub->add_option("--descriptor", cfg.descriptor_path, "fractal descriptor JSON");
        pr->excludes(de);
        sub->add_option("--out", cfg.out, "output path");
        sub->add_option("--cache-dir", cfg.cache_dir, "cache root (default $PCF_CACHE_DIR)");
        sub->add_option("--budget-cells", cfg.budget_cells, "largest |Lambda_m| allowed");
        sub->add_option("--budget-vertices", cfg.budget_vertices, "largest |V_m| allowed");
    };
    auto level = [&](CLI::App* sub) { sub->add_option("--level", cfg.level, "level m")->check(CLI::NonNegativeNumber); };
    auto grid = [&](CLI::App* sub) {
        sub->add_option("--pmin", cfg.pmin);
        sub->add_option("--pmax", cfg.pmax);
        sub->add_option("--pcount", cfg.pcount);
        sub->add_option("--pextra", cfg.pextra, "extra p values")->delimiter(',');
        sub->add_option("--levels", cfg.levels, "finest level M of the edge sums");
        sub->add_option("--seed", cfg.seed);
        sub->add_option("--directions", cfg.dirs, "random harmonic directions");
    };

    auto* info = app.add_subcommand("info", "dimensions and harmonic-structure checks");
    common(info);
    auto* partition = app.add_subcommand("partition", "cells of Lambda_m");
    common(partition);
    level(partition);
    auto* laplacian = app.add_subcommand("laplacian", "graph Laplacian (Matrix Market) with id map");
    common(laplacian);
    level(laplacian);
    auto* extend = app.add_subcommand("extend", "harmonic extension of boundary data");
    common(extend);
    level(extend);
    extend->add_option("--boundary", cfg.boundary, "boundary values")->delimiter(',')->required();
    auto* resistance = app.add_subcommand("resistance", "effective resistances");
    common(resistance);
    level(resistance);
    resistance->add_option("--x", cfg.x);
    resistance->add_option("--y", cfg.y);
    resistance->add_option("--pairs", cfg.pairs, "random vertex pairs");
    resistance->add_option("--seed", cfg.seed);
    auto* besov = app.add_subcommand("besov-norm", "discrete Lambda^{p,q}_sigma norm");
    common(besov);
    level(besov);
    besov->add_option("--p", cfg.p);
    besov->add_option("--q", cfg.q);
    besov->add_option("--sigma", cfg.sigma);
    besov->add_option("--method", cfg.method)->check(CLI::IsMember({"haar", "graph", "tent", "direct"}));
    besov->add_option("--levels", cfg.levels, "finest level M (default --level)");
    besov->add_option("--seed", cfg.seed);
    auto* fn = besov->add_option("--function", cfg.function_path, "vertex function file");
    besov->add_option("--constant", cfg.constant, "constant function")->excludes(fn);
    auto* regions = app.add_subcommand("regions", "critical lines and estimated C(p)");
    common(regions);
    grid(regions);
    auto* critical = app.add_subcommand("critical-curve", "estimate of C(p)");
    common(critical);
    grid(critical);
    auto* spectrum = app.add_subcommand("spectrum", "Neumann eigenvalues of the lumped problem");
    common(spectrum);
    level(spectrum);
    spectrum->add_option("--count", cfg.count, "number of eigenvalues (0: all)");
    spectrum->add_flag("--values-only", cfg.values_only);
    auto* equivalence = app.add_subcommand("equivalence", "heat-side versus Lambda-side ratios");
    common(equivalence);
    level(equivalence);
    equivalence->add_option("--p", cfg.p);
    equivalence->add_option("--q", cfg.q);
    equivalence->add_option("--sigma", cfg.sigma);
    equivalence->add_option("--n", cfg.n, "number of functions");
    equivalence->add_option("--seed", cfg.seed);
    equivalence->add_option("--heat-k", cfg.heat_k, "power of t Delta (0: smallest above sigma/2)");
    equivalence->add_option("--family", cfg.family)->check(CLI::IsMember({"random-tent", "harmonic", "near-harmonic"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        CLI::App* sub = app.get_subcommands().front();
        Context ctx(cfg, sub->get_name(), load_input(cfg));
        const std::string& c = ctx.command;
        if (c == "info") cmd_info(ctx);
        else if (c == "partition") cmd_partition(ctx);
        else if (c == "laplacian") cmd_laplacian(ctx);
        else if (c == "extend") cmd_extend(ctx);
        else if (c == "resistance") cmd_resistance(ctx);
        else if (c == "besov-norm") cmd_besov(ctx);
        else if (c == "regions") cmd_regions(ctx);
        else if (c == "critical-curve") cmd_critical(ctx);
        else if (c == "spectrum") cmd_spectrum(ctx);
        else if (c == "equivalence") cmd_equivalence(ctx);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(ctx, seconds);
        return 0;
    } catch (const BudgetError& e) {
        std::fprintf(stderr, "budget exceeded: %s\n", e.what());
        return 3;
    } catch (const LevelTooLarge& e) {
        std::fprintf(stderr, "budget exceeded: %s\n", e.what());
        return 3;
    } catch (const SolverFailure& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 4;
    } catch (const FixedPointDivergence& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 4;
    } catch (const Error& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
