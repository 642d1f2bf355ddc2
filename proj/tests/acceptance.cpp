// Acceptance run: one PASS/FAIL line per criterion, with wall time against its limit.
// Optional argument: directory that receives the generated artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pcf/besov.hpp"
#include "pcf/cells.hpp"
#include "pcf/critical.hpp"
#include "pcf/descriptor.hpp"
#include "pcf/function.hpp"
#include "pcf/graph.hpp"
#include "pcf/harmonic.hpp"
#include "pcf/io.hpp"
#include "pcf/resistance.hpp"
#include "pcf/spectral.hpp"

using namespace pcf;

namespace {

struct Outcome {
    bool passed = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            passed = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

const std::vector<std::string> kPresets{"interval", "sg", "vicsek"};

Eigen::VectorXd random_vector(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = g(rng);
    return v;
}

// ---- artifacts shared with the reproducibility check ----

std::vector<double> curve_grid() {
    const std::vector<double> extra{2.0, 16.0, 64.0};
    return p_grid(1.0, 8.0, 15, extra);
}

CurveEstimate curve_for(const std::string& name, int levels) {
    const auto ps = curve_grid();
    return critical_curve(derive_extension(preset(name)), ps, levels, 7);
}

int curve_levels(const std::string& name) {
    if (name == "interval") return 8;
    if (name == "vicsek") return 7;
    return 8;
}

struct HaarDirect {
    std::map<int, std::vector<double>> ratios; // by M
    std::vector<double> graph_tent;
    std::string csv;
};

double spread(const std::vector<double>& r) {
    const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
    return *hi / *lo;
}

HaarDirect characterisation_run() {
    HaarDirect out;
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 6);
    std::mt19937_64 rng(11);
    std::vector<PiecewiseHarmonic> fs;
    for (int i = 0; i < 30; ++i) fs.push_back(piecewise_constant(h, 5, random_vector(rng, h.table(5).cell_count())));
    std::ostringstream csv;
    csv << "M,index,haar,direct,ratio\n";
    for (int m : {4, 5, 6}) {
        const IpQuadrature quad(hs, h, std::max(5, m));
        NormOptions opts;
        opts.max_level = m;
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const auto haar = lp_norm(hs, h, fs[i], 2.0).value +
                              lambda_norm_haar(hs, h, fs[i], 2.0, INFINITY, 0.3, opts).seminorm;
            const auto direct = lambda_norm_direct(hs, h, quad, fs[i], 2.0, INFINITY, 0.3, opts).value;
            out.ratios[m].push_back(haar / direct);
            csv << m << ',' << i << ',' << csv_number(haar) << ',' << csv_number(direct) << ','
                << csv_number(haar / direct) << '\n';
        }
    }
    NormOptions opts;
    opts.max_level = 5;
    csv << "index,graph,tent,ratio\n";
    const auto samples = tent_family(hs, h, 5, 0.9, 30, 13);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double g = lambda_norm_graph(hs, h, samples[i], 2.0, 2.0, 0.9, opts).value;
        const double t = lambda_norm_tent(hs, h, tent_interpolation(hs, h, samples[i]), 2.0, 2.0, 0.9, opts).value;
        out.graph_tent.push_back(g / t);
        csv << i << ',' << csv_number(g) << ',' << csv_number(t) << ',' << csv_number(g / t) << '\n';
    }
    out.csv = csv.str();
    return out;
}

struct HeatEvidence {
    std::vector<EquivalenceReport> reports; // (sigma 0.5, m 5), (0.5, 6), (0.9, 5), (0.9, 6)
    DivergenceDiagnostic diagnostic;
    std::string json;
};

HeatEvidence heat_run() {
    HeatEvidence out;
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 6);
    for (double sigma : {0.5, 0.9})
        for (int m : {5, 6}) {
            out.reports.push_back(equivalence_experiment(hs, h, 2.0, 2.0, sigma, m, 40, 7));
            out.json += equivalence_json(out.reports.back()) + "\n";
        }
    out.diagnostic = divergence_diagnostic(hs, h, 2.0, 1.2, {4, 5, 6}, 7);
    for (double g : out.diagnostic.lambda_growth) out.json += csv_number(g) + "\n";
    for (double v : out.diagnostic.heat_values) out.json += csv_number(v) + "\n";
    return out;
}

// ---- state carried between criteria ----

std::map<std::string, CurveEstimate> g_curves;
HaarDirect g_char;
HeatEvidence g_heat;
std::filesystem::path g_out;

void save(const std::string& name, const std::string& bytes) {
    if (g_out.empty()) return;
    std::ofstream(g_out / name, std::ios::binary) << bytes;
}

// ---- criteria ----

Outcome dimensions_check() {
    Outcome o;
    const auto iv = dims(preset("interval"));
    o.require(std::abs(iv.hausdorff - 1) <= 1e-9 && std::abs(iv.walk - 2) <= 1e-9 && std::abs(iv.spectral - 1) <= 1e-9,
              "interval dimensions");
    const auto vk = dims(preset("vicsek"));
    o.require(std::abs(vk.hausdorff - std::log(5.0) / std::log(3.0)) <= 1e-9, "Vicsek d_H");
    o.require(std::abs(vk.walk - std::log(15.0) / std::log(3.0)) <= 1e-9, "Vicsek d_W");
    o.require(std::abs(vk.spectral - 2 * std::log(5.0) / std::log(15.0)) <= 1e-9, "Vicsek d_S");
    const auto sg = dims(preset("sg"));
    const double sg_dh = std::log(3.0) / std::log(5.0 / 3.0);
    o.require(std::abs(sg.hausdorff - sg_dh) <= 1e-9, "SG d_H");
    o.require(std::abs(sg.spectral - 2 * std::log(3.0) / std::log(5.0)) <= 1e-9, "SG d_S");
    o.require(std::abs(sg.spectral - 1.36521) <= 1e-5, "SG d_S against 1.36521");
    o.detail = o.passed ? "SG d_S = " + fmt("%.9f", sg.spectral) : o.detail;
    return o;
}

Outcome harmonic_check() {
    Outcome o;
    double worst = 0.0;
    for (const auto& name : kPresets) {
        const auto hs = derive_extension(preset(name));
        worst = std::max({worst, hs.trace_residual, hs.boundary_trace_residual});
    }
    o.require(worst <= 1e-10, "trace residual " + fmt("%.3e", worst));
    const auto vk = derive_extension(preset("vicsek"));
    std::mt19937_64 rng(2);
    double err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd b = random_vector(rng, 4);
        const Eigen::VectorXd h0 = vk.fill(b);
        const double e = h0(4);
        err = std::max(err, std::abs(e - b.sum() / 4));
        for (int i = 0; i < 4; ++i) {
            const Eigen::VectorXd cell = vk.extension[static_cast<std::size_t>(i)] * h0;
            err = std::max(err, std::abs(cell(4) - (2 * b(i) + e) / 3));
            err = std::max(err, std::abs(cell(i) - b(i)));
        }
        err = std::max(err, std::abs((vk.extension[4] * h0)(4) - e));
    }
    o.require(err <= 1e-14, "Vicsek extension values off by " + fmt("%.3e", err));
    if (o.passed) o.detail = "residual " + fmt("%.2e", worst) + ", Vicsek values " + fmt("%.1e", err);
    return o;
}

Outcome energy_check() {
    Outcome o;
    double worst = 0.0;
    for (const auto& name : kPresets) {
        const auto d = preset(name);
        const auto hs = derive_extension(d);
        Hierarchy h(d, 8);
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::VectorXd b = random_vector(rng, d.boundary.size());
            const double e0 = prototype_energy(d, hs.fill(b));
            for (int m = 0; m <= 8; ++m) worst = std::max(worst, rel(energy(h, harmonic_extend(hs, h, b, m)), e0));
        }
    }
    o.require(worst <= 1e-10, "relative energy drift " + fmt("%.3e", worst));
    if (o.passed) o.detail = "max relative drift " + fmt("%.2e", worst);
    return o;
}

Outcome resistance_check() {
    Outcome o;
    double worst = 0.0;
    const int m = 3;
    for (const auto& name : kPresets) {
        const auto d = preset(name);
        Hierarchy h(d, m + 2);
        std::vector<std::unique_ptr<ResistanceSolver>> solvers;
        for (int k = m; k <= m + 2; ++k)
            solvers.push_back(std::make_unique<ResistanceSolver>(assemble_graph_laplacian(h, k)));
        std::mt19937_64 rng(4);
        const auto n = h.table(m).vertex_count;
        int pairs = 0;
        while (pairs < 20) {
            const auto x = static_cast<std::uint32_t>(rng() % n);
            const auto y = static_cast<std::uint32_t>(rng() % n);
            if (x == y) continue;
            ++pairs;
            const double r0 = solvers[0]->resistance(x, y);
            for (int k = 1; k <= 2; ++k)
                worst = std::max(worst, rel(solvers[static_cast<std::size_t>(k)]->resistance(h.lift(m, x, m + k),
                                                                                             h.lift(m, y, m + k)),
                                            r0));
        }
    }
    o.require(worst <= 1e-9, "level drift " + fmt("%.3e", worst));
    const auto sg = preset("sg");
    Hierarchy h(sg, 6);
    double bnd = 0.0;
    for (int k = 0; k <= 6; ++k) bnd = std::max(bnd, std::abs(effective_resistance(h, k, h.lift(0, 0, k), h.lift(0, 1, k)) - 2.0 / 3));
    o.require(bnd <= 1e-9, "SG boundary pair off 2/3 by " + fmt("%.3e", bnd));
    if (o.passed) o.detail = "level drift " + fmt("%.2e", worst) + ", |R - 2/3| " + fmt("%.1e", bnd);
    return o;
}

Outcome interval_curve_check() {
    Outcome o;
    g_curves["interval"] = curve_for("interval", curve_levels("interval"));
    save("curve_interval.csv", curve_csv(g_curves["interval"]));
    double worst = 0.0;
    int count = 0;
    for (const auto& pt : g_curves["interval"].points)
        if (pt.p <= 8.0) {
            worst = std::max(worst, std::abs(pt.c_hat - 1.0));
            ++count;
        }
    o.require(count == 15, "grid has " + std::to_string(count) + " points in [1, 8]");
    o.require(worst <= 1e-9, "max |C_hat - 1| = " + fmt("%.3e", worst));
    if (o.passed) o.detail = "max |C_hat - 1| = " + fmt("%.2e", worst);
    return o;
}

Outcome vicsek_curve_check() {
    Outcome o;
    g_curves["vicsek"] = curve_for("vicsek", 7);
    save("curve_vicsek.csv", curve_csv(g_curves["vicsek"]));
    const auto hs = derive_extension(preset("vicsek"));
    double worst = 0.0;
    for (const auto& pt : g_curves["vicsek"].points)
        if (pt.p <= 8.0)
            worst = std::max(worst, std::abs(pt.c_hat - (1.0 + (2.0 / pt.p - 1.0) * (hs.dims.spectral - 1.0))));
    o.require(worst <= 1e-3, "max deviation " + fmt("%.3e", worst));
    double drift = 0.0;
    for (const auto& dir : harmonic_directions(hs, 7)) {
        const auto diffs = edge_differences(hs, hs.fill(dir), 7);
        const double s0 = std::exp(diffs.log_sum(0, 1.0));
        for (int m = 1; m <= 7; ++m) drift = std::max(drift, rel(std::exp(diffs.log_sum(m, 1.0)), s0));
    }
    o.require(drift <= 1e-12, "p = 1 edge sums drift by " + fmt("%.3e", drift));
    if (o.passed) o.detail = "max deviation " + fmt("%.2e", worst) + ", p = 1 drift " + fmt("%.1e", drift);
    return o;
}

Outcome sg_curve_check() {
    Outcome o;
    g_curves["sg"] = curve_for("sg", 8);
    save("curve_sg.csv", curve_csv(g_curves["sg"]));
    const auto& c1 = g_curves["sg"].points.front();
    o.require(c1.p == 1.0, "first grid point is not p = 1");
    o.require(c1.c_lo > 1.02 && c1.c_hi < 1.14, "bracket [" + fmt("%.4f", c1.c_lo) + ", " + fmt("%.4f", c1.c_hi) + "]");
    if (o.passed)
        o.detail = "C_hat(1) = " + fmt("%.4f", c1.c_hat) + " in [" + fmt("%.4f", c1.c_lo) + ", " + fmt("%.4f", c1.c_hi) + "]";
    return o;
}

Outcome bounds_check_all() {
    Outcome o;
    for (const auto& name : kPresets) {
        if (!g_curves.count(name)) g_curves[name] = curve_for(name, curve_levels(name));
        for (const auto& c : bounds_check(g_curves[name]).checks)
            o.require(c.passed, name + ": " + c.name + " " + c.detail);
    }
    if (o.passed) o.detail = "C(2), monotonicity, concavity, sandwiches and large-p limit on all presets";
    return o;
}

Outcome mass_check() {
    Outcome o;
    double worst = 0.0;
    for (const auto& name : kPresets) {
        const auto d = preset(name);
        const auto hs = derive_extension(d);
        Hierarchy h(d, 6);
        for (int m = 0; m <= 6; ++m) worst = std::max(worst, std::abs(mass_matrix(hs, h, m).mass.sum() - 1.0));
    }
    o.require(worst <= 1e-10, "sum of masses off by " + fmt("%.3e", worst));
    const auto d = preset("interval");
    Hierarchy h(d, 1);
    const auto m = mass_matrix(derive_extension(d), h, 1).mass;
    const auto& t = h.table(1);
    double err = 0.0;
    for (std::size_t v = 0; v < 3; ++v) {
        const double expected = t.in_ring(v) ? 0.5 : 0.25;
        err = std::max(err, std::abs(m(static_cast<Eigen::Index>(v)) - expected));
    }
    // Exact up to the last bit of the integration weights.
    o.require(err <= 4 * std::numeric_limits<double>::epsilon(), "interval masses off by " + fmt("%.3e", err));
    if (o.passed) o.detail = "sum drift " + fmt("%.1e", worst) + ", interval masses within " + fmt("%.1e", err);
    return o;
}

Outcome spectral_check() {
    Outcome o;
    const auto iv = preset("interval");
    Hierarchy hi(iv, 10);
    const auto spec = neumann_eigs(derive_extension(iv), hi, 10, 0);
    double worst = 0.0;
    for (int k = 1; k <= 5; ++k) worst = std::max(worst, rel(spec.values(k), k * k * M_PI * M_PI));
    o.require(worst <= 0.01, "interval eigenvalues off by " + fmt("%.3e", worst));
    const auto sg = preset("sg");
    const auto hs = derive_extension(sg);
    Hierarchy hs7(sg, 7);
    EigOptions vo;
    vo.values_only = true;
    const auto values = neumann_eigs(hs, hs7, 7, 0, vo).values;
    save("spectrum_sg7.csv", [&] {
        std::string s = "k,lambda\n";
        for (Eigen::Index k = 0; k < values.size(); ++k) s += std::to_string(k) + "," + csv_number(values(k)) + "\n";
        return s;
    }());
    const auto w = weyl_slope(values);
    const double target = hs.dims.spectral / 2;
    o.require(rel(w.slope, target) <= 0.1, "Weyl slope " + fmt("%.4f", w.slope) + " vs " + fmt("%.4f", target));
    if (o.passed)
        o.detail = "interval rel err " + fmt("%.1e", worst) + ", Weyl slope " + fmt("%.4f", w.slope) + " vs " +
                   fmt("%.4f", target);
    return o;
}

Outcome characterisation_check() {
    Outcome o;
    g_char = characterisation_run();
    save("characterisations.csv", g_char.csv);
    std::string spreads;
    double previous = 0.0;
    for (const auto& [m, r] : g_char.ratios) {
        const double s = spread(r);
        spreads += (spreads.empty() ? "" : ", ") + ("M=" + std::to_string(m) + ": ") + fmt("%.3f", s);
        o.require(s <= 20.0, "haar/direct spread " + fmt("%.3f", s) + " at M=" + std::to_string(m));
        if (previous > 0.0)
            o.require(std::abs(s / previous - 1.0) <= 0.25, "spread unstable at M=" + std::to_string(m));
        previous = s;
    }
    const double gt = spread(g_char.graph_tent);
    o.require(gt <= 20.0, "graph/tent spread " + fmt("%.3f", gt));
    if (o.passed) o.detail = "haar/direct spreads " + spreads + "; graph/tent " + fmt("%.3f", gt);
    return o;
}

Outcome heat_check() {
    Outcome o;
    g_heat = heat_run();
    save("equivalence.json", g_heat.json);
    std::string spreads;
    for (std::size_t i = 0; i < g_heat.reports.size(); i += 2) {
        const auto& a = g_heat.reports[i];
        const auto& b = g_heat.reports[i + 1];
        const std::string tag = "sigma " + fmt("%.1f", a.sigma);
        o.require(a.spread <= 50.0 && b.spread <= 50.0, tag + " spread above 50");
        o.require(spread_change(a, b) <= 0.25, tag + " spread changes by " + fmt("%.3f", spread_change(a, b)));
        o.require(a.region == "A1" || a.region == "A2", tag + " not below the C estimate");
        spreads += (spreads.empty() ? "" : ", ") + tag + ": " + fmt("%.3f", a.spread) + " -> " + fmt("%.3f", b.spread);
    }
    const auto& diag = g_heat.diagnostic;
    o.require(diag.fires, "divergence diagnostic silent");
    if (o.passed)
        o.detail = spreads + "; divergence at sigma 1.2: Lambda growth " + fmt("%.3f", diag.lambda_growth.back()) +
                   ", heat growth " + fmt("%.3f", diag.heat_growth);
    return o;
}

Outcome reproducibility_check() {
    Outcome o;
    for (const char* name : {"interval", "vicsek", "sg"})
        o.require(curve_csv(curve_for(name, curve_levels(name))) == curve_csv(g_curves.at(name)),
                  std::string(name) + " curve differs");
    o.require(characterisation_run().csv == g_char.csv, "characterisation artifact differs");
    o.require(heat_run().json == g_heat.json, "equivalence artifact differs");
    if (o.passed) o.detail = "curves, characterisation and equivalence artifacts byte-identical";
    return o;
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1) {
        g_out = argv[1];
        std::filesystem::create_directories(g_out);
    }
    struct Criterion {
        int id;
        const char* name;
        double limit;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "dimensions", 1, dimensions_check},
        {2, "harmonic structures", 1, harmonic_check},
        {3, "energy invariance", 30, energy_check},
        {4, "resistance invariance", 60, resistance_check},
        {5, "critical curve, interval", 10, interval_curve_check},
        {6, "critical curve, Vicsek", 120, vicsek_curve_check},
        {7, "critical curve, SG", 120, sg_curve_check},
        {8, "structural checks", 300, bounds_check_all},
        {9, "masses", 1, mass_check},
        {10, "spectrum", 300, spectral_check},
        {11, "discrete characterisations", 600, characterisation_check},
        {12, "heat versus Lambda evidence", 900, heat_check},
        {13, "reproducibility", 1e9, reproducibility_check},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.passed = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > c.limit) o.require(false, "over the time limit");
        if (!o.passed) ++failed;
        if (c.limit < 1e8)
            std::printf("criterion %2d %-28s %s  %.2fs/%gs  %s\n", c.id, c.name, o.passed ? "PASS" : "FAIL", secs, c.limit,
                        o.detail.c_str());
        else
            std::printf("criterion %2d %-28s %s  %.2fs  %s\n", c.id, c.name, o.passed ? "PASS" : "FAIL", secs,
                        o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
