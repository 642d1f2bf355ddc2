#include "pcf/besov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "pcf/errors.hpp"
#include "pcf/graph.hpp"

namespace pcf {

namespace {

double power(double x, double p) {
    if (p == 1.0) return x;
    if (p == 2.0) return x * x;
    return std::pow(x, p);
}

double vector_lp(const Eigen::VectorXd& v, double p) {
    if (std::isinf(p)) return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += power(std::abs(v(i)), p);
    return std::pow(s, 1.0 / p);
}

void check_exponents(double p, double q) {
    if (!(p >= 1.0)) throw Error("p must be >= 1");
    if (!(q >= 1.0)) throw Error("q must be >= 1");
}

SeminormReport start_report(const char* method, double p, double q, double sigma) {
    SeminormReport r;
    r.method = method;
    r.p = p;
    r.q = q;
    r.sigma = sigma;
    return r;
}

void finish(SeminormReport& r) {
    std::vector<double> c;
    c.reserve(r.levels.size());
    for (const auto& l : r.levels) c.push_back(l.contribution);
    r.seminorm = lq_aggregate(c, r.q);
    r.value = r.lp_part + r.seminorm;
    mark_growth(r);
}

nlohmann::ordered_json number(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    return x;
}

} // namespace

IpQuadrature::IpQuadrature(const HarmonicStructure& hs, const Hierarchy& h, int level, SolverOptions opts)
    : hs_(hs), h_(h), level_(level) {
    solver_ = std::make_unique<ResistanceSolver>(assemble_graph_laplacian(h, level), opts);
    if (solver_->dense())
        dense_ = solver_->all_pairs();
    else
        bound_ = calibrate_separation(h.descriptor(), opts);
    const VertexTable& t = h.table(level);
    const int v0 = t.prototype_size;
    slot_mass_.resize(t.slots.size());
    for (std::size_t s = 0; s < t.slots.size(); ++s) slot_mass_[s] = t.mu[s / v0] * hs.alpha(static_cast<Eigen::Index>(s % v0));
}

IpQuadrature::~IpQuadrature() = default;

double IpQuadrature::resistance(std::uint32_t x, std::uint32_t y) const {
    if (dense_.size()) return dense_(x, y);
    return solver_->resistance(x, y);
}

Eigen::MatrixXd IpQuadrature::slot_values(const PiecewiseHarmonic& f) const {
    if (f.level > level_)
        throw DimensionMismatch("function level " + std::to_string(f.level) + " exceeds the quadrature level " +
                                std::to_string(level_));
    return f.level == level_ ? Eigen::MatrixXd(f.values) : Eigen::MatrixXd(refine(hs_, h_, f, level_).values);
}

std::vector<IpValue> IpQuadrature::evaluate(const PiecewiseHarmonic& f, double p, std::span<const double> ts,
                                            const IpOptions& opts) const {
    if (!(p >= 1.0)) throw Error("p must be >= 1");
    for (double t : ts)
        if (!(t > 0.0)) throw Error("I_p needs t > 0");
    const VertexTable& table = h_.table(level_);
    const int v0 = table.prototype_size;
    const Eigen::MatrixXd vals = slot_values(f);
    auto value = [&](std::uint32_t s) { return vals(s / v0, s % v0); };
    const bool sup = std::isinf(p);
    const double dh = hs_.dims.hausdorff;

    std::vector<std::size_t> order(ts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ts[a] < ts[b]; });
    std::vector<double> sorted(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) sorted[k] = ts[order[k]];
    const double t_max = sorted.empty() ? 0.0 : sorted.back();
    // First sorted index whose t exceeds R (the pair lies in every later ball).
    // Resistances within a relative 1e-10 of t count as on the sphere, not inside.
    auto first_ball = [&](double r) {
        const double padded = r + 1e-10 * std::max(r, 1e-300);
        return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), padded) - sorted.begin());
    };

    std::vector<IpValue> out(ts.size());
    if (opts.monte_carlo) {
        std::mt19937_64 rng(opts.seed);
        std::discrete_distribution<std::size_t> pick(slot_mass_.begin(), slot_mass_.end());
        std::vector<double> sum(ts.size(), 0.0), sum2(ts.size(), 0.0), best(ts.size(), 0.0);
        for (std::size_t n = 0; n < opts.samples; ++n) {
            const auto s = static_cast<std::uint32_t>(pick(rng));
            const auto u = static_cast<std::uint32_t>(pick(rng));
            const double r = resistance(table.slots[s], table.slots[u]);
            const double diff = std::abs(value(s) - value(u));
            const double x = sup ? diff : power(diff, p);
            for (std::size_t k = first_ball(r); k < sorted.size(); ++k) {
                sum[k] += x;
                sum2[k] += x * x;
                best[k] = std::max(best[k], diff);
            }
        }
        const double n = static_cast<double>(std::max<std::size_t>(opts.samples, 1));
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            IpValue v;
            if (sup) {
                v.value = best[k];
            } else {
                const double mean = sum[k] / n;
                const double var = std::max(sum2[k] / n - mean * mean, 0.0);
                const double scale = std::pow(sorted[k], -dh);
                const double ipp = scale * mean;
                v.value = std::pow(ipp, 1.0 / p);
                const double se_p = scale * std::sqrt(var / n);
                v.standard_error = ipp > 0.0 ? se_p / (p * std::pow(ipp, 1.0 - 1.0 / p)) : 0.0;
            }
            out[order[k]] = v;
        }
        return out;
    }

    std::vector<double> acc(ts.size() + 1, 0.0);
    std::vector<double> peak(ts.size() + 1, 0.0);
    auto add_pair = [&](std::uint32_t x, std::uint32_t y, double r) {
        const std::size_t k = first_ball(r);
        if (k >= sorted.size()) return;
        double s = 0.0, m = 0.0;
        for (auto a : table.slots_of(x))
            for (auto b : table.slots_of(y)) {
                const double diff = std::abs(value(a) - value(b));
                if (diff == 0.0) continue;
                if (sup) {
                    m = std::max(m, diff);
                } else {
                    s += slot_mass_[a] * slot_mass_[b] * power(diff, p);
                }
            }
        acc[k] += (x == y ? 1.0 : 2.0) * s;
        peak[k] = std::max(peak[k], m);
    };
    const auto nv = static_cast<std::uint32_t>(table.vertex_count);
    if (dense_.size()) {
        for (std::uint32_t x = 0; x < nv; ++x)
            for (std::uint32_t y = x; y < nv; ++y) add_pair(x, y, dense_(x, y));
    } else {
        for (std::uint32_t x = 0; x < nv; ++x)
            for (auto y : resistance_ball(h_, *solver_, x, t_max, bound_))
                if (y >= x) add_pair(x, y, solver_->resistance(x, y));
    }
    double running = 0.0, running_peak = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        running += acc[k];
        running_peak = std::max(running_peak, peak[k]);
        out[order[k]].value = sup ? running_peak : std::pow(std::pow(sorted[k], -dh) * running, 1.0 / p);
    }
    return out;
}

IpValue IpQuadrature::evaluate(const PiecewiseHarmonic& f, double p, double t, const IpOptions& opts) const {
    const double ts[1] = {t};
    return evaluate(f, p, ts, opts).front();
}

IpValue ip_functional(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, double p, double t,
                      int level, const IpOptions& opts) {
    return IpQuadrature(hs, h, level).evaluate(f, p, t, opts);
}

double lq_aggregate(std::span<const double> c, double q) {
    if (std::isinf(q)) {
        double m = 0.0;
        for (double x : c) m = std::max(m, std::abs(x));
        return m;
    }
    double s = 0.0;
    for (double x : c) s += std::pow(std::abs(x), q);
    return std::pow(s, 1.0 / q);
}

void mark_growth(SeminormReport& report, double threshold) {
    if (report.levels.empty()) return;
    const int top = report.levels.back().level;
    const int from = (top + 1) / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& l : report.levels) {
        if (l.level < from || !(l.contribution > 0.0)) continue;
        const double x = l.level, y = std::log(l.contribution);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) {
        report.growth_factor = 0.0;
        report.diverging = false;
        return;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    report.growth_factor = std::exp(slope);
    report.diverging = report.growth_factor > threshold;
}

SeminormReport lambda_norm_direct(const HarmonicStructure& hs, const Hierarchy& h, const IpQuadrature& quad,
                                  const PiecewiseHarmonic& f, double p, double q, double sigma,
                                  const NormOptions& opts) {
    check_exponents(p, q);
    SeminormReport r = start_report("direct", p, q, sigma);
    const double base = h.base_scale();
    const double dw = hs.dims.walk;
    std::vector<double> ts;
    for (int m = 0; m <= opts.max_level; ++m) ts.push_back(std::pow(base, m));
    const auto ip = quad.evaluate(f, p, ts, opts.ip);
    for (int m = 0; m <= opts.max_level; ++m) {
        LevelTerm l;
        l.level = m;
        l.t = ts[static_cast<std::size_t>(m)];
        l.raw = ip[static_cast<std::size_t>(m)].value;
        l.weight = std::pow(base, -m * sigma * dw / 2);
        l.contribution = l.weight * l.raw;
        r.levels.push_back(l);
    }
    const auto norm = lp_norm(hs, h, f, p, opts.depth);
    r.lp_part = norm.value;
    r.depth = norm.exact ? -1 : norm.depth;
    r.quadrature_level = quad.level();
    if (opts.ip.monte_carlo) r.seed = opts.ip.seed;
    if (quad.level() < opts.max_level) r.warnings.push_back("quadrature level is coarser than the finest t");
    finish(r);
    return r;
}

SeminormReport lambda_norm_haar(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, double p,
                                double q, double sigma, const NormOptions& opts) {
    check_exponents(p, q);
    SeminormReport r = start_report("haar", p, q, sigma);
    const double base = h.base_scale();
    const double dw = hs.dims.walk;
    const auto haar = conditional_expectation(hs, h, f, opts.max_level);
    for (int m = 0; m <= opts.max_level; ++m) {
        LevelTerm l;
        l.level = m;
        l.t = std::pow(base, m);
        l.raw = haar.layer_norm(h, m, p);
        l.weight = std::pow(base, -m * sigma * dw / 2);
        l.contribution = l.weight * l.raw;
        r.levels.push_back(l);
    }
    if (sigma >= hs.dims.spectral / p) r.warnings.push_back("sigma >= d_S/p: outside the range of the Haar characterisation");
    if (f.level > opts.max_level) r.warnings.push_back("function is finer than the last Haar level");
    finish(r);
    return r;
}

SeminormReport lambda_norm_graph(const HarmonicStructure& hs, const Hierarchy& h, const VertexFunction& f, double p,
                                 double q, double sigma, const NormOptions& opts) {
    check_exponents(p, q);
    if (f.level < opts.max_level) throw DimensionMismatch("graph norm needs samples on V_{Lambda_M}");
    SeminormReport r = start_report("graph", p, q, sigma);
    const double base = h.base_scale();
    const double dw = hs.dims.walk;
    const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
    for (int m = 0; m <= opts.max_level; ++m) {
        const VertexFunction fm = restrict_to_level(h, f, m);
        LevelTerm l;
        l.level = m;
        l.t = std::pow(base, m);
        l.raw = vector_lp(apply_laplacian(h, fm), p);
        l.weight = std::pow(base, m * (-sigma * dw / 2 + 1 + hs.dims.hausdorff * inv_p));
        l.contribution = l.weight * l.raw;
        r.levels.push_back(l);
    }
    const auto norm = lp_norm(hs, h, to_piecewise(h, f), p, opts.depth);
    r.lp_part = norm.value;
    r.depth = norm.exact ? -1 : norm.depth;
    if (sigma <= hs.dims.spectral * inv_p)
        r.warnings.push_back("sigma <= d_S/p: outside the range of the graph characterisation");
    finish(r);
    return r;
}

SeminormReport lambda_norm_tent(const HarmonicStructure& hs, const Hierarchy& h, const TentSeries& series, double p,
                                double q, double sigma, const NormOptions& opts) {
    check_exponents(p, q);
    SeminormReport r = start_report("tent", p, q, sigma);
    const double base = h.base_scale();
    const double dw = hs.dims.walk;
    const int top = std::min(series.level, opts.max_level);
    for (int m = 0; m <= top; ++m) {
        const auto norm =
            lp_norm(hs, h, to_piecewise(h, series.components[static_cast<std::size_t>(m)]), p, opts.depth);
        LevelTerm l;
        l.level = m;
        l.t = std::pow(base, m);
        l.raw = norm.value;
        l.weight = std::pow(base, -m * sigma * dw / 2);
        l.contribution = l.weight * l.raw;
        r.levels.push_back(l);
        if (!norm.exact) r.depth = std::max(r.depth, norm.depth);
    }
    const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
    if (sigma <= hs.dims.spectral * inv_p)
        r.warnings.push_back("sigma <= d_S/p: outside the range of the tent characterisation");
    if (series.level > opts.max_level) r.warnings.push_back("tent series truncated at the last requested level");
    finish(r);
    return r;
}

std::string report_json(const SeminormReport& report) {
    nlohmann::ordered_json j;
    j["method"] = report.method;
    j["p"] = number(report.p);
    j["q"] = number(report.q);
    j["sigma"] = report.sigma;
    j["value"] = number(report.value);
    j["lp_part"] = number(report.lp_part);
    j["seminorm"] = number(report.seminorm);
    auto levels = nlohmann::ordered_json::array();
    for (const auto& l : report.levels)
        levels.push_back({{"level", l.level},
                          {"t", l.t},
                          {"raw", number(l.raw)},
                          {"weight", number(l.weight)},
                          {"contribution", number(l.contribution)}});
    j["levels"] = levels;
    j["growth_factor"] = number(report.growth_factor);
    j["diverging"] = report.diverging;
    j["warnings"] = report.warnings;
    j["quadrature_level"] = report.quadrature_level;
    j["depth"] = report.depth;
    if (report.seed)
        j["seed"] = *report.seed;
    else
        j["seed"] = nullptr;
    return j.dump(2);
}

std::string region_name(Region r) {
    switch (r) {
    case Region::A1: return "A1";
    case Region::A2: return "A2";
    case Region::B: return "B";
    case Region::AboveC: return "above-C";
    case Region::OnBorder: return "on-border";
    }
    return "?";
}

double critical_line_1(const Dimensions& d, double p) { return std::isinf(p) ? 0.0 : d.spectral / p; }

double critical_line_2(const Dimensions& d, double p) {
    const double inv_conj = std::isinf(p) ? 1.0 : 1.0 - 1.0 / p;
    return 2.0 - d.spectral * inv_conj;
}

std::pair<double, double> critical_bounds(const Dimensions& d, double p) {
    const double inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
    const double line = 1.0 + (2.0 * inv_p - 1.0) * (d.spectral - 1.0);
    if (p <= 2.0) return {1.0, line};
    return {line, std::min(1.0, 2.0 / d.walk + d.spectral * inv_p)};
}

RegionPoint region_classify(const Dimensions& d, double p, double sigma, double c_estimate, double tol) {
    if (!(p > 1.0) || std::isinf(p)) throw Error("region classification needs 1 < p < infinity");
    RegionPoint pt;
    pt.inv_p = 1.0 / p;
    pt.sigma = sigma;
    const double l1 = critical_line_1(d, p);
    const double l2 = critical_line_2(d, p);
    if (std::abs(sigma - c_estimate) <= tol || (std::abs(sigma - l1) <= tol && sigma < c_estimate)) {
        pt.region = Region::OnBorder;
    } else if (sigma < c_estimate) {
        pt.region = sigma > l1 ? Region::A1 : Region::A2;
    } else if (sigma > l1 && sigma < l2) {
        pt.region = Region::B;
    } else {
        pt.region = Region::AboveC;
    }
    return pt;
}

std::vector<RegionRow> region_curves(const Dimensions& d, std::span<const double> p_grid,
                                     std::span<const double> c_hat) {
    if (p_grid.size() != c_hat.size()) throw DimensionMismatch("p grid and curve differ in length");
    std::vector<RegionRow> rows;
    for (std::size_t i = 0; i < p_grid.size(); ++i) {
        const double p = p_grid[i];
        RegionRow row;
        row.inv_p = std::isinf(p) ? 0.0 : 1.0 / p;
        row.l1 = critical_line_1(d, p);
        row.l2 = critical_line_2(d, p);
        row.c_hat = c_hat[i];
        std::tie(row.c_lower, row.c_upper) = critical_bounds(d, p);
        rows.push_back(row);
    }
    return rows;
}

} // namespace pcf
