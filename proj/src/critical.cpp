#include "pcf/critical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "pcf/besov.hpp"
#include "pcf/errors.hpp"
#include "pcf/graph.hpp"
#include "pcf/io.hpp"

namespace pcf {

namespace {

constexpr double kScaleSlack = 1e-9;

std::vector<std::pair<int, int>> conductance_edges(const FractalDescriptor& d) {
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < d.prototype_size; ++a)
        for (int b = a + 1; b < d.prototype_size; ++b)
            if (d.H(a, b) > 0.0) edges.emplace_back(a, b);
    return edges;
}

struct Fit {
    double slope = 0.0;
    double residual = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool ok = false;
};

Fit fit_window(const std::vector<double>& y, int from, int to) {
    Fit f;
    for (int m = from; m <= to; ++m)
        if (!std::isfinite(y[static_cast<std::size_t>(m)])) return f;
    const int n = to - from + 1;
    if (n < 2) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int m = from; m <= to; ++m) {
        const double v = y[static_cast<std::size_t>(m)];
        sx += m;
        sy += v;
        sxx += double(m) * m;
        sxy += m * v;
    }
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - f.slope * sx) / n;
    double ss = 0.0;
    for (int m = from; m <= to; ++m) {
        const double e = y[static_cast<std::size_t>(m)] - icept - f.slope * m;
        ss += e * e;
    }
    f.residual = std::sqrt(ss / n);
    f.lo = std::numeric_limits<double>::infinity();
    f.hi = -f.lo;
    for (int m = from; m < to; ++m) {
        const double d = y[static_cast<std::size_t>(m + 1)] - y[static_cast<std::size_t>(m)];
        f.lo = std::min(f.lo, d);
        f.hi = std::max(f.hi, d);
    }
    f.ok = true;
    return f;
}

int window_start(int max_level) { return (max_level + 1) / 2; }

void check_levels(int max_level) {
    if (max_level < 1) throw Error("growth fits need at least two levels");
}

} // namespace

double edge_sum(const Hierarchy& h, const VertexFunction& f, double p) {
    const VertexTable& t = h.table(f.level);
    if (static_cast<std::size_t>(f.values.size()) != t.vertex_count)
        throw DimensionMismatch("vertex function does not match the level");
    const auto edges = conductance_edges(h.descriptor());
    double s = 0.0;
    for (std::size_t c = 0; c < t.cell_count(); ++c)
        for (auto [a, b] : edges)
            s += std::pow(std::abs(f.values(t.vertex(c, a)) - f.values(t.vertex(c, b))), p);
    return s;
}

double EdgeDifferences::log_sum(int m, double p) const {
    const auto& d = levels.at(static_cast<std::size_t>(m));
    double top = 0.0;
    for (double x : d) top = std::max(top, x);
    if (top == 0.0) return -std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (double x : d) s += std::pow(x / top, p);
    return p * std::log(top) + std::log(s);
}

EdgeDifferences edge_differences(const HarmonicStructure& hs, const Eigen::VectorXd& h0, int max_level) {
    const FractalDescriptor& d = hs.descriptor;
    if (h0.size() != d.prototype_size) throw DimensionMismatch("prototype vector has the wrong size");
    const auto edges = conductance_edges(d);
    const double base = d.min_r();
    std::vector<double> threshold(static_cast<std::size_t>(max_level) + 1);
    for (int m = 0; m <= max_level; ++m) threshold[static_cast<std::size_t>(m)] = std::pow(base, m) * (1.0 + kScaleSlack);

    EdgeDifferences out;
    out.levels.resize(threshold.size());
    auto visit = [&](auto&& self, const Eigen::VectorXd& v, double rw, double rparent) -> void {
        for (int m = 0; m <= max_level; ++m) {
            const double th = threshold[static_cast<std::size_t>(m)];
            if (rw <= th && rparent > th) {
                auto& bucket = out.levels[static_cast<std::size_t>(m)];
                for (auto [a, b] : edges) bucket.push_back(std::abs(v(a) - v(b)));
            }
        }
        if (rw <= threshold.back()) return;
        for (int i = 0; i < d.branches; ++i) {
            const Eigen::VectorXd child = hs.extension[static_cast<std::size_t>(i)] * v;
            self(self, child, rw * d.r[static_cast<std::size_t>(i)], rw);
        }
    };
    visit(visit, h0, 1.0, INFINITY);
    return out;
}

std::vector<Eigen::VectorXd> harmonic_directions(const HarmonicStructure& hs, std::uint64_t seed,
                                                 int random_directions) {
    const auto nb = static_cast<Eigen::Index>(hs.descriptor.boundary.size());
    if (nb < 2) throw DegenerateHarmonicSpace("harmonic functions are constant: dim H_0 = 1");
    std::vector<Eigen::VectorXd> dirs;
    for (Eigen::Index i = 0; i < nb; ++i) dirs.push_back(Eigen::VectorXd::Unit(nb, i));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    for (int k = 0; k < random_directions; ++k) {
        Eigen::VectorXd v(nb);
        for (auto& x : v) x = g(rng);
        v.array() -= v.mean();
        const double n = v.norm();
        if (n == 0.0) continue;
        dirs.push_back(v / n);
    }
    return dirs;
}

namespace {

std::vector<GrowthEstimate> best_growth(const HarmonicStructure& hs, std::span<const double> ps, int max_level,
                                        std::uint64_t seed, int random_directions) {
    check_levels(max_level);
    const auto dirs = harmonic_directions(hs, seed, random_directions);
    const int from = window_start(max_level);
    std::vector<GrowthEstimate> best(ps.size());
    std::vector<bool> found(ps.size(), false);
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        const auto diffs = edge_differences(hs, hs.fill(dirs[k]), max_level);
        for (std::size_t j = 0; j < ps.size(); ++j) {
            std::vector<double> logs(static_cast<std::size_t>(max_level) + 1);
            for (int m = 0; m <= max_level; ++m) logs[static_cast<std::size_t>(m)] = diffs.log_sum(m, ps[j]);
            const Fit f = fit_window(logs, from, max_level);
            if (!f.ok) continue;
            const double lambda = std::exp(f.slope);
            if (found[j] && !(lambda > best[j].lambda)) continue;
            GrowthEstimate& g = best[j];
            g.p = ps[j];
            g.lambda = lambda;
            g.lambda_lo = std::min(std::exp(f.lo), lambda);
            g.lambda_hi = std::max(std::exp(f.hi), lambda);
            g.residual = f.residual;
            g.fit_from = from;
            g.fit_to = max_level;
            g.direction = static_cast<int>(k);
            g.log_sums = std::move(logs);
            found[j] = true;
        }
    }
    for (std::size_t j = 0; j < ps.size(); ++j)
        if (!found[j]) throw DegenerateHarmonicSpace("every harmonic direction has a vanishing edge sum");
    return best;
}

} // namespace

GrowthEstimate growth_exponent(const HarmonicStructure& hs, double p, int max_level, std::uint64_t seed,
                               int random_directions) {
    const double ps[1] = {p};
    return best_growth(hs, ps, max_level, seed, random_directions).front();
}

double critical_from_growth(const Dimensions& d, double base_scale, double p, double lambda) {
    return (2.0 / d.walk) * (d.hausdorff / p - std::log(lambda) / (p * std::log(1.0 / base_scale)));
}

CurveEstimate critical_curve(const HarmonicStructure& hs, std::span<const double> ps, int max_level,
                             std::uint64_t seed, int random_directions) {
    for (double p : ps)
        if (!(p >= 1.0) || std::isinf(p)) throw Error("critical curve needs finite p >= 1");
    std::vector<double> sorted(ps.begin(), ps.end());
    std::sort(sorted.begin(), sorted.end());
    CurveEstimate c;
    c.name = hs.descriptor.name;
    c.dims = hs.dims;
    c.base_scale = hs.descriptor.min_r();
    c.max_level = max_level;
    c.seed = seed;
    const auto growth = best_growth(hs, sorted, max_level, seed, random_directions);
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        CurvePoint pt;
        pt.p = sorted[j];
        pt.inv_p = 1.0 / pt.p;
        pt.growth = growth[j];
        pt.c_hat = critical_from_growth(c.dims, c.base_scale, pt.p, growth[j].lambda);
        pt.c_lo = critical_from_growth(c.dims, c.base_scale, pt.p, growth[j].lambda_hi);
        pt.c_hi = critical_from_growth(c.dims, c.base_scale, pt.p, growth[j].lambda_lo);
        c.points.push_back(pt);
    }
    return c;
}

std::vector<double> p_grid(double pmin, double pmax, int count, std::span<const double> extra) {
    if (!(pmin >= 1.0) || !(pmax >= pmin) || count < 1) throw Error("invalid p grid");
    std::vector<double> ps;
    if (count == 1) {
        ps.push_back(pmin);
    } else {
        const double a = 1.0 / pmax, b = 1.0 / pmin;
        for (int i = 0; i < count; ++i) ps.push_back(1.0 / (a + (b - a) * i / (count - 1)));
        ps.front() = pmax;
        ps.back() = pmin;
    }
    ps.insert(ps.end(), extra.begin(), extra.end());
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end(), [](double x, double y) { return std::abs(x - y) <= 1e-12 * y; }),
             ps.end());
    return ps;
}

bool BoundsReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundsCheck& c) { return c.passed; });
}

BoundsReport bounds_check(const CurveEstimate& curve, double tolerance) {
    BoundsReport rep;
    const Dimensions& d = curve.dims;
    auto slack = [&](const CurvePoint& pt) {
        return std::max(pt.c_hi - pt.c_hat, pt.c_hat - pt.c_lo) + tolerance;
    };
    auto fmt = [](double x) {
        std::ostringstream s;
        s.precision(10);
        s << x;
        return s.str();
    };
    auto add = [&](std::string name, bool ok, std::string detail) {
        rep.checks.push_back({std::move(name), ok, std::move(detail)});
    };

    const CurvePoint* two = nullptr;
    for (const auto& pt : curve.points)
        if (std::abs(pt.p - 2.0) <= 1e-12) two = &pt;
    if (two)
        add("C(2) = 1", std::abs(two->c_hat - 1.0) <= 0.02, "C(2) = " + fmt(two->c_hat));
    else
        add("C(2) = 1", true, "p = 2 not on the grid");

    // Points ordered by increasing 1/p.
    std::vector<const CurvePoint*> pts;
    for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) pts.push_back(&*it);

    {
        bool ok = true;
        std::string detail;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (pts[i]->c_hat < pts[i - 1]->c_hat - slack(*pts[i]) - slack(*pts[i - 1])) {
                ok = false;
                detail += "decrease at p = " + fmt(pts[i]->p) + "; ";
            }
        add("nondecreasing in 1/p", ok, detail);
    }
    {
        bool ok = true;
        std::string detail;
        for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
            const double x0 = pts[i - 1]->inv_p, x1 = pts[i]->inv_p, x2 = pts[i + 1]->inv_p;
            const double chord =
                pts[i - 1]->c_hat + (pts[i + 1]->c_hat - pts[i - 1]->c_hat) * (x1 - x0) / (x2 - x0);
            const double tol = slack(*pts[i - 1]) + slack(*pts[i]) + slack(*pts[i + 1]);
            if (pts[i]->c_hat < chord - tol) {
                ok = false;
                detail += "below chord at p = " + fmt(pts[i]->p) + "; ";
            }
        }
        add("concave in 1/p", ok, detail);
    }
    {
        bool ok = true;
        std::string detail;
        for (const auto* pt : pts) {
            const auto [lo, hi] = critical_bounds(d, pt->p);
            const double s = slack(*pt);
            if (pt->c_hat < lo - s || pt->c_hat > hi + s) {
                ok = false;
                detail += "p = " + fmt(pt->p) + ": " + fmt(pt->c_hat) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]; ";
            }
        }
        add("structural bounds", ok, detail);
    }
    if (!pts.empty() && pts.front()->p >= 16.0) {
        const CurvePoint& top = *pts.front();
        const double target = 2.0 / d.walk;
        const double allowed = d.spectral / top.p + slack(top);
        add("large-p limit 2/d_W", std::abs(top.c_hat - target) <= allowed,
            "C(" + fmt(top.p) + ") = " + fmt(top.c_hat) + ", 2/d_W = " + fmt(target));
    } else {
        add("large-p limit 2/d_W", true, "no p >= 16 on the grid");
    }
    return rep;
}

CrossCheck cross_check(const HarmonicStructure& hs, const Hierarchy& h, const IpQuadrature& quad,
                       const Eigen::VectorXd& boundary_values, double p, int from, int to) {
    if (from < 0 || to <= from) throw Error("cross check needs at least two levels");
    CrossCheck out;
    out.p = p;
    out.fit_from = from;
    out.fit_to = to;
    const Eigen::VectorXd h0 = hs.fill(boundary_values);
    const auto diffs = edge_differences(hs, h0, to);
    std::vector<double> proxy(static_cast<std::size_t>(to) + 1);
    for (int m = 0; m <= to; ++m) proxy[static_cast<std::size_t>(m)] = diffs.log_sum(m, p);
    out.proxy_lambda = std::exp(fit_window(proxy, from, to).slope);

    const auto f = to_piecewise(h, harmonic_extend(hs, h, boundary_values, 0));
    const double base = h.base_scale();
    std::vector<double> ts;
    for (int m = 0; m <= to; ++m) ts.push_back(std::pow(base, m));
    const auto ip = quad.evaluate(f, p, ts);
    std::vector<double> direct(ts.size());
    for (int m = 0; m <= to; ++m)
        direct[static_cast<std::size_t>(m)] =
            -m * hs.dims.hausdorff * std::log(base) + p * std::log(ip[static_cast<std::size_t>(m)].value);
    out.direct_lambda = std::exp(fit_window(direct, from, to).slope);
    return out;
}

std::string curve_csv(const CurveEstimate& curve) {
    std::string s = "p,inv_p,lambda_hat,C_hat,C_lo,C_hi,fit_residual\n";
    for (const auto& pt : curve.points) {
        s += csv_number(pt.p) + ',' + csv_number(pt.inv_p) + ',' + csv_number(pt.growth.lambda) + ',' +
             csv_number(pt.c_hat) + ',' + csv_number(pt.c_lo) + ',' + csv_number(pt.c_hi) + ',' +
             csv_number(pt.growth.residual) + '\n';
    }
    return s;
}

} // namespace pcf
