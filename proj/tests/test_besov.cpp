#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "pcf/besov.hpp"
#include "pcf/descriptor.hpp"
#include "pcf/errors.hpp"
#include "pcf/graph.hpp"

using namespace pcf;

namespace {

Eigen::VectorXd interval_positions(const VertexTable& t) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(t.vertex_count));
    for (std::size_t v = 0; v < t.vertex_count; ++v) {
        const auto s = t.witness[v];
        double left = 0.0, width = 1.0;
        for (auto l : t.words[s / 2]) {
            width /= 2;
            left += l * width;
        }
        x(static_cast<Eigen::Index>(v)) = left + (s % 2) * width;
    }
    return x;
}

// Trapezoid double sum on a uniform grid of [0,1] restricted to |x - y| < t.
double interval_trapezoid(int n, double t, double p, double (*f)(double)) {
    const double h = 1.0 / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            if (std::abs(i - j) * h >= t) continue;
            const double wi = (i == 0 || i == n) ? h / 2 : h;
            const double wj = (j == 0 || j == n) ? h / 2 : h;
            s += wi * wj * std::pow(std::abs(f(i * h) - f(j * h)), p);
        }
    return std::pow(s / t, 1.0 / p);
}

} // namespace

TEST_CASE("I_p on the interval") {
    const auto d = preset("interval");
    const auto hs = derive_extension(d);
    const int L = 8;
    Hierarchy h(d, L);
    const IpQuadrature quad(hs, h, L);
    const auto x = to_piecewise(h, VertexFunction{L, interval_positions(h.table(L))});
    const std::vector<double> ts{1.0 / 4, 1.0 / 8, 1.0 / 16};
    for (double p : {1.0, 2.0, 3.0}) {
        const auto ip = quad.evaluate(x, p, ts);
        for (std::size_t k = 0; k < ts.size(); ++k) {
            const double t = ts[k];
            // Same discrete rule computed directly on the grid.
            CHECK(ip[k].value ==
                  doctest::Approx(interval_trapezoid(1 << L, t, p, [](double y) { return y; })).epsilon(1e-12));
            const double closed = std::pow(2 * std::pow(t, p) / (p + 1) - 2 * std::pow(t, p + 1) / (p + 2), 1.0 / p);
            // First-order boundary error of the grid rule: O(h / t).
            CHECK(std::abs(ip[k].value - closed) / closed < 1.5 * std::ldexp(1.0, -L) / t);
        }
    }
    // Order of the t list does not matter.
    const std::vector<double> reversed{1.0 / 16, 1.0 / 8, 1.0 / 4};
    CHECK(quad.evaluate(x, 2.0, reversed)[0].value == doctest::Approx(quad.evaluate(x, 2.0, 1.0 / 16).value));

    // The indicator of [0, 1/2]: I_p(t) = t^{1/p} for t <= 1/2, jump seen through shared slots.
    Eigen::VectorXd half(2);
    half << 1.0, 0.0;
    const auto ind = piecewise_constant(h, 1, half);
    for (double t : ts) {
        const double v = quad.evaluate(ind, 2.0, t).value;
        CHECK(std::abs(v - std::sqrt(t)) / std::sqrt(t) < std::ldexp(1.0, -L) / t);
    }
    CHECK(quad.evaluate(ind, INFINITY, 1.0 / 8).value == doctest::Approx(1.0));
    CHECK(quad.evaluate(x, INFINITY, 1.0 / 8).value < 1.0 / 8);
}

TEST_CASE("I_p invariants") {
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 4);
    const IpQuadrature quad(hs, h, 4);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    Eigen::VectorXd v(static_cast<Eigen::Index>(h.table(3).vertex_count));
    for (auto& e : v) e = g(rng);
    const auto f = to_piecewise(h, VertexFunction{3, v});
    PiecewiseHarmonic one{4, CellValues::Ones(static_cast<Eigen::Index>(h.table(4).cell_count()), 3), true};
    CHECK(quad.evaluate(one, 2.0, 0.5).value == 0.0);
    PiecewiseHarmonic scaled{f.level, -3.0 * f.values, true};
    for (double p : {1.5, 2.0, 4.0})
        CHECK(quad.evaluate(scaled, p, 0.3).value == doctest::Approx(3.0 * quad.evaluate(f, p, 0.3).value).epsilon(1e-12));
    // Monotone in the ball radius once rescaled: t^{d_H} I_p^p grows with t.
    const std::vector<double> ts{0.05, 0.1, 0.2, 0.4};
    const auto ip = quad.evaluate(f, 2.0, ts);
    for (std::size_t k = 1; k < ts.size(); ++k)
        CHECK(std::pow(ts[k], hs.dims.hausdorff) * ip[k].value * ip[k].value >=
              std::pow(ts[k - 1], hs.dims.hausdorff) * ip[k - 1].value * ip[k - 1].value);
    CHECK_THROWS_AS(IpQuadrature(hs, h, 2).evaluate(f, 2.0, 0.1), DimensionMismatch);

    // Monte Carlo agrees within a few standard errors and is reproducible.
    IpOptions mc{true, 11, 200'000};
    const auto exact = quad.evaluate(f, 2.0, 0.2).value;
    const auto est = quad.evaluate(f, 2.0, 0.2, mc);
    CHECK(est.standard_error > 0.0);
    CHECK(std::abs(est.value - exact) < 5 * est.standard_error);
    CHECK(quad.evaluate(f, 2.0, 0.2, mc).value == est.value);
}

TEST_CASE("haar and tent norms") {
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 4);
    Eigen::VectorXd c(3);
    c << 1.0, -2.0, 1.0; // mean zero
    const auto f = piecewise_constant(h, 1, c);
    NormOptions opts;
    opts.max_level = 4;
    const double sigma = 0.4;
    const auto rep = lambda_norm_haar(hs, h, f, 2.0, 2.0, sigma, opts);
    const double layer = std::sqrt((1.0 + 4.0 + 1.0) / 3.0);
    CHECK(rep.seminorm == doctest::Approx(std::pow(0.6, -sigma * hs.dims.walk / 2) * layer).epsilon(1e-12));
    CHECK(rep.lp_part == 0.0);
    CHECK(rep.warnings.empty());
    CHECK_FALSE(lambda_norm_haar(hs, h, f, 2.0, 2.0, 0.9, opts).warnings.empty());

    std::uint32_t x = 0;
    while (!h.table(2).in_ring(x)) ++x;
    const auto series = tent_interpolation(hs, h, refine(hs, h, tent(h, 2, x), 4));
    const auto tr = lambda_norm_tent(hs, h, series, 2.0, INFINITY, 0.9, opts);
    for (const auto& l : tr.levels)
        if (l.level != 2) CHECK(l.contribution < 1e-12);
    CHECK(tr.seminorm == doctest::Approx(tr.levels[2].contribution));
    CHECK(tr.levels[2].raw ==
          doctest::Approx(lp_norm(hs, h, to_piecewise(h, tent(h, 2, x)), 2.0).value).epsilon(1e-12));
}

TEST_CASE("graph norm") {
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 4);
    NormOptions opts;
    opts.max_level = 4;
    const VertexFunction one{4, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(h.table(4).vertex_count))};
    const auto rep = lambda_norm_graph(hs, h, one, 2.0, 2.0, 0.9, opts);
    CHECK(rep.seminorm < 1e-12);
    CHECK(rep.lp_part == doctest::Approx(1.0));
    CHECK_FALSE(lambda_norm_graph(hs, h, one, 2.0, 2.0, 0.5, opts).warnings.empty());
    // Level-m term of a level-m tent: weight times the l^p norm of its graph Laplacian.
    std::uint32_t x = 0;
    while (!h.table(2).in_ring(x)) ++x;
    const auto psi = refine(hs, h, tent(h, 2, x), 4);
    const auto t2 = lambda_norm_graph(hs, h, psi, 2.0, 2.0, 0.9, opts);
    const Eigen::VectorXd lap = apply_laplacian(h, tent(h, 2, x));
    CHECK(t2.levels[2].raw == doctest::Approx(lap.norm()).epsilon(1e-12));
    CHECK_THROWS_AS(lambda_norm_graph(hs, h, tent(h, 2, x), 2.0, 2.0, 0.9, opts), DimensionMismatch);
}

TEST_CASE("direct norm and divergence flag") {
    const auto d = preset("vicsek");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 4);
    const IpQuadrature quad(hs, h, 4);
    Eigen::VectorXd b(4);
    b << 1.0, 0.0, -1.0, 0.0;
    const auto f = to_piecewise(h, harmonic_extend(hs, h, b, 0));
    NormOptions opts;
    opts.max_level = 4;
    const auto above = lambda_norm_direct(hs, h, quad, f, 2.0, INFINITY, 1.5, opts);
    CHECK(above.diverging);
    CHECK(above.growth_factor > 1.5);
    const auto below = lambda_norm_direct(hs, h, quad, f, 2.0, INFINITY, 0.5, opts);
    CHECK_FALSE(below.diverging);
    CHECK(below.growth_factor < 1.0);
    CHECK(below.value == doctest::Approx(below.lp_part + below.seminorm));

    const auto j = nlohmann::json::parse(report_json(above));
    CHECK(j["method"] == "direct");
    CHECK(j["levels"].size() == 5);
    CHECK(j["q"] == "inf");
    CHECK(report_json(above) == report_json(lambda_norm_direct(hs, h, quad, f, 2.0, INFINITY, 1.5, opts)));
}

TEST_CASE("regions") {
    const auto dims = pcf::dims(preset("sg"));
    const double l1 = critical_line_1(dims, 2.0);
    CHECK(l1 == doctest::Approx(std::log(9.0) / std::log(5.0) / 2));
    CHECK(critical_line_2(dims, 2.0) == doctest::Approx(2.0 - std::log(9.0) / std::log(5.0) / 2));
    CHECK(region_classify(dims, 2.0, 0.5, 1.0).region == Region::A2);
    CHECK(region_classify(dims, 2.0, 0.9, 1.0).region == Region::A1);
    CHECK(region_classify(dims, 2.0, l1, 1.0).region == Region::OnBorder);
    CHECK(region_classify(dims, 2.0, 1.0, 1.0).region == Region::OnBorder);
    CHECK(region_classify(dims, 2.0, 1.1, 1.0).region == Region::B);
    CHECK(region_classify(dims, 2.0, 1.5, 1.0).region == Region::AboveC);
    CHECK_THROWS(region_classify(dims, 1.0, 0.5, 1.0));
    const auto [lo, hi] = critical_bounds(dims, 2.0);
    CHECK(lo == doctest::Approx(1.0));
    CHECK(hi == doctest::Approx(1.0));
    const auto b4 = critical_bounds(dims, 4.0);
    CHECK(b4.first < b4.second);
    const std::vector<double> ps{1.5, 2.0, 4.0};
    const std::vector<double> cs{1.1, 1.0, 0.9};
    const auto rows = region_curves(dims, ps, cs);
    CHECK(rows.size() == 3);
    CHECK(rows[1].l1 == doctest::Approx(l1));
    CHECK(region_name(Region::AboveC) == "above-C");
}
