#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pcf/descriptor.hpp"
#include "pcf/function.hpp"
#include "pcf/graph.hpp"
#include "pcf/harmonic.hpp"

using namespace pcf;

namespace {

Eigen::VectorXd gaussian(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

// Position of every interval vertex, from its witness cell.
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

} // namespace

TEST_CASE("integration weights reproduce integrals of harmonic functions") {
    const auto hs = derive_extension(preset("vicsek"));
    const Eigen::VectorXd alpha = harmonic_integral_weights(hs);
    CHECK(alpha.sum() == doctest::Approx(1.0).epsilon(1e-14));
    // Oracle: crude cell-mean quadrature at level 6 converges to the integral.
    Hierarchy h(preset("vicsek"), 6);
    std::mt19937_64 rng(1);
    const Eigen::VectorXd b = gaussian(rng, 4);
    const CellValues cells = extend_cells(hs, h, hs.fill(b), 6);
    double crude = 0.0;
    for (Eigen::Index c = 0; c < cells.rows(); ++c) crude += h.table(6).mu[static_cast<std::size_t>(c)] * cells.row(c).mean();
    CHECK(std::abs(crude - alpha.dot(hs.fill(b))) < 2e-3);
}

TEST_CASE("cell averages") {
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 3);
    Eigen::VectorXd b(3);
    b << 1, 0, 0;
    const auto f = to_piecewise(h, harmonic_extend(hs, h, b, 0));
    CHECK(cell_average(hs, h, f, Word{}) == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(cell_average(hs, h, f, Word{0}) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(cell_average(hs, h, f, Word{1}) == doctest::Approx(0.2).epsilon(1e-14));
    const auto fine = to_piecewise(h, harmonic_extend(hs, h, b, 3));
    CHECK(cell_average(hs, h, fine, Word{2}) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(cell_average(hs, h, fine, Word{}) == doctest::Approx(1.0 / 3).epsilon(1e-14));

    const auto iv = preset("interval");
    const auto ihs = derive_extension(iv);
    Hierarchy ih(iv, 4);
    VertexFunction x{4, interval_positions(ih.table(4))};
    const auto haar = conditional_expectation(ihs, ih, to_piecewise(ih, x), 4);
    CHECK(haar.expectation[0](0) == doctest::Approx(0.5));
    CHECK(haar.expectation[1](0) == doctest::Approx(0.25));
    CHECK(haar.expectation[1](1) == doctest::Approx(0.75));
}

TEST_CASE("haar layers") {
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 5);
    std::mt19937_64 rng(2);
    const auto f = to_piecewise(h, VertexFunction{5, gaussian(rng, static_cast<Eigen::Index>(h.table(5).vertex_count))});
    const auto haar = conditional_expectation(hs, h, f, 4);
    // Telescoping: lifting and summing the layers gives E[f|Lambda_4].
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(h.table(4).cell_count()));
    for (int n = 0; n <= 4; ++n)
        for (std::size_t c = 0; c < h.table(4).cell_count(); ++c)
            sum(static_cast<Eigen::Index>(c)) += haar.layer[static_cast<std::size_t>(n)](h.ancestor(4, c, n));
    CHECK((sum - haar.expectation[4]).cwiseAbs().maxCoeff() < 1e-13);
    for (int n = 1; n <= 4; ++n) {
        double mean = 0.0;
        for (std::size_t c = 0; c < h.table(n).cell_count(); ++c)
            mean += h.table(n).mu[c] * haar.layer[static_cast<std::size_t>(n)](static_cast<Eigen::Index>(c));
        CHECK(std::abs(mean) < 1e-14);
    }
    // Piecewise constant on Lambda_1: no layers beyond 1.
    const auto pc = piecewise_constant(h, 1, gaussian(rng, 3));
    CHECK_FALSE(pc.continuous);
    const auto pch = conditional_expectation(hs, h, pc, 4);
    for (int n = 2; n <= 4; ++n) CHECK(pch.layer[static_cast<std::size_t>(n)].cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("tent interpolation") {
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 3);
    std::mt19937_64 rng(3);
    const auto harmonic = harmonic_extend(hs, h, gaussian(rng, 3), 3);
    const auto hs_series = tent_interpolation(hs, h, harmonic);
    for (int n = 1; n <= 3; ++n) CHECK(hs_series.components[static_cast<std::size_t>(n)].values.cwiseAbs().maxCoeff() < 1e-13);

    std::uint32_t x = 0;
    while (!h.table(1).in_ring(x)) ++x;
    const auto psi = refine(hs, h, tent(h, 1, x), 3);
    const auto psi_series = tent_interpolation(hs, h, psi);
    CHECK(psi_series.components[1].values(x) == doctest::Approx(1.0));
    CHECK(psi_series.components[1].values.cwiseAbs().sum() == doctest::Approx(1.0));
    CHECK(psi_series.components[2].values.cwiseAbs().maxCoeff() < 1e-14);

    const VertexFunction noise{3, gaussian(rng, static_cast<Eigen::Index>(h.table(3).vertex_count))};
    const auto series = tent_interpolation(hs, h, noise);
    CHECK((series.partial_sum(hs, h, 3).values - noise.values).cwiseAbs().maxCoeff() <= 1e-12);
    // Each component vanishes on the previous level's vertices.
    for (int n = 1; n <= 3; ++n)
        for (std::uint32_t v = 0; v < h.table(n - 1).vertex_count; ++v)
            CHECK(series.components[static_cast<std::size_t>(n)].values(h.lift(n - 1, v, n)) == 0.0);

    // Vicsek: the interior prototype vertex is interpolated as well.
    const auto vd = preset("vicsek");
    const auto vhs = derive_extension(vd);
    Hierarchy vh(vd, 3);
    const VertexFunction vnoise{3, gaussian(rng, static_cast<Eigen::Index>(vh.table(3).vertex_count))};
    CHECK((tent_interpolation(vhs, vh, vnoise).partial_sum(vhs, vh, 3).values - vnoise.values).cwiseAbs().maxCoeff() <=
          1e-12);
}

TEST_CASE("lp norms") {
    for (const char* name : {"interval", "sg", "vicsek"}) {
        const auto d = preset(name);
        const auto hs = derive_extension(d);
        Hierarchy h(d, 2);
        PiecewiseHarmonic one{2, CellValues::Ones(static_cast<Eigen::Index>(h.table(2).cell_count()), d.prototype_size), true};
        for (double p : {1.0, 2.0, 3.5}) CHECK(lp_norm(hs, h, one, p).value == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto iv = preset("interval");
    const auto ihs = derive_extension(iv);
    Hierarchy ih(iv, 3);
    const auto x = to_piecewise(ih, VertexFunction{3, interval_positions(ih.table(3))});
    CHECK(lp_norm(ihs, ih, x, 2.0).value == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-13));
    const auto x3 = lp_norm(ihs, ih, x, 3.0, 6);
    CHECK(std::abs(x3.value - std::pow(0.25, 1.0 / 3)) < 1e-4);
    CHECK(std::abs(x3.value - std::pow(0.25, 1.0 / 3)) <= 2 * x3.error);
    const auto escalated = lp_norm(ihs, ih, x, 3.0, 2, 1e-6);
    CHECK(escalated.depth > 2);

    // Gram value against deep sampling.
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 1);
    Eigen::VectorXd b(3);
    b << 1, 0, 0;
    const auto f = to_piecewise(h, harmonic_extend(hs, h, b, 0));
    const double exact = lp_norm(hs, h, f, 2.0).value;
    const auto sampled = lp_norm_sampled(hs, h, f, 2.0, 7);
    CHECK(std::abs(sampled.value - exact) < 1e-6);
    CHECK(std::abs(sampled.value - exact) <= 2 * sampled.error);
}

TEST_CASE("piecewise-harmonic projection") {
    const auto d = preset("sg");
    const auto hs = derive_extension(d);
    Hierarchy h(d, 4);
    std::mt19937_64 rng(4);
    const auto harmonic = to_piecewise(h, harmonic_extend(hs, h, gaussian(rng, 3), 4));
    for (int m = 0; m <= 3; ++m) {
        const auto p = project_piecewise_harmonic(hs, h, harmonic, m);
        CHECK((refine(hs, h, p, 4).values - harmonic.values).cwiseAbs().maxCoeff() < 1e-12);
    }
    const auto t1 = to_piecewise(h, VertexFunction{1, gaussian(rng, 6)});
    const auto t1_in_t2 = project_piecewise_harmonic(hs, h, refine(hs, h, t1, 2), 2);
    CHECK((t1_in_t2.values - refine(hs, h, t1, 2).values).cwiseAbs().maxCoeff() < 1e-12);

    const auto f = to_piecewise(h, VertexFunction{3, gaussian(rng, static_cast<Eigen::Index>(h.table(3).vertex_count))});
    const auto p2 = project_piecewise_harmonic(hs, h, f, 2);
    const auto p1 = project_piecewise_harmonic(hs, h, f, 1);
    PiecewiseHarmonic u{2, p2.values - refine(hs, h, p1, 2).values, false};
    const auto layers = conditional_expectation(hs, h, u, 2);
    CHECK(std::abs(layers.layer[0](0)) < 1e-10);
    CHECK(layers.layer[1].cwiseAbs().maxCoeff() < 1e-10);
    CHECK(layers.expectation[1].cwiseAbs().maxCoeff() < 1e-10);
    // Idempotence.
    const auto again = project_piecewise_harmonic(hs, h, p2, 2);
    PiecewiseHarmonic diff{2, again.values - p2.values, false};
    CHECK(lp_norm(hs, h, diff, 2.0).value <= 1e-10);
    // Discontinuous members of T_m are allowed.
    CHECK_FALSE(p2.continuous);
}

TEST_CASE("function text round trip") {
    VertexFunction f{3, Eigen::VectorXd::LinSpaced(5, -1.0, 1.0 / 3)};
    std::stringstream ss;
    write_vertex_function(ss, "sg", f);
    std::string name;
    const auto g = read_vertex_function(ss, &name);
    CHECK(name == "sg");
    CHECK(g.level == 3);
    CHECK((g.values - f.values).cwiseAbs().maxCoeff() == 0.0);
}
