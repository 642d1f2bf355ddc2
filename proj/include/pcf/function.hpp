#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcf/cells.hpp"
#include "pcf/harmonic.hpp"
#include "pcf/representation.hpp"

namespace pcf {

/// alpha with the fixed-point residual re-checked; throws FixedPointDivergence.
Eigen::VectorXd harmonic_integral_weights(const HarmonicStructure& hs);

/// Piecewise-harmonic interpolant of a vertex function (always continuous).
PiecewiseHarmonic to_piecewise(const Hierarchy& h, const VertexFunction& f);

/// Same function represented on the finer level m.
PiecewiseHarmonic refine(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, int m);

/// Piecewise constant on Lambda_m, one value per cell.
PiecewiseHarmonic piecewise_constant(const Hierarchy& h, int m, const Eigen::VectorXd& per_cell);

/// Largest disagreement between cells sharing a vertex.
double continuity_gap(const Hierarchy& h, const PiecewiseHarmonic& f);

/// Integral of f over F_wK divided by mu_w.
double cell_average(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f,
                    std::span<const std::uint8_t> w);

/// Cell averages on Lambda_n for n = 0..m, plus the Haar layers
/// layer[n] = E[f|Lambda_n] - E[f|Lambda_{n-1}] (layer[0] = E[f]).
struct HaarCoefficients {
    int level = 0;
    std::vector<Eigen::VectorXd> expectation; ///< per Lambda_n cell
    std::vector<Eigen::VectorXd> layer;       ///< per Lambda_n cell

    /// ||layer[n]||_{L^p(mu)}, exact for piecewise constants (p = inf allowed).
    double layer_norm(const Hierarchy& h, int n, double p) const;
};

HaarCoefficients conditional_expectation(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f,
                                         int m);

/// Tent expansion f = f_0 + f_1 + ... + f_M of samples on V_{Lambda_M}.
struct TentSeries {
    int level = 0;
    Eigen::VectorXd f0; ///< prototype values of f_0
    /// components[n] = f_n on V_{Lambda_n}; zero on V_{Lambda_{n-1}} for n >= 1.
    std::vector<VertexFunction> components;

    /// Ring vertex ids and coefficients of level n.
    std::vector<std::pair<std::uint32_t, double>> coefficients(const Hierarchy& h, int n) const;

    /// Partial sum f_0 + ... + f_upto on V_{Lambda_M}.
    VertexFunction partial_sum(const HarmonicStructure& hs, const Hierarchy& h, int upto) const;
};

TentSeries tent_interpolation(const HarmonicStructure& hs, const Hierarchy& h, const VertexFunction& samples);

/// Tent psi_{x,m}: 1 at vertex x of V_{Lambda_m}, 0 at the other vertices, harmonic in each cell.
VertexFunction tent(const Hierarchy& h, int m, std::uint32_t x);

struct LpEstimate {
    double value = 0.0;
    double error = 0.0; ///< size of the extrapolation correction; 0 when exact
    int depth = 0;
    bool exact = false;
};

/**
 * ||f||_{L^p(mu)}. p = 2 is exact through the Gram matrix; other p refine
 * each cell `depth` further generations and sum |value|^p at the refined
 * cell-boundary points with alpha weights; the last three depths feed a
 * Richardson extrapolation whose correction is reported as the error. With
 * tolerance > 0 the depth is raised (up to max_depth) until the error is below it.
 * p = infinity returns the largest sampled |value|.
 */
LpEstimate lp_norm(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, double p, int depth = 5,
                   double tolerance = 0.0, int max_depth = 9);

/// The sampling path of lp_norm, for any p.
LpEstimate lp_norm_sampled(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, double p,
                           int depth = 5, double tolerance = 0.0, int max_depth = 9);

/// Exact L^p norm of a piecewise constant on Lambda_n cells.
double lp_norm_piecewise_constant(const VertexTable& t, const Eigen::VectorXd& per_cell, double p);

/// L^2(mu)-orthogonal projection onto T_m (cell-wise harmonic on Lambda_m).
PiecewiseHarmonic project_piecewise_harmonic(const HarmonicStructure& hs, const Hierarchy& h,
                                             const PiecewiseHarmonic& f, int m);

/// Columnar text: "# preset=<name> level=<m>" then "id,value" rows.
void write_vertex_function(std::ostream& out, const std::string& preset_name, const VertexFunction& f);
VertexFunction read_vertex_function(std::istream& in, std::string* preset_name = nullptr);

} // namespace pcf
