#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcf/cells.hpp"
#include "pcf/harmonic.hpp"
#include "pcf/representation.hpp"

namespace pcf {

/// S_{m,p}: sum over cells of Lambda_m and conductance-positive prototype pairs of |h(x) - h(y)|^p.
double edge_sum(const Hierarchy& h, const VertexFunction& f, double p);

/**
 * Edge differences |h(F_w a) - h(F_w b)| of the cell-harmonic function with
 * prototype values h0, grouped by level m = 0..M. Walks Lambda_m directly,
 * without building vertex tables.
 */
struct EdgeDifferences {
    std::vector<std::vector<double>> levels;

    /// log S_{m,p}; -inf when every difference vanishes.
    double log_sum(int m, double p) const;
};

EdgeDifferences edge_differences(const HarmonicStructure& hs, const Eigen::VectorXd& h0, int max_level);

struct GrowthEstimate {
    double p = 1.0;
    double lambda = 0.0;    ///< exp of the least-squares slope of log S_{m,p}
    double lambda_lo = 0.0; ///< smallest consecutive ratio in the fit window
    double lambda_hi = 0.0; ///< largest consecutive ratio in the fit window
    double residual = 0.0;  ///< RMS residual of the log-linear fit
    int fit_from = 0;
    int fit_to = 0;
    int direction = 0;      ///< index into the direction list (boundary basis first)
    std::vector<double> log_sums;
};

/// Boundary basis followed by `random_directions` seeded mean-zero unit vectors.
std::vector<Eigen::VectorXd> harmonic_directions(const HarmonicStructure& hs, std::uint64_t seed,
                                                 int random_directions = 50);

/// Largest fitted growth over the direction set; throws DegenerateHarmonicSpace.
GrowthEstimate growth_exponent(const HarmonicStructure& hs, double p, int max_level, std::uint64_t seed = 7,
                               int random_directions = 50);

struct CurvePoint {
    double p = 0.0;
    double inv_p = 0.0;
    GrowthEstimate growth;
    double c_hat = 0.0;
    double c_lo = 0.0;
    double c_hi = 0.0;
};

struct CurveEstimate {
    std::string name;
    Dimensions dims;
    double base_scale = 0.0;
    int max_level = 0;
    std::uint64_t seed = 0;
    std::vector<CurvePoint> points; ///< sorted by p
};

/// C(p) = (2/d_W)(d_H/p - ln lambda / (p ln(1/r))).
double critical_from_growth(const Dimensions& d, double base_scale, double p, double lambda);

CurveEstimate critical_curve(const HarmonicStructure& hs, std::span<const double> ps, int max_level,
                             std::uint64_t seed = 7, int random_directions = 50);

/// `count` points uniform in 1/p over [pmin, pmax], plus any `extra` values, sorted and deduplicated.
std::vector<double> p_grid(double pmin, double pmax, int count, std::span<const double> extra = {});

struct BoundsCheck {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct BoundsReport {
    std::vector<BoundsCheck> checks;
    bool passed() const;
};

/// Structural checks on an estimated curve; violations are reported, never thrown.
BoundsReport bounds_check(const CurveEstimate& curve, double tolerance = 1e-9);

struct CrossCheck {
    double p = 0.0;
    double proxy_lambda = 0.0;  ///< from the edge sums
    double direct_lambda = 0.0; ///< from r^{-m d_H} I_p(h, r^m)^p
    int fit_from = 0;
    int fit_to = 0;
};

class IpQuadrature;

/// Compares the edge-sum growth with the direct I_p growth over levels [from, to].
CrossCheck cross_check(const HarmonicStructure& hs, const Hierarchy& h, const IpQuadrature& quad,
                       const Eigen::VectorXd& boundary_values, double p, int from, int to);

/// Columns p, inv_p, lambda_hat, C_hat, C_lo, C_hi, fit_residual.
std::string curve_csv(const CurveEstimate& curve);

} // namespace pcf
