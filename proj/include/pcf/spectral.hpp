#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcf/besov.hpp"
#include "pcf/cells.hpp"
#include "pcf/harmonic.hpp"
#include "pcf/representation.hpp"

namespace pcf {

/// Lumped masses M(x) = sum over cells containing x of mu_w alpha_loc.
struct MassMatrix {
    int level = 0;
    Eigen::VectorXd mass;
};

MassMatrix mass_matrix(const HarmonicStructure& hs, const Hierarchy& h, int m);

struct EigOptions {
    std::size_t dense_limit = 4'000; ///< full eigendecomposition up to this many vertices
    bool values_only = false;        ///< dense path only
    double cluster_tolerance = 1e-9; ///< relative gap below which eigenvalues share a canonical basis
    double residual_tolerance = 1e-8;
};

/// Pairs of -H phi = lambda M phi, lambda ascending, phi M-orthonormal.
struct SpectralData {
    int level = 0;
    Eigen::VectorXd mass;
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors; ///< one column per pair; empty when values_only
    bool complete = false;   ///< every pair of the level is present
};

/// Throws EigSolverFailure.
SpectralData neumann_eigs(const HarmonicStructure& hs, const Hierarchy& h, int m, std::size_t count,
                          const EigOptions& opts = {});

/// Largest relative residual ||-H phi - lambda M phi|| / ||lambda M phi|| (absolute for lambda = 0).
double eigen_residual(const Hierarchy& h, const SpectralData& spec);

struct WeylFit {
    double slope = 0.0;
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    int points = 0; ///< samples of N used in the fit
};

/// Least-squares slope of log N(lambda) against log lambda, sampled log-uniformly over
/// the decade centred (geometrically) between the first positive and the largest eigenvalue.
WeylFit weyl_slope(const Eigen::VectorXd& values);

/// P_t f by spectral expansion.
Eigen::VectorXd heat_apply(const SpectralData& spec, const Eigen::VectorXd& f, double t);

/// (sum_x M(x) |v(x)|^p)^{1/p}; max for p = inf.
double mass_lp_norm(const Eigen::VectorXd& mass, const Eigen::VectorXd& v, double p);

struct HeatOptions {
    double log_step = 0.6931471805599453; ///< spacing of the t grid in log t
    int k = 0;                            ///< 0: smallest integer above sigma/2
};

/**
 * ||f||_{p,M} plus the l^q aggregate over a log-uniform t grid on [r^{m d_W}, 1]
 * of t^{-sigma/2} ||(t Delta)^k P_t f||_{p,M}, Delta = M^{-1} H. Finite q
 * uses trapezoid weights in log t.
 */
SeminormReport heat_besov_norm(const SpectralData& spec, const Dimensions& dims, double base_scale,
                               const Eigen::VectorXd& f, double p, double q, double sigma,
                               const HeatOptions& opts = {});

enum class Family { RandomTent, Harmonic, NearHarmonic };

/**
 * Seeded test functions on V_{Lambda_m}: a random harmonic part plus level-n
 * tents with N(0,1) r^{n eta d_W/2} coefficients, eta = sigma + U(0.1, 0.6)
 * per function. Each (seed, function, level) has its own stream, so the
 * family at level m+1 extends the family at level m.
 */
std::vector<VertexFunction> tent_family(const HarmonicStructure& hs, const Hierarchy& h, int m, double sigma,
                                        std::size_t count, std::uint64_t seed, Family family = Family::RandomTent);

struct EquivalenceOptions {
    double c_estimate = 0.0; ///< C(p); <= 0 estimates it from edge sums
    NormOptions norm;
    HeatOptions heat;
};

struct EquivalenceReport {
    double p = 2.0;
    double q = 2.0;
    double sigma = 0.0;
    int level = 0;
    std::uint64_t seed = 0;
    std::string lambda_method;
    std::string region;
    double c_estimate = 0.0;
    std::vector<double> heat;
    std::vector<double> lambda;
    std::vector<double> ratios;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    double spread = 0.0;
    std::vector<std::string> warnings;
    std::string disclaimer;
};

EquivalenceReport equivalence_experiment(const HarmonicStructure& hs, const Hierarchy& h, double p, double q,
                                         double sigma, int m, std::size_t count, std::uint64_t seed,
                                         Family family = Family::RandomTent, const EquivalenceOptions& opts = {});

std::string equivalence_json(const EquivalenceReport& report);

/// Relative change of the spread from one level to the next.
double spread_change(const EquivalenceReport& coarse, const EquivalenceReport& fine);

struct DivergenceDiagnostic {
    double sigma = 0.0;
    std::vector<int> levels;
    std::vector<double> lambda_growth; ///< growth factor of the direct Lambda contributions per level
    std::vector<double> heat_values;   ///< heat-side norm per level
    double heat_growth = 0.0;          ///< last heat value over the previous one
    bool fires = false;
};

/// Near-harmonic function, sigma above C(p): Lambda side grows geometrically, heat side should not.
DivergenceDiagnostic divergence_diagnostic(const HarmonicStructure& hs, const Hierarchy& h, double p, double sigma,
                                           const std::vector<int>& levels, std::uint64_t seed);

} // namespace pcf
