#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcf/cells.hpp"
#include "pcf/function.hpp"
#include "pcf/harmonic.hpp"
#include "pcf/representation.hpp"
#include "pcf/resistance.hpp"

namespace pcf {

struct IpOptions {
    bool monte_carlo = false;
    std::uint64_t seed = 0;
    std::size_t samples = 200'000;
};

struct IpValue {
    double value = 0.0;
    double standard_error = 0.0; ///< Monte Carlo only
};

/**
 * I_p(f, t) by quadrature on the cell-boundary slots of Lambda_L: slot (w, a)
 * carries mass mu_w alpha_a and the value of f's piece on F_wK at F_w q_a.
 * For continuous f this is the vertex-mass rule of the mass matrix; slots
 * sharing a vertex have resistance 0, so jumps of discontinuous f are seen.
 */
class IpQuadrature {
public:
    IpQuadrature(const HarmonicStructure& hs, const Hierarchy& h, int level, SolverOptions opts = {});
    ~IpQuadrature();

    int level() const { return level_; }

    /// I_p(f, t) for every t (any order). p may be infinity.
    std::vector<IpValue> evaluate(const PiecewiseHarmonic& f, double p, std::span<const double> ts,
                                  const IpOptions& opts = {}) const;
    IpValue evaluate(const PiecewiseHarmonic& f, double p, double t, const IpOptions& opts = {}) const;

    double resistance(std::uint32_t x, std::uint32_t y) const;

private:
    Eigen::MatrixXd slot_values(const PiecewiseHarmonic& f) const;

    const HarmonicStructure& hs_;
    const Hierarchy& h_;
    int level_ = 0;
    std::unique_ptr<ResistanceSolver> solver_;
    Eigen::MatrixXd dense_;
    SeparationBound bound_;
    std::vector<double> slot_mass_;
};

/// Convenience: one-off I_p at quadrature level `level`.
IpValue ip_functional(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, double p, double t,
                      int level, const IpOptions& opts = {});

struct LevelTerm {
    int level = 0;
    double t = 0.0;      ///< r^m
    double raw = 0.0;    ///< I_p(f, r^m), ||E~[f|Lambda_m]||_p, ||H f||_p or ||f_m||_p
    double weight = 0.0; ///< scale factor applied to raw
    double contribution = 0.0;
};

struct SeminormReport {
    double p = 2.0;
    double q = 2.0;
    double sigma = 0.0;
    std::string method; ///< direct, haar, graph, tent, heat
    double value = 0.0;     ///< lp_part + seminorm
    double lp_part = 0.0;   ///< ||f||_p when the method includes it, else 0
    double seminorm = 0.0;  ///< l^q aggregate of the contributions
    std::vector<LevelTerm> levels;
    std::vector<std::string> warnings;
    int quadrature_level = -1;
    int depth = -1;
    std::optional<std::uint64_t> seed;
    double growth_factor = 0.0; ///< exp of the fitted slope of log contributions over the upper half of levels
    bool diverging = false;
};

/// (sum c^q)^{1/q}, or max for q = inf.
double lq_aggregate(std::span<const double> c, double q);

/// Sets growth_factor / diverging from the level table.
void mark_growth(SeminormReport& report, double threshold = 1.05);

struct NormOptions {
    int max_level = 6;   ///< M: levels 0..M
    int depth = 5;       ///< L^p sampling depth for p != 2
    IpOptions ip;
};

SeminormReport lambda_norm_direct(const HarmonicStructure& hs, const Hierarchy& h, const IpQuadrature& quad,
                                  const PiecewiseHarmonic& f, double p, double q, double sigma,
                                  const NormOptions& opts = {});

SeminormReport lambda_norm_haar(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, double p,
                                double q, double sigma, const NormOptions& opts = {});

SeminormReport lambda_norm_graph(const HarmonicStructure& hs, const Hierarchy& h, const VertexFunction& f, double p,
                                 double q, double sigma, const NormOptions& opts = {});

SeminormReport lambda_norm_tent(const HarmonicStructure& hs, const Hierarchy& h, const TentSeries& series, double p,
                                double q, double sigma, const NormOptions& opts = {});

/// Deterministic JSON rendering of a report.
std::string report_json(const SeminormReport& report);

enum class Region { A1, A2, B, AboveC, OnBorder };
std::string region_name(Region r);

struct RegionPoint {
    double inv_p = 0.0;
    double sigma = 0.0;
    Region region = Region::A2;
};

double critical_line_1(const Dimensions& d, double p);
double critical_line_2(const Dimensions& d, double p);

/// Lower and upper structural bounds on C(p).
std::pair<double, double> critical_bounds(const Dimensions& d, double p);

RegionPoint region_classify(const Dimensions& d, double p, double sigma, double c_estimate, double tol = 1e-12);

struct RegionRow {
    double inv_p = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    double c_hat = 0.0;
    double c_lower = 0.0;
    double c_upper = 0.0;
};

std::vector<RegionRow> region_curves(const Dimensions& d, std::span<const double> p_grid,
                                     std::span<const double> c_hat);

} // namespace pcf
