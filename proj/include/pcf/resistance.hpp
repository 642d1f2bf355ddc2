#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "pcf/cells.hpp"
#include "pcf/graph.hpp"

namespace pcf {

struct SolverOptions {
    std::size_t direct_limit = 200'000; ///< sparse Cholesky up to this many vertices, CG above
    std::size_t dense_limit = 4'000;    ///< dense grounded inverse (all-pairs) up to this size
    double tolerance = 1e-12;
    int max_iterations = 50'000;
};

/**
 * Effective resistances on one level graph.
 *
 * The Laplacian is grounded at vertex 0. Factorisations are built lazily on
 * first use; concurrent queries are safe once constructed.
 */
class ResistanceSolver {
public:
    explicit ResistanceSolver(const GraphOperator& op, SolverOptions opts = {});
    ~ResistanceSolver();
    ResistanceSolver(const ResistanceSolver&) = delete;
    ResistanceSolver& operator=(const ResistanceSolver&) = delete;

    std::size_t size() const { return n_; }
    int level() const { return level_; }

    /// R(x, y); throws SolverFailure when the iterative path does not converge.
    double resistance(std::uint32_t x, std::uint32_t y) const;

    /// Potential u with -H u = e_x - e_y and u(0) = 0.
    Eigen::VectorXd potential(std::uint32_t x, std::uint32_t y) const;

    bool dense() const { return n_ <= opts_.dense_limit; }

    /// All-pairs resistance matrix; only when dense().
    Eigen::MatrixXd all_pairs() const;

private:
    struct Factor;
    const Factor& factor() const;
    const Eigen::MatrixXd& grounded_inverse() const;

    int level_ = 0;
    std::size_t n_ = 0;
    SolverOptions opts_;
    Eigen::SparseMatrix<double> grounded_;
    mutable std::once_flag factor_once_;
    mutable std::unique_ptr<Factor> factor_;
    mutable std::once_flag inverse_once_;
    mutable Eigen::MatrixXd inverse_;
};

/// R(x, y) between two vertices of V_{Lambda_m}.
double effective_resistance(const Hierarchy& h, int m, std::uint32_t x, std::uint32_t y);

/// Locality constant k: non-adjacent Lambda_n cells are more than r^{n+k} apart.
struct SeparationBound {
    int k = 0;
    double min_ratio = 0.0; ///< min over sampled pairs of R / r^n
    bool loose = false;     ///< calibration saw near-degenerate separation
};

/// Measured on Lambda_n cells, n in 2..4, with resistances at a finer level.
SeparationBound calibrate_separation(const FractalDescriptor& desc, const SolverOptions& opts = {});

/// {y in V_{Lambda_m} : R(x, y) < t}, sorted. Candidates are limited to cells
/// adjacent (at the level the locality bound allows) to the cells around x.
std::vector<std::uint32_t> resistance_ball(const Hierarchy& h, const ResistanceSolver& solver, std::uint32_t x,
                                           double t, const SeparationBound& bound);

} // namespace pcf
