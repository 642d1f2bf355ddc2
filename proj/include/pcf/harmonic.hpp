#pragma once

#include <vector>

#include <Eigen/Dense>

#include "pcf/cells.hpp"
#include "pcf/descriptor.hpp"

namespace pcf {

/**
 * Harmonic structure derived from (H, r).
 *
 * extension[i] maps the prototype values of a cell-harmonic function to the
 * prototype values of its restriction to the i-th sub-cell, so the values on
 * F_w are A_{w_m} ... A_{w_1} h (the letter nearest the cell applies last).
 * Interior prototype vertices are treated as extension nodes too; functions
 * in H_0 fill them from the boundary through `boundary_fill`.
 */
struct HarmonicStructure {
    FractalDescriptor descriptor;
    Dimensions dims;
    std::vector<double> mu;                ///< mu_i = r_i^{d_H}
    std::vector<Eigen::MatrixXd> extension; ///< A_1..A_N
    Eigen::VectorXd alpha;                 ///< integral of the cell-harmonic Lagrange basis
    Eigen::MatrixXd gram;                  ///< integral of products of the Lagrange basis
    Eigen::MatrixXd boundary_fill;         ///< v0 x |V_0|: H_0 element from boundary values
    double trace_residual = 0.0;           ///< on all prototype vertices
    double boundary_trace_residual = 0.0;  ///< after eliminating interior prototype vertices

    int prototype_size() const { return descriptor.prototype_size; }

    /// Prototype values of the H_0 element with the given boundary values.
    Eigen::VectorXd fill(const Eigen::VectorXd& boundary_values) const;

    /// Values on F_w of the cell-harmonic function with prototype values h.
    Eigen::VectorXd restrict_to(const Eigen::VectorXd& h, std::span<const std::uint8_t> w) const;
};

/// Throws HarmonicStructureViolation, SingularInterior or FixedPointDivergence.
HarmonicStructure derive_extension(const FractalDescriptor& desc);

/// Schur complement of a symmetric matrix onto the listed indices.
Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& m, const std::vector<int>& keep);

} // namespace pcf
