#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Sparse>

#include "pcf/cells.hpp"
#include "pcf/harmonic.hpp"
#include "pcf/representation.hpp"

namespace pcf {

/// H_{Lambda_m}: symmetric, zero row sums, non-negative off the diagonal.
struct GraphOperator {
    struct Contribution {
        std::uint32_t row = 0;
        std::uint32_t col = 0;
        std::uint32_t cell = 0;
        double conductance = 0.0;
    };

    int level = 0;
    Eigen::SparseMatrix<double> matrix;
    /// Off-diagonal per-cell contributions (row < col); empty unless requested.
    std::vector<Contribution> provenance;

    Eigen::Index size() const { return matrix.rows(); }
};

GraphOperator assemble_graph_laplacian(const Hierarchy& h, int m, bool with_provenance = false);

/// E_m(f) = -<H_{Lambda_m} f, f>, evaluated cell by cell without assembling.
double energy(const Hierarchy& h, const VertexFunction& f);
double energy(const GraphOperator& op, const VertexFunction& f);
/// H_{Lambda_m} f for f on V_{Lambda_m}, cell by cell.
Eigen::VectorXd apply_laplacian(const Hierarchy& h, const VertexFunction& f);

/// E_0 of a prototype vector.
double prototype_energy(const FractalDescriptor& desc, const Eigen::VectorXd& h0);

/// Per-cell values on Lambda_m of the cell-harmonic function with prototype values h0.
CellValues extend_cells(const HarmonicStructure& hs, const Hierarchy& h, const Eigen::VectorXd& h0, int m);

/// Refines per-cell values from Lambda_from to Lambda_to (cell-wise harmonic).
CellValues refine_cells(const HarmonicStructure& hs, const Hierarchy& h, const CellValues& coarse, int from,
                        int to);

/// Scatters per-cell values to vertices; reports the largest disagreement
/// between slots sharing a vertex.
VertexFunction gather_vertices(const Hierarchy& h, int m, const CellValues& cells, double* discrepancy = nullptr);

/// Per-cell values of a vertex function.
CellValues cell_values(const Hierarchy& h, const VertexFunction& f);

/// Harmonic extension of boundary data (interior prototype values filled first).
VertexFunction harmonic_extend(const HarmonicStructure& hs, const Hierarchy& h, const Eigen::VectorXd& boundary_values,
                               int m);

/// Piecewise-harmonic refinement of a level-n vertex function to level m.
VertexFunction refine(const HarmonicStructure& hs, const Hierarchy& h, const VertexFunction& f, int m);

/// Restriction of a level-m vertex function to V_{Lambda_n}, n <= m.
VertexFunction restrict_to_level(const Hierarchy& h, const VertexFunction& f, int n);

/// Matrix Market coordinate (symmetric, lower triangle) export.
void write_matrix_market(std::ostream& out, const GraphOperator& op);
/// Sidecar id map: id,word,prototype.
void write_id_map(std::ostream& out, const VertexTable& t);

} // namespace pcf
