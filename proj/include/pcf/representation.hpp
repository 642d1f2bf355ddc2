#pragma once

#include <Eigen/Dense>

namespace pcf {

/// One row per cell, one column per prototype vertex.
using CellValues = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raw values on V_{Lambda_m}, indexed by canonical vertex id.
struct VertexFunction {
    int level = 0;
    Eigen::VectorXd values;
};

/**
 * Level-m function that is harmonic inside every cell F_wK, w in Lambda_m,
 * stored by its cell-boundary values. Members of T_m may jump across cells,
 * so continuity is tracked rather than assumed.
 */
struct PiecewiseHarmonic {
    int level = 0;
    CellValues values;
    bool continuous = true;
};

} // namespace pcf
