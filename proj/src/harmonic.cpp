#include "pcf/harmonic.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>

#include "pcf/errors.hpp"

namespace pcf {

namespace {

constexpr double kTraceViolation = 1e-8;
constexpr double kFixedPointResidual = 1e-12;

std::vector<int> complement(int n, const std::vector<int>& keep) {
    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
        if (std::find(keep.begin(), keep.end(), i) == keep.end()) rest.push_back(i);
    return rest;
}

Eigen::MatrixXd take(const Eigen::MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
    return out;
}

// -H_II^{-1} H_IB: interior values of the energy minimiser given the kept values.
Eigen::MatrixXd interior_solve(const Eigen::MatrixXd& m, const std::vector<int>& keep,
                               const std::vector<int>& rest) {
    if (rest.empty()) return Eigen::MatrixXd(0, static_cast<Eigen::Index>(keep.size()));
    const Eigen::MatrixXd mii = take(m, rest, rest);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(mii);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) throw SingularInterior("interior block of the energy is singular");
    return -lu.solve(take(m, rest, keep));
}

// Normalised solution of x = sum_i mu_i A_i^T x with sum x = 1.
Eigen::VectorXd integration_weights(const std::vector<Eigen::MatrixXd>& a, const std::vector<double>& mu) {
    const Eigen::Index n = a.front().rows();
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < a.size(); ++i) t += mu[i] * a[i].transpose();

    Eigen::MatrixXd sys(n + 1, n);
    sys.topRows(n) = Eigen::MatrixXd::Identity(n, n) - t;
    sys.row(n).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs(n) = 1.0;
    Eigen::VectorXd x = sys.colPivHouseholderQr().solve(rhs);
    // The affine map contracts on the simplex; a few sweeps remove rounding.
    for (int it = 0; it < 8; ++it) {
        x = t * x;
        x /= x.sum();
    }
    const double residual = (x - t * x).cwiseAbs().maxCoeff();
    if (!(residual <= kFixedPointResidual) || x.minCoeff() < -kFixedPointResidual)
        throw FixedPointDivergence("integration weights do not converge (residual " + std::to_string(residual) +
                                   ")");
    return x.cwiseMax(0.0);
}

Eigen::MatrixXd gram_fixed_point(const std::vector<Eigen::MatrixXd>& a, const std::vector<double>& mu) {
    const Eigen::Index n = a.front().rows();
    const Eigen::Index n2 = n * n;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n2, n2);
    for (std::size_t i = 0; i < a.size(); ++i)
        k += mu[i] * Eigen::kroneckerProduct(a[i].transpose(), a[i].transpose()).eval();

    Eigen::MatrixXd sys(n2 + 1, n2);
    sys.topRows(n2) = Eigen::MatrixXd::Identity(n2, n2) - k;
    sys.row(n2).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n2 + 1);
    rhs(n2) = 1.0;
    Eigen::VectorXd g = sys.colPivHouseholderQr().solve(rhs);
    Eigen::MatrixXd gram = Eigen::Map<Eigen::MatrixXd>(g.data(), n, n);
    gram = 0.5 * (gram + gram.transpose()).eval();

    auto apply = [&](const Eigen::MatrixXd& x) {
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < a.size(); ++i) y += mu[i] * a[i].transpose() * x * a[i];
        return y;
    };
    for (int it = 0; it < 8; ++it) {
        gram = apply(gram);
        gram /= gram.sum();
    }
    const double residual = (gram - apply(gram)).cwiseAbs().maxCoeff();
    if (!(residual <= kFixedPointResidual))
        throw FixedPointDivergence("Gram fixed point does not converge (residual " + std::to_string(residual) + ")");
    return gram;
}

} // namespace

Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& m, const std::vector<int>& keep) {
    const auto rest = complement(static_cast<int>(m.rows()), keep);
    Eigen::MatrixXd s = take(m, keep, keep);
    if (!rest.empty()) s += take(m, keep, rest) * interior_solve(m, keep, rest);
    return s;
}

Eigen::VectorXd HarmonicStructure::fill(const Eigen::VectorXd& boundary_values) const {
    if (boundary_values.size() != boundary_fill.cols())
        throw DimensionMismatch("expected " + std::to_string(boundary_fill.cols()) + " boundary values");
    return boundary_fill * boundary_values;
}

Eigen::VectorXd HarmonicStructure::restrict_to(const Eigen::VectorXd& h, std::span<const std::uint8_t> w) const {
    Eigen::VectorXd v = h;
    for (auto letter : w) v = extension[letter] * v;
    return v;
}

HarmonicStructure derive_extension(const FractalDescriptor& desc) {
    desc.validate();
    HarmonicStructure hs;
    hs.descriptor = desc;
    hs.dims = dims(desc);
    for (double ri : desc.r) hs.mu.push_back(std::pow(ri, hs.dims.hausdorff));

    const int v0 = desc.prototype_size;
    const LevelOneTemplate tpl = level_one_template(desc);
    const int n1 = tpl.classes;

    Eigen::MatrixXd h1 = Eigen::MatrixXd::Zero(n1, n1);
    for (int i = 0; i < desc.branches; ++i)
        for (int a = 0; a < v0; ++a)
            for (int b = 0; b < v0; ++b)
                h1(tpl.slot_class[i * v0 + a], tpl.slot_class[i * v0 + b]) += desc.H(a, b) / desc.r[i];

    const std::vector<int>& anchored = tpl.anchor_class;
    const auto rest = complement(n1, anchored);
    const Eigen::MatrixXd interior = interior_solve(h1, anchored, rest);

    // Class values as a linear function of the prototype values.
    Eigen::MatrixXd classes = Eigen::MatrixXd::Zero(n1, v0);
    for (int a = 0; a < v0; ++a) classes(anchored[a], a) = 1.0;
    for (std::size_t k = 0; k < rest.size(); ++k) classes.row(rest[k]) = interior.row(static_cast<Eigen::Index>(k));

    for (int i = 0; i < desc.branches; ++i) {
        Eigen::MatrixXd a(v0, v0);
        for (int b = 0; b < v0; ++b) a.row(b) = classes.row(tpl.slot_class[i * v0 + b]);
        hs.extension.push_back(std::move(a));
    }

    Eigen::MatrixXd trace = take(h1, anchored, anchored);
    if (!rest.empty()) trace += take(h1, anchored, rest) * interior;
    hs.trace_residual = (trace - desc.H).cwiseAbs().maxCoeff();
    hs.boundary_trace_residual =
        (schur_complement(trace, desc.boundary) - schur_complement(desc.H, desc.boundary)).cwiseAbs().maxCoeff();
    if (hs.trace_residual > kTraceViolation || hs.boundary_trace_residual > kTraceViolation)
        throw HarmonicStructureViolation("level-1 trace differs from E_0 by " + std::to_string(hs.trace_residual) +
                                         "; (H, r) is not a harmonic structure");

    const int nb = static_cast<int>(desc.boundary.size());
    const auto inner = desc.interior();
    hs.boundary_fill = Eigen::MatrixXd::Zero(v0, nb);
    for (int j = 0; j < nb; ++j) hs.boundary_fill(desc.boundary[j], j) = 1.0;
    if (!inner.empty()) {
        const Eigen::MatrixXd x = interior_solve(desc.H, desc.boundary, inner);
        for (std::size_t k = 0; k < inner.size(); ++k) hs.boundary_fill.row(inner[k]) = x.row(static_cast<Eigen::Index>(k));
    }

    hs.alpha = integration_weights(hs.extension, hs.mu);
    hs.gram = gram_fixed_point(hs.extension, hs.mu);
    return hs;
}

} // namespace pcf
