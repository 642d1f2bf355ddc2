#include "pcf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "pcf/critical.hpp"
#include "pcf/errors.hpp"
#include "pcf/function.hpp"
#include "pcf/graph.hpp"

namespace pcf {

namespace {

/// Replaces each near-degenerate block of columns by the Gram-Schmidt
/// orthonormalisation of the projections of e_0, e_1, ... onto its span.
void canonicalise(Eigen::VectorXd& values, Eigen::MatrixXd& vectors, double tol) {
    const Eigen::Index k = values.size();
    Eigen::Index start = 0;
    while (start < k) {
        Eigen::Index end = start + 1;
        while (end < k && values(end) - values(end - 1) <= tol * std::max(std::abs(values(end)), 1.0)) ++end;
        const Eigen::Index width = end - start;
        const Eigen::MatrixXd block = vectors.middleCols(start, width);
        const double top = block.rowwise().norm().maxCoeff();
        Eigen::MatrixXd basis(width, width);
        Eigen::Index found = 0;
        for (Eigen::Index j = 0; j < block.rows() && found < width; ++j) {
            Eigen::VectorXd a = block.row(j).transpose();
            if (a.norm() <= 1e-3 * top) continue;
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index i = 0; i < found; ++i) a -= basis.col(i).dot(a) * basis.col(i);
            const double n = a.norm();
            if (n <= 1e-3 * top) continue;
            basis.col(found++) = a / n;
        }
        if (found < width) throw EigSolverFailure("could not build a canonical eigenbasis");
        vectors.middleCols(start, width) = block * basis;
        const double mean = values.segment(start, width).mean();
        values.segment(start, width).setConstant(mean);
        start = end;
    }
}

Eigen::MatrixXd m_orthonormalise(Eigen::MatrixXd x, const Eigen::VectorXd& mass) {
    const Eigen::VectorXd root = mass.cwiseSqrt();
    Eigen::MatrixXd y = root.asDiagonal() * x;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
    return root.cwiseInverse().asDiagonal() * q;
}

void dense_pairs(const Eigen::SparseMatrix<double>& k_sparse, const Eigen::VectorXd& mass, bool values_only,
                 Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
    const Eigen::VectorXd inv_root = mass.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd s = inv_root.asDiagonal() * Eigen::MatrixXd(k_sparse) * inv_root.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        s, values_only ? Eigen::EigenvaluesOnly : Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw EigSolverFailure("dense eigensolver did not converge");
    values = es.eigenvalues();
    if (!values_only) vectors = inv_root.asDiagonal() * es.eigenvectors();
}

void subspace_pairs(const Eigen::SparseMatrix<double>& k_sparse, const Eigen::VectorXd& mass, std::size_t count,
                    double tol, double cluster_tol, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
    const Eigen::Index n = k_sparse.rows();
    const auto requested = static_cast<Eigen::Index>(count);
    const Eigen::Index width = std::min<Eigen::Index>(n, requested + std::max<Eigen::Index>(20, requested / 2));
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, k_sparse.coeff(i, i) / mass(i));
    const double shift = 1e-8 * scale;
    Eigen::SparseMatrix<double> a = k_sparse;
    for (Eigen::Index i = 0; i < n; ++i) a.coeffRef(i, i) += shift * mass(i);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw EigSolverFailure("shifted factorisation failed");

    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x(n, width);
    for (Eigen::Index j = 0; j < width; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = g(rng);
    x = m_orthonormalise(x, mass);
    for (int it = 0; it < 1000; ++it) {
        Eigen::MatrixXd y = ldlt.solve(mass.asDiagonal() * x);
        y = m_orthonormalise(y, mass);
        const Eigen::MatrixXd ky = k_sparse * y;
        Eigen::MatrixXd reduced = y.transpose() * ky;
        reduced = 0.5 * (reduced + reduced.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
        x = y * es.eigenvectors();
        values = es.eigenvalues();
        // Keep the whole cluster of the last requested pair so its canonical basis is well defined.
        Eigen::Index want = static_cast<Eigen::Index>(count);
        while (want < width - 1 &&
               values(want) - values(want - 1) <= cluster_tol * std::max(std::abs(values(want)), 1.0))
            ++want;
        const Eigen::MatrixXd r = k_sparse * x.leftCols(want) - mass.asDiagonal() * x.leftCols(want) *
                                                                     values.head(want).asDiagonal();
        double worst = 0.0;
        const double floor = 1e-3 * std::abs(values(want - 1));
        for (Eigen::Index j = 0; j < want; ++j) {
            const double denom = std::max(std::abs(values(j)), floor) * (mass.asDiagonal() * x.col(j)).norm();
            worst = std::max(worst, r.col(j).norm() / denom);
        }
        if (worst <= tol) {
            values = values.head(want).eval();
            vectors = x.leftCols(want);
            return;
        }
    }
    throw EigSolverFailure("shift-invert subspace iteration did not converge");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t function, std::uint64_t level) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(function), static_cast<std::uint32_t>(level)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (std::uint64_t(words[0]) << 32) | words[1];
}

nlohmann::ordered_json finite_or_string(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    return x;
}

} // namespace

MassMatrix mass_matrix(const HarmonicStructure& hs, const Hierarchy& h, int m) {
    const VertexTable& t = h.table(m);
    MassMatrix out;
    out.level = m;
    out.mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.vertex_count));
    const int v0 = t.prototype_size;
    for (std::size_t c = 0; c < t.cell_count(); ++c)
        for (int a = 0; a < v0; ++a) out.mass(t.vertex(c, a)) += t.mu[c] * hs.alpha(a);
    return out;
}

SpectralData neumann_eigs(const HarmonicStructure& hs, const Hierarchy& h, int m, std::size_t count,
                          const EigOptions& opts) {
    const GraphOperator op = assemble_graph_laplacian(h, m);
    const Eigen::SparseMatrix<double> k = -op.matrix;
    SpectralData out;
    out.level = m;
    out.mass = mass_matrix(hs, h, m).mass;
    const auto n = static_cast<std::size_t>(k.rows());
    if (count == 0 || count > n) count = n;

    if (n <= opts.dense_limit) {
        dense_pairs(k, out.mass, opts.values_only, out.values, out.vectors);
    } else {
        if (opts.values_only) throw EigSolverFailure("values-only mode needs the dense path");
        subspace_pairs(k, out.mass, count, opts.residual_tolerance * 1e-2, opts.cluster_tolerance, out.values,
                       out.vectors);
    }
    const double top = out.values.cwiseAbs().maxCoeff();
    if (std::abs(out.values(0)) <= 1e-9 * std::max(top, 1.0)) out.values(0) = 0.0;
    if (!opts.values_only) {
        canonicalise(out.values, out.vectors, opts.cluster_tolerance);
        if (out.values(0) == 0.0 && (out.values.size() < 2 || out.values(1) > 0.0))
            out.vectors.col(0).setConstant(1.0 / std::sqrt(out.mass.sum()));
        out.vectors = out.vectors.leftCols(static_cast<Eigen::Index>(count)).eval();
    }
    out.values = out.values.head(static_cast<Eigen::Index>(count)).eval();
    out.complete = count == n;
    return out;
}

double eigen_residual(const Hierarchy& h, const SpectralData& spec) {
    const GraphOperator op = assemble_graph_laplacian(h, spec.level);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < spec.vectors.cols(); ++j) {
        const Eigen::VectorXd mphi = spec.mass.cwiseProduct(spec.vectors.col(j));
        const Eigen::VectorXd r = -(op.matrix * spec.vectors.col(j)) - spec.values(j) * mphi;
        const double denom = spec.values(j) > 0.0 ? spec.values(j) * mphi.norm() : 1.0;
        worst = std::max(worst, r.norm() / denom);
    }
    return worst;
}

WeylFit weyl_slope(const Eigen::VectorXd& values) {
    std::vector<double> v(values.data(), values.data() + values.size());
    std::sort(v.begin(), v.end());
    const double top = v.back();
    const auto first = std::find_if(v.begin(), v.end(), [&](double x) { return x > 1e-10 * top; });
    if (first == v.end()) throw Error("no positive eigenvalues");
    const double centre = std::sqrt(*first * top);
    WeylFit fit;
    fit.lambda_lo = centre / std::sqrt(10.0);
    fit.lambda_hi = centre * std::sqrt(10.0);
    // N(lambda) sampled log-uniformly across the window.
    constexpr int samples = 400;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    const double a = std::log(fit.lambda_lo), b = std::log(fit.lambda_hi);
    for (int i = 0; i < samples; ++i) {
        const double x = a + (b - a) * i / (samples - 1);
        const auto count = std::upper_bound(v.begin(), v.end(), std::exp(x)) - v.begin();
        if (count == 0) continue;
        const double y = std::log(static_cast<double>(count));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) throw Error("too few eigenvalues in the Weyl window");
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.points = n;
    return fit;
}

Eigen::VectorXd heat_apply(const SpectralData& spec, const Eigen::VectorXd& f, double t) {
    if (!(t >= 0.0)) throw Error("heat time must be >= 0");
    if (f.size() != spec.mass.size()) throw DimensionMismatch("function does not match the spectral level");
    if (spec.vectors.cols() == 0) throw Error("spectral data has no eigenvectors");
    const Eigen::VectorXd c = spec.vectors.transpose() * spec.mass.cwiseProduct(f);
    const Eigen::VectorXd decay = (-t * spec.values.array()).exp();
    return spec.vectors * decay.cwiseProduct(c);
}

double mass_lp_norm(const Eigen::VectorXd& mass, const Eigen::VectorXd& v, double p) {
    if (std::isinf(p)) return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += mass(i) * std::pow(std::abs(v(i)), p);
    return std::pow(s, 1.0 / p);
}

SeminormReport heat_besov_norm(const SpectralData& spec, const Dimensions& dims, double base_scale,
                               const Eigen::VectorXd& f, double p, double q, double sigma, const HeatOptions& opts) {
    if (!(p >= 1.0) || !(q >= 1.0)) throw Error("p and q must be >= 1");
    if (f.size() != spec.mass.size()) throw DimensionMismatch("function does not match the spectral level");
    SeminormReport r;
    r.method = "heat";
    r.p = p;
    r.q = q;
    r.sigma = sigma;
    const int k = opts.k > 0 ? opts.k : static_cast<int>(std::floor(sigma / 2)) + 1;
    if (!spec.complete) r.warnings.push_back("truncated spectrum: high-frequency content is dropped");
    const Eigen::VectorXd c = spec.vectors.transpose() * spec.mass.cwiseProduct(f);
    const double log_min = spec.level * dims.walk * std::log(base_scale);
    const int steps = log_min < 0.0 ? std::max(1, static_cast<int>(std::ceil(-log_min / opts.log_step))) : 0;
    const double h = steps ? -log_min / steps : 0.0;
    for (int j = 0; j <= steps; ++j) {
        const double t = std::exp(log_min + j * h);
        const Eigen::ArrayXd lt = t * spec.values.array();
        const Eigen::VectorXd coeff = (lt.pow(k) * (-lt).exp()).matrix().cwiseProduct(c);
        LevelTerm term;
        term.level = j;
        term.t = t;
        term.raw = mass_lp_norm(spec.mass, spec.vectors * coeff, p);
        double w = 1.0;
        if (!std::isinf(q) && steps) w = std::pow(h * ((j == 0 || j == steps) ? 0.5 : 1.0), 1.0 / q);
        term.weight = w * std::pow(t, -sigma / 2);
        term.contribution = term.weight * term.raw;
        r.levels.push_back(term);
    }
    std::vector<double> contrib;
    for (const auto& l : r.levels) contrib.push_back(l.contribution);
    r.seminorm = lq_aggregate(contrib, q);
    r.lp_part = mass_lp_norm(spec.mass, f, p);
    r.value = r.lp_part + r.seminorm;
    r.depth = k;
    return r;
}

std::vector<VertexFunction> tent_family(const HarmonicStructure& hs, const Hierarchy& h, int m, double sigma,
                                        std::size_t count, std::uint64_t seed, Family family) {
    const double base = h.base_scale();
    const double dw = hs.dims.walk;
    const auto nb = static_cast<Eigen::Index>(hs.descriptor.boundary.size());
    constexpr std::uint64_t kEtaStream = 0xffffffffu;
    std::vector<VertexFunction> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::normal_distribution<double> g;
        std::mt19937_64 eta_rng(stream_seed(seed, i, kEtaStream));
        const double eta = sigma + std::uniform_real_distribution<double>(0.1, 0.6)(eta_rng);
        std::mt19937_64 rng0(stream_seed(seed, i, 0));
        Eigen::VectorXd b(nb);
        for (auto& x : b) x = g(rng0);
        VertexFunction f = harmonic_extend(hs, h, b, 0);
        for (int n = 1; n <= m; ++n) {
            f = refine(hs, h, f, n);
            if (family == Family::Harmonic) continue;
            std::mt19937_64 rng(stream_seed(seed, i, static_cast<std::uint64_t>(n)));
            const double amp = std::pow(base, n * eta * dw / 2) * (family == Family::NearHarmonic ? 1e-3 : 1.0);
            const VertexTable& t = h.table(n);
            for (std::size_t v = 0; v < t.vertex_count; ++v)
                if (t.in_ring(v)) f.values(static_cast<Eigen::Index>(v)) += amp * g(rng);
        }
        out.push_back(std::move(f));
    }
    return out;
}

EquivalenceReport equivalence_experiment(const HarmonicStructure& hs, const Hierarchy& h, double p, double q,
                                         double sigma, int m, std::size_t count, std::uint64_t seed, Family family,
                                         const EquivalenceOptions& opts) {
    EquivalenceReport rep;
    rep.p = p;
    rep.q = q;
    rep.sigma = sigma;
    rep.level = m;
    rep.seed = seed;
    rep.disclaimer =
        "finite-dimensional proxy: bounded ratios are numerical evidence only, not a proof of norm equivalence";
    const Dimensions& d = hs.dims;
    rep.c_estimate = opts.c_estimate > 0.0
                         ? opts.c_estimate
                         : critical_from_growth(d, h.base_scale(), p, growth_exponent(hs, p, 6, seed).lambda);
    const RegionPoint region = region_classify(d, p, sigma, rep.c_estimate);
    rep.region = region_name(region.region);
    if (region.region != Region::A1 && region.region != Region::A2)
        rep.warnings.push_back("(1/p, sigma) is not strictly below the C estimate");
    const bool haar = sigma < critical_line_1(d, p);
    rep.lambda_method = haar ? "haar" : "tent";

    const auto spec = neumann_eigs(hs, h, m, 0);
    NormOptions norm = opts.norm;
    norm.max_level = m;
    for (const auto& f : tent_family(hs, h, m, sigma, count, seed, family)) {
        const double heat = heat_besov_norm(spec, d, h.base_scale(), f.values, p, q, sigma, opts.heat).value;
        double lam = 0.0;
        if (haar) {
            const auto pw = to_piecewise(h, f);
            lam = lp_norm(hs, h, pw, p, norm.depth).value + lambda_norm_haar(hs, h, pw, p, q, sigma, norm).seminorm;
        } else {
            lam = lambda_norm_tent(hs, h, tent_interpolation(hs, h, f), p, q, sigma, norm).value;
        }
        rep.heat.push_back(heat);
        rep.lambda.push_back(lam);
        rep.ratios.push_back(heat / lam);
    }
    if (!rep.ratios.empty()) {
        rep.min_ratio = *std::min_element(rep.ratios.begin(), rep.ratios.end());
        rep.max_ratio = *std::max_element(rep.ratios.begin(), rep.ratios.end());
        rep.spread = rep.max_ratio / rep.min_ratio;
    }
    return rep;
}

std::string equivalence_json(const EquivalenceReport& r) {
    nlohmann::ordered_json j;
    j["p"] = finite_or_string(r.p);
    j["q"] = finite_or_string(r.q);
    j["sigma"] = r.sigma;
    j["level"] = r.level;
    j["seed"] = r.seed;
    j["region"] = r.region;
    j["c_estimate"] = r.c_estimate;
    j["lambda_method"] = r.lambda_method;
    j["min_ratio"] = finite_or_string(r.min_ratio);
    j["max_ratio"] = finite_or_string(r.max_ratio);
    j["spread"] = finite_or_string(r.spread);
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.ratios.size(); ++i)
        rows.push_back({{"index", i},
                        {"heat", finite_or_string(r.heat[i])},
                        {"lambda", finite_or_string(r.lambda[i])},
                        {"ratio", finite_or_string(r.ratios[i])}});
    j["functions"] = rows;
    j["warnings"] = r.warnings;
    j["disclaimer"] = r.disclaimer;
    return j.dump(2);
}

double spread_change(const EquivalenceReport& coarse, const EquivalenceReport& fine) {
    return std::abs(fine.spread / coarse.spread - 1.0);
}

DivergenceDiagnostic divergence_diagnostic(const HarmonicStructure& hs, const Hierarchy& h, double p, double sigma,
                                           const std::vector<int>& levels, std::uint64_t seed) {
    DivergenceDiagnostic out;
    out.sigma = sigma;
    out.levels = levels;
    for (int m : levels) {
        const auto f = tent_family(hs, h, m, sigma, 1, seed, Family::NearHarmonic).front();
        const IpQuadrature quad(hs, h, m);
        NormOptions norm;
        norm.max_level = m;
        const auto direct = lambda_norm_direct(hs, h, quad, to_piecewise(h, f), p, INFINITY, sigma, norm);
        out.lambda_growth.push_back(direct.growth_factor);
        const auto spec = neumann_eigs(hs, h, m, 0);
        out.heat_values.push_back(heat_besov_norm(spec, hs.dims, h.base_scale(), f.values, p, INFINITY, sigma).value);
    }
    if (out.heat_values.size() >= 2)
        out.heat_growth = out.heat_values.back() / out.heat_values[out.heat_values.size() - 2];
    out.fires = !out.lambda_growth.empty() && out.lambda_growth.back() > 1.05 && out.heat_growth <= 1.05;
    return out;
}

} // namespace pcf
