#include "pcf/function.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "pcf/errors.hpp"
#include "pcf/io.hpp"
#include "pcf/graph.hpp"

namespace pcf {

namespace {

bool is_prefix(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

// All words of length d: stacked composite maps and the quadrature weights
// mu_u * alpha_a of their boundary points.
struct RefinedRule {
    Eigen::MatrixXd maps;    ///< (N^d * v0) x v0
    Eigen::VectorXd weights; ///< N^d * v0
};

RefinedRule refined_rule(const HarmonicStructure& hs, int depth) {
    const int v0 = hs.prototype_size();
    std::vector<Eigen::MatrixXd> mats{Eigen::MatrixXd::Identity(v0, v0)};
    std::vector<double> mass{1.0};
    for (int k = 0; k < depth; ++k) {
        std::vector<Eigen::MatrixXd> next;
        std::vector<double> next_mass;
        next.reserve(mats.size() * hs.extension.size());
        for (std::size_t j = 0; j < mats.size(); ++j)
            for (std::size_t i = 0; i < hs.extension.size(); ++i) {
                next.push_back(hs.extension[i] * mats[j]);
                next_mass.push_back(mass[j] * hs.mu[i]);
            }
        mats = std::move(next);
        mass = std::move(next_mass);
    }
    RefinedRule rule;
    const auto n = static_cast<Eigen::Index>(mats.size());
    rule.maps.resize(n * v0, v0);
    rule.weights.resize(n * v0);
    for (Eigen::Index j = 0; j < n; ++j) {
        rule.maps.middleRows(j * v0, v0) = mats[static_cast<std::size_t>(j)];
        rule.weights.segment(j * v0, v0) = mass[static_cast<std::size_t>(j)] * hs.alpha;
    }
    return rule;
}

// Sum over cells of mu_c * sum_u mu_u * sum_a alpha_a |(B_u v_c)_a|^p, or the max for p = inf.
double refined_power_sum(const HarmonicStructure& hs, const VertexTable& t, const CellValues& values, double p,
                         int depth) {
    const RefinedRule rule = refined_rule(hs, depth);
    const Eigen::Index cells = values.rows();
    const Eigen::Index chunk = std::max<Eigen::Index>(1, 4'000'000 / std::max<Eigen::Index>(1, rule.maps.rows()));
    const bool sup = std::isinf(p);
    double total = 0.0;
    for (Eigen::Index start = 0; start < cells; start += chunk) {
        const Eigen::Index len = std::min(chunk, cells - start);
        const Eigen::MatrixXd sampled = rule.maps * values.middleRows(start, len).transpose();
        for (Eigen::Index c = 0; c < len; ++c) {
            const auto col = sampled.col(c).cwiseAbs();
            if (sup) {
                total = std::max(total, col.maxCoeff());
            } else {
                total += t.mu[static_cast<std::size_t>(start + c)] * rule.weights.dot(col.array().pow(p).matrix());
            }
        }
    }
    return total;
}

} // namespace

Eigen::VectorXd harmonic_integral_weights(const HarmonicStructure& hs) {
    Eigen::VectorXd image = Eigen::VectorXd::Zero(hs.alpha.size());
    for (std::size_t i = 0; i < hs.extension.size(); ++i) image += hs.mu[i] * hs.extension[i].transpose() * hs.alpha;
    const double residual = (image - hs.alpha).cwiseAbs().maxCoeff();
    if (residual > 1e-12 || std::abs(hs.alpha.sum() - 1.0) > 1e-12)
        throw FixedPointDivergence("integration weights fail the self-similar identity by " + std::to_string(residual));
    return hs.alpha;
}

PiecewiseHarmonic to_piecewise(const Hierarchy& h, const VertexFunction& f) {
    return {f.level, cell_values(h, f), true};
}

PiecewiseHarmonic refine(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, int m) {
    return {m, refine_cells(hs, h, f.values, f.level, m), f.continuous};
}

PiecewiseHarmonic piecewise_constant(const Hierarchy& h, int m, const Eigen::VectorXd& per_cell) {
    const VertexTable& t = h.table(m);
    if (static_cast<std::size_t>(per_cell.size()) != t.cell_count())
        throw DimensionMismatch("expected one value per Lambda_" + std::to_string(m) + " cell");
    PiecewiseHarmonic f;
    f.level = m;
    f.values = per_cell.replicate(1, t.prototype_size);
    f.continuous = continuity_gap(h, f) <= 1e-12;
    return f;
}

double continuity_gap(const Hierarchy& h, const PiecewiseHarmonic& f) {
    double gap = 0.0;
    gather_vertices(h, f.level, f.values, &gap);
    return gap;
}

double cell_average(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f,
                    std::span<const std::uint8_t> w) {
    const VertexTable& t = h.table(f.level);
    double total = 0.0;
    bool found = false;
    for (std::size_t c = 0; c < t.cell_count(); ++c) {
        const auto word = t.words[c];
        const Eigen::VectorXd v = f.values.row(static_cast<Eigen::Index>(c)).transpose();
        if (is_prefix(word, w)) {
            return hs.alpha.dot(hs.restrict_to(v, w.subspan(word.size())));
        }
        if (is_prefix(w, word)) {
            total += t.mu[c] * hs.alpha.dot(v);
            found = true;
        }
    }
    if (!found) throw Error("word " + format_word(w) + " is not covered by Lambda_" + std::to_string(f.level));
    return total / cell_measure(hs.descriptor, hs.dims, w);
}

double HaarCoefficients::layer_norm(const Hierarchy& h, int n, double p) const {
    return lp_norm_piecewise_constant(h.table(n), layer.at(static_cast<std::size_t>(n)), p);
}

double lp_norm_piecewise_constant(const VertexTable& t, const Eigen::VectorXd& per_cell, double p) {
    if (std::isinf(p)) return per_cell.size() ? per_cell.cwiseAbs().maxCoeff() : 0.0;
    double sum = 0.0;
    for (Eigen::Index c = 0; c < per_cell.size(); ++c)
        sum += t.mu[static_cast<std::size_t>(c)] * std::pow(std::abs(per_cell(c)), p);
    return std::pow(sum, 1.0 / p);
}

HaarCoefficients conditional_expectation(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f,
                                         int m) {
    const PiecewiseHarmonic g = f.level < m ? refine(hs, h, f, m) : f;
    const int top = g.level;
    HaarCoefficients out;
    out.level = m;
    std::vector<Eigen::VectorXd> e(static_cast<std::size_t>(top) + 1);
    e[static_cast<std::size_t>(top)] = g.values * hs.alpha;
    for (int n = top; n > 0; --n) {
        const VertexTable& t = h.table(n);
        const VertexTable& up = h.table(n - 1);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(up.cell_count()));
        for (std::size_t c = 0; c < t.cell_count(); ++c) {
            const auto p = static_cast<std::size_t>(t.parent[c]);
            acc(static_cast<Eigen::Index>(p)) += t.mu[c] / up.mu[p] * e[static_cast<std::size_t>(n)](static_cast<Eigen::Index>(c));
        }
        e[static_cast<std::size_t>(n) - 1] = std::move(acc);
    }
    e.resize(static_cast<std::size_t>(m) + 1);
    out.expectation = e;
    out.layer.resize(e.size());
    out.layer[0] = e[0];
    for (int n = 1; n <= m; ++n) {
        const VertexTable& t = h.table(n);
        Eigen::VectorXd d = e[static_cast<std::size_t>(n)];
        for (std::size_t c = 0; c < t.cell_count(); ++c)
            d(static_cast<Eigen::Index>(c)) -= e[static_cast<std::size_t>(n) - 1](t.parent[c]);
        out.layer[static_cast<std::size_t>(n)] = std::move(d);
    }
    return out;
}

VertexFunction tent(const Hierarchy& h, int m, std::uint32_t x) {
    const VertexTable& t = h.table(m);
    if (x >= t.vertex_count) throw DimensionMismatch("vertex id out of range");
    VertexFunction f{m, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.vertex_count))};
    f.values(x) = 1.0;
    return f;
}

TentSeries tent_interpolation(const HarmonicStructure& hs, const Hierarchy& h, const VertexFunction& samples) {
    const int top = samples.level;
    const VertexTable& tm = h.table(top);
    if (static_cast<std::size_t>(samples.values.size()) != tm.vertex_count)
        throw DimensionMismatch("samples do not cover V_{Lambda_" + std::to_string(top) + "}");
    TentSeries s;
    s.level = top;
    const int v0 = hs.prototype_size();
    const VertexTable& t0 = h.table(0);
    s.f0.resize(v0);
    for (int a = 0; a < v0; ++a) s.f0(a) = samples.values(h.lift(0, t0.vertex(0, a), top));

    VertexFunction base{0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t0.vertex_count))};
    for (int a = 0; a < v0; ++a) base.values(t0.vertex(0, a)) = s.f0(a);
    s.components.push_back(base);
    Eigen::VectorXd partial = refine(hs, h, base, top).values;

    for (int n = 1; n <= top; ++n) {
        const VertexTable& t = h.table(n);
        const auto emb = h.embedding(n, top);
        VertexFunction fn{n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.vertex_count))};
        for (std::size_t v = 0; v < t.vertex_count; ++v)
            if (t.in_ring(v)) fn.values(static_cast<Eigen::Index>(v)) = samples.values(emb[v]) - partial(emb[v]);
        partial += refine(hs, h, fn, top).values;
        s.components.push_back(std::move(fn));
    }
    return s;
}

std::vector<std::pair<std::uint32_t, double>> TentSeries::coefficients(const Hierarchy& h, int n) const {
    const VertexTable& t = h.table(n);
    const VertexFunction& fn = components.at(static_cast<std::size_t>(n));
    std::vector<std::pair<std::uint32_t, double>> out;
    for (std::size_t v = 0; v < t.vertex_count; ++v)
        if (n == 0 || t.in_ring(v)) out.emplace_back(static_cast<std::uint32_t>(v), fn.values(static_cast<Eigen::Index>(v)));
    return out;
}

VertexFunction TentSeries::partial_sum(const HarmonicStructure& hs, const Hierarchy& h, int upto) const {
    VertexFunction out{level, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(h.table(level).vertex_count))};
    for (int n = 0; n <= std::min(upto, level); ++n)
        out.values += refine(hs, h, components[static_cast<std::size_t>(n)], level).values;
    return out;
}

LpEstimate lp_norm(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, double p, int depth,
                   double tolerance, int max_depth) {
    if (!(p >= 1.0)) throw Error("lp_norm needs p >= 1");
    const VertexTable& table = h.table(f.level);
    const Eigen::Index cells = f.values.rows();
    if (static_cast<std::size_t>(cells) != table.cell_count())
        throw DimensionMismatch("function does not match Lambda_" + std::to_string(f.level));
    LpEstimate est;
    if (p == 2.0) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < cells; ++c) {
            const auto v = f.values.row(c);
            sum += table.mu[static_cast<std::size_t>(c)] * v.dot(hs.gram * v.transpose());
        }
        est.value = std::sqrt(std::max(sum, 0.0));
        est.exact = true;
        return est;
    }
    return lp_norm_sampled(hs, h, f, p, depth, tolerance, max_depth);
}

LpEstimate lp_norm_sampled(const HarmonicStructure& hs, const Hierarchy& h, const PiecewiseHarmonic& f, double p,
                           int depth, double tolerance, int max_depth) {
    if (!(p >= 1.0)) throw Error("lp_norm needs p >= 1");
    const VertexTable& table = h.table(f.level);
    if (static_cast<std::size_t>(f.values.rows()) != table.cell_count())
        throw DimensionMismatch("function does not match Lambda_" + std::to_string(f.level));
    LpEstimate est;
    if (std::isinf(p)) {
        est.depth = depth;
        est.value = refined_power_sum(hs, table, f.values, p, depth);
        return est;
    }
    depth = std::max(depth, 2);
    double q2 = refined_power_sum(hs, table, f.values, p, depth - 2);
    double q1 = refined_power_sum(hs, table, f.values, p, depth - 1);
    while (true) {
        const double q0 = refined_power_sum(hs, table, f.values, p, depth);
        // Geometric error model Q_d = Q + c rho^d; extrapolate when it fits.
        double limit = q0;
        const double step = q0 - q1;
        const double rho = step / (q1 - q2);
        if (std::isfinite(rho) && rho > 0.0 && rho < 0.9) limit = q0 + step * rho / (1.0 - rho);
        est.value = std::pow(std::max(limit, 0.0), 1.0 / p);
        est.error = std::abs(est.value - std::pow(q0, 1.0 / p));
        if (limit == q0) est.error = std::abs(est.value - std::pow(q1, 1.0 / p));
        est.depth = depth;
        if (tolerance <= 0.0 || est.error <= tolerance || depth >= max_depth) break;
        q2 = q1;
        q1 = q0;
        ++depth;
    }
    return est;
}

PiecewiseHarmonic project_piecewise_harmonic(const HarmonicStructure& hs, const Hierarchy& h,
                                             const PiecewiseHarmonic& f, int m) {
    if (f.level <= m) {
        PiecewiseHarmonic g = refine(hs, h, f, m);
        return g;
    }
    const Eigen::LDLT<Eigen::MatrixXd> gram(hs.gram);
    // b_w = <phi_a, f>_{F_w} / mu_w, accumulated from the finest cells upward.
    CellValues b = f.values * hs.gram; // rows: (G v_c)^T, G symmetric
    for (int n = f.level; n > m; --n) {
        const VertexTable& t = h.table(n);
        const VertexTable& up = h.table(n - 1);
        CellValues acc = CellValues::Zero(static_cast<Eigen::Index>(up.cell_count()), hs.prototype_size());
        for (std::size_t c = 0; c < t.cell_count(); ++c) {
            const auto p = static_cast<std::size_t>(t.parent[c]);
            const auto word = t.words[c];
            Eigen::VectorXd v = b.row(static_cast<Eigen::Index>(c)).transpose();
            for (std::size_t k = word.size(); k > up.words[p].size(); --k) v = hs.extension[word[k - 1]].transpose() * v;
            acc.row(static_cast<Eigen::Index>(p)) += (t.mu[c] / up.mu[p]) * v.transpose();
        }
        b = std::move(acc);
    }
    PiecewiseHarmonic out;
    out.level = m;
    out.values = gram.solve(b.transpose()).transpose();
    out.continuous = continuity_gap(h, out) <= 1e-12;
    return out;
}

void write_vertex_function(std::ostream& out, const std::string& preset_name, const VertexFunction& f) {
    out << "# preset=" << preset_name << " level=" << f.level << "\n";
    out << "id,value\n";
    for (Eigen::Index v = 0; v < f.values.size(); ++v) out << v << ',' << csv_number(f.values(v)) << '\n';
}

VertexFunction read_vertex_function(std::istream& in, std::string* preset_name) {
    std::string line;
    VertexFunction f;
    std::vector<std::pair<long, double>> rows;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                if (tok.rfind("preset=", 0) == 0 && preset_name) *preset_name = tok.substr(7);
                if (tok.rfind("level=", 0) == 0) f.level = std::stoi(tok.substr(6));
            }
            continue;
        }
        if (!header) {
            header = true;
            if (line.rfind("id", 0) == 0) continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw SchemaError("malformed function row '" + line + "'");
        try {
            rows.emplace_back(std::stol(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
        } catch (const std::logic_error&) {
            throw SchemaError("malformed function row '" + line + "'");
        }
    }
    f.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
    for (const auto& [id, value] : rows) {
        if (id < 0 || id >= static_cast<long>(rows.size())) throw SchemaError("vertex id out of range in function file");
        f.values(id) = value;
    }
    return f;
}

} // namespace pcf
