#include "pcf/resistance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/IterativeLinearSolvers>

#include "pcf/errors.hpp"

namespace pcf {

struct ResistanceSolver::Factor {
    bool iterative = false;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> direct;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
};

ResistanceSolver::ResistanceSolver(const GraphOperator& op, SolverOptions opts)
    : level_(op.level), n_(static_cast<std::size_t>(op.size())), opts_(opts) {
    if (n_ < 2) return;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(op.matrix.nonZeros()));
    for (int k = 0; k < op.matrix.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, k); it; ++it)
            if (it.row() > 0 && it.col() > 0)
                trip.emplace_back(static_cast<int>(it.row() - 1), static_cast<int>(it.col() - 1), -it.value());
    const auto g = static_cast<Eigen::Index>(n_ - 1);
    grounded_.resize(g, g);
    grounded_.setFromTriplets(trip.begin(), trip.end());
    grounded_.makeCompressed();
}

ResistanceSolver::~ResistanceSolver() = default;

const ResistanceSolver::Factor& ResistanceSolver::factor() const {
    std::call_once(factor_once_, [this] {
        auto f = std::make_unique<Factor>();
        if (n_ - 1 <= opts_.direct_limit) {
            f->direct.compute(grounded_);
            if (f->direct.info() != Eigen::Success) throw SolverFailure("sparse factorisation of the Laplacian failed");
        } else {
            f->iterative = true;
            f->cg.setTolerance(opts_.tolerance);
            f->cg.setMaxIterations(opts_.max_iterations);
            f->cg.compute(grounded_);
            if (f->cg.info() != Eigen::Success) throw SolverFailure("preconditioner setup failed");
        }
        factor_ = std::move(f);
    });
    return *factor_;
}

const Eigen::MatrixXd& ResistanceSolver::grounded_inverse() const {
    std::call_once(inverse_once_, [this] {
        const Eigen::MatrixXd dense = Eigen::MatrixXd(grounded_);
        Eigen::LLT<Eigen::MatrixXd> llt(dense);
        if (llt.info() != Eigen::Success) throw SolverFailure("dense Cholesky of the grounded Laplacian failed");
        inverse_ = llt.solve(Eigen::MatrixXd::Identity(dense.rows(), dense.cols()));
    });
    return inverse_;
}

Eigen::VectorXd ResistanceSolver::potential(std::uint32_t x, std::uint32_t y) const {
    if (x >= n_ || y >= n_) throw DimensionMismatch("vertex id out of range");
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
    if (n_ < 2 || x == y) return u;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_ - 1));
    if (x > 0) b(x - 1) += 1.0;
    if (y > 0) b(y - 1) -= 1.0;
    const Factor& f = factor();
    Eigen::VectorXd sol;
    if (f.iterative) {
        sol = f.cg.solve(b);
        if (f.cg.info() != Eigen::Success)
            throw SolverFailure("conjugate gradient did not converge (error " + std::to_string(f.cg.error()) + ")");
    } else {
        sol = f.direct.solve(b);
    }
    u.tail(static_cast<Eigen::Index>(n_ - 1)) = sol;
    return u;
}

double ResistanceSolver::resistance(std::uint32_t x, std::uint32_t y) const {
    if (x >= n_ || y >= n_) throw DimensionMismatch("vertex id out of range");
    if (x == y) return 0.0;
    if (dense()) {
        const Eigen::MatrixXd& g = grounded_inverse();
        auto at = [&](std::uint32_t i, std::uint32_t j) { return (i == 0 || j == 0) ? 0.0 : g(i - 1, j - 1); };
        return at(x, x) + at(y, y) - 2.0 * at(x, y);
    }
    const Eigen::VectorXd u = potential(x, y);
    return u(x) - u(y);
}

Eigen::MatrixXd ResistanceSolver::all_pairs() const {
    if (!dense()) throw SolverFailure("all-pairs resistance requested above the dense limit");
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, n);
    if (n < 2) return full;
    full.bottomRightCorner(n - 1, n - 1) = grounded_inverse();
    const Eigen::VectorXd d = full.diagonal();
    Eigen::MatrixXd out = (-2.0 * full).colwise() + d;
    out.rowwise() += d.transpose();
    out.diagonal().setZero();
    return out;
}

double effective_resistance(const Hierarchy& h, int m, std::uint32_t x, std::uint32_t y) {
    ResistanceSolver solver(assemble_graph_laplacian(h, m));
    return solver.resistance(x, y);
}

SeparationBound calibrate_separation(const FractalDescriptor& desc, const SolverOptions& opts) {
    const double r = desc.min_r();
    int fine = 4;
    std::unique_ptr<Hierarchy> h;
    while (fine >= 2) {
        try {
            h = std::make_unique<Hierarchy>(desc, fine);
            if (h->table(fine).vertex_count <= opts.dense_limit) break;
        } catch (const LevelTooLarge&) {
        }
        h.reset();
        --fine;
    }
    if (!h) throw SolverFailure("cannot calibrate the separation constant within the dense limit");

    ResistanceSolver solver(assemble_graph_laplacian(*h, fine), opts);
    const Eigen::MatrixXd res = solver.all_pairs();
    const VertexTable& tf = h->table(fine);

    SeparationBound out;
    out.min_ratio = std::numeric_limits<double>::infinity();
    for (int n = std::max(1, std::min(2, fine - 1)); n <= std::min(4, fine - 1); ++n) {
        const VertexTable& tn = h->table(n);
        std::vector<std::vector<std::uint32_t>> members(tn.cell_count());
        for (std::size_t c = 0; c < tf.cell_count(); ++c) {
            auto& bucket = members[h->ancestor(fine, c, n)];
            for (auto v : tf.cell_vertices(c)) bucket.push_back(v);
        }
        for (auto& b : members) {
            std::sort(b.begin(), b.end());
            b.erase(std::unique(b.begin(), b.end()), b.end());
        }
        const double scale = std::pow(r, n);
        for (std::size_t a = 0; a < tn.cell_count(); ++a) {
            const auto nb = tn.neighbours(a);
            for (std::size_t b = a + 1; b < tn.cell_count(); ++b) {
                if (std::binary_search(nb.begin(), nb.end(), static_cast<std::uint32_t>(b))) continue;
                for (auto x : members[a])
                    for (auto y : members[b]) out.min_ratio = std::min(out.min_ratio, res(x, y) / scale);
            }
        }
    }
    if (!std::isfinite(out.min_ratio) || out.min_ratio <= 0.0) {
        // Every pair of cells touches at the calibration levels.
        out.min_ratio = 1.0;
        out.loose = true;
    }
    out.k = static_cast<int>(std::floor(std::log(out.min_ratio) / std::log(r))) + 2;
    if (out.k < 1) out.k = 1;
    if (out.min_ratio < std::pow(r, 3)) out.loose = true;
    return out;
}

std::vector<std::uint32_t> resistance_ball(const Hierarchy& h, const ResistanceSolver& solver, std::uint32_t x,
                                           double t, const SeparationBound& bound) {
    if (!(t > 0.0)) throw Error("ball radius must be positive");
    const int m = solver.level();
    const VertexTable& tm = h.table(m);
    if (x >= tm.vertex_count) throw DimensionMismatch("vertex id out of range");
    const int v0 = tm.prototype_size;
    const double r = h.base_scale();
    const int n = static_cast<int>(std::floor(std::log(t) / std::log(r) + 1e-12)) - bound.k;

    std::vector<std::uint32_t> candidates;
    if (n < 0) {
        candidates.resize(tm.vertex_count);
        for (std::size_t v = 0; v < tm.vertex_count; ++v) candidates[v] = static_cast<std::uint32_t>(v);
    } else {
        const int level = std::min(n, m);
        const VertexTable& tn = h.table(level);
        std::vector<char> near(tn.cell_count(), 0);
        for (auto s : tm.slots_of(x)) {
            const auto a = h.ancestor(m, s / v0, level);
            near[a] = 1;
            for (auto b : tn.neighbours(a)) near[b] = 1;
        }
        std::vector<char> seen(tm.vertex_count, 0);
        for (std::size_t c = 0; c < tm.cell_count(); ++c) {
            if (!near[h.ancestor(m, c, level)]) continue;
            for (auto v : tm.cell_vertices(c))
                if (!seen[v]) {
                    seen[v] = 1;
                    candidates.push_back(v);
                }
        }
        std::sort(candidates.begin(), candidates.end());
    }

    std::vector<std::uint32_t> ball;
    for (auto y : candidates)
        if (solver.resistance(x, y) < t) ball.push_back(y);
    return ball;
}

} // namespace pcf
