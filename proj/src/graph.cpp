#include "pcf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "pcf/errors.hpp"

namespace pcf {

GraphOperator assemble_graph_laplacian(const Hierarchy& h, int m, bool with_provenance) {
    const VertexTable& t = h.table(m);
    const auto& desc = h.descriptor();
    const int v0 = desc.prototype_size;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(t.cell_count() * static_cast<std::size_t>(v0 * v0));
    GraphOperator op;
    op.level = m;
    for (std::size_t c = 0; c < t.cell_count(); ++c) {
        const double scale = 1.0 / t.r[c];
        const auto verts = t.cell_vertices(c);
        for (int a = 0; a < v0; ++a)
            for (int b = 0; b < v0; ++b) {
                const double value = desc.H(a, b);
                if (value == 0.0) continue;
                triplets.emplace_back(static_cast<int>(verts[a]), static_cast<int>(verts[b]), scale * value);
                if (with_provenance && a != b && verts[a] < verts[b])
                    op.provenance.push_back({verts[a], verts[b], static_cast<std::uint32_t>(c), scale * value});
            }
    }
    const auto n = static_cast<Eigen::Index>(t.vertex_count);
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(triplets.begin(), triplets.end());
    op.matrix.makeCompressed();
    return op;
}

double prototype_energy(const FractalDescriptor& desc, const Eigen::VectorXd& h0) {
    // Conductance form: sum over pairs of c_ab (h_a - h_b)^2, free of cancellation against constants.
    double e = 0.0;
    for (Eigen::Index a = 0; a < h0.size(); ++a)
        for (Eigen::Index b = a + 1; b < h0.size(); ++b) {
            const double d = h0(a) - h0(b);
            e += desc.H(a, b) * d * d;
        }
    return e;
}

double energy(const Hierarchy& h, const VertexFunction& f) {
    const VertexTable& t = h.table(f.level);
    if (static_cast<std::size_t>(f.values.size()) != t.vertex_count)
        throw DimensionMismatch("vertex function does not match V_{Lambda_" + std::to_string(f.level) + "}");
    const auto& desc = h.descriptor();
    const int v0 = desc.prototype_size;
    Eigen::VectorXd local(v0);
    double total = 0.0;
    for (std::size_t c = 0; c < t.cell_count(); ++c) {
        const auto verts = t.cell_vertices(c);
        for (int a = 0; a < v0; ++a) local(a) = f.values(verts[a]);
        total += prototype_energy(desc, local) / t.r[c];
    }
    return total;
}

Eigen::VectorXd apply_laplacian(const Hierarchy& h, const VertexFunction& f) {
    const VertexTable& t = h.table(f.level);
    if (static_cast<std::size_t>(f.values.size()) != t.vertex_count)
        throw DimensionMismatch("vertex function does not match V_{Lambda_" + std::to_string(f.level) + "}");
    const auto& desc = h.descriptor();
    const int v0 = desc.prototype_size;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(f.values.size());
    Eigen::VectorXd local(v0);
    for (std::size_t c = 0; c < t.cell_count(); ++c) {
        const auto verts = t.cell_vertices(c);
        for (int a = 0; a < v0; ++a) local(a) = f.values(verts[a]);
        for (int a = 0; a < v0; ++a) {
            double y = 0.0;
            for (int b = 0; b < v0; ++b)
                if (b != a) y += desc.H(a, b) * (local(b) - local(a));
            out(verts[a]) += y / t.r[c];
        }
    }
    return out;
}

double energy(const GraphOperator& op, const VertexFunction& f) {
    if (f.values.size() != op.size()) throw DimensionMismatch("vertex function does not match the operator");
    return -f.values.dot(op.matrix * f.values);
}

CellValues refine_cells(const HarmonicStructure& hs, const Hierarchy& h, const CellValues& coarse, int from,
                        int to) {
    if (to < from) throw Error("refine_cells goes from coarse to fine");
    CellValues current = coarse;
    const int v0 = hs.prototype_size();
    for (int m = from + 1; m <= to; ++m) {
        const VertexTable& t = h.table(m);
        const VertexTable& prev = h.table(m - 1);
        CellValues next(static_cast<Eigen::Index>(t.cell_count()), v0);
        for (std::size_t c = 0; c < t.cell_count(); ++c) {
            const auto p = static_cast<std::size_t>(t.parent[c]);
            const auto word = t.words[c];
            const std::size_t depth = prev.words[p].size();
            Eigen::VectorXd v = current.row(static_cast<Eigen::Index>(p)).transpose();
            for (std::size_t k = depth; k < word.size(); ++k) v = hs.extension[word[k]] * v;
            next.row(static_cast<Eigen::Index>(c)) = v.transpose();
        }
        current = std::move(next);
    }
    return current;
}

CellValues extend_cells(const HarmonicStructure& hs, const Hierarchy& h, const Eigen::VectorXd& h0, int m) {
    if (h0.size() != hs.prototype_size()) throw DimensionMismatch("prototype vector has the wrong length");
    CellValues root(1, hs.prototype_size());
    root.row(0) = h0.transpose();
    return refine_cells(hs, h, root, 0, m);
}

VertexFunction gather_vertices(const Hierarchy& h, int m, const CellValues& cells, double* discrepancy) {
    const VertexTable& t = h.table(m);
    if (static_cast<std::size_t>(cells.rows()) != t.cell_count())
        throw DimensionMismatch("cell values do not match Lambda_" + std::to_string(m));
    VertexFunction f;
    f.level = m;
    f.values.resize(static_cast<Eigen::Index>(t.vertex_count));
    const int v0 = t.prototype_size;
    for (std::size_t v = 0; v < t.vertex_count; ++v) {
        const auto s = t.witness[v];
        f.values(static_cast<Eigen::Index>(v)) = cells(s / v0, s % v0);
    }
    if (discrepancy) {
        double worst = 0.0;
        for (std::size_t s = 0; s < t.slots.size(); ++s)
            worst = std::max(worst, std::abs(cells(static_cast<Eigen::Index>(s / v0), static_cast<Eigen::Index>(s % v0)) -
                                             f.values(t.slots[s])));
        *discrepancy = worst;
    }
    return f;
}

CellValues cell_values(const Hierarchy& h, const VertexFunction& f) {
    const VertexTable& t = h.table(f.level);
    if (static_cast<std::size_t>(f.values.size()) != t.vertex_count)
        throw DimensionMismatch("vertex function does not match V_{Lambda_" + std::to_string(f.level) + "}");
    const int v0 = t.prototype_size;
    CellValues out(static_cast<Eigen::Index>(t.cell_count()), v0);
    for (std::size_t c = 0; c < t.cell_count(); ++c)
        for (int a = 0; a < v0; ++a) out(static_cast<Eigen::Index>(c), a) = f.values(t.vertex(c, a));
    return out;
}

VertexFunction harmonic_extend(const HarmonicStructure& hs, const Hierarchy& h, const Eigen::VectorXd& boundary_values,
                               int m) {
    const Eigen::VectorXd h0 = hs.fill(boundary_values);
    double gap = 0.0;
    VertexFunction f = gather_vertices(h, m, extend_cells(hs, h, h0, m), &gap);
    const double scale = std::max(1.0, boundary_values.cwiseAbs().maxCoeff());
    if (gap > 1e-9 * scale)
        throw Error("harmonic extension disagrees at glued vertices by " + std::to_string(gap));
    return f;
}

VertexFunction refine(const HarmonicStructure& hs, const Hierarchy& h, const VertexFunction& f, int m) {
    if (m < f.level) throw Error("refine goes from coarse to fine");
    return gather_vertices(h, m, refine_cells(hs, h, cell_values(h, f), f.level, m));
}

VertexFunction restrict_to_level(const Hierarchy& h, const VertexFunction& f, int n) {
    if (n > f.level) throw Error("restriction goes from fine to coarse");
    const auto emb = h.embedding(n, f.level);
    VertexFunction out;
    out.level = n;
    out.values.resize(static_cast<Eigen::Index>(emb.size()));
    for (std::size_t v = 0; v < emb.size(); ++v) out.values(static_cast<Eigen::Index>(v)) = f.values(emb[v]);
    return out;
}

void write_matrix_market(std::ostream& out, const GraphOperator& op) {
    std::size_t nnz = 0;
    for (int k = 0; k < op.matrix.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, k); it; ++it)
            if (it.row() >= it.col()) ++nnz;
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << "% graph Laplacian H_Lambda_" << op.level << "\n";
    out << op.matrix.rows() << ' ' << op.matrix.cols() << ' ' << nnz << '\n';
    out << std::setprecision(17);
    for (int k = 0; k < op.matrix.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.matrix, k); it; ++it)
            if (it.row() >= it.col()) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

void write_id_map(std::ostream& out, const VertexTable& t) {
    out << "id,word,prototype,birth_level\n";
    for (std::size_t v = 0; v < t.vertex_count; ++v) {
        const auto s = t.witness[v];
        const auto cell = s / t.prototype_size;
        out << v << ',' << format_word(t.words[cell]) << ',' << s % t.prototype_size << ',' << t.birth[v] << '\n';
    }
}

} // namespace pcf
