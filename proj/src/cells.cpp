#include "pcf/cells.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pcf/errors.hpp"

namespace pcf {

namespace {

// Words compare against r^m with this relative slack so that r_w computed as a
// product and r^m computed by pow() agree on exact ties.
constexpr double kScaleSlack = 1e-9;

double threshold_for(double base, int m) {
    return std::pow(base, m) * (1.0 + kScaleSlack);
}

} // namespace

std::string format_word(std::span<const std::uint8_t> w) {
    if (w.empty()) return "-";
    std::string out;
    bool wide = std::any_of(w.begin(), w.end(), [](std::uint8_t c) { return c >= 9; });
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (wide && i > 0) out.push_back('.');
        out += std::to_string(static_cast<int>(w[i]) + 1);
    }
    return out;
}

double solve_hausdorff_dimension(std::span<const double> r) {
    auto f = [&](double s) {
        double acc = 0.0;
        for (double ri : r) acc += std::pow(ri, s);
        return acc - 1.0;
    };
    double lo = 0.0;
    double hi = 1.0;
    while (f(hi) > 0.0) hi *= 2.0;
    while (hi - lo > 1e-14 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    double s = 0.5 * (lo + hi);
    double df = 0.0;
    for (double ri : r) df += std::pow(ri, s) * std::log(ri);
    if (df != 0.0) {
        const double polished = s - f(s) / df;
        if (std::abs(f(polished)) <= std::abs(f(s))) s = polished;
    }
    return s;
}

Dimensions dims(const FractalDescriptor& desc) {
    Dimensions d;
    d.hausdorff = solve_hausdorff_dimension(desc.r);
    d.walk = 1.0 + d.hausdorff;
    d.spectral = 2.0 * d.hausdorff / d.walk;
    return d;
}

double word_resistance(const FractalDescriptor& desc, std::span<const std::uint8_t> w) {
    double acc = 1.0;
    for (auto c : w) acc *= desc.r.at(c);
    return acc;
}

double cell_measure(const FractalDescriptor& desc, const Dimensions& d,
                    std::span<const std::uint8_t> w) {
    double acc = 1.0;
    for (auto c : w) acc *= std::pow(desc.r.at(c), d.hausdorff);
    return acc;
}

double cell_measure(const FractalDescriptor& desc, std::span<const std::uint8_t> w) {
    return cell_measure(desc, dims(desc), w);
}

Partition build_partition(const FractalDescriptor& desc, int m, const BuildOptions& opts) {
    if (m < 0) throw Error("partition level must be >= 0");
    const Dimensions d = dims(desc);
    std::vector<double> bmu(desc.r.size());
    for (std::size_t i = 0; i < desc.r.size(); ++i) bmu[i] = std::pow(desc.r[i], d.hausdorff);

    Partition part;
    part.level = m;
    part.base_scale = desc.min_r();
    const double threshold = threshold_for(part.base_scale, m);

    Word w;
    auto visit = [&](auto&& self, double rw, double muw) -> void {
        if (m == 0 || rw <= threshold) {
            if (part.mu.size() >= opts.max_cells)
                throw LevelTooLarge("partition level " + std::to_string(m) + " exceeds the cell budget of " +
                                    std::to_string(opts.max_cells));
            part.words.push_back(w);
            part.mu.push_back(muw);
            return;
        }
        for (int i = 0; i < desc.branches; ++i) {
            w.push_back(static_cast<std::uint8_t>(i));
            self(self, rw * desc.r[i], muw * bmu[i]);
            w.pop_back();
        }
    };
    visit(visit, 1.0, 1.0);
    return part;
}

LevelOneTemplate level_one_template(const FractalDescriptor& desc) {
    const int v0 = desc.prototype_size;
    const int slots = desc.branches * v0;
    std::vector<int> parent(static_cast<std::size_t>(slots));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& g : desc.gluings) {
        int a = find(g.cell_a * v0 + g.vertex_a);
        int b = find(g.cell_b * v0 + g.vertex_b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }

    LevelOneTemplate t;
    t.slot_class.assign(static_cast<std::size_t>(slots), -1);
    std::vector<int> root_class(static_cast<std::size_t>(slots), -1);
    for (int s = 0; s < slots; ++s) {
        const int root = find(s);
        if (root_class[root] < 0) root_class[root] = t.classes++;
        t.slot_class[s] = root_class[root];
    }
    t.class_anchor.assign(static_cast<std::size_t>(t.classes), -1);
    for (int a = 0; a < v0; ++a) {
        const auto& an = desc.anchors.at(a);
        const int cls = t.slot_class[an.cell * v0 + an.sub];
        if (t.class_anchor[cls] >= 0)
            throw SchemaError("anchors of prototype vertices " + std::to_string(t.class_anchor[cls]) +
                              " and " + std::to_string(a) + " coincide");
        t.class_anchor[cls] = a;
        t.anchor_class.push_back(cls);
    }
    return t;
}

Hierarchy::Hierarchy(FractalDescriptor desc, int max_level, const BuildOptions& opts)
    : desc_(std::move(desc)) {
    desc_.validate();
    if (max_level < 0) throw Error("hierarchy level must be >= 0");
    dims_ = pcf::dims(desc_);
    template_ = level_one_template(desc_);
    base_scale_ = desc_.min_r();
    for (double ri : desc_.r) branch_mu_.push_back(std::pow(ri, dims_.hausdorff));

    const int v0 = desc_.prototype_size;
    VertexTable t0;
    t0.level = 0;
    t0.prototype_size = v0;
    t0.words.push_back({});
    t0.r = {1.0};
    t0.mu = {1.0};
    t0.parent = {-1};
    t0.vertex_count = static_cast<std::size_t>(v0);
    for (int a = 0; a < v0; ++a) {
        t0.slots.push_back(static_cast<std::uint32_t>(a));
        t0.birth.push_back(0);
        t0.coarse.push_back(-1);
        t0.witness.push_back(static_cast<std::uint32_t>(a));
    }
    tables_.push_back(std::move(t0));
    fine_of_coarse_.emplace_back();
    for (int m = 1; m <= max_level; ++m) build_level(m, opts);

    for (auto& t : tables_) {
        const std::size_t nv = t.vertex_count;
        t.incidence_offsets.assign(nv + 1, 0);
        for (auto v : t.slots) ++t.incidence_offsets[v + 1];
        std::partial_sum(t.incidence_offsets.begin(), t.incidence_offsets.end(), t.incidence_offsets.begin());
        t.incidence.resize(t.slots.size());
        std::vector<std::size_t> fill(t.incidence_offsets.begin(), t.incidence_offsets.end() - 1);
        for (std::size_t s = 0; s < t.slots.size(); ++s)
            t.incidence[fill[t.slots[s]]++] = static_cast<std::uint32_t>(s);

        const std::size_t nc = t.cell_count();
        t.adjacency_offsets.assign(nc + 1, 0);
        std::vector<std::uint32_t> scratch;
        for (std::size_t c = 0; c < nc; ++c) {
            scratch.clear();
            for (auto v : t.cell_vertices(c))
                for (auto s : t.slots_of(v)) {
                    const auto other = static_cast<std::uint32_t>(s / v0);
                    if (other != c) scratch.push_back(other);
                }
            std::sort(scratch.begin(), scratch.end());
            scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
            t.adjacency.insert(t.adjacency.end(), scratch.begin(), scratch.end());
            t.adjacency_offsets[c + 1] = t.adjacency.size();
        }
    }
}

void Hierarchy::build_level(int m, const BuildOptions& opts) {
    const VertexTable& prev = tables_.back();
    const int v0 = desc_.prototype_size;
    const double threshold = threshold_for(base_scale_, m);

    VertexTable t;
    t.level = m;
    t.prototype_size = v0;
    std::vector<std::uint32_t> provisional;
    auto next = static_cast<std::uint32_t>(prev.vertex_count);

    Word w;
    auto split = [&](auto&& self, double rw, double muw, const std::vector<std::uint32_t>& ids,
                     std::int64_t parent) -> void {
        if (rw <= threshold) {
            if (t.r.size() >= opts.max_cells)
                throw LevelTooLarge("level " + std::to_string(m) + " exceeds the cell budget of " +
                                    std::to_string(opts.max_cells));
            t.words.push_back(w);
            t.r.push_back(rw);
            t.mu.push_back(muw);
            t.parent.push_back(parent);
            provisional.insert(provisional.end(), ids.begin(), ids.end());
            return;
        }
        std::vector<std::uint32_t> cls(static_cast<std::size_t>(template_.classes));
        for (int k = 0; k < template_.classes; ++k) {
            const int anchor = template_.class_anchor[k];
            cls[k] = anchor >= 0 ? ids[anchor] : next++;
        }
        if (next > opts.max_vertices)
            throw LevelTooLarge("level " + std::to_string(m) + " exceeds the vertex budget of " +
                                std::to_string(opts.max_vertices));
        std::vector<std::uint32_t> child(static_cast<std::size_t>(v0));
        for (int i = 0; i < desc_.branches; ++i) {
            for (int b = 0; b < v0; ++b) child[b] = cls[template_.slot_class[i * v0 + b]];
            w.push_back(static_cast<std::uint8_t>(i));
            self(self, rw * desc_.r[i], muw * branch_mu_[i], child, parent);
            w.pop_back();
        }
    };

    std::vector<std::uint32_t> ids(static_cast<std::size_t>(v0));
    for (std::size_t c = 0; c < prev.cell_count(); ++c) {
        const auto word = prev.words[c];
        w.assign(word.begin(), word.end());
        const auto verts = prev.cell_vertices(c);
        ids.assign(verts.begin(), verts.end());
        split(split, prev.r[c], prev.mu[c], ids, static_cast<std::int64_t>(c));
    }

    constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> remap(next, unset);
    std::uint32_t count = 0;
    t.slots.resize(provisional.size());
    for (std::size_t s = 0; s < provisional.size(); ++s) {
        auto& target = remap[provisional[s]];
        if (target == unset) {
            target = count++;
            t.witness.push_back(static_cast<std::uint32_t>(s));
        }
        t.slots[s] = target;
    }
    t.vertex_count = count;
    t.coarse.assign(count, -1);
    std::vector<std::uint32_t> fine(prev.vertex_count);
    for (std::size_t o = 0; o < prev.vertex_count; ++o) {
        if (remap[o] == unset) throw Error("coarse vertex lost during refinement; inconsistent anchors");
        t.coarse[remap[o]] = static_cast<std::int64_t>(o);
        fine[o] = remap[o];
    }
    t.birth.resize(count);
    for (std::size_t v = 0; v < count; ++v)
        t.birth[v] = t.coarse[v] >= 0 ? prev.birth[static_cast<std::size_t>(t.coarse[v])] : m;

    tables_.push_back(std::move(t));
    fine_of_coarse_.push_back(std::move(fine));
}

const VertexTable& Hierarchy::table(int m) const {
    if (m < 0 || m > max_level()) throw Error("level " + std::to_string(m) + " not built");
    return tables_[m];
}

std::size_t Hierarchy::ancestor(int level, std::size_t cell, int target) const {
    if (target > level) throw Error("ancestor level must not exceed the cell level");
    for (int m = level; m > target; --m) cell = static_cast<std::size_t>(tables_[m].parent[cell]);
    return cell;
}

std::uint32_t Hierarchy::lift(int from, std::uint32_t id, int to) const {
    if (from > to) throw Error("lift goes from coarse to fine");
    for (int m = from + 1; m <= to; ++m) id = fine_of_coarse_[m][id];
    return id;
}

std::vector<std::uint32_t> Hierarchy::embedding(int from, int to) const {
    std::vector<std::uint32_t> out(table(from).vertex_count);
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = lift(from, static_cast<std::uint32_t>(v), to);
    return out;
}

VertexTable build_vertex_table(const FractalDescriptor& desc, int m, const BuildOptions& opts) {
    Hierarchy h(desc, m, opts);
    return h.table(m);
}

} // namespace pcf
