#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcf/descriptor.hpp"

namespace pcf {

/// Finite word over the 0-based alphabet {0..N-1}. Printed 1-based.
using Word = std::vector<std::uint8_t>;

std::string format_word(std::span<const std::uint8_t> w);

/// Flat storage for many words (one allocation instead of one per cell).
class WordList {
public:
    WordList() { offsets_.push_back(0); }

    std::size_t size() const { return offsets_.size() - 1; }
    std::span<const std::uint8_t> operator[](std::size_t i) const {
        return {letters_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    void push_back(std::span<const std::uint8_t> w) {
        letters_.insert(letters_.end(), w.begin(), w.end());
        offsets_.push_back(letters_.size());
    }
    void reserve(std::size_t words, std::size_t letters) {
        offsets_.reserve(words + 1);
        letters_.reserve(letters);
    }

private:
    std::vector<std::uint8_t> letters_;
    std::vector<std::size_t> offsets_;
};

struct Dimensions {
    double hausdorff = 0.0; ///< d_H under the resistance metric
    double walk = 0.0;      ///< d_W = 1 + d_H
    double spectral = 0.0;  ///< d_S = 2 d_H / d_W
};

/// Unique s > 0 with sum r_i^s = 1. Bisection to 1e-14 and one Newton step.
double solve_hausdorff_dimension(std::span<const double> r);
Dimensions dims(const FractalDescriptor& desc);

/// r_w and mu_w = prod r_{w_i}^{d_H}.
double word_resistance(const FractalDescriptor& desc, std::span<const std::uint8_t> w);
double cell_measure(const FractalDescriptor& desc, std::span<const std::uint8_t> w);
double cell_measure(const FractalDescriptor& desc, const Dimensions& d,
                    std::span<const std::uint8_t> w);

struct BuildOptions {
    std::size_t max_cells = 2'000'000;
    std::size_t max_vertices = 8'000'000;
};

/// Lambda_m = {w : r_w <= r^m < r_{w*}}, r = min_i r_i, in lexicographic order.
struct Partition {
    int level = 0;
    double base_scale = 0.0;
    WordList words;
    std::vector<double> mu;
};

Partition build_partition(const FractalDescriptor& desc, int m, const BuildOptions& opts = {});

/// Level-1 picture: the N*v0 cell-local slots glued into classes.
struct LevelOneTemplate {
    int classes = 0;
    std::vector<int> slot_class;   ///< index i*v0 + b -> class
    std::vector<int> anchor_class; ///< prototype vertex -> class it occupies
    std::vector<int> class_anchor; ///< class -> prototype vertex, or -1
};

LevelOneTemplate level_one_template(const FractalDescriptor& desc);

/**
 * Vertex graph V_{Lambda_m}.
 *
 * Canonical ids are assigned in order of first occurrence when cells are
 * scanned lexicographically and, inside a cell, by prototype index.
 */
struct VertexTable {
    int level = 0;
    int prototype_size = 0;
    WordList words;
    std::vector<double> r;  ///< r_w per cell
    std::vector<double> mu; ///< mu_w per cell
    std::vector<std::uint32_t> slots; ///< cell*v0 + a -> vertex id
    std::vector<std::int64_t> parent; ///< ancestor cell in Lambda_{m-1}, -1 at level 0

    std::size_t vertex_count = 0;
    std::vector<int> birth;            ///< first level the vertex appears in
    std::vector<std::int64_t> coarse;  ///< id in V_{Lambda_{m-1}}, -1 when born here
    std::vector<std::uint32_t> witness; ///< first slot (cell*v0 + a) mapping to the vertex

    std::vector<std::size_t> incidence_offsets; ///< vertex -> slot list (CSR)
    std::vector<std::uint32_t> incidence;
    std::vector<std::size_t> adjacency_offsets; ///< cell -> neighbouring cells (CSR)
    std::vector<std::uint32_t> adjacency;

    std::size_t cell_count() const { return r.size(); }
    std::uint32_t vertex(std::size_t cell, int a) const { return slots[cell * prototype_size + a]; }
    std::span<const std::uint32_t> cell_vertices(std::size_t cell) const {
        return {slots.data() + cell * prototype_size, static_cast<std::size_t>(prototype_size)};
    }
    bool in_ring(std::size_t v) const { return birth[v] == level; }
    std::span<const std::uint32_t> slots_of(std::size_t v) const {
        return {incidence.data() + incidence_offsets[v], incidence_offsets[v + 1] - incidence_offsets[v]};
    }
    std::span<const std::uint32_t> neighbours(std::size_t cell) const {
        return {adjacency.data() + adjacency_offsets[cell],
                adjacency_offsets[cell + 1] - adjacency_offsets[cell]};
    }
};

/**
 * Nested vertex tables for levels 0..M, built by splitting the cells of
 * each level with the level-one template. Immutable after construction.
 */
class Hierarchy {
public:
    Hierarchy(FractalDescriptor desc, int max_level, const BuildOptions& opts = {});

    const FractalDescriptor& descriptor() const { return desc_; }
    const Dimensions& dimensions() const { return dims_; }
    const LevelOneTemplate& level_one() const { return template_; }
    int max_level() const { return static_cast<int>(tables_.size()) - 1; }
    double base_scale() const { return base_scale_; }

    const VertexTable& table(int m) const;

    /// Ancestor of `cell` (in Lambda_level) inside Lambda_target, target <= level.
    std::size_t ancestor(int level, std::size_t cell, int target) const;

    /// Id in V_{Lambda_to} of vertex `id` from V_{Lambda_from}, from <= to.
    std::uint32_t lift(int from, std::uint32_t id, int to) const;

    /// lift() for every vertex of V_{Lambda_from}.
    std::vector<std::uint32_t> embedding(int from, int to) const;

private:
    void build_level(int m, const BuildOptions& opts);

    FractalDescriptor desc_;
    Dimensions dims_;
    LevelOneTemplate template_;
    double base_scale_ = 0.0;
    std::vector<double> branch_mu_;
    std::vector<VertexTable> tables_;
    std::vector<std::vector<std::uint32_t>> fine_of_coarse_;
};

/// Convenience: the single table at level m.
VertexTable build_vertex_table(const FractalDescriptor& desc, int m, const BuildOptions& opts = {});

} // namespace pcf
