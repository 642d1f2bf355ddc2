#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pcf {

/// F_{cell_a} q_{vertex_a} = F_{cell_b} q_{vertex_b}. All indices 0-based.
struct Gluing {
    int cell_a = 0;
    int vertex_a = 0;
    int cell_b = 0;
    int vertex_b = 0;
};

/// q_vertex (prototype) = F_cell q_sub, i.e. where a prototype vertex sits
/// inside the level-1 picture. Needed to nest V_{Lambda_{m-1}} in V_{Lambda_m}.
struct Anchor {
    int cell = 0;
    int sub = 0;
};

/**
 * Combinatorial description of a p.c.f. self-similar set together with a
 * harmonic structure (H, r).
 *
 * Branch indices are 0-based here and 1-based in the JSON schema. Prototype
 * vertices are 0-based everywhere. Vertices not listed in `boundary` are
 * interior prototype vertices (the Vicsek centre); they take part in the
 * graph energies but not in the parametrisation of harmonic functions.
 */
struct FractalDescriptor {
    std::string name;
    int branches = 0;
    int prototype_size = 0;
    std::vector<int> boundary;
    std::vector<Gluing> gluings;
    std::vector<double> r;
    Eigen::MatrixXd H;
    std::vector<Anchor> anchors;

    /// Throws SchemaError, InvalidLaplacian or DisconnectedGluing.
    void validate() const;

    bool is_boundary(int vertex) const;
    std::vector<int> interior() const;
    double min_r() const;
};

FractalDescriptor load_descriptor(std::string_view json_text);
FractalDescriptor load_descriptor_file(const std::filesystem::path& path);

/// Canonical JSON (sorted keys, 17 significant digits).
std::string to_json(const FractalDescriptor& desc);

/// FNV-1a over the canonical JSON; keys the level cache.
std::uint64_t content_hash(const FractalDescriptor& desc);

/// "interval", "sg", "vicsek", "vicsek2k1:<k>".
FractalDescriptor preset(std::string_view name);
std::vector<std::string> preset_names();

} // namespace pcf
