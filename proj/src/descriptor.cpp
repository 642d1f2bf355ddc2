#include "pcf/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pcf/errors.hpp"

namespace pcf {

namespace {

using nlohmann::json;

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

void require(bool ok, const std::string& what) {
    if (!ok) throw SchemaError(what);
}

template <typename T>
T get_field(const json& doc, const char* key) {
    if (!doc.contains(key)) throw SchemaError(std::string("missing key '") + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad value for '") + key + "': " + e.what());
    }
}

} // namespace

bool FractalDescriptor::is_boundary(int vertex) const {
    return std::find(boundary.begin(), boundary.end(), vertex) != boundary.end();
}

std::vector<int> FractalDescriptor::interior() const {
    std::vector<int> out;
    for (int a = 0; a < prototype_size; ++a)
        if (!is_boundary(a)) out.push_back(a);
    return out;
}

double FractalDescriptor::min_r() const {
    return *std::min_element(r.begin(), r.end());
}

void FractalDescriptor::validate() const {
    require(branches >= 2, "branches must be >= 2");
    require(prototype_size >= 2, "v0 must be >= 2");
    require(static_cast<int>(r.size()) == branches, "r must have one weight per branch");
    for (double ri : r)
        require(ri > 0.0 && ri < 1.0, "resistance weights must lie in (0,1)");

    require(!boundary.empty(), "boundary must be non-empty");
    {
        std::vector<int> b = boundary;
        std::sort(b.begin(), b.end());
        require(std::adjacent_find(b.begin(), b.end()) == b.end(), "duplicate boundary vertex");
        require(b.front() >= 0 && b.back() < prototype_size, "boundary vertex out of range");
    }

    for (const auto& g : gluings) {
        require(g.cell_a >= 0 && g.cell_a < branches && g.cell_b >= 0 && g.cell_b < branches,
                "gluing branch out of range");
        require(g.vertex_a >= 0 && g.vertex_a < prototype_size && g.vertex_b >= 0 &&
                    g.vertex_b < prototype_size,
                "gluing vertex out of range");
        require(g.cell_a != g.cell_b, "gluing must relate two distinct cells");
    }

    require(static_cast<int>(anchors.size()) == prototype_size, "one anchor per prototype vertex");
    for (const auto& a : anchors)
        require(a.cell >= 0 && a.cell < branches && a.sub >= 0 && a.sub < prototype_size,
                "anchor out of range");

    if (H.rows() != prototype_size || H.cols() != prototype_size)
        throw SchemaError("H must be v0 x v0");
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > tol)
        throw InvalidLaplacian("H is not symmetric");
    for (int p = 0; p < prototype_size; ++p) {
        for (int q = 0; q < prototype_size; ++q)
            if (p != q && H(p, q) < -tol)
                throw InvalidLaplacian("H has a negative off-diagonal entry");
        if (std::abs(H.row(p).sum()) > 1e-10 * scale)
            throw InvalidLaplacian("H row sums are not zero");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-H);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    if (ev(0) < -1e-10 * scale)
        throw InvalidLaplacian("H is not non-positive definite");
    if (ev(1) < 1e-10 * scale)
        throw InvalidLaplacian("kernel of H is larger than the constants");

    DisjointSet cells(branches);
    for (const auto& g : gluings) cells.unite(g.cell_a, g.cell_b);
    for (int i = 1; i < branches; ++i)
        if (cells.find(i) != cells.find(0))
            throw DisconnectedGluing("gluing relations leave the level-1 cell graph disconnected");
}

FractalDescriptor load_descriptor(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("descriptor is not valid JSON: ") + e.what());
    }
    require(doc.is_object(), "descriptor must be a JSON object");

    FractalDescriptor d;
    d.name = doc.contains("name") ? get_field<std::string>(doc, "name") : std::string("custom");
    d.branches = get_field<int>(doc, "branches");
    d.prototype_size = get_field<int>(doc, "v0");
    d.boundary = get_field<std::vector<int>>(doc, "boundary");
    d.r = get_field<std::vector<double>>(doc, "r");

    for (const auto& row : get_field<std::vector<std::vector<int>>>(doc, "gluings")) {
        require(row.size() == 4, "gluing entries are [i, a, j, b]");
        d.gluings.push_back({row[0] - 1, row[1], row[2] - 1, row[3]});
    }

    const auto rows = get_field<std::vector<std::vector<double>>>(doc, "H");
    require(static_cast<int>(rows.size()) == d.prototype_size, "H must have v0 rows");
    d.H.resize(d.prototype_size, d.prototype_size);
    for (int p = 0; p < d.prototype_size; ++p) {
        require(static_cast<int>(rows[p].size()) == d.prototype_size, "H must have v0 columns");
        for (int q = 0; q < d.prototype_size; ++q) d.H(p, q) = rows[p][q];
    }

    if (doc.contains("anchors")) {
        d.anchors.assign(static_cast<std::size_t>(std::max(d.prototype_size, 0)), Anchor{-1, -1});
        for (const auto& row : get_field<std::vector<std::vector<int>>>(doc, "anchors")) {
            require(row.size() == 3, "anchor entries are [a, i, b]");
            require(row[0] >= 0 && row[0] < d.prototype_size, "anchor vertex out of range");
            d.anchors[row[0]] = Anchor{row[1] - 1, row[2]};
        }
    } else {
        // Default: prototype vertex a is the fixed point of map a+1.
        require(d.prototype_size <= d.branches,
                "descriptor needs explicit 'anchors' when v0 exceeds the branch count");
        for (int a = 0; a < d.prototype_size; ++a) d.anchors.push_back(Anchor{a, a});
    }

    d.validate();
    return d;
}

FractalDescriptor load_descriptor_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open descriptor " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return load_descriptor(buf.str());
}

std::string to_json(const FractalDescriptor& d) {
    json doc;
    doc["name"] = d.name;
    doc["branches"] = d.branches;
    doc["v0"] = d.prototype_size;
    doc["boundary"] = d.boundary;
    doc["r"] = d.r;
    json gl = json::array();
    for (const auto& g : d.gluings) gl.push_back({g.cell_a + 1, g.vertex_a, g.cell_b + 1, g.vertex_b});
    doc["gluings"] = gl;
    json h = json::array();
    for (int p = 0; p < d.H.rows(); ++p) {
        std::vector<double> row(d.H.cols());
        for (int q = 0; q < d.H.cols(); ++q) row[q] = d.H(p, q);
        h.push_back(row);
    }
    doc["H"] = h;
    json an = json::array();
    for (int a = 0; a < static_cast<int>(d.anchors.size()); ++a)
        an.push_back({a, d.anchors[a].cell + 1, d.anchors[a].sub});
    doc["anchors"] = an;
    return doc.dump();
}

std::uint64_t content_hash(const FractalDescriptor& desc) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : to_json(desc)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

FractalDescriptor make_interval() {
    FractalDescriptor d;
    d.name = "interval";
    d.branches = 2;
    d.prototype_size = 2;
    d.boundary = {0, 1};
    d.gluings = {{0, 1, 1, 0}};
    d.r = {0.5, 0.5};
    d.H.resize(2, 2);
    d.H << -1, 1, 1, -1;
    d.anchors = {{0, 0}, {1, 1}};
    return d;
}

FractalDescriptor make_sg() {
    FractalDescriptor d;
    d.name = "sg";
    d.branches = 3;
    d.prototype_size = 3;
    d.boundary = {0, 1, 2};
    // F_i q_j = F_j q_i: the midpoint of the edge q_i q_j.
    d.gluings = {{0, 1, 1, 0}, {0, 2, 2, 0}, {1, 2, 2, 1}};
    d.r = {0.6, 0.6, 0.6};
    d.H.resize(3, 3);
    d.H << -2, 1, 1, 1, -2, 1, 1, 1, -2;
    d.anchors = {{0, 0}, {1, 1}, {2, 2}};
    return d;
}

// (2k+1)-Vicsek set: four diagonal arms of k cells each plus a centre cell.
// Prototype vertices 0..3 are the square corners, 4 the centre; the energy
// is the unit star joining each corner to the centre.
FractalDescriptor make_vicsek(int k) {
    if (k < 1) throw SchemaError("vicsek2k1 needs k >= 1");
    FractalDescriptor d;
    d.name = k == 1 ? "vicsek" : "vicsek2k1:" + std::to_string(k);
    d.branches = 4 * k + 1;
    d.prototype_size = 5;
    d.boundary = {0, 1, 2, 3};
    const int centre = 4 * k;
    auto opposite = [](int i) { return (i + 2) % 4; };
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < k; ++j) {
            const int cell = i * k + j;
            const int next = j + 1 < k ? cell + 1 : centre;
            d.gluings.push_back({cell, opposite(i), next, i});
        }
    }
    d.r.assign(static_cast<std::size_t>(d.branches), 1.0 / (2 * k + 1));
    d.H = Eigen::MatrixXd::Zero(5, 5);
    for (int i = 0; i < 4; ++i) {
        d.H(i, 4) = d.H(4, i) = 1.0;
        d.H(i, i) = -1.0;
    }
    d.H(4, 4) = -4.0;
    for (int i = 0; i < 4; ++i) d.anchors.push_back({i * k, i});
    d.anchors.push_back({centre, 4});
    return d;
}

} // namespace

FractalDescriptor preset(std::string_view name) {
    FractalDescriptor d;
    if (name == "interval") {
        d = make_interval();
    } else if (name == "sg") {
        d = make_sg();
    } else if (name == "vicsek") {
        d = make_vicsek(1);
    } else if (name.rfind("vicsek2k1:", 0) == 0) {
        const std::string tail(name.substr(10));
        int k = 0;
        try {
            std::size_t used = 0;
            k = std::stoi(tail, &used);
            if (used != tail.size()) throw SchemaError("bad vicsek2k1 parameter");
        } catch (const std::logic_error&) {
            throw SchemaError("bad vicsek2k1 parameter '" + tail + "'");
        }
        d = make_vicsek(k);
    } else {
        throw SchemaError("unknown preset '" + std::string(name) + "'");
    }
    d.validate();
    return d;
}

std::vector<std::string> preset_names() {
    return {"interval", "sg", "vicsek", "vicsek2k1:<k>"};
}

} // namespace pcf
