#include "drface/mesh.hpp"

#include "drface/sha256.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace drface {

Mesh::Mesh(Eigen::MatrixXd vertices, Eigen::MatrixXi faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    const int n = static_cast<int>(vertices_.cols() == 3 ? vertices_.rows() : -1);
    if (n < 0) {
        throw DataError("mesh: vertices must be an n x 3 matrix");
    }
    if (n == 0) {
        throw DataError("mesh: empty mesh");
    }
    if (faces_.cols() != 3) {
        throw DataError("mesh: faces must be an m x 3 matrix");
    }
    for (int f = 0; f < faces_.rows(); ++f) {
        const int a = faces_(f, 0), b = faces_(f, 1), c = faces_(f, 2);
        if (a < 0 || a >= n || b < 0 || b >= n || c < 0 || c >= n) {
            throw DataError("mesh: face " + std::to_string(f) + " references a vertex out of range");
        }
        if (a == b || b == c || a == c) {
            throw DataError("mesh: face " + std::to_string(f) + " is degenerate (repeated vertex)");
        }
    }

    std::set<std::pair<int, int>> edges;
    for (int f = 0; f < faces_.rows(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const int i = faces_(f, k);
            const int j = faces_(f, (k + 1) % 3);
            edges.insert({std::min(i, j), std::max(i, j)});
        }
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(edges.size() * 2);
    neighbors_.assign(n, {});
    for (const auto& [i, j] : edges) {
        triplets.emplace_back(i, j, 1.0);
        triplets.emplace_back(j, i, 1.0);
        neighbors_[i].push_back(j);
        neighbors_[j].push_back(i);
    }
    for (auto& ring : neighbors_) {
        std::sort(ring.begin(), ring.end());
    }
    adjacency_.resize(n, n);
    adjacency_.setFromTriplets(triplets.begin(), triplets.end());

    // Connectivity (BFS over the face graph).
    std::vector<char> seen(n, 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int u : neighbors_[v]) {
            if (!seen[u]) {
                seen[u] = 1;
                ++reached;
                stack.push_back(u);
            }
        }
    }
    if (reached != n) {
        throw DataError("mesh: vertex graph is disconnected (" + std::to_string(reached) + " of " +
                        std::to_string(n) + " vertices reachable from vertex 0)");
    }
}

std::string Mesh::content_hash() const {
    Sha256 state;
    const std::int32_t n = vertex_count();
    const std::int32_t m = face_count();
    state.update(&n, sizeof n);
    state.update(&m, sizeof m);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const double v = vertices_(i, c);
            state.update(&v, sizeof v);
        }
    }
    for (int f = 0; f < m; ++f) {
        for (int c = 0; c < 3; ++c) {
            const std::int32_t idx = faces_(f, c);
            state.update(&idx, sizeof idx);
        }
    }
    return state.hex_digest();
}

namespace {

bool parse_double(const std::string& token, double& out) {
    std::size_t pos = 0;
    try {
        out = std::stod(token, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == token.size();
}

// An OBJ face entry may be "i", "i/t", or "i/t/n"; only the vertex index is used.
bool parse_face_index(const std::string& token, long& out) {
    const std::string head = token.substr(0, token.find('/'));
    std::size_t pos = 0;
    try {
        out = std::stol(head, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == head.size();
}

} // namespace

Mesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("load_obj: cannot open " + path);
    }
    std::vector<Eigen::Vector3d> verts;
    std::vector<Eigen::Vector3i> faces;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') {
            continue;
        }
        const auto fail = [&](const std::string& msg) {
            throw DataError("load_obj: " + path + ":" + std::to_string(line_no) + ": " + msg);
        };
        if (tag == "v") {
            std::string sx, sy, sz, extra;
            if (!(ls >> sx >> sy >> sz) || (ls >> extra)) {
                fail("vertex line must be `v x y z`");
            }
            Eigen::Vector3d p;
            if (!parse_double(sx, p.x()) || !parse_double(sy, p.y()) || !parse_double(sz, p.z())) {
                fail("vertex line has a non-numeric coordinate");
            }
            verts.push_back(p);
        } else if (tag == "f") {
            std::vector<long> idx;
            std::string token;
            while (ls >> token) {
                long i = 0;
                if (!parse_face_index(token, i)) {
                    fail("face index '" + token + "' is not an integer");
                }
                idx.push_back(i);
            }
            if (idx.size() != 3) {
                fail("non-triangle face with " + std::to_string(idx.size()) + " vertices");
            }
            faces.emplace_back(static_cast<int>(idx[0]) - 1, static_cast<int>(idx[1]) - 1,
                               static_cast<int>(idx[2]) - 1);
        } else if (tag == "vn" || tag == "vt" || tag == "vp" || tag == "s" || tag == "o" ||
                   tag == "g" || tag == "usemtl" || tag == "mtllib" || tag == "l") {
            continue;
        } else {
            fail("unsupported OBJ keyword '" + tag + "'");
        }
    }
    if (verts.empty()) {
        throw DataError("load_obj: " + path + ": empty mesh (no vertices)");
    }
    const int n = static_cast<int>(verts.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int i = faces[f](c);
            if (i < 0 || i >= n) {
                throw DataError("load_obj: " + path + ": face " + std::to_string(f + 1) +
                                " index " + std::to_string(i + 1) + " out of range (n=" +
                                std::to_string(n) + ")");
            }
        }
    }
    Eigen::MatrixXd v(n, 3);
    for (int i = 0; i < n; ++i) {
        v.row(i) = verts[i].transpose();
    }
    Eigen::MatrixXi f(static_cast<int>(faces.size()), 3);
    for (int i = 0; i < f.rows(); ++i) {
        f.row(i) = faces[i].transpose();
    }
    return Mesh(std::move(v), std::move(f));
}

void save_obj(const Mesh& mesh, const std::string& path) {
    if (mesh.vertex_count() == 0) {
        throw DataError("save_obj: empty mesh");
    }
    std::ofstream out(path);
    if (!out) {
        throw DataError("save_obj: cannot open " + path + " for writing");
    }
    char buf[128];
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        std::snprintf(buf, sizeof buf, "v %.10g %.10g %.10g\n", mesh.vertices()(i, 0),
                      mesh.vertices()(i, 1), mesh.vertices()(i, 2));
        out << buf;
    }
    for (int f = 0; f < mesh.face_count(); ++f) {
        std::snprintf(buf, sizeof buf, "f %d %d %d\n", mesh.faces()(f, 0) + 1,
                      mesh.faces()(f, 1) + 1, mesh.faces()(f, 2) + 1);
        out << buf;
    }
    if (!out) {
        throw DataError("save_obj: write failed for " + path);
    }
}

} // namespace drface
