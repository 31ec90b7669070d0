#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>
#include <vector>

namespace drface {

// Raised for malformed or inconsistent input data (files, meshes, features).
// The CLI maps it to a distinct exit code.
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Triangle mesh with shared-connectivity semantics: all meshes of a corpus
// carry the same face list and differ only in vertex positions (millimeters).
//
// Construction validates the spec invariants: in-range non-degenerate faces
// and a connected vertex graph (decode anchoring needs connectedness).
// Instances are immutable after construction and safe to share across
// threads.
class Mesh {
  public:
    Mesh(Eigen::MatrixXd vertices, Eigen::MatrixXi faces);

    int vertex_count() const { return static_cast<int>(vertices_.rows()); }
    int face_count() const { return static_cast<int>(faces_.rows()); }

    const Eigen::MatrixXd& vertices() const { return vertices_; }
    const Eigen::MatrixXi& faces() const { return faces_; }

    // Binary {0,1} adjacency from the face edge set; symmetric, zero diagonal.
    const Eigen::SparseMatrix<double>& adjacency() const { return adjacency_; }
    // Sorted 1-ring neighborhoods.
    const std::vector<std::vector<int>>& neighborhoods() const { return neighbors_; }

    Eigen::Vector3d centroid() const { return vertices_.colwise().mean().transpose(); }
    double bbox_diagonal() const {
        return (vertices_.colwise().maxCoeff() - vertices_.colwise().minCoeff()).norm();
    }

    // Same face list, new positions.
    Mesh with_vertices(Eigen::MatrixXd vertices) const { return Mesh(std::move(vertices), faces_); }

    // SHA-256 over the exact vertex/face bytes; identifies a reference mesh.
    std::string content_hash() const;

  private:
    Eigen::MatrixXd vertices_;
    Eigen::MatrixXi faces_;
    Eigen::SparseMatrix<double> adjacency_;
    std::vector<std::vector<int>> neighbors_;
};

// Wavefront OBJ subset: `v x y z`, `f i j k` (1-based, triangles only),
// `#` comments. Normal/texture data is ignored on read and never written.
Mesh load_obj(const std::string& path);
void save_obj(const Mesh& mesh, const std::string& path);

} // namespace drface
