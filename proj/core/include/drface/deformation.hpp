#pragma once

#include "drface/laplacian.hpp"
#include "drface/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <string>
#include <vector>

namespace drface {

// Per-vertex deformation feature relative to a fixed reference mesh.
// Row layout: [rotation log (3), s11, s12, s13, s22, s23, s33] — the axis
// times angle of the rotation part and the upper triangle of the symmetric
// scale/shear part of the polar-decomposed deformation gradient.
struct DRFeature {
    Eigen::MatrixXd values;   // n x 9
    std::string reference_id; // content hash of the reference mesh

    int vertex_count() const { return static_cast<int>(values.rows()); }
};

// The rest feature row: identity rotation (zero log) and identity scale.
Eigen::RowVectorXd rest_feature_row();

// Rotation <-> axis-angle log map. Logs are canonical (norm <= pi); the
// near-zero and near-pi branches use series/symmetric-part formulas.
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& rotation);
Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& log);

// T = R * S with R a proper rotation (det +1) and S symmetric; a reflection
// is folded into S by negating the smallest singular value's contribution.
void polar_decompose(const Eigen::Matrix3d& t, Eigen::Matrix3d& rotation, Eigen::Matrix3d& scale_shear);

// Reference mesh plus everything deformation encode/decode needs:
// cotangent weights and the cached factorization of the decode normal
// equations. Immutable after construction; solves against it may run
// concurrently.
class ReferenceFrame {
  public:
    explicit ReferenceFrame(Mesh reference);

    const Mesh& mesh() const { return mesh_; }
    const CotanWeights& weights() const { return weights_; }
    const std::string& id() const { return id_; }

    // Per-vertex deformation gradients T_i of `deformed` against the
    // reference: the cotan-weighted least-squares fit of each 1-ring's edge
    // vectors, with an eps*I Gram regularization for flat rings.
    std::vector<Eigen::Matrix3d> deformation_gradients(const Mesh& deformed) const;

    DRFeature encode(const Mesh& deformed) const;
    Mesh decode(const DRFeature& feature) const;

    // The reference's own feature (all rows ~ rest_feature_row()).
    const DRFeature& rest_feature() const { return rest_feature_; }

  private:
    Mesh mesh_;
    CotanWeights weights_;
    std::string id_;
    // Decode normal equations with vertex 0 eliminated (translation gauge);
    // SPD because the graph is connected and weights are positive.
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
    DRFeature rest_feature_;
};

// DRF binary format: one-line JSON header + n*9 little-endian f32, row-major.
void save_drf(const DRFeature& feature, const std::string& path);
DRFeature load_drf(const std::string& path);

// Training triplet: the feature of an input mesh, of its identity mesh
// (the subject's neutral), and of its expression mesh (the expression
// replayed on the mean face).
struct Triplet {
    DRFeature input;
    DRFeature identity;
    DRFeature expression;
    int identity_index = -1;
    int expression_index = -1;
};

} // namespace drface
