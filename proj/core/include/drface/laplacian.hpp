#pragma once

#include "drface/mesh.hpp"

#include <Eigen/Sparse>

namespace drface {

// Symmetric per-edge cotangent weights of the reference mesh, stored as a
// sparse matrix over the face-graph edges. Entries are clamped from below at
// kCotanClamp so the decode normal equations stay positive definite on
// obtuse triangulations.
struct CotanWeights {
    Eigen::SparseMatrix<double> weights;

    double at(int i, int j) const { return weights.coeff(i, j); }
};

inline constexpr double kCotanClamp = 1e-8;

// c_ij = max(0.5*(cot a_ij + cot b_ij), clamp) with a/b the angles opposite
// edge (i,j); boundary edges use the single available angle. Throws on
// zero-area triangles, naming the face.
CotanWeights cotangent_weights(const Mesh& mesh);

// L = I - D^{-1/2} A D^{-1/2} for a binary symmetric adjacency.
// Throws if any vertex is isolated.
Eigen::SparseMatrix<double> normalized_laplacian(const Eigen::SparseMatrix<double>& adjacency);
Eigen::SparseMatrix<double> normalized_laplacian(const Mesh& mesh);

// Ltilde = 2 L / lambda_max - I. With lambda_max = 2 (a valid upper bound for
// the normalized Laplacian) the spectrum lands in [-1, 1].
Eigen::SparseMatrix<double> scaled_laplacian(const Eigen::SparseMatrix<double>& laplacian,
                                             double lambda_max = 2.0);

// Optional tighter bound: power-iteration estimate of the largest eigenvalue.
double estimate_lambda_max(const Eigen::SparseMatrix<double>& laplacian, int max_iters = 50,
                           double tol = 1e-6);

bool is_symmetric(const Eigen::SparseMatrix<double>& m, double tol = 1e-12);

} // namespace drface
