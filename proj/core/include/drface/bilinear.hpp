#pragma once

#include "drface/mesh.hpp"

#include <string>
#include <vector>

namespace drface {

// Truncated bilinear face tensor: vertex coordinates stacked along mode 1,
// identities along mode 2, expressions along mode 3. The reduced core keeps
// the top-left k_id x k_exp block of the HO-SVD; a mesh is the contraction
// core x2 alpha_id x3 alpha_exp.
struct CoreTensor {
    // (3n) x (k_id * k_exp); column a * k_exp + b holds core[:, a, b].
    Eigen::MatrixXd core;
    // Training-grid coefficients (rows of the truncated mode bases), kept so
    // callers can reconstruct grid meshes and build ALS initializations.
    Eigen::MatrixXd id_coeffs;  // I x k_id
    Eigen::MatrixXd exp_coeffs; // E x k_exp
    Eigen::MatrixXi faces;      // shared connectivity for reconstruction
    int k_id = 0;
    int k_exp = 0;
    int vertex_count = 0;
};

struct BilinearFit {
    Eigen::VectorXd alpha_id;
    Eigen::VectorXd alpha_exp;
    double residual = 0; // RMS vertex distance in mm
    int iterations = 0;
    std::vector<double> residual_log; // one entry per iteration, non-increasing
};

// HO-SVD construction over a complete identity x expression grid of meshes
// with shared connectivity.
CoreTensor build_core(const std::vector<std::vector<Mesh>>& grid, int k_id, int k_exp);

Mesh bilinear_reconstruct(const CoreTensor& core, const Eigen::VectorXd& alpha_id,
                          const Eigen::VectorXd& alpha_exp);

// Alternating least squares: solve for alpha_id with alpha_exp fixed and vice
// versa until the relative residual change drops below tol. alpha_exp starts
// at the mode-3 mean coefficient of the training grid unless an explicit
// initialization is given.
BilinearFit als_fit(const CoreTensor& core, const Mesh& mesh, int max_iter = 100,
                    double tol = 1e-6, const Eigen::VectorXd* init_alpha_exp = nullptr);

// Expression transfer in the bilinear model: the target's identity
// coefficients with the source's expression coefficients.
Mesh bilinear_transfer(const CoreTensor& core, const Mesh& source, const Mesh& target);

// Stored in the named-tensor container with kind "bilinear_core".
void save_core(const CoreTensor& core, const std::string& json_path);
CoreTensor load_core(const std::string& json_path);

} // namespace drface
