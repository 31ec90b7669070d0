#pragma once

#include "drface/mesh.hpp"
#include "drface/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

namespace drface {

// Layers carry their parameters; each forward fills a tape with the
// intermediates one backward pass needs. A tape is single-use: gradients are
// exact and composed explicitly, so reuse is a bug and throws.

struct ChebTape {
    std::vector<Eigen::MatrixXd> basis; // T_k(Ltilde) X for k = 0..K-1
    bool consumed = false;
};

struct ChebGrads {
    std::vector<Eigen::MatrixXd> theta;
    Eigen::RowVectorXd bias;
};

// Spectral graph convolution with the filter parameterized as a K-term
// Chebyshev polynomial of the scaled Laplacian:
//   Y = sum_k T_k(Ltilde) X Theta_k + bias,
// computed with the recurrence X_0 = X, X_1 = Ltilde X,
// X_k = 2 Ltilde X_{k-1} - X_{k-2}.
//
// Rows may stack several samples: an input of (B*n) x F_in is processed
// blockwise against the n x n Laplacian.
class ChebConv {
  public:
    ChebConv() = default;
    ChebConv(int order, int in_channels, int out_channels, bool with_bias = true);

    // Uniform(-w, w) with w = sqrt(6 / (F_in*K)); bias zero.
    void init_params(Rng& rng);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const Eigen::SparseMatrix<double>& lap,
                            ChebTape* tape = nullptr) const;
    // Returns dX; accumulates parameter gradients into `grads`.
    Eigen::MatrixXd backward(ChebTape& tape, const Eigen::MatrixXd& dy,
                             const Eigen::SparseMatrix<double>& lap, ChebGrads& grads) const;

    ChebGrads zero_grads() const;

    int order() const { return order_; }
    int in_channels() const { return in_channels_; }
    int out_channels() const { return out_channels_; }
    bool with_bias() const { return with_bias_; }

    std::vector<Eigen::MatrixXd> theta; // K matrices, F_in x F_out
    Eigen::RowVectorXd bias;            // F_out

  private:
    int order_ = 0;
    int in_channels_ = 0;
    int out_channels_ = 0;
    bool with_bias_ = true;
};

struct DenseTape {
    Eigen::MatrixXd input;
    bool consumed = false;
};

struct DenseGrads {
    Eigen::MatrixXd weight;
    Eigen::RowVectorXd bias;
};

// Affine map Y = X W + bias.
class Dense {
  public:
    Dense() = default;
    Dense(int in_features, int out_features);

    // Uniform(-w, w) with w = sqrt(6 / F_in); bias zero.
    void init_params(Rng& rng);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, DenseTape* tape = nullptr) const;
    Eigen::MatrixXd backward(DenseTape& tape, const Eigen::MatrixXd& dy, DenseGrads& grads) const;

    DenseGrads zero_grads() const;

    int in_features() const { return in_features_; }
    int out_features() const { return out_features_; }

    Eigen::MatrixXd weight; // F_in x F_out
    Eigen::RowVectorXd bias;

  private:
    int in_features_ = 0;
    int out_features_ = 0;
};

struct ActTape {
    Eigen::MatrixXd input;
    bool consumed = false;
};

inline constexpr double kLeakySlope = 0.1;

// Leaky rectifier, slope 0.1 on the negative side.
Eigen::MatrixXd leaky_relu_forward(const Eigen::MatrixXd& x, ActTape* tape = nullptr);
Eigen::MatrixXd leaky_relu_backward(ActTape& tape, const Eigen::MatrixXd& dy);

// Sample-major flatten: (B*n) x F  <->  B x (n*F), vertex-major within a row.
Eigen::MatrixXd flatten_rows(const Eigen::MatrixXd& x, int rows_per_sample);
Eigen::MatrixXd unflatten_rows(const Eigen::MatrixXd& x, int rows_per_sample, int channels);

// Ltilde applied to each n-row block of x (x may stack several samples).
Eigen::MatrixXd apply_laplacian_blocked(const Eigen::SparseMatrix<double>& lap,
                                        const Eigen::MatrixXd& x);

} // namespace drface
