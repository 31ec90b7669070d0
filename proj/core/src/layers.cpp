#include "drface/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace drface {

namespace {

void check_consumable(bool& consumed, const char* who) {
    if (consumed) {
        throw std::logic_error(std::string(who) + ": tape already consumed (one backward per forward)");
    }
    consumed = true;
}

} // namespace

Eigen::MatrixXd apply_laplacian_blocked(const Eigen::SparseMatrix<double>& lap,
                                        const Eigen::MatrixXd& x) {
    const int n = static_cast<int>(lap.rows());
    if (x.rows() % n != 0) {
        throw std::invalid_argument("apply_laplacian_blocked: row count is not a multiple of n");
    }
    const int blocks = static_cast<int>(x.rows()) / n;
    if (blocks == 1) {
        return lap * x;
    }
    Eigen::MatrixXd y(x.rows(), x.cols());
    for (int b = 0; b < blocks; ++b) {
        y.middleRows(b * n, n) = lap * x.middleRows(b * n, n);
    }
    return y;
}

ChebConv::ChebConv(int order, int in_channels, int out_channels, bool with_bias)
    : theta(order, Eigen::MatrixXd::Zero(in_channels, out_channels)),
      bias(Eigen::RowVectorXd::Zero(out_channels)), order_(order), in_channels_(in_channels),
      out_channels_(out_channels), with_bias_(with_bias) {
    if (order < 1) {
        throw std::invalid_argument("ChebConv: order must be >= 1");
    }
}

void ChebConv::init_params(Rng& rng) {
    // Fan-in bound (each output channel sums K basis terms over F_in inputs)
    // so signal variance is preserved through the layer regardless of how
    // asymmetric the channel counts are.
    const double w = std::sqrt(6.0 / (in_channels_ * order_));
    for (auto& t : theta) {
        for (int i = 0; i < t.rows(); ++i) {
            for (int j = 0; j < t.cols(); ++j) {
                t(i, j) = rng.uniform(-w, w);
            }
        }
    }
    bias.setZero();
}

Eigen::MatrixXd ChebConv::forward(const Eigen::MatrixXd& x, const Eigen::SparseMatrix<double>& lap,
                                  ChebTape* tape) const {
    if (x.cols() != in_channels_) {
        throw std::invalid_argument("ChebConv::forward: input has wrong channel count");
    }
    std::vector<Eigen::MatrixXd> basis;
    basis.reserve(order_);
    basis.push_back(x);
    if (order_ > 1) {
        basis.push_back(apply_laplacian_blocked(lap, x));
    }
    for (int k = 2; k < order_; ++k) {
        basis.push_back(2.0 * apply_laplacian_blocked(lap, basis[k - 1]) - basis[k - 2]);
    }
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), out_channels_);
    for (int k = 0; k < order_; ++k) {
        y.noalias() += basis[k] * theta[k];
    }
    if (with_bias_) {
        y.rowwise() += bias;
    }
    if (tape) {
        tape->basis = std::move(basis);
        tape->consumed = false;
    }
    return y;
}

Eigen::MatrixXd ChebConv::backward(ChebTape& tape, const Eigen::MatrixXd& dy,
                                   const Eigen::SparseMatrix<double>& lap, ChebGrads& grads) const {
    check_consumable(tape.consumed, "ChebConv::backward");
    if (dy.cols() != out_channels_ || dy.rows() != tape.basis[0].rows()) {
        throw std::invalid_argument("ChebConv::backward: dy has wrong shape");
    }
    for (int k = 0; k < order_; ++k) {
        grads.theta[k].noalias() += tape.basis[k].transpose() * dy;
    }
    if (with_bias_) {
        grads.bias += dy.colwise().sum();
    }
    // dX = sum_k T_k(Ltilde) dY Theta_k^T  (Ltilde symmetric, so T_k is too).
    Eigen::MatrixXd dx = dy * theta[0].transpose();
    if (order_ > 1) {
        Eigen::MatrixXd z_prev = dy;
        Eigen::MatrixXd z = apply_laplacian_blocked(lap, dy);
        dx.noalias() += z * theta[1].transpose();
        for (int k = 2; k < order_; ++k) {
            Eigen::MatrixXd z_next = 2.0 * apply_laplacian_blocked(lap, z) - z_prev;
            dx.noalias() += z_next * theta[k].transpose();
            z_prev = std::move(z);
            z = std::move(z_next);
        }
    }
    return dx;
}

ChebGrads ChebConv::zero_grads() const {
    ChebGrads g;
    g.theta.assign(order_, Eigen::MatrixXd::Zero(in_channels_, out_channels_));
    g.bias = Eigen::RowVectorXd::Zero(out_channels_);
    return g;
}

Dense::Dense(int in_features, int out_features)
    : weight(Eigen::MatrixXd::Zero(in_features, out_features)),
      bias(Eigen::RowVectorXd::Zero(out_features)), in_features_(in_features),
      out_features_(out_features) {}

void Dense::init_params(Rng& rng) {
    // Fan-in bound; see ChebConv::init_params.
    const double w = std::sqrt(6.0 / in_features_);
    for (int i = 0; i < weight.rows(); ++i) {
        for (int j = 0; j < weight.cols(); ++j) {
            weight(i, j) = rng.uniform(-w, w);
        }
    }
    bias.setZero();
}

Eigen::MatrixXd Dense::forward(const Eigen::MatrixXd& x, DenseTape* tape) const {
    if (x.cols() != in_features_) {
        throw std::invalid_argument("Dense::forward: input has wrong feature count");
    }
    Eigen::MatrixXd y = x * weight;
    y.rowwise() += bias;
    if (tape) {
        tape->input = x;
        tape->consumed = false;
    }
    return y;
}

Eigen::MatrixXd Dense::backward(DenseTape& tape, const Eigen::MatrixXd& dy, DenseGrads& grads) const {
    check_consumable(tape.consumed, "Dense::backward");
    grads.weight.noalias() += tape.input.transpose() * dy;
    grads.bias += dy.colwise().sum();
    return dy * weight.transpose();
}

DenseGrads Dense::zero_grads() const {
    DenseGrads g;
    g.weight = Eigen::MatrixXd::Zero(in_features_, out_features_);
    g.bias = Eigen::RowVectorXd::Zero(out_features_);
    return g;
}

Eigen::MatrixXd leaky_relu_forward(const Eigen::MatrixXd& x, ActTape* tape) {
    if (tape) {
        tape->input = x;
        tape->consumed = false;
    }
    return x.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

Eigen::MatrixXd leaky_relu_backward(ActTape& tape, const Eigen::MatrixXd& dy) {
    check_consumable(tape.consumed, "leaky_relu_backward");
    return dy.cwiseProduct(
        tape.input.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
}

Eigen::MatrixXd flatten_rows(const Eigen::MatrixXd& x, int rows_per_sample) {
    const int channels = static_cast<int>(x.cols());
    const int samples = static_cast<int>(x.rows()) / rows_per_sample;
    Eigen::MatrixXd out(samples, rows_per_sample * channels);
    for (int b = 0; b < samples; ++b) {
        for (int r = 0; r < rows_per_sample; ++r) {
            out.block(b, r * channels, 1, channels) = x.row(b * rows_per_sample + r);
        }
    }
    return out;
}

Eigen::MatrixXd unflatten_rows(const Eigen::MatrixXd& x, int rows_per_sample, int channels) {
    const int samples = static_cast<int>(x.rows());
    Eigen::MatrixXd out(samples * rows_per_sample, channels);
    for (int b = 0; b < samples; ++b) {
        for (int r = 0; r < rows_per_sample; ++r) {
            out.row(b * rows_per_sample + r) = x.block(b, r * channels, 1, channels);
        }
    }
    return out;
}

} // namespace drface
