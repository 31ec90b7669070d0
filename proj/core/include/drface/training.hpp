#pragma once

#include "drface/network.hpp"

#include <string>
#include <vector>

namespace drface {

// Training hyper-parameters. Defaults are the published schedule: 50 epochs
// per stage, learning rate 1e-4 decayed by 0.6 every 10 epochs, KL weights
// 1e-5. The whole struct is echoed into every saved model.
struct TrainConfig {
    int epochs_per_stage = 50;
    double learning_rate = 1e-4;
    double lr_decay = 0.6;
    int lr_decay_every = 10;
    double alpha_id_kld = 1e-5;
    double alpha_exp_kld = 1e-5;
    int batch_size = 16;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int latent_id = 50;
    int latent_exp = 25;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// Adam over a fixed list of tensors. Moment buffers are allocated on first
// step and keyed by position, so the view list must be stable.
class AdamOptimizer {
  public:
    AdamOptimizer(double beta1, double beta2, double eps);

    void step(const std::vector<TensorView>& params, const std::vector<TensorView>& grads,
              double lr);

  private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Eigen::VectorXd> m_, v_;
};

struct EpochLog {
    int epoch = 0; // global, 1-based across stages
    int stage = 0; // 1..3
    LossComponents losses;
    double lr = 0;
};

// Everything the trainer needs besides hyper-parameters.
struct TrainData {
    std::vector<Triplet> triplets;
    Eigen::MatrixXd rest_feature;      // raw rest feature of the reference (n x 9)
    Eigen::SparseMatrix<double> lap;   // scaled Laplacian of the shared connectivity
    std::string reference_id;
    int vertex_count = 0;
};

struct TrainResult {
    ModelParams model;
    std::vector<EpochLog> log;
    // Full-corpus evaluation-mode L_total before any training and after the
    // final stage (same components as the per-epoch log).
    LossComponents initial_eval;
    LossComponents final_eval;
};

// The seed-derived random initialization with normalization statistics
// fitted over the training features; exactly the state train() starts from.
ModelParams initial_model(const TrainConfig& config, const TrainData& data);

// Random initialization only: no data-derived state at all (normalization
// stays at mean 0 / std 1). This is the untrained reference point for
// before/after comparisons; fitting the feature statistics is already part
// of the training pipeline.
ModelParams untrained_model(const TrainConfig& config, const TrainData& data);

// Three-stage schedule: (1) both decomposition branches on their
// reconstruction + weighted KL losses, (2) fusion on the reconstruction loss
// with branches frozen, (3) everything end-to-end on the total loss with the
// disentangling term. The learning rate restarts at config.learning_rate each
// stage. Per-epoch logs hold evaluation-mode (z = mu) losses over the corpus.
// Throws if a non-finite loss appears, naming the epoch.
TrainResult train(const TrainConfig& config, const TrainData& data);

// Evaluation-mode loss averaged over a triplet set.
LossComponents evaluate_corpus(const ModelParams& model, const TrainData& data,
                               const TrainConfig& config);

// CSV training log: epoch,stage,L_total,L_rec,L_dis,L_id,L_exp,L_id_kld,L_exp_kld,lr
void write_training_log(const std::vector<EpochLog>& log, const std::string& path);

} // namespace drface
