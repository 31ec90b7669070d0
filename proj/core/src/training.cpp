#include "drface/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace drface {

void TrainConfig::validate() const {
    if (epochs_per_stage <= 0 || learning_rate <= 0 || lr_decay <= 0 || lr_decay_every <= 0 ||
        batch_size <= 0 || latent_id <= 0 || latent_exp <= 0) {
        throw DataError("TrainConfig: rates, epochs, batch size and latent sizes must be positive");
    }
    if (alpha_id_kld < 0 || alpha_exp_kld < 0) {
        throw DataError("TrainConfig: KL weights must be non-negative");
    }
}

nlohmann::json TrainConfig::to_json() const {
    return nlohmann::json{{"epochs_per_stage", epochs_per_stage},
                          {"learning_rate", learning_rate},
                          {"lr_decay", lr_decay},
                          {"lr_decay_every", lr_decay_every},
                          {"alpha_id_kld", alpha_id_kld},
                          {"alpha_exp_kld", alpha_exp_kld},
                          {"batch_size", batch_size},
                          {"seed", seed},
                          {"adam_beta1", adam_beta1},
                          {"adam_beta2", adam_beta2},
                          {"adam_eps", adam_eps},
                          {"latent_id", latent_id},
                          {"latent_exp", latent_exp}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs_per_stage = j.value("epochs_per_stage", c.epochs_per_stage);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.lr_decay_every = j.value("lr_decay_every", c.lr_decay_every);
    c.alpha_id_kld = j.value("alpha_id_kld", c.alpha_id_kld);
    c.alpha_exp_kld = j.value("alpha_exp_kld", c.alpha_exp_kld);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.latent_id = j.value("latent_id", c.latent_id);
    c.latent_exp = j.value("latent_exp", c.latent_exp);
    return c;
}

AdamOptimizer::AdamOptimizer(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(const std::vector<TensorView>& params,
                         const std::vector<TensorView>& grads, double lr) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("AdamOptimizer::step: view list mismatch");
    }
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = Eigen::VectorXd::Zero(params[i].size());
            v_[i] = Eigen::VectorXd::Zero(params[i].size());
        }
    }
    ++t_;
    const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Eigen::Map<Eigen::VectorXd> p(params[i].data, params[i].size());
        Eigen::Map<const Eigen::VectorXd> g(grads[i].data, grads[i].size());
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
        const Eigen::VectorXd m_hat = m_[i] / correction1;
        const Eigen::VectorXd v_hat = v_[i] / correction2;
        p -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
    }
}

namespace {

FeatureBatch gather_batch(const ModelParams& model, const std::vector<Triplet>& triplets,
                          const std::vector<int>& order, int begin, int count, int n) {
    FeatureBatch batch;
    batch.samples = count;
    batch.input.resize(static_cast<long>(count) * n, NetConfig::feature_dim);
    batch.target_id.resize(static_cast<long>(count) * n, NetConfig::feature_dim);
    batch.target_exp.resize(static_cast<long>(count) * n, NetConfig::feature_dim);
    for (int b = 0; b < count; ++b) {
        const Triplet& t = triplets[order[begin + b]];
        batch.input.middleRows(static_cast<long>(b) * n, n) =
            normalize_features(model, t.input.values);
        batch.target_id.middleRows(static_cast<long>(b) * n, n) =
            normalize_features(model, t.identity.values);
        batch.target_exp.middleRows(static_cast<long>(b) * n, n) =
            normalize_features(model, t.expression.values);
    }
    return batch;
}

void scale_views(const std::vector<TensorView>& views, double s) {
    for (const auto& v : views) {
        Eigen::Map<Eigen::VectorXd>(v.data, v.size()) *= s;
    }
}

} // namespace

LossComponents evaluate_corpus(const ModelParams& model, const TrainData& data,
                               const TrainConfig& config) {
    const int n = data.vertex_count;
    const Eigen::MatrixXd rest_normed = normalize_features(model, data.rest_feature);
    const std::vector<int> order = [&] {
        std::vector<int> o(data.triplets.size());
        std::iota(o.begin(), o.end(), 0);
        return o;
    }();
    LossComponents sum;
    sum.alpha_id_kld = config.alpha_id_kld;
    sum.alpha_exp_kld = config.alpha_exp_kld;
    int batches = 0;
    const int total = static_cast<int>(data.triplets.size());
    // Evaluation batch size is independent of the training batch size.
    const int eval_batch = std::max(config.batch_size, 16);
    for (int begin = 0; begin < total; begin += eval_batch) {
        const int count = std::min(eval_batch, total - begin);
        const FeatureBatch batch = gather_batch(model, data.triplets, order, begin, count, n);
        const LossComponents c =
            loss_batch(model, data.lap, batch, rest_normed, TrainStage::full, nullptr,
                       config.alpha_id_kld, config.alpha_exp_kld, nullptr);
        // Weight by batch size so the result is a per-sample mean.
        const double w = static_cast<double>(count);
        sum.rec += w * c.rec;
        sum.dis += w * c.dis;
        sum.id += w * c.id;
        sum.exp += w * c.exp;
        sum.id_kld += w * c.id_kld;
        sum.exp_kld += w * c.exp_kld;
        ++batches;
    }
    (void)batches;
    const double inv = 1.0 / static_cast<double>(total);
    sum.rec *= inv;
    sum.dis *= inv;
    sum.id *= inv;
    sum.exp *= inv;
    sum.id_kld *= inv;
    sum.exp_kld *= inv;
    return sum;
}

namespace {

void validate_train_data(const TrainConfig& config, const TrainData& data) {
    config.validate();
    if (data.triplets.empty()) {
        throw DataError("train: empty corpus");
    }
    const int n = data.vertex_count;
    for (const auto& t : data.triplets) {
        if (t.input.vertex_count() != n || t.identity.vertex_count() != n ||
            t.expression.vertex_count() != n) {
            throw DataError("train: triplet vertex count mismatch");
        }
        if (t.input.reference_id != data.reference_id ||
            t.identity.reference_id != data.reference_id ||
            t.expression.reference_id != data.reference_id) {
            throw DataError("train: triplet reference mismatch");
        }
    }
}

} // namespace

ModelParams untrained_model(const TrainConfig& config, const TrainData& data) {
    validate_train_data(config, data);
    Rng init_rng = Rng(config.seed).split(1);
    NetConfig net;
    net.latent_id = config.latent_id;
    net.latent_exp = config.latent_exp;
    net.vertex_count = data.vertex_count;
    ModelParams model = make_model(net, init_rng);
    model.reference_id = data.reference_id;
    return model;
}

ModelParams initial_model(const TrainConfig& config, const TrainData& data) {
    ModelParams model = untrained_model(config, data);
    std::vector<const Eigen::MatrixXd*> feats;
    feats.reserve(data.triplets.size());
    for (const auto& t : data.triplets) {
        feats.push_back(&t.input.values);
    }
    fit_normalization(model, feats);
    return model;
}

TrainResult train(const TrainConfig& config, const TrainData& data) {
    const int n = data.vertex_count;
    Rng root(config.seed);
    Rng shuffle_rng = root.split(2);
    Rng reparam_rng = root.split(3);

    ModelParams model = initial_model(config, data);

    TrainResult result;
    result.initial_eval = evaluate_corpus(model, data, config);

    const Eigen::MatrixXd rest_normed = normalize_features(model, data.rest_feature);
    ModelGrads grads = zero_grads(model);
    const int total = static_cast<int>(data.triplets.size());
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);

    int global_epoch = 0;
    for (int stage_idx = 1; stage_idx <= 3; ++stage_idx) {
        const TrainStage stage = static_cast<TrainStage>(stage_idx);
        // Stage-specific parameter set; fresh optimizer state per stage.
        std::vector<TensorView> param_views, grad_views;
        switch (stage) {
        case TrainStage::branches: {
            param_views = tensor_views(model.identity, "id");
            auto more = tensor_views(model.expression, "exp");
            param_views.insert(param_views.end(), more.begin(), more.end());
            grad_views = tensor_views(grads.identity, model.identity, "id");
            more = tensor_views(grads.expression, model.expression, "exp");
            grad_views.insert(grad_views.end(), more.begin(), more.end());
            break;
        }
        case TrainStage::fusion:
            param_views = tensor_views(model.fusion, "fusion");
            grad_views = tensor_views(grads.fusion, model.fusion, "fusion");
            break;
        case TrainStage::full:
            param_views = tensor_views(model);
            grad_views = tensor_views(grads, model);
            break;
        }
        AdamOptimizer adam(config.adam_beta1, config.adam_beta2, config.adam_eps);

        for (int epoch = 1; epoch <= config.epochs_per_stage; ++epoch) {
            ++global_epoch;
            const double lr = config.learning_rate *
                              std::pow(config.lr_decay, (epoch - 1) / config.lr_decay_every);

            // Fisher-Yates shuffle from the seeded stream.
            for (int i = total - 1; i > 0; --i) {
                std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
            }

            for (int begin = 0; begin < total; begin += config.batch_size) {
                const int count = std::min(config.batch_size, total - begin);
                const FeatureBatch batch = gather_batch(model, data.triplets, order, begin, count, n);
                scale_views(grad_views, 0.0);
                loss_batch(model, data.lap, batch, rest_normed, stage, &reparam_rng,
                           config.alpha_id_kld, config.alpha_exp_kld, &grads);
                adam.step(param_views, grad_views, lr);
            }

            EpochLog entry;
            entry.epoch = global_epoch;
            entry.stage = stage_idx;
            entry.lr = lr;
            entry.losses = evaluate_corpus(model, data, config);
            if (!entry.losses.finite()) {
                throw DataError("train: loss diverged (" + entry.losses.first_non_finite() +
                                " non-finite) at epoch " + std::to_string(global_epoch));
            }
            result.log.push_back(entry);
        }
    }

    result.final_eval = evaluate_corpus(model, data, config);
    result.model = std::move(model);
    return result;
}

void write_training_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("write_training_log: cannot open " + path);
    }
    out << "epoch,stage,L_total,L_rec,L_dis,L_id,L_exp,L_id_kld,L_exp_kld,lr\n";
    char line[512];
    for (const auto& e : log) {
        std::snprintf(line, sizeof line, "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch,
                      e.stage, e.losses.total(), e.losses.rec, e.losses.dis, e.losses.id,
                      e.losses.exp, e.losses.id_kld, e.losses.exp_kld, e.lr);
        out << line;
    }
    if (!out) {
        throw DataError("write_training_log: write failed for " + path);
    }
}

} // namespace drface
