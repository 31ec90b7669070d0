#include "drface/network.hpp"

#include <cmath>
#include <stdexcept>

namespace drface {

namespace {

Eigen::MatrixXd mae_gradient(const Eigen::MatrixXd& diff, double denom) {
    return diff.array().sign().matrix() / denom;
}

double mae(const Eigen::MatrixXd& diff) {
    return diff.array().abs().mean();
}

} // namespace

ModelParams make_model(const NetConfig& config, Rng& rng) {
    if (config.vertex_count <= 0) {
        throw std::invalid_argument("make_model: vertex_count must be set");
    }
    const int c = config.conv_channels;
    const int h = config.dense_hidden;
    const int n = config.vertex_count;
    const int d = NetConfig::feature_dim;

    ModelParams m;
    m.config = config;

    auto build_branch = [&](int latent) {
        BranchParams b;
        b.latent_dim = latent;
        b.enc.conv1 = ChebConv(config.cheb_order, d, c, config.conv_bias);
        b.enc.conv2 = ChebConv(config.cheb_order, c, c, config.conv_bias);
        b.enc.fc1 = Dense(n * c, h);
        b.enc.fc2 = Dense(h, 2 * latent);
        b.dec.fc1 = Dense(latent, h);
        b.dec.fc2 = Dense(h, n * c);
        b.dec.conv1 = ChebConv(config.cheb_order, c, c, config.conv_bias);
        b.dec.conv2 = ChebConv(config.cheb_order, c, d, config.conv_bias);
        b.enc.conv1.init_params(rng);
        b.enc.conv2.init_params(rng);
        b.enc.fc1.init_params(rng);
        b.enc.fc2.init_params(rng);
        // Warm-start the log-variance head low. With it at zero the latent
        // noise is unit-scale and drowns the code for most of the short
        // schedule; sigma ~ e^{-3} keeps the variational path active but
        // lets reconstruction drive training from the first step.
        b.enc.fc2.bias.segment(latent, latent).setConstant(-6.0);
        b.dec.fc1.init_params(rng);
        b.dec.fc2.init_params(rng);
        b.dec.conv1.init_params(rng);
        b.dec.conv2.init_params(rng);
        return b;
    };
    m.identity = build_branch(config.latent_id);
    m.expression = build_branch(config.latent_exp);
    m.fusion.conv1 = ChebConv(config.cheb_order, 2 * d, c, config.conv_bias);
    m.fusion.conv2 = ChebConv(config.cheb_order, c, c, config.conv_bias);
    m.fusion.conv3 = ChebConv(config.cheb_order, c, d, config.conv_bias);
    m.fusion.conv1.init_params(rng);
    m.fusion.conv2.init_params(rng);
    m.fusion.conv3.init_params(rng);

    m.feat_mean = Eigen::RowVectorXd::Zero(d);
    m.feat_std = Eigen::RowVectorXd::Ones(d);
    return m;
}

Eigen::MatrixXd normalize_features(const ModelParams& model, const Eigen::MatrixXd& raw) {
    return (raw.rowwise() - model.feat_mean).array().rowwise() / model.feat_std.array();
}

Eigen::MatrixXd denormalize_features(const ModelParams& model, const Eigen::MatrixXd& normed) {
    return (normed.array().rowwise() * model.feat_std.array()).matrix().rowwise() + model.feat_mean;
}

void fit_normalization(ModelParams& model, const std::vector<const Eigen::MatrixXd*>& features) {
    const int d = NetConfig::feature_dim;
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
    long rows = 0;
    for (const auto* f : features) {
        mean += f->colwise().sum();
        rows += f->rows();
    }
    if (rows == 0) {
        throw DataError("fit_normalization: no feature rows");
    }
    mean /= static_cast<double>(rows);
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
    for (const auto* f : features) {
        var += (f->rowwise() - mean).array().square().colwise().sum().matrix();
    }
    var /= static_cast<double>(rows);
    model.feat_mean = mean;
    model.feat_std = var.array().sqrt().max(1e-8).matrix();
}

// ---------------------------------------------------------------------------

ModelGrads zero_grads(const ModelParams& model) {
    ModelGrads g;
    auto branch = [](const BranchParams& b) {
        BranchGrads bg;
        bg.enc.c1 = b.enc.conv1.zero_grads();
        bg.enc.c2 = b.enc.conv2.zero_grads();
        bg.enc.f1 = b.enc.fc1.zero_grads();
        bg.enc.f2 = b.enc.fc2.zero_grads();
        bg.dec.f1 = b.dec.fc1.zero_grads();
        bg.dec.f2 = b.dec.fc2.zero_grads();
        bg.dec.c1 = b.dec.conv1.zero_grads();
        bg.dec.c2 = b.dec.conv2.zero_grads();
        return bg;
    };
    g.identity = branch(model.identity);
    g.expression = branch(model.expression);
    g.fusion.c1 = model.fusion.conv1.zero_grads();
    g.fusion.c2 = model.fusion.conv2.zero_grads();
    g.fusion.c3 = model.fusion.conv3.zero_grads();
    return g;
}

void encode_forward(const BranchParams& branch, const Eigen::MatrixXd& x,
                    const Eigen::SparseMatrix<double>& lap, int vertex_count, Eigen::MatrixXd& mu,
                    Eigen::MatrixXd& logvar, EncodeTape* tape) {
    const auto a1 = leaky_relu_forward(branch.enc.conv1.forward(x, lap, tape ? &tape->c1 : nullptr),
                                       tape ? &tape->a1 : nullptr);
    const auto a2 = leaky_relu_forward(branch.enc.conv2.forward(a1, lap, tape ? &tape->c2 : nullptr),
                                       tape ? &tape->a2 : nullptr);
    const auto flat = flatten_rows(a2, vertex_count);
    const auto a3 = leaky_relu_forward(branch.enc.fc1.forward(flat, tape ? &tape->f1 : nullptr),
                                       tape ? &tape->a3 : nullptr);
    const Eigen::MatrixXd stats = branch.enc.fc2.forward(a3, tape ? &tape->f2 : nullptr);
    const int latent = branch.latent_dim;
    mu = stats.leftCols(latent);
    const Eigen::MatrixXd raw_logvar = stats.rightCols(latent);
    logvar = raw_logvar.cwiseMax(-kLogvarClamp).cwiseMin(kLogvarClamp);
    if (tape) {
        tape->clamp_mask = (raw_logvar.array().abs() < kLogvarClamp).cast<double>().matrix();
    }
}

Eigen::MatrixXd encode_backward(const BranchParams& branch, EncodeTape& tape,
                                const Eigen::MatrixXd& dmu, const Eigen::MatrixXd& dlogvar,
                                const Eigen::SparseMatrix<double>& lap, int vertex_count,
                                BranchGrads& grads) {
    const int latent = branch.latent_dim;
    Eigen::MatrixXd dstats(dmu.rows(), 2 * latent);
    dstats.leftCols(latent) = dmu;
    dstats.rightCols(latent) = dlogvar.cwiseProduct(tape.clamp_mask);
    const auto da3 = branch.enc.fc2.backward(tape.f2, dstats, grads.enc.f2);
    const auto dh3 = leaky_relu_backward(tape.a3, da3);
    const auto dflat = branch.enc.fc1.backward(tape.f1, dh3, grads.enc.f1);
    const auto da2 = unflatten_rows(dflat, vertex_count, branch.enc.conv2.out_channels());
    const auto dh2 = leaky_relu_backward(tape.a2, da2);
    const auto da1 = branch.enc.conv2.backward(tape.c2, dh2, lap, grads.enc.c2);
    const auto dh1 = leaky_relu_backward(tape.a1, da1);
    return branch.enc.conv1.backward(tape.c1, dh1, lap, grads.enc.c1);
}

Eigen::MatrixXd decode_forward(const BranchParams& branch, const Eigen::MatrixXd& z,
                               const Eigen::SparseMatrix<double>& lap, int vertex_count,
                               DecodeTape* tape) {
    const auto a1 = leaky_relu_forward(branch.dec.fc1.forward(z, tape ? &tape->f1 : nullptr),
                                       tape ? &tape->a1 : nullptr);
    const auto a2 = leaky_relu_forward(branch.dec.fc2.forward(a1, tape ? &tape->f2 : nullptr),
                                       tape ? &tape->a2 : nullptr);
    const auto grid = unflatten_rows(a2, vertex_count, branch.dec.conv1.in_channels());
    const auto a3 = leaky_relu_forward(branch.dec.conv1.forward(grid, lap, tape ? &tape->c1 : nullptr),
                                       tape ? &tape->a3 : nullptr);
    return branch.dec.conv2.forward(a3, lap, tape ? &tape->c2 : nullptr);
}

Eigen::MatrixXd decode_backward(const BranchParams& branch, DecodeTape& tape,
                                const Eigen::MatrixXd& dout, const Eigen::SparseMatrix<double>& lap,
                                int vertex_count, BranchGrads& grads) {
    const auto da3 = branch.dec.conv2.backward(tape.c2, dout, lap, grads.dec.c2);
    const auto dh3 = leaky_relu_backward(tape.a3, da3);
    const auto dgrid = branch.dec.conv1.backward(tape.c1, dh3, lap, grads.dec.c1);
    const auto dflat = flatten_rows(dgrid, vertex_count);
    const auto da2 = leaky_relu_backward(tape.a2, dflat);
    const auto da1 = branch.dec.fc2.backward(tape.f2, da2, grads.dec.f2);
    const auto dh1 = leaky_relu_backward(tape.a1, da1);
    return branch.dec.fc1.backward(tape.f1, dh1, grads.dec.f1);
}

Eigen::MatrixXd fusion_forward(const FusionParams& fusion, const Eigen::MatrixXd& cat,
                               const Eigen::SparseMatrix<double>& lap, FusionTape* tape) {
    const auto a1 = leaky_relu_forward(fusion.conv1.forward(cat, lap, tape ? &tape->c1 : nullptr),
                                       tape ? &tape->a1 : nullptr);
    const auto a2 = leaky_relu_forward(fusion.conv2.forward(a1, lap, tape ? &tape->c2 : nullptr),
                                       tape ? &tape->a2 : nullptr);
    return fusion.conv3.forward(a2, lap, tape ? &tape->c3 : nullptr);
}

Eigen::MatrixXd fusion_backward(const FusionParams& fusion, FusionTape& tape,
                                const Eigen::MatrixXd& dout, const Eigen::SparseMatrix<double>& lap,
                                FusionGrads& grads) {
    const auto da2 = fusion.conv3.backward(tape.c3, dout, lap, grads.c3);
    const auto dh2 = leaky_relu_backward(tape.a2, da2);
    const auto da1 = fusion.conv2.backward(tape.c2, dh2, lap, grads.c2);
    const auto dh1 = leaky_relu_backward(tape.a1, da1);
    return fusion.conv1.backward(tape.c1, dh1, lap, grads.c1);
}

Eigen::MatrixXd reparameterize(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar, Rng* rng,
                               Eigen::MatrixXd* eps_out) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) {
        throw std::invalid_argument("reparameterize: mu/logvar shape mismatch");
    }
    if (!rng) {
        if (eps_out) {
            *eps_out = Eigen::MatrixXd::Zero(mu.rows(), mu.cols());
        }
        return mu;
    }
    Eigen::MatrixXd eps(mu.rows(), mu.cols());
    for (int i = 0; i < eps.rows(); ++i) {
        for (int j = 0; j < eps.cols(); ++j) {
            eps(i, j) = rng->normal();
        }
    }
    Eigen::MatrixXd z = mu + ((logvar * 0.5).array().exp() * eps.array()).matrix();
    if (eps_out) {
        *eps_out = std::move(eps);
    }
    return z;
}

double kl_divergence(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar) {
    const auto per_entry =
        0.5 * (mu.array().square() + logvar.array().exp() - logvar.array() - 1.0);
    return per_entry.rowwise().sum().mean();
}

bool LossComponents::finite() const {
    return std::isfinite(rec) && std::isfinite(dis) && std::isfinite(id) && std::isfinite(exp) &&
           std::isfinite(id_kld) && std::isfinite(exp_kld);
}

std::string LossComponents::first_non_finite() const {
    if (!std::isfinite(id)) return "L_id";
    if (!std::isfinite(exp)) return "L_exp";
    if (!std::isfinite(id_kld)) return "L_id_kld";
    if (!std::isfinite(exp_kld)) return "L_exp_kld";
    if (!std::isfinite(rec)) return "L_rec";
    if (!std::isfinite(dis)) return "L_dis";
    return "";
}

LossComponents loss_batch(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                          const FeatureBatch& batch, const Eigen::MatrixXd& rest_normed,
                          TrainStage stage, Rng* reparam_rng, double alpha_id, double alpha_exp,
                          ModelGrads* grads) {
    const int n = model.config.vertex_count;
    const int batch_size = batch.samples;
    if (batch.input.rows() != static_cast<long>(batch_size) * n) {
        throw std::invalid_argument("loss_batch: batch rows do not match samples * vertex_count");
    }
    const double denom = static_cast<double>(batch.input.size()); // B * n * 9

    const bool branch_grads = grads && (stage == TrainStage::branches || stage == TrainStage::full);
    const bool fusion_grads = grads && (stage == TrainStage::fusion || stage == TrainStage::full);
    const bool want_fusion = stage != TrainStage::branches;
    const bool want_dis = stage == TrainStage::full;

    LossComponents out;
    out.alpha_id_kld = alpha_id;
    out.alpha_exp_kld = alpha_exp;

    // Branch passes.
    EncodeTape enc_tape_id, enc_tape_exp;
    DecodeTape dec_tape_id, dec_tape_exp;
    Eigen::MatrixXd mu_id, lv_id, mu_exp, lv_exp, eps_id, eps_exp;
    encode_forward(model.identity, batch.input, lap, n, mu_id, lv_id,
                   branch_grads ? &enc_tape_id : nullptr);
    encode_forward(model.expression, batch.input, lap, n, mu_exp, lv_exp,
                   branch_grads ? &enc_tape_exp : nullptr);
    const Eigen::MatrixXd z_id = reparameterize(mu_id, lv_id, reparam_rng, &eps_id);
    const Eigen::MatrixXd z_exp = reparameterize(mu_exp, lv_exp, reparam_rng, &eps_exp);
    const Eigen::MatrixXd ghat_id =
        decode_forward(model.identity, z_id, lap, n, branch_grads ? &dec_tape_id : nullptr);
    const Eigen::MatrixXd ghat_exp =
        decode_forward(model.expression, z_exp, lap, n, branch_grads ? &dec_tape_exp : nullptr);

    out.id = mae(ghat_id - batch.target_id);
    out.exp = mae(ghat_exp - batch.target_exp);
    out.id_kld = kl_divergence(mu_id, lv_id);
    out.exp_kld = kl_divergence(mu_exp, lv_exp);

    // Fusion pass on the concatenated branch outputs (identity first).
    FusionTape fusion_tape;
    Eigen::MatrixXd ghat;
    if (want_fusion) {
        Eigen::MatrixXd cat(ghat_id.rows(), 2 * NetConfig::feature_dim);
        cat.leftCols(NetConfig::feature_dim) = ghat_id;
        cat.rightCols(NetConfig::feature_dim) = ghat_exp;
        ghat = fusion_forward(model.fusion, cat, lap, fusion_grads ? &fusion_tape : nullptr);
        out.rec = mae(ghat - batch.input);
    }

    // Disentangling pass: each branch output pushed through the *other*
    // branch must land on the rest feature.
    Eigen::MatrixXd rest_rep;
    EncodeTape dis_enc_a, dis_enc_b;
    DecodeTape dis_dec_a, dis_dec_b;
    Eigen::MatrixXd mu_a, lv_a, mu_b, lv_b, eps_a, eps_b, out_a, out_b;
    if (want_dis) {
        rest_rep.resize(static_cast<long>(batch_size) * n, NetConfig::feature_dim);
        for (int b = 0; b < batch_size; ++b) {
            rest_rep.middleRows(static_cast<long>(b) * n, n) = rest_normed;
        }
        const bool dis_grads = grads && stage == TrainStage::full;
        encode_forward(model.expression, ghat_id, lap, n, mu_a, lv_a,
                       dis_grads ? &dis_enc_a : nullptr);
        const Eigen::MatrixXd z_a = reparameterize(mu_a, lv_a, reparam_rng, &eps_a);
        out_a = decode_forward(model.expression, z_a, lap, n, dis_grads ? &dis_dec_a : nullptr);

        encode_forward(model.identity, ghat_exp, lap, n, mu_b, lv_b,
                       dis_grads ? &dis_enc_b : nullptr);
        const Eigen::MatrixXd z_b = reparameterize(mu_b, lv_b, reparam_rng, &eps_b);
        out_b = decode_forward(model.identity, z_b, lap, n, dis_grads ? &dis_dec_b : nullptr);

        out.dis = mae(out_a - rest_rep) + mae(out_b - rest_rep);
    }

    if (!grads) {
        return out;
    }

    // ----- backward -----
    Eigen::MatrixXd dghat_id = Eigen::MatrixXd::Zero(ghat_id.rows(), ghat_id.cols());
    Eigen::MatrixXd dghat_exp = dghat_id;
    if (stage != TrainStage::fusion) {
        dghat_id = mae_gradient(ghat_id - batch.target_id, denom);
        dghat_exp = mae_gradient(ghat_exp - batch.target_exp, denom);
    }

    if (fusion_grads) {
        const Eigen::MatrixXd dghat = mae_gradient(ghat - batch.input, denom);
        const Eigen::MatrixXd dcat = fusion_backward(model.fusion, fusion_tape, dghat, lap, grads->fusion);
        if (stage == TrainStage::full) {
            dghat_id += dcat.leftCols(NetConfig::feature_dim);
            dghat_exp += dcat.rightCols(NetConfig::feature_dim);
        }
    }

    if (want_dis && stage == TrainStage::full) {
        // Side A: d/d(ghat_id) of || D_exp(E_exp(ghat_id)) - rest ||.
        const Eigen::MatrixXd dout_a = mae_gradient(out_a - rest_rep, denom);
        const Eigen::MatrixXd dz_a =
            decode_backward(model.expression, dis_dec_a, dout_a, lap, n, grads->expression);
        const Eigen::MatrixXd dmu_a = dz_a;
        const Eigen::MatrixXd dlv_a =
            (dz_a.array() * eps_a.array() * (lv_a * 0.5).array().exp() * 0.5).matrix();
        dghat_id +=
            encode_backward(model.expression, dis_enc_a, dmu_a, dlv_a, lap, n, grads->expression);

        const Eigen::MatrixXd dout_b = mae_gradient(out_b - rest_rep, denom);
        const Eigen::MatrixXd dz_b =
            decode_backward(model.identity, dis_dec_b, dout_b, lap, n, grads->identity);
        const Eigen::MatrixXd dmu_b = dz_b;
        const Eigen::MatrixXd dlv_b =
            (dz_b.array() * eps_b.array() * (lv_b * 0.5).array().exp() * 0.5).matrix();
        dghat_exp +=
            encode_backward(model.identity, dis_enc_b, dmu_b, dlv_b, lap, n, grads->identity);
    }

    if (branch_grads) {
        const double batch_scale = 1.0 / static_cast<double>(batch_size);
        // Identity branch.
        {
            const Eigen::MatrixXd dz =
                decode_backward(model.identity, dec_tape_id, dghat_id, lap, n, grads->identity);
            Eigen::MatrixXd dmu = dz;
            Eigen::MatrixXd dlv =
                (dz.array() * eps_id.array() * (lv_id * 0.5).array().exp() * 0.5).matrix();
            dmu += alpha_id * batch_scale * mu_id;
            dlv += (alpha_id * batch_scale * 0.5) * (lv_id.array().exp() - 1.0).matrix();
            encode_backward(model.identity, enc_tape_id, dmu, dlv, lap, n, grads->identity);
        }
        // Expression branch.
        {
            const Eigen::MatrixXd dz =
                decode_backward(model.expression, dec_tape_exp, dghat_exp, lap, n, grads->expression);
            Eigen::MatrixXd dmu = dz;
            Eigen::MatrixXd dlv =
                (dz.array() * eps_exp.array() * (lv_exp * 0.5).array().exp() * 0.5).matrix();
            dmu += alpha_exp * batch_scale * mu_exp;
            dlv += (alpha_exp * batch_scale * 0.5) * (lv_exp.array().exp() - 1.0).matrix();
            encode_backward(model.expression, enc_tape_exp, dmu, dlv, lap, n, grads->expression);
        }
    }
    return out;
}

LossComponents loss_total(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                          const Triplet& triplet, const Eigen::MatrixXd& rest_raw, Rng* reparam_rng,
                          double alpha_id, double alpha_exp) {
    if (triplet.input.reference_id != triplet.identity.reference_id ||
        triplet.input.reference_id != triplet.expression.reference_id) {
        throw DataError("loss_total: triplet features do not share a reference");
    }
    FeatureBatch batch;
    batch.samples = 1;
    batch.input = normalize_features(model, triplet.input.values);
    batch.target_id = normalize_features(model, triplet.identity.values);
    batch.target_exp = normalize_features(model, triplet.expression.values);
    const Eigen::MatrixXd rest_normed = normalize_features(model, rest_raw);
    const LossComponents out = loss_batch(model, lap, batch, rest_normed, TrainStage::full,
                                          reparam_rng, alpha_id, alpha_exp, nullptr);
    if (!out.finite()) {
        throw DataError("loss_total: non-finite loss component " + out.first_non_finite());
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void push_cheb(std::vector<TensorView>& views, ChebConv& conv, const std::string& name) {
    for (int k = 0; k < conv.order(); ++k) {
        views.push_back({name + ".theta" + std::to_string(k), conv.theta[k].data(),
                         conv.theta[k].rows(), conv.theta[k].cols()});
    }
    if (conv.with_bias()) {
        views.push_back({name + ".bias", conv.bias.data(), 1, conv.bias.cols()});
    }
}

void push_cheb(std::vector<TensorView>& views, ChebGrads& g, const ChebConv& conv,
               const std::string& name) {
    for (int k = 0; k < conv.order(); ++k) {
        views.push_back({name + ".theta" + std::to_string(k), g.theta[k].data(), g.theta[k].rows(),
                         g.theta[k].cols()});
    }
    if (conv.with_bias()) {
        views.push_back({name + ".bias", g.bias.data(), 1, g.bias.cols()});
    }
}

void push_dense(std::vector<TensorView>& views, Dense& d, const std::string& name) {
    views.push_back({name + ".weight", d.weight.data(), d.weight.rows(), d.weight.cols()});
    views.push_back({name + ".bias", d.bias.data(), 1, d.bias.cols()});
}

void push_dense(std::vector<TensorView>& views, DenseGrads& g, const std::string& name) {
    views.push_back({name + ".weight", g.weight.data(), g.weight.rows(), g.weight.cols()});
    views.push_back({name + ".bias", g.bias.data(), 1, g.bias.cols()});
}

} // namespace

std::vector<TensorView> tensor_views(BranchParams& branch, const std::string& prefix) {
    std::vector<TensorView> views;
    push_cheb(views, branch.enc.conv1, prefix + ".enc.conv1");
    push_cheb(views, branch.enc.conv2, prefix + ".enc.conv2");
    push_dense(views, branch.enc.fc1, prefix + ".enc.fc1");
    push_dense(views, branch.enc.fc2, prefix + ".enc.fc2");
    push_dense(views, branch.dec.fc1, prefix + ".dec.fc1");
    push_dense(views, branch.dec.fc2, prefix + ".dec.fc2");
    push_cheb(views, branch.dec.conv1, prefix + ".dec.conv1");
    push_cheb(views, branch.dec.conv2, prefix + ".dec.conv2");
    return views;
}

std::vector<TensorView> tensor_views(FusionParams& fusion, const std::string& prefix) {
    std::vector<TensorView> views;
    push_cheb(views, fusion.conv1, prefix + ".conv1");
    push_cheb(views, fusion.conv2, prefix + ".conv2");
    push_cheb(views, fusion.conv3, prefix + ".conv3");
    return views;
}

std::vector<TensorView> tensor_views(ModelParams& model) {
    std::vector<TensorView> views = tensor_views(model.identity, "id");
    auto more = tensor_views(model.expression, "exp");
    views.insert(views.end(), more.begin(), more.end());
    more = tensor_views(model.fusion, "fusion");
    views.insert(views.end(), more.begin(), more.end());
    return views;
}

std::vector<TensorView> tensor_views(BranchGrads& grads, const BranchParams& branch,
                                     const std::string& prefix) {
    std::vector<TensorView> views;
    push_cheb(views, grads.enc.c1, branch.enc.conv1, prefix + ".enc.conv1");
    push_cheb(views, grads.enc.c2, branch.enc.conv2, prefix + ".enc.conv2");
    push_dense(views, grads.enc.f1, prefix + ".enc.fc1");
    push_dense(views, grads.enc.f2, prefix + ".enc.fc2");
    push_dense(views, grads.dec.f1, prefix + ".dec.fc1");
    push_dense(views, grads.dec.f2, prefix + ".dec.fc2");
    push_cheb(views, grads.dec.c1, branch.dec.conv1, prefix + ".dec.conv1");
    push_cheb(views, grads.dec.c2, branch.dec.conv2, prefix + ".dec.conv2");
    return views;
}

std::vector<TensorView> tensor_views(FusionGrads& grads, const FusionParams& fusion,
                                     const std::string& prefix) {
    std::vector<TensorView> views;
    push_cheb(views, grads.c1, fusion.conv1, prefix + ".conv1");
    push_cheb(views, grads.c2, fusion.conv2, prefix + ".conv2");
    push_cheb(views, grads.c3, fusion.conv3, prefix + ".conv3");
    return views;
}

std::vector<TensorView> tensor_views(ModelGrads& grads, ModelParams& model) {
    std::vector<TensorView> views = tensor_views(grads.identity, model.identity, "id");
    auto more = tensor_views(grads.expression, model.expression, "exp");
    views.insert(views.end(), more.begin(), more.end());
    more = tensor_views(grads.fusion, model.fusion, "fusion");
    views.insert(views.end(), more.begin(), more.end());
    return views;
}

// ---------------------------------------------------------------------------
// Application operations.

namespace {

void check_feature(const ModelParams& model, const DRFeature& raw, const char* who) {
    if (raw.vertex_count() != model.config.vertex_count) {
        throw DataError(std::string(who) + ": feature vertex count " +
                        std::to_string(raw.vertex_count()) + " does not match trained n " +
                        std::to_string(model.config.vertex_count));
    }
    if (!model.reference_id.empty() && !raw.reference_id.empty() &&
        raw.reference_id != model.reference_id) {
        throw DataError(std::string(who) + ": feature reference does not match the model's");
    }
}

Eigen::VectorXd encode_code(const ModelParams& model, const BranchParams& branch,
                            const Eigen::SparseMatrix<double>& lap, const DRFeature& raw,
                            const char* who) {
    check_feature(model, raw, who);
    Eigen::MatrixXd mu, logvar;
    encode_forward(branch, normalize_features(model, raw.values), lap, model.config.vertex_count,
                   mu, logvar, nullptr);
    return mu.row(0).transpose();
}

DRFeature decode_code(const ModelParams& model, const BranchParams& branch,
                      const Eigen::SparseMatrix<double>& lap, const Eigen::VectorXd& z,
                      const char* who) {
    if (z.size() != branch.latent_dim) {
        throw DataError(std::string(who) + ": latent size mismatch");
    }
    const Eigen::MatrixXd out =
        decode_forward(branch, z.transpose(), lap, model.config.vertex_count, nullptr);
    DRFeature f;
    f.values = denormalize_features(model, out);
    f.reference_id = model.reference_id;
    return f;
}

} // namespace

Eigen::VectorXd encode_identity_code(const ModelParams& model,
                                     const Eigen::SparseMatrix<double>& lap, const DRFeature& raw) {
    return encode_code(model, model.identity, lap, raw, "encode_identity_code");
}

Eigen::VectorXd encode_expression_code(const ModelParams& model,
                                       const Eigen::SparseMatrix<double>& lap,
                                       const DRFeature& raw) {
    return encode_code(model, model.expression, lap, raw, "encode_expression_code");
}

DRFeature decode_identity_feature(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                                  const Eigen::VectorXd& z) {
    return decode_code(model, model.identity, lap, z, "decode_identity_feature");
}

DRFeature decode_expression_feature(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                                    const Eigen::VectorXd& z) {
    return decode_code(model, model.expression, lap, z, "decode_expression_feature");
}

DRFeature fuse_features(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                        const DRFeature& id_hat, const DRFeature& exp_hat) {
    check_feature(model, id_hat, "fuse_features");
    check_feature(model, exp_hat, "fuse_features");
    Eigen::MatrixXd cat(id_hat.values.rows(), 2 * NetConfig::feature_dim);
    cat.leftCols(NetConfig::feature_dim) = normalize_features(model, id_hat.values);
    cat.rightCols(NetConfig::feature_dim) = normalize_features(model, exp_hat.values);
    const Eigen::MatrixXd out = fusion_forward(model.fusion, cat, lap, nullptr);
    DRFeature f;
    f.values = denormalize_features(model, out);
    f.reference_id = model.reference_id;
    return f;
}

DRFeature reconstruct_feature(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                              const DRFeature& raw) {
    const Eigen::VectorXd z_id = encode_identity_code(model, lap, raw);
    const Eigen::VectorXd z_exp = encode_expression_code(model, lap, raw);
    return fuse_features(model, lap, decode_identity_feature(model, lap, z_id),
                         decode_expression_feature(model, lap, z_exp));
}

Decomposition decompose_mesh(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                             const ReferenceFrame& ref, const Mesh& input) {
    const DRFeature g = ref.encode(input);
    const Eigen::VectorXd z_id = encode_identity_code(model, lap, g);
    const Eigen::VectorXd z_exp = encode_expression_code(model, lap, g);
    return {ref.decode(decode_identity_feature(model, lap, z_id)),
            ref.decode(decode_expression_feature(model, lap, z_exp))};
}

Mesh transfer_expression(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                         const ReferenceFrame& ref, const Mesh& source, const Mesh& target) {
    const DRFeature g_source = ref.encode(source);
    const DRFeature g_target = ref.encode(target);
    const Eigen::VectorXd z_exp = encode_expression_code(model, lap, g_source);
    const Eigen::VectorXd z_id = encode_identity_code(model, lap, g_target);
    const DRFeature fused = fuse_features(model, lap, decode_identity_feature(model, lap, z_id),
                                          decode_expression_feature(model, lap, z_exp));
    return ref.decode(fused);
}

std::vector<Mesh> interpolate_latent(const ModelParams& model,
                                     const Eigen::SparseMatrix<double>& lap,
                                     const ReferenceFrame& ref, const Mesh& m0, const Mesh& m1,
                                     double stride) {
    if (!(stride > 0.0) || stride > 1.0) {
        throw DataError("interpolate_latent: stride must be in (0, 1]");
    }
    const int steps = static_cast<int>(std::lround(1.0 / stride));
    if (std::abs(steps * stride - 1.0) > 1e-9) {
        throw DataError("interpolate_latent: stride must divide 1 evenly");
    }
    const DRFeature g0 = ref.encode(m0);
    const DRFeature g1 = ref.encode(m1);
    const Eigen::VectorXd id0 = encode_identity_code(model, lap, g0);
    const Eigen::VectorXd id1 = encode_identity_code(model, lap, g1);
    const Eigen::VectorXd exp0 = encode_expression_code(model, lap, g0);
    const Eigen::VectorXd exp1 = encode_expression_code(model, lap, g1);
    std::vector<Mesh> grid;
    grid.reserve(static_cast<std::size_t>(steps + 1) * (steps + 1));
    for (int i = 0; i <= steps; ++i) {
        const double s = static_cast<double>(i) / steps;
        const Eigen::VectorXd z_id = (1.0 - s) * id0 + s * id1;
        for (int j = 0; j <= steps; ++j) {
            const double t = static_cast<double>(j) / steps;
            const Eigen::VectorXd z_exp = (1.0 - t) * exp0 + t * exp1;
            const DRFeature fused =
                fuse_features(model, lap, decode_identity_feature(model, lap, z_id),
                              decode_expression_feature(model, lap, z_exp));
            grid.push_back(ref.decode(fused));
        }
    }
    return grid;
}

// ---------------------------------------------------------------------------

void save_model(const ModelParams& model, const std::string& json_path,
                const nlohmann::json& extra_config) {
    ModelParams& mutable_model = const_cast<ModelParams&>(model);
    std::vector<NamedTensor> tensors;
    for (const auto& view : tensor_views(mutable_model)) {
        NamedTensor t;
        t.name = view.name;
        // Layer parameters are column-major Eigen matrices.
        t.value = Eigen::Map<const Eigen::MatrixXd>(view.data, view.rows, view.cols);
        tensors.push_back(std::move(t));
    }
    tensors.push_back({"norm.mean", model.feat_mean});
    tensors.push_back({"norm.std", model.feat_std});

    nlohmann::json config = extra_config;
    config["cheb_order"] = model.config.cheb_order;
    config["conv_channels"] = model.config.conv_channels;
    config["dense_hidden"] = model.config.dense_hidden;
    config["latent_id"] = model.config.latent_id;
    config["latent_exp"] = model.config.latent_exp;
    config["vertex_count"] = model.config.vertex_count;
    config["conv_bias"] = model.config.conv_bias;
    config["reference_id"] = model.reference_id;
    save_tensor_file(json_path, "disentangle", tensors, config);
}

ModelParams load_model(const std::string& json_path) {
    const TensorFile file = load_tensor_file(json_path);
    if (file.kind != "disentangle") {
        throw DataError("load_model: " + json_path + " is not a disentangle model (kind='" +
                        file.kind + "')");
    }
    NetConfig config;
    config.cheb_order = file.config.at("cheb_order").get<int>();
    config.conv_channels = file.config.at("conv_channels").get<int>();
    config.dense_hidden = file.config.at("dense_hidden").get<int>();
    config.latent_id = file.config.at("latent_id").get<int>();
    config.latent_exp = file.config.at("latent_exp").get<int>();
    config.vertex_count = file.config.at("vertex_count").get<int>();
    config.conv_bias = file.config.value("conv_bias", true);

    Rng rng(0);
    ModelParams model = make_model(config, rng);
    model.reference_id = file.config.value("reference_id", "");
    for (auto& view : tensor_views(model)) {
        const NamedTensor& t = file.find(view.name);
        if (t.value.rows() != view.rows || t.value.cols() != view.cols) {
            throw DataError("load_model: tensor '" + view.name + "' has wrong shape");
        }
        Eigen::Map<Eigen::MatrixXd> dst(view.data, view.rows, view.cols);
        dst = t.value;
    }
    model.feat_mean = file.find("norm.mean").value.row(0);
    model.feat_std = file.find("norm.std").value.row(0);
    return model;
}

} // namespace drface
