#include "drface/network.hpp"

#include "drface/laplacian.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <cmath>
#include <filesystem>

using namespace drface;

namespace {

NetConfig tiny_config(int n, int latent_id = 6, int latent_exp = 4) {
    NetConfig c;
    c.conv_channels = 8;
    c.dense_hidden = 16;
    c.latent_id = latent_id;
    c.latent_exp = latent_exp;
    c.vertex_count = n;
    return c;
}

ModelParams tiny_model(int n, Rng& rng) {
    return make_model(tiny_config(n), rng);
}

Eigen::SparseMatrix<double> graph(int n, Rng& rng) {
    return scaled_laplacian(normalized_laplacian(testing::random_connected_adjacency(n, rng)));
}

void zero_params(ModelParams& model) {
    for (auto& view : tensor_views(model)) {
        Eigen::Map<Eigen::VectorXd>(view.data, view.size()).setZero();
    }
}

} // namespace

TEST_CASE("zero model maps zero input to zero stats") {
    Rng rng(1);
    ModelParams model = tiny_model(7, rng);
    zero_params(model);
    const auto lt = graph(7, rng);
    Eigen::MatrixXd mu, logvar;
    encode_forward(model.identity, Eigen::MatrixXd::Zero(7, 9), lt, 7, mu, logvar, nullptr);
    CHECK(mu.cwiseAbs().maxCoeff() == 0.0);
    CHECK(logvar.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoding is deterministic") {
    Rng rng(2);
    ModelParams model = tiny_model(6, rng);
    const auto lt = graph(6, rng);
    const Eigen::MatrixXd x = testing::random_matrix(6, 9, rng);
    Eigen::MatrixXd mu1, lv1, mu2, lv2;
    encode_forward(model.identity, x, lt, 6, mu1, lv1, nullptr);
    encode_forward(model.identity, x, lt, 6, mu2, lv2, nullptr);
    CHECK((mu1 - mu2).cwiseAbs().maxCoeff() == 0.0);
    CHECK((lv1 - lv2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder perturbation response respects the layer operator-norm bound") {
    Rng rng(3);
    ModelParams model = tiny_model(6, rng);
    const auto lt = graph(6, rng);
    const Eigen::MatrixXd x = testing::random_matrix(6, 9, rng);

    // Product of layer operator norms; T_k(Ltilde) has norm at most 1, the
    // leaky rectifier at most slope 1, flatten preserves norms.
    auto cheb_norm = [](const ChebConv& c) {
        double sum = 0.0;
        for (const auto& t : c.theta) {
            sum += Eigen::JacobiSVD<Eigen::MatrixXd>(t).singularValues()(0);
        }
        return sum;
    };
    auto dense_norm = [](const Dense& d) {
        return Eigen::JacobiSVD<Eigen::MatrixXd>(d.weight).singularValues()(0);
    };
    const auto& enc = model.identity.enc;
    const double bound =
        cheb_norm(enc.conv1) * cheb_norm(enc.conv2) * dense_norm(enc.fc1) * dense_norm(enc.fc2);

    Eigen::MatrixXd mu0, lv0, mu1, lv1;
    encode_forward(model.identity, x, lt, 6, mu0, lv0, nullptr);
    Eigen::MatrixXd xp = x;
    xp(3, 4) += 1e-5;
    encode_forward(model.identity, xp, lt, 6, mu1, lv1, nullptr);
    CHECK((mu1 - mu0).norm() <= bound * 1e-5 * (1.0 + 1e-9));
}

TEST_CASE("reparameterization behaves") {
    Rng rng(4);
    const Eigen::MatrixXd mu = testing::random_matrix(1, 16, rng);

    SUBCASE("clamped-down logvar gives z almost equal to mu") {
        const Eigen::MatrixXd logvar = Eigen::MatrixXd::Constant(1, 16, -10.0);
        Rng noise(7);
        Eigen::MatrixXd eps;
        const Eigen::MatrixXd z = reparameterize(mu, logvar, &noise, &eps);
        CHECK((z - mu).norm() <= 1e-2 * eps.norm());
    }
    SUBCASE("fixed seed reproduces z") {
        const Eigen::MatrixXd logvar = Eigen::MatrixXd::Zero(1, 16);
        Rng n1(99), n2(99);
        const Eigen::MatrixXd z1 = reparameterize(mu, logvar, &n1);
        const Eigen::MatrixXd z2 = reparameterize(mu, logvar, &n2);
        CHECK((z1 - z2).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("evaluation mode returns mu") {
        const Eigen::MatrixXd logvar = Eigen::MatrixXd::Ones(1, 16);
        CHECK((reparameterize(mu, logvar, nullptr) - mu).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("standard-normal statistics over 1e5 samples") {
        Rng noise(5);
        const Eigen::MatrixXd mu0 = Eigen::MatrixXd::Zero(1, 1);
        const Eigen::MatrixXd lv0 = Eigen::MatrixXd::Zero(1, 1);
        double sum = 0.0, sum_sq = 0.0;
        const int samples = 100000;
        for (int i = 0; i < samples; ++i) {
            const double z = reparameterize(mu0, lv0, &noise)(0, 0);
            sum += z;
            sum_sq += z * z;
        }
        const double mean = sum / samples;
        const double var = sum_sq / samples - mean * mean;
        CHECK(std::abs(mean) < 0.02);
        CHECK(std::abs(var - 1.0) < 0.02);
    }
}

TEST_CASE("KL divergence closed form") {
    SUBCASE("zero mean and unit variance gives zero") {
        CHECK(kl_divergence(Eigen::MatrixXd::Zero(1, 8), Eigen::MatrixXd::Zero(1, 8)) == 0.0);
    }
    SUBCASE("non-negative on random inputs") {
        Rng rng(6);
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::MatrixXd mu = testing::random_matrix(1, 8, rng, 2.0);
            const Eigen::MatrixXd lv = testing::random_matrix(1, 8, rng, 1.5);
            CHECK(kl_divergence(mu, lv) >= 0.0);
        }
    }
    SUBCASE("matches a Monte Carlo estimate within 2 percent") {
        Rng rng(7);
        Rng noise(8);
        const int samples = 100000;
        for (int trial = 0; trial < 5; ++trial) {
            const Eigen::MatrixXd mu = testing::random_matrix(1, 8, rng, 1.0);
            const Eigen::MatrixXd lv = testing::random_matrix(1, 8, rng, 0.7);
            const double closed = kl_divergence(mu, lv);
            // MC estimate of E_q[log q(z) - log p(z)].
            double acc = 0.0;
            for (int s = 0; s < samples; ++s) {
                double log_q = 0.0, log_p = 0.0;
                for (int d = 0; d < 8; ++d) {
                    const double sigma = std::exp(0.5 * lv(0, d));
                    const double z = mu(0, d) + sigma * noise.normal();
                    const double dq = (z - mu(0, d)) / sigma;
                    log_q += -0.5 * dq * dq - 0.5 * lv(0, d);
                    log_p += -0.5 * z * z;
                }
                acc += log_q - log_p;
            }
            const double mc = acc / samples;
            CHECK(std::abs(closed - mc) <= 0.02 * std::max(1.0, std::abs(closed)));
        }
    }
}

TEST_CASE("decode of z = 0 through a zero model is the de-normalized zero") {
    Rng rng(9);
    ModelParams model = tiny_model(6, rng);
    zero_params(model);
    model.feat_mean = Eigen::RowVectorXd::Constant(9, 0.5);
    model.feat_std = Eigen::RowVectorXd::Constant(9, 2.0);
    const auto lt = graph(6, rng);
    const DRFeature out = decode_identity_feature(model, lt, Eigen::VectorXd::Zero(6));
    CHECK((out.values.array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("two z differing in one coordinate decode to different outputs") {
    Rng rng(10);
    ModelParams model = tiny_model(6, rng);
    const auto lt = graph(6, rng);
    const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(6);
    Eigen::VectorXd z1 = z0;
    z1(2) += 0.5;
    const DRFeature a = decode_identity_feature(model, lt, z0);
    const DRFeature b = decode_identity_feature(model, lt, z1);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("fusion concatenation is identity-first and asymmetric") {
    Rng rng(11);
    ModelParams model = tiny_model(5, rng);
    const auto lt = graph(5, rng);
    DRFeature fa, fb;
    fa.values = testing::random_matrix(5, 9, rng);
    fb.values = testing::random_matrix(5, 9, rng);
    const DRFeature ab = fuse_features(model, lt, fa, fb);
    const DRFeature ba = fuse_features(model, lt, fb, fa);
    CHECK((ab.values - ba.values).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("zero-weight fusion is constant") {
    Rng rng(12);
    ModelParams model = tiny_model(5, rng);
    zero_params(model);
    const auto lt = graph(5, rng);
    DRFeature fa, fb;
    fa.values = testing::random_matrix(5, 9, rng);
    fb.values = testing::random_matrix(5, 9, rng);
    const DRFeature out1 = fuse_features(model, lt, fa, fb);
    fa.values = testing::random_matrix(5, 9, rng);
    const DRFeature out2 = fuse_features(model, lt, fa, fb);
    CHECK((out1.values - out2.values).cwiseAbs().maxCoeff() == 0.0);
}

namespace {

Triplet random_triplet(int n, const std::string& ref_id, Rng& rng) {
    Triplet t;
    t.input.values = testing::random_matrix(n, 9, rng);
    t.input.reference_id = ref_id;
    t.identity.values = testing::random_matrix(n, 9, rng);
    t.identity.reference_id = ref_id;
    t.expression.values = testing::random_matrix(n, 9, rng);
    t.expression.reference_id = ref_id;
    return t;
}

} // namespace

TEST_CASE("loss components sum to the total and are non-negative") {
    Rng rng(13);
    const int n = 6;
    ModelParams model = tiny_model(n, rng);
    model.reference_id = "r";
    const auto lt = graph(n, rng);
    const Triplet t = random_triplet(n, "r", rng);
    const Eigen::MatrixXd rest = testing::random_matrix(n, 9, rng);
    Rng noise(1);
    const LossComponents c = loss_total(model, lt, t, rest, &noise, 1e-5, 1e-5);
    const double manual =
        c.rec + c.dis + c.id + c.exp + 1e-5 * c.id_kld + 1e-5 * c.exp_kld;
    CHECK(std::abs(c.total() - manual) < 1e-12);
    CHECK(c.rec >= 0.0);
    CHECK(c.dis >= 0.0);
    CHECK(c.id >= 0.0);
    CHECK(c.exp >= 0.0);
    CHECK(c.id_kld >= 0.0);
    CHECK(c.exp_kld >= 0.0);
}

TEST_CASE("loss_total rejects mismatched triplet references") {
    Rng rng(14);
    const int n = 5;
    ModelParams model = tiny_model(n, rng);
    const auto lt = graph(n, rng);
    Triplet t = random_triplet(n, "r", rng);
    t.expression.reference_id = "other";
    CHECK_THROWS_AS(loss_total(model, lt, t, testing::random_matrix(n, 9, rng), nullptr, 0, 0),
                    DataError);
}

TEST_CASE("end-to-end analytic gradients match finite differences") {
    // Composed check through encode -> reparameterize (frozen noise) ->
    // decode -> fusion -> total loss on a 10-vertex graph. The noise draw is
    // frozen by reseeding the same stream for every evaluation.
    Rng rng(15);
    const int n = 10;
    ModelParams model = tiny_model(n, rng);
    const auto lt = graph(n, rng);

    FeatureBatch batch;
    batch.samples = 2;
    batch.input = testing::random_matrix(2 * n, 9, rng);
    batch.target_id = testing::random_matrix(2 * n, 9, rng);
    batch.target_exp = testing::random_matrix(2 * n, 9, rng);
    const Eigen::MatrixXd rest = testing::random_matrix(n, 9, rng);
    const double alpha = 1e-3;

    const auto eval_loss = [&](ModelParams& m) {
        Rng noise(1234);
        return loss_batch(m, lt, batch, rest, TrainStage::full, &noise, alpha, alpha, nullptr)
            .total();
    };

    ModelGrads grads = zero_grads(model);
    {
        Rng noise(1234);
        loss_batch(model, lt, batch, rest, TrainStage::full, &noise, alpha, alpha, &grads);
    }
    const auto param_views = tensor_views(model);
    const auto grad_views = tensor_views(grads, model);

    const double h = 1e-5;
    Rng pick(77);
    std::vector<double> analytic, numeric;
    for (std::size_t g = 0; g < param_views.size(); ++g) {
        const long count = param_views[g].size();
        const int probes = count < 4 ? static_cast<int>(count) : 4;
        for (int p = 0; p < probes; ++p) {
            const long idx = pick.uniform_int(static_cast<int>(count));
            double* slot = param_views[g].data + idx;
            const double saved = *slot;
            *slot = saved + h;
            const double up = eval_loss(model);
            *slot = saved - h;
            const double down = eval_loss(model);
            *slot = saved;
            numeric.push_back((up - down) / (2 * h));
            analytic.push_back(grad_views[g].data[idx]);
        }
    }
    Eigen::Map<Eigen::VectorXd> an(analytic.data(), static_cast<long>(analytic.size()));
    Eigen::Map<Eigen::VectorXd> nu(numeric.data(), static_cast<long>(numeric.size()));
    const double rel = (an - nu).norm() / std::max({an.norm(), nu.norm(), 1e-12});
    CHECK(rel < 1e-3);
}

TEST_CASE("model save/load roundtrip preserves behavior to float precision") {
    Rng rng(16);
    const int n = 6;
    ModelParams model = tiny_model(n, rng);
    model.reference_id = "refhash";
    model.feat_mean = testing::random_matrix(1, 9, rng).row(0);
    model.feat_std = testing::random_matrix(1, 9, rng).row(0).cwiseAbs().array() + 0.5;
    const auto lt = graph(n, rng);

    const auto dir = std::filesystem::temp_directory_path() / "drface_tests";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.json").string();
    save_model(model, path, {{"note", "test"}});
    const ModelParams back = load_model(path);
    CHECK(back.reference_id == "refhash");
    CHECK(back.config.latent_id == model.config.latent_id);

    DRFeature f;
    f.values = testing::random_matrix(n, 9, rng);
    f.reference_id = "refhash";
    const Eigen::VectorXd z1 = encode_identity_code(model, lt, f);
    const Eigen::VectorXd z2 = encode_identity_code(back, lt, f);
    CHECK((z1 - z2).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("batch gradient is independent of sample order") {
    Rng rng(21);
    const int n = 8;
    ModelParams model = tiny_model(n, rng);
    const auto lt = graph(n, rng);
    const Eigen::MatrixXd rest = testing::random_matrix(n, 9, rng);

    FeatureBatch fwd, rev;
    fwd.samples = rev.samples = 3;
    fwd.input = testing::random_matrix(3 * n, 9, rng);
    fwd.target_id = testing::random_matrix(3 * n, 9, rng);
    fwd.target_exp = testing::random_matrix(3 * n, 9, rng);
    rev.input.resizeLike(fwd.input);
    rev.target_id.resizeLike(fwd.target_id);
    rev.target_exp.resizeLike(fwd.target_exp);
    for (int b = 0; b < 3; ++b) {
        rev.input.middleRows((2 - b) * n, n) = fwd.input.middleRows(b * n, n);
        rev.target_id.middleRows((2 - b) * n, n) = fwd.target_id.middleRows(b * n, n);
        rev.target_exp.middleRows((2 - b) * n, n) = fwd.target_exp.middleRows(b * n, n);
    }
    ModelGrads ga = zero_grads(model), gb = zero_grads(model);
    // Evaluation mode (z = mu) so the noise stream cannot couple to order.
    loss_batch(model, lt, fwd, rest, TrainStage::full, nullptr, 1e-5, 1e-5, &ga);
    loss_batch(model, lt, rev, rest, TrainStage::full, nullptr, 1e-5, 1e-5, &gb);
    const auto va = tensor_views(ga, model);
    const auto vb = tensor_views(gb, model);
    double worst = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
        for (long k = 0; k < va[i].size(); ++k) {
            worst = std::max(worst, std::abs(va[i].data[k] - vb[i].data[k]));
        }
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("non-finite losses are attributed to a component") {
    Rng rng(22);
    const int n = 5;
    ModelParams model = tiny_model(n, rng);
    model.reference_id = "r";
    model.identity.dec.conv2.theta[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    const auto lt = graph(n, rng);
    Triplet t = random_triplet(n, "r", rng);
    CHECK_THROWS_WITH_AS(
        loss_total(model, lt, t, testing::random_matrix(n, 9, rng), nullptr, 1e-5, 1e-5),
        doctest::Contains("L_id"), DataError);
}

TEST_CASE("log-variance is clamped to [-10, 10]") {
    Rng rng(23);
    const int n = 5;
    ModelParams model = tiny_model(n, rng);
    // Blow up the final encoder layer so raw stats exceed the clamp.
    model.identity.enc.fc2.weight *= 1e6;
    const auto lt = graph(n, rng);
    Eigen::MatrixXd mu, logvar;
    encode_forward(model.identity, testing::random_matrix(n, 9, rng), lt, n, mu, logvar, nullptr);
    CHECK(logvar.maxCoeff() <= 10.0);
    CHECK(logvar.minCoeff() >= -10.0);
    CHECK(logvar.cwiseAbs().maxCoeff() == 10.0); // clamp actually engaged
}
