// Acceptance suite: one pass/fail line per criterion. Criteria 5-8 share a
// single training run on the full-size synthetic corpus, so this binary can
// take ~20-30 minutes; everything else finishes in seconds.

#include "drface/augmentation.hpp"
#include "drface/bilinear.hpp"
#include "drface/laplacian.hpp"
#include "drface/metrics.hpp"
#include "drface/network.hpp"
#include "drface/synth.hpp"
#include "drface/training.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

using namespace drface;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s — %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++failures;
    }
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------------------
// Shared fixture: the seed-fixed full-size corpus and one trained model.

struct Fixture {
    Corpus corpus;
    ReferenceFrame ref;
    Eigen::SparseMatrix<double> lap;
    TripletSets sets;
    TrainData data;
    TrainConfig config;
    ModelParams untrained;
    TrainResult trained;
    double train_seconds = 0;

    explicit Fixture(std::uint64_t seed)
        : corpus(generate_corpus(make_spec(seed))), ref(corpus.base),
          lap(scaled_laplacian(normalized_laplacian(corpus.base))),
          sets(build_triplets(corpus, ref)), data(make_data()), config(make_config(seed)),
          untrained(untrained_model(config, data)), trained(run_training()) {}

  private:
    static CorpusSpec make_spec(std::uint64_t seed) {
        CorpusSpec spec; // defaults: grid 32 (n = 1024), 16 identities, 12 expressions
        spec.seed = seed;
        return spec;
    }
    static TrainConfig make_config(std::uint64_t seed) {
        TrainConfig config; // published schedule: 50 epochs/stage, lr 1e-4, decay 0.6/10
        config.seed = seed;
        return config;
    }
    TrainData make_data() const {
        TrainData d;
        d.triplets = sets.train;
        d.rest_feature = ref.rest_feature().values;
        d.lap = lap;
        d.reference_id = ref.id();
        d.vertex_count = corpus.base.vertex_count();
        return d;
    }
    TrainResult run_training() {
        const auto start = clock_type::now();
        TrainResult result = train(config, data);
        train_seconds = seconds_since(start);
        return result;
    }
};

// Decoded branch outputs for one input mesh (evaluation mode).
struct BranchMeshes {
    Mesh identity;
    Mesh expression;
};

BranchMeshes decompose_to_meshes(const Fixture& fx, const ModelParams& model, const Mesh& input) {
    const DRFeature g = fx.ref.encode(input);
    const Eigen::VectorXd z_id = encode_identity_code(model, fx.lap, g);
    const Eigen::VectorXd z_exp = encode_expression_code(model, fx.lap, g);
    return {fx.ref.decode(decode_identity_feature(model, fx.lap, z_id)),
            fx.ref.decode(decode_expression_feature(model, fx.lap, z_exp))};
}

// Eq.-9-style metrics on the held-out identities: E_id is the positional std
// of reconstructed identity meshes across one identity's expressions,
// averaged over identities; E_exp the std of reconstructed expression meshes
// across identities sharing one expression, averaged over expressions.
void decomposition_metrics(const Fixture& fx, const ModelParams& model, double& e_id,
                           double& e_exp) {
    const auto& test_ids = fx.corpus.test_identities;
    const int expressions = fx.corpus.spec.expressions;
    std::vector<std::vector<BranchMeshes>> parts(test_ids.size());
    for (std::size_t k = 0; k < test_ids.size(); ++k) {
        for (int e = 0; e < expressions; ++e) {
            parts[k].push_back(decompose_to_meshes(fx, model, fx.corpus.meshes[test_ids[k]][e]));
        }
    }
    e_id = 0;
    for (std::size_t k = 0; k < test_ids.size(); ++k) {
        std::vector<Mesh> set;
        for (int e = 0; e < expressions; ++e) {
            set.push_back(parts[k][e].identity);
        }
        e_id += decomposition_std(set);
    }
    e_id /= static_cast<double>(test_ids.size());

    e_exp = 0;
    for (int e = 0; e < expressions; ++e) {
        std::vector<Mesh> set;
        for (std::size_t k = 0; k < test_ids.size(); ++k) {
            set.push_back(parts[k][e].expression);
        }
        e_exp += decomposition_std(set);
    }
    e_exp /= static_cast<double>(expressions);
}

// ---------------------------------------------------------------------------
// Criterion 1: DR roundtrip.

void criterion_1(const Fixture& fx) {
    const auto start = clock_type::now();
    int count = 0;
    double ratio_sum = 0;
    for (int i = 0; i < fx.corpus.spec.identities && count < 50; ++i) {
        for (int e = 0; e < fx.corpus.spec.expressions && count < 50; ++e) {
            const Mesh& m = fx.corpus.meshes[i][e];
            const Mesh back = fx.ref.decode(fx.ref.encode(m));
            ratio_sum += e_avd(m, back) / m.bbox_diagonal();
            ++count;
        }
    }
    const double mean_ratio = ratio_sum / count;
    const double elapsed = seconds_since(start);
    report(1, "DR roundtrip", mean_ratio < 1e-3 && elapsed < 30.0,
           fmt("mean vertex error %.4f%% of bbox diagonal over %d meshes (limit 0.1%%), %.1fs "
               "(limit 30s)",
               100.0 * mean_ratio, count, elapsed));
}

// ---------------------------------------------------------------------------
// Criterion 2: Chebyshev forward vs the dense spectral definition.

Eigen::SparseMatrix<double> random_adjacency(int n, Rng& rng) {
    std::vector<Eigen::Triplet<double>> t;
    auto add = [&](int i, int j) {
        t.emplace_back(i, j, 1.0);
        t.emplace_back(j, i, 1.0);
    };
    for (int i = 0; i + 1 < n; ++i) {
        add(i, i + 1);
    }
    for (int k = 0; k < n / 2 + 1; ++k) {
        const int i = rng.uniform_int(n), j = rng.uniform_int(n);
        if (i != j) {
            add(i, j);
        }
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(t.begin(), t.end(), [](double, double) { return 1.0; });
    return a;
}

void criterion_2() {
    const auto start = clock_type::now();
    Rng rng(17);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + rng.uniform_int(11);
        const auto lt = scaled_laplacian(normalized_laplacian(random_adjacency(n, rng)));
        const int order = 1 + rng.uniform_int(3);
        ChebConv layer(order, 3, 4);
        layer.init_params(rng);
        for (int i = 0; i < layer.bias.size(); ++i) {
            layer.bias(i) = rng.uniform(-0.5, 0.5);
        }
        Eigen::MatrixXd x(n, 3);
        for (long i = 0; i < x.size(); ++i) {
            x.data()[i] = rng.normal();
        }
        // Dense spectral definition through the eigendecomposition.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(lt)};
        Eigen::MatrixXd y_oracle = Eigen::MatrixXd::Zero(n, 4);
        Eigen::VectorXd t_prev2 = Eigen::VectorXd::Ones(n), t_prev = eig.eigenvalues();
        for (int k = 0; k < order; ++k) {
            Eigen::VectorXd tk;
            if (k == 0) {
                tk = t_prev2;
            } else if (k == 1) {
                tk = t_prev;
            } else {
                tk = 2.0 * eig.eigenvalues().cwiseProduct(t_prev) - t_prev2;
                t_prev2 = t_prev;
                t_prev = tk;
            }
            y_oracle += eig.eigenvectors() * tk.asDiagonal() * eig.eigenvectors().transpose() * x *
                        layer.theta[k];
        }
        y_oracle.rowwise() += layer.bias;
        worst = std::max(worst, (layer.forward(x, lt) - y_oracle).cwiseAbs().maxCoeff());
    }
    const double elapsed = seconds_since(start);
    report(2, "spectral-conv oracle", worst < 1e-10 && elapsed < 5.0,
           fmt("max deviation %.3g over 20 graphs with n <= 12 (limit 1e-10), %.2fs (limit 5s)",
               worst, elapsed));
}

// ---------------------------------------------------------------------------
// Criterion 3: gradient suite.

double group_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

void criterion_3() {
    const auto start = clock_type::now();
    const double h = 1e-5;
    double worst_layer = 0, worst_end_to_end = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        // --- Chebyshev layer ---
        {
            const int n = 5 + rng.uniform_int(4);
            const auto lt = scaled_laplacian(normalized_laplacian(random_adjacency(n, rng)));
            ChebConv layer(2, 3, 4);
            layer.init_params(rng);
            Eigen::MatrixXd x(n, 3), probe(n, 4);
            for (long i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
            for (long i = 0; i < probe.size(); ++i) probe.data()[i] = rng.normal();
            const auto loss = [&](const ChebConv& l, const Eigen::MatrixXd& input) {
                return (l.forward(input, lt).array() * probe.array()).sum();
            };
            ChebTape tape;
            layer.forward(x, lt, &tape);
            ChebGrads grads = layer.zero_grads();
            const Eigen::MatrixXd dx = layer.backward(tape, probe, lt, grads);

            Eigen::VectorXd an(x.size()), fd(x.size());
            for (long i = 0; i < x.size(); ++i) {
                Eigen::MatrixXd xp = x, xm = x;
                xp.data()[i] += h;
                xm.data()[i] -= h;
                fd(i) = (loss(layer, xp) - loss(layer, xm)) / (2 * h);
                an(i) = dx.data()[i];
            }
            worst_layer = std::max(worst_layer, group_rel_error(an, fd));
            for (int k = 0; k < 2; ++k) {
                Eigen::VectorXd ank(layer.theta[k].size()), fdk(layer.theta[k].size());
                for (long i = 0; i < layer.theta[k].size(); ++i) {
                    ChebConv lp = layer, lm = layer;
                    lp.theta[k].data()[i] += h;
                    lm.theta[k].data()[i] -= h;
                    fdk(i) = (loss(lp, x) - loss(lm, x)) / (2 * h);
                    ank(i) = grads.theta[k].data()[i];
                }
                worst_layer = std::max(worst_layer, group_rel_error(ank, fdk));
            }
            Eigen::VectorXd anb(layer.bias.size()), fdb(layer.bias.size());
            for (long i = 0; i < layer.bias.size(); ++i) {
                ChebConv lp = layer, lm = layer;
                lp.bias(i) += h;
                lm.bias(i) -= h;
                fdb(i) = (loss(lp, x) - loss(lm, x)) / (2 * h);
                anb(i) = grads.bias(i);
            }
            worst_layer = std::max(worst_layer, group_rel_error(anb, fdb));
        }
        // --- dense + activation ---
        {
            Dense layer(4, 3);
            layer.init_params(rng);
            Eigen::MatrixXd x(6, 4), probe(6, 3);
            for (long i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
            for (long i = 0; i < probe.size(); ++i) probe.data()[i] = rng.normal();
            const auto loss = [&](const Dense& l, const Eigen::MatrixXd& input) {
                return (leaky_relu_forward(l.forward(input)).array() * probe.array()).sum();
            };
            DenseTape dtape;
            ActTape atape;
            leaky_relu_forward(layer.forward(x, &dtape), &atape);
            DenseGrads grads = layer.zero_grads();
            layer.backward(dtape, leaky_relu_backward(atape, probe), grads);
            Eigen::VectorXd an(layer.weight.size()), fd(layer.weight.size());
            for (long i = 0; i < layer.weight.size(); ++i) {
                Dense lp = layer, lm = layer;
                lp.weight.data()[i] += h;
                lm.weight.data()[i] -= h;
                fd(i) = (loss(lp, x) - loss(lm, x)) / (2 * h);
                an(i) = grads.weight.data()[i];
            }
            worst_layer = std::max(worst_layer, group_rel_error(an, fd));
        }
        // --- end-to-end through the composed total loss (10-vertex graph) ---
        {
            const int n = 10;
            const auto lt = scaled_laplacian(normalized_laplacian(random_adjacency(n, rng)));
            NetConfig nc;
            nc.conv_channels = 8;
            nc.dense_hidden = 16;
            nc.latent_id = 6;
            nc.latent_exp = 4;
            nc.vertex_count = n;
            ModelParams model = make_model(nc, rng);
            FeatureBatch batch;
            batch.samples = 2;
            batch.input.resize(2 * n, 9);
            batch.target_id.resize(2 * n, 9);
            batch.target_exp.resize(2 * n, 9);
            Eigen::MatrixXd rest(n, 9);
            for (long i = 0; i < batch.input.size(); ++i) {
                batch.input.data()[i] = rng.normal();
                batch.target_id.data()[i] = rng.normal();
                batch.target_exp.data()[i] = rng.normal();
            }
            for (long i = 0; i < rest.size(); ++i) rest.data()[i] = rng.normal();
            const double alpha = 1e-3;
            const std::uint64_t noise_seed = 1000 + seed;
            const auto eval_loss = [&](ModelParams& m) {
                Rng noise(noise_seed);
                return loss_batch(m, lt, batch, rest, TrainStage::full, &noise, alpha, alpha,
                                  nullptr)
                    .total();
            };
            ModelGrads grads = zero_grads(model);
            {
                Rng noise(noise_seed);
                loss_batch(model, lt, batch, rest, TrainStage::full, &noise, alpha, alpha, &grads);
            }
            const auto params = tensor_views(model);
            const auto grad_views = tensor_views(grads, model);
            Rng pick(seed * 31 + 7);
            std::vector<double> analytic, numeric;
            for (std::size_t g = 0; g < params.size(); ++g) {
                const int probes = params[g].size() < 3 ? static_cast<int>(params[g].size()) : 3;
                for (int p = 0; p < probes; ++p) {
                    const long idx = pick.uniform_int(static_cast<int>(params[g].size()));
                    double* slot = params[g].data + idx;
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
            worst_end_to_end = std::max(worst_end_to_end, group_rel_error(an, nu));
        }
    }
    const double elapsed = seconds_since(start);
    report(3, "gradient suite", worst_layer < 1e-4 && worst_end_to_end < 1e-3 && elapsed < 60.0,
           fmt("layer rel err %.3g (limit 1e-4), end-to-end rel err %.3g (limit 1e-3), 10 seeds, "
               "%.1fs (limit 60s)",
               worst_layer, worst_end_to_end, elapsed));
}

// ---------------------------------------------------------------------------
// Criterion 4: closed-form KL vs Monte Carlo.

void criterion_4() {
    Rng rng(23);
    Rng noise(29);
    const int samples = 100000, dim = 8;
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd mu(1, dim), lv(1, dim);
        for (int d = 0; d < dim; ++d) {
            mu(0, d) = rng.normal();
            lv(0, d) = 0.7 * rng.normal();
        }
        const double closed = kl_divergence(mu, lv);
        double acc = 0;
        for (int s = 0; s < samples; ++s) {
            double log_ratio = 0;
            for (int d = 0; d < dim; ++d) {
                const double sigma = std::exp(0.5 * lv(0, d));
                const double z = mu(0, d) + sigma * noise.normal();
                const double dq = (z - mu(0, d)) / sigma;
                log_ratio += -0.5 * dq * dq - 0.5 * lv(0, d) + 0.5 * z * z;
            }
            acc += log_ratio;
        }
        const double mc = acc / samples;
        worst = std::max(worst, std::abs(closed - mc) / std::max(1e-12, std::abs(closed)));
    }
    report(4, "KL correctness", worst <= 0.02,
           fmt("worst closed-form vs 1e5-sample MC relative gap %.3g over 20 draws (limit 0.02)",
               worst));
}

// ---------------------------------------------------------------------------
// Criteria 5-8 share the trained fixture.

void criterion_5(const Fixture& fx) {
    const double initial = fx.trained.initial_eval.total();
    const double final_loss = fx.trained.final_eval.total();
    const double ratio = final_loss / initial;

    double e_id_trained, e_exp_trained, e_id_untrained, e_exp_untrained;
    decomposition_metrics(fx, fx.trained.model, e_id_trained, e_exp_trained);
    decomposition_metrics(fx, fx.untrained, e_id_untrained, e_exp_untrained);

    // Stage-3 loss-curve endpoints, reported for reference.
    double stage3_first = 0, stage3_last = 0;
    for (const auto& e : fx.trained.log) {
        if (e.stage == 3) {
            if (stage3_first == 0) {
                stage3_first = e.losses.total();
            }
            stage3_last = e.losses.total();
        }
    }

    const bool pass = ratio <= 0.5 && e_id_trained <= 0.5 * e_id_untrained &&
                      e_exp_trained <= 0.5 * e_exp_untrained && fx.train_seconds <= 45.0 * 60.0;
    report(5, "training efficacy", pass,
           fmt("L_total %.4g -> %.4g (ratio %.3f, limit 0.5); E_id %.3f vs untrained %.3f mm, "
               "E_exp %.3f vs %.3f mm (limits 50%%); stage3 curve %.4g -> %.4g; %.0fs "
               "(limit 2700s)",
               initial, final_loss, ratio, e_id_trained, e_id_untrained, e_exp_trained,
               e_exp_untrained, stage3_first, stage3_last, fx.train_seconds));
}

void criterion_6(const Fixture& fx) {
    const ModelParams& model = fx.trained.model;
    const Eigen::MatrixXd& rest = fx.ref.rest_feature().values;
    double cross_distance = 0, raw_distance = 0;
    for (const auto& t : fx.sets.test) {
        const Eigen::VectorXd z_id = encode_identity_code(model, fx.lap, t.input);
        const DRFeature ghat_id = decode_identity_feature(model, fx.lap, z_id);
        const Eigen::VectorXd z_cross = encode_expression_code(model, fx.lap, ghat_id);
        const DRFeature cross = decode_expression_feature(model, fx.lap, z_cross);
        cross_distance += (cross.values - rest).cwiseAbs().mean();
        raw_distance += (t.expression.values - rest).cwiseAbs().mean();
    }
    const double ratio = cross_distance / raw_distance;
    report(6, "disentangling loss behavior", ratio < 0.25,
           fmt("mean L1 of D_exp(E_exp(Ghat_id)) to rest = %.3g%% of raw expression distance "
               "(limit 25%%), %zu held-out faces",
               100.0 * ratio, fx.sets.test.size()));
}

void criterion_7(const Fixture& fx) {
    const ModelParams& model = fx.trained.model;
    int wins = 0, total = 0;
    double transfer_sum = 0, baseline_sum = 0;
    for (const int a : fx.corpus.test_identities) {
        for (const int b : fx.corpus.test_identities) {
            if (a == b) {
                continue;
            }
            for (int e = 1; e < fx.corpus.spec.expressions; ++e) {
                const Mesh& source = fx.corpus.meshes[a][e];
                const Mesh& target_neutral = fx.corpus.meshes[b][0];
                const Mesh& truth = fx.corpus.meshes[b][e];
                const Mesh transferred =
                    transfer_expression(model, fx.lap, fx.ref, source, target_neutral);
                const double err = e_avd(transferred, truth);
                const double baseline = e_avd(target_neutral, truth);
                transfer_sum += err;
                baseline_sum += baseline;
                wins += err < baseline ? 1 : 0;
                ++total;
            }
        }
    }
    const double win_rate = static_cast<double>(wins) / total;
    const bool pass = total >= 20 && win_rate >= 0.8 && transfer_sum < baseline_sum;
    report(7, "expression transfer beats neutral baseline", pass,
           fmt("%d/%d pairs better than neutral (%.0f%%, limit 80%%); mean E_avd %.3f vs neutral "
               "%.3f mm",
               wins, total, 100.0 * win_rate, transfer_sum / total, baseline_sum / total));
}

void criterion_8(const Fixture& fx) {
    // Bilinear core over the training identities, truncation clipped to the
    // grid per the published defaults (50, 25).
    std::vector<std::vector<Mesh>> grid;
    for (int i : fx.corpus.train_identities) {
        grid.push_back(fx.corpus.meshes[i]);
    }
    const int k_id = std::min<int>(50, static_cast<int>(grid.size()));
    const int k_exp = std::min<int>(25, fx.corpus.spec.expressions);
    const CoreTensor core = build_core(grid, k_id, k_exp);

    bool monotone = true;
    auto check_monotone = [&](const BilinearFit& fit) {
        for (std::size_t i = 1; i < fit.residual_log.size(); ++i) {
            if (fit.residual_log[i] > fit.residual_log[i - 1] + 1e-12) {
                monotone = false;
            }
        }
    };

    // Planted-parameter recovery.
    Rng rng(41);
    Eigen::VectorXd planted_id(k_id), planted_exp(k_exp);
    for (int i = 0; i < k_id; ++i) planted_id(i) = rng.normal();
    for (int i = 0; i < k_exp; ++i) planted_exp(i) = rng.normal();
    planted_id = 0.3 * planted_id + core.id_coeffs.colwise().mean().transpose();
    planted_exp = 0.3 * planted_exp + core.exp_coeffs.colwise().mean().transpose();
    const Mesh planted_mesh = bilinear_reconstruct(core, planted_id, planted_exp);
    const BilinearFit planted_fit = als_fit(core, planted_mesh, 300, 1e-14);
    check_monotone(planted_fit);
    const double recovery = e_avd(
        planted_mesh, bilinear_reconstruct(core, planted_fit.alpha_id, planted_fit.alpha_exp));

    // Held-out reconstruction: trained network vs bilinear ALS.
    double net_sum = 0, bil_sum = 0;
    int count = 0;
    for (const int i : fx.corpus.test_identities) {
        for (int e = 0; e < fx.corpus.spec.expressions; ++e) {
            const Mesh& truth = fx.corpus.meshes[i][e];
            const DRFeature recon =
                reconstruct_feature(fx.trained.model, fx.lap, fx.ref.encode(truth));
            net_sum += e_avd(fx.ref.decode(recon), truth);
            const BilinearFit fit = als_fit(core, truth);
            check_monotone(fit);
            bil_sum += e_avd(bilinear_reconstruct(core, fit.alpha_id, fit.alpha_exp), truth);
            ++count;
        }
    }
    const double net_mean = net_sum / count, bil_mean = bil_sum / count;
    const bool pass = monotone && recovery < 1e-6 && net_mean <= bil_mean;
    report(8, "bilinear baseline", pass,
           fmt("ALS monotone: %s; planted recovery %.3g mm (limit 1e-6); held-out E_avd network "
               "%.3f vs bilinear %.3f mm over %d meshes",
               monotone ? "yes" : "NO", recovery, net_mean, bil_mean, count));
}

// ---------------------------------------------------------------------------
// Trained-model behavioral examples (not numbered criteria, but part of the
// per-operation contract: they need the trained fixture).

void example(const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] example: %s — %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++failures;
    }
}

void trained_model_examples(const Fixture& fx) {
    const ModelParams& model = fx.trained.model;
    const DRFeature& rest = fx.ref.rest_feature();

    // Branch autoencoding of the rest feature, against the model's own
    // held-out branch accuracy.
    double heldout_id_err = 0, heldout_exp_err = 0;
    for (const auto& t : fx.sets.test) {
        const DRFeature id_hat = decode_identity_feature(
            model, fx.lap, encode_identity_code(model, fx.lap, t.input));
        const DRFeature exp_hat = decode_expression_feature(
            model, fx.lap, encode_expression_code(model, fx.lap, t.input));
        heldout_id_err += (id_hat.values - t.identity.values).cwiseAbs().mean();
        heldout_exp_err += (exp_hat.values - t.expression.values).cwiseAbs().mean();
    }
    heldout_id_err /= static_cast<double>(fx.sets.test.size());
    heldout_exp_err /= static_cast<double>(fx.sets.test.size());
    const DRFeature rest_id = decode_identity_feature(
        model, fx.lap, encode_identity_code(model, fx.lap, rest));
    const double rest_id_err = (rest_id.values - rest.values).cwiseAbs().mean();
    example("decode(encode(rest)) on the identity branch", rest_id_err <= 2.0 * heldout_id_err,
            fmt("mean L1 %.4g vs held-out branch error %.4g", rest_id_err, heldout_id_err));

    // Neutral + neutral fuses to neutral.
    const DRFeature fused = fuse_features(model, fx.lap, rest, rest);
    const double fuse_err = (fused.values - rest.values).cwiseAbs().mean();
    example("fuse(rest, rest) stays near rest", fuse_err <= 2.0 * (heldout_id_err + heldout_exp_err),
            fmt("mean L1 %.4g (branch-error scale %.4g)", fuse_err,
                heldout_id_err + heldout_exp_err));

    // Self-transfer equals plain autoencoding.
    const Mesh& subject = fx.corpus.meshes[fx.corpus.test_identities[0]][4];
    const Mesh self = transfer_expression(model, fx.lap, fx.ref, subject, subject);
    const Mesh recon =
        fx.ref.decode(reconstruct_feature(model, fx.lap, fx.ref.encode(subject)));
    example("self-transfer equals autoencoding", e_avd(self, recon) < 1e-9,
            fmt("E_avd %.3g mm; autoencoding error to the input %.3f mm", e_avd(self, recon),
                e_avd(recon, subject)));

    // A neutral source pushes the target back toward its identity mesh.
    const int a = fx.corpus.test_identities[0], b = fx.corpus.test_identities[1];
    const Mesh& neutral_source = fx.corpus.meshes[a][0];
    const Mesh& expressive_target = fx.corpus.meshes[b][6];
    const Mesh neutralized =
        transfer_expression(model, fx.lap, fx.ref, neutral_source, expressive_target);
    const double to_identity = e_avd(neutralized, fx.corpus.meshes[b][0]);
    const double untouched = e_avd(expressive_target, fx.corpus.meshes[b][0]);
    example("neutral-source transfer approaches the target's identity mesh",
            to_identity < untouched,
            fmt("E_avd to identity mesh %.3f mm vs %.3f mm before the transfer", to_identity,
                untouched));

    // Latent interpolation midpoint sits between the endpoints.
    const std::vector<Mesh> grid = interpolate_latent(model, fx.lap, fx.ref,
                                                      fx.corpus.meshes[a][3],
                                                      fx.corpus.meshes[b][7], 0.5);
    const Mesh& start = grid[0];
    const Mesh& mid = grid[4];
    const Mesh& end = grid[8];
    const double endpoint_distance = e_avd(start, end);
    const bool mid_ok = e_avd(mid, start) <= 1.5 * 0.5 * endpoint_distance &&
                        e_avd(mid, end) <= 1.5 * 0.5 * endpoint_distance;
    example("interpolation midpoint continuity", mid_ok,
            fmt("midpoint E_avd %.3f / %.3f mm vs endpoint distance %.3f mm", e_avd(mid, start),
                e_avd(mid, end), endpoint_distance));
}

// ---------------------------------------------------------------------------
// Criterion 9: metric identities.

void criterion_9(const Fixture& fx) {
    const Mesh& m = fx.corpus.meshes[3][5];
    bool pass = true;
    std::string why;

    if (e_avd(m, m) != 0.0) {
        pass = false;
        why += "e_avd(M,M) != 0; ";
    }
    if (e_sed(m, m) != 0.0) {
        pass = false;
        why += "e_sed(M,M) != 0; ";
    }
    Rng rng(3);
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    const Eigen::Matrix3d rot = rotation_exp(axis * 0.7);
    const Mesh moved = m.with_vertices((m.vertices() * rot.transpose()).rowwise() +
                                       Eigen::RowVector3d(4.0, -2.5, 1.0));
    if (e_sed(m, moved) > 1e-12) {
        pass = false;
        why += "e_sed not rigid-invariant; ";
    }
    if (decomposition_std({m, m, m}) != 0.0) {
        pass = false;
        why += "decomposition_std of identical meshes != 0; ";
    }
    const Eigen::RowVector3d t(1.25, -3.5, 0.75);
    const double avd = e_avd(m, m.with_vertices(m.vertices().rowwise() + t));
    if (std::abs(avd - t.norm()) > 1e-12) {
        pass = false;
        why += "translation distance off; ";
    }
    report(9, "metric identities", pass,
           pass ? "e_avd/e_sed/decomposition_std identities and the translation case all hold"
                : why);
}

// ---------------------------------------------------------------------------
// Criterion 10: augmentation invariants.

void criterion_10(const Fixture& fx) {
    Rng rng(47);
    bool invariants = true;
    for (int trial = 0; trial < 10000; ++trial) {
        const PolarSample s = sample_weights(5, rng);
        double norm_sq = 0;
        for (double a : s.cartesian) {
            if (a < 0) {
                invariants = false;
            }
            norm_sq += a * a;
        }
        if (std::abs(norm_sq - s.radius * s.radius) > 1e-12 || s.radius < 0.5 || s.radius > 1.2) {
            invariants = false;
        }
    }
    // Default augmentation run: 2000 features from the training identities.
    std::vector<DRFeature> sources;
    for (int i : fx.corpus.train_identities) {
        sources.push_back(fx.ref.encode(fx.corpus.meshes[i][0]));
    }
    Rng aug_rng(11);
    const auto augmented = augment_corpus(sources, 2000, 5, aug_rng);
    const bool pass = invariants && augmented.size() == 2000;
    report(10, "augmentation invariants", pass,
           fmt("1e4 weight draws satisfy norm/positivity/radius bounds: %s; default run produced "
               "%zu features (want 2000)",
               invariants ? "yes" : "NO", augmented.size()));
}

} // namespace

int main() {
    std::printf("drface acceptance suite\n");
    std::fflush(stdout);

    criterion_2();
    criterion_3();
    criterion_4();

    std::printf("... generating the seed-fixed corpus and training (criteria 1, 5-10)\n");
    std::fflush(stdout);
    const Fixture fx(2024);

    criterion_1(fx);
    criterion_5(fx);
    criterion_6(fx);
    criterion_7(fx);
    criterion_8(fx);
    criterion_9(fx);
    criterion_10(fx);
    trained_model_examples(fx);

    std::printf("%s: %d checks failed\n", failures == 0 ? "SUCCESS" : "FAILURE", failures);
    return failures == 0 ? 0 : 1;
}
