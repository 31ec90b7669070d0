#pragma once

#include "drface/deformation.hpp"
#include "drface/layers.hpp"
#include "drface/model_file.hpp"

#include <optional>
#include <string>
#include <vector>

namespace drface {

// Architecture of one decomposition branch and the fusion stack. The
// encoder narrows per-vertex features through two graph convolutions into a
// dense bottleneck emitting (mu, logvar); the decoder mirrors it back to an
// n x 9 feature map. Fusion maps the concatenated branch outputs (n x 18)
// back to the input feature (n x 9).
struct NetConfig {
    int cheb_order = 2;
    int conv_channels = 32;
    int dense_hidden = 128;
    int latent_id = 50;
    int latent_exp = 25;
    int vertex_count = 0;
    bool conv_bias = true;
    static constexpr int feature_dim = 9;
};

inline constexpr double kLogvarClamp = 10.0;

struct EncoderParams {
    ChebConv conv1, conv2;
    Dense fc1, fc2; // fc2 emits 2*latent (mu | logvar)
};

struct DecoderParams {
    Dense fc1, fc2; // latent -> hidden -> n*channels
    ChebConv conv1, conv2;
};

struct BranchParams {
    EncoderParams enc;
    DecoderParams dec;
    int latent_dim = 0;
};

struct FusionParams {
    ChebConv conv1, conv2, conv3; // 18 -> c -> c -> 9
};

struct ModelParams {
    NetConfig config;
    BranchParams identity;   // latent 50 by default
    BranchParams expression; // latent 25 by default
    FusionParams fusion;
    Eigen::RowVectorXd feat_mean; // per-channel normalization (9)
    Eigen::RowVectorXd feat_std;  // per-channel, entries > 0
    std::string reference_id;
};

ModelParams make_model(const NetConfig& config, Rng& rng);

// Per-channel standardization applied before features enter the networks;
// the inverse is applied after decoding.
Eigen::MatrixXd normalize_features(const ModelParams& model, const Eigen::MatrixXd& raw);
Eigen::MatrixXd denormalize_features(const ModelParams& model, const Eigen::MatrixXd& normed);
// Fits feat_mean/feat_std over the given raw feature matrices (stacked rows).
void fit_normalization(ModelParams& model, const std::vector<const Eigen::MatrixXd*>& features);

// ---------------------------------------------------------------------------
// Forward/backward graph pieces. Inputs stack B samples as (B*n) rows; latent
// matrices are B x latent. All feature-space tensors here are normalized.

struct EncodeTape {
    ChebTape c1, c2;
    ActTape a1, a2, a3;
    DenseTape f1, f2;
    Eigen::MatrixXd clamp_mask; // 1 where logvar passed the clamp untouched
};

struct DecodeTape {
    DenseTape f1, f2;
    ActTape a1, a2, a3;
    ChebTape c1, c2;
};

struct FusionTape {
    ChebTape c1, c2, c3;
    ActTape a1, a2;
};

struct EncoderGrads {
    ChebGrads c1, c2;
    DenseGrads f1, f2;
};
struct DecoderGrads {
    DenseGrads f1, f2;
    ChebGrads c1, c2;
};
struct BranchGrads {
    EncoderGrads enc;
    DecoderGrads dec;
};
struct FusionGrads {
    ChebGrads c1, c2, c3;
};
struct ModelGrads {
    BranchGrads identity, expression;
    FusionGrads fusion;
};

ModelGrads zero_grads(const ModelParams& model);

// mu | logvar with logvar clamped to [-kLogvarClamp, kLogvarClamp].
void encode_forward(const BranchParams& branch, const Eigen::MatrixXd& x,
                    const Eigen::SparseMatrix<double>& lap, int vertex_count,
                    Eigen::MatrixXd& mu, Eigen::MatrixXd& logvar, EncodeTape* tape);
Eigen::MatrixXd encode_backward(const BranchParams& branch, EncodeTape& tape,
                                const Eigen::MatrixXd& dmu, const Eigen::MatrixXd& dlogvar,
                                const Eigen::SparseMatrix<double>& lap, int vertex_count,
                                BranchGrads& grads);

Eigen::MatrixXd decode_forward(const BranchParams& branch, const Eigen::MatrixXd& z,
                               const Eigen::SparseMatrix<double>& lap, int vertex_count,
                               DecodeTape* tape);
Eigen::MatrixXd decode_backward(const BranchParams& branch, DecodeTape& tape,
                                const Eigen::MatrixXd& dout, const Eigen::SparseMatrix<double>& lap,
                                int vertex_count, BranchGrads& grads);

Eigen::MatrixXd fusion_forward(const FusionParams& fusion, const Eigen::MatrixXd& cat,
                               const Eigen::SparseMatrix<double>& lap, FusionTape* tape);
Eigen::MatrixXd fusion_backward(const FusionParams& fusion, FusionTape& tape,
                                const Eigen::MatrixXd& dout, const Eigen::SparseMatrix<double>& lap,
                                FusionGrads& grads);

// z = mu + exp(logvar/2) .* eps with eps ~ N(0,1) from the given stream;
// a null rng means evaluation mode, z = mu.
Eigen::MatrixXd reparameterize(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar, Rng* rng,
                               Eigen::MatrixXd* eps_out = nullptr);

// Closed-form KL(q(z) || N(0,1)) summed over latent dims, averaged over the
// batch: 0.5 * sum(mu^2 + exp(logvar) - logvar - 1).
double kl_divergence(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar);

// ---------------------------------------------------------------------------
// Losses.

struct LossComponents {
    double rec = 0;     // fusion reconstruction (mean abs err)
    double dis = 0;     // disentangling loss (sum of the two cross terms)
    double id = 0;      // identity branch reconstruction
    double exp = 0;     // expression branch reconstruction
    double id_kld = 0;  // raw KL terms (unweighted)
    double exp_kld = 0;
    double alpha_id_kld = 0;
    double alpha_exp_kld = 0;

    double total() const {
        return rec + dis + id + exp + alpha_id_kld * id_kld + alpha_exp_kld * exp_kld;
    }
    bool finite() const;
    // Name of the first non-finite component, for error attribution.
    std::string first_non_finite() const;
};

// A batch of triplets in normalized feature space, stacked sample-major.
struct FeatureBatch {
    Eigen::MatrixXd input;      // (B*n) x 9
    Eigen::MatrixXd target_id;  // (B*n) x 9
    Eigen::MatrixXd target_exp; // (B*n) x 9
    int samples = 0;
};

enum class TrainStage { branches = 1, fusion = 2, full = 3 };

// Full loss of Eq.-style composition: branch reconstructions + KLs + fusion
// reconstruction + disentangling term, on one batch. `reparam_rng` null
// selects evaluation mode (z = mu). When `grads` is non-null, parameter
// gradients of the stage's objective are accumulated:
//   branches: d(L_id + L_exp + a*KLs) for branch tensors only
//   fusion:   d(L_rec) for fusion tensors only (branches frozen)
//   full:     d(L_total) for every tensor.
// Stage `branches` skips the fusion/disentangling passes entirely (their
// components are reported as 0); stage `fusion` skips the disentangling pass.
LossComponents loss_batch(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                          const FeatureBatch& batch, const Eigen::MatrixXd& rest_normed,
                          TrainStage stage, Rng* reparam_rng, double alpha_id, double alpha_exp,
                          ModelGrads* grads);

// Spec-level convenience: all components of the total loss for one triplet.
LossComponents loss_total(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                          const Triplet& triplet, const Eigen::MatrixXd& rest_raw, Rng* reparam_rng,
                          double alpha_id, double alpha_exp);

// ---------------------------------------------------------------------------
// Trainable-tensor enumeration (normalization stats excluded).

struct TensorView {
    std::string name;
    double* data;
    long rows, cols;
    long size() const { return rows * cols; }
};

std::vector<TensorView> tensor_views(BranchParams& branch, const std::string& prefix);
std::vector<TensorView> tensor_views(FusionParams& fusion, const std::string& prefix);
std::vector<TensorView> tensor_views(ModelParams& model);
std::vector<TensorView> tensor_views(BranchGrads& grads, const BranchParams& branch,
                                     const std::string& prefix);
std::vector<TensorView> tensor_views(FusionGrads& grads, const FusionParams& fusion,
                                     const std::string& prefix);
std::vector<TensorView> tensor_views(ModelGrads& grads, ModelParams& model);

// ---------------------------------------------------------------------------
// Application-level operations (evaluation mode, z = mu, raw DR units).

Eigen::VectorXd encode_identity_code(const ModelParams& model,
                                     const Eigen::SparseMatrix<double>& lap, const DRFeature& raw);
Eigen::VectorXd encode_expression_code(const ModelParams& model,
                                       const Eigen::SparseMatrix<double>& lap, const DRFeature& raw);
DRFeature decode_identity_feature(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                                  const Eigen::VectorXd& z);
DRFeature decode_expression_feature(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                                    const Eigen::VectorXd& z);
// Identity-first concatenation of the two raw branch outputs through fusion.
DRFeature fuse_features(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                        const DRFeature& id_hat, const DRFeature& exp_hat);

// Autoencode an input feature through both branches and fusion.
DRFeature reconstruct_feature(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                              const DRFeature& raw);

// Decomposition outputs for one mesh: decoded identity and expression meshes.
struct Decomposition {
    Mesh identity;
    Mesh expression;
};
Decomposition decompose_mesh(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                             const ReferenceFrame& ref, const Mesh& input);

// Expression transfer: z_exp from the source face, z_id from the target face.
Mesh transfer_expression(const ModelParams& model, const Eigen::SparseMatrix<double>& lap,
                         const ReferenceFrame& ref, const Mesh& source, const Mesh& target);

// Grid of meshes decoded from independent linear interpolations of the two
// codes; stride 0.25 yields a 5x5 grid. Row-major: identity axis outer.
std::vector<Mesh> interpolate_latent(const ModelParams& model,
                                     const Eigen::SparseMatrix<double>& lap,
                                     const ReferenceFrame& ref, const Mesh& m0, const Mesh& m1,
                                     double stride);

// ---------------------------------------------------------------------------
// Serialization (model.json + model.bin; see model_file.hpp).

void save_model(const ModelParams& model, const std::string& json_path,
                const nlohmann::json& extra_config = nlohmann::json::object());
ModelParams load_model(const std::string& json_path);

} // namespace drface
