#include "drface/synth.hpp"

#include "drface/rng.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace drface {

nlohmann::json CorpusSpec::to_json() const {
    return nlohmann::json{{"grid", grid},
                          {"identities", identities},
                          {"expressions", expressions},
                          {"holdout_identities", holdout_identities},
                          {"identity_amplitude", identity_amplitude},
                          {"expression_scale", expression_scale},
                          {"coupling", coupling},
                          {"seed", seed}};
}

CorpusSpec CorpusSpec::from_json(const nlohmann::json& j) {
    CorpusSpec s;
    s.grid = j.value("grid", s.grid);
    s.identities = j.value("identities", s.identities);
    s.expressions = j.value("expressions", s.expressions);
    s.holdout_identities = j.value("holdout_identities", s.holdout_identities);
    s.identity_amplitude = j.value("identity_amplitude", s.identity_amplitude);
    s.expression_scale = j.value("expression_scale", s.expression_scale);
    s.coupling = j.value("coupling", s.coupling);
    s.seed = j.value("seed", s.seed);
    return s;
}

namespace {

// Patch footprint: ~110 mm wide, ~150 mm tall, dome up to 50 mm deep. The
// profile is an ellipsoid cap, not a Gaussian bump: its curvature is bounded
// below everywhere, which keeps the 1-ring deformation-gradient fit
// well-conditioned out to the rim (flat rings amplify field curvature into
// the surface-normal column).
constexpr double kHalfWidth = 55.0;
constexpr double kHalfHeight = 75.0;
constexpr double kDomeHeight = 50.0;
constexpr double kCapSharpness = 0.45; // q in z ~ sqrt(1 - q r^2), r^2 <= 2

// Rim fold: the patch curls under near its boundary. Boundary vertices have
// half-rings; without the fold those rings are nearly planar and the 1-ring
// deformation-gradient fit turns field curvature into large spurious
// rotations.
constexpr double kSkirtDepth = 14.0; // mm
constexpr double kSkirtWidth = 0.09; // in (u, v) units

double dome_height(double u, double v) {
    const double r2 = u * u + v * v;
    const double floor_value = std::sqrt(1.0 - 2.0 * kCapSharpness);
    const double cap = kDomeHeight * (std::sqrt(1.0 - kCapSharpness * r2) - floor_value) /
                       (1.0 - floor_value);
    const double edge_distance = std::min(1.0 - std::abs(u), 1.0 - std::abs(v));
    return cap - kSkirtDepth * std::exp(-edge_distance / kSkirtWidth);
}

struct ExpressionCoeffs {
    double jaw = 0;
    double brow = 0;
    double smile = 0;
};

double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

// Deformation fields fade to zero toward the patch boundary and vanish
// outright on a rim margin. Boundary vertices only carry two-row half-rings,
// which are nearly coplanar no matter how the surface bends; their
// deformation-gradient fits are reliable only for near-rest fields.
constexpr double kRimMargin = 0.12;
constexpr double kRimRamp = 0.3;

double rim_fade(double u, double v) {
    const double edge_distance = std::min(1.0 - std::abs(u), 1.0 - std::abs(v));
    return smoothstep((edge_distance - kRimMargin) / kRimRamp);
}

// Localized warps in mesh coordinates. `scale` is the identity-modulated
// amplitude (1 + coupling * kappa for identity faces, 1 for the mean face);
// `fade` is the rim falloff at this vertex.
Eigen::Vector3d warp_vertex(const Eigen::Vector3d& p, const ExpressionCoeffs& e, double scale,
                            double fade) {
    Eigen::Vector3d q = p;

    // Jaw-open: hinge rotation about the x-axis line (y, z) = (-15, 15),
    // masked to the lower face. The rotation angle scales with the identity
    // coupling, so the interaction is trigonometric, not multilinear.
    if (e.jaw != 0.0) {
        const double hinge_y = -15.0, hinge_z = 15.0;
        const double mask = smoothstep((hinge_y - p.y()) / 50.0);
        const double angle = 0.5 * e.jaw * scale * mask * fade;
        const double dy = q.y() - hinge_y;
        const double dz = q.z() - hinge_z;
        q.y() = hinge_y + std::cos(angle) * dy + std::sin(angle) * dz;
        q.z() = hinge_z - std::sin(angle) * dy + std::cos(angle) * dz;
    }

    // Brow raise: Gaussian bump high on the patch.
    if (e.brow != 0.0) {
        const double dx = p.x(), dy = p.y() - 38.0;
        const double bump = std::exp(-(dx * dx + dy * dy) / (2.0 * 20.0 * 20.0));
        q += e.brow * scale * fade * bump * Eigen::Vector3d(0.0, 3.5, 2.5);
    }

    // Smile curl: two lobes at the mouth corners pulling up and outward.
    if (e.smile != 0.0) {
        for (const double side : {1.0, -1.0}) {
            const double dx = p.x() - side * 24.0, dy = p.y() + 28.0;
            const double lobe = std::exp(-(dx * dx + dy * dy) / (2.0 * 18.0 * 18.0));
            q += e.smile * scale * fade * lobe * Eigen::Vector3d(side * 1.5, 4.0, 1.5);
        }
    }
    return q;
}

} // namespace

Corpus generate_corpus(const CorpusSpec& spec) {
    if (spec.grid < 4 || spec.identities < 2 || spec.expressions < 2 ||
        spec.holdout_identities < 0 || spec.holdout_identities >= spec.identities) {
        throw DataError("generate_corpus: invalid corpus spec");
    }
    const int g = spec.grid;
    const int n = g * g;

    // Base dome patch.
    Eigen::MatrixXd base_vertices(n, 3);
    Eigen::MatrixXd uv(n, 2);
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            const int id = i * g + j;
            const double u = 2.0 * i / (g - 1) - 1.0;
            const double v = 2.0 * j / (g - 1) - 1.0;
            uv(id, 0) = u;
            uv(id, 1) = v;
            base_vertices(id, 0) = kHalfWidth * u;
            base_vertices(id, 1) = kHalfHeight * v;
            base_vertices(id, 2) = dome_height(u, v);
        }
    }
    Eigen::MatrixXi faces(2 * (g - 1) * (g - 1), 3);
    int f = 0;
    for (int i = 0; i + 1 < g; ++i) {
        for (int j = 0; j + 1 < g; ++j) {
            const int a = i * g + j, b = (i + 1) * g + j, c = (i + 1) * g + j + 1, d = i * g + j + 1;
            faces.row(f++) << a, b, c;
            faces.row(f++) << a, c, d;
        }
    }

    Rng rng(spec.seed);
    Rng id_rng = rng.split(11);
    Rng exp_rng = rng.split(12);

    // Identity fields: 4 radial-basis centers, 3-vector weight each. The
    // per-identity weights come from a 4-dimensional latent through one fixed
    // random mixing matrix, so all identities (held-out ones included) live
    // on a low-dimensional manifold that a dozen training samples cover.
    // Weights are centered so the base mesh is the mean neutral face.
    const Eigen::Vector2d centers[4] = {{-0.45, -0.45}, {-0.45, 0.45}, {0.45, -0.45}, {0.45, 0.45}};
    constexpr double kRbfSigma = 0.6;
    constexpr int kIdentityLatent = 4;
    const int identities = spec.identities;
    Eigen::MatrixXd mixing(12, kIdentityLatent);
    for (long k = 0; k < mixing.size(); ++k) {
        mixing.data()[k] = id_rng.normal();
    }
    mixing *= std::sqrt(3.0 / kIdentityLatent); // unit-ish variance per weight entry
    std::vector<std::array<Eigen::Vector3d, 4>> weights(identities);
    // Per-identity shift of the radial-basis centers. A translated bump is
    // not in the linear span of other translated bumps, so identity
    // variation cannot be captured exactly by any fixed linear basis — only
    // amplitudes live in a linear space.
    std::vector<Eigen::Vector2d> center_shift(identities);
    // Per-identity masked rotation fields (brow tilt about x, left/right
    // cheek twists about y). In deformation-feature space a rotation field
    // is linear in its angle; in vertex-position space it is trigonometric,
    // and the pairwise products of three independent angles are exactly the
    // kind of identity variation a linear/bilinear basis cannot span.
    Eigen::MatrixXd tilt(identities, 3);
    Eigen::VectorXd kappa(identities);
    for (int i = 0; i < identities; ++i) {
        Eigen::VectorXd latent(kIdentityLatent);
        for (int k = 0; k < kIdentityLatent; ++k) {
            latent(k) = id_rng.normal();
        }
        const Eigen::VectorXd flat = mixing * latent * spec.identity_amplitude;
        for (int c = 0; c < 4; ++c) {
            weights[i][c] = flat.segment(3 * c, 3);
        }
        center_shift[i] = {id_rng.uniform(-0.15, 0.15), id_rng.uniform(-0.15, 0.15)};
        for (int t = 0; t < 3; ++t) {
            tilt(i, t) = id_rng.uniform(-0.35, 0.35);
        }
        kappa(i) = id_rng.uniform(-1.5, 1.5);
    }
    kappa.array() -= kappa.mean();

    // Expression coefficient table; index 0 stays neutral.
    std::vector<ExpressionCoeffs> coeffs(spec.expressions);
    for (int e = 1; e < spec.expressions; ++e) {
        coeffs[e].jaw = exp_rng.uniform(0.25, 1.2) * spec.expression_scale;
        coeffs[e].brow = 1.6 * exp_rng.uniform(-1.0, 1.0) * spec.expression_scale;
        coeffs[e].smile = 1.6 * exp_rng.uniform(-1.0, 1.0) * spec.expression_scale;
    }

    Corpus corpus{spec, Mesh(base_vertices, faces), {}, {}, {}, {}};

    auto identity_vertices = [&](int i) {
        Eigen::MatrixXd v = base_vertices;
        for (int row = 0; row < n; ++row) {
            const double fade = rim_fade(uv(row, 0), uv(row, 1));
            for (int c = 0; c < 4; ++c) {
                const Eigen::Vector2d center = centers[c] + center_shift[i];
                const double phi = std::exp(-(uv.row(row).transpose() - center).squaredNorm() /
                                            (2.0 * kRbfSigma * kRbfSigma));
                v.row(row) += fade * phi * weights[i][c].transpose();
            }
            // Brow tilt about the x axis, masked above the brow line.
            {
                const double mask = smoothstep((v(row, 1) - 22.0) / 28.0) * fade;
                const double angle = tilt(i, 0) * mask;
                const double hinge_y = 22.0, hinge_z = 18.0;
                const double dy = v(row, 1) - hinge_y;
                const double dz = v(row, 2) - hinge_z;
                v(row, 1) = hinge_y + std::cos(angle) * dy + std::sin(angle) * dz;
                v(row, 2) = hinge_z - std::sin(angle) * dy + std::cos(angle) * dz;
            }
            // Cheek twists about the y axis, masked to each side.
            for (const int side : {1, 2}) {
                const double sign = side == 1 ? 1.0 : -1.0;
                const double mask = smoothstep((sign * v(row, 0) - 12.0) / 25.0) * fade;
                const double angle = tilt(i, side) * mask;
                const double hinge_x = sign * 10.0, hinge_z = 15.0;
                const double dx = v(row, 0) - hinge_x;
                const double dz = v(row, 2) - hinge_z;
                v(row, 0) = hinge_x + std::cos(angle) * dx + std::sin(angle) * dz;
                v(row, 2) = hinge_z - std::sin(angle) * dx + std::cos(angle) * dz;
            }
        }
        return v;
    };

    // Center the neutral family exactly: subtract the mean identity
    // displacement so the base mesh is the mean neutral face even with the
    // nonlinear (rotational) identity components.
    std::vector<Eigen::MatrixXd> neutrals;
    neutrals.reserve(identities);
    Eigen::MatrixXd mean_displacement = Eigen::MatrixXd::Zero(n, 3);
    for (int i = 0; i < identities; ++i) {
        neutrals.push_back(identity_vertices(i));
        mean_displacement += neutrals.back() - base_vertices;
    }
    mean_displacement /= static_cast<double>(identities);
    for (auto& neutral : neutrals) {
        neutral -= mean_displacement;
    }

    // Every mesh is re-centered on the base centroid, mirroring the rigid
    // alignment face corpora ship with. The deformation features are
    // translation-invariant and the decode gauge pins the centroid, so an
    // aligned corpus makes encode/decode and all E_avd comparisons exact.
    const Eigen::RowVector3d base_centroid = base_vertices.colwise().mean();
    auto centered = [&](Eigen::MatrixXd v) {
        v.rowwise() += base_centroid - v.colwise().mean().eval();
        return v;
    };

    corpus.meshes.reserve(identities);
    for (int i = 0; i < identities; ++i) {
        const Eigen::MatrixXd& neutral = neutrals[i];
        const double scale = 1.0 + spec.coupling * kappa(i);
        std::vector<Mesh> row;
        row.reserve(spec.expressions);
        for (int e = 0; e < spec.expressions; ++e) {
            Eigen::MatrixXd v(n, 3);
            for (int r = 0; r < n; ++r) {
                v.row(r) = warp_vertex(neutral.row(r).transpose(), coeffs[e], scale,
                                       rim_fade(uv(r, 0), uv(r, 1)))
                               .transpose();
            }
            row.emplace_back(centered(std::move(v)), faces);
        }
        corpus.meshes.push_back(std::move(row));
    }

    corpus.mean_expressions.reserve(spec.expressions);
    for (int e = 0; e < spec.expressions; ++e) {
        Eigen::MatrixXd v(n, 3);
        for (int r = 0; r < n; ++r) {
            v.row(r) = warp_vertex(base_vertices.row(r).transpose(), coeffs[e], 1.0,
                                   rim_fade(uv(r, 0), uv(r, 1)))
                           .transpose();
        }
        corpus.mean_expressions.emplace_back(centered(std::move(v)), faces);
    }

    for (int i = 0; i < identities - spec.holdout_identities; ++i) {
        corpus.train_identities.push_back(i);
    }
    for (int i = identities - spec.holdout_identities; i < identities; ++i) {
        corpus.test_identities.push_back(i);
    }
    return corpus;
}

TripletSets build_triplets(const Corpus& corpus, const ReferenceFrame& ref) {
    TripletSets sets;
    std::vector<DRFeature> mean_expression_features;
    mean_expression_features.reserve(corpus.mean_expressions.size());
    for (const auto& m : corpus.mean_expressions) {
        mean_expression_features.push_back(ref.encode(m));
    }
    auto emit = [&](const std::vector<int>& ids, std::vector<Triplet>& out) {
        for (int i : ids) {
            const DRFeature identity_feature = ref.encode(corpus.meshes[i][0]);
            for (int e = 0; e < static_cast<int>(corpus.meshes[i].size()); ++e) {
                Triplet t;
                t.input = ref.encode(corpus.meshes[i][e]);
                t.identity = identity_feature;
                t.expression = mean_expression_features[e];
                t.identity_index = i;
                t.expression_index = e;
                out.push_back(std::move(t));
            }
        }
    };
    emit(corpus.train_identities, sets.train);
    emit(corpus.test_identities, sets.test);
    return sets;
}

} // namespace drface
