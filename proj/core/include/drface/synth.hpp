#pragma once

#include "drface/deformation.hpp"
#include "drface/mesh.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace drface {

// Deterministic synthetic face-like corpus: an elliptic dome patch deformed
// by smooth per-identity radial-basis fields and localized expression warps
// (jaw-open hinge rotation, brow raise, smile curl). Expression amplitude is
// modulated per identity by 1 + coupling * kappa_i, which makes the
// identity/expression interaction nonlinear — a bilinear model cannot fit the
// grid exactly, a nonlinear one can.
struct CorpusSpec {
    int grid = 32; // vertices per side; n = grid^2
    int identities = 16;
    int expressions = 12; // expression 0 is neutral
    int holdout_identities = 2;
    double identity_amplitude = 3.0; // mm
    double expression_scale = 1.0;
    double coupling = 0.2;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static CorpusSpec from_json(const nlohmann::json& j);
};

struct Corpus {
    CorpusSpec spec;
    Mesh base;                             // mean neutral face; the DR reference
    std::vector<std::vector<Mesh>> meshes; // [identity][expression]; (i,0) is i's neutral
    std::vector<Mesh> mean_expressions;    // expression e applied to the base mesh
    std::vector<int> train_identities;
    std::vector<int> test_identities;
};

Corpus generate_corpus(const CorpusSpec& spec);

struct TripletSets {
    std::vector<Triplet> train;
    std::vector<Triplet> test;
};

// DR-encodes the grid into training triplets (G, G_id, G_exp) split by the
// corpus's identity holdout.
TripletSets build_triplets(const Corpus& corpus, const ReferenceFrame& ref);

} // namespace drface
