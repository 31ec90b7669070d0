#pragma once

#include "drface/deformation.hpp"
#include "drface/rng.hpp"

#include <vector>

namespace drface {

// One draw of interpolation weights in polar coordinates: a radius in
// [0.5, 1.2] and m-1 angles in [0, pi/2], converted to first-orthant
// Cartesian weights with sum(a_i^2) = r^2.
struct PolarSample {
    double radius = 0;
    std::vector<double> angles;    // m-1
    std::vector<double> cartesian; // m, all >= 0
};

// First-orthant polar-to-Cartesian conversion:
//   a_1 = r cos t_1,  a_k = r (prod_{j<k} sin t_j) cos t_k,  a_m = r prod sin t_j.
std::vector<double> polar_to_cartesian(double radius, const std::vector<double>& angles);

PolarSample sample_weights(int m, Rng& rng);

// sum_i weights[i] * features[i] on the raw feature values.
DRFeature interpolate_features(const std::vector<const DRFeature*>& features,
                               const std::vector<double>& weights);

// Bootstrap-interpolation identity augmentation: each output draws m source
// features uniformly without replacement, draws weights, and emits
// sum_i a_i * DR_i on the raw features. Defaults mirror the published run
// (m = 5, 2000 outputs).
std::vector<DRFeature> augment_corpus(const std::vector<DRFeature>& features, int count, int m,
                                      Rng& rng);

} // namespace drface
