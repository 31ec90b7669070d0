#include "drface/augmentation.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace drface {

std::vector<double> polar_to_cartesian(double radius, const std::vector<double>& angles) {
    const int m = static_cast<int>(angles.size()) + 1;
    std::vector<double> a(m);
    double sin_product = 1.0;
    for (int k = 0; k < m - 1; ++k) {
        a[k] = radius * sin_product * std::cos(angles[k]);
        sin_product *= std::sin(angles[k]);
    }
    a[m - 1] = radius * sin_product;
    return a;
}

PolarSample sample_weights(int m, Rng& rng) {
    if (m < 2) {
        throw DataError("sample_weights: m must be >= 2");
    }
    PolarSample s;
    s.radius = rng.uniform(0.5, 1.2);
    s.angles.resize(m - 1);
    for (auto& a : s.angles) {
        a = rng.uniform(0.0, std::numbers::pi / 2.0);
    }
    s.cartesian = polar_to_cartesian(s.radius, s.angles);
    return s;
}

DRFeature interpolate_features(const std::vector<const DRFeature*>& features,
                               const std::vector<double>& weights) {
    if (features.empty() || features.size() != weights.size()) {
        throw DataError("interpolate_features: features/weights size mismatch");
    }
    DRFeature out;
    out.reference_id = features.front()->reference_id;
    out.values = Eigen::MatrixXd::Zero(features.front()->values.rows(), 9);
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i]->reference_id != out.reference_id) {
            throw DataError("interpolate_features: features do not share a reference");
        }
        out.values += weights[i] * features[i]->values;
    }
    return out;
}

std::vector<DRFeature> augment_corpus(const std::vector<DRFeature>& features, int count, int m,
                                      Rng& rng) {
    if (static_cast<int>(features.size()) < m) {
        throw DataError("augment_corpus: need at least m=" + std::to_string(m) +
                        " source features, got " + std::to_string(features.size()));
    }
    std::vector<int> pool(features.size());
    std::iota(pool.begin(), pool.end(), 0);

    std::vector<DRFeature> out;
    out.reserve(count);
    for (int c = 0; c < count; ++c) {
        // Partial Fisher-Yates: the first m entries become the sample.
        for (int i = 0; i < m; ++i) {
            const int j = i + rng.uniform_int(static_cast<int>(pool.size()) - i);
            std::swap(pool[i], pool[j]);
        }
        const PolarSample weights = sample_weights(m, rng);
        std::vector<const DRFeature*> chosen(m);
        for (int i = 0; i < m; ++i) {
            chosen[i] = &features[pool[i]];
        }
        out.push_back(interpolate_features(chosen, weights.cartesian));
    }
    return out;
}

} // namespace drface
