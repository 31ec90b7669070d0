#include "drface/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace drface {

double e_avd(const Mesh& a, const Mesh& b) {
    if (a.vertex_count() != b.vertex_count()) {
        throw DataError("e_avd: vertex count mismatch");
    }
    return (a.vertices() - b.vertices()).rowwise().norm().mean();
}

double e_sed(const Mesh& original, const Mesh& reconstructed) {
    if (original.vertex_count() != reconstructed.vertex_count() ||
        original.faces() != reconstructed.faces()) {
        throw DataError("e_sed: meshes do not share connectivity");
    }
    const auto& v = original.vertices();
    const auto& w = reconstructed.vertices();
    const int n = original.vertex_count();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& ring = original.neighborhoods()[i];
        // Length-weighted mean of the relative edge differences.
        double weight_sum = 0.0, weighted_ed = 0.0;
        std::vector<double> lengths(ring.size()), eds(ring.size());
        for (std::size_t k = 0; k < ring.size(); ++k) {
            const int j = ring[k];
            const double len = (v.row(i) - v.row(j)).norm();
            if (len <= 0.0) {
                throw DataError("e_sed: zero-length edge (" + std::to_string(i) + "," +
                                std::to_string(j) + ") in the original mesh");
            }
            const double len_rec = (w.row(i) - w.row(j)).norm();
            lengths[k] = len;
            eds[k] = std::abs((len - len_rec) / len);
            weight_sum += len;
            weighted_ed += len * eds[k];
        }
        const double mean_ed = weighted_ed / weight_sum;
        double deviation = 0.0;
        for (std::size_t k = 0; k < ring.size(); ++k) {
            deviation += lengths[k] * (eds[k] - mean_ed) * (eds[k] - mean_ed);
        }
        total += std::sqrt(deviation / weight_sum);
    }
    return total / n;
}

double decomposition_std(const std::vector<Mesh>& meshes) {
    if (meshes.size() < 2) {
        throw DataError("decomposition_std: need at least 2 meshes");
    }
    const int n = meshes.front().vertex_count();
    for (const auto& m : meshes) {
        if (m.vertex_count() != n || m.faces() != meshes.front().faces()) {
            throw DataError("decomposition_std: meshes do not share connectivity");
        }
    }
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, 3);
    for (const auto& m : meshes) {
        mean += m.vertices();
    }
    mean /= static_cast<double>(meshes.size());
    Eigen::VectorXd variance = Eigen::VectorXd::Zero(n);
    for (const auto& m : meshes) {
        variance += (m.vertices() - mean).rowwise().squaredNorm();
    }
    variance /= static_cast<double>(meshes.size());
    return variance.array().sqrt().mean();
}

double MetricReport::mean() const {
    if (per_mesh.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& [id, v] : per_mesh) {
        sum += v;
    }
    return sum / static_cast<double>(per_mesh.size());
}

double MetricReport::median() const {
    if (per_mesh.empty()) {
        return 0.0;
    }
    std::vector<double> values;
    values.reserve(per_mesh.size());
    for (const auto& [id, v] : per_mesh) {
        values.push_back(v);
    }
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) {
        return values[mid];
    }
    return 0.5 * (values[mid - 1] + values[mid]);
}

} // namespace drface
