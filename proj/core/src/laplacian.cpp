#include "drface/laplacian.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace drface {

CotanWeights cotangent_weights(const Mesh& mesh) {
    const auto& v = mesh.vertices();
    const auto& f = mesh.faces();
    std::map<std::pair<int, int>, double> half_sums;
    for (int t = 0; t < f.rows(); ++t) {
        const Eigen::Vector3d p[3] = {v.row(f(t, 0)), v.row(f(t, 1)), v.row(f(t, 2))};
        for (int corner = 0; corner < 3; ++corner) {
            const Eigen::Vector3d u = p[(corner + 1) % 3] - p[corner];
            const Eigen::Vector3d w = p[(corner + 2) % 3] - p[corner];
            const double cross = u.cross(w).norm();
            if (cross < 1e-12 * u.norm() * w.norm()) {
                throw DataError("cotangent_weights: face " + std::to_string(t) +
                                " has zero area (cotangent undefined)");
            }
            const double cot = u.dot(w) / cross;
            const int i = f(t, (corner + 1) % 3);
            const int j = f(t, (corner + 2) % 3);
            half_sums[{std::min(i, j), std::max(i, j)}] += 0.5 * cot;
        }
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(half_sums.size() * 2);
    for (const auto& [edge, sum] : half_sums) {
        const double w = std::max(sum, kCotanClamp);
        triplets.emplace_back(edge.first, edge.second, w);
        triplets.emplace_back(edge.second, edge.first, w);
    }
    CotanWeights out;
    out.weights.resize(mesh.vertex_count(), mesh.vertex_count());
    out.weights.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

Eigen::SparseMatrix<double> normalized_laplacian(const Eigen::SparseMatrix<double>& adjacency) {
    const int n = static_cast<int>(adjacency.rows());
    Eigen::VectorXd degree = adjacency * Eigen::VectorXd::Ones(n);
    Eigen::VectorXd inv_sqrt(n);
    for (int i = 0; i < n; ++i) {
        if (degree(i) <= 0.0) {
            throw DataError("normalized_laplacian: vertex " + std::to_string(i) + " is isolated");
        }
        inv_sqrt(i) = 1.0 / std::sqrt(degree(i));
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(adjacency.nonZeros() + n);
    for (int k = 0; k < adjacency.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(adjacency, k); it; ++it) {
            triplets.emplace_back(it.row(), it.col(), -inv_sqrt(it.row()) * it.value() * inv_sqrt(it.col()));
        }
    }
    for (int i = 0; i < n; ++i) {
        triplets.emplace_back(i, i, 1.0);
    }
    Eigen::SparseMatrix<double> lap(n, n);
    lap.setFromTriplets(triplets.begin(), triplets.end());
    return lap;
}

Eigen::SparseMatrix<double> normalized_laplacian(const Mesh& mesh) {
    return normalized_laplacian(mesh.adjacency());
}

Eigen::SparseMatrix<double> scaled_laplacian(const Eigen::SparseMatrix<double>& laplacian,
                                             double lambda_max) {
    if (!(lambda_max > 0.0)) {
        throw DataError("scaled_laplacian: lambda_max must be positive");
    }
    const int n = static_cast<int>(laplacian.rows());
    Eigen::SparseMatrix<double> identity(n, n);
    identity.setIdentity();
    Eigen::SparseMatrix<double> scaled = (2.0 / lambda_max) * laplacian - identity;
    scaled.prune(0.0);
    return scaled;
}

double estimate_lambda_max(const Eigen::SparseMatrix<double>& laplacian, int max_iters, double tol) {
    const int n = static_cast<int>(laplacian.rows());
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    // Deterministic tilt so we do not start orthogonal to the top eigenvector.
    for (int i = 0; i < n; ++i) {
        x(i) += 1e-3 * std::sin(static_cast<double>(i + 1));
    }
    x.normalize();
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd y = laplacian * x;
        const double next = x.dot(y);
        const double norm = y.norm();
        if (norm == 0.0) {
            return 0.0;
        }
        x = y / norm;
        if (it > 0 && std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
            return next;
        }
        lambda = next;
    }
    return lambda;
}

bool is_symmetric(const Eigen::SparseMatrix<double>& m, double tol) {
    if (m.rows() != m.cols()) {
        return false;
    }
    Eigen::SparseMatrix<double> diff = Eigen::SparseMatrix<double>(m.transpose()) - m;
    for (int k = 0; k < diff.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it) {
            if (std::abs(it.value()) > tol) {
                return false;
            }
        }
    }
    return true;
}

} // namespace drface
