#include "drface/deformation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace drface {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d k;
    k << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return k;
}

} // namespace

Eigen::RowVectorXd rest_feature_row() {
    Eigen::RowVectorXd row(9);
    row << 0, 0, 0, 1, 0, 0, 1, 0, 1;
    return row;
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r) {
    const double cos_theta = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    // w = 2 sin(theta) * axis
    const Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    if (theta < 1e-7) {
        return 0.5 * (1.0 + theta * theta / 6.0) * w;
    }
    if (theta > std::numbers::pi - 1e-4) {
        // sin(theta) ~ 0: recover the axis from the symmetric part
        // R + R^T = 2 cos(theta) I + 2 (1 - cos(theta)) a a^T.
        const Eigen::Matrix3d outer =
            (0.5 * (r + r.transpose()) - cos_theta * Eigen::Matrix3d::Identity()) / (1.0 - cos_theta);
        int col = 0;
        outer.diagonal().maxCoeff(&col);
        Eigen::Vector3d axis = outer.col(col) / std::sqrt(outer(col, col));
        if (axis.dot(w) < 0.0) {
            axis = -axis;
        }
        return theta * axis;
    }
    return (theta / (2.0 * std::sin(theta))) * w;
}

Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& v) {
    const double theta = v.norm();
    const Eigen::Matrix3d k = skew(v);
    double a, b; // sin(t)/t and (1-cos(t))/t^2
    if (theta < 1e-4) {
        const double t2 = theta * theta;
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

void polar_decompose(const Eigen::Matrix3d& t, Eigen::Matrix3d& rotation,
                     Eigen::Matrix3d& scale_shear) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(t, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d& u = svd.matrixU();
    const Eigen::Matrix3d& v = svd.matrixV();
    const Eigen::Vector3d& s = svd.singularValues(); // descending
    const double flip = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    rotation = u * Eigen::Vector3d(1, 1, flip).asDiagonal() * v.transpose();
    scale_shear = v * Eigen::Vector3d(s(0), s(1), flip * s(2)).asDiagonal() * v.transpose();
}

ReferenceFrame::ReferenceFrame(Mesh reference)
    : mesh_(std::move(reference)), weights_(cotangent_weights(mesh_)), id_(mesh_.content_hash()) {
    const int n = mesh_.vertex_count();
    // Normal equations of the decode energy: A = 2 L_w (cotan-weighted graph
    // Laplacian). Vertex 0 is eliminated to fix the translation gauge; the
    // final solution is re-centered on the reference centroid.
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(weights_.weights.nonZeros() * 2);
    for (int i = 0; i < n; ++i) {
        if (i == 0) {
            continue;
        }
        double diag = 0.0;
        for (int j : mesh_.neighborhoods()[i]) {
            const double c = 2.0 * weights_.at(i, j);
            diag += c;
            if (j != 0) {
                triplets.emplace_back(i - 1, j - 1, -c);
            }
        }
        triplets.emplace_back(i - 1, i - 1, diag);
    }
    Eigen::SparseMatrix<double> reduced(n - 1, n - 1);
    reduced.setFromTriplets(triplets.begin(), triplets.end());
    solver_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    solver_->compute(reduced);
    if (solver_->info() != Eigen::Success) {
        throw DataError("ReferenceFrame: decode system factorization failed (singular system)");
    }
    // The exact zero-deformation feature; decode(rest) reproduces the
    // reference to solver precision.
    rest_feature_.reference_id = id_;
    rest_feature_.values = rest_feature_row().replicate(n, 1);
}

std::vector<Eigen::Matrix3d> ReferenceFrame::deformation_gradients(const Mesh& deformed) const {
    const int n = mesh_.vertex_count();
    if (deformed.vertex_count() != n || deformed.faces() != mesh_.faces()) {
        throw DataError("deformation_gradients: deformed mesh does not share reference connectivity");
    }
    const auto& p = mesh_.vertices();
    const auto& q = deformed.vertices();
    std::vector<Eigen::Matrix3d> gradients(n);
    for (int i = 0; i < n; ++i) {
        Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
        Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
        for (int j : mesh_.neighborhoods()[i]) {
            const double c = weights_.at(i, j);
            const Eigen::Vector3d d = (p.row(i) - p.row(j)).transpose();
            const Eigen::Vector3d d_prime = (q.row(i) - q.row(j)).transpose();
            gram += c * d * d.transpose();
            cross += c * d_prime * d.transpose();
        }
        const double trace = gram.trace();
        if (trace <= 0.0) {
            throw DataError("deformation_gradients: vertex " + std::to_string(i) +
                            " has an all-zero 1-ring (coincident vertices)");
        }
        gram += (1e-6 * trace) * Eigen::Matrix3d::Identity();
        gradients[i] = cross * gram.inverse();
    }
    return gradients;
}

DRFeature ReferenceFrame::encode(const Mesh& deformed) const {
    const auto gradients = deformation_gradients(deformed);
    DRFeature out;
    out.reference_id = id_;
    out.values.resize(mesh_.vertex_count(), 9);
    for (int i = 0; i < mesh_.vertex_count(); ++i) {
        Eigen::Matrix3d r, s;
        polar_decompose(gradients[i], r, s);
        const Eigen::Vector3d log = rotation_log(r);
        out.values(i, 0) = log.x();
        out.values(i, 1) = log.y();
        out.values(i, 2) = log.z();
        out.values(i, 3) = s(0, 0);
        out.values(i, 4) = s(0, 1);
        out.values(i, 5) = s(0, 2);
        out.values(i, 6) = s(1, 1);
        out.values(i, 7) = s(1, 2);
        out.values(i, 8) = s(2, 2);
    }
    return out;
}

Mesh ReferenceFrame::decode(const DRFeature& feature) const {
    if (feature.reference_id != id_) {
        throw DataError("decode: feature reference id does not match this reference frame");
    }
    const int n = mesh_.vertex_count();
    if (feature.vertex_count() != n) {
        throw DataError("decode: feature has wrong vertex count");
    }
    std::vector<Eigen::Matrix3d> transforms(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d log(feature.values(i, 0), feature.values(i, 1), feature.values(i, 2));
        Eigen::Matrix3d s;
        s << feature.values(i, 3), feature.values(i, 4), feature.values(i, 5),
             feature.values(i, 4), feature.values(i, 6), feature.values(i, 7),
             feature.values(i, 5), feature.values(i, 7), feature.values(i, 8);
        transforms[i] = rotation_exp(log) * s;
    }
    // Right-hand side of the stationarity conditions:
    // b_i = sum_j c_ij (T_i + T_j) (p_i - p_j).
    const auto& p = mesh_.vertices();
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
    for (int i = 0; i < n; ++i) {
        for (int j : mesh_.neighborhoods()[i]) {
            const double c = weights_.at(i, j);
            const Eigen::Vector3d d = (p.row(i) - p.row(j)).transpose();
            rhs.row(i) += (c * ((transforms[i] + transforms[j]) * d)).transpose();
        }
    }
    // Vertex 0 anchored at the origin; solve the reduced system per axis.
    Eigen::MatrixXd solution(n, 3);
    solution.row(0).setZero();
    solution.bottomRows(n - 1) = solver_->solve(rhs.bottomRows(n - 1));
    if (solver_->info() != Eigen::Success) {
        throw DataError("decode: sparse solve failed");
    }
    // Translation gauge: output centroid equals the reference centroid.
    const Eigen::RowVector3d shift =
        mesh_.centroid().transpose() - solution.colwise().mean();
    solution.rowwise() += shift;
    return mesh_.with_vertices(std::move(solution));
}

void save_drf(const DRFeature& feature, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("save_drf: cannot open " + path + " for writing");
    }
    char header[256];
    std::snprintf(header, sizeof header,
                  "{\"magic\":\"DRF1\",\"n\":%d,\"d\":9,\"dtype\":\"f32\",\"ref\":\"%s\"}\n",
                  feature.vertex_count(), feature.reference_id.c_str());
    out << header;
    std::vector<float> row(9);
    for (int i = 0; i < feature.vertex_count(); ++i) {
        for (int c = 0; c < 9; ++c) {
            row[c] = static_cast<float>(feature.values(i, c));
        }
        out.write(reinterpret_cast<const char*>(row.data()), 9 * sizeof(float));
    }
    if (!out) {
        throw DataError("save_drf: write failed for " + path);
    }
}

DRFeature load_drf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("load_drf: cannot open " + path);
    }
    std::string header;
    if (!std::getline(in, header)) {
        throw DataError("load_drf: " + path + ": missing header line");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("load_drf: " + path + ": bad header: " + e.what());
    }
    if (j.value("magic", "") != std::string("DRF1")) {
        throw DataError("load_drf: " + path + ": not a DRF1 file");
    }
    if (j.value("d", 0) != 9 || j.value("dtype", "") != std::string("f32")) {
        throw DataError("load_drf: " + path + ": unsupported layout");
    }
    const int n = j.value("n", -1);
    if (n <= 0) {
        throw DataError("load_drf: " + path + ": bad vertex count");
    }
    DRFeature out;
    out.reference_id = j.value("ref", "");
    out.values.resize(n, 9);
    std::vector<float> row(9);
    for (int i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), 9 * sizeof(float));
        if (!in) {
            throw DataError("load_drf: " + path + ": truncated payload at row " + std::to_string(i));
        }
        for (int c = 0; c < 9; ++c) {
            out.values(i, c) = static_cast<double>(row[c]);
        }
    }
    return out;
}

} // namespace drface
