#include "drface/bilinear.hpp"

#include "drface/model_file.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace drface {

namespace {

Eigen::VectorXd stack_vertices(const Mesh& mesh) {
    const auto& v = mesh.vertices();
    Eigen::VectorXd out(3 * v.rows());
    for (int i = 0; i < v.rows(); ++i) {
        out(3 * i + 0) = v(i, 0);
        out(3 * i + 1) = v(i, 1);
        out(3 * i + 2) = v(i, 2);
    }
    return out;
}

Eigen::MatrixXd unstack_vertices(const Eigen::VectorXd& x) {
    Eigen::MatrixXd v(x.size() / 3, 3);
    for (int i = 0; i < v.rows(); ++i) {
        v(i, 0) = x(3 * i + 0);
        v(i, 1) = x(3 * i + 1);
        v(i, 2) = x(3 * i + 2);
    }
    return v;
}

// Top-k left singular vectors of `m` via the (small) Gram matrix; columns
// ordered by descending singular value.
Eigen::MatrixXd top_left_singular(const Eigen::MatrixXd& m, int k) {
    const Eigen::MatrixXd gram = m * m.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    // Eigen sorts ascending; take the last k columns reversed.
    Eigen::MatrixXd u(m.rows(), k);
    for (int c = 0; c < k; ++c) {
        u.col(c) = eig.eigenvectors().col(static_cast<int>(m.rows()) - 1 - c);
    }
    return u;
}

// A(alpha_exp): (3n) x k_id matrix with columns core[:, a, :] * alpha_exp.
Eigen::MatrixXd contract_exp(const CoreTensor& core, const Eigen::VectorXd& alpha_exp) {
    Eigen::MatrixXd a(core.core.rows(), core.k_id);
    for (int i = 0; i < core.k_id; ++i) {
        a.col(i) = core.core.middleCols(i * core.k_exp, core.k_exp) * alpha_exp;
    }
    return a;
}

// B(alpha_id): (3n) x k_exp matrix with columns core[:, :, b]^T alpha_id.
Eigen::MatrixXd contract_id(const CoreTensor& core, const Eigen::VectorXd& alpha_id) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(core.core.rows(), core.k_exp);
    for (int a = 0; a < core.k_id; ++a) {
        b += alpha_id(a) * core.core.middleCols(a * core.k_exp, core.k_exp);
    }
    return b;
}

// Minimum-norm least squares via the SVD. Near-zero trailing singular values
// are expected (a truncated core can carry almost-empty slices); only a
// completely degenerate subproblem is an error.
Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs,
                                    const char* what) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    if (svd.rank() == 0) {
        throw DataError(std::string("als_fit: singular ") + what +
                        " subproblem (degenerate core slice)");
    }
    return svd.solve(rhs);
}

} // namespace

CoreTensor build_core(const std::vector<std::vector<Mesh>>& grid, int k_id, int k_exp) {
    if (grid.empty() || grid.front().empty()) {
        throw DataError("build_core: empty corpus grid");
    }
    const int identities = static_cast<int>(grid.size());
    const int expressions = static_cast<int>(grid.front().size());
    const Mesh& first = grid.front().front();
    const int n = first.vertex_count();
    for (const auto& row : grid) {
        if (static_cast<int>(row.size()) != expressions) {
            throw DataError("build_core: incomplete identity x expression grid");
        }
        for (const auto& mesh : row) {
            if (mesh.vertex_count() != n || mesh.faces() != first.faces()) {
                throw DataError("build_core: grid meshes do not share connectivity");
            }
        }
    }
    if (k_id < 1 || k_id > identities) {
        throw DataError("build_core: k_id exceeds the identity mode rank");
    }
    if (k_exp < 1 || k_exp > expressions) {
        throw DataError("build_core: k_exp exceeds the expression mode rank");
    }

    // Data tensor as a (3n) x (I*E) matrix, column index i * E + e.
    Eigen::MatrixXd data(3 * n, identities * expressions);
    for (int i = 0; i < identities; ++i) {
        for (int e = 0; e < expressions; ++e) {
            data.col(i * expressions + e) = stack_vertices(grid[i][e]);
        }
    }

    // Mode-2 (identity) and mode-3 (expression) unfoldings.
    Eigen::MatrixXd mode2(identities, 3 * n * expressions);
    for (int i = 0; i < identities; ++i) {
        for (int e = 0; e < expressions; ++e) {
            mode2.block(i, static_cast<long>(e) * 3 * n, 1, 3 * n) =
                data.col(i * expressions + e).transpose();
        }
    }
    Eigen::MatrixXd mode3(expressions, 3 * n * identities);
    for (int e = 0; e < expressions; ++e) {
        for (int i = 0; i < identities; ++i) {
            mode3.block(e, static_cast<long>(i) * 3 * n, 1, 3 * n) =
                data.col(i * expressions + e).transpose();
        }
    }
    const Eigen::MatrixXd u2 = top_left_singular(mode2, k_id);
    const Eigen::MatrixXd u3 = top_left_singular(mode3, k_exp);

    // core[:, a, b] = sum_i sum_e data[:, i, e] u2(i, a) u3(e, b).
    // First contract identities, then expressions.
    Eigen::MatrixXd partial(3 * n, static_cast<long>(k_id) * expressions); // index a * E + e
    for (int e = 0; e < expressions; ++e) {
        Eigen::MatrixXd slice(3 * n, identities);
        for (int i = 0; i < identities; ++i) {
            slice.col(i) = data.col(i * expressions + e);
        }
        const Eigen::MatrixXd contracted = slice * u2; // (3n) x k_id
        for (int a = 0; a < k_id; ++a) {
            partial.col(static_cast<long>(a) * expressions + e) = contracted.col(a);
        }
    }
    CoreTensor core;
    core.core.resize(3 * n, static_cast<long>(k_id) * k_exp);
    for (int a = 0; a < k_id; ++a) {
        core.core.middleCols(static_cast<long>(a) * k_exp, k_exp) =
            partial.middleCols(static_cast<long>(a) * expressions, expressions) * u3;
    }
    core.id_coeffs = u2;
    core.exp_coeffs = u3;
    core.faces = first.faces();
    core.k_id = k_id;
    core.k_exp = k_exp;
    core.vertex_count = n;
    return core;
}

Mesh bilinear_reconstruct(const CoreTensor& core, const Eigen::VectorXd& alpha_id,
                          const Eigen::VectorXd& alpha_exp) {
    if (alpha_id.size() != core.k_id || alpha_exp.size() != core.k_exp) {
        throw DataError("bilinear_reconstruct: coefficient dimension mismatch");
    }
    Eigen::VectorXd weights(core.k_id * core.k_exp);
    for (int a = 0; a < core.k_id; ++a) {
        weights.segment(static_cast<long>(a) * core.k_exp, core.k_exp) = alpha_id(a) * alpha_exp;
    }
    return Mesh(unstack_vertices(core.core * weights), core.faces);
}

BilinearFit als_fit(const CoreTensor& core, const Mesh& mesh, int max_iter, double tol,
                    const Eigen::VectorXd* init_alpha_exp) {
    if (mesh.vertex_count() != core.vertex_count || mesh.faces() != core.faces) {
        throw DataError("als_fit: mesh does not share the corpus connectivity");
    }
    const Eigen::VectorXd target = stack_vertices(mesh);
    const double rms_scale = 1.0 / std::sqrt(static_cast<double>(core.vertex_count));

    BilinearFit fit;
    if (init_alpha_exp) {
        if (init_alpha_exp->size() != core.k_exp) {
            throw DataError("als_fit: init_alpha_exp dimension mismatch");
        }
        fit.alpha_exp = *init_alpha_exp;
    } else {
        fit.alpha_exp = core.exp_coeffs.colwise().mean().transpose();
    }
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd a_id = contract_exp(core, fit.alpha_exp);
        fit.alpha_id = solve_least_squares(a_id, target, "identity");
        const Eigen::MatrixXd a_exp = contract_id(core, fit.alpha_id);
        fit.alpha_exp = solve_least_squares(a_exp, target, "expression");
        const double residual = (target - a_exp * fit.alpha_exp).norm() * rms_scale;
        fit.residual_log.push_back(residual);
        fit.residual = residual;
        fit.iterations = it + 1;
        if (it > 0) {
            const double previous = fit.residual_log[it - 1];
            if (std::abs(previous - residual) <= tol * std::max(1.0, previous)) {
                break;
            }
        }
    }
    return fit;
}

Mesh bilinear_transfer(const CoreTensor& core, const Mesh& source, const Mesh& target) {
    const BilinearFit source_fit = als_fit(core, source);
    const BilinearFit target_fit = als_fit(core, target);
    return bilinear_reconstruct(core, target_fit.alpha_id, source_fit.alpha_exp);
}

void save_core(const CoreTensor& core, const std::string& json_path) {
    std::vector<NamedTensor> tensors;
    tensors.push_back({"core", core.core});
    tensors.push_back({"id_coeffs", core.id_coeffs});
    tensors.push_back({"exp_coeffs", core.exp_coeffs});
    tensors.push_back({"faces", core.faces.cast<double>()});
    nlohmann::json config;
    config["vertex_count"] = core.vertex_count;
    config["k_id"] = core.k_id;
    config["k_exp"] = core.k_exp;
    save_tensor_file(json_path, "bilinear_core", tensors, config);
}

CoreTensor load_core(const std::string& json_path) {
    const TensorFile file = load_tensor_file(json_path);
    if (file.kind != "bilinear_core") {
        throw DataError("load_core: " + json_path + " is not a bilinear core (kind='" + file.kind +
                        "')");
    }
    CoreTensor core;
    core.vertex_count = file.config.at("vertex_count").get<int>();
    core.k_id = file.config.at("k_id").get<int>();
    core.k_exp = file.config.at("k_exp").get<int>();
    core.core = file.find("core").value;
    core.id_coeffs = file.find("id_coeffs").value;
    core.exp_coeffs = file.find("exp_coeffs").value;
    core.faces = file.find("faces").value.cast<int>();
    return core;
}

} // namespace drface
