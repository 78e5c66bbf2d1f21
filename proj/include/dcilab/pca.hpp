#pragma once

#include "dcilab/common.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>

namespace dcilab {

struct PcaModel {
    Vector mean;
    /// One orthonormal principal axis per row, by decreasing variance.
    Matrix components;
    Vector explained_variance_ratio;
    /// Set when more components were requested than the data has non-zero
    /// variance directions; trailing ratios are 0 and their axes are an
    /// arbitrary orthonormal completion.
    bool rank_deficient = false;

    std::size_t input_dims() const { return static_cast<std::size_t>(mean.size()); }
    std::size_t n_components() const { return static_cast<std::size_t>(components.rows()); }
};

/// Principal axes of the centered rows of `x` via a symmetric
/// eigendecomposition of the (population) covariance matrix.
inline PcaModel pca_fit(const Matrix& x, std::size_t n_components) {
    const auto rows = x.rows();
    const auto cols = x.cols();
    if (rows < 2) throw std::invalid_argument("pca_fit: need at least two rows");
    if (n_components == 0 || n_components > static_cast<std::size_t>(std::min(rows, cols)))
        throw std::invalid_argument("pca_fit: n_components must be in [1, min(rows, cols)]");

    PcaModel model;
    model.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(rows);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigendecomposition failed");
    // Eigen returns ascending eigenvalues.
    const Vector values = eig.eigenvalues().reverse().cwiseMax(0.0);
    const double total = values.sum();
    const double tol = std::max(total, 1.0) * 1e-12 * static_cast<double>(cols);

    const auto k = static_cast<Eigen::Index>(n_components);
    model.components.resize(k, cols);
    model.explained_variance_ratio.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        model.components.row(i) = eig.eigenvectors().col(cols - 1 - i).transpose();
        const double v = values(i) <= tol ? 0.0 : values(i);
        if (v == 0.0) model.rank_deficient = true;
        model.explained_variance_ratio(i) = total > 0.0 ? v / total : 0.0;
    }
    return model;
}

/// Projects rows onto the principal axes and weights output column k by the
/// k-th explained variance ratio.
inline Matrix pca_project(const PcaModel& model, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.input_dims())
        throw DataError("pca_project: dimension mismatch");
    Matrix out = (x.rowwise() - model.mean.transpose()) * model.components.transpose();
    for (Eigen::Index k = 0; k < out.cols(); ++k) out.col(k) *= model.explained_variance_ratio(k);
    return out;
}

}  // namespace dcilab
