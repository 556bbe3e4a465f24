#pragma once

// Classical MDS and orthogonal Procrustes written directly against Eigen.

#include <Eigen/Dense>

namespace oracle {

inline Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& x, int dim) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd d2(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) d2(i, j) = (x.row(i) - x.row(j)).squaredNorm();
    }
    const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    const Eigen::MatrixXd b = -0.5 * j * d2 * j;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    Eigen::MatrixXd out(n, dim);
    for (int c = 0; c < dim; ++c) {
        const Eigen::Index idx = n - 1 - c;
        out.col(c) = es.eigenvectors().col(idx) * std::sqrt(std::max(0.0, es.eigenvalues()(idx)));
    }
    return out;
}

/// RMSE between `a` and `b` after centering both and rotating/reflecting `b`
/// onto `a`.
inline double procrustes_rmse(Eigen::MatrixXd a, Eigen::MatrixXd b) {
    a.rowwise() -= a.colwise().mean();
    b.rowwise() -= b.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.transpose() * a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd r = svd.matrixU() * svd.matrixV().transpose();
    return std::sqrt((b * r - a).squaredNorm() / static_cast<double>(a.rows()));
}

}  // namespace oracle
