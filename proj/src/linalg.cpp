#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zeroclust/error.hpp"
#include "zeroclust/rng.hpp"

namespace zeroclust::detail {

namespace {
constexpr std::size_t kDenseDimThreshold = 16;
constexpr std::size_t kDenseMaxPoints = 20000;
constexpr std::size_t kDenseEigenThreshold = 400;
}  // namespace

DistanceView::DistanceView(const Matrix& x) : x_(&x), n_(x.rows()) {
    if (x.cols() > kDenseDimThreshold && n_ <= kDenseMaxPoints) {
        dense_ = true;
        const auto X = as_eigen(x);
        RowMatrixXd g(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        g.noalias() = X * X.transpose();
        Eigen::VectorXd norms = g.diagonal();
        for (std::size_t i = 0; i < n_; ++i) {
            g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 0.0;
            for (std::size_t j = i + 1; j < n_; ++j) {
                const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
                const double v = std::max(0.0, norms[ii] + norms[jj] - 2.0 * g(ii, jj));
                g(ii, jj) = v;
                g(jj, ii) = v;
            }
        }
        sq_.assign(g.data(), g.data() + n_ * n_);
    }
}

double DistanceView::operator()(std::size_t i, std::size_t j) const noexcept {
    return std::sqrt(squared(i, j));
}

void DistanceView::squared_row(std::size_t i, std::span<double> out) const {
    if (dense_) {
        std::copy_n(sq_.data() + i * n_, n_, out.begin());
        return;
    }
    const auto xi = x_->row(i);
    for (std::size_t j = 0; j < n_; ++j) {
        out[j] = squared_distance(xi, x_->row(j));
    }
}

Neighbors k_nearest(const DistanceView& d, std::size_t k) {
    const std::size_t n = d.size();
    if (k >= n) {
        throw ParameterError("k_nearest: k=" + std::to_string(k) + " must be smaller than N=" + std::to_string(n));
    }
    Neighbors out;
    out.n = n;
    out.k = k;
    out.index.resize(n * k);
    out.distance.resize(n * k);
    std::vector<double> row(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.squared_row(i, row);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::swap(order[i], order[n - 1]);  // exclude self
        auto less = [&row](std::size_t a, std::size_t b) { return row[a] < row[b] || (row[a] == row[b] && a < b); };
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         order.begin() + static_cast<std::ptrdiff_t>(n - 1), less);
        std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), less);
        for (std::size_t r = 0; r < k; ++r) {
            out.index[i * k + r] = order[r];
            out.distance[i * k + r] = std::sqrt(row[order[r]]);
        }
    }
    return out;
}

EigenPairs top_eigenpairs_dense(const Eigen::MatrixXd& a, std::size_t k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) {
        throw NumericError("symmetric eigensolver did not converge");
    }
    const auto n = static_cast<std::size_t>(a.rows());
    k = std::min(k, n);
    EigenPairs out;
    out.values.resize(k);
    out.vectors.resize(a.rows(), static_cast<Eigen::Index>(k));
    // Eigen returns ascending order.
    for (std::size_t c = 0; c < k; ++c) {
        const auto src = static_cast<Eigen::Index>(n - 1 - c);
        out.values[c] = solver.eigenvalues()[src];
        out.vectors.col(static_cast<Eigen::Index>(c)) = solver.eigenvectors().col(src);
    }
    return out;
}

EigenPairs top_eigenpairs_lanczos(const MatVec& apply, std::size_t n, std::size_t k, double tol) {
    if (k == 0 || k > n) {
        throw ParameterError("lanczos: requested " + std::to_string(k) + " eigenpairs of an order-" +
                             std::to_string(n) + " operator");
    }
    const auto N = static_cast<Eigen::Index>(n);
    Rng rng(derive_seed(0x4C414E43ULL, n));

    std::vector<Eigen::VectorXd> basis;
    std::vector<double> alpha;
    std::vector<double> beta;  // beta[j] couples basis j and j+1

    auto random_orthogonal = [&]() -> Eigen::VectorXd {
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::VectorXd v(N);
            for (Eigen::Index i = 0; i < N; ++i) v[i] = rng.uniform() - 0.5;
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& q : basis) v -= q.dot(v) * q;
            }
            const double norm = v.norm();
            if (norm > 1e-8) return v / norm;
        }
        return Eigen::VectorXd::Zero(N);
    };

    basis.push_back(random_orthogonal());
    Eigen::VectorXd w(N);
    const std::size_t min_steps = std::min(n, 2 * k + 20);

    while (true) {
        const std::size_t j = basis.size() - 1;
        apply(basis[j], w);
        const double a = basis[j].dot(w);
        alpha.push_back(a);
        // Full reorthogonalization, twice for stability.
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) w -= q.dot(w) * q;
        }
        double b = w.norm();
        const std::size_t m = basis.size();

        bool check = m >= min_steps && (m % 10 == 0 || m == n);
        if (b < 1e-12 * std::max(1.0, std::abs(a)) && m < n) {
            // Invariant subspace: continue from a fresh orthogonal direction.
            b = 0.0;
            check = m >= k;
        }

        if (check || m == n) {
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
            for (std::size_t i = 0; i < m; ++i) {
                t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = alpha[i];
                if (i + 1 < m) {
                    t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = beta[i];
                    t(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = beta[i];
                }
            }
            auto ritz = top_eigenpairs_dense(t, k);
            double scale = 0.0;
            for (const double v : ritz.values) scale = std::max(scale, std::abs(v));
            bool converged = ritz.values.size() == k;
            for (std::size_t c = 0; c < ritz.values.size() && converged; ++c) {
                const double resid = b * std::abs(ritz.vectors(static_cast<Eigen::Index>(m - 1),
                                                                static_cast<Eigen::Index>(c)));
                converged = resid <= tol * std::max(scale, 1e-300);
            }
            if (converged || m == n) {
                EigenPairs out;
                out.values = ritz.values;
                out.vectors = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(ritz.values.size()));
                for (std::size_t i = 0; i < m; ++i) {
                    out.vectors += basis[i] * ritz.vectors.row(static_cast<Eigen::Index>(i));
                }
                for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) {
                    out.vectors.col(c).normalize();
                }
                return out;
            }
        }

        beta.push_back(b);
        if (b == 0.0) {
            basis.push_back(random_orthogonal());
        } else {
            basis.push_back(w / b);
        }
    }
}

EigenPairs top_eigenpairs(const Eigen::MatrixXd& a, std::size_t k) {
    const auto n = static_cast<std::size_t>(a.rows());
    if (n <= kDenseEigenThreshold || 4 * k >= n) {
        return top_eigenpairs_dense(a, k);
    }
    return top_eigenpairs_lanczos([&a](const Eigen::VectorXd& v, Eigen::VectorXd& out) { out.noalias() = a * v; },
                                  n, k);
}

void fix_signs(Eigen::MatrixXd& columns) {
    for (Eigen::Index c = 0; c < columns.cols(); ++c) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index r = 0; r < columns.rows(); ++r) {
            const double v = std::abs(columns(r, c));
            if (v > best_abs * (1.0 + 1e-12)) {
                best_abs = v;
                best = r;
            }
        }
        if (columns(best, c) < 0) columns.col(c) *= -1.0;
    }
}

void double_center(Eigen::MatrixXd& a) {
    const Eigen::VectorXd row_means = a.rowwise().mean();
    const Eigen::RowVectorXd col_means = a.colwise().mean();
    const double grand = row_means.mean();
    a.colwise() -= row_means;
    a.rowwise() -= col_means;
    a.array() += grand;
}

}  // namespace zeroclust::detail
