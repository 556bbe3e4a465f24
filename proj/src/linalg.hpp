#pragma once

// Internal numeric helpers shared by the reduction and clustering modules.

#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "zeroclust/matrix.hpp"

namespace zeroclust::detail {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMatrixXd> as_eigen(const Matrix& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

inline Eigen::Map<RowMatrixXd> as_eigen(Matrix& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

/// Pairwise Euclidean distances. Low-dimensional inputs are evaluated on the
/// fly; wider inputs are materialized once through the Gram matrix.
class DistanceView {
  public:
    explicit DistanceView(const Matrix& x);

    std::size_t size() const noexcept { return n_; }
    double squared(std::size_t i, std::size_t j) const noexcept {
        if (dense_) return sq_[i * n_ + j];
        return squared_distance(x_->row(i), x_->row(j));
    }
    double operator()(std::size_t i, std::size_t j) const noexcept;
    /// Squared distances from i to every point.
    void squared_row(std::size_t i, std::span<double> out) const;

  private:
    const Matrix* x_;
    std::size_t n_;
    bool dense_ = false;
    std::vector<double> sq_;
};

/// Disjoint sets; the representative of a set is its smallest member.
struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (b < a) std::swap(a, b);
        parent[b] = a;
        return true;
    }
};

/// k nearest neighbors of every point, self excluded, sorted by
/// (distance, index). Storage is row-major n x k.
struct Neighbors {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::size_t> index;
    std::vector<double> distance;

    std::size_t at(std::size_t i, std::size_t r) const { return index[i * k + r]; }
    double dist(std::size_t i, std::size_t r) const { return distance[i * k + r]; }
};

Neighbors k_nearest(const DistanceView& d, std::size_t k);

/// Largest-algebraic eigenpairs, values descending, vectors in columns.
struct EigenPairs {
    std::vector<double> values;
    Eigen::MatrixXd vectors;
};

using MatVec = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Lanczos with full reorthogonalization. Deterministic: the start vector is
/// a fixed function of n.
EigenPairs top_eigenpairs_lanczos(const MatVec& apply, std::size_t n, std::size_t k, double tol = 1e-11);
EigenPairs top_eigenpairs_dense(const Eigen::MatrixXd& a, std::size_t k);
/// Dense for small or nearly-full requests, Lanczos otherwise.
EigenPairs top_eigenpairs(const Eigen::MatrixXd& a, std::size_t k);

/// Flip each column so its largest-magnitude entry (first on ties) is positive.
void fix_signs(Eigen::MatrixXd& columns);

/// Double-center a symmetric matrix in place: J A J with J = I - 11^T/n.
void double_center(Eigen::MatrixXd& a);

}  // namespace zeroclust::detail
