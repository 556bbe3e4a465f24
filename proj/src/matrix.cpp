#include "zeroclust/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace zeroclust {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw std::invalid_argument("Matrix: value count does not match shape");
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw std::invalid_argument("Matrix: ragged initializer");
        }
        values_.insert(values_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto src = row(indices[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

Matrix Matrix::scaled(double factor) const {
    Matrix out = *this;
    for (auto& v : out.values_) {
        v *= factor;
    }
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) noexcept {
    return std::sqrt(squared_distance(a, b));
}

}  // namespace zeroclust
