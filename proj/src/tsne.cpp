#include <algorithm>
#include <cmath>
#include <limits>

#include "linalg.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/reduce.hpp"

namespace zeroclust {

namespace tsne_detail {

double Affinities::at(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    return upper[index(i, j)];
}

namespace {

constexpr double kPerplexityTolerance = 1e-5;
constexpr int kMaxBisection = 200;

/// Finds beta so the conditional distribution over `sq` (self excluded by the
/// caller) has the requested perplexity. Writes the normalized row into `p`.
double solve_row(std::span<const double> sq, double perplexity, std::span<double> p, double* achieved) {
    double dmin = std::numeric_limits<double>::infinity();
    for (const double d : sq) dmin = std::min(dmin, d);
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double perp = 0.0;
    for (int it = 0; it < kMaxBisection; ++it) {
        double sum = 0.0, weighted = 0.0;
        for (std::size_t j = 0; j < sq.size(); ++j) {
            const double shifted = sq[j] - dmin;
            const double v = std::exp(-shifted * beta);
            p[j] = v;
            sum += v;
            weighted += shifted * v;
        }
        const double entropy = std::log(sum) + beta * weighted / sum;
        perp = std::exp(entropy);
        for (std::size_t j = 0; j < sq.size(); ++j) p[j] /= sum;
        if (std::abs(perp - perplexity) < kPerplexityTolerance) break;
        if (perp > perplexity) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    *achieved = perp;
    return beta;
}

}  // namespace

Affinities compute_affinities(const Matrix& x, double perplexity) {
    const std::size_t n = x.rows();
    if (!(perplexity > 0)) throw ParameterError("perplexity must be positive");
    if (!(3.0 * perplexity < static_cast<double>(n) - 1.0)) {
        throw ParameterError("perplexity=" + std::to_string(perplexity) + " too large for N=" + std::to_string(n) +
                             " (need perplexity < (N-1)/3)");
    }
    const detail::DistanceView dist(x);
    Affinities a;
    a.n = n;
    a.upper.assign(n * (n - 1) / 2, 0.0);
    a.beta.resize(n);
    a.achieved_perplexity.resize(n);
    std::vector<double> row(n), sq(n - 1), p(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        dist.squared_row(i, row);
        for (std::size_t j = 0, k = 0; j < n; ++j) {
            if (j != i) sq[k++] = row[j];
        }
        a.beta[i] = solve_row(sq, perplexity, p, &a.achieved_perplexity[i]);
        for (std::size_t j = 0, k = 0; j < n; ++j) {
            if (j == i) continue;
            const double v = p[k++];
            a.upper[i < j ? a.index(i, j) : a.index(j, i)] += v;
        }
    }
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (auto& v : a.upper) v *= scale;
    return a;
}

namespace {

template <bool WithKl>
double objective(const Affinities& p, const Matrix& y, Matrix* grad, double exaggeration) {
    const std::size_t n = p.n;
    const std::size_t d = y.cols();
    // One pass over pairs accumulates both gradient terms; only the repulsive
    // term depends on the normalizer Z.
    std::vector<double> attract(grad ? n * d : 0, 0.0), repulse(grad ? n * d : 0, 0.0);
    double z = 0.0;
    double cross = 0.0;  // sum p_ij log num_ij over unordered pairs
    double entropy = 0.0;
    double diff[8];
    std::vector<double> wide_diff(d > 8 ? d : 0);
    double* dv = d > 8 ? wide_diff.data() : diff;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* yi = y.data() + i * d;
        double* ai = grad ? attract.data() + i * d : nullptr;
        double* ri = grad ? repulse.data() + i * d : nullptr;
        for (std::size_t j = i + 1; j < n; ++j, ++idx) {
            const double* yj = y.data() + j * d;
            double sq = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                dv[c] = yi[c] - yj[c];
                sq += dv[c] * dv[c];
            }
            const double num = 1.0 / (1.0 + sq);
            z += num;
            const double pij = p.upper[idx];
            if constexpr (WithKl) {
                if (pij > 0.0) {
                    cross += pij * std::log(num);
                    entropy += pij * std::log(pij);
                }
            }
            if (grad) {
                const double fa = exaggeration * pij * num;
                const double fr = num * num;
                double* aj = attract.data() + j * d;
                double* rj = repulse.data() + j * d;
                for (std::size_t c = 0; c < d; ++c) {
                    ai[c] += fa * dv[c];
                    aj[c] -= fa * dv[c];
                    ri[c] += fr * dv[c];
                    rj[c] -= fr * dv[c];
                }
            }
        }
    }
    z *= 2.0;  // ordered pairs
    if (grad) {
        *grad = Matrix(n, d);
        const double inv_z = 1.0 / z;
        for (std::size_t k = 0; k < n * d; ++k) {
            grad->data()[k] = 4.0 * (attract[k] - inv_z * repulse[k]);
        }
    }
    // KL = sum_{i!=j} p log p - p log(num / Z), with sum_{i!=j} p = 1.
    return WithKl ? 2.0 * entropy - 2.0 * cross + std::log(z) : 0.0;
}

}  // namespace

double kl_divergence(const Affinities& p, const Matrix& y, Matrix* grad, double exaggeration) {
    return objective<true>(p, y, grad, exaggeration);
}

namespace {

/// Planar specialization: a first pass for Z, then a single force per pair.
void gradient_2d(const Affinities& p, const Matrix& y, Matrix& grad, double exaggeration) {
    const std::size_t n = p.n;
    std::vector<double> px(n), py(n), gx(n, 0.0), gy(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        px[i] = y(i, 0);
        py[i] = y(i, 1);
    }
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = px[i], yi = py[i];
        double zi = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = xi - px[j], dy = yi - py[j];
            zi += 1.0 / (1.0 + dx * dx + dy * dy);
        }
        z += zi;
    }
    const double inv_z = 1.0 / (2.0 * z);
    const double* pu = p.upper.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = px[i], yi = py[i];
        double ax = 0.0, ay = 0.0;
        const double* prow = pu + p.index(i, i + 1) - (i + 1);  // prow[j] = p_ij for j > i
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = xi - px[j], dy = yi - py[j];
            const double num = 1.0 / (1.0 + dx * dx + dy * dy);
            const double f = num * (exaggeration * prow[j] - num * inv_z);
            ax += f * dx;
            ay += f * dy;
            gx[j] -= f * dx;
            gy[j] -= f * dy;
        }
        gx[i] += ax;
        gy[i] += ay;
    }
    grad = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        grad(i, 0) = 4.0 * gx[i];
        grad(i, 1) = 4.0 * gy[i];
    }
}

}  // namespace

void gradient(const Affinities& p, const Matrix& y, Matrix& grad, double exaggeration) {
    if (y.cols() == 2 && p.n >= 2) {
        gradient_2d(p, y, grad, exaggeration);
    } else {
        objective<false>(p, y, &grad, exaggeration);
    }
}

}  // namespace tsne_detail

namespace {

struct DescentState {
    std::vector<double> update;
    std::vector<double> gains;
};

/// Gradient descent with momentum and per-coordinate gains; returns the last
/// gradient norm.
double descend(const tsne_detail::Affinities& p, Matrix& y, std::size_t iterations, double momentum,
               double learning_rate, double exaggeration, const TsneOptions& opt, std::size_t* done) {
    const std::size_t m = y.values().size();
    DescentState s{std::vector<double>(m, 0.0), std::vector<double>(m, 1.0)};
    Matrix grad;
    double grad_norm = 0.0;
    *done = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
        tsne_detail::gradient(p, y, grad, exaggeration);
        double gn = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            double g = grad.data()[k];
            gn += g * g;
            if (s.update[k] * g < 0.0) {
                s.gains[k] += 0.2;
            } else {
                s.gains[k] *= 0.8;
            }
            s.gains[k] = std::max(s.gains[k], opt.min_gain);
            g *= s.gains[k];
            s.update[k] = momentum * s.update[k] - learning_rate * g;
            y.data()[k] += s.update[k];
        }
        grad_norm = std::sqrt(gn);
        ++*done;
        if (grad_norm < opt.min_grad_norm) break;
    }
    return grad_norm;
}

}  // namespace

ReducedSpace tsne(const Matrix& x, std::size_t target_dim, const TsneOptions& opt, std::uint64_t seed) {
    const std::size_t n = x.rows();
    if (target_dim < 1 || target_dim > x.cols()) {
        throw ParameterError("target_dim=" + std::to_string(target_dim) + " must lie in [1, input dim]");
    }
    const auto p = tsne_detail::compute_affinities(x, opt.perplexity);

    // PCA initialization rescaled so the first coordinate has sd 1e-4.
    Matrix y = pca_transform(pca_fit(x, target_dim), x);
    double mean = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y(i, 0);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) ss += (y(i, 0) - mean) * (y(i, 0) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    const double factor = sd > 0 ? 1e-4 / sd : 1.0;
    for (auto& v : y.values()) v *= factor;

    const double lr = opt.learning_rate > 0
                          ? opt.learning_rate
                          : std::max(static_cast<double>(n) / (4.0 * opt.early_exaggeration), 50.0);

    ReducedSpace out;
    out.diagnostics.scalars["kl_initial"] = tsne_detail::kl_divergence(p, y);
    const std::size_t early = std::min(opt.exaggeration_iter, opt.n_iter);
    std::size_t done_early = 0, done_late = 0;
    descend(p, y, early, opt.momentum_early, lr, opt.early_exaggeration, opt, &done_early);
    out.diagnostics.scalars["kl_after_exaggeration"] = tsne_detail::kl_divergence(p, y);
    const double grad_norm = descend(p, y, opt.n_iter - early, opt.momentum_late, lr, 1.0, opt, &done_late);
    out.diagnostics.scalars["kl_final"] = tsne_detail::kl_divergence(p, y);
    out.diagnostics.scalars["final_grad_norm"] = grad_norm;
    out.diagnostics.scalars["learning_rate"] = lr;
    out.diagnostics.scalars["iterations"] = static_cast<double>(done_early + done_late);
    out.diagnostics.notes.push_back("learning_rate auto = max(N / (4 * early_exaggeration), 50)");

    for (const double v : y.values()) {
        if (!std::isfinite(v)) throw NumericError("t-SNE produced non-finite coordinates");
    }
    out.coords = std::move(y);
    out.recipe = ReductionRecipe::tsne(opt.perplexity, seed, target_dim);
    return out;
}

}  // namespace zeroclust
