#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "linalg.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/reduce.hpp"
#include "zeroclust/rng.hpp"

namespace zeroclust {

namespace umap_detail {

std::pair<double, double> fit_ab(double spread, double min_dist) {
    if (!(spread > 0) || min_dist < 0 || min_dist >= 3 * spread) {
        throw ParameterError("min_dist must lie in [0, 3*spread) and spread must be positive");
    }
    constexpr int kSamples = 300;
    std::vector<double> xs(kSamples), ys(kSamples);
    for (int i = 0; i < kSamples; ++i) {
        xs[i] = 3.0 * spread * i / (kSamples - 1);
        ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
    }
    // Levenberg-Marquardt on r_i = 1 / (1 + a x^{2b}) - y_i from (1, 1).
    double a = 1.0, b = 1.0;
    auto sse = [&](double aa, double bb) {
        double s = 0.0;
        for (int i = 0; i < kSamples; ++i) {
            const double r = 1.0 / (1.0 + aa * std::pow(xs[i], 2.0 * bb)) - ys[i];
            s += r * r;
        }
        return s;
    };
    double lambda = 1e-3;
    double cost = sse(a, b);
    for (int it = 0; it < 500; ++it) {
        double jtj00 = 0, jtj01 = 0, jtj11 = 0, g0 = 0, g1 = 0;
        for (int i = 0; i < kSamples; ++i) {
            const double x = xs[i];
            const double x2b = x > 0 ? std::pow(x, 2.0 * b) : 0.0;
            const double f = 1.0 / (1.0 + a * x2b);
            const double r = f - ys[i];
            const double df_da = -x2b * f * f;
            const double df_db = x > 0 ? -a * x2b * 2.0 * std::log(x) * f * f : 0.0;
            jtj00 += df_da * df_da;
            jtj01 += df_da * df_db;
            jtj11 += df_db * df_db;
            g0 += df_da * r;
            g1 += df_db * r;
        }
        bool improved = false;
        for (int inner = 0; inner < 50 && !improved; ++inner) {
            const double m00 = jtj00 * (1 + lambda), m11 = jtj11 * (1 + lambda);
            const double det = m00 * m11 - jtj01 * jtj01;
            const double da = -(m11 * g0 - jtj01 * g1) / det;
            const double db = -(m00 * g1 - jtj01 * g0) / det;
            const double trial = sse(a + da, b + db);
            if (trial < cost) {
                const double rel = (cost - trial) / std::max(cost, 1e-300);
                a += da;
                b += db;
                cost = trial;
                lambda = std::max(lambda / 10, 1e-12);
                improved = true;
                if (rel < 1e-15 && std::abs(da) < 1e-14 && std::abs(db) < 1e-14) return {a, b};
            } else {
                lambda *= 10;
            }
        }
        if (!improved) break;
    }
    return {a, b};
}

FuzzyGraph fuzzy_simplicial_set(const Matrix& x, std::size_t n_neighbors) {
    const std::size_t n = x.rows();
    if (n_neighbors < 2 || n_neighbors >= n) {
        throw ParameterError("n_neighbors=" + std::to_string(n_neighbors) + " must lie in [2, N-1] (N=" +
                             std::to_string(n) + ")");
    }
    const detail::DistanceView dist(x);
    // The neighbor list counts the point itself, so k-1 true neighbors.
    const std::size_t k = n_neighbors - 1;
    const auto knn = detail::k_nearest(dist, k);

    double mean_all = 0.0;
    for (const double d : knn.distance) mean_all += d;
    mean_all /= static_cast<double>(knn.distance.size());

    FuzzyGraph g;
    g.n = n;
    g.rho.assign(n, 0.0);
    g.sigma.assign(n, 1.0);
    const double target = std::log2(static_cast<double>(n_neighbors));
    std::vector<double> directed(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        double rho = 0.0;
        double mean_i = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
            const double d = knn.dist(i, r);
            mean_i += d;
            if (rho == 0.0 && d > 0.0) rho = d;
        }
        mean_i /= static_cast<double>(k + 1);  // self distance 0 is part of the neighbor list
        double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
        for (int it = 0; it < 64; ++it) {
            double psum = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                const double d = knn.dist(i, r) - rho;
                psum += d > 0 ? std::exp(-d / mid) : 1.0;
            }
            if (std::abs(psum - target) < 1e-5) break;
            if (psum > target) {
                hi = mid;
                mid = 0.5 * (lo + hi);
            } else {
                lo = mid;
                mid = std::isinf(hi) ? mid * 2 : 0.5 * (lo + hi);
            }
        }
        if (rho > 0.0) {
            mid = std::max(mid, 1e-3 * mean_i);
        } else {
            mid = std::max(mid, 1e-3 * mean_all);
        }
        g.rho[i] = rho;
        g.sigma[i] = mid;
        for (std::size_t r = 0; r < k; ++r) {
            const double d = knn.dist(i, r) - rho;
            directed[i * k + r] = (d <= 0.0 || mid == 0.0) ? 1.0 : std::exp(-d / mid);
        }
    }

    // Fuzzy union w = a + b - ab over the sparse directed graph.
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < k; ++r) rows[i].emplace_back(knn.at(i, r), directed[i * k + r]);
    for (auto& row : rows) std::sort(row.begin(), row.end());
    auto lookup = [&rows](std::size_t i, std::size_t j) {
        const auto& row = rows[i];
        const auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(j, -1.0));
        return (it != row.end() && it->first == j) ? it->second : 0.0;
    };
    std::vector<std::vector<std::pair<std::size_t, double>>> sym(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [j, w] : rows[i]) {
            const double back = lookup(j, i);
            const double u = w + back - w * back;
            sym[i].emplace_back(j, u);
            if (back == 0.0) sym[j].emplace_back(i, u);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto& row = sym[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end(),
                              [](const auto& a, const auto& b) { return a.first == b.first; }),
                  row.end());
        for (const auto& [j, w] : row) {
            if (w <= 0.0) continue;
            g.head.push_back(i);
            g.tail.push_back(j);
            g.weight.push_back(w);
        }
    }
    return g;
}

}  // namespace umap_detail

ReducedSpace umap(const Matrix& x, std::size_t target_dim, const UmapOptions& opt, std::uint64_t seed) {
    const std::size_t n = x.rows();
    if (opt.n_neighbors >= n) {
        throw ParameterError("n_neighbors=" + std::to_string(opt.n_neighbors) + " must be smaller than N=" +
                             std::to_string(n));
    }
    if (target_dim < 1 || target_dim > x.cols() || target_dim >= n) {
        throw ParameterError("target_dim=" + std::to_string(target_dim) + " must lie in [1, min(D, N-1)]");
    }
    const auto [a, b] = umap_detail::fit_ab(opt.spread, opt.min_dist);
    auto graph = umap_detail::fuzzy_simplicial_set(x, opt.n_neighbors);
    const std::size_t n_epochs = opt.n_epochs > 0 ? opt.n_epochs : (n <= 10000 ? 500 : 200);

    // Drop edges too weak to be sampled within n_epochs.
    const double w_max = *std::max_element(graph.weight.begin(), graph.weight.end());
    std::vector<std::size_t> head, tail;
    std::vector<double> epochs_per_sample;
    for (std::size_t e = 0; e < graph.weight.size(); ++e) {
        if (graph.weight[e] < w_max / static_cast<double>(n_epochs)) continue;
        head.push_back(graph.head[e]);
        tail.push_back(graph.tail[e]);
        epochs_per_sample.push_back(w_max / graph.weight[e]);
    }

    // PCA initialization scaled to [-10, 10].
    Matrix y = pca_transform(pca_fit(x, target_dim), x);
    double max_abs = 0.0;
    for (const double v : y.values()) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs > 0) {
        for (auto& v : y.values()) v *= 10.0 / max_abs;
    }

    const std::size_t d = target_dim;
    const std::size_t m = head.size();
    std::vector<double> next_sample(epochs_per_sample);
    std::vector<double> epochs_per_negative(m);
    for (std::size_t e = 0; e < m; ++e) epochs_per_negative[e] = epochs_per_sample[e] / opt.negative_sample_rate;
    std::vector<double> next_negative(epochs_per_negative);
    Rng rng(derive_seed(seed, "umap-negative-sampling"));
    auto clip = [](double v) { return std::clamp(v, -4.0, 4.0); };

    for (std::size_t epoch = 0; epoch < n_epochs; ++epoch) {
        const double alpha = opt.learning_rate * (1.0 - static_cast<double>(epoch) / static_cast<double>(n_epochs));
        const auto ep = static_cast<double>(epoch);
        for (std::size_t e = 0; e < m; ++e) {
            if (next_sample[e] > ep) continue;
            double* cur = y.data() + head[e] * d;
            double* other = y.data() + tail[e] * d;
            double sq = 0.0;
            for (std::size_t c = 0; c < d; ++c) sq += (cur[c] - other[c]) * (cur[c] - other[c]);
            double coeff = 0.0;
            if (sq > 0.0) {
                coeff = -2.0 * a * b * std::pow(sq, b - 1.0) / (a * std::pow(sq, b) + 1.0);
            }
            for (std::size_t c = 0; c < d; ++c) {
                const double gd = clip(coeff * (cur[c] - other[c]));
                cur[c] += gd * alpha;
                other[c] -= gd * alpha;
            }
            next_sample[e] += epochs_per_sample[e];

            const auto n_neg = static_cast<std::size_t>((ep - next_negative[e]) / epochs_per_negative[e]);
            for (std::size_t s = 0; s < n_neg; ++s) {
                const auto k = static_cast<std::size_t>(rng.below(n));
                if (k == head[e]) continue;
                const double* neg = y.data() + k * d;
                double nsq = 0.0;
                for (std::size_t c = 0; c < d; ++c) nsq += (cur[c] - neg[c]) * (cur[c] - neg[c]);
                if (nsq > 0.0) {
                    const double rc =
                        2.0 * opt.repulsion_strength * b / ((0.001 + nsq) * (a * std::pow(nsq, b) + 1.0));
                    for (std::size_t c = 0; c < d; ++c) cur[c] += clip(rc * (cur[c] - neg[c])) * alpha;
                } else {
                    for (std::size_t c = 0; c < d; ++c) cur[c] += 4.0 * alpha;
                }
            }
            next_negative[e] += static_cast<double>(n_neg) * epochs_per_negative[e];
        }
    }

    for (const double v : y.values()) {
        if (!std::isfinite(v)) throw NumericError("UMAP produced non-finite coordinates");
    }
    ReducedSpace out;
    out.coords = std::move(y);
    out.recipe = ReductionRecipe::umap(opt.n_neighbors, opt.min_dist, seed, target_dim);
    out.diagnostics.scalars["a"] = a;
    out.diagnostics.scalars["b"] = b;
    out.diagnostics.scalars["n_epochs"] = static_cast<double>(n_epochs);
    out.diagnostics.scalars["n_edges"] = static_cast<double>(m);
    out.diagnostics.notes.push_back("initialization: PCA scaled to [-10, 10]");
    return out;
}

}  // namespace zeroclust
