#include "zeroclust/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

#include "linalg.hpp"
#include "zeroclust/error.hpp"

namespace zeroclust {

using detail::as_eigen;

std::string to_string(ReductionMethod m) {
    switch (m) {
        case ReductionMethod::Raw: return "raw";
        case ReductionMethod::PCA: return "pca";
        case ReductionMethod::KernelPCA: return "kpca";
        case ReductionMethod::Isomap: return "isomap";
        case ReductionMethod::TSNE: return "tsne";
        case ReductionMethod::UMAP: return "umap";
    }
    return "raw";
}

ReductionMethod parse_reduction_method(const std::string& s) {
    std::string k = s;
    std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (k == "raw" || k == "none") return ReductionMethod::Raw;
    if (k == "pca") return ReductionMethod::PCA;
    if (k == "kpca" || k == "kernel_pca" || k == "kernelpca") return ReductionMethod::KernelPCA;
    if (k == "isomap") return ReductionMethod::Isomap;
    if (k == "tsne" || k == "t-sne") return ReductionMethod::TSNE;
    if (k == "umap") return ReductionMethod::UMAP;
    throw ParameterError("method: unknown reduction method '" + s + "'");
}

double ReductionRecipe::param(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

std::string ReductionRecipe::fingerprint() const {
    std::ostringstream os;
    os << to_string(method) << '(';
    bool first = true;
    auto sep = [&] {
        if (!first) os << ';';
        first = false;
    };
    if (method != ReductionMethod::Raw) {
        sep();
        os << "dim=" << target_dim;
    }
    for (const auto& [k, v] : params) {
        sep();
        os << k << '=' << v;
    }
    if (method == ReductionMethod::TSNE || method == ReductionMethod::UMAP) {
        sep();
        os << "seed=" << seed;
    }
    os << ')';
    return os.str();
}

ReductionRecipe ReductionRecipe::raw() {
    ReductionRecipe r;
    r.method = ReductionMethod::Raw;
    r.target_dim = 0;
    return r;
}

ReductionRecipe ReductionRecipe::pca(std::size_t target_dim) {
    ReductionRecipe r;
    r.method = ReductionMethod::PCA;
    r.target_dim = target_dim;
    return r;
}

ReductionRecipe ReductionRecipe::kernel_pca(double gamma, std::size_t target_dim) {
    ReductionRecipe r;
    r.method = ReductionMethod::KernelPCA;
    r.target_dim = target_dim;
    if (gamma > 0) r.params["gamma"] = gamma;
    return r;
}

ReductionRecipe ReductionRecipe::isomap(std::size_t n_neighbors, std::size_t target_dim) {
    ReductionRecipe r;
    r.method = ReductionMethod::Isomap;
    r.target_dim = target_dim;
    r.params["n_neighbors"] = static_cast<double>(n_neighbors);
    return r;
}

ReductionRecipe ReductionRecipe::tsne(double perplexity, std::uint64_t seed, std::size_t target_dim) {
    ReductionRecipe r;
    r.method = ReductionMethod::TSNE;
    r.target_dim = target_dim;
    r.seed = seed;
    r.params["perplexity"] = perplexity;
    return r;
}

ReductionRecipe ReductionRecipe::umap(std::size_t n_neighbors, double min_dist, std::uint64_t seed,
                                      std::size_t target_dim) {
    ReductionRecipe r;
    r.method = ReductionMethod::UMAP;
    r.target_dim = target_dim;
    r.seed = seed;
    r.params["n_neighbors"] = static_cast<double>(n_neighbors);
    r.params["min_dist"] = min_dist;
    return r;
}

Matrix standardize(const Matrix& x) {
    const std::size_t n = x.rows(), d = x.cols();
    if (n < 2) {
        throw ParameterError("standardize: need at least 2 rows, got " + std::to_string(n));
    }
    Matrix out(n, d);
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, c);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = x(i, c) - mean;
            ss += dv * dv;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        // Treat columns whose spread is pure rounding noise as constant.
        const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
        for (std::size_t i = 0; i < n; ++i) {
            out(i, c) = constant ? 0.0 : (x(i, c) - mean) / sd;
        }
    }
    return out;
}

PcaModel pca_fit(const Matrix& x, std::size_t target_dim) {
    const std::size_t n = x.rows(), d = x.cols();
    if (n < 2) throw ParameterError("pca: need at least 2 rows");
    if (target_dim < 1 || target_dim > std::min(n - 1, d)) {
        throw ParameterError("target_dim=" + std::to_string(target_dim) + " must lie in [1, min(N-1, D)] = [1, " +
                             std::to_string(std::min(n - 1, d)) + "]");
    }
    PcaModel model;
    model.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) model.mean[c] += x(i, c);
    for (auto& m : model.mean) m /= static_cast<double>(n);

    detail::RowMatrixXd xc = as_eigen(x);
    for (std::size_t c = 0; c < d; ++c) xc.col(static_cast<Eigen::Index>(c)).array() -= model.mean[c];
    const double denom = static_cast<double>(n - 1);
    const double total_variance = xc.squaredNorm() / denom;

    detail::EigenPairs eig;
    if (d <= 400 || 4 * target_dim >= d) {
        Eigen::MatrixXd cov = (xc.transpose() * xc) / denom;
        eig = detail::top_eigenpairs_dense(cov, target_dim);
    } else {
        eig = detail::top_eigenpairs_lanczos(
            [&xc, denom](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
                const Eigen::VectorXd t = xc * v;
                out.noalias() = xc.transpose() * t;
                out /= denom;
            },
            d, target_dim);
    }
    detail::fix_signs(eig.vectors);

    model.components = Matrix(target_dim, d);
    for (std::size_t k = 0; k < target_dim; ++k) {
        for (std::size_t c = 0; c < d; ++c) {
            model.components(k, c) = eig.vectors(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
        }
        const double ev = std::max(0.0, eig.values[k]);
        model.explained_variance.push_back(ev);
        model.explained_variance_ratio.push_back(total_variance > 0 ? ev / total_variance : 0.0);
    }
    return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& x) {
    const std::size_t k = model.components.rows();
    Matrix out(x.rows(), k);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j) s += (x(i, j) - model.mean[j]) * model.components(c, j);
            out(i, c) = s;
        }
    }
    return out;
}

Matrix pca_inverse_transform(const PcaModel& model, const Matrix& scores) {
    const std::size_t d = model.mean.size();
    Matrix out(scores.rows(), d);
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double s = model.mean[j];
            for (std::size_t c = 0; c < scores.cols(); ++c) s += scores(i, c) * model.components(c, j);
            out(i, j) = s;
        }
    }
    return out;
}

ReducedSpace pca(const Matrix& x, std::size_t target_dim, std::uint64_t seed) {
    const auto model = pca_fit(x, target_dim);
    ReducedSpace out;
    out.coords = pca_transform(model, x);
    out.recipe = ReductionRecipe::pca(target_dim);
    out.recipe.seed = seed;
    out.diagnostics.series["explained_variance"] = model.explained_variance;
    out.diagnostics.series["explained_variance_ratio"] = model.explained_variance_ratio;
    return out;
}

namespace {

/// Coordinates from the top eigenpairs of a centered Gram-like matrix.
Matrix embed_from_gram(const Eigen::MatrixXd& gram, std::size_t target_dim, std::vector<double>* eigenvalues) {
    auto eig = detail::top_eigenpairs(gram, target_dim);
    detail::fix_signs(eig.vectors);
    const auto n = static_cast<std::size_t>(gram.rows());
    Matrix coords(n, target_dim);
    for (std::size_t c = 0; c < target_dim; ++c) {
        const double scale = std::sqrt(std::max(0.0, eig.values[c]));
        for (std::size_t i = 0; i < n; ++i) {
            coords(i, c) = eig.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) * scale;
        }
    }
    if (eigenvalues) *eigenvalues = eig.values;
    return coords;
}

void check_target(std::size_t target_dim, std::size_t n, std::size_t d) {
    if (target_dim < 1 || target_dim > d || target_dim >= n) {
        throw ParameterError("target_dim=" + std::to_string(target_dim) + " must be >= 1, <= input dim (" +
                             std::to_string(d) + ") and < N (" + std::to_string(n) + ")");
    }
}

}  // namespace

ReducedSpace kernel_pca(const Matrix& x, std::size_t target_dim, double gamma, std::uint64_t seed) {
    if (!(gamma > 0) || !std::isfinite(gamma)) {
        throw ParameterError("gamma must be positive, got " + std::to_string(gamma));
    }
    const std::size_t n = x.rows();
    check_target(target_dim, n, x.cols());
    const detail::DistanceView dist(x);
    Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = std::exp(-gamma * dist.squared(i, j));
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            k(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    detail::double_center(k);
    ReducedSpace out;
    std::vector<double> eigenvalues;
    out.coords = embed_from_gram(k, target_dim, &eigenvalues);
    out.recipe = ReductionRecipe::kernel_pca(gamma, target_dim);
    out.recipe.seed = seed;
    out.diagnostics.scalars["gamma"] = gamma;
    out.diagnostics.series["eigenvalues"] = eigenvalues;
    return out;
}

Matrix classical_mds(const Matrix& distances, std::size_t target_dim) {
    const std::size_t n = distances.rows();
    if (distances.cols() != n) throw ParameterError("classical_mds: distance matrix must be square");
    if (target_dim < 1 || target_dim >= n) throw ParameterError("target_dim must lie in [1, N-1]");
    Eigen::MatrixXd b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double dij = distances(i, j);
            b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -0.5 * dij * dij;
        }
    }
    detail::double_center(b);
    return embed_from_gram(b, target_dim, nullptr);
}

namespace {

using detail::UnionFind;

struct Edge {
    std::size_t to;
    double w;
};

}  // namespace

ReducedSpace isomap(const Matrix& x, std::size_t target_dim, std::size_t n_neighbors, std::uint64_t seed,
                    DisconnectedPolicy policy) {
    const std::size_t n = x.rows();
    check_target(target_dim, n, x.cols());
    if (n_neighbors < 1 || n_neighbors >= n) {
        throw ParameterError("n_neighbors=" + std::to_string(n_neighbors) + " must lie in [1, N-1]");
    }
    const detail::DistanceView dist(x);
    const auto knn = detail::k_nearest(dist, n_neighbors);

    // Symmetric k-NN graph.
    std::vector<std::map<std::size_t, double>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < n_neighbors; ++r) {
            const std::size_t j = knn.at(i, r);
            adj[i][j] = knn.dist(i, r);
            adj[j][i] = knn.dist(i, r);
        }
    }

    ReducedSpace out;
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& [j, w] : adj[i]) uf.unite(i, j);
    std::map<std::size_t, std::size_t> comp_id;
    std::vector<std::size_t> comp(n);
    for (std::size_t i = 0; i < n; ++i) {
        comp[i] = comp_id.try_emplace(uf.find(i), comp_id.size()).first->second;
    }
    const std::size_t n_components = comp_id.size();
    out.diagnostics.scalars["graph_components"] = static_cast<double>(n_components);
    if (n_components > 1) {
        if (policy == DisconnectedPolicy::Error) {
            throw ParameterError("n_neighbors=" + std::to_string(n_neighbors) + " leaves the neighbor graph with " +
                                 std::to_string(n_components) + " components");
        }
        // Closest pair between every pair of components, then a minimum
        // spanning forest over the components.
        struct Bridge {
            double w;
            std::size_t a, b;
        };
        std::map<std::pair<std::size_t, std::size_t>, Bridge> best;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (comp[i] == comp[j]) continue;
                const auto key = std::minmax(comp[i], comp[j]);
                const double w = dist(i, j);
                auto it = best.find(key);
                if (it == best.end() || w < it->second.w) best[key] = {w, i, j};
            }
        }
        std::vector<Bridge> candidates;
        for (const auto& [key, br] : best) candidates.push_back(br);
        std::stable_sort(candidates.begin(), candidates.end(), [](const Bridge& a, const Bridge& b) { return a.w < b.w; });
        UnionFind cuf(n_components);
        std::vector<double> bridge_lengths;
        for (const auto& br : candidates) {
            if (cuf.unite(comp[br.a], comp[br.b])) {
                adj[br.a][br.b] = br.w;
                adj[br.b][br.a] = br.w;
                bridge_lengths.push_back(br.w);
            }
        }
        out.diagnostics.series["bridge_lengths"] = bridge_lengths;
        out.diagnostics.notes.push_back("neighbor graph had " + std::to_string(n_components) +
                                        " components; joined with " + std::to_string(bridge_lengths.size()) +
                                        " bridging edges");
    }

    std::vector<std::vector<Edge>> graph(n);
    for (std::size_t i = 0; i < n; ++i) {
        graph[i].reserve(adj[i].size());
        for (const auto& [j, w] : adj[i]) graph[i].push_back({j, w});
    }
    adj.clear();

    // All-pairs shortest paths by repeated Dijkstra; stores -0.5 * g^2.
    Eigen::MatrixXd b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> g(n);
    using Item = std::pair<double, std::size_t>;
    std::vector<Item> heap_storage;
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(g.begin(), g.end(), std::numeric_limits<double>::infinity());
        g[s] = 0.0;
        heap_storage.clear();
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap(std::greater<>{}, std::move(heap_storage));
        heap.emplace(0.0, s);
        while (!heap.empty()) {
            const auto [du, u] = heap.top();
            heap.pop();
            if (du > g[u]) continue;
            for (const auto& e : graph[u]) {
                const double nd = du + e.w;
                if (nd < g[e.to]) {
                    g[e.to] = nd;
                    heap.emplace(nd, e.to);
                }
            }
        }
        for (std::size_t t = 0; t < n; ++t) {
            b(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) = -0.5 * g[t] * g[t];
        }
    }
    // Dijkstra sums in different orders from each end; enforce exact symmetry.
    for (Eigen::Index i = 0; i < b.rows(); ++i)
        for (Eigen::Index j = i + 1; j < b.cols(); ++j) {
            const double v = 0.5 * (b(i, j) + b(j, i));
            b(i, j) = v;
            b(j, i) = v;
        }
    detail::double_center(b);
    std::vector<double> eigenvalues;
    out.coords = embed_from_gram(b, target_dim, &eigenvalues);
    out.recipe = ReductionRecipe::isomap(n_neighbors, target_dim);
    out.recipe.seed = seed;
    out.diagnostics.series["eigenvalues"] = eigenvalues;
    return out;
}

ReducedSpace raw_passthrough(const Matrix& x) {
    ReducedSpace out;
    out.coords = x;
    out.recipe = ReductionRecipe::raw();
    return out;
}

ReducedSpace reduce(const Matrix& x, const ReductionRecipe& recipe) {
    const auto dim = recipe.target_dim;
    switch (recipe.method) {
        case ReductionMethod::Raw:
            return raw_passthrough(x);
        case ReductionMethod::PCA: {
            auto r = pca(x, dim, recipe.seed);
            r.recipe = recipe;
            return r;
        }
        case ReductionMethod::KernelPCA: {
            double gamma = recipe.param("gamma", 0.0);
            if (gamma <= 0.0) gamma = 1.0 / static_cast<double>(x.cols());
            auto r = kernel_pca(x, dim, gamma, recipe.seed);
            r.recipe = recipe;
            return r;
        }
        case ReductionMethod::Isomap: {
            const auto policy = recipe.param("disconnected_error", 0.0) != 0.0 ? DisconnectedPolicy::Error
                                                                                 : DisconnectedPolicy::Bridge;
            auto r = isomap(x, dim, static_cast<std::size_t>(recipe.param("n_neighbors", 15)), recipe.seed, policy);
            r.recipe = recipe;
            return r;
        }
        case ReductionMethod::TSNE: {
            TsneOptions opt;
            opt.perplexity = recipe.param("perplexity", opt.perplexity);
            opt.n_iter = static_cast<std::size_t>(recipe.param("n_iter", static_cast<double>(opt.n_iter)));
            opt.learning_rate = recipe.param("learning_rate", opt.learning_rate);
            auto r = tsne(x, dim, opt, recipe.seed);
            r.recipe = recipe;
            return r;
        }
        case ReductionMethod::UMAP: {
            UmapOptions opt;
            opt.n_neighbors = static_cast<std::size_t>(recipe.param("n_neighbors", 15));
            opt.min_dist = recipe.param("min_dist", opt.min_dist);
            opt.spread = recipe.param("spread", opt.spread);
            opt.n_epochs = static_cast<std::size_t>(recipe.param("n_epochs", 0));
            auto r = umap(x, dim, opt, recipe.seed);
            r.recipe = recipe;
            return r;
        }
    }
    throw ParameterError("method: unsupported reduction method");
}

}  // namespace zeroclust
