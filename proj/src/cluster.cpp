#include "zeroclust/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "linalg.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/rng.hpp"

namespace zeroclust {

using detail::DistanceView;
using detail::UnionFind;

std::string to_string(ClusterMethod m) {
    switch (m) {
        case ClusterMethod::DBSCAN: return "dbscan";
        case ClusterMethod::HDBSCAN: return "hdbscan";
        case ClusterMethod::Ward: return "ward";
        case ClusterMethod::GMM: return "gmm";
    }
    return "hdbscan";
}

ClusterMethod parse_cluster_method(const std::string& s) {
    std::string k = s;
    std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (k == "dbscan") return ClusterMethod::DBSCAN;
    if (k == "hdbscan") return ClusterMethod::HDBSCAN;
    if (k == "ward" || k == "hierarchical" || k == "agglomerative") return ClusterMethod::Ward;
    if (k == "gmm") return ClusterMethod::GMM;
    throw ParameterError("method: unknown clustering method '" + s + "'");
}

double ClusterSpec::param(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

std::string ClusterSpec::fingerprint() const {
    std::ostringstream os;
    os << to_string(method) << '(';
    bool first = true;
    for (const auto& [k, v] : params) {
        if (!first) os << ';';
        first = false;
        os << k << '=' << v;
    }
    if (method == ClusterMethod::GMM) os << (first ? "" : ";") << "seed=" << seed;
    os << ')';
    return os.str();
}

ClusterSpec ClusterSpec::dbscan(double eps_scale, std::size_t min_samples) {
    return {ClusterMethod::DBSCAN, {{"eps_scale", eps_scale}, {"min_samples", static_cast<double>(min_samples)}}, 42};
}

ClusterSpec ClusterSpec::hdbscan(std::size_t min_cluster_size, std::size_t min_samples) {
    return {ClusterMethod::HDBSCAN,
            {{"min_cluster_size", static_cast<double>(min_cluster_size)},
             {"min_samples", static_cast<double>(min_samples)}},
            42};
}

ClusterSpec ClusterSpec::ward(std::size_t k) {
    return {ClusterMethod::Ward, {{"k", static_cast<double>(k)}}, 42};
}

ClusterSpec ClusterSpec::gmm(std::size_t k, std::uint64_t seed) {
    return {ClusterMethod::GMM, {{"k", static_cast<double>(k)}}, seed};
}

std::size_t ClusterAssignment::n_outliers() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
}

std::vector<std::int32_t> canonical_labels(const std::vector<std::int32_t>& labels) {
    std::vector<std::int32_t> out(labels.size(), -1);
    std::map<std::int32_t, std::int32_t> ids;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        out[i] = ids.try_emplace(labels[i], static_cast<std::int32_t>(ids.size())).first->second;
    }
    return out;
}

namespace {

std::size_t count_clusters(const std::vector<std::int32_t>& labels) {
    std::int32_t hi = -1;
    for (const auto l : labels) hi = std::max(hi, l);
    return static_cast<std::size_t>(hi + 1);
}

void require_points(const Matrix& coords, const char* who) {
    if (coords.rows() == 0 || coords.cols() == 0) throw ParameterError(std::string(who) + ": empty input");
}

}  // namespace

double auto_epsilon(const Matrix& coords, std::size_t min_samples) {
    require_points(coords, "auto_epsilon");
    if (min_samples < 1 || coords.rows() <= min_samples) {
        throw ParameterError("auto_epsilon: need N > min_samples >= 1 (N=" + std::to_string(coords.rows()) +
                             ", min_samples=" + std::to_string(min_samples) + ")");
    }
    const DistanceView dist(coords);
    const auto knn = detail::k_nearest(dist, min_samples);
    double sum = 0.0;
    for (std::size_t i = 0; i < coords.rows(); ++i) sum += knn.dist(i, min_samples - 1);
    return sum / static_cast<double>(coords.rows());
}

ClusterAssignment dbscan(const Matrix& coords, double eps, std::size_t min_samples) {
    require_points(coords, "dbscan");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ParameterError("dbscan: eps must be positive and finite");
    if (min_samples < 1) throw ParameterError("dbscan: min_samples must be >= 1");
    const std::size_t n = coords.rows();
    const DistanceView dist(coords);
    const double eps2 = eps * eps;
    std::vector<double> row(n);

    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        dist.squared_row(i, row);
        std::size_t count = 0;
        for (const double d : row) count += d <= eps2 ? 1 : 0;
        core[i] = count >= min_samples ? 1 : 0;
    }

    std::vector<std::int32_t> labels(n, -1);
    std::int32_t next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (!core[seed] || labels[seed] >= 0) continue;
        const std::int32_t id = next++;
        labels[seed] = id;
        stack.assign(1, seed);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            dist.squared_row(p, row);
            for (std::size_t q = 0; q < n; ++q) {
                if (core[q] && labels[q] < 0 && row[q] <= eps2) {
                    labels[q] = id;
                    stack.push_back(q);
                }
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        dist.squared_row(i, row);
        std::int32_t best = -1;
        for (std::size_t q = 0; q < n; ++q) {
            if (core[q] && row[q] <= eps2 && (best < 0 || labels[q] < best)) best = labels[q];
        }
        labels[i] = best;
    }

    ClusterAssignment out;
    out.labels = std::move(labels);
    out.n_clusters = static_cast<std::size_t>(next);
    out.algorithm = ClusterSpec::dbscan(1.0, min_samples);
    out.algorithm.params.erase("eps_scale");
    out.algorithm.params["eps"] = eps;
    out.diagnostics.scalars["eps"] = eps;
    out.diagnostics.scalars["n_core"] = static_cast<double>(std::count(core.begin(), core.end(), 1));
    return out;
}

namespace {

struct LinkageNode {
    std::size_t left = 0;
    std::size_t right = 0;
    double distance = 0.0;
    std::size_t size = 0;
};

struct CondensedEdge {
    std::size_t parent;
    std::size_t child;
    double lambda;
    std::size_t size;
};

}  // namespace

ClusterAssignment hdbscan(const Matrix& coords, std::size_t min_cluster_size, std::size_t min_samples) {
    require_points(coords, "hdbscan");
    const std::size_t n = coords.rows();
    if (min_cluster_size < 2) throw ParameterError("hdbscan: min_cluster_size must be >= 2");
    if (min_samples < 1) throw ParameterError("hdbscan: min_samples must be >= 1");
    if (n <= min_cluster_size || n < min_samples) {
        throw ParameterError("hdbscan: need N > min_cluster_size and N >= min_samples (N=" + std::to_string(n) +
                             ")");
    }
    ClusterAssignment out;
    out.algorithm = ClusterSpec::hdbscan(min_cluster_size, min_samples);
    const DistanceView dist(coords);

    // Core distance: min_samples-th neighbor counting the point itself.
    std::vector<double> core(n, 0.0);
    if (min_samples > 1) {
        const auto knn = detail::k_nearest(dist, min_samples - 1);
        for (std::size_t i = 0; i < n; ++i) core[i] = knn.dist(i, min_samples - 2);
    }

    // Prim's MST over mutual reachability distances.
    struct MstEdge {
        std::size_t a, b;
        double w;
    };
    std::vector<MstEdge> mst;
    mst.reserve(n - 1);
    {
        std::vector<char> in_tree(n, 0);
        std::vector<double> best(n, std::numeric_limits<double>::infinity());
        std::vector<std::size_t> from(n, 0);
        std::vector<double> row(n);
        std::size_t current = 0;
        in_tree[0] = 1;
        for (std::size_t step = 1; step < n; ++step) {
            dist.squared_row(current, row);
            std::size_t next = n;
            double next_w = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                if (in_tree[j]) continue;
                const double m = std::max({std::sqrt(row[j]), core[current], core[j]});
                if (m < best[j]) {
                    best[j] = m;
                    from[j] = current;
                }
                if (best[j] < next_w || next == n) {
                    next_w = best[j];
                    next = j;
                }
            }
            in_tree[next] = 1;
            mst.push_back({from[next], next, next_w});
            current = next;
        }
    }
    std::stable_sort(mst.begin(), mst.end(), [](const MstEdge& x, const MstEdge& y) { return x.w < y.w; });
    const double max_w = mst.back().w;

    if (max_w <= 0.0) {
        out.labels.assign(n, 0);
        out.n_clusters = 1;
        out.diagnostics.notes.push_back("all points coincide; returned a single cluster");
        return out;
    }

    // Single-linkage tree: nodes < n are points, n + m is merge m.
    std::vector<LinkageNode> nodes(2 * n - 1);
    for (std::size_t i = 0; i < n; ++i) nodes[i].size = 1;
    {
        UnionFind uf(n);
        std::vector<std::size_t> node_of(n);
        std::iota(node_of.begin(), node_of.end(), std::size_t{0});
        for (std::size_t m = 0; m < mst.size(); ++m) {
            const std::size_t ra = uf.find(mst[m].a), rb = uf.find(mst[m].b);
            auto& node = nodes[n + m];
            node.left = node_of[ra];
            node.right = node_of[rb];
            node.distance = mst[m].w;
            node.size = nodes[node.left].size + nodes[node.right].size;
            uf.unite(ra, rb);
            node_of[uf.find(ra)] = n + m;
        }
    }

    // Condense: clusters are numbered from n, root = n, children after parents.
    const double floor = max_w * 1e-12;
    auto lambda_of = [floor](double d) { return 1.0 / std::max(d, floor); };
    const std::size_t root = 2 * n - 2;
    std::vector<std::size_t> relabel(2 * n - 1, 0);
    relabel[root] = n;
    std::size_t next_label = n + 1;
    std::vector<CondensedEdge> tree;
    std::vector<std::size_t> queue{root};
    std::vector<std::size_t> leaves;
    auto fall_out = [&](std::size_t sub, std::size_t parent_label, double lambda) {
        leaves.assign(1, sub);
        while (!leaves.empty()) {
            const std::size_t v = leaves.back();
            leaves.pop_back();
            if (v < n) {
                tree.push_back({parent_label, v, lambda, 1});
            } else {
                leaves.push_back(nodes[v].left);
                leaves.push_back(nodes[v].right);
            }
        }
    };
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const std::size_t v = queue[qi];
        const auto& node = nodes[v];
        const double lambda = lambda_of(node.distance);
        const std::size_t l = node.left, r = node.right;
        const bool big_l = nodes[l].size >= min_cluster_size, big_r = nodes[r].size >= min_cluster_size;
        const std::size_t here = relabel[v];
        if (big_l && big_r) {
            for (const std::size_t c : {l, r}) {
                relabel[c] = next_label++;
                tree.push_back({here, relabel[c], lambda, nodes[c].size});
                queue.push_back(c);
            }
        } else if (!big_l && !big_r) {
            fall_out(l, here, lambda);
            fall_out(r, here, lambda);
        } else {
            const std::size_t keep = big_l ? l : r, drop = big_l ? r : l;
            fall_out(drop, here, lambda);
            if (keep < n) {
                tree.push_back({here, keep, lambda, 1});
            } else {
                relabel[keep] = here;
                queue.push_back(keep);
            }
        }
    }

    // Excess-of-mass selection.
    const std::size_t n_tree_clusters = next_label - n;
    std::vector<double> birth(n_tree_clusters, 0.0);
    std::vector<double> stability(n_tree_clusters, 0.0);
    std::vector<std::size_t> parent_of(n_tree_clusters, 0);
    std::vector<std::vector<std::size_t>> children(n_tree_clusters);
    for (const auto& e : tree) {
        if (e.child >= n) {
            birth[e.child - n] = e.lambda;
            parent_of[e.child - n] = e.parent - n;
            children[e.parent - n].push_back(e.child - n);
        }
    }
    for (const auto& e : tree) {
        stability[e.parent - n] += (e.lambda - birth[e.parent - n]) * static_cast<double>(e.size);
    }
    std::vector<char> selected(n_tree_clusters, 1);
    selected[0] = 0;
    std::vector<double> subtree(stability);
    for (std::size_t c = n_tree_clusters; c-- > 1;) {
        double child_sum = 0.0;
        for (const auto ch : children[c]) child_sum += subtree[ch];
        if (child_sum > stability[c]) {
            selected[c] = 0;
            subtree[c] = child_sum;
        } else {
            std::vector<std::size_t> stack(children[c]);
            while (!stack.empty()) {
                const std::size_t d = stack.back();
                stack.pop_back();
                selected[d] = 0;
                stack.insert(stack.end(), children[d].begin(), children[d].end());
            }
        }
    }

    // Each tree cluster inherits its selected ancestor (parents precede children).
    std::vector<std::int64_t> owner(n_tree_clusters, -1);
    for (std::size_t c = 1; c < n_tree_clusters; ++c) {
        owner[c] = selected[c] ? static_cast<std::int64_t>(c) : owner[parent_of[c]];
    }
    std::vector<std::int32_t> labels(n, -1);
    for (const auto& e : tree) {
        if (e.child < n) labels[e.child] = static_cast<std::int32_t>(owner[e.parent - n]);
    }
    out.labels = canonical_labels(labels);
    out.n_clusters = count_clusters(out.labels);
    std::vector<double> chosen;
    for (std::size_t c = 1; c < n_tree_clusters; ++c)
        if (selected[c]) chosen.push_back(stability[c]);
    out.diagnostics.series["selected_stability"] = std::move(chosen);
    out.diagnostics.scalars["condensed_clusters"] = static_cast<double>(n_tree_clusters);
    return out;
}

std::vector<WardMerge> ward_linkage(const Matrix& coords) {
    require_points(coords, "ward");
    const std::size_t n = coords.rows();
    std::vector<WardMerge> raw;
    if (n == 1) return raw;
    // Packed strict upper triangle of squared Euclidean distances.
    auto idx = [n](std::size_t i, std::size_t j) {
        if (i > j) std::swap(i, j);
        return i * n - i * (i + 1) / 2 + (j - i - 1);
    };
    std::vector<double> d(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d[idx(i, j)] = squared_distance(coords.row(i), coords.row(j));

    std::vector<std::size_t> size(n, 1);
    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), std::size_t{0});
    std::vector<std::size_t> chain;
    raw.reserve(n - 1);
    while (raw.size() < n - 1) {
        if (chain.empty()) chain.push_back(active.front());
        std::size_t x = 0, y = 0;
        while (true) {
            x = chain.back();
            double current = std::numeric_limits<double>::infinity();
            y = n;
            if (chain.size() >= 2) {
                y = chain[chain.size() - 2];
                current = d[idx(x, y)];
            }
            for (const std::size_t i : active) {
                if (i == x) continue;
                const double v = d[idx(x, i)];
                if (v < current) {
                    current = v;
                    y = i;
                }
            }
            if (chain.size() >= 2 && y == chain[chain.size() - 2]) break;
            chain.push_back(y);
        }
        chain.pop_back();
        chain.pop_back();
        if (x > y) std::swap(x, y);
        const double dxy = d[idx(x, y)];
        const std::size_t nx = size[x], ny = size[y];
        raw.push_back({x, y, std::sqrt(dxy), nx + ny});
        // Merged cluster lives in slot y.
        active.erase(std::find(active.begin(), active.end(), x));
        for (const std::size_t k : active) {
            if (k == y) continue;
            const double nk = static_cast<double>(size[k]);
            const double t = static_cast<double>(nx + ny) + nk;
            d[idx(k, y)] = ((static_cast<double>(nx) + nk) * d[idx(k, x)] + (static_cast<double>(ny) + nk) * d[idx(k, y)] -
                            nk * dxy) /
                           t;
        }
        size[x] = 0;
        size[y] = nx + ny;
    }

    std::stable_sort(raw.begin(), raw.end(),
                     [](const WardMerge& a, const WardMerge& b) { return a.height < b.height; });
    // Translate slot ids into node ids.
    UnionFind uf(n);
    std::vector<std::size_t> node_of(n);
    std::iota(node_of.begin(), node_of.end(), std::size_t{0});
    std::vector<WardMerge> merges(raw.size());
    for (std::size_t m = 0; m < raw.size(); ++m) {
        const std::size_t ra = uf.find(raw[m].left), rb = uf.find(raw[m].right);
        std::size_t a = node_of[ra], b = node_of[rb];
        if (a > b) std::swap(a, b);
        merges[m] = {a, b, raw[m].height, raw[m].size};
        uf.unite(ra, rb);
        node_of[uf.find(ra)] = n + m;
    }
    return merges;
}

std::vector<std::int32_t> cut_linkage(const std::vector<WardMerge>& merges, std::size_t n, std::size_t k) {
    if (k < 1 || k > n) {
        throw ParameterError("k=" + std::to_string(k) + " must lie in [1, N] (N=" + std::to_string(n) + ")");
    }
    if (merges.size() + 1 != n) throw ParameterError("linkage does not describe " + std::to_string(n) + " points");
    // Leaf sets of each node via union-find over points.
    UnionFind uf(n);
    std::vector<std::size_t> rep(2 * n - 1);
    std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
    for (std::size_t m = 0; m < n - k; ++m) {
        uf.unite(rep[merges[m].left], rep[merges[m].right]);
        rep[n + m] = uf.find(rep[merges[m].left]);
    }
    std::vector<std::int32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::int32_t>(uf.find(i));
    return canonical_labels(labels);
}

ClusterAssignment ward_hierarchical(const Matrix& coords, std::size_t k) {
    require_points(coords, "ward");
    const std::size_t n = coords.rows();
    if (k < 1 || k > n) {
        throw ParameterError("ward: k=" + std::to_string(k) + " must lie in [1, N] (N=" + std::to_string(n) + ")");
    }
    const auto merges = ward_linkage(coords);
    ClusterAssignment out;
    out.labels = cut_linkage(merges, n, k);
    out.n_clusters = count_clusters(out.labels);
    out.algorithm = ClusterSpec::ward(k);
    auto& heights = out.diagnostics.series["merge_heights"];
    heights.reserve(merges.size());
    for (const auto& m : merges) heights.push_back(m.height);
    return out;
}

namespace {

KMeansResult kmeans_once(const Matrix& x, std::size_t k, Rng& rng, std::size_t max_iter) {
    const std::size_t n = x.rows(), dim = x.cols();
    Matrix centers(k, dim);
    // Greedy k-means++ with 2 + floor(ln k) candidates per step.
    std::vector<double> closest(n);
    const std::size_t first = static_cast<std::size_t>(rng.below(n));
    std::copy_n(x.row(first).begin(), dim, centers.row(0).begin());
    double pot = 0.0;
    for (std::size_t i = 0; i < n; ++i) pot += closest[i] = squared_distance(x.row(i), centers.row(0));
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
    std::vector<double> candidate_d(n), best_d(n);
    for (std::size_t c = 1; c < k; ++c) {
        std::size_t best_idx = 0;
        double best_pot = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < trials; ++t) {
            std::size_t pick = 0;
            if (pot > 0.0) {
                const double target = rng.uniform() * pot;
                double acc = 0.0;
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += closest[i];
                    if (acc > target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(rng.below(n));
            }
            double p = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                candidate_d[i] = std::min(closest[i], squared_distance(x.row(i), x.row(pick)));
                p += candidate_d[i];
            }
            if (p < best_pot) {
                best_pot = p;
                best_idx = pick;
                best_d.swap(candidate_d);
            }
        }
        std::copy_n(x.row(best_idx).begin(), dim, centers.row(c).begin());
        closest.swap(best_d);
        pot = best_pot;
    }

    double total_var = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) total_var += (x(i, j) - mean) * (x(i, j) - mean);
    }
    const double tol = 1e-4 * total_var / static_cast<double>(n * dim);

    std::vector<std::int32_t> labels(n, -1);
    std::vector<double> dmin(n);
    Matrix next(k, dim);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::int32_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double v = squared_distance(x.row(i), centers.row(c));
                if (v < best) {
                    best = v;
                    arg = static_cast<std::int32_t>(c);
                }
            }
            changed |= labels[i] != arg;
            labels[i] = arg;
            dmin[i] = best;
        }
        std::fill(next.values().begin(), next.values().end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(labels[i]);
            ++counts[c];
            for (std::size_t j = 0; j < dim; ++j) next(c, j) += x(i, j);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Relocate an empty center to the point farthest from its own.
                const auto far = static_cast<std::size_t>(std::max_element(dmin.begin(), dmin.end()) - dmin.begin());
                std::copy_n(x.row(far).begin(), dim, next.row(c).begin());
                dmin[far] = 0.0;
                changed = true;
                continue;
            }
            for (std::size_t j = 0; j < dim; ++j) next(c, j) /= static_cast<double>(counts[c]);
        }
        double shift = 0.0;
        for (std::size_t v = 0; v < next.values().size(); ++v) {
            const double delta = next.values()[v] - centers.values()[v];
            shift += delta * delta;
        }
        std::swap(centers, next);
        if (!changed || shift <= tol) break;
    }
    KMeansResult r;
    r.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::int32_t arg = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double v = squared_distance(x.row(i), centers.row(c));
            if (v < best) {
                best = v;
                arg = static_cast<std::int32_t>(c);
            }
        }
        labels[i] = arg;
        r.inertia += best;
    }
    r.centers = std::move(centers);
    r.labels = std::move(labels);
    return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& coords, std::size_t k, std::uint64_t seed, std::size_t n_init,
                    std::size_t max_iter) {
    require_points(coords, "kmeans");
    if (k < 1 || k > coords.rows()) throw ParameterError("kmeans: k must lie in [1, N]");
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t run = 0; run < std::max<std::size_t>(n_init, 1); ++run) {
        Rng rng(derive_seed(seed, "kmeans", run));
        auto r = kmeans_once(coords, k, rng, max_iter);
        if (r.inertia < best.inertia) best = std::move(r);
    }
    return best;
}

namespace {

struct GmmFit {
    Matrix resp;
    std::vector<double> log_likelihood;
    bool converged = false;
    std::size_t iterations = 0;
};

struct Mixture {
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> chol;
};

Mixture m_step(const Matrix& x, const Matrix& resp, double reg) {
    const std::size_t n = x.rows(), dim = x.cols(), k = resp.cols();
    const auto X = detail::as_eigen(x);
    const auto R = detail::as_eigen(resp);
    Mixture mix;
    mix.weights.resize(k);
    mix.means.resize(k);
    mix.chol.resize(k);
    const double eps10 = 10.0 * std::numeric_limits<double>::epsilon();
    for (std::size_t c = 0; c < k; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        const double nk = R.col(ci).sum() + eps10;
        mix.weights[c] = nk / static_cast<double>(n);
        Eigen::VectorXd mean = (X.transpose() * R.col(ci)) / nk;
        Eigen::MatrixXd diff = X.rowwise() - mean.transpose();
        Eigen::MatrixXd cov = (diff.array().colwise() * R.col(ci).array()).matrix().transpose() * diff / nk;
        cov.diagonal().array() += reg;
        mix.chol[c].compute(cov);
        if (mix.chol[c].info() != Eigen::Success) {
            throw NumericError("gmm: covariance of component " + std::to_string(c) +
                               " is singular despite regularization");
        }
        const auto& L = mix.chol[c].matrixL();
        for (std::size_t j = 0; j < dim; ++j) {
            const double v = L(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw NumericError("gmm: covariance of component " + std::to_string(c) +
                                   " is singular despite regularization");
            }
        }
        mix.means[c] = std::move(mean);
    }
    return mix;
}

/// Fills resp with responsibilities and returns the mean log-likelihood.
double e_step(const Matrix& x, const Mixture& mix, Matrix& resp) {
    const std::size_t n = x.rows(), dim = x.cols(), k = mix.weights.size();
    const auto X = detail::as_eigen(x);
    auto R = detail::as_eigen(resp);
    const double log2pi = std::log(2.0 * M_PI);
    for (std::size_t c = 0; c < k; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        const Eigen::MatrixXd L = mix.chol[c].matrixL();
        double log_det = 0.0;
        for (Eigen::Index j = 0; j < L.rows(); ++j) log_det += std::log(L(j, j));
        Eigen::MatrixXd diff = (X.rowwise() - mix.means[c].transpose()).transpose();
        L.triangularView<Eigen::Lower>().solveInPlace(diff);
        const Eigen::VectorXd maha = diff.colwise().squaredNorm().transpose();
        R.col(ci) = (-0.5 * (static_cast<double>(dim) * log2pi + maha.array()) - log_det +
                     std::log(mix.weights[c]))
                        .matrix();
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double mx = R.row(ii).maxCoeff();
        const double lse = mx + std::log((R.row(ii).array() - mx).exp().sum());
        R.row(ii) = (R.row(ii).array() - lse).exp().matrix();
        total += lse;
    }
    return total / static_cast<double>(n);
}

GmmFit fit_gmm(const Matrix& x, std::size_t k, std::uint64_t seed, const GmmOptions& opt) {
    const std::size_t n = x.rows(), dim = x.cols();
    if (k < 1 || k >= n) {
        throw ParameterError("gmm: k=" + std::to_string(k) + " must lie in [1, N-1] (N=" + std::to_string(n) + ")");
    }
    if (k * dim * dim > opt.max_covariance_values) {
        throw ParameterError("gmm: " + std::to_string(k) + " full covariances of dimension " + std::to_string(dim) +
                             " exceed the configured memory limit");
    }
    const auto init = kmeans(x, k, seed, opt.n_init_kmeans);
    GmmFit fit;
    fit.resp = Matrix(n, k, 0.0);
    for (std::size_t i = 0; i < n; ++i) fit.resp(i, static_cast<std::size_t>(init.labels[i])) = 1.0;
    Mixture mix = m_step(x, fit.resp, opt.reg_covar);
    double lower = -std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        const double prev = lower;
        lower = e_step(x, mix, fit.resp);
        fit.log_likelihood.push_back(lower);
        fit.iterations = it;
        mix = m_step(x, fit.resp, opt.reg_covar);
        if (std::abs(lower - prev) < opt.tol) {
            fit.converged = true;
            break;
        }
    }
    const double final_ll = e_step(x, mix, fit.resp);
    fit.log_likelihood.push_back(final_ll);
    return fit;
}

}  // namespace

Matrix gmm_responsibilities(const Matrix& coords, std::size_t k, std::uint64_t seed, const GmmOptions& options) {
    require_points(coords, "gmm");
    return fit_gmm(coords, k, seed, options).resp;
}

ClusterAssignment gmm(const Matrix& coords, std::size_t k, std::uint64_t seed, const GmmOptions& options) {
    require_points(coords, "gmm");
    auto fit = fit_gmm(coords, k, seed, options);
    std::vector<std::int32_t> labels(coords.rows());
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        const auto r = fit.resp.row(i);
        labels[i] = static_cast<std::int32_t>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    ClusterAssignment out;
    out.labels = canonical_labels(labels);
    out.n_clusters = count_clusters(out.labels);
    out.algorithm = ClusterSpec::gmm(k, seed);
    out.diagnostics.series["log_likelihood"] = std::move(fit.log_likelihood);
    out.diagnostics.scalars["iterations"] = static_cast<double>(fit.iterations);
    out.diagnostics.scalars["converged"] = fit.converged ? 1.0 : 0.0;
    if (!fit.converged) out.diagnostics.notes.push_back("EM stopped at max_iter before converging");
    return out;
}

ClusterAssignment run_clustering(const Matrix& coords, const ClusterSpec& spec) {
    auto as_count = [&spec](const char* key, double fallback) {
        const double v = spec.param(key, fallback);
        if (!(v >= 0) || v != std::floor(v)) {
            throw ParameterError(std::string(key) + " must be a non-negative integer");
        }
        return static_cast<std::size_t>(v);
    };
    ClusterAssignment out;
    switch (spec.method) {
        case ClusterMethod::DBSCAN: {
            const std::size_t ms = as_count("min_samples", 5);
            double eps = spec.param("eps", 0.0);
            if (eps <= 0.0) {
                const double base = auto_epsilon(coords, ms);
                eps = spec.param("eps_scale", 1.0) * base;
                out = dbscan(coords, eps, ms);
                out.diagnostics.scalars["auto_epsilon"] = base;
            } else {
                out = dbscan(coords, eps, ms);
            }
            break;
        }
        case ClusterMethod::HDBSCAN:
            out = hdbscan(coords, as_count("min_cluster_size", 15), as_count("min_samples", 5));
            break;
        case ClusterMethod::Ward:
            out = ward_hierarchical(coords, as_count("k", 0));
            break;
        case ClusterMethod::GMM:
            out = gmm(coords, as_count("k", 0), spec.seed);
            break;
    }
    out.algorithm = spec;
    return out;
}

}  // namespace zeroclust
