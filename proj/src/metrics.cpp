#include "zeroclust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json_util.hpp"
#include "linalg.hpp"
#include "zeroclust/error.hpp"

namespace zeroclust {

std::string to_string(OutlierMode m) {
    return m == OutlierMode::Exclude ? "exclude" : "singletons";
}

OutlierMode parse_outlier_mode(const std::string& s) {
    if (s == "exclude") return OutlierMode::Exclude;
    if (s == "singletons" || s == "as_singletons") return OutlierMode::AsSingletons;
    throw ParameterError("outlier_mode: expected 'exclude' or 'singletons', got '" + s + "'");
}

namespace {

ContingencyTable finish_table(ContingencyTable t) {
    t.cluster_sizes.assign(t.n_clusters, 0);
    t.species_sizes.assign(t.n_species, 0);
    t.total = 0;
    for (std::size_t k = 0; k < t.n_clusters; ++k) {
        for (std::size_t s = 0; s < t.n_species; ++s) {
            const auto v = t.at(k, s);
            t.cluster_sizes[k] += v;
            t.species_sizes[s] += v;
            t.total += v;
        }
    }
    return t;
}

double entropy(const std::vector<std::int64_t>& sizes, double n) {
    double h = 0.0;
    for (const auto c : sizes) {
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
        }
    }
    return h;
}

double choose2(double n) {
    return n * (n - 1.0) / 2.0;
}

std::size_t positive_count(const std::vector<std::int64_t>& v) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](std::int64_t x) { return x > 0; }));
}

}  // namespace

ContingencyTable contingency(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                             OutlierMode mode) {
    if (pred.size() != truth.size()) {
        throw ValidationError("contingency: " + std::to_string(pred.size()) + " predicted labels vs " +
                             std::to_string(truth.size()) + " true labels");
    }
    std::map<std::int32_t, std::size_t> species;
    for (const auto s : truth) {
        if (s < 0) throw ParameterError("contingency: true labels must be non-negative");
        species.emplace(s, 0);
    }
    std::map<std::int32_t, std::size_t> clusters;
    std::size_t n_singletons = 0;
    for (const auto p : pred) {
        if (p >= 0) {
            clusters.emplace(p, 0);
        } else if (p == -1) {
            ++n_singletons;
        } else {
            throw ParameterError("contingency: predicted labels must be >= -1");
        }
    }
    if (mode == OutlierMode::Exclude) n_singletons = 0;
    if (clusters.empty() && n_singletons == 0) {
        throw DegenerateInputError("contingency: every point is an outlier");
    }
    ContingencyTable t;
    for (auto& [id, idx] : species) {
        idx = t.species_ids.size();
        t.species_ids.push_back(id);
    }
    for (auto& [id, idx] : clusters) {
        idx = t.cluster_ids.size();
        t.cluster_ids.push_back(id);
    }
    t.cluster_ids.resize(clusters.size() + n_singletons, -1);
    t.n_clusters = t.cluster_ids.size();
    t.n_species = t.species_ids.size();
    t.counts.assign(t.n_clusters * t.n_species, 0);
    std::size_t next_singleton = clusters.size();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        std::size_t k = 0;
        if (pred[i] >= 0) {
            k = clusters.at(pred[i]);
        } else if (mode == OutlierMode::AsSingletons) {
            k = next_singleton++;
        } else {
            continue;
        }
        ++t.counts[k * t.n_species + species.at(truth[i])];
    }
    return finish_table(std::move(t));
}

ContingencyTable contingency_from_counts(const std::vector<std::vector<std::int64_t>>& counts) {
    ContingencyTable t;
    t.n_clusters = counts.size();
    t.n_species = counts.empty() ? 0 : counts.front().size();
    for (const auto& row : counts) {
        if (row.size() != t.n_species) throw ParameterError("contingency: ragged count matrix");
        for (const auto v : row) {
            if (v < 0) throw ParameterError("contingency: negative count");
            t.counts.push_back(v);
        }
    }
    t.cluster_ids.resize(t.n_clusters);
    std::iota(t.cluster_ids.begin(), t.cluster_ids.end(), 0);
    t.species_ids.resize(t.n_species);
    std::iota(t.species_ids.begin(), t.species_ids.end(), 0);
    t = finish_table(std::move(t));
    if (t.total == 0) throw DegenerateInputError("contingency: empty table");
    return t;
}

double v_measure_from(double h, double c) {
    return h + c == 0.0 ? 0.0 : 2.0 * h * c / (h + c);
}

HomogeneityCompleteness homogeneity_completeness_v(const ContingencyTable& t) {
    const double n = static_cast<double>(t.total);
    const double h_species = entropy(t.species_sizes, n);
    const double h_clusters = entropy(t.cluster_sizes, n);
    double h_species_given_cluster = 0.0, h_cluster_given_species = 0.0;
    for (std::size_t k = 0; k < t.n_clusters; ++k) {
        for (std::size_t s = 0; s < t.n_species; ++s) {
            const auto v = t.at(k, s);
            if (v == 0) continue;
            const double nks = static_cast<double>(v);
            h_species_given_cluster -= nks / n * std::log(nks / static_cast<double>(t.cluster_sizes[k]));
            h_cluster_given_species -= nks / n * std::log(nks / static_cast<double>(t.species_sizes[s]));
        }
    }
    HomogeneityCompleteness r;
    r.homogeneity = h_species == 0.0 ? 1.0 : 1.0 - h_species_given_cluster / h_species;
    r.completeness = h_clusters == 0.0 ? 1.0 : 1.0 - h_cluster_given_species / h_clusters;
    r.v_measure = v_measure_from(r.homogeneity, r.completeness);
    return r;
}

double mutual_information(const ContingencyTable& t) {
    const double n = static_cast<double>(t.total);
    double mi = 0.0;
    for (std::size_t k = 0; k < t.n_clusters; ++k) {
        for (std::size_t s = 0; s < t.n_species; ++s) {
            const auto v = t.at(k, s);
            if (v == 0) continue;
            const double nks = static_cast<double>(v);
            mi += nks / n *
                  std::log(n * nks / (static_cast<double>(t.cluster_sizes[k]) * static_cast<double>(t.species_sizes[s])));
        }
    }
    return std::max(mi, 0.0);
}

double expected_mutual_information(const ContingencyTable& t) {
    const std::int64_t n = t.total;
    std::vector<double> log_fact(static_cast<std::size_t>(n) + 1);
    for (std::int64_t m = 0; m <= n; ++m) log_fact[static_cast<std::size_t>(m)] = std::lgamma(static_cast<double>(m) + 1.0);
    auto lf = [&log_fact](std::int64_t m) { return log_fact[static_cast<std::size_t>(m)]; };
    const double nd = static_cast<double>(n);
    double emi = 0.0;
    for (const auto a : t.cluster_sizes) {
        if (a == 0) continue;
        for (const auto b : t.species_sizes) {
            if (b == 0) continue;
            const double fixed = lf(a) + lf(b) + lf(n - a) + lf(n - b) - lf(n);
            const double log_ab = std::log(static_cast<double>(a)) + std::log(static_cast<double>(b));
            for (std::int64_t nij = std::max<std::int64_t>(1, a + b - n); nij <= std::min(a, b); ++nij) {
                const double x = static_cast<double>(nij);
                const double log_p = fixed - lf(nij) - lf(a - nij) - lf(b - nij) - lf(n - a - b + nij);
                emi += x / nd * (std::log(nd * x) - log_ab) * std::exp(log_p);
            }
        }
    }
    return emi;
}

AmiResult ami(const ContingencyTable& t) {
    const std::size_t k = positive_count(t.cluster_sizes), s = positive_count(t.species_sizes);
    if (k == 1 && s == 1) return {1.0, false};
    const double n = static_cast<double>(t.total);
    const double mi = mutual_information(t);
    const double emi = expected_mutual_information(t);
    const double mean_h = 0.5 * (entropy(t.cluster_sizes, n) + entropy(t.species_sizes, n));
    const double denom = mean_h - emi;
    if (std::abs(denom) < 1e-15) return {0.0, true};
    return {(mi - emi) / denom, false};
}

double ari(const ContingencyTable& t) {
    if (t.total < 2) throw DegenerateInputError("ari: need at least two points");
    double pairs = 0.0, rows = 0.0, cols = 0.0;
    for (const auto v : t.counts) pairs += choose2(static_cast<double>(v));
    for (const auto v : t.cluster_sizes) rows += choose2(static_cast<double>(v));
    for (const auto v : t.species_sizes) cols += choose2(static_cast<double>(v));
    const double expected = rows * cols / choose2(static_cast<double>(t.total));
    const double max_index = 0.5 * (rows + cols);
    if (max_index == expected) {
        // Only possible when both partitions are all-singletons or single-block.
        return positive_count(t.cluster_sizes) == positive_count(t.species_sizes) && pairs == rows && pairs == cols
                   ? 1.0
                   : 0.0;
    }
    return (pairs - expected) / (max_index - expected);
}

double purity(const ContingencyTable& t) {
    std::int64_t sum = 0;
    for (std::size_t k = 0; k < t.n_clusters; ++k) {
        std::int64_t best = 0;
        for (std::size_t s = 0; s < t.n_species; ++s) best = std::max(best, t.at(k, s));
        sum += best;
    }
    return static_cast<double>(sum) / static_cast<double>(t.total);
}

double silhouette(const Matrix& coords, std::span<const std::int32_t> labels) {
    if (coords.rows() != labels.size()) throw ValidationError("silhouette: coords and labels differ in length");
    std::vector<std::size_t> keep;
    std::map<std::int32_t, std::size_t> ids;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        keep.push_back(i);
        ids.emplace(labels[i], 0);
    }
    if (ids.size() < 2) throw DegenerateInputError("silhouette: needs at least two clusters");
    std::size_t next = 0;
    for (auto& [id, idx] : ids) idx = next++;
    const Matrix x = coords.select_rows(keep);
    const std::size_t n = x.rows(), k = ids.size();
    std::vector<std::size_t> lab(n);
    std::vector<double> size(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        lab[i] = ids.at(labels[keep[i]]);
        size[lab[i]] += 1.0;
    }
    const detail::DistanceView dist(x);
    std::vector<double> row(n), sums(k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (size[lab[i]] <= 1.0) continue;
        dist.squared_row(i, row);
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) sums[lab[j]] += std::sqrt(row[j]);
        const double a = sums[lab[i]] / (size[lab[i]] - 1.0);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c != lab[i]) b = std::min(b, sums[c] / size[c]);
        }
        const double m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(n);
}

std::string to_string(Behavior b) {
    switch (b) {
        case Behavior::Ideal: return "ideal";
        case Behavior::Oversplit: return "oversplit";
        case Behavior::Merged: return "merged";
        case Behavior::Mixed: return "mixed";
    }
    return "mixed";
}

Behavior classify_behavior(double isolation_index, double ecc, const BehaviorThresholds& th) {
    const bool isolated = isolation_index >= th.isolation;
    const bool split = ecc >= th.oversplit_ecc;
    if (isolated) return split ? Behavior::Oversplit : Behavior::Ideal;
    return split ? Behavior::Mixed : Behavior::Merged;
}

std::vector<SpeciesDiagnostics> species_diagnostics(const ContingencyTable& t, const BehaviorThresholds& th,
                                                    std::span<const std::string> names) {
    std::vector<SpeciesDiagnostics> out(t.n_species);
    for (std::size_t s = 0; s < t.n_species; ++s) {
        auto& d = out[s];
        d.species = t.species_ids[s];
        const auto sid = static_cast<std::size_t>(d.species);
        if (sid < names.size()) d.name = names[sid];
        d.n_clustered = t.species_sizes[s];
        d.present = d.n_clustered > 0;
        if (!d.present) continue;
        double ii = 0.0, ecc = 0.0;
        for (std::size_t k = 0; k < t.n_clusters; ++k) {
            const double nsc = static_cast<double>(t.at(k, s));
            if (nsc == 0.0) continue;
            const double c = static_cast<double>(t.cluster_sizes[k]);
            ii += nsc * nsc / c;
            ecc += nsc / c;
        }
        d.isolation_index = ii / static_cast<double>(d.n_clustered);
        d.effective_cluster_count = ecc;
        d.behavior = classify_behavior(d.isolation_index, ecc, th);
    }
    return out;
}

std::string to_string(Fate f) {
    switch (f) {
        case Fate::Outlier: return "outlier";
        case Fate::Merged: return "merged";
        case Fate::OwnCluster: return "own_cluster";
    }
    return "own_cluster";
}

std::vector<SpeciesFate> species_fate(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                                      std::int64_t threshold) {
    if (pred.size() != truth.size()) throw ValidationError("species_fate: label lengths differ");
    std::map<std::int32_t, std::map<std::int32_t, std::int64_t>> per_cluster;  // cluster -> species -> n
    std::map<std::int32_t, std::int64_t> species_n, species_out;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        ++species_n[truth[i]];
        if (pred[i] < 0) {
            ++species_out[truth[i]];
        } else {
            ++per_cluster[pred[i]][truth[i]];
        }
    }
    std::map<std::int32_t, std::int64_t> cluster_max;
    for (const auto& [c, counts] : per_cluster) {
        std::int64_t m = 0;
        for (const auto& [s, v] : counts) m = std::max(m, v);
        cluster_max[c] = m;
    }
    std::vector<SpeciesFate> out;
    for (const auto& [s, n] : species_n) {
        if (n >= threshold) continue;
        SpeciesFate f;
        f.species = s;
        f.n_images = n;
        f.n_outliers = species_out[s];
        for (const auto& [c, counts] : per_cluster) {
            const auto it = counts.find(s);
            if (it != counts.end() && it->second < cluster_max[c]) f.n_in_foreign_clusters += it->second;
        }
        if (2 * f.n_outliers > n) {
            f.fate = Fate::Outlier;
        } else if (2 * f.n_in_foreign_clusters > n) {
            f.fate = Fate::Merged;
        } else {
            f.fate = Fate::OwnCluster;
        }
        out.push_back(f);
    }
    return out;
}

std::vector<ClusterGeometry> cluster_geometry(const Matrix& coords2d, std::span<const std::int32_t> pred,
                                              std::span<const std::int32_t> truth) {
    if (coords2d.cols() != 2) throw ParameterError("cluster_geometry: expects 2D coordinates");
    if (coords2d.rows() != pred.size() || pred.size() != truth.size()) {
        throw ValidationError("cluster_geometry: coords and labels differ in length");
    }
    struct Acc {
        double x = 0, y = 0;
        std::size_t n = 0;
        std::map<std::int32_t, std::size_t> species;
    };
    std::map<std::int32_t, Acc> acc;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0) continue;
        auto& a = acc[pred[i]];
        a.x += coords2d(i, 0);
        a.y += coords2d(i, 1);
        ++a.n;
        ++a.species[truth[i]];
    }
    std::vector<ClusterGeometry> out;
    for (const auto& [c, a] : acc) {
        std::size_t best = 0;
        for (const auto& [s, v] : a.species) best = std::max(best, v);
        const double n = static_cast<double>(a.n);
        out.push_back({c, a.n, std::hypot(a.x / n, a.y / n), static_cast<double>(best) / n});
    }
    return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t q = i; q <= j; ++q) ranks[order[q]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw ParameterError("spearman: need two equal-length samples");
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

MetricReport evaluate(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth, const Matrix& coords,
                      const EvaluateOptions& options, std::span<const std::string> species_names) {
    MetricReport r;
    r.outlier_mode = options.outlier_mode;
    r.n_outliers = static_cast<std::size_t>(std::count(pred.begin(), pred.end(), -1));
    r.outlier_ratio = pred.empty() ? 0.0 : static_cast<double>(r.n_outliers) / static_cast<double>(pred.size());
    std::int32_t hi = -1;
    for (const auto p : pred) hi = std::max(hi, p);
    {
        std::vector<char> seen(static_cast<std::size_t>(hi + 1), 0);
        for (const auto p : pred)
            if (p >= 0) seen[static_cast<std::size_t>(p)] = 1;
        r.n_clusters = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
    }
    const auto table = contingency(pred, truth, options.outlier_mode);
    const auto hcv = homogeneity_completeness_v(table);
    r.homogeneity = hcv.homogeneity;
    r.completeness = hcv.completeness;
    r.v_measure = hcv.v_measure;
    r.mi = mutual_information(table);
    const auto a = ami(table);
    r.ami = a.value;
    r.ami_undefined = a.undefined;
    r.ari = table.total >= 2 ? ari(table) : 0.0;
    r.purity = purity(table);
    if (options.compute_silhouette && !coords.empty() && r.n_clusters >= 2) {
        r.silhouette = silhouette(coords, pred);
    }
    if (r.n_outliers < pred.size()) {
        const auto excl = options.outlier_mode == OutlierMode::Exclude ? table : contingency(pred, truth);
        r.per_species = species_diagnostics(excl, options.thresholds, species_names);
    }
    return r;
}

std::string to_json_string(const MetricReport& r, int indent) {
    return detail::to_json(r).dump(indent);
}

}  // namespace zeroclust
