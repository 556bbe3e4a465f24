#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "zeroclust/diagnostics.hpp"
#include "zeroclust/matrix.hpp"

namespace zeroclust {

enum class ClusterMethod { DBSCAN, HDBSCAN, Ward, GMM };

std::string to_string(ClusterMethod m);
ClusterMethod parse_cluster_method(const std::string& s);

/// Which algorithm to run and how. Parameter keys per method:
///   dbscan:  eps_scale (multiplier of auto_epsilon, default 1) or eps (absolute), min_samples (5)
///   hdbscan: min_cluster_size (15), min_samples (5)
///   ward:    k
///   gmm:     k
struct ClusterSpec {
    ClusterMethod method = ClusterMethod::HDBSCAN;
    std::map<std::string, double> params;
    std::uint64_t seed = 42;

    double param(const std::string& key, double fallback) const;
    std::string fingerprint() const;

    static ClusterSpec dbscan(double eps_scale = 1.0, std::size_t min_samples = 5);
    static ClusterSpec hdbscan(std::size_t min_cluster_size = 15, std::size_t min_samples = 5);
    static ClusterSpec ward(std::size_t k);
    static ClusterSpec gmm(std::size_t k, std::uint64_t seed = 42);
};

/// Labels are -1 (outlier) or 0..n_clusters-1.
struct ClusterAssignment {
    std::vector<std::int32_t> labels;
    std::size_t n_clusters = 0;
    ClusterSpec algorithm;
    Diagnostics diagnostics;

    std::size_t n_outliers() const;
};

/// Renumbers non-negative labels by first appearance; -1 stays.
std::vector<std::int32_t> canonical_labels(const std::vector<std::int32_t>& labels);

/// Mean distance to the min_samples-th nearest neighbor (self excluded).
double auto_epsilon(const Matrix& coords, std::size_t min_samples);

/// Core points have at least min_samples points (self included) within eps.
/// Clusters are numbered in order of their lowest-index core point; a border
/// point reachable from several clusters joins the lowest id.
ClusterAssignment dbscan(const Matrix& coords, double eps, std::size_t min_samples);

/// HDBSCAN with excess-of-mass selection. The root is never selected except
/// when every point coincides.
ClusterAssignment hdbscan(const Matrix& coords, std::size_t min_cluster_size, std::size_t min_samples);

struct WardMerge {
    std::size_t left = 0;   ///< node ids: < N are points, N + m is merge m
    std::size_t right = 0;
    double height = 0.0;
    std::size_t size = 0;
};

/// Full Ward hierarchy (N - 1 merges, heights non-decreasing).
std::vector<WardMerge> ward_linkage(const Matrix& coords);
/// Flat labels from the first N - k merges.
std::vector<std::int32_t> cut_linkage(const std::vector<WardMerge>& merges, std::size_t n, std::size_t k);

ClusterAssignment ward_hierarchical(const Matrix& coords, std::size_t k);

struct KMeansResult {
    Matrix centers;
    std::vector<std::int32_t> labels;
    double inertia = 0.0;
};

/// k-means++ seeding and Lloyd iterations; best of n_init restarts.
KMeansResult kmeans(const Matrix& coords, std::size_t k, std::uint64_t seed, std::size_t n_init = 10,
                    std::size_t max_iter = 300);

struct GmmOptions {
    double reg_covar = 1e-6;
    double tol = 1e-4;
    std::size_t max_iter = 200;
    std::size_t n_init_kmeans = 10;
    /// Refuse runs whose covariance storage would exceed this many doubles.
    std::size_t max_covariance_values = std::size_t{1} << 27;
};

/// Full-covariance Gaussian mixture fitted by EM. The mean log-likelihood of
/// every E-step is kept in diagnostics.series["log_likelihood"].
ClusterAssignment gmm(const Matrix& coords, std::size_t k, std::uint64_t seed = 42, const GmmOptions& options = {});

/// Per-point responsibilities of the fitted mixture, N x K. Exposed for tests.
Matrix gmm_responsibilities(const Matrix& coords, std::size_t k, std::uint64_t seed = 42,
                            const GmmOptions& options = {});

ClusterAssignment run_clustering(const Matrix& coords, const ClusterSpec& spec);

}  // namespace zeroclust
