#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dbscan_oracle.hpp"
#include "test_support.hpp"
#include "zeroclust/cluster.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/metrics.hpp"
#include "zeroclust/synthetic.hpp"

using namespace zeroclust;
using testing_support::random_matrix;

namespace {

using Labels = std::vector<std::int32_t>;

Matrix two_blobs_2d(std::size_t per, double gap, std::uint64_t seed, Labels* truth = nullptr) {
    Rng rng(seed);
    Matrix x(2 * per, 2);
    for (std::size_t i = 0; i < 2 * per; ++i) {
        const double off = i < per ? 0.0 : gap;
        x(i, 0) = off + rng.normal();
        x(i, 1) = rng.normal();
        if (truth) truth->push_back(i < per ? 0 : 1);
    }
    return x;
}

double ari_of(const Labels& a, const Labels& b) {
    return ari(contingency(a, b, OutlierMode::AsSingletons));
}

Matrix permute_rows(const Matrix& x, const std::vector<std::size_t>& perm) {
    return x.select_rows(perm);
}

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
    return p;
}

void expect_canonical(const ClusterAssignment& a) {
    std::set<std::int32_t> seen;
    for (auto l : a.labels) {
        EXPECT_GE(l, -1);
        if (l >= 0) seen.insert(l);
    }
    EXPECT_EQ(seen.size(), a.n_clusters);
    if (!seen.empty()) EXPECT_EQ(*seen.rbegin(), static_cast<std::int32_t>(a.n_clusters) - 1);
}

}  // namespace

TEST(CanonicalLabels, FirstAppearanceOrder) {
    EXPECT_EQ(canonical_labels(Labels{5, 5, -1, 2, 5, 7}), (Labels{0, 0, -1, 1, 0, 2}));
}

TEST(ClusterSpec, FingerprintsAndParsing) {
    EXPECT_EQ(ClusterSpec::hdbscan(15, 5).fingerprint(), "hdbscan(min_cluster_size=15;min_samples=5)");
    EXPECT_NE(ClusterSpec::gmm(30, 1).fingerprint(), ClusterSpec::gmm(30, 2).fingerprint());
    EXPECT_EQ(parse_cluster_method("agglomerative"), ClusterMethod::Ward);
    EXPECT_THROW(parse_cluster_method("kmeans"), ParameterError);
}

TEST(AutoEpsilon, UnitGrid) {
    Matrix x(10, 1);
    for (std::size_t i = 0; i < 10; ++i) x(i, 0) = static_cast<double>(i);
    EXPECT_DOUBLE_EQ(auto_epsilon(x, 1), 1.0);
}

TEST(AutoEpsilon, SquareCorners) {
    const Matrix x{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    EXPECT_DOUBLE_EQ(auto_epsilon(x, 2), 1.0);
}

TEST(AutoEpsilon, ScalesWithCoordinates) {
    const auto x = random_matrix(50, 3, 1);
    EXPECT_NEAR(auto_epsilon(x.scaled(3.5), 5), 3.5 * auto_epsilon(x, 5), 1e-12);
}

TEST(AutoEpsilon, NeedsMorePointsThanMinSamples) {
    EXPECT_THROW(auto_epsilon(random_matrix(5, 2, 1), 5), ParameterError);
}

TEST(Dbscan, TwoSeparatedBlobs) {
    Labels truth;
    const auto x = two_blobs_2d(100, 20.0, 3, &truth);
    const auto a = dbscan(x, auto_epsilon(x, 5), 5);
    EXPECT_EQ(a.n_clusters, 2u);
    EXPECT_DOUBLE_EQ(ari(contingency(a.labels, truth)), 1.0);
    EXPECT_LT(a.n_outliers(), 40u);
    std::vector<std::vector<double>> pts;
    for (std::size_t i = 0; i < x.rows(); ++i) pts.push_back({x(i, 0), x(i, 1)});
    EXPECT_EQ(a.labels, oracle::dbscan(pts, auto_epsilon(x, 5), 5));
}

TEST(Dbscan, IsolatedPointIsOutlier) {
    Matrix x{{0, 0}, {0.1, 0}, {0, 0.1}, {0.1, 0.1}, {50, 50}};
    const auto a = dbscan(x, 0.5, 3);
    EXPECT_EQ(a.labels.back(), -1);
    EXPECT_EQ(a.n_clusters, 1u);
}

TEST(Dbscan, MatchesTextbookOracle) {
    Rng rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 20 + rng.below(181);
        const auto x = random_matrix(n, 2, 1000 + rep, 3.0);
        std::vector<std::vector<double>> pts(n);
        for (std::size_t i = 0; i < n; ++i) pts[i] = {x(i, 0), x(i, 1)};
        const std::size_t ms = 2 + rng.below(6);
        const double eps = 0.3 + rng.uniform();
        const auto got = dbscan(x, eps, ms);
        const auto want = oracle::dbscan(pts, eps, ms);
        EXPECT_EQ(got.labels, want) << "instance " << rep;
    }
}

TEST(Dbscan, ScaleInvariantWithScaledEps) {
    const auto x = random_matrix(120, 2, 8);
    EXPECT_EQ(dbscan(x, 0.4, 4).labels, dbscan(x.scaled(7.0), 2.8, 4).labels);
}

TEST(Dbscan, RejectsBadParameters) {
    const auto x = random_matrix(10, 2, 1);
    EXPECT_THROW(dbscan(x, 0.0, 3), ParameterError);
    EXPECT_THROW(dbscan(x, 1.0, 0), ParameterError);
}

TEST(Hdbscan, RecoversThirtyBlobs) {
    auto spec = BlobSpec::uniform(30, 200, 2, 5);
    spec.min_separation = 20.0;
    const auto blobs = make_blobs(spec);
    const auto a = hdbscan(blobs.points, 15, 5);
    EXPECT_EQ(a.n_clusters, 30u);
    EXPECT_DOUBLE_EQ(evaluate(a.labels, blobs.labels, Matrix{}, {OutlierMode::Exclude, false, {}}).v_measure, 1.0);
    expect_canonical(a);
}

TEST(Hdbscan, UniformNoiseIsMostlyOutliers) {
    Rng rng(4);
    Matrix x(500, 2);
    for (auto& v : x.values()) v = rng.uniform();
    const auto a = hdbscan(x, 50, 10);
    EXPECT_LE(a.n_clusters, 3u);
    EXPECT_GT(a.n_outliers(), 250u);
}

TEST(Hdbscan, IdenticalPointsFormOneCluster) {
    const Matrix x(40, 3, 1.5);
    const auto a = hdbscan(x, 15, 5);
    EXPECT_EQ(a.n_clusters, 1u);
    EXPECT_EQ(a.n_outliers(), 0u);
}

TEST(Hdbscan, ExactlyScaleInvariant) {
    const auto blobs = make_blobs(BlobSpec::uniform(5, 60, 2, 21));
    EXPECT_EQ(hdbscan(blobs.points, 15, 5).labels, hdbscan(blobs.points.scaled(13.0), 15, 5).labels);
}

TEST(Hdbscan, NoClusterSmallerThanMinClusterSize) {
    auto spec = BlobSpec::long_tail(8, 5, 80, 2, 9);
    spec.min_separation = 6.0;
    spec.sigma = 1.0;
    const auto blobs = make_blobs(spec);
    const auto a = hdbscan(blobs.points, 20, 5);
    std::map<std::int32_t, std::size_t> size;
    for (auto l : a.labels) {
        if (l >= 0) ++size[l];
    }
    for (auto [l, s] : size) EXPECT_GE(s, 20u) << "cluster " << l;
}

TEST(Hdbscan, PermutationInvariantUpToRenaming) {
    const auto blobs = make_blobs(BlobSpec::uniform(6, 50, 2, 33));
    const auto perm = random_permutation(blobs.points.rows(), 1);
    const auto base = hdbscan(blobs.points, 15, 5);
    const auto permuted = hdbscan(permute_rows(blobs.points, perm), 15, 5);
    Labels back(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) back[perm[i]] = permuted.labels[i];
    EXPECT_DOUBLE_EQ(ari_of(base.labels, back), 1.0);
}

TEST(Hdbscan, RejectsTooFewPoints) {
    EXPECT_THROW(hdbscan(random_matrix(10, 2, 1), 15, 5), ParameterError);
}

TEST(Ward, TwoTightPairs) {
    const Matrix x{{0, 0}, {10, 10}, {0.1, 0}, {10, 10.1}};
    const auto a = ward_hierarchical(x, 2);
    EXPECT_EQ(a.labels, (Labels{0, 1, 0, 1}));
}

TEST(Ward, DegenerateCuts) {
    const auto x = random_matrix(12, 3, 2);
    const auto all = ward_hierarchical(x, 12);
    EXPECT_EQ(all.n_clusters, 12u);
    EXPECT_EQ(std::set<std::int32_t>(all.labels.begin(), all.labels.end()).size(), 12u);
    const auto one = ward_hierarchical(x, 1);
    EXPECT_EQ(one.n_clusters, 1u);
    EXPECT_TRUE(std::all_of(one.labels.begin(), one.labels.end(), [](auto l) { return l == 0; }));
    EXPECT_THROW(ward_hierarchical(x, 13), ParameterError);
}

TEST(Ward, HeightsNonDecreasing) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto merges = ward_linkage(random_matrix(60, 4, seed));
        ASSERT_EQ(merges.size(), 59u);
        for (std::size_t m = 1; m < merges.size(); ++m) EXPECT_GE(merges[m].height, merges[m - 1].height);
        EXPECT_EQ(merges.back().size, 60u);
    }
}

TEST(Ward, MatchesWardDistanceOnThreePoints) {
    const Matrix x{{0, 0}, {1, 0}, {5, 0}};
    const auto merges = ward_linkage(x);
    ASSERT_EQ(merges.size(), 2u);
    EXPECT_NEAR(merges[0].height, 1.0, 1e-12);
    // Ward distance between {0,1} and {5}: sqrt(2 * 2*1/3) * |0.5 - 5|
    EXPECT_NEAR(merges[1].height, std::sqrt(2.0 * 2.0 / 3.0) * 4.5, 1e-12);
}

TEST(Ward, RecoversBlobs) {
    const auto blobs = make_blobs(BlobSpec::uniform(30, 40, 8, 4));
    const auto a = ward_hierarchical(blobs.points, 30);
    EXPECT_DOUBLE_EQ(evaluate(a.labels, blobs.labels, Matrix{}, {OutlierMode::Exclude, false, {}}).v_measure, 1.0);
}

TEST(KMeans, SeparatedBlobs) {
    const auto blobs = make_blobs(BlobSpec::uniform(4, 30, 2, 8));
    const auto r = kmeans(blobs.points, 4, 1);
    EXPECT_DOUBLE_EQ(ari_of(r.labels, blobs.labels), 1.0);
}

TEST(Gmm, TwoGaussians) {
    Labels truth;
    const auto x = two_blobs_2d(150, 12.0, 6, &truth);
    const auto a = gmm(x, 2);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) agree += a.labels[i] == a.labels[0] ? truth[i] == truth[0] : truth[i] != truth[0];
    EXPECT_GT(static_cast<double>(agree) / truth.size(), 0.99);
}

TEST(Gmm, LogLikelihoodNonDecreasing) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto blobs = make_blobs(BlobSpec::uniform(5, 40, 2, seed));
        const auto a = gmm(blobs.points, 5, seed);
        const auto& ll = a.diagnostics.series.at("log_likelihood");
        ASSERT_GE(ll.size(), 2u);
        for (std::size_t i = 1; i < ll.size(); ++i) EXPECT_GE(ll[i] - ll[i - 1], -1e-8);
    }
}

TEST(Gmm, SingleComponent) {
    const auto a = gmm(random_matrix(40, 2, 3), 1);
    EXPECT_EQ(a.n_clusters, 1u);
    EXPECT_TRUE(std::all_of(a.labels.begin(), a.labels.end(), [](auto l) { return l == 0; }));
}

TEST(Gmm, ResponsibilitiesSumToOne) {
    const auto blobs = make_blobs(BlobSpec::uniform(3, 30, 2, 2));
    const auto r = gmm_responsibilities(blobs.points, 3);
    for (std::size_t i = 0; i < r.rows(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < r.cols(); ++k) s += r(i, k);
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Gmm, DuplicatePointsStayFinite) {
    Matrix x(30, 2, 0.0);
    for (std::size_t i = 15; i < 30; ++i) x(i, 0) = 1.0;
    const auto a = gmm(x, 2);
    EXPECT_EQ(a.n_clusters, 2u);
}

TEST(Gmm, RejectsOversizedCovariances) {
    GmmOptions opt;
    opt.max_covariance_values = 100;
    EXPECT_THROW(gmm(random_matrix(40, 8, 1), 5, 42, opt), ParameterError);
    EXPECT_THROW(gmm(random_matrix(10, 2, 1), 10), ParameterError);
}

TEST(Gmm, DeterministicForSeed) {
    const auto x = random_matrix(80, 2, 12);
    EXPECT_EQ(gmm(x, 4, 42).labels, gmm(x, 4, 42).labels);
}

TEST(RunClustering, DispatchesAndRecordsEpsilon) {
    const auto blobs = make_blobs(BlobSpec::uniform(3, 40, 2, 1));
    const auto a = run_clustering(blobs.points, ClusterSpec::dbscan(1.0, 5));
    EXPECT_GT(a.diagnostics.scalars.at("eps"), 0.0);
    EXPECT_EQ(a.algorithm.method, ClusterMethod::DBSCAN);
    const auto w = run_clustering(blobs.points, ClusterSpec::ward(3));
    EXPECT_EQ(w.n_clusters, 3u);
    EXPECT_EQ(w.n_outliers(), 0u);
}
