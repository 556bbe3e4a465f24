#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "metrics_oracle.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/metrics.hpp"
#include "zeroclust/rng.hpp"

using namespace zeroclust;

namespace {

using Labels = std::vector<std::int32_t>;

oracle::Partition as_partition(const Labels& pred, const Labels& truth) {
    return {std::vector<int>(pred.begin(), pred.end()), std::vector<int>(truth.begin(), truth.end())};
}

Labels random_labels(Rng& rng, std::size_t n, std::uint64_t k) {
    Labels out(n);
    for (auto& v : out) v = static_cast<std::int32_t>(rng.below(k));
    return out;
}

}  // namespace

TEST(Contingency, DiagonalForMatchingLabels) {
    const auto t = contingency(Labels{0, 0, 1, 1}, Labels{0, 0, 1, 1});
    ASSERT_EQ(t.n_clusters, 2u);
    ASSERT_EQ(t.n_species, 2u);
    EXPECT_EQ(t.at(0, 0), 2);
    EXPECT_EQ(t.at(0, 1), 0);
    EXPECT_EQ(t.at(1, 0), 0);
    EXPECT_EQ(t.at(1, 1), 2);
    EXPECT_EQ(t.total, 4);
}

TEST(Contingency, ExcludeDropsOutliers) {
    const auto t = contingency(Labels{0, -1}, Labels{0, 1});
    EXPECT_EQ(t.total, 1);
    EXPECT_EQ(t.n_clusters, 1u);
}

TEST(Contingency, AllOutliersIsDegenerate) {
    EXPECT_THROW(contingency(Labels{-1, -1}, Labels{0, 1}), DegenerateInputError);
}

TEST(Contingency, SingletonsGiveEachOutlierItsOwnRow) {
    const auto t = contingency(Labels{0, 0, -1, -1}, Labels{0, 0, 1, 1}, OutlierMode::AsSingletons);
    EXPECT_EQ(t.total, 4);
    EXPECT_EQ(t.n_clusters, 3u);
}

TEST(Contingency, MarginsAddUp) {
    Rng rng(5);
    const auto pred = random_labels(rng, 40, 4), truth = random_labels(rng, 40, 3);
    const auto t = contingency(pred, truth);
    std::int64_t total = 0;
    for (std::size_t k = 0; k < t.n_clusters; ++k) {
        std::int64_t row = 0;
        for (std::size_t s = 0; s < t.n_species; ++s) row += t.at(k, s);
        EXPECT_EQ(row, t.cluster_sizes[k]);
        total += row;
    }
    EXPECT_EQ(total, t.total);
    EXPECT_EQ(std::accumulate(t.species_sizes.begin(), t.species_sizes.end(), std::int64_t{0}), t.total);
}

TEST(Contingency, LengthMismatchThrows) {
    EXPECT_THROW(contingency(Labels{0, 1}, Labels{0}), ValidationError);
}

TEST(VMeasure, PerfectClustering) {
    const auto hcv = homogeneity_completeness_v(contingency(Labels{1, 1, 0, 0, 2}, Labels{0, 0, 1, 1, 2}));
    EXPECT_DOUBLE_EQ(hcv.homogeneity, 1.0);
    EXPECT_DOUBLE_EQ(hcv.completeness, 1.0);
    EXPECT_DOUBLE_EQ(hcv.v_measure, 1.0);
}

TEST(VMeasure, HarmonicMeanOfWorkedValues) {
    EXPECT_NEAR(v_measure_from(0.95, 0.50), 0.655, 0.0005);
    EXPECT_EQ(v_measure_from(0.0, 0.0), 0.0);
}

TEST(VMeasure, SingleClusterOverTwoSpecies) {
    const auto hcv = homogeneity_completeness_v(contingency(Labels{0, 0, 0, 0}, Labels{0, 0, 1, 1}));
    EXPECT_NEAR(hcv.homogeneity, 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(hcv.completeness, 1.0);
    EXPECT_NEAR(hcv.v_measure, 0.0, 1e-15);
}

TEST(VMeasure, HomogeneityIsCompletenessTransposed) {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = random_labels(rng, 25, 4), b = random_labels(rng, 25, 3);
        const auto ab = homogeneity_completeness_v(contingency(a, b));
        const auto ba = homogeneity_completeness_v(contingency(b, a));
        EXPECT_NEAR(ab.homogeneity, ba.completeness, 1e-12);
    }
}

TEST(Ami, IdenticalPartitions) {
    const auto r = ami(contingency(Labels{0, 0, 1, 1, 2, 2}, Labels{0, 0, 1, 1, 2, 2}));
    EXPECT_NEAR(r.value, 1.0, 1e-12);
    EXPECT_FALSE(r.undefined);
}

TEST(Ami, OneClusterAgainstTwoSpeciesIsZero) {
    EXPECT_NEAR(ami(contingency(Labels{0, 0, 0, 0}, Labels{0, 0, 1, 1})).value, 0.0, 1e-12);
}

TEST(Ami, BothSingleClassIsOne) {
    EXPECT_DOUBLE_EQ(ami(contingency(Labels{3, 3, 3}, Labels{1, 1, 1})).value, 1.0);
}

TEST(Ami, ExpectedMutualInformationMatchesSummation) {
    Rng rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        const auto pred = random_labels(rng, 12, 3), truth = random_labels(rng, 12, 3);
        EXPECT_NEAR(expected_mutual_information(contingency(pred, truth)),
                    oracle::expected_mutual_info(as_partition(pred, truth)), 1e-12);
    }
}

TEST(Ami, SurvivesLargeN) {
    Rng rng(13);
    const auto pred = random_labels(rng, 12000, 40), truth = random_labels(rng, 12000, 30);
    const auto r = ami(contingency(pred, truth));
    EXPECT_TRUE(std::isfinite(r.value));
    EXPECT_LT(std::abs(r.value), 0.01);
}

TEST(Ari, TwoByTwoPairCount) {
    const auto t = contingency_from_counts({{2, 1}, {1, 2}});
    const Labels pred{0, 0, 0, 1, 1, 1}, truth{0, 0, 1, 0, 1, 1};
    EXPECT_NEAR(ari(t), oracle::ari(as_partition(pred, truth)), 1e-14);
    EXPECT_NEAR(ari(t), -1.0 / 9.0, 1e-14);
}

TEST(Ari, RenamingInvariant) {
    const Labels a{0, 0, 1, 1, 2, 2, 2}, b{7, 7, 3, 3, 5, 5, 5};
    EXPECT_DOUBLE_EQ(ari(contingency(a, b)), 1.0);
}

TEST(Purity, BasicCases) {
    EXPECT_DOUBLE_EQ(purity(contingency(Labels{0, 1}, Labels{0, 1})), 1.0);
    EXPECT_DOUBLE_EQ(purity(contingency(Labels{0, 0, 0, 0}, Labels{0, 0, 1, 1})), 0.5);
    EXPECT_DOUBLE_EQ(purity(contingency_from_counts({{3, 1, 0}, {2, 2, 2}, {0, 0, 5}})), (3.0 + 2.0 + 5.0) / 15.0);
}

TEST(Metrics, RandomInstancesMatchOracle) {
    Rng rng(2024);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 2 + rng.below(29);
        const auto pred = random_labels(rng, n, 1 + rng.below(6));
        const auto truth = random_labels(rng, n, 1 + rng.below(5));
        const auto t = contingency(pred, truth);
        const auto p = as_partition(pred, truth);
        const auto hcv = homogeneity_completeness_v(t);
        EXPECT_NEAR(hcv.homogeneity, oracle::homogeneity(p), 1e-10);
        EXPECT_NEAR(hcv.completeness, oracle::completeness(p), 1e-10);
        EXPECT_NEAR(hcv.v_measure, oracle::v_measure(p), 1e-10);
        EXPECT_NEAR(mutual_information(t), oracle::mutual_info(p), 1e-10);
        EXPECT_NEAR(ami(t).value, oracle::ami(p), 1e-10);
        EXPECT_NEAR(ari(t), oracle::ari(p), 1e-10);
        EXPECT_NEAR(purity(t), oracle::purity(p), 1e-10);
    }
}

TEST(Metrics, PermutationMatrixScoresOne) {
    const auto t = contingency(Labels{2, 2, 0, 1, 1}, Labels{0, 0, 1, 2, 2});
    const auto hcv = homogeneity_completeness_v(t);
    EXPECT_DOUBLE_EQ(hcv.v_measure, 1.0);
    EXPECT_NEAR(ami(t).value, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(ari(t), 1.0);
    EXPECT_DOUBLE_EQ(purity(t), 1.0);
}

TEST(Silhouette, TwoTightPairs) {
    const Matrix x{{0, 0}, {0.1, 0}, {10, 0}, {10.1, 0}};
    EXPECT_GT(silhouette(x, Labels{0, 0, 1, 1}), 0.9);
}

TEST(Silhouette, CoincidentClustersScoreOne) {
    const Matrix x{{0, 0}, {0, 0}, {5, 5}, {5, 5}};
    EXPECT_DOUBLE_EQ(silhouette(x, Labels{0, 0, 1, 1}), 1.0);
}

TEST(Silhouette, PermutationInvariant) {
    const Matrix x{{0, 0}, {1, 0}, {4, 1}, {5, 1}, {2, 2}};
    EXPECT_DOUBLE_EQ(silhouette(x, Labels{0, 0, 1, 1, 0}), silhouette(x, Labels{1, 1, 0, 0, 1}));
}

TEST(Silhouette, NeedsTwoClusters) {
    const Matrix x{{0, 0}, {1, 0}};
    EXPECT_THROW(silhouette(x, Labels{0, 0}), DegenerateInputError);
}

TEST(SpeciesDiagnostics, IdealSplitAndMerged) {
    // species 0 split into two pure clusters of 50, species 1 and 2 share a
    // cluster of 100, species 3 alone
    Labels pred, truth;
    auto add = [&](int n, int c, int s) {
        for (int i = 0; i < n; ++i) pred.push_back(c), truth.push_back(s);
    };
    add(50, 0, 0);
    add(50, 1, 0);
    add(50, 2, 1);
    add(50, 2, 2);
    add(30, 3, 3);
    const auto d = species_diagnostics(contingency(pred, truth));
    ASSERT_EQ(d.size(), 4u);
    EXPECT_DOUBLE_EQ(d[0].isolation_index, 1.0);
    EXPECT_DOUBLE_EQ(d[0].effective_cluster_count, 2.0);
    EXPECT_EQ(d[0].behavior, Behavior::Oversplit);
    EXPECT_DOUBLE_EQ(d[1].isolation_index, 0.5);
    EXPECT_DOUBLE_EQ(d[1].effective_cluster_count, 0.5);
    EXPECT_EQ(d[1].behavior, Behavior::Merged);
    EXPECT_DOUBLE_EQ(d[3].isolation_index, 1.0);
    EXPECT_DOUBLE_EQ(d[3].effective_cluster_count, 1.0);
    EXPECT_EQ(d[3].behavior, Behavior::Ideal);
}

TEST(SpeciesDiagnostics, Classification) {
    EXPECT_EQ(classify_behavior(1.0, 1.0), Behavior::Ideal);
    EXPECT_EQ(classify_behavior(0.95, 1.49), Behavior::Ideal);
    EXPECT_EQ(classify_behavior(0.97, 1.5), Behavior::Oversplit);
    EXPECT_EQ(classify_behavior(0.6, 1.0), Behavior::Merged);
    EXPECT_EQ(classify_behavior(0.6, 2.5), Behavior::Mixed);
    EXPECT_EQ(classify_behavior(0.9, 1.2, {0.8, 1.1}), Behavior::Oversplit);
}

TEST(SpeciesDiagnostics, Identities) {
    Rng rng(77);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 20 + rng.below(80);
        Labels pred = random_labels(rng, n, 7);
        for (auto& v : pred) v -= 1;
        const auto truth = random_labels(rng, n, 5);
        if (std::none_of(pred.begin(), pred.end(), [](auto v) { return v >= 0; })) continue;
        const auto t = contingency(pred, truth);
        const auto d = species_diagnostics(t);
        double ecc = 0.0, weighted_ii = 0.0;
        for (const auto& s : d) {
            if (!s.present) continue;
            ecc += s.effective_cluster_count;
            weighted_ii += static_cast<double>(s.n_clustered) * s.isolation_index;
        }
        EXPECT_NEAR(ecc, static_cast<double>(t.n_clusters), 1e-9);
        double rhs = 0.0;
        for (std::size_t k = 0; k < t.n_clusters; ++k) {
            double sq = 0.0;
            for (std::size_t s = 0; s < t.n_species; ++s) sq += static_cast<double>(t.at(k, s) * t.at(k, s));
            rhs += sq / static_cast<double>(t.cluster_sizes[k]);
        }
        EXPECT_NEAR(weighted_ii, rhs, 1e-9);
    }
}

TEST(SpeciesDiagnostics, FullyOutlieredSpeciesIsAbsent) {
    const auto d = species_diagnostics(contingency(Labels{0, 0, -1, -1}, Labels{0, 0, 1, 1}));
    ASSERT_EQ(d.size(), 2u);
    EXPECT_TRUE(d[0].present);
    EXPECT_FALSE(d[1].present);
}

TEST(SpeciesFate, MajorityRules) {
    Labels pred, truth;
    auto add = [&](int n, int c, int s) {
        for (int i = 0; i < n; ++i) pred.push_back(c), truth.push_back(s);
    };
    add(30, -1, 0);
    add(10, 5, 0);
    add(40, 9, 1);
    add(460, 9, 2);
    add(40, 4, 3);
    const auto f = species_fate(pred, truth, 150);
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f[0].species, 0);
    EXPECT_EQ(f[0].fate, Fate::Outlier);
    EXPECT_EQ(f[1].species, 1);
    EXPECT_EQ(f[1].fate, Fate::Merged);
    EXPECT_EQ(f[2].species, 3);
    EXPECT_EQ(f[2].fate, Fate::OwnCluster);
}

TEST(ClusterGeometry, RadiusAndPurity) {
    const Matrix x{{-1, 0}, {1, 0}, {9, 0}, {11, 0}};
    const auto g = cluster_geometry(x, Labels{0, 0, 1, 1}, Labels{0, 1, 2, 2});
    ASSERT_EQ(g.size(), 2u);
    EXPECT_NEAR(g[0].centroid_radius, 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(g[0].purity, 0.5);
    EXPECT_DOUBLE_EQ(g[1].centroid_radius, 10.0);
    EXPECT_DOUBLE_EQ(g[1].purity, 1.0);
}

TEST(ClusterGeometry, PureClustersSitFarOut) {
    Labels pred, truth;
    Matrix x(12 * 20, 2);
    Rng rng(3);
    std::size_t row = 0;
    for (int k = 0; k < 12; ++k) {
        const double radius = 1.0 + k;
        for (int i = 0; i < 20; ++i, ++row) {
            x(row, 0) = radius * std::cos(0.5 * k) + 0.1 * rng.normal();
            x(row, 1) = radius * std::sin(0.5 * k) + 0.1 * rng.normal();
            pred.push_back(k);
            truth.push_back(i < 8 + k ? 100 + k : i % 3);
        }
    }
    const auto g = cluster_geometry(x, pred, truth);
    std::vector<double> r, p;
    for (const auto& c : g) r.push_back(c.centroid_radius), p.push_back(c.purity);
    EXPECT_GT(spearman(r, p), 0.0);
}

TEST(Evaluate, ReportFields) {
    const Labels pred{0, 0, 1, 1, -1}, truth{0, 0, 1, 1, 1};
    const Matrix x{{0, 0}, {0, 1}, {5, 5}, {5, 6}, {9, 9}};
    const auto r = evaluate(pred, truth, x);
    EXPECT_DOUBLE_EQ(r.v_measure, 1.0);
    EXPECT_EQ(r.n_clusters, 2u);
    EXPECT_EQ(r.n_outliers, 1u);
    EXPECT_DOUBLE_EQ(r.outlier_ratio, 0.2);
    ASSERT_TRUE(r.silhouette.has_value());
    EvaluateOptions singletons;
    singletons.outlier_mode = OutlierMode::AsSingletons;
    singletons.compute_silhouette = false;
    const auto s = evaluate(pred, truth, x, singletons);
    EXPECT_LT(s.v_measure, 1.0);
    EXPECT_FALSE(s.silhouette.has_value());
    const auto json = to_json_string(r);
    EXPECT_NE(json.find("\"v_measure\""), std::string::npos);
    EXPECT_LT(json.find("\"homogeneity\""), json.find("\"v_measure\""));
}
