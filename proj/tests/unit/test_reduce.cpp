#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mds_oracle.hpp"
#include "test_support.hpp"
#include "zeroclust/cluster.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/metrics.hpp"
#include "zeroclust/reduce.hpp"
#include "zeroclust/synthetic.hpp"

using namespace zeroclust;
using testing_support::random_matrix;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    }
    return e;
}

double correlation(const Matrix& a, std::size_t ca, const Matrix& b, std::size_t cb) {
    const std::size_t n = a.rows();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) ma += a(i, ca), mb += b(i, cb);
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a(i, ca) - ma) * (b(i, cb) - mb);
        saa += (a(i, ca) - ma) * (a(i, ca) - ma);
        sbb += (b(i, cb) - mb) * (b(i, cb) - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

Blobs three_blobs_10d(std::uint64_t seed) {
    auto spec = BlobSpec::uniform(3, 100, 10, seed);
    spec.sigma = 1.0;
    spec.min_separation = 15.0;
    return make_blobs(spec);
}

}  // namespace

TEST(Standardize, TwoPointColumn) {
    const auto z = standardize(Matrix{{1.0}, {3.0}});
    EXPECT_DOUBLE_EQ(z(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(z(1, 0), 1.0);
}

TEST(Standardize, ConstantColumnMapsToZero) {
    const auto z = standardize(Matrix{{5, 1}, {5, 2}, {5, 4}});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z(i, 0), 0.0);
}

TEST(Standardize, MomentsAndIdempotence) {
    const auto x = random_matrix(100, 8, 3, 4.0);
    const auto z = standardize(x);
    for (std::size_t c = 0; c < 8; ++c) {
        double m = 0, ss = 0;
        for (std::size_t i = 0; i < 100; ++i) m += z(i, c);
        m /= 100;
        for (std::size_t i = 0; i < 100; ++i) ss += (z(i, c) - m) * (z(i, c) - m);
        EXPECT_LT(std::abs(m), 1e-9);
        EXPECT_NEAR(std::sqrt(ss / 100), 1.0, 1e-9);
    }
    const auto zz = standardize(z);
    for (std::size_t k = 0; k < z.values().size(); ++k) EXPECT_NEAR(zz.values()[k], z.values()[k], 1e-12);
}

TEST(Standardize, NeedsTwoRows) {
    EXPECT_THROW(standardize(Matrix{{1, 2}}), ParameterError);
}

TEST(Pca, LineInTwoDimensions) {
    Matrix x(20, 2);
    for (std::size_t i = 0; i < 20; ++i) x(i, 0) = x(i, 1) = static_cast<double>(i);
    const auto model = pca_fit(x, 2);
    EXPECT_NEAR(std::abs(model.components(0, 0)), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(std::abs(model.components(0, 1)), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(model.explained_variance[1], 0.0, 1e-10);
}

TEST(Pca, IsotropicGaussianHasFlatSpectrum) {
    const auto model = pca_fit(random_matrix(5000, 10, 4), 10);
    const auto [lo, hi] = std::minmax_element(model.explained_variance.begin(), model.explained_variance.end());
    EXPECT_LT(*hi / *lo, 1.5);
    for (std::size_t i = 1; i < 10; ++i) {
        EXPECT_LE(model.explained_variance_ratio[i], model.explained_variance_ratio[i - 1]);
    }
}

TEST(Pca, FullRankReconstruction) {
    const auto x = random_matrix(30, 5, 6);
    const auto model = pca_fit(x, 5);
    const auto back = pca_inverse_transform(model, pca_transform(model, x));
    for (std::size_t k = 0; k < x.values().size(); ++k) EXPECT_NEAR(back.values()[k], x.values()[k], 1e-8);
}

TEST(Pca, SignConvention) {
    const auto model = pca_fit(random_matrix(40, 6, 7), 3);
    for (std::size_t c = 0; c < 3; ++c) {
        double best = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
            if (std::abs(model.components(c, j)) > std::abs(best)) best = model.components(c, j);
        }
        EXPECT_GT(best, 0.0);
    }
}

TEST(Pca, RejectsTargetBeyondRank) {
    EXPECT_THROW(pca(random_matrix(4, 6, 1), 4), ParameterError);
    EXPECT_THROW(pca(random_matrix(10, 3, 1), 4), ParameterError);
}

TEST(KernelPca, SmallGammaTracksLinearPca) {
    const auto x = standardize(random_matrix(120, 4, 8));
    const auto k = kernel_pca(x, 2, 1e-5);
    const auto p = pca(x, 2);
    for (std::size_t c = 0; c < 2; ++c) EXPECT_GT(std::abs(correlation(k.coords, c, p.coords, c)), 0.99);
}

TEST(KernelPca, TwoPointsAreSymmetric) {
    const auto k = kernel_pca(Matrix{{0, 0}, {1, 1}}, 1, 0.5);
    EXPECT_NEAR(k.coords(0, 0), -k.coords(1, 0), 1e-12);
    EXPECT_GT(std::abs(k.coords(0, 0)), 0.0);
}

TEST(KernelPca, RejectsNonPositiveGamma) {
    EXPECT_THROW(kernel_pca(random_matrix(10, 2, 1), 2, 0.0), ParameterError);
    EXPECT_THROW(kernel_pca(random_matrix(10, 2, 1), 2, -1.0), ParameterError);
}

TEST(Isomap, ArcOrdering) {
    Matrix x(300, 3);
    Rng rng(2);
    std::vector<double> t(300);
    for (std::size_t i = 0; i < 300; ++i) {
        t[i] = 1.5 * M_PI * (1.0 + 2.0 * rng.uniform());
        x(i, 0) = t[i] * std::cos(t[i]);
        x(i, 1) = 3.0 * rng.uniform();
        x(i, 2) = t[i] * std::sin(t[i]);
    }
    std::vector<double> arc(300);
    for (std::size_t i = 0; i < 300; ++i) {
        arc[i] = 0.5 * (t[i] * std::sqrt(1 + t[i] * t[i]) + std::asinh(t[i]));
    }
    const auto r = isomap(x, 1, 10);
    std::vector<double> y(300);
    for (std::size_t i = 0; i < 300; ++i) y[i] = r.coords(i, 0);
    EXPECT_GT(std::abs(spearman(y, arc)), 0.99);
}

TEST(Isomap, CompleteGraphEqualsMds) {
    const auto x = random_matrix(25, 4, 10);
    const auto r = isomap(x, 2, 24);
    EXPECT_LT(oracle::procrustes_rmse(oracle::classical_mds(to_eigen(x), 2), to_eigen(r.coords)), 1e-6);
}

TEST(Isomap, BridgesDisconnectedGraph) {
    auto x = random_matrix(40, 2, 11, 0.1);
    for (std::size_t i = 20; i < 40; ++i) x(i, 0) += 100.0;
    const auto r = isomap(x, 2, 5);
    EXPECT_EQ(r.diagnostics.scalars.at("graph_components"), 2.0);
    EXPECT_EQ(r.diagnostics.series.at("bridge_lengths").size(), 1u);
    EXPECT_THROW(isomap(x, 2, 5, 0, DisconnectedPolicy::Error), ParameterError);
}

TEST(ClassicalMds, RecoversPlanarConfiguration) {
    const auto x = random_matrix(15, 2, 12);
    Matrix d(15, 15);
    for (std::size_t i = 0; i < 15; ++i) {
        for (std::size_t j = 0; j < 15; ++j) d(i, j) = euclidean_distance(x.row(i), x.row(j));
    }
    EXPECT_LT(oracle::procrustes_rmse(to_eigen(x), to_eigen(classical_mds(d, 2))), 1e-9);
}

TEST(Tsne, AffinitiesAreDistributions) {
    const auto x = random_matrix(60, 5, 13);
    const auto p = tsne_detail::compute_affinities(x, 10.0);
    double sum = 0.0;
    for (double v : p.upper) sum += 2.0 * v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (double perp : p.achieved_perplexity) EXPECT_NEAR(perp, 10.0, 1e-5);
}

TEST(Tsne, GradientMatchesFiniteDifferences) {
    const auto x = random_matrix(10, 4, 14);
    const auto p = tsne_detail::compute_affinities(x, 2.0);
    const auto y = random_matrix(10, 2, 15);
    Matrix grad;
    tsne_detail::kl_divergence(p, y, &grad);
    Matrix fast;
    tsne_detail::gradient(p, y, fast);
    const double h = 1e-6;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < y.values().size(); ++k) {
        Matrix plus = y, minus = y;
        plus.data()[k] += h;
        minus.data()[k] -= h;
        const double fd = (tsne_detail::kl_divergence(p, plus) - tsne_detail::kl_divergence(p, minus)) / (2 * h);
        num += (fd - grad.data()[k]) * (fd - grad.data()[k]);
        den += fd * fd;
        EXPECT_NEAR(fast.data()[k], grad.data()[k], 1e-12);
    }
    EXPECT_LT(std::sqrt(num / den), 1e-4);
}

TEST(Tsne, ThreeDimensionalGradientPath) {
    const auto x = random_matrix(12, 4, 16);
    const auto p = tsne_detail::compute_affinities(x, 3.0);
    const auto y = random_matrix(12, 3, 17);
    Matrix a, b;
    tsne_detail::kl_divergence(p, y, &a, 4.0);
    tsne_detail::gradient(p, y, b, 4.0);
    for (std::size_t k = 0; k < a.values().size(); ++k) EXPECT_NEAR(a.data()[k], b.data()[k], 1e-12);
}

TEST(Tsne, SeparatesBlobsAndDecreasesKl) {
    const auto blobs = three_blobs_10d(3);
    const auto r = tsne(standardize(blobs.points));
    EXPECT_LT(r.diagnostics.scalars.at("kl_final"), r.diagnostics.scalars.at("kl_initial"));
    EXPECT_GT(silhouette(r.coords, blobs.labels), 0.5);
    EXPECT_DOUBLE_EQ(r.diagnostics.scalars.at("learning_rate"), 50.0);
}

TEST(Tsne, Deterministic) {
    const auto x = random_matrix(40, 5, 18);
    TsneOptions opt;
    opt.perplexity = 5;
    opt.n_iter = 300;
    EXPECT_EQ(tsne(x, 2, opt, 1).coords, tsne(x, 2, opt, 1).coords);
}

TEST(Tsne, PerplexityTooLarge) {
    TsneOptions opt;
    opt.perplexity = 30;
    EXPECT_THROW(tsne(random_matrix(90, 3, 1), 2, opt), ParameterError);
}

TEST(Umap, GoldenCurveParameters) {
    const auto [a, b] = umap_detail::fit_ab(1.0, 0.1);
    EXPECT_NEAR(a, 1.5769436, 1e-6);
    EXPECT_NEAR(b, 0.8950607, 1e-6);
}

TEST(Umap, FuzzyGraphIsSymmetricWithBoundedWeights) {
    const auto g = umap_detail::fuzzy_simplicial_set(random_matrix(80, 4, 19), 10);
    std::map<std::pair<std::size_t, std::size_t>, double> w;
    for (std::size_t e = 0; e < g.weight.size(); ++e) {
        EXPECT_GT(g.weight[e], 0.0);
        EXPECT_LE(g.weight[e], 1.0);
        w[{g.head[e], g.tail[e]}] = g.weight[e];
    }
    for (auto [edge, v] : w) EXPECT_DOUBLE_EQ(w.at({edge.second, edge.first}), v);
}

TEST(Umap, RecoversBlobsWithHdbscan) {
    const auto blobs = three_blobs_10d(4);
    const auto r = umap(standardize(blobs.points), 2, {}, 7);
    const auto a = hdbscan(r.coords, 15, 5);
    EvaluateOptions opt;
    opt.compute_silhouette = false;
    EXPECT_GE(evaluate(a.labels, blobs.labels, Matrix{}, opt).v_measure, 0.99);
    EXPECT_EQ(r.diagnostics.scalars.at("n_epochs"), 500.0);
    for (double v : r.coords.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Umap, SeedControlsLayout) {
    const auto x = random_matrix(60, 4, 20);
    UmapOptions opt;
    opt.n_epochs = 50;
    EXPECT_EQ(umap(x, 2, opt, 3).coords, umap(x, 2, opt, 3).coords);
    EXPECT_NE(umap(x, 2, opt, 3).coords, umap(x, 2, opt, 4).coords);
}

TEST(Umap, TooManyNeighbors) {
    UmapOptions opt;
    opt.n_neighbors = 20;
    EXPECT_THROW(umap(random_matrix(20, 3, 1), 2, opt), ParameterError);
}

TEST(Raw, PassThrough) {
    const auto x = random_matrix(6, 9, 21);
    const auto r = raw_passthrough(x);
    EXPECT_EQ(r.coords, x);
    EXPECT_TRUE(r.diagnostics.empty());
    EXPECT_EQ(r.recipe.method, ReductionMethod::Raw);
}

TEST(Recipe, FingerprintsAndDispatch) {
    EXPECT_EQ(ReductionRecipe::tsne(30, 3).fingerprint(), "tsne(dim=2;perplexity=30;seed=3)");
    EXPECT_NE(ReductionRecipe::umap(15, 0.1, 1).fingerprint(), ReductionRecipe::umap(15, 0.1, 2).fingerprint());
    EXPECT_EQ(parse_reduction_method("umap"), ReductionMethod::UMAP);
    EXPECT_THROW(parse_reduction_method("lle"), ParameterError);
    const auto x = random_matrix(30, 4, 22);
    EXPECT_EQ(reduce(x, ReductionRecipe::pca()).coords, pca(x, 2).coords);
    EXPECT_THROW(reduce(x, ReductionRecipe::pca(5)), ParameterError);
}

TEST(ReducedSpaceIo, RoundTrip) {
    const auto dir = testing_support::temp_dir();
    auto space = pca(random_matrix(20, 4, 23), 2);
    write_reduced_space(space, dir);
    const auto back = read_reduced_space(dir);
    ASSERT_EQ(back.coords.rows(), 20u);
    for (std::size_t k = 0; k < space.coords.values().size(); ++k) {
        EXPECT_EQ(back.coords.values()[k], static_cast<double>(static_cast<float>(space.coords.values()[k])));
    }
    EXPECT_EQ(back.recipe.fingerprint(), space.recipe.fingerprint());
    EXPECT_EQ(back.diagnostics.series.at("explained_variance"), space.diagnostics.series.at("explained_variance"));
}
