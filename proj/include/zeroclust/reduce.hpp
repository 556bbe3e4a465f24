#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "zeroclust/diagnostics.hpp"
#include "zeroclust/matrix.hpp"

namespace zeroclust {

enum class ReductionMethod { Raw, PCA, KernelPCA, Isomap, TSNE, UMAP };

std::string to_string(ReductionMethod m);
ReductionMethod parse_reduction_method(const std::string& s);

/// What produced a reduced space. Method-specific settings live in `params`
/// (perplexity, n_neighbors, min_dist, gamma, ...); absent keys take defaults.
struct ReductionRecipe {
    ReductionMethod method = ReductionMethod::Raw;
    std::size_t target_dim = 2;
    std::uint64_t seed = 0;
    std::map<std::string, double> params;

    double param(const std::string& key, double fallback) const;
    /// Short stable identifier, e.g. "tsne(dim=2;perplexity=30;seed=3)".
    std::string fingerprint() const;

    static ReductionRecipe raw();
    static ReductionRecipe pca(std::size_t target_dim = 2);
    static ReductionRecipe kernel_pca(double gamma = 0.0, std::size_t target_dim = 2);
    static ReductionRecipe isomap(std::size_t n_neighbors = 15, std::size_t target_dim = 2);
    static ReductionRecipe tsne(double perplexity = 30.0, std::uint64_t seed = 0, std::size_t target_dim = 2);
    static ReductionRecipe umap(std::size_t n_neighbors = 15, double min_dist = 0.1, std::uint64_t seed = 0,
                                std::size_t target_dim = 2);
};

struct ReducedSpace {
    Matrix coords;
    ReductionRecipe recipe;
    Diagnostics diagnostics;
};

/// Column-wise z-scoring with the population standard deviation; constant
/// columns map to zero. Requires at least two rows.
Matrix standardize(const Matrix& x);

struct PcaModel {
    std::vector<double> mean;
    Matrix components;  ///< target_dim x D, rows are unit principal axes
    std::vector<double> explained_variance;
    std::vector<double> explained_variance_ratio;
};

/// Top principal axes of the sample covariance. Each axis is signed so its
/// largest-magnitude loading is positive.
PcaModel pca_fit(const Matrix& x, std::size_t target_dim);
Matrix pca_transform(const PcaModel& model, const Matrix& x);
Matrix pca_inverse_transform(const PcaModel& model, const Matrix& scores);

ReducedSpace pca(const Matrix& x, std::size_t target_dim = 2, std::uint64_t seed = 0);

/// RBF kernel PCA. gamma <= 0 throws ParameterError.
ReducedSpace kernel_pca(const Matrix& x, std::size_t target_dim, double gamma, std::uint64_t seed = 0);

enum class DisconnectedPolicy { Bridge, Error };

/// Isomap: geodesics on the symmetric k-NN graph, then classical MDS.
/// Disconnected graphs are joined by their shortest bridging edges unless
/// `policy` is Error.
ReducedSpace isomap(const Matrix& x, std::size_t target_dim, std::size_t n_neighbors, std::uint64_t seed = 0,
                    DisconnectedPolicy policy = DisconnectedPolicy::Bridge);

/// Classical (Torgerson) MDS of a full symmetric distance matrix, given
/// row-major n x n.
Matrix classical_mds(const Matrix& distances, std::size_t target_dim);

struct TsneOptions {
    double perplexity = 30.0;
    std::size_t n_iter = 1000;
    std::size_t exaggeration_iter = 250;
    double early_exaggeration = 12.0;
    double momentum_early = 0.5;
    double momentum_late = 0.8;
    /// <= 0 selects max(N / (4 * early_exaggeration), 50).
    double learning_rate = 0.0;
    double min_gain = 0.01;
    double min_grad_norm = 1e-7;
};

/// Exact (O(N^2)) t-SNE with PCA initialization.
ReducedSpace tsne(const Matrix& x, std::size_t target_dim = 2, const TsneOptions& options = {},
                  std::uint64_t seed = 0);

struct UmapOptions {
    std::size_t n_neighbors = 15;
    double min_dist = 0.1;
    double spread = 1.0;
    /// 0 selects 500 for N <= 10000 and 200 otherwise.
    std::size_t n_epochs = 0;
    double learning_rate = 1.0;
    double repulsion_strength = 1.0;
    double negative_sample_rate = 5.0;
};

ReducedSpace umap(const Matrix& x, std::size_t target_dim = 2, const UmapOptions& options = {},
                  std::uint64_t seed = 0);

ReducedSpace raw_passthrough(const Matrix& x);

/// Dispatches on recipe.method. Does not standardize.
ReducedSpace reduce(const Matrix& x, const ReductionRecipe& recipe);

namespace tsne_detail {

/// Symmetrized joint probabilities, stored as the strict upper triangle of an
/// N x N matrix (entry p_ij for i < j; p_ji is identical).
struct Affinities {
    std::size_t n = 0;
    std::vector<double> upper;
    std::vector<double> beta;                  ///< per-row precision 1 / (2 sigma^2)
    std::vector<double> achieved_perplexity;  ///< per-row perplexity of p_{.|i}

    std::size_t index(std::size_t i, std::size_t j) const { return i * n - i * (i + 1) / 2 + (j - i - 1); }
    double at(std::size_t i, std::size_t j) const;
};

Affinities compute_affinities(const Matrix& x, double perplexity);

/// KL(P || Q) for embedding `y`. When `grad` is non-null it receives the
/// gradient of KL(exaggeration * P || Q) with respect to y.
double kl_divergence(const Affinities& p, const Matrix& y, Matrix* grad = nullptr, double exaggeration = 1.0);

/// Gradient only; skips the logarithms needed for the objective value.
void gradient(const Affinities& p, const Matrix& y, Matrix& grad, double exaggeration = 1.0);

}  // namespace tsne_detail

namespace umap_detail {

/// Least-squares fit of 1 / (1 + a d^{2b}) to the min_dist/spread target curve.
std::pair<double, double> fit_ab(double spread, double min_dist);

struct FuzzyGraph {
    std::size_t n = 0;
    std::vector<std::size_t> head;
    std::vector<std::size_t> tail;
    std::vector<double> weight;
    std::vector<double> rho;
    std::vector<double> sigma;
};

/// Symmetric fuzzy simplicial set over the k-NN graph (k counts the point
/// itself). Both (i, j) and (j, i) are stored.
FuzzyGraph fuzzy_simplicial_set(const Matrix& x, std::size_t n_neighbors);

}  // namespace umap_detail

void write_reduced_space(const ReducedSpace& space, const std::filesystem::path& dir);
ReducedSpace read_reduced_space(const std::filesystem::path& dir);

}  // namespace zeroclust
