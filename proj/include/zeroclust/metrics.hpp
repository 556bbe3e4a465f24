#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zeroclust/matrix.hpp"

namespace zeroclust {

enum class OutlierMode { Exclude, AsSingletons };

std::string to_string(OutlierMode m);
OutlierMode parse_outlier_mode(const std::string& s);

/// K x S counts, clusters by rows and species by columns. Every species that
/// occurs in the truth labels has a column, even if all its points were
/// excluded as outliers.
struct ContingencyTable {
    std::size_t n_clusters = 0;
    std::size_t n_species = 0;
    std::vector<std::int64_t> counts;
    std::vector<std::int64_t> cluster_sizes;
    std::vector<std::int64_t> species_sizes;
    std::int64_t total = 0;
    /// Original ids behind each row and column. Singleton outlier rows use -1.
    std::vector<std::int32_t> cluster_ids;
    std::vector<std::int32_t> species_ids;

    std::int64_t at(std::size_t k, std::size_t s) const { return counts[k * n_species + s]; }
};

/// Throws DegenerateInputError when nothing is left to tabulate.
ContingencyTable contingency(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                             OutlierMode mode = OutlierMode::Exclude);
/// Builds a table straight from a count matrix (rows clusters, columns species).
ContingencyTable contingency_from_counts(const std::vector<std::vector<std::int64_t>>& counts);

struct HomogeneityCompleteness {
    double homogeneity = 0.0;
    double completeness = 0.0;
    double v_measure = 0.0;
};

HomogeneityCompleteness homogeneity_completeness_v(const ContingencyTable& t);
double v_measure_from(double h, double c);

double mutual_information(const ContingencyTable& t);
double expected_mutual_information(const ContingencyTable& t);

struct AmiResult {
    double value = 0.0;
    /// Set when the normalizing denominator vanished and the value defaulted to 0.
    bool undefined = false;
};
AmiResult ami(const ContingencyTable& t);

double ari(const ContingencyTable& t);
double purity(const ContingencyTable& t);

/// Mean silhouette over non-outlier points. Throws DegenerateInputError with
/// fewer than two clusters.
double silhouette(const Matrix& coords, std::span<const std::int32_t> labels);

enum class Behavior { Ideal, Oversplit, Merged, Mixed };
std::string to_string(Behavior b);

struct BehaviorThresholds {
    double isolation = 0.95;
    double oversplit_ecc = 1.5;
};

Behavior classify_behavior(double isolation_index, double ecc, const BehaviorThresholds& th = {});

struct SpeciesDiagnostics {
    std::int32_t species = 0;
    std::string name;
    std::int64_t n_clustered = 0;
    bool present = false;  ///< false when every image of the species is an outlier
    double isolation_index = 0.0;
    double effective_cluster_count = 0.0;
    Behavior behavior = Behavior::Mixed;
};

/// Isolation index and effective cluster count per species column of an
/// outlier-excluded table.
std::vector<SpeciesDiagnostics> species_diagnostics(const ContingencyTable& t, const BehaviorThresholds& th = {},
                                                    std::span<const std::string> names = {});

enum class Fate { Outlier, Merged, OwnCluster };
std::string to_string(Fate f);

struct SpeciesFate {
    std::int32_t species = 0;
    std::int64_t n_images = 0;
    std::int64_t n_outliers = 0;
    std::int64_t n_in_foreign_clusters = 0;
    Fate fate = Fate::OwnCluster;
};

/// Fates of species with fewer than `threshold` images. A species counts as
/// the owner of a cluster when no other species has more images in it.
std::vector<SpeciesFate> species_fate(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                                      std::int64_t threshold);

struct ClusterGeometry {
    std::int32_t cluster = 0;
    std::size_t size = 0;
    double centroid_radius = 0.0;
    double purity = 0.0;
};

std::vector<ClusterGeometry> cluster_geometry(const Matrix& coords2d, std::span<const std::int32_t> pred,
                                              std::span<const std::int32_t> truth);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

struct MetricReport {
    double homogeneity = 0.0;
    double completeness = 0.0;
    double v_measure = 0.0;
    double mi = 0.0;
    double ami = 0.0;
    bool ami_undefined = false;
    double ari = 0.0;
    double purity = 0.0;
    std::optional<double> silhouette;
    double outlier_ratio = 0.0;
    std::size_t n_clusters = 0;
    std::size_t n_outliers = 0;
    OutlierMode outlier_mode = OutlierMode::Exclude;
    std::vector<SpeciesDiagnostics> per_species;
};

struct EvaluateOptions {
    OutlierMode outlier_mode = OutlierMode::Exclude;
    bool compute_silhouette = true;
    BehaviorThresholds thresholds;
};

/// All metrics for one clustering. `coords` may be empty to skip silhouette.
MetricReport evaluate(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth, const Matrix& coords,
                      const EvaluateOptions& options = {}, std::span<const std::string> species_names = {});

/// One JSON object with a fixed key order.
std::string to_json_string(const MetricReport& report, int indent = -1);

}  // namespace zeroclust
