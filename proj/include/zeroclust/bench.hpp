#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zeroclust/cluster.hpp"
#include "zeroclust/metrics.hpp"
#include "zeroclust/reduce.hpp"
#include "zeroclust/sampler.hpp"

namespace zeroclust {

struct BankEntry {
    std::filesystem::path path;
    /// Empty means: take the tag from the bank sidecar, else the directory name.
    std::string model_tag;
};

struct BenchConfig {
    std::vector<BankEntry> banks;
    SamplingScenario scenario;
    std::size_t n_runs = 10;
    std::vector<ReductionRecipe> reductions;  ///< raw is controlled by include_raw
    bool include_raw = true;
    bool standardize_raw = true;
    std::vector<ClusterSpec> clusterings;
    OutlierMode outlier_mode = OutlierMode::Exclude;
    bool compute_silhouette = true;
    std::filesystem::path output_dir = "bench_out";
    std::uint64_t base_seed = 0;
    std::size_t jobs = 1;

    void check() const;
};

/// The 12 clusterings: DBSCAN(auto, 5), HDBSCAN(15, 5), Ward and GMM at K in {15, 30, 45, 90, 180}.
std::vector<ClusterSpec> default_clusterings();
/// 10 UMAP seeds, 10 t-SNE seeds, PCA, Isomap and kernel PCA.
std::vector<ReductionRecipe> default_reductions();
/// Five models, 30 species x 200 images per class, 10 runs.
BenchConfig default_per_class_config(const std::vector<BankEntry>& banks = {});

BenchConfig bench_config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
std::string to_json_string(const BenchConfig& config);

struct GridSize {
    std::size_t reduced = 0;
    std::size_t raw = 0;
    std::size_t total() const { return reduced + raw; }
};

GridSize grid_size(const BenchConfig& config);

struct GridCell {
    std::size_t run = 0;
    std::size_t bank = 0;
    std::string model_tag;
    ReductionRecipe recipe;
    ClusterSpec clustering;
    std::uint64_t subset_seed = 0;
    std::uint64_t cell_seed = 0;
    std::string fingerprint;
};

/// Every cell of the grid in canonical order, without touching the banks.
std::vector<GridCell> plan_grid(const BenchConfig& config);

/// Seed for the subset drawn in run `run`; shared by every model.
std::uint64_t subset_seed(std::uint64_t base_seed, std::size_t run);

struct RunRecord {
    std::string fingerprint;
    std::size_t run = 0;
    std::string model_tag;
    std::uint64_t subset_seed = 0;
    std::string subset_hash;
    std::size_t n_points = 0;
    std::size_t n_species = 0;
    ReductionRecipe recipe;
    ClusterSpec clustering;
    std::uint64_t cell_seed = 0;
    bool ok = false;
    std::string error_kind;
    std::string error_message;
    std::optional<MetricReport> metrics;
    std::size_t n_clusters = 0;
    double reduce_seconds = 0.0;
    double cluster_seconds = 0.0;
};

std::string to_json_line(const RunRecord& record);
RunRecord run_record_from_json(const std::string& line);

struct RunLog {
    std::vector<RunRecord> records;
    /// Lines that failed to parse; only a truncated final line is tolerated silently.
    std::size_t skipped_lines = 0;
};

/// Reads a JSONL log. A missing file yields an empty log.
RunLog read_run_log(const std::filesystem::path& file);

struct GridProgress {
    std::size_t planned = 0;
    std::size_t skipped = 0;
    std::size_t executed = 0;
    std::size_t failed = 0;
};

/// Runs every cell not yet present in `<output_dir>/runs.jsonl` and returns
/// the complete record set (existing and new), one record per cell.
std::vector<RunRecord> run_grid(const BenchConfig& config, GridProgress* progress = nullptr);

struct Stat {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;  ///< population standard deviation
    double min = 0.0;
    double max = 0.0;
};

Stat summarize(const std::vector<double>& values);

struct AggregateRow {
    std::vector<std::string> key;
    std::size_t n_records = 0;
    std::size_t n_failed = 0;
    std::vector<std::pair<std::string, Stat>> metrics;
};

struct AggregateTable {
    std::vector<std::string> group_by;
    std::vector<AggregateRow> rows;
    std::vector<std::string> warnings;
};

/// Keys: model, reduction, recipe, clustering, run. Failed records are counted
/// but do not enter the statistics; groups with no successful record are
/// omitted with a warning.
AggregateTable aggregate(const std::vector<RunRecord>& records, const std::vector<std::string>& group_by);
std::string to_json_string(const AggregateTable& table, int indent = 2);
std::string to_text_table(const AggregateTable& table, const std::vector<std::string>& metrics = {});

struct CountExperimentSpec {
    SamplingScenario scenario;
    ReductionRecipe recipe = ReductionRecipe::tsne();
    ClusterSpec clustering = ClusterSpec::hdbscan();
    bool standardize = true;
    std::uint64_t base_seed = 0;
};

struct CountExperimentRow {
    std::size_t n_species = 0;
    std::size_t runs = 0;
    std::size_t failed = 0;
    Stat predicted_clusters;
    Stat v_measure;
};

/// For each n, draws `runs_per_n` subsets of n species and reports the
/// predicted cluster count and V-measure.
std::vector<CountExperimentRow> cluster_count_experiment(const EmbeddingBank& bank, const Manifest& manifest,
                                                         const std::vector<std::size_t>& n_values,
                                                         std::size_t runs_per_n, const CountExperimentSpec& spec);

/// 2D scatter: fill keyed by cluster, outline by true species, outliers as
/// crosses. Output is a pure function of the inputs.
std::string scatter_svg(const Matrix& coords2d, std::span<const std::int32_t> labels,
                        std::span<const std::int32_t> truth, std::span<const std::string> species_names = {});
void emit_scatter_svg(const ReducedSpace& reduced, std::span<const std::int32_t> labels,
                      std::span<const std::int32_t> truth, const std::filesystem::path& path,
                      std::span<const std::string> species_names = {});

}  // namespace zeroclust
