#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "json_util.hpp"
#include "zeroclust/bench.hpp"
#include "zeroclust/cluster.hpp"
#include "zeroclust/embank.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/metrics.hpp"
#include "zeroclust/reduce.hpp"
#include "zeroclust/sampler.hpp"
#include "zeroclust/synthetic.hpp"

namespace zeroclust::cli {

namespace fs = std::filesystem;
using detail::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

constexpr char kSubsetFile[] = "subset.json";
constexpr char kCoordsFile[] = "coords.zseb";

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FormatError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + p.string());
    out << text;
}

/// Writes to `path`, or to `out` when the path is empty or "-".
void emit(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
    } else {
        write_text(path, text);
    }
}

IndexSubset load_subset(const std::string& path, const Manifest& manifest, const std::string& bank_id,
                        bool include_unvalidated) {
    if (path.empty()) return full_subset(manifest, bank_id, include_unvalidated);
    auto subset = detail::subset_from_json(detail::read_json_file(path));
    if (subset.banks.size() != 1) throw ValidationError("subset must reference exactly one bank");
    for (const auto r : subset.rows) {
        if (r >= manifest.size()) throw ValidationError("subset row " + std::to_string(r) + " is outside the bank");
    }
    return subset;
}

/// Truth labels plus species names from a subset file.
struct Truth {
    std::vector<std::int32_t> labels;
    std::vector<std::string> names;
};

Truth load_truth(const std::string& path) {
    const auto subset = detail::subset_from_json(detail::read_json_file(path));
    return {subset.labels, subset.species};
}

ReducedSpace load_space(const fs::path& dir) {
    if (fs::exists(dir / kCoordsFile)) return read_reduced_space(dir);
    if (fs::exists(dir / kEmbeddingsFile)) return raw_passthrough(read_zseb(dir / kEmbeddingsFile).to_matrix());
    throw FormatError(dir.string() + ": neither a reduced space nor a bank directory");
}

std::vector<std::size_t> parse_counts(const std::string& csv, const char* flag) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            const auto v = std::stoull(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ParameterError(std::string(flag) + ": '" + item + "' is not a count");
        }
    }
    if (out.empty()) throw ParameterError(std::string(flag) + ": expected a comma-separated list of counts");
    return out;
}

std::vector<std::string> split(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct ReduceFlags {
    std::string method = "tsne";
    std::size_t target_dim = 2;
    double perplexity = 30.0;
    std::size_t n_neighbors = 15;
    double min_dist = 0.1;
    double gamma = 0.0;
    std::size_t n_iter = 1000;
    std::size_t n_epochs = 0;
    std::uint64_t seed = 0;

    void add(CLI::App* app) {
        app->add_option("--method", method, "raw, pca, kpca, isomap, tsne or umap")->capture_default_str();
        app->add_option("--target-dim", target_dim, "Output dimensionality")->capture_default_str();
        app->add_option("--perplexity", perplexity, "t-SNE perplexity")->capture_default_str();
        app->add_option("--n-neighbors", n_neighbors, "UMAP and Isomap neighborhood size")->capture_default_str();
        app->add_option("--min-dist", min_dist, "UMAP min_dist")->capture_default_str();
        app->add_option("--gamma", gamma, "Kernel PCA RBF gamma; 0 means 1/D")->capture_default_str();
        app->add_option("--n-iter", n_iter, "t-SNE iterations")->capture_default_str();
        app->add_option("--n-epochs", n_epochs, "UMAP epochs; 0 chooses by N")->capture_default_str();
        app->add_option("--seed", seed, "Reduction seed")->capture_default_str();
    }

    ReductionRecipe recipe() const {
        ReductionRecipe r;
        switch (parse_reduction_method(method)) {
            case ReductionMethod::Raw: return ReductionRecipe::raw();
            case ReductionMethod::PCA: r = ReductionRecipe::pca(target_dim); break;
            case ReductionMethod::KernelPCA: r = ReductionRecipe::kernel_pca(gamma, target_dim); break;
            case ReductionMethod::Isomap: r = ReductionRecipe::isomap(n_neighbors, target_dim); break;
            case ReductionMethod::TSNE:
                r = ReductionRecipe::tsne(perplexity, seed, target_dim);
                if (n_iter != 1000) r.params["n_iter"] = static_cast<double>(n_iter);
                break;
            case ReductionMethod::UMAP:
                r = ReductionRecipe::umap(n_neighbors, min_dist, seed, target_dim);
                if (n_epochs != 0) r.params["n_epochs"] = static_cast<double>(n_epochs);
                break;
        }
        r.seed = seed;
        return r;
    }
};

struct ClusterFlags {
    std::string method = "hdbscan";
    std::size_t min_cluster_size = 15;
    std::size_t min_samples = 5;
    double eps = 0.0;
    double eps_scale = 1.0;
    std::size_t k = 30;
    std::uint64_t seed = 42;

    void add(CLI::App* app, const std::string& prefix = "") {
        app->add_option("--" + prefix + "method", method, "dbscan, hdbscan, ward or gmm")->capture_default_str();
        app->add_option("--min-cluster-size", min_cluster_size, "HDBSCAN min_cluster_size")->capture_default_str();
        app->add_option("--min-samples", min_samples, "HDBSCAN/DBSCAN min_samples")->capture_default_str();
        app->add_option("--eps", eps, "DBSCAN absolute epsilon; 0 uses eps-scale x auto epsilon")
            ->capture_default_str();
        app->add_option("--eps-scale", eps_scale, "DBSCAN multiplier of the auto epsilon")->capture_default_str();
        app->add_option("--k", k, "Ward/GMM cluster count (default grid: 15, 30, 45, 90, 180)")->capture_default_str();
        app->add_option("--" + prefix + "seed", seed, "GMM seed")->capture_default_str();
    }

    ClusterSpec spec() const {
        switch (parse_cluster_method(method)) {
            case ClusterMethod::DBSCAN: {
                auto s = ClusterSpec::dbscan(eps_scale, min_samples);
                if (eps > 0.0) {
                    s.params.erase("eps_scale");
                    s.params["eps"] = eps;
                }
                return s;
            }
            case ClusterMethod::HDBSCAN: return ClusterSpec::hdbscan(min_cluster_size, min_samples);
            case ClusterMethod::Ward: return ClusterSpec::ward(k);
            case ClusterMethod::GMM: return ClusterSpec::gmm(k, seed);
        }
        return ClusterSpec::hdbscan();
    }
};

int exit_code_for(const Error& e) {
    const std::string kind = e.kind();
    if (kind == "parameter") return kUsage;
    if (kind == "numeric") return kNumeric;
    return kData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Zero-shot species clustering benchmark"};
    app.name("zeroclust");
    app.require_subcommand(1);

    // validate
    auto* validate = app.add_subcommand("validate", "Check a bank directory");
    std::string v_bank;
    bool v_json = false;
    validate->add_option("bank", v_bank, "Bank directory")->required();
    validate->add_flag("--json", v_json, "Print the summary as JSON");

    // sample
    auto* sample = app.add_subcommand("sample", "Draw a seeded subset of a bank");
    std::string s_bank, s_out, s_kind = "even", s_taxon;
    std::size_t s_n_species = 30, s_per = 200, s_min = 20, s_max = 0;
    std::uint64_t s_seed = 0;
    bool s_unvalidated = false;
    sample->add_option("--bank", s_bank, "Bank directory")->required();
    sample->add_option("--scenario", s_kind, "even, uneven or extreme")->capture_default_str();
    sample->add_option("--n-species", s_n_species, "Species per subset")->capture_default_str();
    sample->add_option("--per-species", s_per, "Images per species (even)")->capture_default_str();
    sample->add_option("--min-per-species", s_min, "Lower bound (uneven, extreme)")->capture_default_str();
    sample->add_option("--max-per-species", s_max, "Upper bound; 0 means none for extreme")->capture_default_str();
    sample->add_option("--taxon-class", s_taxon, "Restrict to Aves, Mammalia or Other");
    sample->add_option("--seed", s_seed, "Subset seed")->capture_default_str();
    sample->add_flag("--include-unvalidated", s_unvalidated, "Also draw rows with validated=false");
    sample->add_option("--out", s_out, "Subset JSON path (default: stdout)");

    // reduce
    auto* reduce_cmd = app.add_subcommand("reduce", "Project a bank (or subset) to a low-dimensional space");
    std::string r_bank, r_subset, r_out;
    bool r_no_standardize = false;
    ReduceFlags rflags;
    reduce_cmd->add_option("--bank", r_bank, "Bank directory")->required();
    reduce_cmd->add_option("--subset", r_subset, "Subset JSON from `sample` (default: whole bank)");
    reduce_cmd->add_option("--out", r_out, "Output directory")->required();
    reduce_cmd->add_flag("--no-standardize", r_no_standardize, "Skip column standardization");
    rflags.add(reduce_cmd);

    // cluster
    auto* cluster_cmd = app.add_subcommand("cluster", "Cluster a reduced space or bank");
    std::string c_input, c_out;
    ClusterFlags cflags;
    cluster_cmd->add_option("--input", c_input, "Reduced-space or bank directory")->required();
    cluster_cmd->add_option("--out", c_out, "Assignment JSON path (default: stdout)");
    cflags.add(cluster_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score an assignment against ground truth");
    std::string e_assign, e_truth, e_coords, e_out, e_mode = "exclude";
    bool e_no_sil = false;
    eval_cmd->add_option("--assignment", e_assign, "Assignment JSON")->required();
    eval_cmd->add_option("--truth", e_truth, "Subset JSON holding the true labels")->required();
    eval_cmd->add_option("--coords", e_coords, "Reduced-space directory for the silhouette");
    eval_cmd->add_option("--outlier-mode", e_mode, "exclude or singletons")->capture_default_str();
    eval_cmd->add_flag("--no-silhouette", e_no_sil, "Skip the silhouette");
    eval_cmd->add_option("--out", e_out, "Report JSON path (default: stdout)");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Run (or size) a benchmark grid");
    std::string b_config, b_output, b_mode;
    std::size_t b_jobs = 0;
    bool b_dry = false, b_default = false;
    bench_cmd->add_option("--config", b_config, "Bench config JSON");
    bench_cmd->add_flag("--default-grid", b_default, "Use the built-in per-class grid (5 models)");
    bench_cmd->add_option("--jobs", b_jobs, "Worker threads (overrides config)");
    bench_cmd->add_option("--output-dir", b_output, "Log directory (overrides config)");
    bench_cmd->add_option("--outlier-mode", b_mode, "exclude or singletons (overrides config)");
    bench_cmd->add_flag("--dry-run", b_dry, "Print the grid size and exit");

    // count-experiment
    auto* count_cmd = app.add_subcommand("count-experiment", "Predicted cluster count versus species count");
    std::string ce_bank, ce_values = "5,10,15,20,25,30", ce_out, ce_kind = "even";
    std::size_t ce_runs = 100, ce_per = 200, ce_min = 20, ce_max = 0;
    std::uint64_t ce_seed = 0;
    ReduceFlags ce_r;
    ClusterFlags ce_c;
    count_cmd->add_option("--bank", ce_bank, "Bank directory")->required();
    count_cmd->add_option("--n-values", ce_values, "Comma-separated species counts")->capture_default_str();
    count_cmd->add_option("--runs", ce_runs, "Runs per species count")->capture_default_str();
    count_cmd->add_option("--scenario", ce_kind, "even, uneven or extreme")->capture_default_str();
    count_cmd->add_option("--per-species", ce_per, "Images per species (even)")->capture_default_str();
    count_cmd->add_option("--min-per-species", ce_min, "Lower bound (uneven, extreme)")->capture_default_str();
    count_cmd->add_option("--max-per-species", ce_max, "Upper bound; 0 means none")->capture_default_str();
    count_cmd->add_option("--base-seed", ce_seed, "Root seed for subsets")->capture_default_str();
    count_cmd->add_option("--out", ce_out, "Summary JSON path (default: stdout)");
    ce_r.add(count_cmd);
    ce_c.add(count_cmd, "cluster-");

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "Write a 2D scatter SVG");
    std::string p_coords, p_assign, p_truth, p_out;
    plot_cmd->add_option("--coords", p_coords, "Reduced-space directory (2D)")->required();
    plot_cmd->add_option("--assignment", p_assign, "Assignment JSON")->required();
    plot_cmd->add_option("--truth", p_truth, "Subset JSON holding the true labels")->required();
    plot_cmd->add_option("--out", p_out, "SVG path")->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "Aggregate a run log");
    std::string rp_log, rp_group = "model,reduction,clustering", rp_format = "text", rp_metrics, rp_out;
    report_cmd->add_option("--log", rp_log, "runs.jsonl")->required();
    report_cmd->add_option("--group-by", rp_group, "Comma-separated keys: model, reduction, recipe, clustering, "
                                                   "method, run")
        ->capture_default_str();
    report_cmd->add_option("--format", rp_format, "text or json")->capture_default_str();
    report_cmd->add_option("--metrics", rp_metrics, "Columns for text output");
    report_cmd->add_option("--out", rp_out, "Output path (default: stdout)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic Gaussian-blob bank");
    std::string sy_out, sy_tag = "synthetic", sy_taxon = "Aves", sy_tail;
    std::size_t sy_blobs = 30, sy_per = 200, sy_dim = 64;
    double sy_sigma = 0.5, sy_sep = 20.0;
    std::uint64_t sy_seed = 0;
    synth_cmd->add_option("--out", sy_out, "Bank directory")->required();
    synth_cmd->add_option("--blobs", sy_blobs, "Number of blobs (species)")->capture_default_str();
    synth_cmd->add_option("--per-blob", sy_per, "Points per blob")->capture_default_str();
    synth_cmd->add_option("--long-tail", sy_tail, "lo,hi: draw blob sizes uniformly instead");
    synth_cmd->add_option("--dim", sy_dim, "Dimensionality")->capture_default_str();
    synth_cmd->add_option("--sigma", sy_sigma, "Blob standard deviation")->capture_default_str();
    synth_cmd->add_option("--separation", sy_sep, "Minimum center distance")->capture_default_str();
    synth_cmd->add_option("--model-tag", sy_tag, "Model tag recorded with the bank")->capture_default_str();
    synth_cmd->add_option("--taxon-class", sy_taxon, "Taxon class for every row")->capture_default_str();
    synth_cmd->add_option("--seed", sy_seed, "Generator seed")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*validate) {
            const auto bank = read_zseb(fs::path(v_bank) / kEmbeddingsFile);
            const auto manifest = read_manifest(fs::path(v_bank) / kManifestFile);
            const auto s = validate_bank(bank, manifest);
            json j;
            j["ok"] = s.ok();
            j["n_rows"] = s.n_rows;
            j["dim"] = s.dim;
            j["manifest_rows"] = s.manifest_rows;
            j["row_count_mismatch"] = s.row_count_mismatch;
            j["n_species"] = s.n_species;
            j["min_per_species"] = s.min_per_species;
            j["max_per_species"] = s.max_per_species;
            j["n_unvalidated"] = s.n_unvalidated;
            j["species_by_class"] = s.species_by_class;
            j["duplicate_ids"] = s.duplicate_ids;
            j["nonfinite_rows"] = s.nonfinite_rows;
            j["empty_species_rows"] = s.empty_species_rows;
            if (v_json) {
                out << j.dump(2) << '\n';
            } else {
                out << (s.ok() ? "ok" : "INVALID") << ": " << s.n_rows << " rows x " << s.dim << " dims, "
                    << s.n_species << " species (" << s.min_per_species << "-" << s.max_per_species
                    << " per species), " << s.n_unvalidated << " unvalidated\n";
                for (const auto& [cls, species] : s.species_by_class) {
                    out << "  " << cls << ": " << species.size() << " species\n";
                }
                if (s.row_count_mismatch) out << "  manifest has " << s.manifest_rows << " rows\n";
                if (!s.duplicate_ids.empty()) out << "  " << s.duplicate_ids.size() << " duplicate image ids\n";
                if (!s.nonfinite_rows.empty()) out << "  " << s.nonfinite_rows.size() << " rows with non-finite values\n";
                if (!s.empty_species_rows.empty()) out << "  " << s.empty_species_rows.size() << " rows without species\n";
            }
            return s.ok() ? kOk : kData;
        }

        if (*sample) {
            auto [bank, manifest] = read_bank(s_bank);
            SamplingScenario sc;
            switch (parse_scenario_kind(s_kind)) {
                case ScenarioKind::Even: sc = SamplingScenario::even(s_n_species, s_per, s_seed); break;
                case ScenarioKind::Uneven:
                    sc = SamplingScenario::uneven(s_n_species, s_min, s_max == 0 ? s_per : s_max, s_seed);
                    break;
                case ScenarioKind::Extreme:
                    sc = SamplingScenario::extreme(s_n_species, s_min, s_seed);
                    if (s_max > 0) sc.max_per_species = s_max;
                    break;
            }
            sc.include_unvalidated = s_unvalidated;
            if (!s_taxon.empty()) sc.taxon_class = parse_taxon_class(s_taxon);
            const auto subset = sample_subset(manifest, sc, s_bank);
            emit(detail::to_json(subset).dump(2) + "\n", s_out, out);
            for (const auto& f : subset.shortfalls) {
                err << "shortfall: " << f.species << " requested " << f.requested << ", available " << f.available
                    << '\n';
            }
            return kOk;
        }

        if (*reduce_cmd) {
            const auto recipe = rflags.recipe();
            auto [bank, manifest] = read_bank(r_bank);
            const auto subset = load_subset(r_subset, manifest, r_bank, false);
            Matrix x = bank.to_matrix(subset.rows);
            if (!r_no_standardize) x = standardize(x);
            auto space = reduce(x, recipe);
            write_reduced_space(space, r_out);
            detail::write_json_file(detail::to_json(subset), fs::path(r_out) / kSubsetFile);
            out << "wrote " << space.coords.rows() << " x " << space.coords.cols() << " " << recipe.fingerprint()
                << " to " << r_out << '\n';
            return kOk;
        }

        if (*cluster_cmd) {
            const auto spec = cflags.spec();
            const auto space = load_space(c_input);
            const auto assignment = run_clustering(space.coords, spec);
            emit(detail::to_json(assignment).dump() + "\n", c_out, out);
            if (!c_out.empty() && c_out != "-") {
                out << assignment.n_clusters << " clusters, " << assignment.n_outliers() << " outliers ("
                    << spec.fingerprint() << ")\n";
            }
            return kOk;
        }

        if (*eval_cmd) {
            const auto assignment = detail::assignment_from_json(detail::read_json_file(e_assign));
            const auto truth = load_truth(e_truth);
            if (assignment.labels.size() != truth.labels.size()) {
                throw ValidationError("assignment has " + std::to_string(assignment.labels.size()) +
                                      " labels but truth has " + std::to_string(truth.labels.size()));
            }
            EvaluateOptions opt;
            opt.outlier_mode = parse_outlier_mode(e_mode);
            opt.compute_silhouette = !e_no_sil && !e_coords.empty();
            Matrix coords;
            if (opt.compute_silhouette) coords = load_space(e_coords).coords;
            const auto report = evaluate(assignment.labels, truth.labels, coords, opt, truth.names);
            emit(to_json_string(report, 2) + "\n", e_out, out);
            return kOk;
        }

        if (*bench_cmd) {
            BenchConfig config;
            if (!b_config.empty()) {
                config = bench_config_from_json(read_text(b_config), fs::path(b_config).parent_path());
            } else if (b_default) {
                config = default_per_class_config();
            } else {
                throw ParameterError("bench: pass --config or --default-grid");
            }
            if (b_jobs > 0) config.jobs = b_jobs;
            if (!b_output.empty()) config.output_dir = b_output;
            if (!b_mode.empty()) config.outlier_mode = parse_outlier_mode(b_mode);
            const auto size = grid_size(config);
            out << "grid: " << size.reduced << " reduced + " << size.raw << " raw = " << size.total() << " cells\n";
            if (b_dry) return kOk;
            GridProgress progress;
            const auto records = run_grid(config, &progress);
            out << "executed " << progress.executed << ", skipped " << progress.skipped << " (already logged), failed "
                << progress.failed << "\n";
            const auto table = aggregate(records, {"model", "reduction", "clustering"});
            write_text(config.output_dir / "summary.json", to_json_string(table) + "\n");
            const auto text = to_text_table(table);
            write_text(config.output_dir / "summary.txt", text);
            out << text;
            return kOk;
        }

        if (*count_cmd) {
            auto [bank, manifest] = read_bank(ce_bank);
            CountExperimentSpec spec;
            switch (parse_scenario_kind(ce_kind)) {
                case ScenarioKind::Even: spec.scenario = SamplingScenario::even(1, ce_per); break;
                case ScenarioKind::Uneven:
                    spec.scenario = SamplingScenario::uneven(1, ce_min, ce_max == 0 ? ce_per : ce_max);
                    break;
                case ScenarioKind::Extreme:
                    spec.scenario = SamplingScenario::extreme(1, ce_min);
                    if (ce_max > 0) spec.scenario.max_per_species = ce_max;
                    break;
            }
            spec.recipe = ce_r.recipe();
            spec.clustering = ce_c.spec();
            spec.base_seed = ce_seed;
            const auto rows = cluster_count_experiment(bank, manifest, parse_counts(ce_values, "--n-values"), ce_runs,
                                                       spec);
            json j = json::array();
            for (const auto& r : rows) {
                j.push_back({{"n_species", r.n_species},
                             {"runs", r.runs},
                             {"failed", r.failed},
                             {"predicted_clusters_mean", detail::number_or_null(r.predicted_clusters.mean)},
                             {"predicted_clusters_sd", detail::number_or_null(r.predicted_clusters.sd)},
                             {"v_measure_mean", detail::number_or_null(r.v_measure.mean)},
                             {"v_measure_sd", detail::number_or_null(r.v_measure.sd)}});
            }
            emit(j.dump(2) + "\n", ce_out, out);
            return kOk;
        }

        if (*plot_cmd) {
            const auto space = load_space(p_coords);
            const auto assignment = detail::assignment_from_json(detail::read_json_file(p_assign));
            const auto truth = load_truth(p_truth);
            emit_scatter_svg(space, assignment.labels, truth.labels, p_out, truth.names);
            out << "wrote " << p_out << '\n';
            return kOk;
        }

        if (*report_cmd) {
            const auto log = read_run_log(rp_log);
            if (log.skipped_lines > 0) err << "skipped " << log.skipped_lines << " unreadable log lines\n";
            const auto table = aggregate(log.records, split(rp_group));
            if (rp_format == "json") {
                emit(to_json_string(table) + "\n", rp_out, out);
            } else if (rp_format == "text") {
                emit(to_text_table(table, split(rp_metrics)), rp_out, out);
            } else {
                throw ParameterError("--format: expected text or json, got '" + rp_format + "'");
            }
            return kOk;
        }

        if (*synth_cmd) {
            BlobSpec spec;
            if (!sy_tail.empty()) {
                const auto bounds = parse_counts(sy_tail, "--long-tail");
                if (bounds.size() != 2) throw ParameterError("--long-tail: expected lo,hi");
                spec = BlobSpec::long_tail(sy_blobs, bounds[0], bounds[1], sy_dim, sy_seed);
            } else {
                spec = BlobSpec::uniform(sy_blobs, sy_per, sy_dim, sy_seed);
            }
            spec.sigma = sy_sigma;
            spec.min_separation = sy_sep;
            const auto blobs = make_blobs(spec);
            const auto [bank, manifest] = blobs_as_bank(blobs, sy_tag, parse_taxon_class(sy_taxon));
            write_bank(bank, manifest, sy_out);
            out << "wrote " << bank.n_rows << " x " << bank.dim << " bank to " << sy_out << '\n';
            return kOk;
        }
    } catch (const Error& e) {
        err << "error (" << e.kind() << "): " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}

}  // namespace zeroclust::cli
