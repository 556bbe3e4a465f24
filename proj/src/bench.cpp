#include "zeroclust/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "zeroclust/embank.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/rng.hpp"

namespace zeroclust {

namespace fs = std::filesystem;
using detail::json;

namespace {

constexpr char kRunLogFile[] = "runs.jsonl";

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string resolve_model_tag(const BankEntry& entry) {
    if (!entry.model_tag.empty()) return entry.model_tag;
    const auto sidecar = entry.path / kBankSidecarFile;
    if (fs::exists(sidecar)) {
        const auto j = detail::read_json_file(sidecar);
        const auto tag = j.value("model_tag", std::string());
        if (!tag.empty()) return tag;
    }
    auto name = entry.path.filename().string();
    if (name.empty()) name = entry.path.parent_path().filename().string();
    return name.empty() ? "bank" : name;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void BenchConfig::check() const {
    if (banks.empty()) throw ParameterError("banks: at least one bank is required");
    if (n_runs == 0) throw ParameterError("n_runs must be >= 1");
    if (reductions.empty() && !include_raw) throw ParameterError("reductions: nothing to run");
    if (clusterings.empty()) throw ParameterError("clusterings: at least one clustering is required");
    if (jobs == 0) throw ParameterError("jobs must be >= 1");
    scenario.check();
    std::set<std::string> seen;
    for (const auto& r : reductions) {
        if (r.method == ReductionMethod::Raw) throw ParameterError("reductions: use include_raw instead of a raw entry");
        if (!seen.insert(r.fingerprint()).second) {
            throw ParameterError("reductions: duplicate recipe " + r.fingerprint());
        }
    }
    seen.clear();
    for (const auto& c : clusterings) {
        if (!seen.insert(c.fingerprint()).second) {
            throw ParameterError("clusterings: duplicate spec " + c.fingerprint());
        }
    }
}

std::vector<ClusterSpec> default_clusterings() {
    std::vector<ClusterSpec> out{ClusterSpec::dbscan(1.0, 5), ClusterSpec::hdbscan(15, 5)};
    for (const std::size_t k : {15, 30, 45, 90, 180}) out.push_back(ClusterSpec::ward(k));
    for (const std::size_t k : {15, 30, 45, 90, 180}) out.push_back(ClusterSpec::gmm(k, 42));
    return out;
}

std::vector<ReductionRecipe> default_reductions() {
    std::vector<ReductionRecipe> out;
    for (std::uint64_t s = 0; s < 10; ++s) out.push_back(ReductionRecipe::umap(15, 0.1, s));
    for (std::uint64_t s = 0; s < 10; ++s) out.push_back(ReductionRecipe::tsne(30.0, s));
    out.push_back(ReductionRecipe::pca());
    out.push_back(ReductionRecipe::isomap());
    out.push_back(ReductionRecipe::kernel_pca());
    return out;
}

BenchConfig default_per_class_config(const std::vector<BankEntry>& banks) {
    BenchConfig c;
    if (banks.empty()) {
        for (const char* tag : {"dinov3", "bioclip2", "clip", "siglip", "dinov2"}) {
            c.banks.push_back({fs::path("banks") / tag, tag});
        }
    } else {
        c.banks = banks;
    }
    c.scenario = SamplingScenario::even(30, 200);
    c.n_runs = 10;
    c.reductions = default_reductions();
    c.include_raw = true;
    c.clusterings = default_clusterings();
    return c;
}

BenchConfig bench_config_from_json(const std::string& text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bench config: ") + e.what());
    }
    BenchConfig c = default_per_class_config();
    c.banks.clear();
    auto resolve = [&base_dir](const std::string& p) {
        fs::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    try {
        for (const auto& b : j.at("banks")) {
            if (b.is_string()) {
                c.banks.push_back({resolve(b.get<std::string>()), {}});
            } else {
                c.banks.push_back({resolve(b.at("path").get<std::string>()), b.value("model_tag", std::string())});
            }
        }
        if (j.contains("scenario")) c.scenario = detail::scenario_from_json(j["scenario"]);
        c.n_runs = j.value("n_runs", c.n_runs);
        if (j.contains("reductions") && !(j["reductions"].is_string() && j["reductions"] == "default")) {
            c.reductions.clear();
            for (const auto& r : j["reductions"]) c.reductions.push_back(detail::recipe_from_json(r));
        }
        if (j.contains("clusterings") && !(j["clusterings"].is_string() && j["clusterings"] == "default")) {
            c.clusterings.clear();
            for (const auto& s : j["clusterings"]) c.clusterings.push_back(detail::cluster_spec_from_json(s));
        }
        c.include_raw = j.value("include_raw", c.include_raw);
        c.standardize_raw = j.value("standardize_raw", c.standardize_raw);
        if (j.contains("outlier_mode")) c.outlier_mode = parse_outlier_mode(j["outlier_mode"].get<std::string>());
        c.compute_silhouette = j.value("compute_silhouette", c.compute_silhouette);
        if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
        c.base_seed = j.value("base_seed", c.base_seed);
        c.jobs = j.value("jobs", c.jobs);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bench config: ") + e.what());
    }
    c.check();
    return c;
}

std::string to_json_string(const BenchConfig& c) {
    json j;
    json banks = json::array();
    for (const auto& b : c.banks) banks.push_back({{"path", b.path.string()}, {"model_tag", b.model_tag}});
    j["banks"] = std::move(banks);
    j["scenario"] = detail::to_json(c.scenario);
    j["n_runs"] = c.n_runs;
    json reductions = json::array();
    for (const auto& r : c.reductions) reductions.push_back(detail::to_json(r));
    j["reductions"] = std::move(reductions);
    j["include_raw"] = c.include_raw;
    j["standardize_raw"] = c.standardize_raw;
    json clusterings = json::array();
    for (const auto& s : c.clusterings) clusterings.push_back(detail::to_json(s));
    j["clusterings"] = std::move(clusterings);
    j["outlier_mode"] = to_string(c.outlier_mode);
    j["compute_silhouette"] = c.compute_silhouette;
    j["output_dir"] = c.output_dir.string();
    j["base_seed"] = c.base_seed;
    j["jobs"] = c.jobs;
    return j.dump(2);
}

GridSize grid_size(const BenchConfig& c) {
    GridSize g;
    const std::size_t per_space = c.n_runs * c.banks.size() * c.clusterings.size();
    g.reduced = per_space * c.reductions.size();
    g.raw = c.include_raw ? per_space : 0;
    return g;
}

std::uint64_t subset_seed(std::uint64_t base_seed, std::size_t run) {
    return derive_seed(base_seed, "subset", run);
}

std::vector<GridCell> plan_grid(const BenchConfig& c) {
    std::vector<ReductionRecipe> spaces;
    if (c.include_raw) spaces.push_back(ReductionRecipe::raw());
    spaces.insert(spaces.end(), c.reductions.begin(), c.reductions.end());
    std::vector<std::string> tags;
    for (const auto& b : c.banks) tags.push_back(resolve_model_tag(b));
    const auto scenario_hash = hex64(hash_string(detail::to_json(c.scenario).dump()));

    std::vector<GridCell> cells;
    cells.reserve(grid_size(c).total());
    for (std::size_t run = 0; run < c.n_runs; ++run) {
        const auto sseed = subset_seed(c.base_seed, run);
        for (std::size_t b = 0; b < c.banks.size(); ++b) {
            for (const auto& recipe : spaces) {
                const auto rfp = recipe.fingerprint();
                for (const auto& spec : c.clusterings) {
                    GridCell cell;
                    cell.run = run;
                    cell.bank = b;
                    cell.model_tag = tags[b];
                    cell.recipe = recipe;
                    cell.clustering = spec;
                    cell.subset_seed = sseed;
                    const auto cfp = spec.fingerprint();
                    cell.cell_seed = derive_seed(c.base_seed, run, tags[b], rfp, cfp);
                    cell.fingerprint = "run=" + std::to_string(run) + "|model=" + tags[b] + "|scenario=" +
                                       scenario_hash + "|base_seed=" + std::to_string(c.base_seed) +
                                       "|reduction=" + rfp + "|clustering=" + cfp;
                    cells.push_back(std::move(cell));
                }
            }
        }
    }
    return cells;
}

std::string to_json_line(const RunRecord& r) {
    json j;
    j["fingerprint"] = r.fingerprint;
    j["run"] = r.run;
    j["model_tag"] = r.model_tag;
    j["subset_seed"] = r.subset_seed;
    j["subset_hash"] = r.subset_hash;
    j["n_points"] = r.n_points;
    j["n_species"] = r.n_species;
    j["recipe"] = detail::to_json(r.recipe);
    j["clustering"] = detail::to_json(r.clustering);
    j["cell_seed"] = r.cell_seed;
    j["status"] = r.ok ? "ok" : "failed";
    j["error_kind"] = r.ok ? json(nullptr) : json(r.error_kind);
    j["error_message"] = r.ok ? json(nullptr) : json(r.error_message);
    j["n_clusters"] = r.n_clusters;
    j["metrics"] = r.metrics ? detail::to_json(*r.metrics) : json(nullptr);
    j["reduce_seconds"] = r.reduce_seconds;
    j["cluster_seconds"] = r.cluster_seconds;
    return j.dump();
}

RunRecord run_record_from_json(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("run record: ") + e.what());
    }
    try {
        RunRecord r;
        r.fingerprint = j.at("fingerprint").get<std::string>();
        r.run = j.at("run").get<std::size_t>();
        r.model_tag = j.at("model_tag").get<std::string>();
        r.subset_seed = j.value("subset_seed", std::uint64_t{0});
        r.subset_hash = j.value("subset_hash", std::string());
        r.n_points = j.value("n_points", std::size_t{0});
        r.n_species = j.value("n_species", std::size_t{0});
        r.recipe = detail::recipe_from_json(j.at("recipe"));
        r.clustering = detail::cluster_spec_from_json(j.at("clustering"));
        r.cell_seed = j.value("cell_seed", std::uint64_t{0});
        r.ok = j.at("status").get<std::string>() == "ok";
        if (!r.ok) {
            r.error_kind = j.value("error_kind", std::string());
            r.error_message = j.value("error_message", std::string());
        }
        r.n_clusters = j.value("n_clusters", std::size_t{0});
        if (j.contains("metrics") && !j["metrics"].is_null()) r.metrics = detail::metric_report_from_json(j["metrics"]);
        r.reduce_seconds = j.value("reduce_seconds", 0.0);
        r.cluster_seconds = j.value("cluster_seconds", 0.0);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("run record: ") + e.what());
    }
}

RunLog read_run_log(const fs::path& file) {
    RunLog log;
    std::ifstream in(file);
    if (!in) return log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            log.records.push_back(run_record_from_json(line));
        } catch (const Error&) {
            ++log.skipped_lines;
        }
    }
    return log;
}

namespace {

/// Drops a partially written last line so appends start on a fresh line.
void repair_log_tail(const fs::path& file) {
    if (!fs::exists(file)) return;
    std::string content;
    {
        std::ifstream in(file, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        content = ss.str();
    }
    if (content.empty() || content.back() == '\n') return;
    const auto cut = content.rfind('\n');
    fs::resize_file(file, cut == std::string::npos ? 0 : cut + 1);
}

class LogWriter {
  public:
    explicit LogWriter(const fs::path& file) : out_(file, std::ios::app) {
        if (!out_) throw FormatError("cannot append to " + file.string());
    }
    void write(const RunRecord& r) {
        const auto line = to_json_line(r);
        std::lock_guard lock(mu_);
        out_ << line << '\n';
        out_.flush();
    }

  private:
    std::mutex mu_;
    std::ofstream out_;
};

struct LoadedBank {
    EmbeddingBank bank;
    Manifest manifest;
};

struct Task {
    std::size_t run;
    std::size_t bank;
    std::vector<std::size_t> cells;  // indices into the plan, same recipe
};

}  // namespace

std::vector<RunRecord> run_grid(const BenchConfig& config, GridProgress* progress) {
    config.check();
    const auto plan = plan_grid(config);
    fs::create_directories(config.output_dir);
    const auto log_path = config.output_dir / kRunLogFile;
    repair_log_tail(log_path);
    const auto existing = read_run_log(log_path);

    std::map<std::string, RunRecord> done;
    for (const auto& r : existing.records) done.try_emplace(r.fingerprint, r);

    // Group pending cells by reduced space so each reduction runs once.
    std::vector<Task> tasks;
    std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> task_of;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& cell = plan[i];
        if (done.count(cell.fingerprint)) {
            ++skipped;
            continue;
        }
        const auto key = std::make_tuple(cell.run, cell.bank, cell.recipe.fingerprint());
        auto [it, fresh] = task_of.try_emplace(key, tasks.size());
        if (fresh) tasks.push_back({cell.run, cell.bank, {}});
        tasks[it->second].cells.push_back(i);
    }

    // Banks and subsets are loaded up front; both are shared read-only.
    std::vector<std::unique_ptr<LoadedBank>> banks(config.banks.size());
    std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const IndexSubset>> subsets;
    std::map<std::pair<std::size_t, std::size_t>, std::string> subset_errors;
    for (const auto& t : tasks) {
        if (!banks[t.bank]) {
            auto [bank, manifest] = read_bank(config.banks[t.bank].path);
            const auto summary = validate_bank(bank, manifest);
            if (!summary.ok()) throw ValidationError(config.banks[t.bank].path.string() + ": bank fails validation");
            banks[t.bank] = std::make_unique<LoadedBank>(LoadedBank{std::move(bank), std::move(manifest)});
        }
        const auto key = std::make_pair(t.run, t.bank);
        if (subsets.count(key) || subset_errors.count(key)) continue;
        auto scenario = config.scenario;
        scenario.seed = subset_seed(config.base_seed, t.run);
        try {
            subsets[key] = std::make_shared<const IndexSubset>(
                sample_subset(banks[t.bank]->manifest, scenario, config.banks[t.bank].path.string()));
        } catch (const Error& e) {
            subset_errors[key] = std::string(e.kind()) + "\n" + e.what();
        }
    }

    LogWriter writer(log_path);
    std::mutex new_mu;
    std::map<std::string, RunRecord> fresh_records;
    std::atomic<std::size_t> next{0}, failed{0};

    auto base_record = [&](const GridCell& cell) {
        RunRecord r;
        r.fingerprint = cell.fingerprint;
        r.run = cell.run;
        r.model_tag = cell.model_tag;
        r.subset_seed = cell.subset_seed;
        r.recipe = cell.recipe;
        r.clustering = cell.clustering;
        r.cell_seed = cell.cell_seed;
        return r;
    };
    auto emit = [&](RunRecord r) {
        if (!r.ok) ++failed;
        writer.write(r);
        std::lock_guard lock(new_mu);
        fresh_records.emplace(r.fingerprint, std::move(r));
    };
    auto fail_all = [&](const Task& t, const std::string& kind, const std::string& message, const RunRecord* proto) {
        for (const auto i : t.cells) {
            auto r = proto ? *proto : base_record(plan[i]);
            if (proto) {
                r.fingerprint = plan[i].fingerprint;
                r.clustering = plan[i].clustering;
                r.cell_seed = plan[i].cell_seed;
            }
            r.ok = false;
            r.error_kind = kind;
            r.error_message = message;
            emit(std::move(r));
        }
    };

    auto worker = [&] {
        while (true) {
            const std::size_t ti = next.fetch_add(1);
            if (ti >= tasks.size()) return;
            const auto& task = tasks[ti];
            const auto key = std::make_pair(task.run, task.bank);
            if (const auto err = subset_errors.find(key); err != subset_errors.end()) {
                const auto nl = err->second.find('\n');
                fail_all(task, err->second.substr(0, nl), err->second.substr(nl + 1), nullptr);
                continue;
            }
            const auto& subset = *subsets.at(key);
            const auto& first = plan[task.cells.front()];
            RunRecord proto = base_record(first);
            proto.subset_hash = hex64(subset.fingerprint());
            proto.n_points = subset.size();
            proto.n_species = subset.species.size();

            ReducedSpace space;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                Matrix x = banks[task.bank]->bank.to_matrix(subset.rows);
                if (first.recipe.method == ReductionMethod::Raw) {
                    if (config.standardize_raw) x = standardize(x);
                    space = raw_passthrough(x);
                } else {
                    auto recipe = first.recipe;
                    recipe.seed = derive_seed(config.base_seed, "reduce", task.run, first.model_tag,
                                              first.recipe.fingerprint());
                    space = reduce(standardize(x), recipe);
                }
            } catch (const Error& e) {
                fail_all(task, e.kind(), e.what(), &proto);
                continue;
            } catch (const std::exception& e) {
                fail_all(task, "internal", e.what(), &proto);
                continue;
            }
            proto.reduce_seconds = seconds_since(t0);

            for (const auto i : task.cells) {
                const auto& cell = plan[i];
                RunRecord r = proto;
                r.fingerprint = cell.fingerprint;
                r.clustering = cell.clustering;
                r.cell_seed = cell.cell_seed;
                const auto t1 = std::chrono::steady_clock::now();
                try {
                    const auto assignment = run_clustering(space.coords, cell.clustering);
                    EvaluateOptions opt;
                    opt.outlier_mode = config.outlier_mode;
                    opt.compute_silhouette = config.compute_silhouette;
                    r.metrics = evaluate(assignment.labels, subset.labels, space.coords, opt, subset.species);
                    r.n_clusters = assignment.n_clusters;
                    r.ok = true;
                } catch (const Error& e) {
                    r.ok = false;
                    r.error_kind = e.kind();
                    r.error_message = e.what();
                } catch (const std::exception& e) {
                    r.ok = false;
                    r.error_kind = "internal";
                    r.error_message = e.what();
                }
                r.cluster_seconds = seconds_since(t1);
                emit(std::move(r));
            }
        }
    };

    const std::size_t n_threads = std::min(config.jobs, std::max<std::size_t>(tasks.size(), 1));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<RunRecord> out;
    out.reserve(plan.size());
    for (const auto& cell : plan) {
        if (auto it = done.find(cell.fingerprint); it != done.end()) {
            out.push_back(it->second);
        } else if (auto jt = fresh_records.find(cell.fingerprint); jt != fresh_records.end()) {
            out.push_back(jt->second);
        }
    }
    if (progress) {
        progress->planned = plan.size();
        progress->skipped = skipped;
        progress->executed = fresh_records.size();
        progress->failed = failed.load();
    }
    return out;
}

Stat summarize(const std::vector<double>& values) {
    Stat s;
    s.n = values.size();
    if (values.empty()) return s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (const double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size()));
    return s;
}

namespace {

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"v_measure",  "ami",    "ari",        "homogeneity", "completeness",
                                                "purity",     "silhouette", "n_clusters", "outlier_ratio"};
    return names;
}

std::optional<double> metric_value(const RunRecord& r, const std::string& name) {
    if (!r.metrics) return std::nullopt;
    const auto& m = *r.metrics;
    if (name == "v_measure") return m.v_measure;
    if (name == "ami") return m.ami;
    if (name == "ari") return m.ari;
    if (name == "homogeneity") return m.homogeneity;
    if (name == "completeness") return m.completeness;
    if (name == "purity") return m.purity;
    if (name == "silhouette") return m.silhouette;
    if (name == "n_clusters") return static_cast<double>(m.n_clusters);
    if (name == "outlier_ratio") return m.outlier_ratio;
    return std::nullopt;
}

std::string key_value(const RunRecord& r, const std::string& key) {
    if (key == "model") return r.model_tag;
    if (key == "reduction") return to_string(r.recipe.method);
    if (key == "recipe") return r.recipe.fingerprint();
    if (key == "clustering") return r.clustering.fingerprint();
    if (key == "method") return to_string(r.clustering.method);
    if (key == "run") return std::to_string(r.run);
    throw ParameterError("group_by: unknown key '" + key + "' (use model, reduction, recipe, clustering, method, run)");
}

}  // namespace

AggregateTable aggregate(const std::vector<RunRecord>& records, const std::vector<std::string>& group_by) {
    AggregateTable table;
    table.group_by = group_by;
    std::map<std::vector<std::string>, std::vector<const RunRecord*>> groups;
    std::vector<std::vector<std::string>> order;
    for (const auto& r : records) {
        std::vector<std::string> key;
        for (const auto& k : group_by) key.push_back(key_value(r, k));
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh) order.push_back(key);
        it->second.push_back(&r);
    }
    for (const auto& key : order) {
        const auto& members = groups.at(key);
        AggregateRow row;
        row.key = key;
        row.n_records = members.size();
        for (const auto* r : members) row.n_failed += r->ok ? 0 : 1;
        if (row.n_failed == row.n_records) {
            std::string label;
            for (const auto& k : key) label += (label.empty() ? "" : "/") + k;
            table.warnings.push_back("group " + label + " has no successful records; omitted");
            continue;
        }
        for (const auto& name : metric_names()) {
            std::vector<double> values;
            for (const auto* r : members) {
                if (!r->ok) continue;
                if (const auto v = metric_value(*r, name); v && std::isfinite(*v)) values.push_back(*v);
            }
            row.metrics.emplace_back(name, summarize(values));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string to_json_string(const AggregateTable& table, int indent) {
    json j;
    j["group_by"] = table.group_by;
    json rows = json::array();
    for (const auto& row : table.rows) {
        json r;
        json key = json::object();
        for (std::size_t k = 0; k < table.group_by.size(); ++k) key[table.group_by[k]] = row.key[k];
        r["key"] = std::move(key);
        r["n_records"] = row.n_records;
        r["n_failed"] = row.n_failed;
        json metrics = json::object();
        for (const auto& [name, s] : row.metrics) {
            metrics[name] = s.n == 0 ? json(nullptr)
                                     : json{{"n", s.n},
                                            {"mean", detail::number_or_null(s.mean)},
                                            {"sd", detail::number_or_null(s.sd)},
                                            {"min", detail::number_or_null(s.min)},
                                            {"max", detail::number_or_null(s.max)}};
        }
        r["metrics"] = std::move(metrics);
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    j["warnings"] = table.warnings;
    return j.dump(indent);
}

std::string to_text_table(const AggregateTable& table, const std::vector<std::string>& metrics) {
    const auto& chosen = metrics.empty() ? std::vector<std::string>{"v_measure", "ami", "n_clusters", "outlier_ratio"}
                                         : metrics;
    std::vector<std::string> header = table.group_by;
    header.push_back("n");
    header.push_back("failed");
    for (const auto& m : chosen) header.push_back(m);
    std::vector<std::vector<std::string>> cells;
    char buf[64];
    for (const auto& row : table.rows) {
        std::vector<std::string> line = row.key;
        line.push_back(std::to_string(row.n_records));
        line.push_back(std::to_string(row.n_failed));
        for (const auto& m : chosen) {
            const auto it = std::find_if(row.metrics.begin(), row.metrics.end(),
                                         [&m](const auto& p) { return p.first == m; });
            if (it == row.metrics.end()) throw ParameterError("metrics: unknown metric '" + m + "'");
            if (it->second.n == 0) {
                line.push_back("-");
            } else if (m == "n_clusters") {
                std::snprintf(buf, sizeof buf, "%.1f ± %.1f", it->second.mean, it->second.sd);
                line.push_back(buf);
            } else {
                std::snprintf(buf, sizeof buf, "%.3f ± %.3f", it->second.mean, it->second.sd);
                line.push_back(buf);
            }
        }
        cells.push_back(std::move(line));
    }
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (const unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;  // count UTF-8 code points
        return w;
    };
    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        widths[c] = width(header[c]);
        for (const auto& line : cells) widths[c] = std::max(widths[c], width(line[c]));
    }
    std::ostringstream os;
    auto emit_line = [&](const std::vector<std::string>& line) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            os << line[c] << std::string(widths[c] - width(line[c]) + (c + 1 < line.size() ? 2 : 0), ' ');
        }
        os << '\n';
    };
    emit_line(header);
    std::size_t total = 0;
    for (const auto w : widths) total += w + 2;
    os << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
    for (const auto& line : cells) emit_line(line);
    for (const auto& w : table.warnings) os << "warning: " << w << '\n';
    return os.str();
}

std::vector<CountExperimentRow> cluster_count_experiment(const EmbeddingBank& bank, const Manifest& manifest,
                                                         const std::vector<std::size_t>& n_values,
                                                         std::size_t runs_per_n, const CountExperimentSpec& spec) {
    if (manifest.size() != bank.n_rows) throw ValidationError("manifest and matrix differ in row count");
    if (runs_per_n == 0) throw ParameterError("runs_per_n must be >= 1");
    std::set<std::string> species;
    for (const auto& r : manifest) {
        if (!r.validated && !spec.scenario.include_unvalidated) continue;
        if (spec.scenario.taxon_class && r.taxon_class != *spec.scenario.taxon_class) continue;
        species.insert(r.species);
    }
    for (const auto n : n_values) {
        if (n == 0 || n > species.size()) {
            throw ScenarioError("count experiment: n=" + std::to_string(n) + " but the bank has " +
                                std::to_string(species.size()) + " eligible species");
        }
    }
    std::vector<CountExperimentRow> out;
    for (const auto n : n_values) {
        CountExperimentRow row;
        row.n_species = n;
        row.runs = runs_per_n;
        std::vector<double> counts, vs;
        for (std::size_t run = 0; run < runs_per_n; ++run) {
            auto scenario = spec.scenario;
            scenario.n_species = n;
            scenario.seed = derive_seed(spec.base_seed, "count-experiment", n, run);
            try {
                const auto subset = sample_subset(manifest, scenario);
                Matrix x = bank.to_matrix(subset.rows);
                if (spec.standardize) x = standardize(x);
                auto recipe = spec.recipe;
                recipe.seed = derive_seed(spec.recipe.seed, "count-experiment", n, run);
                const auto space = reduce(x, recipe);
                const auto assignment = run_clustering(space.coords, spec.clustering);
                EvaluateOptions opt;
                opt.compute_silhouette = false;
                const auto report = evaluate(assignment.labels, subset.labels, Matrix{}, opt);
                counts.push_back(static_cast<double>(assignment.n_clusters));
                vs.push_back(report.v_measure);
            } catch (const Error&) {
                ++row.failed;
            }
        }
        row.predicted_clusters = summarize(counts);
        row.v_measure = summarize(vs);
        out.push_back(row);
    }
    return out;
}

namespace {

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
                                "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
                                "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5"};

std::string color_for(std::int32_t id) {
    constexpr std::size_t kBase = sizeof(kPalette) / sizeof(kPalette[0]);
    if (id < 0) return "#000000";
    const auto u = static_cast<std::size_t>(id);
    if (u < kBase) return kPalette[u];
    // Golden-angle hues beyond the fixed palette, computed in integers.
    const std::size_t hue = (u * 137) % 360;
    char buf[32];
    std::snprintf(buf, sizeof buf, "hsl(%zu,65%%,%zu%%)", hue, 40 + (u % 3) * 10);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string scatter_svg(const Matrix& coords, std::span<const std::int32_t> labels,
                        std::span<const std::int32_t> truth, std::span<const std::string> species_names) {
    if (coords.cols() != 2) throw ParameterError("scatter: coordinates must be 2D, got " + std::to_string(coords.cols()));
    if (labels.size() != coords.rows() || truth.size() != coords.rows()) {
        throw ValidationError("scatter: coordinates, labels and truth differ in length");
    }
    constexpr double kPlot = 640.0, kMargin = 20.0, kLegend = 220.0;
    constexpr std::size_t kLegendMax = 25;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (coords.rows() > 0) {
        xmin = xmax = coords(0, 0);
        ymin = ymax = coords(0, 1);
        for (std::size_t i = 0; i < coords.rows(); ++i) {
            xmin = std::min(xmin, coords(i, 0));
            xmax = std::max(xmax, coords(i, 0));
            ymin = std::min(ymin, coords(i, 1));
            ymax = std::max(ymax, coords(i, 1));
        }
    }
    const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
    const double scale = kPlot / span;
    auto px = [&](double v) { return kMargin + (v - xmin) * scale; };
    auto py = [&](double v) { return kMargin + kPlot - (v - ymin) * scale; };

    std::ostringstream os;
    char buf[256];
    const double width = kPlot + 2 * kMargin + kLegend, height = kPlot + 2 * kMargin;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                  width, height, width, height);
    os << buf;
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n<g id=\"points\">\n";
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        const double x = px(coords(i, 0)), y = py(coords(i, 1));
        const auto outline = color_for(truth[i]);
        if (labels[i] < 0) {
            std::snprintf(buf, sizeof buf,
                          "<path d=\"M%.2f %.2fL%.2f %.2fM%.2f %.2fL%.2f %.2f\" stroke=\"%s\" stroke-width=\"1.2\"/>\n",
                          x - 3, y - 3, x + 3, y + 3, x - 3, y + 3, x + 3, y - 3, outline.c_str());
        } else {
            std::snprintf(buf, sizeof buf,
                          "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\" stroke=\"%s\" stroke-width=\"1\"/>\n", x,
                          y, color_for(labels[i]).c_str(), outline.c_str());
        }
        os << buf;
    }
    os << "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
    std::set<std::int32_t> clusters(labels.begin(), labels.end()), species(truth.begin(), truth.end());
    double ly = kMargin + 10;
    const double lx = kPlot + 2 * kMargin;
    os << "<text x=\"" << lx << "\" y=\"" << ly << "\" font-weight=\"bold\">clusters (fill)</text>\n";
    std::size_t shown = 0;
    for (const auto c : clusters) {
        if (shown == kLegendMax) break;
        ly += 14;
        if (c < 0) {
            std::snprintf(buf, sizeof buf,
                          "<path d=\"M%.0f %.0fL%.0f %.0fM%.0f %.0fL%.0f %.0f\" stroke=\"#000000\"/><text x=\"%.0f\" "
                          "y=\"%.0f\">outlier</text>\n",
                          lx, ly - 8, lx + 8, ly, lx, ly, lx + 8, ly - 8, lx + 14, ly);
        } else {
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%.0f\" y=\"%.0f\" width=\"8\" height=\"8\" fill=\"%s\"/><text x=\"%.0f\" "
                          "y=\"%.0f\">%d</text>\n",
                          lx, ly - 8, color_for(c).c_str(), lx + 14, ly, c);
        }
        os << buf;
        ++shown;
    }
    if (clusters.size() > shown) {
        ly += 14;
        os << "<text x=\"" << lx << "\" y=\"" << ly << "\">+" << clusters.size() - shown << " more</text>\n";
    }
    ly += 24;
    os << "<text x=\"" << lx << "\" y=\"" << ly << "\" font-weight=\"bold\">species (outline)</text>\n";
    shown = 0;
    for (const auto s : species) {
        if (shown == kLegendMax) break;
        ly += 14;
        const auto su = static_cast<std::size_t>(s);
        const std::string name = su < species_names.size() ? species_names[su] : std::to_string(s);
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.0f\" y=\"%.0f\" width=\"8\" height=\"8\" fill=\"none\" stroke=\"%s\"/>", lx,
                      ly - 8, color_for(s).c_str());
        os << buf << "<text x=\"" << lx + 14 << "\" y=\"" << ly << "\">" << escape_xml(name) << "</text>\n";
        ++shown;
    }
    if (species.size() > shown) {
        ly += 14;
        os << "<text x=\"" << lx << "\" y=\"" << ly << "\">+" << species.size() - shown << " more</text>\n";
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

void emit_scatter_svg(const ReducedSpace& reduced, std::span<const std::int32_t> labels,
                      std::span<const std::int32_t> truth, const fs::path& path,
                      std::span<const std::string> species_names) {
    const auto svg = scatter_svg(reduced.coords, labels, truth, species_names);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << svg;
}

}  // namespace zeroclust
