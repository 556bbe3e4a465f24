#include "json_util.hpp"

#include <cmath>
#include <fstream>

#include "zeroclust/error.hpp"

namespace zeroclust::detail {

namespace {

template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

json number_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

double number_or_nan(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json to_json(const Diagnostics& d) {
    json j = json::object();
    json scalars = json::object();
    for (const auto& [k, v] : d.scalars) scalars[k] = number_or_null(v);
    json series = json::object();
    for (const auto& [k, values] : d.series) {
        json arr = json::array();
        for (const double v : values) arr.push_back(number_or_null(v));
        series[k] = std::move(arr);
    }
    j["scalars"] = std::move(scalars);
    j["series"] = std::move(series);
    j["notes"] = d.notes;
    return j;
}

Diagnostics diagnostics_from_json(const json& j) {
    return guarded("diagnostics", [&] {
        Diagnostics d;
        if (!j.is_object()) return d;
        if (j.contains("scalars")) {
            for (const auto& [k, v] : j["scalars"].items()) d.scalars[k] = number_or_nan(v);
        }
        if (j.contains("series")) {
            for (const auto& [k, arr] : j["series"].items()) {
                auto& out = d.series[k];
                for (const auto& v : arr) out.push_back(number_or_nan(v));
            }
        }
        if (j.contains("notes")) d.notes = j["notes"].get<std::vector<std::string>>();
        return d;
    });
}

json to_json(const ReductionRecipe& r) {
    json j;
    j["method"] = to_string(r.method);
    j["target_dim"] = r.target_dim;
    j["seed"] = r.seed;
    json params = json::object();
    for (const auto& [k, v] : r.params) params[k] = v;
    j["params"] = std::move(params);
    j["fingerprint"] = r.fingerprint();
    return j;
}

ReductionRecipe recipe_from_json(const json& j) {
    return guarded("recipe", [&] {
        ReductionRecipe r;
        r.method = parse_reduction_method(j.at("method").get<std::string>());
        r.target_dim = j.value("target_dim", r.method == ReductionMethod::Raw ? std::size_t{0} : std::size_t{2});
        r.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("params")) {
            for (const auto& [k, v] : j["params"].items()) r.params[k] = v.get<double>();
        }
        return r;
    });
}

json to_json(const ClusterSpec& s) {
    json j;
    j["method"] = to_string(s.method);
    json params = json::object();
    for (const auto& [k, v] : s.params) params[k] = v;
    j["params"] = std::move(params);
    j["seed"] = s.seed;
    j["fingerprint"] = s.fingerprint();
    return j;
}

ClusterSpec cluster_spec_from_json(const json& j) {
    return guarded("clustering", [&] {
        ClusterSpec s;
        s.method = parse_cluster_method(j.at("method").get<std::string>());
        s.seed = j.value("seed", std::uint64_t{42});
        if (j.contains("params")) {
            for (const auto& [k, v] : j["params"].items()) s.params[k] = v.get<double>();
        }
        return s;
    });
}

json to_json(const ClusterAssignment& a) {
    json j;
    j["algorithm"] = to_json(a.algorithm);
    j["n_clusters"] = a.n_clusters;
    j["n_outliers"] = a.n_outliers();
    j["labels"] = a.labels;
    j["diagnostics"] = to_json(a.diagnostics);
    return j;
}

ClusterAssignment assignment_from_json(const json& j) {
    return guarded("assignment", [&] {
        ClusterAssignment a;
        a.labels = j.at("labels").get<std::vector<std::int32_t>>();
        if (j.contains("algorithm")) a.algorithm = cluster_spec_from_json(j["algorithm"]);
        std::int32_t hi = -1;
        for (const auto l : a.labels) {
            if (l < -1) throw ValidationError("assignment: label " + std::to_string(l) + " is below -1");
            hi = std::max(hi, l);
        }
        a.n_clusters = static_cast<std::size_t>(hi + 1);
        if (j.contains("diagnostics")) a.diagnostics = diagnostics_from_json(j["diagnostics"]);
        return a;
    });
}

json to_json(const MetricReport& r) {
    json j;
    j["homogeneity"] = number_or_null(r.homogeneity);
    j["completeness"] = number_or_null(r.completeness);
    j["v_measure"] = number_or_null(r.v_measure);
    j["mi"] = number_or_null(r.mi);
    j["ami"] = number_or_null(r.ami);
    j["ami_undefined"] = r.ami_undefined;
    j["ari"] = number_or_null(r.ari);
    j["purity"] = number_or_null(r.purity);
    j["silhouette"] = r.silhouette ? number_or_null(*r.silhouette) : json(nullptr);
    j["outlier_ratio"] = number_or_null(r.outlier_ratio);
    j["n_clusters"] = r.n_clusters;
    j["n_outliers"] = r.n_outliers;
    j["outlier_mode"] = to_string(r.outlier_mode);
    json species = json::array();
    for (const auto& d : r.per_species) {
        json s;
        s["species"] = d.species;
        s["name"] = d.name;
        s["n_clustered"] = d.n_clustered;
        s["present"] = d.present;
        s["isolation_index"] = d.present ? number_or_null(d.isolation_index) : json(nullptr);
        s["effective_cluster_count"] = d.present ? number_or_null(d.effective_cluster_count) : json(nullptr);
        s["behavior"] = d.present ? json(to_string(d.behavior)) : json(nullptr);
        species.push_back(std::move(s));
    }
    j["per_species"] = std::move(species);
    return j;
}

MetricReport metric_report_from_json(const json& j) {
    return guarded("metrics", [&] {
        MetricReport r;
        r.homogeneity = number_or_nan(j.at("homogeneity"));
        r.completeness = number_or_nan(j.at("completeness"));
        r.v_measure = number_or_nan(j.at("v_measure"));
        r.mi = number_or_nan(j.at("mi"));
        r.ami = number_or_nan(j.at("ami"));
        r.ami_undefined = j.value("ami_undefined", false);
        r.ari = number_or_nan(j.at("ari"));
        r.purity = number_or_nan(j.at("purity"));
        if (j.contains("silhouette") && !j["silhouette"].is_null()) r.silhouette = j["silhouette"].get<double>();
        r.outlier_ratio = number_or_nan(j.at("outlier_ratio"));
        r.n_clusters = j.at("n_clusters").get<std::size_t>();
        r.n_outliers = j.value("n_outliers", std::size_t{0});
        r.outlier_mode = parse_outlier_mode(j.value("outlier_mode", std::string("exclude")));
        if (j.contains("per_species")) {
            for (const auto& s : j["per_species"]) {
                SpeciesDiagnostics d;
                d.species = s.at("species").get<std::int32_t>();
                d.name = s.value("name", std::string());
                d.n_clustered = s.value("n_clustered", std::int64_t{0});
                d.present = s.value("present", false);
                if (d.present) {
                    d.isolation_index = number_or_nan(s.at("isolation_index"));
                    d.effective_cluster_count = number_or_nan(s.at("effective_cluster_count"));
                    d.behavior = classify_behavior(d.isolation_index, d.effective_cluster_count);
                    const auto b = s.value("behavior", std::string());
                    for (const auto cand : {Behavior::Ideal, Behavior::Oversplit, Behavior::Merged, Behavior::Mixed})
                        if (to_string(cand) == b) d.behavior = cand;
                }
                r.per_species.push_back(std::move(d));
            }
        }
        return r;
    });
}

json to_json(const SamplingScenario& s) {
    json j;
    j["kind"] = to_string(s.kind);
    j["n_species"] = s.n_species;
    j["per_species"] = s.per_species;
    j["min_per_species"] = s.min_per_species;
    j["max_per_species"] = s.max_per_species ? json(*s.max_per_species) : json(nullptr);
    j["seed"] = s.seed;
    j["include_unvalidated"] = s.include_unvalidated;
    j["taxon_class"] = s.taxon_class ? json(to_string(*s.taxon_class)) : json(nullptr);
    return j;
}

SamplingScenario scenario_from_json(const json& j) {
    return guarded("scenario", [&] {
        SamplingScenario s;
        s.kind = parse_scenario_kind(j.value("kind", std::string("even")));
        s.n_species = j.value("n_species", s.n_species);
        s.per_species = j.value("per_species", s.per_species);
        s.min_per_species = j.value("min_per_species", s.min_per_species);
        if (j.contains("max_per_species") && !j["max_per_species"].is_null()) {
            s.max_per_species = j["max_per_species"].get<std::size_t>();
        }
        s.seed = j.value("seed", std::uint64_t{0});
        s.include_unvalidated = j.value("include_unvalidated", false);
        if (j.contains("taxon_class") && !j["taxon_class"].is_null()) {
            s.taxon_class = parse_taxon_class(j["taxon_class"].get<std::string>());
        }
        return s;
    });
}

json to_json(const IndexSubset& s) {
    json j;
    j["scenario"] = to_json(s.scenario);
    j["banks"] = s.banks;
    j["species"] = s.species;
    j["rows"] = s.rows;
    j["bank"] = s.bank;
    j["labels"] = s.labels;
    json shortfalls = json::array();
    for (const auto& f : s.shortfalls) {
        shortfalls.push_back({{"species", f.species}, {"requested", f.requested}, {"available", f.available}});
    }
    j["shortfalls"] = std::move(shortfalls);
    return j;
}

IndexSubset subset_from_json(const json& j) {
    return guarded("subset", [&] {
        IndexSubset s;
        if (j.contains("scenario")) s.scenario = scenario_from_json(j["scenario"]);
        s.banks = j.at("banks").get<std::vector<std::string>>();
        s.species = j.at("species").get<std::vector<std::string>>();
        s.rows = j.at("rows").get<std::vector<std::size_t>>();
        s.bank = j.at("bank").get<std::vector<std::uint32_t>>();
        s.labels = j.at("labels").get<std::vector<std::int32_t>>();
        if (s.bank.size() != s.rows.size() || s.labels.size() != s.rows.size()) {
            throw ValidationError("subset: rows, bank and labels differ in length");
        }
        for (const auto l : s.labels) {
            if (l < 0 || static_cast<std::size_t>(l) >= s.species.size()) {
                throw ValidationError("subset: label " + std::to_string(l) + " has no species");
            }
        }
        for (const auto b : s.bank) {
            if (b >= s.banks.size()) throw ValidationError("subset: bank index " + std::to_string(b) + " out of range");
        }
        if (j.contains("shortfalls")) {
            for (const auto& f : j["shortfalls"]) {
                s.shortfalls.push_back({f.at("species").get<std::string>(), f.at("requested").get<std::size_t>(),
                                        f.at("available").get<std::size_t>()});
            }
        }
        return s;
    });
}

json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw FormatError("cannot open " + file.string());
    try {
        return json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
}

void write_json_file(const json& j, const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + file.string());
    out << j.dump(2) << '\n';
}

}  // namespace zeroclust::detail
