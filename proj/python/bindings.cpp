#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "zeroclust/bench.hpp"
#include "zeroclust/cluster.hpp"
#include "zeroclust/embank.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/metrics.hpp"
#include "zeroclust/reduce.hpp"
#include "zeroclust/sampler.hpp"
#include "zeroclust/synthetic.hpp"

namespace py = pybind11;
using namespace zeroclust;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw ParameterError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out;
}

std::vector<std::int32_t> to_labels(const LabelArray& a) {
    if (a.ndim() != 1) throw ParameterError("labels must be 1-D");
    return {a.data(), a.data() + a.size()};
}

py::dict to_dict(const Diagnostics& d) {
    py::dict out;
    out["scalars"] = d.scalars;
    out["series"] = d.series;
    out["notes"] = d.notes;
    return out;
}

py::dict to_dict(const ManifestRecord& r) {
    py::dict out;
    out["image_id"] = r.image_id;
    out["species"] = r.species;
    out["taxon_class"] = to_string(r.taxon_class);
    out["source_code"] = r.source_code;
    out["location_id"] = r.location_id ? py::cast(*r.location_id) : py::none();
    out["validated"] = r.validated;
    return out;
}

ManifestRecord record_from(const py::handle& h) {
    const auto d = h.cast<py::dict>();
    ManifestRecord r;
    r.image_id = d["image_id"].cast<std::string>();
    r.species = d["species"].cast<std::string>();
    r.taxon_class = parse_taxon_class(d["taxon_class"].cast<std::string>());
    r.source_code = d.contains("source_code") ? d["source_code"].cast<std::string>() : "";
    if (d.contains("location_id") && !d["location_id"].is_none()) r.location_id = d["location_id"].cast<std::string>();
    r.validated = d.contains("validated") ? d["validated"].cast<bool>() : true;
    return r;
}

py::object json_loads(const std::string& text) {
    return py::module_::import("json").attr("loads")(text);
}

py::tuple read_bank_py(const std::filesystem::path& dir) {
    const auto [bank, manifest] = read_bank(dir);
    py::list records;
    for (const auto& r : manifest) records.append(to_dict(r));
    return py::make_tuple(to_array(bank.to_matrix()), records, bank.model_tag);
}

void write_bank_py(const std::filesystem::path& dir, const Array& embeddings, const py::list& manifest,
                   const std::string& model_tag) {
    Manifest m;
    for (const auto& h : manifest) m.push_back(record_from(h));
    write_bank(bank_from_matrix(to_matrix(embeddings), model_tag), m, dir);
}

py::dict validate_bank_py(const std::filesystem::path& dir) {
    const auto [bank, manifest] = read_bank(dir);
    const auto s = validate_bank(bank, manifest);
    py::dict out;
    out["ok"] = s.ok();
    out["n_rows"] = s.n_rows;
    out["dim"] = s.dim;
    out["n_species"] = s.n_species;
    out["min_per_species"] = s.min_per_species;
    out["max_per_species"] = s.max_per_species;
    out["n_unvalidated"] = s.n_unvalidated;
    out["species_by_class"] = s.species_by_class;
    out["duplicate_ids"] = s.duplicate_ids;
    return out;
}

py::tuple reduce_py(const Array& x, const std::string& method, std::size_t target_dim, std::uint64_t seed,
                    const std::map<std::string, double>& params, bool standardize_first) {
    ReductionRecipe recipe;
    recipe.method = parse_reduction_method(method);
    recipe.target_dim = target_dim;
    recipe.seed = seed;
    recipe.params = params;
    Matrix m = to_matrix(x);
    if (standardize_first) m = standardize(m);
    ReducedSpace space;
    {
        py::gil_scoped_release release;
        space = reduce(m, recipe);
    }
    return py::make_tuple(to_array(space.coords), to_dict(space.diagnostics));
}

py::tuple cluster_py(const Array& coords, const std::string& method, const std::map<std::string, double>& params,
                     std::uint64_t seed) {
    ClusterSpec spec;
    spec.method = parse_cluster_method(method);
    spec.params = params;
    spec.seed = seed;
    const Matrix m = to_matrix(coords);
    ClusterAssignment a;
    {
        py::gil_scoped_release release;
        a = run_clustering(m, spec);
    }
    return py::make_tuple(py::array_t<std::int32_t>(a.labels.size(), a.labels.data()), a.n_clusters,
                          to_dict(a.diagnostics));
}

py::object evaluate_py(const LabelArray& pred, const LabelArray& truth, const std::optional<Array>& coords,
                       const std::string& outlier_mode) {
    EvaluateOptions opt;
    opt.outlier_mode = parse_outlier_mode(outlier_mode);
    opt.compute_silhouette = coords.has_value();
    const Matrix m = coords ? to_matrix(*coords) : Matrix{};
    return json_loads(to_json_string(evaluate(to_labels(pred), to_labels(truth), m, opt)));
}

py::tuple make_blobs_py(std::size_t n_blobs, std::size_t per_blob, std::size_t dim, double sigma,
                        double separation, std::uint64_t seed) {
    auto spec = BlobSpec::uniform(n_blobs, per_blob, dim, seed);
    spec.sigma = sigma;
    spec.min_separation = separation;
    const auto blobs = make_blobs(spec);
    return py::make_tuple(to_array(blobs.points),
                          py::array_t<std::int32_t>(blobs.labels.size(), blobs.labels.data()));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Embedding-space clustering benchmark core";

    auto base = py::register_exception<Error>(m, "ZeroclustError", PyExc_RuntimeError);
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
    py::register_exception<ScenarioError>(m, "ScenarioError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());

    m.def("read_bank", &read_bank_py, py::arg("path"),
          "Returns (embeddings float64 N x D, manifest list of dicts, model_tag).");
    m.def("write_bank", &write_bank_py, py::arg("path"), py::arg("embeddings"), py::arg("manifest"),
          py::arg("model_tag") = "");
    m.def("validate_bank", &validate_bank_py, py::arg("path"));

    m.def("standardize", [](const Array& x) { return to_array(standardize(to_matrix(x))); }, py::arg("x"));
    m.def("reduce", &reduce_py, py::arg("x"), py::arg("method") = "tsne", py::arg("target_dim") = 2,
          py::arg("seed") = 0, py::arg("params") = std::map<std::string, double>{},
          py::arg("standardize") = false, "Returns (coords, diagnostics).");
    m.def("fit_ab", &umap_detail::fit_ab, py::arg("spread") = 1.0, py::arg("min_dist") = 0.1);

    m.def("auto_epsilon", [](const Array& x, std::size_t min_samples) { return auto_epsilon(to_matrix(x), min_samples); },
          py::arg("coords"), py::arg("min_samples") = 5);
    m.def("cluster", &cluster_py, py::arg("coords"), py::arg("method") = "hdbscan",
          py::arg("params") = std::map<std::string, double>{}, py::arg("seed") = 42,
          "Returns (labels, n_clusters, diagnostics).");

    m.def("evaluate", &evaluate_py, py::arg("pred"), py::arg("truth"), py::arg("coords") = py::none(),
          py::arg("outlier_mode") = "exclude");
    m.def("v_measure_from", &v_measure_from, py::arg("h"), py::arg("c"));

    m.def("make_blobs", &make_blobs_py, py::arg("n_blobs") = 30, py::arg("per_blob") = 200, py::arg("dim") = 64,
          py::arg("sigma") = 0.5, py::arg("separation") = 20.0, py::arg("seed") = 0);
    m.def("default_grid_size", [] {
        const auto s = grid_size(default_per_class_config());
        return py::make_tuple(s.reduced, s.raw);
    });
}
