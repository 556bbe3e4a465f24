#pragma once

#include <json.hpp>

#include "zeroclust/cluster.hpp"
#include "zeroclust/diagnostics.hpp"
#include "zeroclust/metrics.hpp"
#include "zeroclust/reduce.hpp"
#include "zeroclust/sampler.hpp"

namespace zeroclust::detail {

using json = nlohmann::ordered_json;

/// Doubles that JSON cannot carry (NaN, inf) become null and read back as NaN.
json number_or_null(double v);
double number_or_nan(const json& j);

json to_json(const Diagnostics& d);
Diagnostics diagnostics_from_json(const json& j);

json to_json(const ReductionRecipe& r);
ReductionRecipe recipe_from_json(const json& j);

json to_json(const ClusterSpec& s);
ClusterSpec cluster_spec_from_json(const json& j);

json to_json(const ClusterAssignment& a);
ClusterAssignment assignment_from_json(const json& j);

json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const json& j);

json to_json(const SamplingScenario& s);
SamplingScenario scenario_from_json(const json& j);

json to_json(const IndexSubset& s);
IndexSubset subset_from_json(const json& j);

/// Parses a whole file; FormatError on failure.
json read_json_file(const std::filesystem::path& file);
void write_json_file(const json& j, const std::filesystem::path& file);

}  // namespace zeroclust::detail
