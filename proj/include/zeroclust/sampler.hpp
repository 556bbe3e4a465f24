#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zeroclust/embank.hpp"

namespace zeroclust {

enum class ScenarioKind { Even, Uneven, Extreme };

std::string to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(const std::string& s);

/// Per-run sampling recipe. Even draws `per_species` rows per species;
/// Uneven draws a per-species target uniformly from [min, max]; Extreme from
/// [min, available] (or [min, max] when max is set).
struct SamplingScenario {
    ScenarioKind kind = ScenarioKind::Even;
    std::size_t per_species = 200;
    std::size_t min_per_species = 20;
    std::optional<std::size_t> max_per_species;
    std::size_t n_species = 30;
    std::uint64_t seed = 0;
    /// Rows with validated=false are skipped unless this is set.
    bool include_unvalidated = false;
    /// Restricts the draw to one taxonomic class when set.
    std::optional<TaxonClass> taxon_class;

    static SamplingScenario even(std::size_t n_species, std::size_t per_species = 200, std::uint64_t seed = 0);
    static SamplingScenario uneven(std::size_t n_species, std::size_t min = 20, std::size_t max = 200,
                                   std::uint64_t seed = 0);
    static SamplingScenario extreme(std::size_t n_species, std::size_t min = 20, std::uint64_t seed = 0);

    void check() const;
};

struct Shortfall {
    std::string species;
    std::size_t requested = 0;
    std::size_t available = 0;
};

/// Row indices into one or more banks plus ground-truth labels. Labels index
/// `species`; `bank` indexes `banks`.
struct IndexSubset {
    SamplingScenario scenario;
    std::vector<std::string> banks;
    std::vector<std::string> species;
    std::vector<std::size_t> rows;
    std::vector<std::uint32_t> bank;
    std::vector<std::int32_t> labels;
    std::vector<Shortfall> shortfalls;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
    /// Stable 64-bit digest of (banks, rows, labels) for run fingerprints.
    std::uint64_t fingerprint() const;
    /// Labels as species names, one per row.
    std::vector<std::string> label_names() const;
};

/// Draws a seeded subset. `bank_id` names the bank for provenance.
/// Throws ScenarioError when the bank cannot satisfy the scenario.
IndexSubset sample_subset(const Manifest& manifest, const SamplingScenario& scenario,
                          const std::string& bank_id = "bank");

/// Every eligible row of a bank, labeled by species in name order.
IndexSubset full_subset(const Manifest& manifest, const std::string& bank_id = "bank",
                        bool include_unvalidated = false);

/// Concatenates two subsets. Species with the same name share a label.
/// Throws ScenarioError when both draw the same row of the same bank.
IndexSubset combine_subsets(const IndexSubset& a, const IndexSubset& b);

}  // namespace zeroclust
