#include "zeroclust/sampler.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "zeroclust/error.hpp"
#include "zeroclust/rng.hpp"

namespace zeroclust {

namespace {

/// First `count` elements of a seeded Fisher-Yates shuffle of `pool`.
template <typename T>
std::vector<T> draw_without_replacement(std::vector<T> pool, std::size_t count, Rng& rng) {
    count = std::min(count, pool.size());
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace

std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::Even: return "even";
        case ScenarioKind::Uneven: return "uneven";
        case ScenarioKind::Extreme: return "extreme";
    }
    return "even";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
    if (s == "even" || s == "Even") return ScenarioKind::Even;
    if (s == "uneven" || s == "Uneven") return ScenarioKind::Uneven;
    if (s == "extreme" || s == "Extreme") return ScenarioKind::Extreme;
    throw ParameterError("scenario: unknown kind '" + s + "' (expected even, uneven or extreme)");
}

SamplingScenario SamplingScenario::even(std::size_t n_species, std::size_t per_species, std::uint64_t seed) {
    SamplingScenario s;
    s.kind = ScenarioKind::Even;
    s.n_species = n_species;
    s.per_species = per_species;
    s.seed = seed;
    return s;
}

SamplingScenario SamplingScenario::uneven(std::size_t n_species, std::size_t min, std::size_t max,
                                          std::uint64_t seed) {
    SamplingScenario s;
    s.kind = ScenarioKind::Uneven;
    s.n_species = n_species;
    s.min_per_species = min;
    s.max_per_species = max;
    s.seed = seed;
    return s;
}

SamplingScenario SamplingScenario::extreme(std::size_t n_species, std::size_t min, std::uint64_t seed) {
    SamplingScenario s;
    s.kind = ScenarioKind::Extreme;
    s.n_species = n_species;
    s.min_per_species = min;
    s.seed = seed;
    return s;
}

void SamplingScenario::check() const {
    if (min_per_species < 1) throw ParameterError("min_per_species must be >= 1");
    if (per_species < 1) throw ParameterError("per_species must be >= 1");
    if (n_species < 2) throw ParameterError("n_species must be >= 2");
    if (kind == ScenarioKind::Uneven && !max_per_species) {
        throw ParameterError("max_per_species is required for the uneven scenario");
    }
    if (max_per_species && *max_per_species < min_per_species) {
        throw ParameterError("max_per_species must be >= min_per_species");
    }
}

std::uint64_t IndexSubset::fingerprint() const {
    std::uint64_t h = hash_string("subset");
    for (const auto& b : banks) h = mix_seed(h, hash_string(b));
    for (const auto& s : species) h = mix_seed(h, hash_string(s));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        h = mix_seed(h, rows[i]);
        h = mix_seed(h, bank[i]);
        h = mix_seed(h, static_cast<std::uint64_t>(labels[i]));
    }
    return h;
}

std::vector<std::string> IndexSubset::label_names() const {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (const auto l : labels) out.push_back(species[static_cast<std::size_t>(l)]);
    return out;
}

IndexSubset sample_subset(const Manifest& manifest, const SamplingScenario& scenario, const std::string& bank_id) {
    scenario.check();

    // Species pools in name order so the draw depends only on content.
    std::map<std::string, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& r = manifest[i];
        if (!r.validated && !scenario.include_unvalidated) continue;
        if (scenario.taxon_class && r.taxon_class != *scenario.taxon_class) continue;
        pools[r.species].push_back(i);
    }
    if (pools.size() < scenario.n_species) {
        throw ScenarioError("scenario asks for " + std::to_string(scenario.n_species) + " species but the bank has " +
                            std::to_string(pools.size()) + " with eligible rows");
    }

    std::vector<std::string> names;
    names.reserve(pools.size());
    for (const auto& [name, rows] : pools) names.push_back(name);

    std::vector<std::string> chosen;
    if (scenario.n_species < names.size()) {
        Rng parent(derive_seed(scenario.seed, "species-selection"));
        chosen = draw_without_replacement(names, scenario.n_species, parent);
        std::sort(chosen.begin(), chosen.end());
    } else {
        chosen = names;
    }

    IndexSubset out;
    out.scenario = scenario;
    out.banks = {bank_id};
    out.species = chosen;
    for (std::size_t label = 0; label < chosen.size(); ++label) {
        const auto& name = chosen[label];
        const auto& pool = pools.at(name);
        const std::size_t available = pool.size();
        if (available < scenario.min_per_species) {
            throw ScenarioError("species '" + name + "' has " + std::to_string(available) +
                                " eligible rows, fewer than min_per_species=" +
                                std::to_string(scenario.min_per_species));
        }
        Rng rng(derive_seed(scenario.seed, "species-rows", name));
        std::size_t target = 0;
        switch (scenario.kind) {
            case ScenarioKind::Even:
                target = scenario.per_species;
                break;
            case ScenarioKind::Uneven:
                target = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(scenario.min_per_species),
                                                              static_cast<std::int64_t>(*scenario.max_per_species)));
                break;
            case ScenarioKind::Extreme: {
                const std::size_t hi = scenario.max_per_species ? std::min(*scenario.max_per_species, available)
                                                                : available;
                target = static_cast<std::size_t>(
                    rng.between(static_cast<std::int64_t>(scenario.min_per_species), static_cast<std::int64_t>(hi)));
                break;
            }
        }
        if (target > available) {
            out.shortfalls.push_back({name, target, available});
        }
        auto rows = draw_without_replacement(pool, target, rng);
        std::sort(rows.begin(), rows.end());
        for (const auto r : rows) {
            out.rows.push_back(r);
            out.bank.push_back(0);
            out.labels.push_back(static_cast<std::int32_t>(label));
        }
    }
    return out;
}

IndexSubset full_subset(const Manifest& manifest, const std::string& bank_id, bool include_unvalidated) {
    std::map<std::string, std::int32_t> ids;
    for (const auto& r : manifest) {
        if (r.validated || include_unvalidated) ids.emplace(r.species, 0);
    }
    IndexSubset out;
    out.banks = {bank_id};
    out.scenario.include_unvalidated = include_unvalidated;
    out.scenario.n_species = ids.size();
    for (auto& [name, id] : ids) {
        id = static_cast<std::int32_t>(out.species.size());
        out.species.push_back(name);
    }
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& r = manifest[i];
        if (!r.validated && !include_unvalidated) continue;
        out.rows.push_back(i);
        out.bank.push_back(0);
        out.labels.push_back(ids.at(r.species));
    }
    return out;
}

IndexSubset combine_subsets(const IndexSubset& a, const IndexSubset& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;

    IndexSubset out;
    out.scenario = a.scenario;
    out.scenario.n_species = 0;
    out.banks = a.banks;
    out.species = a.species;
    out.shortfalls = a.shortfalls;
    out.shortfalls.insert(out.shortfalls.end(), b.shortfalls.begin(), b.shortfalls.end());

    std::map<std::string, std::uint32_t> bank_index;
    for (std::uint32_t i = 0; i < out.banks.size(); ++i) bank_index[out.banks[i]] = i;
    std::map<std::string, std::int32_t> species_index;
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(out.species.size()); ++i) species_index[out.species[i]] = i;

    std::set<std::pair<std::uint32_t, std::size_t>> seen;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        seen.emplace(a.bank[i], a.rows[i]);
    }
    out.rows = a.rows;
    out.bank = a.bank;
    out.labels = a.labels;

    for (std::size_t i = 0; i < b.rows.size(); ++i) {
        const auto& bank_name = b.banks[b.bank[i]];
        auto [bit, bank_new] = bank_index.try_emplace(bank_name, static_cast<std::uint32_t>(out.banks.size()));
        if (bank_new) out.banks.push_back(bank_name);
        const auto& species_name = b.species[static_cast<std::size_t>(b.labels[i])];
        auto [sit, sp_new] = species_index.try_emplace(species_name, static_cast<std::int32_t>(out.species.size()));
        if (sp_new) out.species.push_back(species_name);
        if (!seen.emplace(bit->second, b.rows[i]).second) {
            throw ScenarioError("combine_subsets: row " + std::to_string(b.rows[i]) + " of bank '" + bank_name +
                                "' appears in both subsets");
        }
        out.rows.push_back(b.rows[i]);
        out.bank.push_back(bit->second);
        out.labels.push_back(sit->second);
    }
    out.scenario.n_species = out.species.size();
    return out;
}

}  // namespace zeroclust
