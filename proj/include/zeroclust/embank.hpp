#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zeroclust/matrix.hpp"

namespace zeroclust {

enum class TaxonClass { Aves, Mammalia, Other };

std::string to_string(TaxonClass c);
TaxonClass parse_taxon_class(const std::string& s);

/// One manifest row, aligned with the matrix row of the same position.
struct ManifestRecord {
    std::string image_id;
    std::string species;
    TaxonClass taxon_class = TaxonClass::Other;
    std::string source_code;
    std::optional<std::string> location_id;
    bool validated = true;

    bool operator==(const ManifestRecord&) const = default;
};

using Manifest = std::vector<ManifestRecord>;

/// N x D matrix of f32 image embeddings, row-major.
struct EmbeddingBank {
    std::size_t n_rows = 0;
    std::size_t dim = 0;
    std::vector<float> data;
    std::string model_tag;

    std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }

    /// Widen to double. With `rows`, only those rows in that order.
    Matrix to_matrix() const;
    Matrix to_matrix(std::span<const std::size_t> rows) const;

    bool operator==(const EmbeddingBank&) const = default;
};

/// Narrow a double matrix to a bank. Values must be representable as f32.
EmbeddingBank bank_from_matrix(const Matrix& m, std::string model_tag = {});

inline constexpr char kEmbeddingsFile[] = "embeddings.zseb";
inline constexpr char kManifestFile[] = "manifest.jsonl";
inline constexpr char kBankSidecarFile[] = "bank.json";
inline constexpr std::size_t kZsebHeaderSize = 20;
inline constexpr std::uint16_t kZsebVersion = 1;

/// Writes `embeddings.zseb` and `manifest.jsonl` into `dir` (created if needed).
/// Throws FormatError on shape mismatch, ValidationError on non-finite values.
void write_bank(const EmbeddingBank& bank, const Manifest& manifest, const std::filesystem::path& dir);

/// Reads a bank directory. Throws FormatError for bad headers or truncation and
/// ValidationError for manifest/matrix length mismatch or non-finite values.
std::pair<EmbeddingBank, Manifest> read_bank(const std::filesystem::path& dir);

/// Lower-level pieces, also used for reduced spaces.
void write_zseb(const EmbeddingBank& bank, const std::filesystem::path& file);
EmbeddingBank read_zseb(const std::filesystem::path& file);
void write_manifest(const Manifest& manifest, const std::filesystem::path& file);
Manifest read_manifest(const std::filesystem::path& file);

struct ValidationSummary {
    std::size_t n_rows = 0;
    std::size_t dim = 0;
    std::size_t manifest_rows = 0;
    bool row_count_mismatch = false;
    std::size_t n_species = 0;
    std::size_t min_per_species = 0;
    std::size_t max_per_species = 0;
    std::size_t n_unvalidated = 0;
    /// taxon class -> species -> row count
    std::map<std::string, std::map<std::string, std::size_t>> species_by_class;
    std::vector<std::string> duplicate_ids;
    std::vector<std::size_t> nonfinite_rows;
    std::vector<std::size_t> empty_species_rows;

    bool ok() const {
        return !row_count_mismatch && duplicate_ids.empty() && nonfinite_rows.empty() &&
               empty_species_rows.empty();
    }
};

/// Reports on a bank without throwing.
ValidationSummary validate_bank(const EmbeddingBank& bank, const Manifest& manifest);

}  // namespace zeroclust
