#include "zeroclust/embank.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "zeroclust/error.hpp"

namespace zeroclust {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[4] = {'Z', 'S', 'E', 'B'};

template <typename T>
void put_le(std::string& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>(u & 0xFF));
        u = static_cast<U>(u >> 8);
    }
}

template <typename T>
T get_le(const unsigned char* p) {
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) {
        u = static_cast<decltype(u)>((u << 8) | p[i]);
    }
    return static_cast<T>(u);
}

std::uint32_t float_bits(float f) {
    return std::bit_cast<std::uint32_t>(f);
}

bool all_finite(std::span<const float> values) {
    for (const float v : values) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

}  // namespace

std::string to_string(TaxonClass c) {
    switch (c) {
        case TaxonClass::Aves: return "Aves";
        case TaxonClass::Mammalia: return "Mammalia";
        case TaxonClass::Other: return "Other";
    }
    return "Other";
}

TaxonClass parse_taxon_class(const std::string& s) {
    if (s == "Aves") return TaxonClass::Aves;
    if (s == "Mammalia") return TaxonClass::Mammalia;
    if (s == "Other") return TaxonClass::Other;
    throw FormatError("unknown taxon_class '" + s + "'");
}

Matrix EmbeddingBank::to_matrix() const {
    Matrix m(n_rows, dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        m.data()[i] = static_cast<double>(data[i]);
    }
    return m;
}

Matrix EmbeddingBank::to_matrix(std::span<const std::size_t> rows) const {
    Matrix m(rows.size(), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= n_rows) {
            throw ValidationError("row index " + std::to_string(rows[r]) + " out of range for bank with " +
                                  std::to_string(n_rows) + " rows");
        }
        const auto src = row(rows[r]);
        auto dst = m.row(r);
        for (std::size_t d = 0; d < dim; ++d) {
            dst[d] = static_cast<double>(src[d]);
        }
    }
    return m;
}

EmbeddingBank bank_from_matrix(const Matrix& m, std::string model_tag) {
    EmbeddingBank b;
    b.n_rows = m.rows();
    b.dim = m.cols();
    b.model_tag = std::move(model_tag);
    b.data.resize(m.rows() * m.cols());
    for (std::size_t i = 0; i < b.data.size(); ++i) {
        b.data[i] = static_cast<float>(m.data()[i]);
    }
    return b;
}

void write_zseb(const EmbeddingBank& bank, const fs::path& file) {
    if (bank.n_rows == 0 || bank.dim == 0) {
        throw FormatError("bank must have at least one row and one column");
    }
    if (bank.data.size() != bank.n_rows * bank.dim) {
        throw FormatError("bank data length " + std::to_string(bank.data.size()) + " != n_rows x dim (" +
                          std::to_string(bank.n_rows) + " x " + std::to_string(bank.dim) + ")");
    }
    if (bank.dim > std::numeric_limits<std::uint32_t>::max()) {
        throw FormatError("dim does not fit the u32 header field");
    }
    if (!all_finite(bank.data)) {
        throw ValidationError("bank contains non-finite values");
    }
    std::string buf;
    buf.reserve(kZsebHeaderSize + bank.data.size() * 4);
    buf.append(kMagic, 4);
    put_le<std::uint16_t>(buf, kZsebVersion);
    put_le<std::uint8_t>(buf, 0);  // dtype f32
    put_le<std::uint8_t>(buf, 0);  // reserved
    put_le<std::uint64_t>(buf, bank.n_rows);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(bank.dim));
    for (const float v : bank.data) {
        put_le<std::uint32_t>(buf, float_bits(v));
    }
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open " + file.string() + " for writing");
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw FormatError("write failed: " + file.string());
    }
}

EmbeddingBank read_zseb(const fs::path& file) {
    std::error_code ec;
    const auto file_size = fs::file_size(file, ec);
    if (ec) {
        throw FormatError("cannot stat " + file.string() + ": " + ec.message());
    }
    if (file_size < kZsebHeaderSize) {
        throw FormatError(file.string() + ": truncated header");
    }
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + file.string());
    }
    unsigned char header[kZsebHeaderSize];
    in.read(reinterpret_cast<char*>(header), kZsebHeaderSize);
    if (std::memcmp(header, kMagic, 4) != 0) {
        throw FormatError(file.string() + ": bad magic");
    }
    const auto version = get_le<std::uint16_t>(header + 4);
    if (version != kZsebVersion) {
        throw FormatError(file.string() + ": unsupported version " + std::to_string(version));
    }
    if (header[6] != 0) {
        throw FormatError(file.string() + ": unsupported dtype " + std::to_string(header[6]));
    }
    const auto n_rows = get_le<std::uint64_t>(header + 8);
    const auto dim = get_le<std::uint32_t>(header + 16);
    if (n_rows == 0 || dim == 0) {
        throw FormatError(file.string() + ": empty matrix");
    }
    // Validate declared sizes against the real file size before allocating.
    const std::uint64_t payload = file_size - kZsebHeaderSize;
    if (n_rows > payload / 4 / dim || n_rows * dim * 4 != payload) {
        throw FormatError(file.string() + ": payload size " + std::to_string(payload) +
                          " does not match header (" + std::to_string(n_rows) + " x " + std::to_string(dim) + ")");
    }
    EmbeddingBank bank;
    bank.n_rows = static_cast<std::size_t>(n_rows);
    bank.dim = dim;
    bank.data.resize(bank.n_rows * bank.dim);
    std::vector<unsigned char> raw(static_cast<std::size_t>(payload));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != payload) {
        throw FormatError(file.string() + ": truncated payload");
    }
    for (std::size_t i = 0; i < bank.data.size(); ++i) {
        bank.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(raw.data() + 4 * i));
    }
    if (!all_finite(bank.data)) {
        throw ValidationError(file.string() + ": non-finite value in matrix");
    }
    return bank;
}

void write_manifest(const Manifest& manifest, const fs::path& file) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open " + file.string() + " for writing");
    }
    for (const auto& r : manifest) {
        json j;
        j["image_id"] = r.image_id;
        j["species"] = r.species;
        j["taxon_class"] = to_string(r.taxon_class);
        j["source_code"] = r.source_code;
        j["location_id"] = r.location_id ? json(*r.location_id) : json(nullptr);
        j["validated"] = r.validated;
        out << j.dump() << '\n';
    }
}

Manifest read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw FormatError("cannot open " + file.string());
    }
    Manifest out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            ManifestRecord r;
            r.image_id = j.at("image_id").get<std::string>();
            r.species = j.at("species").get<std::string>();
            r.taxon_class = parse_taxon_class(j.at("taxon_class").get<std::string>());
            r.source_code = j.value("source_code", std::string{});
            if (j.contains("location_id") && !j["location_id"].is_null()) {
                r.location_id = j["location_id"].get<std::string>();
            }
            r.validated = j.value("validated", true);
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw FormatError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_bank(const EmbeddingBank& bank, const Manifest& manifest, const fs::path& dir) {
    if (manifest.size() != bank.n_rows) {
        throw FormatError("manifest has " + std::to_string(manifest.size()) + " records but bank has " +
                          std::to_string(bank.n_rows) + " rows");
    }
    std::set<std::string> ids;
    for (const auto& r : manifest) {
        if (r.species.empty()) {
            throw ValidationError("manifest record '" + r.image_id + "' has an empty species");
        }
        if (!ids.insert(r.image_id).second) {
            throw ValidationError("duplicate image_id '" + r.image_id + "'");
        }
    }
    fs::create_directories(dir);
    write_zseb(bank, dir / kEmbeddingsFile);
    write_manifest(manifest, dir / kManifestFile);
    if (!bank.model_tag.empty()) {
        std::ofstream side(dir / kBankSidecarFile, std::ios::trunc);
        side << json{{"model_tag", bank.model_tag}}.dump(2) << '\n';
    }
}

std::pair<EmbeddingBank, Manifest> read_bank(const fs::path& dir) {
    auto bank = read_zseb(dir / kEmbeddingsFile);
    auto manifest = read_manifest(dir / kManifestFile);
    if (manifest.size() != bank.n_rows) {
        throw ValidationError(dir.string() + ": manifest has " + std::to_string(manifest.size()) +
                              " records but matrix has " + std::to_string(bank.n_rows) + " rows");
    }
    const auto sidecar = dir / kBankSidecarFile;
    if (fs::exists(sidecar)) {
        std::ifstream in(sidecar);
        try {
            bank.model_tag = json::parse(in).value("model_tag", std::string{});
        } catch (const json::exception& e) {
            throw FormatError(sidecar.string() + ": " + e.what());
        }
    }
    if (bank.model_tag.empty()) {
        bank.model_tag = fs::absolute(dir).lexically_normal().filename().string();
        if (bank.model_tag.empty()) {
            bank.model_tag = fs::absolute(dir).lexically_normal().parent_path().filename().string();
        }
    }
    return {std::move(bank), std::move(manifest)};
}

ValidationSummary validate_bank(const EmbeddingBank& bank, const Manifest& manifest) {
    ValidationSummary s;
    s.n_rows = bank.n_rows;
    s.dim = bank.dim;
    s.manifest_rows = manifest.size();
    s.row_count_mismatch = bank.n_rows != manifest.size() || bank.data.size() != bank.n_rows * bank.dim;

    std::map<std::string, std::size_t> id_counts;
    std::map<std::string, std::size_t> species_counts;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& r = manifest[i];
        if (++id_counts[r.image_id] == 2) {
            s.duplicate_ids.push_back(r.image_id);
        }
        if (r.species.empty()) {
            s.empty_species_rows.push_back(i);
            continue;
        }
        if (!r.validated) {
            ++s.n_unvalidated;
        }
        ++s.species_by_class[to_string(r.taxon_class)][r.species];
        ++species_counts[r.species];
    }
    s.n_species = species_counts.size();
    if (!species_counts.empty()) {
        s.min_per_species = species_counts.begin()->second;
        for (const auto& [name, n] : species_counts) {
            s.min_per_species = std::min(s.min_per_species, n);
            s.max_per_species = std::max(s.max_per_species, n);
        }
    }
    const std::size_t rows = std::min(bank.n_rows, bank.dim == 0 ? 0 : bank.data.size() / bank.dim);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!all_finite(bank.row(i))) {
            s.nonfinite_rows.push_back(i);
        }
    }
    return s;
}

}  // namespace zeroclust
