#include "zeroclust/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "zeroclust/error.hpp"
#include "zeroclust/rng.hpp"

namespace zeroclust {

BlobSpec BlobSpec::uniform(std::size_t n_blobs, std::size_t per_blob, std::size_t dim, std::uint64_t seed) {
    BlobSpec s;
    s.dim = dim;
    s.sizes.assign(n_blobs, per_blob);
    s.seed = seed;
    return s;
}

BlobSpec BlobSpec::long_tail(std::size_t n_blobs, std::size_t lo, std::size_t hi, std::size_t dim,
                             std::uint64_t seed) {
    if (lo > hi) throw ParameterError("long_tail: lo > hi");
    BlobSpec s;
    s.dim = dim;
    s.seed = seed;
    Rng rng(derive_seed(seed, "blob-sizes"));
    for (std::size_t b = 0; b < n_blobs; ++b) s.sizes.push_back(static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi))));
    return s;
}

Blobs make_blobs(const BlobSpec& spec) {
    if (spec.sizes.empty() || spec.dim == 0) throw ParameterError("make_blobs: need at least one blob and dim >= 1");
    if (!(spec.sigma >= 0.0) || !(spec.min_separation >= 0.0)) {
        throw ParameterError("make_blobs: sigma and min_separation must be non-negative");
    }
    const std::size_t k = spec.sizes.size(), dim = spec.dim;
    Rng rng(derive_seed(spec.seed, "blob-centers"));
    double half = std::max(1.0, spec.min_separation) *
                  std::max(1.0, std::pow(static_cast<double>(k), 1.0 / static_cast<double>(dim)));
    Matrix centers(k, dim);
    for (bool done = false; !done; half *= 1.5) {
        done = true;
        for (std::size_t c = 0; c < k && done; ++c) {
            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                for (std::size_t d = 0; d < dim; ++d) centers(c, d) = (2.0 * rng.uniform() - 1.0) * half;
                placed = true;
                for (std::size_t o = 0; o < c && placed; ++o) {
                    placed = euclidean_distance(centers.row(c), centers.row(o)) >= spec.min_separation;
                }
            }
            done = placed;
        }
    }
    std::size_t total = 0;
    for (const auto s : spec.sizes) total += s;
    Blobs out;
    out.points = Matrix(total, dim);
    out.labels.reserve(total);
    Rng noise(derive_seed(spec.seed, "blob-points"));
    std::size_t row = 0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < spec.sizes[c]; ++i, ++row) {
            for (std::size_t d = 0; d < dim; ++d) out.points(row, d) = centers(c, d) + spec.sigma * noise.normal();
            out.labels.push_back(static_cast<std::int32_t>(c));
        }
    }
    out.centers = std::move(centers);
    return out;
}

std::pair<EmbeddingBank, Manifest> blobs_as_bank(const Blobs& blobs, const std::string& model_tag,
                                                 TaxonClass taxon) {
    auto bank = bank_from_matrix(blobs.points, model_tag);
    Manifest manifest;
    manifest.reserve(blobs.labels.size());
    char buf[32];
    for (std::size_t i = 0; i < blobs.labels.size(); ++i) {
        ManifestRecord r;
        std::snprintf(buf, sizeof buf, "img_%06zu", i);
        r.image_id = buf;
        std::snprintf(buf, sizeof buf, "blob_%02d", blobs.labels[i]);
        r.species = buf;
        r.taxon_class = taxon;
        r.source_code = "SYN";
        manifest.push_back(std::move(r));
    }
    return {std::move(bank), std::move(manifest)};
}

}  // namespace zeroclust
