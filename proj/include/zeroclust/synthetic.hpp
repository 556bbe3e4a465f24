#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zeroclust/embank.hpp"
#include "zeroclust/matrix.hpp"

namespace zeroclust {

/// Isotropic Gaussian blobs with centers at least `min_separation` apart.
struct BlobSpec {
    std::size_t dim = 64;
    double sigma = 0.5;
    double min_separation = 20.0;
    std::vector<std::size_t> sizes;  ///< points per blob
    std::uint64_t seed = 0;

    static BlobSpec uniform(std::size_t n_blobs, std::size_t per_blob, std::size_t dim = 64, std::uint64_t seed = 0);
    /// Blob sizes drawn uniformly from [lo, hi].
    static BlobSpec long_tail(std::size_t n_blobs, std::size_t lo, std::size_t hi, std::size_t dim = 64,
                              std::uint64_t seed = 0);
};

struct Blobs {
    Matrix points;
    std::vector<std::int32_t> labels;
    Matrix centers;
};

Blobs make_blobs(const BlobSpec& spec);

/// Wraps blobs as a bank whose species are "blob_00", "blob_01", ...
std::pair<EmbeddingBank, Manifest> blobs_as_bank(const Blobs& blobs, const std::string& model_tag = "synthetic",
                                                 TaxonClass taxon = TaxonClass::Aves);

}  // namespace zeroclust
