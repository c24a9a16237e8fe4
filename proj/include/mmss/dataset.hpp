#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmss/tensor.hpp"

namespace mmss {

struct ReviewRecord {
    std::string review_id;
    Tensor text_features;   // (|T|+1) x d_t
    Tensor image_features;  // m_r x d_roi, raw RoI rows
    int label = 0;          // in {0..4}
};

struct ProductRecord {
    std::string product_id;
    Tensor text_features;   // (|D|+1) x d_t
    Tensor image_features;  // m_p x d_roi
    std::vector<ReviewRecord> reviews;
};

struct Dataset {
    std::size_t d_t = 0;
    std::size_t d_roi = 0;
    std::vector<ProductRecord> products;

    std::size_t review_count() const {
        std::size_t n = 0;
        for (const auto& p : products) n += p.reviews.size();
        return n;
    }
};

// Binary feature tensor file: magic "MMSS", u8 version=1, u8 dtype (0 =
// float32), u8 ndim, ndim x u32 little-endian dims, row-major little-endian
// float32 payload. Trailing bytes are an error. Values widen to f64 on load.
Tensor read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const Tensor& t);

// Manifest is a JSON file; feature paths are relative to its directory.
Dataset load_manifest(const std::string& path);

// Writes feature files plus "manifest.json" into dir; returns manifest path.
std::string write_dataset(const std::string& dir, const Dataset& ds);

struct SynthSpec {
    std::size_t n_products = 8;
    std::size_t reviews_per_product = 10;
    std::size_t d_t = 16;
    std::size_t d_roi = 16;
    std::uint64_t seed = 7;
    double s_noise = 0.5;
    std::size_t text_rows = 4;   // rows of each text feature matrix
    std::size_t image_rows = 4;  // rows of each RoI feature matrix
};

// Deterministic generator with a planted helpfulness signal: each review is
// an orthogonally mixed copy of its product's features plus noise whose
// standard deviation shrinks as the label grows, so higher-labeled reviews
// align more with the product. All features are rounded to float32 so a
// write/load round-trip is the identity.
Dataset make_synthetic(const SynthSpec& spec);

struct Batch {
    std::size_t product_index = 0;
    std::vector<std::size_t> review_indices;
};

// Single-product batches of at most batch_size reviews; product and
// within-product review order are shuffled deterministically from the seed.
std::vector<Batch> batch_by_product(const Dataset& ds, std::size_t batch_size, std::uint64_t seed);

// Same, restricted to a subset of product indices.
std::vector<Batch> batch_by_product(const Dataset& ds, const std::vector<std::size_t>& product_subset,
                                    std::size_t batch_size, std::uint64_t seed);

}  // namespace mmss
