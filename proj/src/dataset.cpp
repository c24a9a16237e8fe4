#include "mmss/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mmss/rng.hpp"

namespace mmss {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'S', 'S'};
constexpr std::uint8_t kFeatureVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float read_f32_le(const unsigned char* p) {
    const std::uint32_t bits = read_u32_le(p);
    float f;
    static_assert(sizeof(f) == 4);
    std::memcpy(&f, &bits, 4);
    return f;
}

void push_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

}  // namespace

Tensor read_feature_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open feature file " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();

    if (n < 7) throw_data("feature file " + path + " truncated (header incomplete)");
    if (std::memcmp(p, kMagic, 4) != 0) throw_data("feature file " + path + " has bad magic bytes");
    if (p[4] != kFeatureVersion)
        throw_data("feature file " + path + " has unsupported version " + std::to_string(p[4]));
    if (p[5] != kDtypeF32)
        throw_data("feature file " + path + " has unsupported dtype " + std::to_string(p[5]));
    const std::size_t ndim = p[6];
    if (ndim == 0) throw_data("feature file " + path + " declares zero dimensions");
    if (n < 7 + 4 * ndim) throw_data("feature file " + path + " truncated (dims incomplete)");

    std::vector<std::size_t> dims(ndim);
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        dims[i] = read_u32_le(p + 7 + 4 * i);
        if (dims[i] == 0) throw_data("feature file " + path + " has a zero dimension");
        count *= dims[i];
    }
    const std::size_t payload_at = 7 + 4 * ndim;
    if (n < payload_at + 4 * count) throw_data("feature file " + path + " truncated (payload incomplete)");
    if (n > payload_at + 4 * count)
        throw_data("feature file " + path + " has " + std::to_string(n - payload_at - 4 * count) +
                   " trailing bytes");

    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i)
        data[i] = static_cast<double>(read_f32_le(p + payload_at + 4 * i));
    return Tensor(std::move(dims), std::move(data));
}

void write_feature_file(const std::string& path, const Tensor& t) {
    if (t.rank() == 0 || t.rank() > 255) throw_contract("write_feature_file: unsupported rank");
    std::string out;
    out.reserve(7 + 4 * t.rank() + 4 * t.size());
    out.append(kMagic, 4);
    out.push_back(static_cast<char>(kFeatureVersion));
    out.push_back(static_cast<char>(kDtypeF32));
    out.push_back(static_cast<char>(t.rank()));
    for (std::size_t d : t.dims()) {
        if (d > 0xFFFFFFFFull) throw_contract("write_feature_file: dimension exceeds u32");
        push_u32_le(out, static_cast<std::uint32_t>(d));
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
        const float f = static_cast<float>(t[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        push_u32_le(out, bits);
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw_io("cannot write feature file " + path);
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw_io("failed writing feature file " + path);
}

namespace {

Tensor load_matrix(const std::filesystem::path& base, const std::string& rel, std::size_t want_cols,
                   const std::string& owner) {
    const std::string path = (base / rel).string();
    Tensor t = read_feature_file(path);
    if (t.rank() != 2)
        throw_data(owner + ": feature file " + rel + " is rank " + std::to_string(t.rank()) +
                   ", expected a matrix");
    if (t.cols() != want_cols)
        throw_data(owner + ": feature file " + rel + " has " + std::to_string(t.cols()) +
                   " columns, manifest declares " + std::to_string(want_cols));
    if (!t.all_finite()) throw_data(owner + ": feature file " + rel + " contains non-finite values");
    return t;
}

}  // namespace

Dataset load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw_data("manifest " + path + " is not valid JSON: " + e.what());
    }

    Dataset ds;
    try {
        if (j.at("version").get<int>() != 1)
            throw_data("manifest " + path + " has unsupported version");
        ds.d_t = j.at("d_t").get<std::size_t>();
        ds.d_roi = j.at("d_roi").get<std::size_t>();
        if (ds.d_t == 0 || ds.d_roi == 0) throw_data("manifest " + path + " declares zero feature dims");

        const auto& products = j.at("products");
        if (!products.is_array() || products.empty()) throw_data("manifest has no products");

        const std::filesystem::path base = std::filesystem::path(path).parent_path();
        for (const auto& jp : products) {
            ProductRecord prod;
            prod.product_id = jp.at("product_id").get<std::string>();
            const std::string owner = "product " + prod.product_id;
            prod.text_features = load_matrix(base, jp.at("text_file").get<std::string>(), ds.d_t, owner);
            prod.image_features =
                load_matrix(base, jp.at("image_file").get<std::string>(), ds.d_roi, owner);

            const auto& reviews = jp.at("reviews");
            if (!reviews.is_array() || reviews.empty())
                throw_data(owner + " has no reviews");
            for (const auto& jr : reviews) {
                ReviewRecord rev;
                rev.review_id = jr.at("review_id").get<std::string>();
                rev.label = jr.at("label").get<int>();
                if (rev.label < 0 || rev.label > 4)
                    throw_data("review " + rev.review_id + ": label " + std::to_string(rev.label) +
                               " outside {0..4}");
                const std::string rowner = "review " + rev.review_id;
                rev.text_features =
                    load_matrix(base, jr.at("text_file").get<std::string>(), ds.d_t, rowner);
                rev.image_features =
                    load_matrix(base, jr.at("image_file").get<std::string>(), ds.d_roi, rowner);
                prod.reviews.push_back(std::move(rev));
            }
            ds.products.push_back(std::move(prod));
        }
    } catch (const nlohmann::json::exception& e) {
        throw_data("manifest " + path + " is malformed: " + e.what());
    }
    return ds;
}

std::string write_dataset(const std::string& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw_io("cannot create dataset directory " + dir + ": " + ec.message());

    nlohmann::ordered_json j;
    j["version"] = 1;
    j["d_t"] = ds.d_t;
    j["d_roi"] = ds.d_roi;
    j["products"] = nlohmann::ordered_json::array();
    for (const auto& prod : ds.products) {
        nlohmann::ordered_json jp;
        jp["product_id"] = prod.product_id;
        jp["text_file"] = prod.product_id + "_text.mmt";
        jp["image_file"] = prod.product_id + "_img.mmt";
        write_feature_file((fs::path(dir) / (prod.product_id + "_text.mmt")).string(),
                           prod.text_features);
        write_feature_file((fs::path(dir) / (prod.product_id + "_img.mmt")).string(),
                           prod.image_features);
        jp["reviews"] = nlohmann::ordered_json::array();
        for (const auto& rev : prod.reviews) {
            nlohmann::ordered_json jr;
            jr["review_id"] = rev.review_id;
            jr["text_file"] = rev.review_id + "_text.mmt";
            jr["image_file"] = rev.review_id + "_img.mmt";
            jr["label"] = rev.label;
            write_feature_file((fs::path(dir) / (rev.review_id + "_text.mmt")).string(),
                               rev.text_features);
            write_feature_file((fs::path(dir) / (rev.review_id + "_img.mmt")).string(),
                               rev.image_features);
            jp["reviews"].push_back(std::move(jr));
        }
        j["products"].push_back(std::move(jp));
    }
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    std::ofstream os(manifest_path, std::ios::trunc);
    if (!os) throw_io("cannot write manifest " + manifest_path);
    os << j.dump(2) << "\n";
    return manifest_path;
}

namespace {

Tensor round_to_f32(Tensor t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(static_cast<float>(t[i]));
    return t;
}

// Random orthogonal matrix via Gram-Schmidt on a random normal matrix.
Tensor random_orthogonal(std::size_t d, Rng& rng) {
    Tensor q({d, d});
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = rng.normal();
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (std::size_t r = 0; r < d; ++r) dot += q.at(r, c) * q.at(r, prev);
            for (std::size_t r = 0; r < d; ++r) q.at(r, c) -= dot * q.at(r, prev);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < d; ++r) norm += q.at(r, c) * q.at(r, c);
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // Degenerate column; replace with a basis vector.
            for (std::size_t r = 0; r < d; ++r) q.at(r, c) = r == c ? 1.0 : 0.0;
        } else {
            for (std::size_t r = 0; r < d; ++r) q.at(r, c) /= norm;
        }
    }
    return q;
}

Tensor mix_with_noise(const Tensor& src, const Tensor& q, double noise_std, Rng& rng) {
    const std::size_t rows = src.rows(), d = src.cols();
    Tensor out({rows, d});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double v = 0.0;
            for (std::size_t k = 0; k < d; ++k) v += src.at(i, k) * q.at(k, j);
            out.at(i, j) = v + noise_std * rng.normal();
        }
    return out;
}

std::string zero_pad(std::size_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, v);
    return buf;
}

}  // namespace

Dataset make_synthetic(const SynthSpec& spec) {
    if (spec.n_products < 1 || spec.reviews_per_product < 1 || spec.d_t < 1 || spec.d_roi < 1 ||
        spec.text_rows < 1 || spec.image_rows < 1)
        throw_usage("make_synthetic: all counts must be >= 1");

    Rng rng(Rng::mix(spec.seed, 0x5D47A));
    const Tensor q_text = random_orthogonal(spec.d_t, rng);
    const Tensor q_img = random_orthogonal(spec.d_roi, rng);

    Dataset ds;
    ds.d_t = spec.d_t;
    ds.d_roi = spec.d_roi;
    for (std::size_t pi = 0; pi < spec.n_products; ++pi) {
        ProductRecord prod;
        prod.product_id = "p" + zero_pad(pi, 3);
        Tensor text({spec.text_rows, spec.d_t});
        for (std::size_t i = 0; i < text.size(); ++i) text[i] = rng.normal();
        Tensor img({spec.image_rows, spec.d_roi});
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.normal();
        prod.text_features = round_to_f32(text);
        prod.image_features = round_to_f32(img);

        // Labels stay uniform over {0..4} but the first five reviews carry a
        // shuffled permutation of all grades, so every product is rankable
        // (MAP needs at least one relevant and one irrelevant review).
        std::vector<int> grades = {0, 1, 2, 3, 4};
        rng.shuffle(grades);

        for (std::size_t ri = 0; ri < spec.reviews_per_product; ++ri) {
            ReviewRecord rev;
            rev.review_id = prod.product_id + "_r" + zero_pad(ri, 3);
            const int h = ri < grades.size() ? grades[ri] : static_cast<int>(rng.bounded(5));
            rev.label = h;
            const double noise_std = (4.0 - h) / 4.0 * spec.s_noise;
            rev.text_features = round_to_f32(mix_with_noise(text, q_text, noise_std, rng));
            rev.image_features = round_to_f32(mix_with_noise(img, q_img, noise_std, rng));
            prod.reviews.push_back(std::move(rev));
        }
        ds.products.push_back(std::move(prod));
    }
    return ds;
}

std::vector<Batch> batch_by_product(const Dataset& ds, std::size_t batch_size, std::uint64_t seed) {
    std::vector<std::size_t> all(ds.products.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return batch_by_product(ds, all, batch_size, seed);
}

std::vector<Batch> batch_by_product(const Dataset& ds, const std::vector<std::size_t>& product_subset,
                                    std::size_t batch_size, std::uint64_t seed) {
    if (batch_size < 2) throw_contract("batch_by_product: batch_size must be >= 2");
    Rng rng(Rng::mix(seed, 0xBA7C4));

    std::vector<std::size_t> product_order = product_subset;
    rng.shuffle(product_order);

    std::vector<Batch> batches;
    for (std::size_t pi : product_order) {
        const auto& prod = ds.products[pi];
        std::vector<std::size_t> review_order(prod.reviews.size());
        for (std::size_t i = 0; i < review_order.size(); ++i) review_order[i] = i;
        rng.shuffle(review_order);
        for (std::size_t at = 0; at < review_order.size(); at += batch_size) {
            Batch b;
            b.product_index = pi;
            const std::size_t end = std::min(at + batch_size, review_order.size());
            b.review_indices.assign(review_order.begin() + static_cast<std::ptrdiff_t>(at),
                                    review_order.begin() + static_cast<std::ptrdiff_t>(end));
            batches.push_back(std::move(b));
        }
    }
    return batches;
}

}  // namespace mmss
