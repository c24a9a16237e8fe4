#include <bit>
#include <cstring>
#include <fstream>

#include "mmss/trainer.hpp"

namespace mmss {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'C', 'K'};
constexpr std::uint8_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        if (s.size() > 0xFFFFFFFFull) throw_contract("checkpoint: string too long");
        u32(static_cast<std::uint32_t>(s.size()));
        out_.append(s);
    }
    void tensor(const Tensor& t) {
        u8(static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.dims()) u32(static_cast<std::uint32_t>(d));
        for (std::size_t i = 0; i < t.size(); ++i) f64(t[i]);
    }
    void payload(const Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) f64(t[i]);
    }
    void doubles(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    const std::string& bytes() const { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[at_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[at_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[at_++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = bytes_.substr(at_, n);
        at_ += n;
        return s;
    }
    Tensor tensor() {
        const std::uint8_t ndim = u8();
        std::vector<std::size_t> dims(ndim);
        std::size_t count = 1;
        for (auto& d : dims) {
            d = u32();
            count *= d;
        }
        std::vector<double> data(count);
        for (auto& x : data) x = f64();
        return Tensor(std::move(dims), std::move(data));
    }
    Tensor payload_like(const Tensor& shape) {
        Tensor t = Tensor::zeros_like(shape);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = f64();
        return t;
    }
    std::vector<double> doubles() {
        const std::uint64_t n = u64();
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    void expect_end() const {
        if (at_ != bytes_.size()) throw_data("checkpoint " + path_ + " has trailing bytes");
    }

private:
    void need(std::size_t n) {
        if (at_ + n > bytes_.size()) throw_data("checkpoint " + path_ + " truncated");
    }
    std::string bytes_;
    std::string path_;
    std::size_t at_ = 0;
};

}  // namespace

struct CheckpointCodec {
    static void save(const Trainer& tr, const std::string& path) {
        Writer w;
        w.u64(tr.config_.hash());
        w.str(tr.config_.to_json());
        w.u32(static_cast<std::uint32_t>(tr.epochs_done_));

        const std::vector<Value> params = tr.parameters();
        w.u32(static_cast<std::uint32_t>(params.size()));
        for (const Value& p : params) {
            w.str(p.name());
            w.tensor(p.tensor());
        }
        w.u64(tr.adam_->steps());
        for (const Tensor& t : tr.adam_->m()) w.payload(t);
        for (const Tensor& t : tr.adam_->v()) w.payload(t);

        // Pseudo-label store.
        w.u32(static_cast<std::uint32_t>(tr.store_.epoch()));
        const auto& values = tr.store_.values();
        w.u64(values.size());
        for (const auto& [key, value] : values) {
            w.str(key.first);
            w.u8(static_cast<std::uint8_t>(key.second));
            w.f64(value);
        }
        const auto& history = tr.store_.history();
        w.u64(history.size());
        for (const auto& row : history) {
            w.u32(static_cast<std::uint32_t>(row.epoch));
            w.str(row.review_id);
            w.u8(static_cast<std::uint8_t>(row.subtask));
            w.f64(row.value);
        }

        // Finalized anchors (accumulators are empty at epoch boundaries).
        for (int t = 0; t < 6; ++t) {
            const auto kind = static_cast<InteractionKind>(t);
            if (tr.anchors_.finalized(kind)) {
                const AnchorEntry& e = tr.anchors_.entry(kind);
                w.u8(1);
                w.doubles(e.anchor);
                w.doubles(e.diag_var);
                w.f64(e.scale);
            } else {
                w.u8(0);
            }
        }

        // Best-dev snapshot.
        if (tr.best_params_.empty()) {
            w.u8(0);
        } else {
            w.u8(1);
            w.f64(tr.best_dev_map_);
            w.u32(static_cast<std::uint32_t>(tr.best_epoch_));
            for (const Tensor& t : tr.best_params_) w.payload(t);
        }

        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw_io("cannot write checkpoint " + path);
        os.write(kMagic, 4);
        os.put(static_cast<char>(kVersion));
        os.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!os) throw_io("failed writing checkpoint " + path);
    }

    static Trainer load(const std::string& path, const Dataset& data) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw_io("cannot open checkpoint " + path);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0)
            throw_data("checkpoint " + path + " has bad magic bytes");
        if (static_cast<std::uint8_t>(bytes[4]) != kVersion)
            throw_data("checkpoint " + path + " has unsupported version");
        Reader r(bytes.substr(5), path);

        const std::uint64_t saved_hash = r.u64();
        const std::string config_json = r.str();
        TrainConfig config = TrainConfig::from_json_text(config_json);
        if (config.hash() != saved_hash) throw_data("checkpoint " + path + " config hash mismatch");

        Trainer tr(config, data);
        tr.epochs_done_ = r.u32();

        const std::vector<Value> params = tr.parameters();
        const std::uint32_t n_params = r.u32();
        if (n_params != params.size())
            throw_data("checkpoint " + path + " has " + std::to_string(n_params) +
                       " parameters, model expects " + std::to_string(params.size()));
        for (const Value& p : params) {
            const std::string name = r.str();
            Tensor t = r.tensor();
            if (name != p.name())
                throw_data("checkpoint " + path + ": parameter '" + name + "' where '" + p.name() +
                           "' was expected");
            if (!t.same_dims(p.tensor()))
                throw_data("checkpoint " + path + ": parameter '" + name + "' has dims " +
                           t.dims_string() + ", model expects " + p.tensor().dims_string());
            p.mutable_tensor() = std::move(t);
        }
        const std::uint64_t adam_t = r.u64();
        std::vector<Tensor> m, v;
        m.reserve(params.size());
        v.reserve(params.size());
        for (const Value& p : params) m.push_back(r.payload_like(p.tensor()));
        for (const Value& p : params) v.push_back(r.payload_like(p.tensor()));
        tr.adam_->restore(adam_t, std::move(m), std::move(v));

        const int store_epoch = static_cast<int>(r.u32());
        std::map<std::pair<std::string, int>, double> values;
        const std::uint64_t n_values = r.u64();
        for (std::uint64_t i = 0; i < n_values; ++i) {
            std::string id = r.str();
            const int kind = r.u8();
            const double value = r.f64();
            values[{std::move(id), kind}] = value;
        }
        std::vector<PseudoLabelStore::HistoryRow> history;
        const std::uint64_t n_history = r.u64();
        history.reserve(n_history);
        for (std::uint64_t i = 0; i < n_history; ++i) {
            PseudoLabelStore::HistoryRow row;
            row.epoch = static_cast<int>(r.u32());
            row.review_id = r.str();
            row.subtask = static_cast<InteractionKind>(r.u8());
            row.value = r.f64();
            history.push_back(std::move(row));
        }
        tr.store_.restore(store_epoch, std::move(values), std::move(history));

        for (int t = 0; t < 6; ++t) {
            if (r.u8()) {
                AnchorEntry e;
                e.anchor = r.doubles();
                e.diag_var = r.doubles();
                e.scale = r.f64();
                tr.anchors_.set_entry(static_cast<InteractionKind>(t), std::move(e));
            }
        }

        if (r.u8()) {
            tr.best_dev_map_ = r.f64();
            tr.best_epoch_ = r.u32();
            tr.best_params_.clear();
            for (const Value& p : params) tr.best_params_.push_back(r.payload_like(p.tensor()));
        }
        r.expect_end();
        return tr;
    }
};

void Trainer::save_checkpoint(const std::string& path) const { CheckpointCodec::save(*this, path); }

Trainer Trainer::load_checkpoint(const std::string& path, const Dataset& data) {
    return CheckpointCodec::load(path, data);
}

std::vector<PseudoLabelStore::HistoryRow> read_checkpoint_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open checkpoint " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw_data("checkpoint " + path + " has bad magic bytes");
    if (static_cast<std::uint8_t>(bytes[4]) != kVersion)
        throw_data("checkpoint " + path + " has unsupported version");
    Reader r(bytes.substr(5), path);

    r.u64();  // config hash
    r.str();  // config json
    r.u32();  // epochs done

    const std::uint32_t n_params = r.u32();
    std::vector<std::size_t> param_sizes;
    param_sizes.reserve(n_params);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        r.str();
        param_sizes.push_back(r.tensor().size());
    }
    r.u64();  // adam t
    for (int half = 0; half < 2; ++half)
        for (std::size_t sz : param_sizes)
            for (std::size_t k = 0; k < sz; ++k) r.f64();

    r.u32();  // store epoch
    const std::uint64_t n_values = r.u64();
    for (std::uint64_t i = 0; i < n_values; ++i) {
        r.str();
        r.u8();
        r.f64();
    }
    std::vector<PseudoLabelStore::HistoryRow> history;
    const std::uint64_t n_history = r.u64();
    history.reserve(n_history);
    for (std::uint64_t i = 0; i < n_history; ++i) {
        PseudoLabelStore::HistoryRow row;
        row.epoch = static_cast<int>(r.u32());
        row.review_id = r.str();
        row.subtask = static_cast<InteractionKind>(r.u8());
        row.value = r.f64();
        history.push_back(std::move(row));
    }
    return history;
}

}  // namespace mmss
