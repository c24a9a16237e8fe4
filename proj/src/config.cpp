#include "mmss/config.hpp"

#include <fstream>

#include <json.hpp>

namespace mmss {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw_usage("config: learning_rate must be > 0");
    if (batch_size < 2) throw_usage("config: batch_size must be >= 2");
    if (epochs < 1) throw_usage("config: epochs must be >= 1");
    if (seeds < 1) throw_usage("config: seeds must be >= 1");
    if (margin <= 0.0) throw_usage("config: margin must be > 0");
    if (dims.d_t != dims.d_v) throw_usage("config: d_t must equal d_v");
    if (dims.d_t == 0 || dims.d_f == 0 || dims.d_g == 0) throw_usage("config: dims must be positive");
    if (dims.heads == 0 || dims.d_f % dims.heads != 0 || dims.d_v % dims.heads != 0)
        throw_usage("config: heads must divide d_f and d_v");
    if (ssp.eps <= 0.0) throw_usage("config: ssp.eps must be > 0");
    if (ssp.lambda_reg <= 0.0) throw_usage("config: ssp.lambda_reg must be > 0");
    if (train_frac <= 0.0 || dev_frac < 0.0 || train_frac + dev_frac > 1.0)
        throw_usage("config: split fractions must satisfy 0 < train, 0 <= dev, train + dev <= 1");
    if (metrics.tau < 0 || metrics.tau > 4) throw_usage("config: tau must be in {0..4}");
    if (metrics.ndcg_at.empty()) throw_usage("config: at least one NDCG cutoff required");
    for (std::size_t n : metrics.ndcg_at)
        if (n < 1) throw_usage("config: NDCG cutoffs must be >= 1");
}

std::string TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["dims"] = {{"d_t", dims.d_t}, {"d_v", dims.d_v}, {"d_f", dims.d_f},
                 {"d_g", dims.d_g}, {"d_roi", dims.d_roi}, {"heads", dims.heads}};
    j["learning_rate"] = learning_rate;
    j["batch_size"] = batch_size;
    j["margin"] = margin;
    j["epochs"] = epochs;
    j["seed"] = seed;
    j["seeds"] = seeds;
    j["ssp"] = {{"alpha1", ssp.alpha1},
                {"alpha2", ssp.alpha2},
                {"eps", ssp.eps},
                {"lambda_reg", ssp.lambda_reg},
                {"clamp", ssp.clamp}};
    auto ablate_list = nlohmann::ordered_json::array();
    for (InteractionKind k : ablate) ablate_list.push_back(to_string(k));
    j["ablate"] = std::move(ablate_list);
    j["disable_ssp"] = disable_ssp;
    j["direct_concat"] = direct_concat;
    j["metrics"] = {{"tau", metrics.tau}, {"ndcg", metrics.ndcg_at}};
    j["split"] = {{"train", train_frac}, {"dev", dev_frac}};
    return j.dump(2);
}

namespace {

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig TrainConfig::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw_usage(std::string("config is not valid JSON: ") + e.what());
    }
    TrainConfig c;
    try {
        if (j.contains("dims")) {
            const auto& d = j.at("dims");
            maybe(d, "d_t", c.dims.d_t);
            maybe(d, "d_v", c.dims.d_v);
            maybe(d, "d_f", c.dims.d_f);
            maybe(d, "d_g", c.dims.d_g);
            maybe(d, "d_roi", c.dims.d_roi);
            maybe(d, "heads", c.dims.heads);
        }
        maybe(j, "learning_rate", c.learning_rate);
        maybe(j, "batch_size", c.batch_size);
        maybe(j, "margin", c.margin);
        maybe(j, "epochs", c.epochs);
        maybe(j, "seed", c.seed);
        maybe(j, "seeds", c.seeds);
        if (j.contains("ssp")) {
            const auto& s = j.at("ssp");
            maybe(s, "alpha1", c.ssp.alpha1);
            maybe(s, "alpha2", c.ssp.alpha2);
            maybe(s, "eps", c.ssp.eps);
            maybe(s, "lambda_reg", c.ssp.lambda_reg);
            maybe(s, "clamp", c.ssp.clamp);
        }
        if (j.contains("ablate")) {
            for (const auto& item : j.at("ablate")) {
                const auto k = interaction_from_string(item.get<std::string>());
                if (!k || *k == InteractionKind::Global)
                    throw_usage("config: unknown subtask '" + item.get<std::string>() + "' in ablate");
                c.ablate.insert(*k);
            }
        }
        maybe(j, "disable_ssp", c.disable_ssp);
        maybe(j, "direct_concat", c.direct_concat);
        if (j.contains("metrics")) {
            const auto& m = j.at("metrics");
            maybe(m, "tau", c.metrics.tau);
            maybe(m, "ndcg", c.metrics.ndcg_at);
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            maybe(s, "train", c.train_frac);
            maybe(s, "dev", c.dev_frac);
        }
    } catch (const nlohmann::json::exception& e) {
        throw_usage(std::string("config is malformed: ") + e.what());
    }
    return c;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::uint64_t TrainConfig::hash() const {
    // FNV-1a over the canonical JSON form.
    const std::string s = to_json();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
    auto as_u64 = [&]() -> std::uint64_t {
        try {
            return std::stoull(value);
        } catch (...) {
            throw_usage("config: '" + key + "' expects an integer, got '" + value + "'");
        }
    };
    auto as_f64 = [&]() -> double {
        try {
            return std::stod(value);
        } catch (...) {
            throw_usage("config: '" + key + "' expects a number, got '" + value + "'");
        }
    };
    auto as_bool = [&]() -> bool {
        if (value == "true" || value == "1" || value == "on") return true;
        if (value == "false" || value == "0" || value == "off") return false;
        throw_usage("config: '" + key + "' expects a boolean, got '" + value + "'");
    };

    if (key == "seed") seed = as_u64();
    else if (key == "seeds") seeds = as_u64();
    else if (key == "epochs") epochs = as_u64();
    else if (key == "batch_size") batch_size = as_u64();
    else if (key == "margin") margin = as_f64();
    else if (key == "learning_rate" || key == "lr") learning_rate = as_f64();
    else if (key == "tau") metrics.tau = static_cast<int>(as_u64());
    else if (key == "clamp_labels") ssp.clamp = as_bool();
    else if (key == "disable_ssp") disable_ssp = as_bool();
    else if (key == "direct_concat") direct_concat = as_bool();
    else if (key == "heads") dims.heads = as_u64();
    else if (key == "d_t") { dims.d_t = as_u64(); dims.d_v = dims.d_t; }
    else if (key == "d_f") dims.d_f = as_u64();
    else if (key == "d_g") dims.d_g = as_u64();
    else if (key == "alpha1") ssp.alpha1 = as_f64();
    else if (key == "alpha2") ssp.alpha2 = as_f64();
    else if (key == "train_frac") train_frac = as_f64();
    else if (key == "dev_frac") dev_frac = as_f64();
    else if (key == "ablate") {
        const auto k = interaction_from_string(value);
        if (!k || *k == InteractionKind::Global)
            throw_usage("config: unknown subtask '" + value + "' for ablate");
        ablate.insert(*k);
    } else {
        throw_usage("config: unknown key '" + key + "'");
    }
}

}  // namespace mmss
