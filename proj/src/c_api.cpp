#include "mmss.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "mmss/config.hpp"
#include "mmss/dataset.hpp"
#include "mmss/metrics.hpp"
#include "mmss/trainer.hpp"

using mmss::Error;
using mmss::ErrorKind;

struct mmss_config {
    mmss::TrainConfig impl;
};

struct mmss_dataset {
    mmss::Dataset impl;
};

struct mmss_report {
    mmss::EvalReport impl;
};

namespace {

thread_local std::string g_last_error;

mmss_status status_from(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return MMSS_ERR_USAGE;
        case ErrorKind::Data: return MMSS_ERR_DATA;
        case ErrorKind::Io: return MMSS_ERR_IO;
        case ErrorKind::Shape:
        case ErrorKind::Contract: return MMSS_ERR_INTERNAL;
    }
    return MMSS_ERR_INTERNAL;
}

template <class Fn>
mmss_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return MMSS_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_from(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MMSS_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return MMSS_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* mmss_version(void) { return "1.0.0"; }

const char* mmss_last_error(void) { return g_last_error.c_str(); }

void mmss_string_free(char* s) { std::free(s); }

mmss_config* mmss_config_create(void) { return new (std::nothrow) mmss_config(); }

void mmss_config_free(mmss_config* config) { delete config; }

mmss_status mmss_config_load_file(mmss_config* config, const char* path) {
    if (!config || !path) {
        g_last_error = "config_load_file: null argument";
        return MMSS_ERR_USAGE;
    }
    return guarded([&] { config->impl = mmss::TrainConfig::from_json_file(path); });
}

mmss_status mmss_config_set(mmss_config* config, const char* key, const char* value) {
    if (!config || !key || !value) {
        g_last_error = "config_set: null argument";
        return MMSS_ERR_USAGE;
    }
    return guarded([&] { config->impl.set(key, value); });
}

char* mmss_config_to_json(const mmss_config* config) {
    if (!config) {
        g_last_error = "config_to_json: null config";
        return nullptr;
    }
    return dup_string(config->impl.to_json());
}

mmss_status mmss_synth_write(const char* out_dir, uint32_t n_products,
                             uint32_t reviews_per_product, uint32_t d_t, uint32_t d_roi,
                             uint32_t text_rows, uint32_t image_rows, uint64_t seed,
                             double noise) {
    if (!out_dir) {
        g_last_error = "synth_write: null out_dir";
        return MMSS_ERR_USAGE;
    }
    return guarded([&] {
        mmss::SynthSpec spec;
        spec.n_products = n_products;
        spec.reviews_per_product = reviews_per_product;
        spec.d_t = d_t;
        spec.d_roi = d_roi;
        spec.text_rows = text_rows;
        spec.image_rows = image_rows;
        spec.seed = seed;
        spec.s_noise = noise;
        const mmss::Dataset ds = mmss::make_synthetic(spec);
        mmss::write_dataset(out_dir, ds);
    });
}

mmss_dataset* mmss_dataset_open(const char* manifest_path) {
    if (!manifest_path) {
        g_last_error = "dataset_open: null path";
        return nullptr;
    }
    mmss_dataset* ds = new (std::nothrow) mmss_dataset();
    if (!ds) return nullptr;
    const mmss_status st = guarded([&] { ds->impl = mmss::load_manifest(manifest_path); });
    if (st != MMSS_OK) {
        delete ds;
        return nullptr;
    }
    return ds;
}

void mmss_dataset_free(mmss_dataset* dataset) { delete dataset; }

size_t mmss_dataset_product_count(const mmss_dataset* dataset) {
    return dataset ? dataset->impl.products.size() : 0;
}

size_t mmss_dataset_review_count(const mmss_dataset* dataset) {
    return dataset ? dataset->impl.review_count() : 0;
}

mmss_report* mmss_train(const mmss_config* config, const mmss_dataset* dataset,
                        const char* out_dir) {
    if (!config || !dataset || !out_dir) {
        g_last_error = "train: null argument";
        return nullptr;
    }
    mmss_report* report = new (std::nothrow) mmss_report();
    if (!report) return nullptr;
    const mmss_status st = guarded([&] {
        mmss::TrainConfig effective = config->impl;
        effective.dims.d_t = dataset->impl.d_t;
        effective.dims.d_v = dataset->impl.d_t;
        const mmss::RunResult result = mmss::run_training(effective, dataset->impl, out_dir);
        report->impl = result.mean_test_report;
    });
    if (st != MMSS_OK) {
        delete report;
        return nullptr;
    }
    return report;
}

mmss_report* mmss_evaluate(const char* checkpoint_path, const mmss_dataset* dataset,
                           const char* split) {
    if (!checkpoint_path || !dataset) {
        g_last_error = "evaluate: null argument";
        return nullptr;
    }
    const std::string which = split ? split : "all";
    if (which != "all" && which != "train" && which != "dev" && which != "test") {
        g_last_error = "evaluate: split must be one of all, train, dev, test";
        return nullptr;
    }
    mmss_report* report = new (std::nothrow) mmss_report();
    if (!report) return nullptr;
    const mmss_status st = guarded([&] {
        mmss::Trainer trainer = mmss::Trainer::load_checkpoint(checkpoint_path, dataset->impl);
        trainer.use_best_params();
        if (which == "train") report->impl = trainer.evaluate_train();
        else if (which == "dev") report->impl = trainer.evaluate_dev();
        else if (which == "test") report->impl = trainer.evaluate_test();
        else report->impl = trainer.evaluate_all();
    });
    if (st != MMSS_OK) {
        delete report;
        return nullptr;
    }
    return report;
}

double mmss_report_map(const mmss_report* report) {
    return report ? report->impl.map_score : std::nan("");
}

double mmss_report_ndcg(const mmss_report* report, uint32_t n) {
    if (!report) return std::nan("");
    const auto it = report->impl.ndcg.find(n);
    if (it == report->impl.ndcg.end()) return std::nan("");
    return it->second;
}

char* mmss_report_to_json(const mmss_report* report) {
    if (!report) {
        g_last_error = "report_to_json: null report";
        return nullptr;
    }
    return dup_string(mmss::report_json(report->impl));
}

char* mmss_report_table(const mmss_report* report) {
    if (!report) {
        g_last_error = "report_table: null report";
        return nullptr;
    }
    return dup_string(mmss::report_table(report->impl));
}

void mmss_report_free(mmss_report* report) { delete report; }

char* mmss_checkpoint_labels_csv(const char* checkpoint_path) {
    if (!checkpoint_path) {
        g_last_error = "checkpoint_labels_csv: null path";
        return nullptr;
    }
    std::string csv;
    const mmss_status st = guarded([&] {
        const auto history = mmss::read_checkpoint_labels(checkpoint_path);
        csv = "epoch,review_id,subtask,value\n";
        char line[160];
        for (const auto& row : history) {
            std::snprintf(line, sizeof(line), "%d,%s,%s,%.17g\n", row.epoch,
                          row.review_id.c_str(), mmss::to_string(row.subtask), row.value);
            csv += line;
        }
    });
    if (st != MMSS_OK) return nullptr;
    return dup_string(csv);
}

}  // extern "C"
