// Command-line front end. Talks to the engine exclusively through the C API
// in mmss.h. Exit codes: 0 success, 1 usage error, 2 data/engine error.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmss.h"

namespace {

int fail(const char* what, mmss_status st) {
    std::fprintf(stderr, "error: %s: %s\n", what, mmss_last_error());
    return st == MMSS_ERR_USAGE ? 1 : 2;
}

int fail_null(const char* what) {
    std::fprintf(stderr, "error: %s: %s\n", what, mmss_last_error());
    return 2;
}

struct ConfigGuard {
    mmss_config* ptr = mmss_config_create();
    ~ConfigGuard() { mmss_config_free(ptr); }
};

struct DatasetGuard {
    mmss_dataset* ptr = nullptr;
    ~DatasetGuard() { mmss_dataset_free(ptr); }
};

struct ReportGuard {
    mmss_report* ptr = nullptr;
    ~ReportGuard() { mmss_report_free(ptr); }
};

int print_report(const mmss_report* report) {
    char* table = mmss_report_table(report);
    if (!table) return fail_null("report");
    std::fputs(table, stdout);
    mmss_string_free(table);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mmss — multimodal review helpfulness ranking engine"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with a planted signal");
    std::string synth_out;
    std::uint32_t n_products = 8, reviews = 10, d_t = 16, d_roi = 16, text_rows = 4, image_rows = 4;
    std::uint64_t synth_seed = 7;
    double noise = 0.5;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--products", n_products, "Number of products");
    synth->add_option("--reviews", reviews, "Reviews per product");
    synth->add_option("--dt", d_t, "Text feature dimension");
    synth->add_option("--droi", d_roi, "RoI feature dimension");
    synth->add_option("--text-rows", text_rows, "Rows per text feature matrix");
    synth->add_option("--image-rows", image_rows, "Rows per RoI feature matrix");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--noise", noise, "Noise scale s_noise");

    // --- train ---
    auto* train = app.add_subcommand("train", "Train on a manifest and report test metrics");
    std::string train_manifest, config_path, out_dir = "out";
    bool show_config = false;
    std::uint64_t seed = 0;
    std::uint64_t seeds = 0, epochs = 0, batch_size = 0;
    double margin = 0.0, lr = 0.0;
    std::vector<std::string> ablate;
    bool disable_ssp = false, direct_concat = false, clamp_labels = false;
    int tau = -1;
    train->add_option("manifest", train_manifest, "Path to manifest.json");
    train->add_option("--config", config_path, "JSON config file");
    auto* seed_opt = train->add_option("--seed", seed, "Base seed");
    auto* seeds_opt = train->add_option("--seeds", seeds, "Number of seeds to average");
    auto* epochs_opt = train->add_option("--epochs", epochs, "Training epochs");
    auto* batch_opt = train->add_option("--batch-size", batch_size, "Batch size (>= 2)");
    auto* margin_opt = train->add_option("--margin", margin, "Ranking loss margin");
    auto* lr_opt = train->add_option("--lr", lr, "Learning rate");
    train->add_option("--ablate", ablate, "Disable subtasks (ptrt, pvrv, ptrv, pvrt, rtrv)");
    train->add_flag("--disable-ssp", disable_ssp, "Drop all five subtasks (ranking loss only)");
    train->add_flag("--direct-concat", direct_concat, "Mean-pool + concatenate + MLP baseline");
    auto* tau_opt = train->add_option("--tau", tau, "MAP relevance threshold");
    train->add_flag("--clamp-labels", clamp_labels, "Clamp pseudo-labels to [0, 4]");
    train->add_option("--out", out_dir, "Output directory");
    train->add_flag("--show-config", show_config, "Print the effective config and exit");

    // --- eval ---
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against a manifest");
    std::string eval_checkpoint, eval_manifest, eval_split = "all";
    eval->add_option("checkpoint", eval_checkpoint, "Checkpoint file")->required();
    eval->add_option("manifest", eval_manifest, "Path to manifest.json")->required();
    eval->add_option("--split", eval_split, "all, train, dev, or test");

    // --- inspect-labels ---
    auto* inspect = app.add_subcommand("inspect-labels", "Dump pseudo-label history as CSV");
    std::string inspect_checkpoint;
    inspect->add_option("checkpoint", inspect_checkpoint, "Checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    if (synth->parsed()) {
        const mmss_status st = mmss_synth_write(synth_out.c_str(), n_products, reviews, d_t, d_roi,
                                                text_rows, image_rows, synth_seed, noise);
        if (st != MMSS_OK) return fail("synth", st);
        std::printf("wrote %u products x %u reviews to %s\n", n_products, reviews, synth_out.c_str());
        return 0;
    }

    if (train->parsed()) {
        ConfigGuard config;
        if (!config_path.empty()) {
            const mmss_status st = mmss_config_load_file(config.ptr, config_path.c_str());
            if (st != MMSS_OK) return fail("config", st);
        }
        auto set = [&](const char* key, const std::string& value) -> int {
            const mmss_status st = mmss_config_set(config.ptr, key, value.c_str());
            if (st != MMSS_OK) return fail("config", st);
            return 0;
        };
        int rc = 0;
        if (seed_opt->count() && (rc = set("seed", std::to_string(seed)))) return rc;
        if (seeds_opt->count() && (rc = set("seeds", std::to_string(seeds)))) return rc;
        if (epochs_opt->count() && (rc = set("epochs", std::to_string(epochs)))) return rc;
        if (batch_opt->count() && (rc = set("batch_size", std::to_string(batch_size)))) return rc;
        if (margin_opt->count() && (rc = set("margin", std::to_string(margin)))) return rc;
        if (lr_opt->count() && (rc = set("lr", std::to_string(lr)))) return rc;
        if (tau_opt->count() && (rc = set("tau", std::to_string(tau)))) return rc;
        if (disable_ssp && (rc = set("disable_ssp", "true"))) return rc;
        if (direct_concat && (rc = set("direct_concat", "true"))) return rc;
        if (clamp_labels && (rc = set("clamp_labels", "true"))) return rc;
        for (const std::string& kind : ablate)
            if ((rc = set("ablate", kind))) return rc;

        if (show_config) {
            char* json = mmss_config_to_json(config.ptr);
            if (!json) return fail_null("config");
            std::puts(json);
            mmss_string_free(json);
            return 0;
        }
        if (train_manifest.empty()) {
            std::fprintf(stderr, "error: train: manifest path required\n");
            return 1;
        }

        DatasetGuard dataset;
        dataset.ptr = mmss_dataset_open(train_manifest.c_str());
        if (!dataset.ptr) return fail_null("dataset");
        std::printf("loaded %zu products / %zu reviews\n",
                    mmss_dataset_product_count(dataset.ptr),
                    mmss_dataset_review_count(dataset.ptr));

        ReportGuard report;
        report.ptr = mmss_train(config.ptr, dataset.ptr, out_dir.c_str());
        if (!report.ptr) return fail_null("train");
        std::printf("test metrics (best dev checkpoint):\n");
        return print_report(report.ptr);
    }

    if (eval->parsed()) {
        DatasetGuard dataset;
        dataset.ptr = mmss_dataset_open(eval_manifest.c_str());
        if (!dataset.ptr) return fail_null("dataset");
        ReportGuard report;
        report.ptr = mmss_evaluate(eval_checkpoint.c_str(), dataset.ptr, eval_split.c_str());
        if (!report.ptr) return fail_null("eval");
        return print_report(report.ptr);
    }

    if (inspect->parsed()) {
        char* csv = mmss_checkpoint_labels_csv(inspect_checkpoint.c_str());
        if (!csv) return fail_null("inspect-labels");
        std::fputs(csv, stdout);
        mmss_string_free(csv);
        return 0;
    }

    return 1;
}
