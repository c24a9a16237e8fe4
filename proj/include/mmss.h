/* mmss — multimodal review helpfulness ranking engine.
 *
 * C interface over the C++ core. All handles are opaque; functions that can
 * fail return mmss_status (or NULL for constructors) and leave a diagnostic
 * readable through mmss_last_error() on the calling thread. Strings returned
 * as char* are owned by the caller and released with mmss_string_free().
 */
#ifndef MMSS_H
#define MMSS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mmss_status {
    MMSS_OK = 0,
    MMSS_ERR_USAGE = 1,    /* bad arguments or configuration */
    MMSS_ERR_DATA = 2,     /* malformed manifest, feature file, or checkpoint */
    MMSS_ERR_IO = 3,       /* filesystem failure */
    MMSS_ERR_INTERNAL = 4, /* contract violation inside the engine */
} mmss_status;

typedef struct mmss_config mmss_config;
typedef struct mmss_dataset mmss_dataset;
typedef struct mmss_report mmss_report;

const char* mmss_version(void);

/* Last error message recorded on this thread; empty string when none. */
const char* mmss_last_error(void);

void mmss_string_free(char* s);

/* ----- configuration ----------------------------------------------------- */

/* Defaults for every field; never fails. */
mmss_config* mmss_config_create(void);
void mmss_config_free(mmss_config* config);

/* Resets to defaults overlaid with the file's fields; apply overrides after. */
mmss_status mmss_config_load_file(mmss_config* config, const char* path);

/* Applies one override; keys mirror the CLI flags (seed, seeds, epochs,
 * batch_size, margin, lr, tau, clamp_labels, disable_ssp, direct_concat,
 * ablate, d_t, d_f, d_g, heads, alpha1, alpha2, train_frac, dev_frac). */
mmss_status mmss_config_set(mmss_config* config, const char* key, const char* value);

/* Canonical JSON form of the effective configuration. */
char* mmss_config_to_json(const mmss_config* config);

/* ----- synthetic data ---------------------------------------------------- */

/* Writes feature files and manifest.json into out_dir. */
mmss_status mmss_synth_write(const char* out_dir, uint32_t n_products,
                             uint32_t reviews_per_product, uint32_t d_t, uint32_t d_roi,
                             uint32_t text_rows, uint32_t image_rows, uint64_t seed,
                             double noise);

/* ----- datasets ----------------------------------------------------------- */

mmss_dataset* mmss_dataset_open(const char* manifest_path);
void mmss_dataset_free(mmss_dataset* dataset);
size_t mmss_dataset_product_count(const mmss_dataset* dataset);
size_t mmss_dataset_review_count(const mmss_dataset* dataset);

/* ----- training and evaluation ------------------------------------------- */

/* Trains per the config (multi-seed if configured), writing checkpoints,
 * step logs, and report.json under out_dir. Returns the test report
 * (mean over seeds), or NULL on error. */
mmss_report* mmss_train(const mmss_config* config, const mmss_dataset* dataset,
                        const char* out_dir);

/* Scores the dataset with a checkpoint's best parameters. split is one of
 * "all", "train", "dev", "test" (NULL means "all"). */
mmss_report* mmss_evaluate(const char* checkpoint_path, const mmss_dataset* dataset,
                           const char* split);

double mmss_report_map(const mmss_report* report);
/* NDCG@n; NaN when that cutoff was not evaluated. */
double mmss_report_ndcg(const mmss_report* report, uint32_t n);
char* mmss_report_to_json(const mmss_report* report);
char* mmss_report_table(const mmss_report* report);
void mmss_report_free(mmss_report* report);

/* ----- pseudo-label inspection ------------------------------------------- */

/* CSV dump of the checkpoint's pseudo-label history: one row per
 * (epoch, review, subtask) with header "epoch,review_id,subtask,value". */
char* mmss_checkpoint_labels_csv(const char* checkpoint_path);

#ifdef __cplusplus
}
#endif

#endif /* MMSS_H */
