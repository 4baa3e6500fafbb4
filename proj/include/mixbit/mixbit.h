/* SPDX-FileCopyrightText: © 2026 The mixbit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef MIXBIT_MIXBIT_H
#define MIXBIT_MIXBIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(MIXBIT_BUILDING_LIBRARY)
#define MB_API __attribute__((visibility("default")))
#else
#define MB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mb_status {
    MB_OK = 0,
    MB_ERR_INVALID_ARGUMENT = 1,
    MB_ERR_CONFIG = 2,
    MB_ERR_IO = 3,
    MB_ERR_FORMAT = 4,
    MB_ERR_NUMERIC = 5,
    MB_ERR_STATE = 6,
    MB_ERR_INFEASIBLE = 7,
    MB_ERR_INTERNAL = 8
} mb_status;

typedef struct mb_config mb_config;
typedef struct mb_dataset mb_dataset;
typedef struct mb_net mb_net;
typedef struct mb_plan mb_plan;
typedef struct mb_bd_model mb_bd_model;

/* Message for the last failing call on this thread; never NULL. */
MB_API const char* mb_last_error(void);
MB_API const char* mb_status_name(mb_status status);
MB_API const char* mb_version(void);
/* Caps kernel parallelism; n < 1 resets to 1. */
MB_API void mb_set_threads(int n);

/* ---- configuration ---------------------------------------------------- */

MB_API mb_status mb_config_load(const char* path, mb_config** out);
MB_API mb_status mb_config_parse(const char* json_text, mb_config** out);
/* key is dotted ("search.epochs"); value is a JSON literal or a bare string. */
MB_API mb_status mb_config_set(mb_config* config, const char* key, const char* value);
/* Copies the canonical JSON into buf (NUL-terminated, truncated to cap) and
 * reports the buffer size it needs, terminator included, in *needed. buf may
 * be NULL when cap is 0. */
MB_API mb_status mb_config_dump(const mb_config* config, char* buf, size_t cap, size_t* needed);
MB_API const char* mb_config_out_dir(const mb_config* config);
MB_API void mb_config_free(mb_config* config);

/* ---- datasets --------------------------------------------------------- */

MB_API mb_status mb_dataset_from_config(const mb_config* config, mb_dataset** out);
MB_API mb_status mb_dataset_synthetic(int classes, size_t per_class, size_t hw, uint64_t seed,
                                      size_t test_per_class, mb_dataset** out);
MB_API mb_status mb_dataset_load_cifar10(const char* dir, int normalize, size_t subset, uint64_t seed,
                                         mb_dataset** out);
/* 0 when the split does not exist. */
MB_API size_t mb_dataset_count(const mb_dataset* data, const char* split);
MB_API mb_status mb_dataset_labels(const mb_dataset* data, const char* split, int32_t* out, size_t cap);
MB_API void mb_dataset_free(mb_dataset* data);

/* ---- networks --------------------------------------------------------- */

/* arch: "tinynet" or "resnet20"; input_hw 0 picks the architecture default. */
MB_API mb_status mb_net_create(const char* arch, int classes, const int* bits, size_t nbits, uint64_t seed,
                               size_t input_hw, mb_net** out);
MB_API mb_status mb_net_from_config(const mb_config* config, const mb_dataset* data, mb_net** out);
MB_API mb_status mb_net_load(const char* path, mb_net** out);
MB_API mb_status mb_net_save(const mb_net* net, const char* path);
MB_API size_t mb_net_quantized_layers(const mb_net* net);
MB_API void mb_net_free(mb_net* net);

/* ---- plans ------------------------------------------------------------ */

/* spec: "uniform:N" (N = 32 bypasses quantization) or a plan.json path. */
MB_API mb_status mb_plan_parse(const char* spec, size_t quantized_layers, mb_plan** out);
MB_API mb_status mb_plan_save(const mb_plan* plan, const mb_net* net, const char* path);
MB_API size_t mb_plan_layers(const mb_plan* plan);
MB_API mb_status mb_plan_get(const mb_plan* plan, size_t layer, int* weight_bits, int* act_bits);
MB_API void mb_plan_free(mb_plan* plan);

/* ---- pipeline stages -------------------------------------------------- */

typedef struct mb_search_summary {
    size_t epochs_run;
    size_t best_epoch;
    double best_valid_acc;
    double target_mflops;
    double plan_mflops;
} mb_search_summary;

/* out_dir may be NULL (no files written). plan_out and summary may be NULL. */
MB_API mb_status mb_search(mb_net* net, const mb_dataset* data, const mb_config* config, const char* out_dir,
                           mb_plan** plan_out, mb_search_summary* summary);
/* Argmax of the stored strengths, ties to the smaller bitwidth. */
MB_API mb_status mb_select(const mb_net* net, mb_plan** out);

typedef struct mb_retrain_summary {
    size_t epochs_run;
    double final_train_loss;
    double train_accuracy;
    double test_accuracy;
    int low_bit;
} mb_retrain_summary;

MB_API mb_status mb_retrain(mb_net* net, const mb_dataset* data, const mb_plan* plan, const mb_config* config,
                            mb_retrain_summary* summary);
/* Copies weights and alphas from src into dst (same architecture). */
MB_API mb_status mb_net_copy_weights(const mb_net* src, mb_net* dst);

/* predictions may be NULL; otherwise cap must cover the split. */
MB_API mb_status mb_evaluate(mb_net* net, const mb_dataset* data, const char* split, double* accuracy,
                             int32_t* predictions, size_t cap);

MB_API mb_status mb_bd_export(const mb_net* net, const char* path);
MB_API mb_status mb_bd_load(const char* path, mb_bd_model** out);
MB_API size_t mb_bd_layers(const mb_bd_model* model);
/* logits (N x classes) may be NULL. */
MB_API mb_status mb_bd_infer(const mb_bd_model* model, const mb_dataset* data, const char* split,
                             int32_t* predictions, size_t cap, double* logits, size_t logits_cap);
MB_API void mb_bd_free(mb_bd_model* model);

/* plan NULL means full precision. cost_csv may be NULL. */
MB_API mb_status mb_flops(const mb_net* net, const mb_plan* plan, const char* cost_csv, double* mflops);
MB_API mb_status mb_random_plan(const mb_net* net, double lo_mflops, double hi_mflops, uint64_t seed, mb_plan** out);

typedef struct mb_bench_result {
    double median_ns;
    uint64_t and_word_ops;
    uint64_t shift_adds;
} mb_bench_result;

MB_API mb_status mb_bench_kernel(size_t c_in, size_t c_out, size_t kernel, size_t out_hw, int weight_bits,
                                 int act_bits, size_t reps, mb_bench_result* out);

typedef struct mb_gradcheck_result {
    double r_error;
    double s_error;
    double alpha_error;
    size_t coords;
} mb_gradcheck_result;

MB_API mb_status mb_gradcheck(uint64_t seed, int stochastic, size_t coords, mb_gradcheck_result* out);

/* ---- reports ---------------------------------------------------------- */

/* manifest.json: command, config hash, seed, versions and the full config. */
MB_API mb_status mb_write_manifest(const mb_config* config, const char* command, const char* path);
/* CSV with columns index,prediction,label. */
MB_API mb_status mb_write_predictions(const char* path, const int32_t* predictions, const int32_t* labels, size_t n);

#ifdef __cplusplus
}
#endif

#endif /* MIXBIT_MIXBIT_H */
