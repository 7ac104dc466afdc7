/* Copyright 2026 The medattn Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the medattn library.
 *
 * Every fallible call returns an ma_status. On failure the message is
 * available from ma_last_error() on the same thread until the next call.
 * Strings returned through char** outputs are owned by the caller and must
 * be released with ma_string_free().
 */

#ifndef MEDATTN_MEDATTN_H_
#define MEDATTN_MEDATTN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MA_API __declspec(dllexport)
#else
#define MA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ma_status {
  MA_OK = 0,
  MA_ERR_USAGE = 1,   /* bad arguments or configuration */
  MA_ERR_DATA = 2,    /* unreadable or malformed input files */
  MA_ERR_NUMERIC = 3, /* shape errors, non-finite values */
  MA_ERR_INTERNAL = 4
} ma_status;

typedef struct ma_config ma_config;
typedef struct ma_model ma_model;

MA_API const char* ma_version(void);
MA_API const char* ma_last_error(void);
MA_API void ma_string_free(char* s);

/* --- configuration ------------------------------------------------------ */

/* `path` may be NULL or empty for defaults. `overrides` holds n strings of
 * the form "key=value" applied after the file. */
MA_API ma_status ma_config_load(const char* path, const char* const* overrides, size_t n,
                                ma_config** out);
MA_API void ma_config_free(ma_config* config);
/* Resolved configuration as `key = value` lines. */
MA_API ma_status ma_config_render(const ma_config* config, char** out);
/* Value of one key as text, e.g. "0.5" for train.threshold. */
MA_API ma_status ma_config_get(const ma_config* config, const char* key, char** out);
/* Every key with its default and description. */
MA_API ma_status ma_config_reference(char** out);

/* --- data --------------------------------------------------------------- */

/* Writes the synthetic corpus as JSONL. */
MA_API ma_status ma_synth(const ma_config* config, const char* out_jsonl);
/* JSONL records -> encoded dataset directory (dataset.jsonl, vocab.txt,
 * labels.txt, summary.json). `summary_json` may be NULL. */
MA_API ma_status ma_preprocess(const ma_config* config, const char* in_jsonl, const char* out_dir,
                               char** summary_json);

/* --- training and inference ---------------------------------------------- */

/* Trains on an encoded dataset directory with a 90/10 train/validation
 * split. Writes the best checkpoint (plus vocab.txt and labels.txt) to
 * out_dir, the last one to out_dir/last and history.csv to out_dir.
 * `resume_dir` (may be NULL) names a previous out_dir/last to continue. */
MA_API ma_status ma_train(const ma_config* config, const char* data_dir, const char* out_dir,
                          const char* resume_dir, char** summary_json);

MA_API ma_status ma_model_load(const char* checkpoint_dir, ma_model** out);
MA_API void ma_model_free(ma_model* model);
MA_API size_t ma_model_label_count(const ma_model* model);

/* Label probabilities for one raw note as a JSON object keyed by code. */
MA_API ma_status ma_predict_text(const ma_model* model, const char* note, char** out_json);
/* Same, into a caller array of ma_model_label_count() doubles. */
MA_API ma_status ma_predict_probs(const ma_model* model, const char* note, double* out_probs);

/* Metrics on an encoded dataset (JSON). When `probs_jsonl` is not NULL the
 * per-example probabilities are written there, one JSON object per line. */
MA_API ma_status ma_evaluate(const ma_model* model, const char* data_dir, double threshold,
                             const char* probs_jsonl, char** out_json);

/* --- experiments --------------------------------------------------------- */

/* kind: "lr", "samples" or "noise". Writes out_csv and the .svg beside it. */
MA_API ma_status ma_sweep(const ma_config* config, const char* kind, const char* data_dir,
                          const char* out_csv);
/* Transformer vs bag-of-words table; `out_csv` may be NULL. */
MA_API ma_status ma_baseline(const ma_config* config, const char* data_dir, const char* out_csv,
                             char** out_table);
/* End-to-end finite-difference check on a tiny model. Either output may
 * be NULL. */
MA_API ma_status ma_gradcheck(uint64_t seed, double* max_rel_error, char** out_text);
/* Fixed-width table from n (name, accuracy, precision, recall) rows with
 * values in [0, 1]. */
MA_API ma_status ma_format_report(const char* const* names, const double* accuracy,
                                  const double* precision, const double* recall, size_t n,
                                  char** out);

#ifdef __cplusplus
}
#endif

#endif /* MEDATTN_MEDATTN_H_ */
