/* Copyright 2026 The mixctc Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the mixctc text-line recognition library.
 *
 * Everything the command-line tool does goes through this header: dataset
 * generation and loading, training with feature blending, checkpoint
 * evaluation, and the numerical self-test suites. Handles are opaque;
 * every fallible call returns a status code, and the message for the most
 * recent failure on the calling thread is available from
 * mixctc_last_error().
 *
 * Configuration crosses the boundary as key=value text (one pair per line,
 * '#' comments), the same format the library uses on disk, so callers can
 * forward a config file verbatim and never track individual knobs.
 */

#ifndef MIXCTC_H
#define MIXCTC_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* ------------------------------------------------------------------ */
/* Status and error reporting                                          */

typedef enum mixctc_status {
  MIXCTC_OK = 0,
  /* A configuration value, label, or shape failed validation. */
  MIXCTC_ERR_INVALID_ARGUMENT = 1,
  /* A file could not be read, parsed, or written. */
  MIXCTC_ERR_IO = 2,
  /* Checkpoint and dataset disagree (e.g. class count vs alphabet). */
  MIXCTC_ERR_MISMATCH = 3,
  /* Anything else: numerical failure, internal error. */
  MIXCTC_ERR_RUNTIME = 4
} mixctc_status;

/* Message for the last failing call on this thread. Never NULL; empty
 * string when nothing failed yet. The pointer stays valid until the next
 * failing mixctc_* call on the same thread. */
const char* mixctc_last_error(void);

/* Library version as "major.minor.patch". */
const char* mixctc_version(void);

/* ------------------------------------------------------------------ */
/* Datasets                                                            */

typedef struct mixctc_dataset mixctc_dataset;

#define MIXCTC_SPLIT_TRAIN 0
#define MIXCTC_SPLIT_VALID 1

/* Renders a synthetic line-image dataset into `dir` (manifest.tsv,
 * genconfig.txt, PGM images under img/). `config_text` keys, all
 * optional:
 *
 *   lines         total line count (default 1000, minimum 2)
 *   val_fraction  validation share in (0, 1) (default 0.1)
 *   alphabet      distinct drawable characters (default "abcdefghij")
 *   min_len       shortest transcript (default 1)
 *   max_len       longest transcript (default 12)
 *   seed          generation seed (default 1)
 *
 * The same directory contents are reproduced byte-for-byte by the same
 * config. On success the split sizes are stored through the out pointers
 * (either may be NULL). */
mixctc_status mixctc_dataset_generate(const char* dir, const char* config_text,
                                      int* out_train_lines, int* out_valid_lines);

/* Loads a dataset directory written by mixctc_dataset_generate. */
mixctc_status mixctc_dataset_open(const char* dir, mixctc_dataset** out_dataset);

/* Frees a dataset. NULL is ignored. */
void mixctc_dataset_close(mixctc_dataset* dataset);

/* Number of lines in MIXCTC_SPLIT_TRAIN or MIXCTC_SPLIT_VALID;
 * -1 on NULL dataset or unknown split. */
int mixctc_dataset_lines(const mixctc_dataset* dataset, int split);

/* The dataset's character inventory. Borrowed pointer, valid until the
 * dataset is closed; NULL on NULL dataset. */
const char* mixctc_dataset_alphabet(const mixctc_dataset* dataset);

/* ------------------------------------------------------------------ */
/* Models                                                              */

typedef struct mixctc_model mixctc_model;

/* Loads a checkpoint file written by training. */
mixctc_status mixctc_model_open(const char* checkpoint_path, mixctc_model** out_model);

/* Frees a model. NULL is ignored. */
void mixctc_model_close(mixctc_model* model);

/* ------------------------------------------------------------------ */
/* Training                                                            */

/* Called once per completed epoch with one tab-separated row of the
 * training log (columns: epoch, train_loss, val_loss, val_cer,
 * lambda_mean, skipped_pairs, seconds; no trailing newline). Return
 * nonzero to keep training, zero to stop after this epoch (the best
 * checkpoint so far is kept, as with patience stopping). */
typedef int (*mixctc_progress_fn)(const char* tsv_row, void* user_data);

typedef struct mixctc_train_summary {
  int best_epoch;       /* 1-based epoch of the kept checkpoint */
  int epochs_run;       /* epochs actually executed */
  double best_val_cer;  /* validation CER at best_epoch */
  double best_val_loss; /* validation loss at best_epoch */
} mixctc_train_summary;

/* Trains a network on `dataset` and writes `best.ckpt` plus
 * `trainlog.tsv` under `out_dir` (created if missing). `options_text`
 * accepts every optimizer key understood by the trainer:
 *
 *   learning_rate, batch_size, rmsprop_decay, rmsprop_epsilon, patience,
 *   max_epochs, seed, grad_clip, mixup.enabled, mixup.distribution,
 *   mixup.alpha, mixup.uniform_lo, mixup.uniform_hi, mixup.positions,
 *   mixup.n_way, mixup.multiply_gradients, mixup.allow_no_fusion,
 *   mixup.no_fusion_prob, mixup.force_lambda
 *
 * plus three keys resolved at this boundary:
 *
 *   preset        "paper" or "tiny" network stack (default "paper")
 *   dropout       override the preset's dropout rate
 *   train_subset  keep only N training lines, chosen by a seeded shuffle
 *                 of the train split (0 = all; same seed, same subset)
 *
 * Unknown keys are rejected. `progress` may be NULL; `summary` may be
 * NULL. Checkpoint writes are atomic (temp file + rename), so a failed
 * or interrupted run never leaves a torn best checkpoint behind. */
mixctc_status mixctc_train(const mixctc_dataset* dataset, const char* options_text,
                           const char* out_dir, mixctc_progress_fn progress, void* user_data,
                           mixctc_train_summary* summary);

/* ------------------------------------------------------------------ */
/* Evaluation                                                          */

typedef struct mixctc_eval_summary {
  double cer;        /* corpus edit distance over corpus reference chars */
  int lines;         /* lines evaluated */
  long long edits;   /* total edit distance */
  double mean_loss;  /* mean per-line alignment loss over scorable lines */
  /* Preformatted "cer=<float> lines=<int> edits=<int>". */
  char summary_line[128];
} mixctc_eval_summary;

/* Greedy-decodes one split of `dataset` with `model` (blending off,
 * dropout off). When `report_tsv_path` is non-NULL, a per-line TSV
 * (reference, prediction, edits) is written there. `summary` may be
 * NULL. Fails with MIXCTC_ERR_MISMATCH when the model's class count
 * does not fit the dataset's alphabet. */
mixctc_status mixctc_evaluate(const mixctc_dataset* dataset, const mixctc_model* model, int split,
                              const char* report_tsv_path, mixctc_eval_summary* summary);

/* ------------------------------------------------------------------ */
/* Option resolution                                                   */

/* Each resolver validates the given key=value text against one call's
 * option vocabulary (unknown keys rejected, values checked) and writes
 * the canonical fully-defaulted form — every known key with its
 * effective value, sorted — into `buffer` as NUL-terminated text.
 * Callers persist this next to a run so it can be replayed exactly.
 * Fails with MIXCTC_ERR_INVALID_ARGUMENT when the text is invalid or
 * the buffer is too small (8 KiB is always enough). */
mixctc_status mixctc_resolve_gen_options(const char* config_text, char* buffer,
                                         size_t buffer_size);
mixctc_status mixctc_resolve_train_options(const char* options_text, char* buffer,
                                           size_t buffer_size);
mixctc_status mixctc_resolve_selftest_options(const char* options_text, char* buffer,
                                              size_t buffer_size);

/* ------------------------------------------------------------------ */
/* Self-test                                                           */

/* Receives one preformatted result line per suite. */
typedef void (*mixctc_line_fn)(const char* line, void* user_data);

/* Runs the numerical verification suites (alignment-loss oracle,
 * analytic-vs-numerical gradients, sampler distribution tests, blending
 * linearity). `options_text` keys, all optional:
 *
 *   seed, oracle_cases, gradient_cases, sampler_draws, linearity_draws
 *
 * `emit`/`user_data` may be NULL. `out_all_passed` (may be NULL)
 * receives 1 when every suite passed, else 0; a failing suite is a
 * normal MIXCTC_OK return, not an error status. */
mixctc_status mixctc_selftest(const char* options_text, mixctc_line_fn emit, void* user_data,
                              int* out_all_passed);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MIXCTC_H */
