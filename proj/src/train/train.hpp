// Copyright 2026 The mixctc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MIXCTC_TRAIN_TRAIN_HPP
#define MIXCTC_TRAIN_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "common/config.hpp"
#include "common/rng.hpp"
#include "data/data.hpp"
#include "metrics/metrics.hpp"
#include "mixup/mixup.hpp"
#include "model/model.hpp"

namespace mixctc::train {

// Optimization settings. The defaults follow the training recipe this
// codebase reproduces: RMSProp, batches of 8, learning rate 4e-4, early
// stopping on the validation set.
struct TrainConfig {
  double learning_rate = 4e-4;
  int batch_size = 8;
  double rmsprop_decay = 0.9;     // rho in s <- rho*s + (1-rho)*g^2
  double rmsprop_epsilon = 1e-8;  // added under the square root
  int patience = 20;              // epochs without improvement before stopping
  int max_epochs = 300;
  uint64_t seed = 1;
  double grad_clip = 10.0;  // global-norm ceiling; 0 disables clipping
  mixup::MixupConfig mixup;

  void validate() const;  // throws InvalidConfig
  KeyValueConfig serialize() const;
  // Starts from defaults, overlays `kv`, rejects unknown keys.
  static TrainConfig parse(const KeyValueConfig& kv);
};

// One row of the training log.
struct EpochStats {
  int epoch = 0;            // 1-based
  double train_loss = 0.0;  // mean weighted loss per scored train sample
  double val_loss = 0.0;    // mean alignment loss per scorable validation line
  double val_cer = 0.0;
  double lambda_mean = 0.0;    // mean drawn self-weight; 0 when blending is off
  int64_t skipped_pairs = 0;   // samples whose loss had to drop a label
  double seconds = 0.0;        // wall time of the epoch

  // One log line, no trailing newline; columns as in TrainLog::to_tsv.
  std::string tsv_row() const;
};

// Append-only per-epoch history plus the index of the kept checkpoint.
struct TrainLog {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based; 0 when no epoch ran

  // Tab-separated with a header row. All statistics are printed with full
  // round-trip precision so two logs can be compared textually; the seconds
  // column is wall time and is excluded from any such comparison.
  std::string to_tsv() const;
};

// Per-parameter accumulators for the squared-gradient moving average.
struct RmsPropState {
  std::vector<std::vector<double>> accum;

  static RmsPropState zeros_like(const model::ModelParams& params);
};

// Scales every gradient by max_norm/norm when the global L2 norm across all
// parameter gradients exceeds max_norm. A max_norm of 0 disables clipping.
// Returns the factor applied (1 when the gradients were left alone).
double clip_gradients(model::ModelParams& params, double max_norm);

// One optimizer step over every parameter tensor, elementwise:
//   s <- rho*s + (1-rho)*g^2 ;  p <- p - lr * g / sqrt(s + eps).
// Tensors without an allocated gradient are left untouched.
void rmsprop_step(model::ModelParams& params, RmsPropState& state, const TrainConfig& config);

// Best-so-far tracking for early stopping: an epoch improves when its CER is
// strictly lower, or equal with strictly lower loss. Training stops once
// `patience` consecutive epochs fail to improve.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);

  bool update(double cer, double loss);  // true when this epoch improved
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_cer() const { return best_cer_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int stale_ = 0;
  double best_cer_ = 0.0;
  double best_loss_ = 0.0;
};

struct TrainResult {
  TrainLog log;
  model::Checkpoint best;  // parameters of the best validation epoch
};

// Invoked after each epoch's validation; return false to stop training early
// (the best checkpoint so far is kept, exactly as with patience stopping).
using EpochCallback = std::function<bool(const EpochStats&)>;

// Full optimization loop. `train_indices`/`valid_indices` are record indices
// into `dataset`; per epoch the train split is bucket-batched (bucket order
// reshuffled each epoch), each batch optionally gets a fresh blending plan,
// and the validation split is scored for loss and CER. The checkpoint with
// the lowest validation CER (ties: lower validation loss) is kept; training
// stops after `patience` epochs without improvement or at `max_epochs`.
//
// Four independent RNG streams are derived from the seed (initialization,
// batch-order shuffling, blending plans, dropout) so that toggling one
// stochastic feature does not shift the draws of the others.
//
// When `out_dir` is nonempty, `trainlog.tsv` is rewritten after every epoch
// and `best.ckpt` after every improvement, so an interrupted run leaves the
// best state on disk.
TrainResult train(const data::Dataset& dataset, const std::vector<int>& train_indices,
                  const std::vector<int>& valid_indices, const model::NetworkConfig& net_config,
                  const TrainConfig& config, const std::string& out_dir = "",
                  const EpochCallback& on_epoch = nullptr);

// Convenience overload using the dataset's own train/valid splits.
TrainResult train(const data::Dataset& dataset, const model::NetworkConfig& net_config,
                  const TrainConfig& config, const std::string& out_dir = "",
                  const EpochCallback& on_epoch = nullptr);

// Greedy-decoded evaluation of one split: deterministic forward (no blending,
// dropout off), per-frame argmax decode, micro-averaged CER plus the mean
// alignment loss over lines whose label fits their frame count. Throws
// ConfigMismatch when the network's class count does not match the dataset
// vocabulary.
metrics::EvalReport evaluate(const data::Dataset& dataset, data::Split split,
                             const model::Network& net, int batch_size);
metrics::EvalReport evaluate(const data::Dataset& dataset, data::Split split,
                             const model::Checkpoint& checkpoint, int batch_size);

}  // namespace mixctc::train

#endif  // MIXCTC_TRAIN_TRAIN_HPP
