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

#include "train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "autodiff/tape.hpp"
#include "common/errors.hpp"
#include "ctc/ctc.hpp"

namespace mixctc::train {
namespace {

// Tags (hex digits of pi) that keep the four derived streams apart, so that
// toggling one stochastic feature cannot shift the draws of another.
constexpr uint64_t kStreamTags[4] = {
    0x243f6a8885a308d3ull,  // parameter initialization
    0x13198a2e03707344ull,  // batch-order shuffling
    0xa4093822299f31d0ull,  // blending plans
    0x082efa98ec4e6c89ull,  // dropout masks
};

uint64_t stream_seed(uint64_t base, int stream) {
  return splitmix64(base ^ kStreamTags[stream]);
}

std::string positions_to_string(const std::vector<int>& positions) {
  std::string out;
  for (size_t i = 0; i < positions.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(positions[i]);
  }
  return out;
}

std::vector<int> parse_positions(const std::string& text) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    char* end = nullptr;
    const long value = std::strtol(item.c_str(), &end, 10);
    if (item.empty() || end == nullptr || *end != '\0') {
      throw InvalidConfig("blend position list '" + text + "' is not comma-separated integers");
    }
    out.push_back(static_cast<int>(value));
    pos = comma + 1;
  }
  if (out.empty()) throw InvalidConfig("blend position list must not be empty");
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("short write to " + path);
}

// Deep copy so the snapshot stops tracking the live, still-training tensors.
model::ModelParams snapshot_params(const model::ModelParams& params) {
  model::ModelParams copy;
  copy.names = params.names;
  copy.tensors.reserve(params.tensors.size());
  for (const auto& tensor : params.tensors) {
    copy.tensors.push_back(
        autodiff::Tensor::from(tensor->shape, tensor->values, /*requires_grad=*/true));
  }
  return copy;
}

// Deterministic forward + greedy decode + per-line alignment loss over the
// given records. Lines whose shortest alignment cannot fit the frame count
// contribute predictions (and therefore edits) but no loss term.
metrics::EvalReport score_records(const model::Network& net, const data::Dataset& dataset,
                                  const std::vector<int>& indices, const ctc::Vocabulary& vocab,
                                  int batch_size) {
  const model::NetworkConfig& cfg = net.config();
  std::vector<int> widths;
  widths.reserve(indices.size());
  for (int idx : indices) {
    widths.push_back(
        data::scaled_width(dataset.records[static_cast<size_t>(idx)].image, cfg.input_height));
  }
  const auto buckets = data::bucket_indices(widths, batch_size);

  std::vector<std::string> predictions;
  std::vector<std::string> references;
  predictions.reserve(indices.size());
  references.reserve(indices.size());
  double loss_sum = 0.0;
  int64_t scored = 0;

  for (const auto& bucket : buckets) {
    std::vector<int> records;
    records.reserve(bucket.size());
    for (int pos : bucket) records.push_back(indices[static_cast<size_t>(pos)]);
    const data::Batch batch =
        data::make_batch(dataset, records, cfg.input_height, cfg.width_multiple(), vocab);

    autodiff::Tape tape;
    const auto logits =
        net.forward(tape, batch.images, /*plan=*/nullptr, /*training=*/false, nullptr);
    const auto probs = tape.softmax_depth(logits);
    const int frames = probs->dim(1);
    const int classes = probs->dim(2);
    const size_t stride = static_cast<size_t>(frames) * classes;

    for (size_t i = 0; i < records.size(); ++i) {
      std::vector<double> rows(probs->values.begin() + static_cast<int64_t>(i * stride),
                               probs->values.begin() + static_cast<int64_t>((i + 1) * stride));
      const ctc::ProbSequence y = ctc::ProbSequence::from(frames, classes, std::move(rows));
      predictions.push_back(ctc::greedy_decode(y, vocab).to_string(vocab));
      references.push_back(batch.transcripts[i]);
      if (ctc::min_path_length(batch.labels[i]) <= frames) {
        loss_sum += ctc_loss_grad(y, batch.labels[i]).loss;
        ++scored;
      }
    }
  }

  metrics::EvalReport report = metrics::cer(predictions, references);
  report.mean_loss = scored > 0 ? loss_sum / static_cast<double>(scored) : 0.0;
  return report;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidConfig("learning rate must be positive");
  }
  if (batch_size < 1) throw InvalidConfig("batch size must be at least 1");
  if (!(rmsprop_decay > 0.0) || !(rmsprop_decay < 1.0)) {
    throw InvalidConfig("rmsprop decay must lie strictly between 0 and 1");
  }
  if (!(rmsprop_epsilon > 0.0)) throw InvalidConfig("rmsprop epsilon must be positive");
  if (patience < 1) throw InvalidConfig("patience must be at least 1");
  if (max_epochs < 1) throw InvalidConfig("max epochs must be at least 1");
  if (grad_clip < 0.0 || !std::isfinite(grad_clip)) {
    throw InvalidConfig("gradient clip must be zero (off) or positive");
  }
  mixup.validate();
}

KeyValueConfig TrainConfig::serialize() const {
  KeyValueConfig kv;
  kv.set_double("learning_rate", learning_rate);
  kv.set_int("batch_size", batch_size);
  kv.set_double("rmsprop_decay", rmsprop_decay);
  kv.set_double("rmsprop_epsilon", rmsprop_epsilon);
  kv.set_int("patience", patience);
  kv.set_int("max_epochs", max_epochs);
  kv.set_int("seed", static_cast<int64_t>(seed));
  kv.set_double("grad_clip", grad_clip);
  kv.set_bool("mixup.enabled", mixup.enabled);
  kv.set("mixup.distribution",
         mixup.distribution == mixup::LambdaDistribution::kBeta ? "beta" : "uniform");
  kv.set_double("mixup.alpha", mixup.alpha);
  kv.set_double("mixup.uniform_lo", mixup.uniform_lo);
  kv.set_double("mixup.uniform_hi", mixup.uniform_hi);
  kv.set("mixup.positions", positions_to_string(mixup.positions));
  kv.set_int("mixup.n_way", mixup.n_way);
  kv.set_bool("mixup.multiply_gradients", mixup.multiply_gradients);
  kv.set_bool("mixup.allow_no_fusion", mixup.allow_no_fusion);
  kv.set_double("mixup.no_fusion_prob", mixup.no_fusion_prob);
  kv.set_double("mixup.force_lambda", mixup.force_lambda);
  return kv;
}

TrainConfig TrainConfig::parse(const KeyValueConfig& kv) {
  static const std::set<std::string> known = {
      "learning_rate",       "batch_size",
      "rmsprop_decay",       "rmsprop_epsilon",
      "patience",            "max_epochs",
      "seed",                "grad_clip",
      "mixup.enabled",       "mixup.distribution",
      "mixup.alpha",         "mixup.uniform_lo",
      "mixup.uniform_hi",    "mixup.positions",
      "mixup.n_way",         "mixup.multiply_gradients",
      "mixup.allow_no_fusion", "mixup.no_fusion_prob",
      "mixup.force_lambda"};
  kv.reject_unknown_keys(known);

  TrainConfig c;
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.rmsprop_decay = kv.get_double("rmsprop_decay", c.rmsprop_decay);
  c.rmsprop_epsilon = kv.get_double("rmsprop_epsilon", c.rmsprop_epsilon);
  c.patience = static_cast<int>(kv.get_int("patience", c.patience));
  c.max_epochs = static_cast<int>(kv.get_int("max_epochs", c.max_epochs));
  c.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(c.seed)));
  c.grad_clip = kv.get_double("grad_clip", c.grad_clip);
  c.mixup.enabled = kv.get_bool("mixup.enabled", c.mixup.enabled);
  if (kv.has("mixup.distribution")) {
    const std::string d = kv.require("mixup.distribution");
    if (d == "beta") {
      c.mixup.distribution = mixup::LambdaDistribution::kBeta;
    } else if (d == "uniform") {
      c.mixup.distribution = mixup::LambdaDistribution::kUniform;
    } else {
      throw InvalidConfig("unknown lambda distribution '" + d + "'");
    }
  }
  c.mixup.alpha = kv.get_double("mixup.alpha", c.mixup.alpha);
  c.mixup.uniform_lo = kv.get_double("mixup.uniform_lo", c.mixup.uniform_lo);
  c.mixup.uniform_hi = kv.get_double("mixup.uniform_hi", c.mixup.uniform_hi);
  if (kv.has("mixup.positions")) {
    c.mixup.positions = parse_positions(kv.require("mixup.positions"));
  }
  c.mixup.n_way = static_cast<int>(kv.get_int("mixup.n_way", c.mixup.n_way));
  c.mixup.multiply_gradients = kv.get_bool("mixup.multiply_gradients", c.mixup.multiply_gradients);
  c.mixup.allow_no_fusion = kv.get_bool("mixup.allow_no_fusion", c.mixup.allow_no_fusion);
  c.mixup.no_fusion_prob = kv.get_double("mixup.no_fusion_prob", c.mixup.no_fusion_prob);
  c.mixup.force_lambda = kv.get_double("mixup.force_lambda", c.mixup.force_lambda);
  c.validate();
  return c;
}

std::string EpochStats::tsv_row() const {
  char row[256];
  std::snprintf(row, sizeof row, "%d\t%.17g\t%.17g\t%.17g\t%.17g\t%lld\t%.3f", epoch, train_loss,
                val_loss, val_cer, lambda_mean, static_cast<long long>(skipped_pairs), seconds);
  return row;
}

std::string TrainLog::to_tsv() const {
  std::string out = "epoch\ttrain_loss\tval_loss\tval_cer\tlambda_mean\tskipped_pairs\tseconds\n";
  for (const EpochStats& e : epochs) {
    out += e.tsv_row();
    out += '\n';
  }
  return out;
}

RmsPropState RmsPropState::zeros_like(const model::ModelParams& params) {
  RmsPropState state;
  state.accum.reserve(params.tensors.size());
  for (const auto& tensor : params.tensors) {
    state.accum.emplace_back(tensor->values.size(), 0.0);
  }
  return state;
}

double clip_gradients(model::ModelParams& params, double max_norm) {
  if (max_norm <= 0.0) return 1.0;
  double squared = 0.0;
  for (const auto& tensor : params.tensors) {
    for (double g : tensor->grad) squared += g * g;
  }
  const double norm = std::sqrt(squared);
  if (norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  for (const auto& tensor : params.tensors) {
    for (double& g : tensor->grad) g *= factor;
  }
  return factor;
}

void rmsprop_step(model::ModelParams& params, RmsPropState& state, const TrainConfig& config) {
  if (state.accum.size() != params.tensors.size()) {
    throw ShapeMismatch("optimizer state does not match the parameter list");
  }
  for (size_t i = 0; i < params.tensors.size(); ++i) {
    autodiff::Tensor& tensor = *params.tensors[i];
    std::vector<double>& s = state.accum[i];
    if (tensor.grad.empty()) continue;  // untouched by this backward pass
    if (s.size() != tensor.values.size()) {
      throw ShapeMismatch("optimizer state shape drifted from its parameter");
    }
    for (size_t j = 0; j < tensor.values.size(); ++j) {
      const double g = tensor.grad[j];
      s[j] = config.rmsprop_decay * s[j] + (1.0 - config.rmsprop_decay) * g * g;
      tensor.values[j] -= config.learning_rate * g / std::sqrt(s[j] + config.rmsprop_epsilon);
    }
  }
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 1) throw InvalidConfig("patience must be at least 1");
}

bool EarlyStopper::update(double cer, double loss) {
  ++epoch_;
  const bool improved =
      best_epoch_ == 0 || cer < best_cer_ || (cer == best_cer_ && loss < best_loss_);
  if (improved) {
    best_epoch_ = epoch_;
    best_cer_ = cer;
    best_loss_ = loss;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return improved;
}

TrainResult train(const data::Dataset& dataset, const std::vector<int>& train_indices,
                  const std::vector<int>& valid_indices, const model::NetworkConfig& net_config,
                  const TrainConfig& config, const std::string& out_dir,
                  const EpochCallback& on_epoch) {
  net_config.validate();
  config.validate();
  const ctc::Vocabulary vocab = dataset.vocabulary();
  if (net_config.classes != vocab.classes()) {
    throw ConfigMismatch("network scores " + std::to_string(net_config.classes) +
                         " classes but the dataset vocabulary has " +
                         std::to_string(vocab.classes()));
  }
  if (train_indices.empty() || valid_indices.empty()) {
    throw EmptyDataset("training requires nonempty train and validation splits");
  }
  if (config.mixup.enabled) {
    for (int p : config.mixup.positions) {
      if (p < 0 || p > net_config.max_mix_ordinal()) {
        throw InvalidDepth("blend position " + std::to_string(p) +
                           " is outside this network (deepest is " +
                           std::to_string(net_config.max_mix_ordinal()) + ")");
      }
    }
  }

  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
  }

  Rng init_rng(stream_seed(config.seed, 0));
  Rng shuffle_rng(stream_seed(config.seed, 1));
  Rng plan_rng(stream_seed(config.seed, 2));
  Rng dropout_rng(stream_seed(config.seed, 3));

  model::Network net(net_config, model::build(net_config, init_rng));
  RmsPropState state = RmsPropState::zeros_like(net.params());

  // Batch membership is fixed by width bucketing for the whole run; epochs
  // only reshuffle the order the buckets are visited in.
  std::vector<int> widths;
  widths.reserve(train_indices.size());
  for (int idx : train_indices) {
    widths.push_back(data::scaled_width(dataset.records[static_cast<size_t>(idx)].image,
                                        net_config.input_height));
  }
  const auto buckets = data::bucket_indices(widths, config.batch_size);
  std::vector<std::vector<int>> batch_records(buckets.size());
  for (size_t b = 0; b < buckets.size(); ++b) {
    batch_records[b].reserve(buckets[b].size());
    for (int pos : buckets[b]) batch_records[b].push_back(train_indices[static_cast<size_t>(pos)]);
  }

  TrainResult result;
  EarlyStopper stopper(config.patience);
  model::ModelParams best_params;

  std::vector<int> order(batch_records.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int64_t scored = 0;
    double lambda_sum = 0.0;
    int64_t lambda_count = 0;
    int64_t skipped = 0;

    for (size_t step = 0; step < order.size(); ++step) {
      const std::vector<int>& records = batch_records[static_cast<size_t>(order[step])];
      const int b_n = static_cast<int>(records.size());
      const data::Batch batch = data::make_batch(dataset, records, net_config.input_height,
                                                 net_config.width_multiple(), vocab);

      mixup::MixPlan plan;
      if (config.mixup.enabled) {
        try {
          plan = mixup::make_plan(b_n, plan_rng, config.mixup);
        } catch (const BatchTooSmall&) {
          // A tail batch below n_way falls back to the identity plan.
        }
      }
      if (plan.lambdas.empty()) {
        plan.lambdas.assign(static_cast<size_t>(b_n), 1.0);
        plan.skipped.assign(static_cast<size_t>(b_n), false);
      }
      if (plan.enabled) {
        for (double l : plan.lambdas) lambda_sum += l;
        lambda_count += b_n;
      }

      const int frames = net.output_length(batch.images->dim(3));
      auto terms =
          mixup::plan_loss_terms(plan, batch.labels, frames, config.mixup.multiply_gradients);
      for (bool s : plan.skipped) skipped += s ? 1 : 0;
      int active = 0;
      for (const auto& t : terms) active += t.empty() ? 0 : 1;
      if (active == 0) continue;  // no label in this batch fits its frames

      autodiff::Tape tape;
      const auto logits = net.forward(tape, batch.images, plan.enabled ? &plan : nullptr,
                                      /*training=*/true, &dropout_rng);
      const auto mean_loss =
          tape.scale(ctc::tape_loss(tape, logits, terms), 1.0 / static_cast<double>(active));
      const double loss = mean_loss->scalar();
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("loss is not finite at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(step));
      }
      tape.backward(mean_loss);
      clip_gradients(net.params(), config.grad_clip);
      rmsprop_step(net.params(), state, config);
      for (const auto& tensor : net.params().tensors) tensor->zero_grad();

      loss_sum += loss * static_cast<double>(active);
      scored += active;
    }

    const metrics::EvalReport val =
        score_records(net, dataset, valid_indices, vocab, config.batch_size);

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = scored > 0 ? loss_sum / static_cast<double>(scored) : 0.0;
    stats.val_loss = val.mean_loss;
    stats.val_cer = val.cer;
    stats.lambda_mean = lambda_count > 0 ? lambda_sum / static_cast<double>(lambda_count) : 0.0;
    stats.skipped_pairs = skipped;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.epochs.push_back(stats);

    if (stopper.update(val.cer, val.mean_loss)) {
      result.log.best_epoch = epoch;
      best_params = snapshot_params(net.params());
      if (!out_dir.empty()) {
        model::save_checkpoint(out_dir + "/best.ckpt", net_config, best_params);
      }
    }
    if (!out_dir.empty()) {
      write_text_file(out_dir + "/trainlog.tsv", result.log.to_tsv());
    }
    if (on_epoch && !on_epoch(stats)) break;
    if (stopper.should_stop()) break;
  }

  result.best = model::Checkpoint{net_config, std::move(best_params)};
  return result;
}

TrainResult train(const data::Dataset& dataset, const model::NetworkConfig& net_config,
                  const TrainConfig& config, const std::string& out_dir,
                  const EpochCallback& on_epoch) {
  return train(dataset, dataset.split_indices(data::Split::kTrain),
               dataset.split_indices(data::Split::kValid), net_config, config, out_dir, on_epoch);
}

metrics::EvalReport evaluate(const data::Dataset& dataset, data::Split split,
                             const model::Network& net, int batch_size) {
  if (batch_size < 1) throw InvalidConfig("batch size must be at least 1");
  const ctc::Vocabulary vocab = dataset.vocabulary();
  if (net.config().classes != vocab.classes()) {
    throw ConfigMismatch("checkpoint scores " + std::to_string(net.config().classes) +
                         " classes but the dataset vocabulary has " +
                         std::to_string(vocab.classes()));
  }
  return score_records(net, dataset, dataset.split_indices(split), vocab, batch_size);
}

metrics::EvalReport evaluate(const data::Dataset& dataset, data::Split split,
                             const model::Checkpoint& checkpoint, int batch_size) {
  const model::Network net(checkpoint.config, checkpoint.params);
  return evaluate(dataset, split, net, batch_size);
}

}  // namespace mixctc::train
