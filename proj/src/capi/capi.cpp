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
//
// Implementation of the C boundary declared in include/mixctc.h: opaque
// handle structs around the C++ types, exception-to-status translation,
// and key=value option text resolution.

#include "mixctc.h"

#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include "common/config.hpp"
#include "common/errors.hpp"
#include "common/rng.hpp"
#include "data/data.hpp"
#include "model/model.hpp"
#include "selftest/selftest.hpp"
#include "train/train.hpp"

struct mixctc_dataset {
  mixctc::data::Dataset impl;
};

struct mixctc_model {
  mixctc::model::Checkpoint impl;
};

namespace {

using mixctc::KeyValueConfig;

thread_local std::string g_last_error;

mixctc_status fail(mixctc_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `fn` and folds the library's exception taxonomy into status codes:
// filesystem and format problems are IO, checkpoint/dataset disagreement is
// MISMATCH, diverging optimization is RUNTIME, and every other validation
// error (bad config, bad shapes, bad labels) is INVALID_ARGUMENT.
template <typename Fn>
mixctc_status guarded(Fn&& fn) {
  try {
    fn();
    return MIXCTC_OK;
  } catch (const mixctc::IoError& e) {
    return fail(MIXCTC_ERR_IO, e.what());
  } catch (const mixctc::MalformedManifest& e) {
    return fail(MIXCTC_ERR_IO, e.what());
  } catch (const mixctc::MalformedPGM& e) {
    return fail(MIXCTC_ERR_IO, e.what());
  } catch (const mixctc::ConfigMismatch& e) {
    return fail(MIXCTC_ERR_MISMATCH, e.what());
  } catch (const mixctc::NonFiniteLoss& e) {
    return fail(MIXCTC_ERR_RUNTIME, e.what());
  } catch (const mixctc::Error& e) {
    return fail(MIXCTC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(MIXCTC_ERR_RUNTIME, e.what());
  }
}

// Next hexadecimal-pi constant after the four stream tags used by the
// trainer; keeps subset selection independent of every training stream.
constexpr uint64_t kSubsetTag = 0x452821e638d01377ull;

constexpr int kEvalBatch = 8;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw mixctc::IoError("cannot write " + path);
}

void copy_to_buffer(const std::string& text, char* buffer, size_t buffer_size) {
  if (!buffer) throw mixctc::InvalidConfig("null output buffer");
  if (text.size() + 1 > buffer_size) {
    throw mixctc::InvalidConfig("output buffer too small: need " +
                                std::to_string(text.size() + 1) + " bytes");
  }
  std::memcpy(buffer, text.c_str(), text.size() + 1);
}

// The training option text minus the three keys resolved at this boundary.
struct TrainOptions {
  mixctc::train::TrainConfig config;
  std::string preset;
  bool has_dropout = false;
  double dropout = 0.0;
  int64_t train_subset = 0;  // 0 = the whole train split
};

TrainOptions parse_train_options(const KeyValueConfig& kv) {
  TrainOptions opts;
  KeyValueConfig trainer_kv;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "preset" || key == "dropout" || key == "train_subset") continue;
    trainer_kv.set(key, value);
  }
  // The trainer rejects anything it does not know, so typos still fail
  // loudly even though this boundary skimmed three keys off the top.
  opts.config = mixctc::train::TrainConfig::parse(trainer_kv);
  opts.preset = kv.get("preset", "paper");
  if (opts.preset != "paper" && opts.preset != "tiny") {
    throw mixctc::InvalidConfig("preset must be paper or tiny, got '" + opts.preset + "'");
  }
  opts.has_dropout = kv.has("dropout");
  if (opts.has_dropout) opts.dropout = kv.get_double("dropout", 0.0);
  opts.train_subset = kv.get_int("train_subset", 0);
  if (opts.train_subset < 0) throw mixctc::InvalidConfig("train_subset must be >= 0");
  return opts;
}

mixctc::model::NetworkConfig build_network_config(const TrainOptions& opts, int classes) {
  mixctc::model::NetworkConfig net = opts.preset == "paper"
                                         ? mixctc::model::NetworkConfig::paper_preset(classes)
                                         : mixctc::model::NetworkConfig::tiny_preset(classes);
  if (opts.has_dropout) {
    net.dropout = opts.dropout;
    net.validate();
  }
  return net;
}

mixctc::selftest::SelftestOptions parse_selftest_options(const KeyValueConfig& kv) {
  kv.reject_unknown_keys(
      {"seed", "oracle_cases", "gradient_cases", "sampler_draws", "linearity_draws"});
  mixctc::selftest::SelftestOptions options;
  options.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(options.seed)));
  options.oracle_cases = static_cast<int>(kv.get_int("oracle_cases", options.oracle_cases));
  options.gradient_cases = static_cast<int>(kv.get_int("gradient_cases", options.gradient_cases));
  options.sampler_draws = static_cast<int>(kv.get_int("sampler_draws", options.sampler_draws));
  options.linearity_draws =
      static_cast<int>(kv.get_int("linearity_draws", options.linearity_draws));
  if (options.oracle_cases < 1 || options.gradient_cases < 1 || options.sampler_draws < 1 ||
      options.linearity_draws < 1) {
    throw mixctc::InvalidConfig("self-test case counts must be >= 1");
  }
  return options;
}

}  // namespace

extern "C" {

const char* mixctc_last_error(void) { return g_last_error.c_str(); }

const char* mixctc_version(void) { return "0.1.0"; }

mixctc_status mixctc_dataset_generate(const char* dir, const char* config_text,
                                      int* out_train_lines, int* out_valid_lines) {
  if (!dir) return fail(MIXCTC_ERR_INVALID_ARGUMENT, "null dataset directory");
  return guarded([&] {
    const KeyValueConfig kv = KeyValueConfig::parse(config_text ? config_text : "");
    const mixctc::data::GenConfig config = mixctc::data::GenConfig::parse(kv);
    const mixctc::data::GenSummary summary = mixctc::data::generate_dataset(dir, config);
    if (out_train_lines) *out_train_lines = summary.train_lines;
    if (out_valid_lines) *out_valid_lines = summary.valid_lines;
  });
}

mixctc_status mixctc_dataset_open(const char* dir, mixctc_dataset** out_dataset) {
  if (!dir) return fail(MIXCTC_ERR_INVALID_ARGUMENT, "null dataset directory");
  if (!out_dataset) return fail(MIXCTC_ERR_INVALID_ARGUMENT, "null dataset out pointer");
  *out_dataset = nullptr;
  return guarded([&] { *out_dataset = new mixctc_dataset{mixctc::data::load_dataset(dir)}; });
}

void mixctc_dataset_close(mixctc_dataset* dataset) { delete dataset; }

int mixctc_dataset_lines(const mixctc_dataset* dataset, int split) {
  if (!dataset) return -1;
  if (split != MIXCTC_SPLIT_TRAIN && split != MIXCTC_SPLIT_VALID) return -1;
  const auto which = split == MIXCTC_SPLIT_TRAIN ? mixctc::data::Split::kTrain
                                                 : mixctc::data::Split::kValid;
  return static_cast<int>(dataset->impl.split_indices(which).size());
}

const char* mixctc_dataset_alphabet(const mixctc_dataset* dataset) {
  return dataset ? dataset->impl.alphabet.c_str() : nullptr;
}

mixctc_status mixctc_model_open(const char* checkpoint_path, mixctc_model** out_model) {
  if (!checkpoint_path) return fail(MIXCTC_ERR_INVALID_ARGUMENT, "null checkpoint path");
  if (!out_model) return fail(MIXCTC_ERR_INVALID_ARGUMENT, "null model out pointer");
  *out_model = nullptr;
  return guarded(
      [&] { *out_model = new mixctc_model{mixctc::model::load_checkpoint(checkpoint_path)}; });
}

void mixctc_model_close(mixctc_model* model) { delete model; }

mixctc_status mixctc_train(const mixctc_dataset* dataset, const char* options_text,
                           const char* out_dir, mixctc_progress_fn progress, void* user_data,
                           mixctc_train_summary* summary) {
  if (!dataset) return fail(MIXCTC_ERR_INVALID_ARGUMENT, "null dataset");
  return guarded([&] {
    const KeyValueConfig kv = KeyValueConfig::parse(options_text ? options_text : "");
    const TrainOptions opts = parse_train_options(kv);
    const int classes = static_cast<int>(dataset->impl.alphabet.size());
    const mixctc::model::NetworkConfig net = build_network_config(opts, classes);

    std::vector<int> train_idx = dataset->impl.split_indices(mixctc::data::Split::kTrain);
    if (opts.train_subset > 0 && opts.train_subset < static_cast<int64_t>(train_idx.size())) {
      mixctc::Rng rng(mixctc::splitmix64(opts.config.seed ^ kSubsetTag));
      rng.shuffle(train_idx);
      train_idx.resize(static_cast<size_t>(opts.train_subset));
    }
    const std::vector<int> valid_idx = dataset->impl.split_indices(mixctc::data::Split::kValid);

    mixctc::train::EpochCallback on_epoch = nullptr;
    if (progress) {
      on_epoch = [progress, user_data](const mixctc::train::EpochStats& stats) {
        return progress(stats.tsv_row().c_str(), user_data) != 0;
      };
    }

    const mixctc::train::TrainResult result = mixctc::train::train(
        dataset->impl, train_idx, valid_idx, net, opts.config, out_dir ? out_dir : "", on_epoch);

    if (summary) {
      summary->best_epoch = result.log.best_epoch;
      summary->epochs_run = static_cast<int>(result.log.epochs.size());
      summary->best_val_cer = 0.0;
      summary->best_val_loss = 0.0;
      for (const auto& stats : result.log.epochs) {
        if (stats.epoch == result.log.best_epoch) {
          summary->best_val_cer = stats.val_cer;
          summary->best_val_loss = stats.val_loss;
          break;
        }
      }
    }
  });
}

mixctc_status mixctc_evaluate(const mixctc_dataset* dataset, const mixctc_model* model, int split,
                              const char* report_tsv_path, mixctc_eval_summary* summary) {
  if (!dataset) return fail(MIXCTC_ERR_INVALID_ARGUMENT, "null dataset");
  if (!model) return fail(MIXCTC_ERR_INVALID_ARGUMENT, "null model");
  if (split != MIXCTC_SPLIT_TRAIN && split != MIXCTC_SPLIT_VALID) {
    return fail(MIXCTC_ERR_INVALID_ARGUMENT, "split must be 0 (train) or 1 (valid)");
  }
  return guarded([&] {
    const auto which = split == MIXCTC_SPLIT_TRAIN ? mixctc::data::Split::kTrain
                                                   : mixctc::data::Split::kValid;
    const mixctc::metrics::EvalReport report =
        mixctc::train::evaluate(dataset->impl, which, model->impl, kEvalBatch);
    if (report_tsv_path) write_text(report_tsv_path, report.to_tsv());
    if (summary) {
      summary->cer = report.cer;
      summary->lines = static_cast<int>(report.lines.size());
      summary->edits = static_cast<long long>(report.total_edits);
      summary->mean_loss = report.mean_loss;
      const std::string line = report.summary_line();
      std::snprintf(summary->summary_line, sizeof summary->summary_line, "%s", line.c_str());
    }
  });
}

mixctc_status mixctc_resolve_gen_options(const char* config_text, char* buffer,
                                         size_t buffer_size) {
  return guarded([&] {
    const KeyValueConfig kv = KeyValueConfig::parse(config_text ? config_text : "");
    const mixctc::data::GenConfig config = mixctc::data::GenConfig::parse(kv);
    copy_to_buffer(config.serialize().serialize(), buffer, buffer_size);
  });
}

mixctc_status mixctc_resolve_train_options(const char* options_text, char* buffer,
                                           size_t buffer_size) {
  return guarded([&] {
    const KeyValueConfig kv = KeyValueConfig::parse(options_text ? options_text : "");
    const TrainOptions opts = parse_train_options(kv);
    // Class count does not affect validity of the stack description, so a
    // placeholder is enough to resolve the effective dropout rate.
    const mixctc::model::NetworkConfig net = build_network_config(opts, 1);
    KeyValueConfig resolved = opts.config.serialize();
    resolved.set("preset", opts.preset);
    resolved.set_double("dropout", net.dropout);
    resolved.set_int("train_subset", opts.train_subset);
    copy_to_buffer(resolved.serialize(), buffer, buffer_size);
  });
}

mixctc_status mixctc_resolve_selftest_options(const char* options_text, char* buffer,
                                              size_t buffer_size) {
  return guarded([&] {
    const KeyValueConfig kv = KeyValueConfig::parse(options_text ? options_text : "");
    const mixctc::selftest::SelftestOptions options = parse_selftest_options(kv);
    KeyValueConfig resolved;
    resolved.set_int("seed", static_cast<int64_t>(options.seed));
    resolved.set_int("oracle_cases", options.oracle_cases);
    resolved.set_int("gradient_cases", options.gradient_cases);
    resolved.set_int("sampler_draws", options.sampler_draws);
    resolved.set_int("linearity_draws", options.linearity_draws);
    copy_to_buffer(resolved.serialize(), buffer, buffer_size);
  });
}

mixctc_status mixctc_selftest(const char* options_text, mixctc_line_fn emit, void* user_data,
                              int* out_all_passed) {
  return guarded([&] {
    const KeyValueConfig kv = KeyValueConfig::parse(options_text ? options_text : "");
    const mixctc::selftest::SelftestOptions options = parse_selftest_options(kv);

    std::function<void(const std::string&)> sink = nullptr;
    if (emit) {
      sink = [emit, user_data](const std::string& line) { emit(line.c_str(), user_data); };
    }
    const std::vector<mixctc::selftest::SuiteResult> results =
        mixctc::selftest::run_all(options, sink);
    if (out_all_passed) *out_all_passed = mixctc::selftest::all_passed(results) ? 1 : 0;
  });
}

}  // extern "C"
