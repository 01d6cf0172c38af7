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
// Gated convolutional recurrent network for line-level text recognition:
// a tiling layer, eight convolutional rows (three of them multiplicative
// gates), a vertical max-pool that collapses the height axis, and a
// BLSTM/linear decoder followed by a class projection. Feature batches can
// be blended mid-network at a configurable convolutional ordinal, which is
// what makes the manifold-mixup training scheme possible.

#ifndef MIXCTC_MODEL_MODEL_HPP
#define MIXCTC_MODEL_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "autodiff/tape.hpp"
#include "autodiff/tensor.hpp"
#include "common/rng.hpp"
#include "mixup/mixup.hpp"

namespace mixctc::model {

enum class LayerKind {
  kTiling,            // space-to-depth rearrangement, no parameters
  kConv,              // convolution + tanh
  kGatedConv,         // out = x * sigmoid(conv(x)), depth preserving
  kMaxPool,           // vertical pool; collapses [B,D,1,W] to [B,W,D]
  kDropout,           // inverted dropout at the config rate (training only)
  kBlstm,             // bidirectional LSTM, directions concatenated
  kLinear,            // affine + tanh over the time axis
  kOutputProjection,  // affine to class scores, no activation
};

// One row of the network table. Convolutional rows carry a 1-based ordinal
// used to address mixable depths (ordinal 0 means the raw input).
struct LayerSpec {
  LayerKind kind;
  int in_depth = 0;
  int out_depth = 0;
  int filter_h = 1;
  int filter_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  int conv_ordinal = 0;  // 1..8 over conv/gated rows, 0 elsewhere
};

// Full architecture description. The default stacks are produced by the
// presets below; a config serializes to key=value text whose digest is
// embedded in checkpoints so stale weights cannot be loaded silently.
struct NetworkConfig {
  std::string preset = "paper";
  int input_height = 128;
  int classes = 0;       // vocabulary size; the projection layer emits classes+1
  double dropout = 0.5;  // rate for every kDropout row
  std::vector<LayerSpec> layers;

  // Height 128, depths 4-8-16-...-128, decoder width 128 (full-size stack).
  static NetworkConfig paper_preset(int classes);
  // Height 32, quartered depths, decoder width 32; same topology and mixable
  // ordinals, roughly 100x fewer parameters. Meant for tests and CPU runs.
  static NetworkConfig tiny_preset(int classes);

  // Throws InvalidConfig unless depths chain, conv ordinals are consecutive,
  // and the height arithmetic collapses to exactly 1 after the max-pool.
  void validate() const;

  // Largest conv ordinal, i.e. the deepest mixable position.
  int max_mix_ordinal() const;
  // Width granularity the input must be padded to (the tiling block width).
  int width_multiple() const;

  std::string serialize() const;
  static NetworkConfig parse(const std::string& text);
  // FNV-1a hash of serialize(), as fixed-width hex.
  std::string digest() const;
};

// Trainable tensors in fixed layer order, each with a stable name such as
// "l04.conv.weight" (index = row position in NetworkConfig::layers).
struct ModelParams {
  std::vector<autodiff::TensorPtr> tensors;
  std::vector<std::string> names;

  int64_t parameter_count() const;
};

// Shape plus Glorot initialization bound for one parameter tensor (bound 0
// means the tensor starts at zero, as all biases do).
struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  double init_bound = 0.0;
};

// The single source of truth for parameter order, names, and shapes.
std::vector<ParamSpec> expected_params(const NetworkConfig& config);

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
ModelParams build(const NetworkConfig& config, Rng& rng);

// out = x * sigmoid(conv(x)); the convolution preserves depth and shape.
autodiff::TensorPtr gated_block(autodiff::Tape& tape, const autodiff::TensorPtr& x,
                                const autodiff::TensorPtr& weight,
                                const autodiff::TensorPtr& bias);

// Immutable pairing of a validated config with matching parameters.
class Network {
 public:
  Network(NetworkConfig config, ModelParams params);

  const NetworkConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  // Runs the full stack on input [B, 1, H, W] and returns unnormalized class
  // scores [B, T, classes+1]. When `plan` is an enabled MixPlan, the batch
  // rows are blended at the plan's depth: ordinal 0 blends the raw input,
  // ordinal k blends right after the k-th convolutional row. `dropout_rng`
  // may be null unless training with a nonzero dropout rate.
  autodiff::TensorPtr forward(autodiff::Tape& tape, const autodiff::TensorPtr& input,
                              const mixup::MixPlan* plan, bool training,
                              Rng* dropout_rng) const;

  // Frame count produced for a padded input width; TooNarrow when the width
  // cannot survive the stride chain, ShapeMismatch when it is not a multiple
  // of the tiling block.
  int output_length(int padded_width) const;

  // Smallest padded width accepted by output_length.
  int min_width() const;

 private:
  NetworkConfig config_;
  ModelParams params_;
};

// Versioned binary snapshot: header (magic, version, config digest), the
// serialized config text, then every named tensor as raw IEEE-754 bits.
// Reload is bit-exact. Writes go to a temporary file renamed into place.
struct Checkpoint {
  NetworkConfig config;
  ModelParams params;
};

void save_checkpoint(const std::string& path, const NetworkConfig& config,
                     const ModelParams& params);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mixctc::model

#endif  // MIXCTC_MODEL_MODEL_HPP
