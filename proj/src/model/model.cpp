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

#include "model/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

#include "common/config.hpp"
#include "common/errors.hpp"

namespace mixctc::model {

using autodiff::Padding;
using autodiff::Tape;
using autodiff::Tensor;
using autodiff::TensorPtr;

namespace {

LayerSpec tiling_row(int in, int block_h, int block_w) {
  return {LayerKind::kTiling, in, in * block_h * block_w, block_h, block_w, block_h, block_w, 0};
}

LayerSpec conv_row(int in, int out, int fh, int fw, int sh, int sw) {
  return {LayerKind::kConv, in, out, fh, fw, sh, sw, 0};
}

LayerSpec gated_row(int depth) {
  return {LayerKind::kGatedConv, depth, depth, 3, 3, 1, 1, 0};
}

LayerSpec pool_row(int depth, int window_h) {
  return {LayerKind::kMaxPool, depth, depth, window_h, 1, 1, 1, 0};
}

LayerSpec dropout_row(int depth) { return {LayerKind::kDropout, depth, depth, 1, 1, 1, 1, 0}; }

LayerSpec blstm_row(int in, int out) { return {LayerKind::kBlstm, in, out, 1, 1, 1, 1, 0}; }

LayerSpec linear_row(int in, int out) { return {LayerKind::kLinear, in, out, 1, 1, 1, 1, 0}; }

LayerSpec projection_row(int in, int out) {
  return {LayerKind::kOutputProjection, in, out, 1, 1, 1, 1, 0};
}

// Stamps 1-based ordinals onto the convolutional rows, top-down.
void number_conv_rows(std::vector<LayerSpec>& layers) {
  int ordinal = 0;
  for (auto& layer : layers) {
    if (layer.kind == LayerKind::kConv || layer.kind == LayerKind::kGatedConv) {
      layer.conv_ordinal = ++ordinal;
    }
  }
}

// Decoder: dropout in front of each BLSTM/linear row, then the projection.
void append_decoder(std::vector<LayerSpec>& layers, int encoder_depth, int width, int classes) {
  layers.push_back(dropout_row(encoder_depth));
  layers.push_back(blstm_row(encoder_depth, width));
  layers.push_back(dropout_row(width));
  layers.push_back(linear_row(width, width));
  layers.push_back(dropout_row(width));
  layers.push_back(blstm_row(width, width));
  layers.push_back(dropout_row(width));
  layers.push_back(linear_row(width, width));
  layers.push_back(projection_row(width, classes + 1));
}

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kTiling: return "tiling";
    case LayerKind::kConv: return "conv";
    case LayerKind::kGatedConv: return "gated-conv";
    case LayerKind::kMaxPool: return "max-pool";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kBlstm: return "blstm";
    case LayerKind::kLinear: return "linear";
    case LayerKind::kOutputProjection: return "output-projection";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& name) {
  for (LayerKind kind :
       {LayerKind::kTiling, LayerKind::kConv, LayerKind::kGatedConv, LayerKind::kMaxPool,
        LayerKind::kDropout, LayerKind::kBlstm, LayerKind::kLinear,
        LayerKind::kOutputProjection}) {
    if (name == kind_name(kind)) return kind;
  }
  throw InvalidConfig("unknown layer kind '" + name + "'");
}

std::string layer_key(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer.%02zu", index);
  return buf;
}

std::string layer_prefix(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "l%02zu", index);
  return buf;
}

double glorot_bound(int64_t fan_in, int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Strided rows use valid padding so the preset's exact height chain holds;
// stride-1 rows keep their spatial extent with same padding.
Padding conv_padding(const LayerSpec& layer) {
  return layer.stride_h == 1 && layer.stride_w == 1 ? Padding::kSame : Padding::kValid;
}

}  // namespace

NetworkConfig NetworkConfig::paper_preset(int classes) {
  NetworkConfig config;
  config.preset = "paper";
  config.input_height = 128;
  config.classes = classes;
  config.dropout = 0.5;
  config.layers = {
      tiling_row(1, 2, 2),
      conv_row(4, 8, 3, 3, 1, 1),
      conv_row(8, 16, 4, 2, 4, 2),
      gated_row(16),
      conv_row(16, 32, 3, 3, 1, 1),
      gated_row(32),
      conv_row(32, 64, 4, 2, 4, 2),
      gated_row(64),
      conv_row(64, 128, 3, 3, 1, 1),
      pool_row(128, 4),
  };
  append_decoder(config.layers, 128, 128, classes);
  number_conv_rows(config.layers);
  return config;
}

NetworkConfig NetworkConfig::tiny_preset(int classes) {
  NetworkConfig config;
  config.preset = "tiny";
  config.input_height = 32;
  config.classes = classes;
  config.dropout = 0.5;
  config.layers = {
      tiling_row(1, 2, 1),
      conv_row(2, 4, 3, 3, 1, 1),
      conv_row(4, 8, 4, 2, 4, 2),
      gated_row(8),
      conv_row(8, 16, 3, 3, 1, 1),
      gated_row(16),
      conv_row(16, 32, 4, 2, 4, 2),
      gated_row(32),
      conv_row(32, 64, 3, 3, 1, 1),
      pool_row(64, 1),
  };
  append_decoder(config.layers, 64, 32, classes);
  number_conv_rows(config.layers);
  return config;
}

void NetworkConfig::validate() const {
  if (classes < 1) throw InvalidConfig("classes must be at least 1");
  if (input_height < 1) throw InvalidConfig("input height must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidConfig("dropout rate must be in [0, 1)");
  if (layers.empty()) throw InvalidConfig("layer stack is empty");

  int ordinal = 0;
  int pools = 0;
  int height = input_height;
  int depth = layers.front().in_depth;
  bool collapsed = false;
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    const std::string where = layer_key(i);
    if (layer.in_depth != depth) {
      throw InvalidConfig(where + ": input depth " + std::to_string(layer.in_depth) +
                          " does not chain from previous output " + std::to_string(depth));
    }
    if (layer.filter_h < 1 || layer.filter_w < 1 || layer.stride_h < 1 || layer.stride_w < 1) {
      throw InvalidConfig(where + ": filters and strides must be positive");
    }
    switch (layer.kind) {
      case LayerKind::kTiling:
        if (collapsed) throw InvalidConfig(where + ": tiling after height collapse");
        if (layer.out_depth != layer.in_depth * layer.filter_h * layer.filter_w) {
          throw InvalidConfig(where + ": tiling depth must grow by the block area");
        }
        if (height % layer.filter_h != 0) {
          throw InvalidConfig(where + ": height " + std::to_string(height) +
                              " is not a multiple of the tiling block");
        }
        height /= layer.filter_h;
        break;
      case LayerKind::kConv:
      case LayerKind::kGatedConv: {
        if (collapsed) throw InvalidConfig(where + ": convolution after height collapse");
        if (layer.kind == LayerKind::kGatedConv && layer.out_depth != layer.in_depth) {
          throw InvalidConfig(where + ": gated rows must preserve depth");
        }
        if (layer.conv_ordinal != ++ordinal) {
          throw InvalidConfig(where + ": conv ordinals must be consecutive from 1");
        }
        if (conv_padding(layer) == Padding::kValid) {
          if (height < layer.filter_h || (height - layer.filter_h) % layer.stride_h != 0) {
            throw InvalidConfig(where + ": height " + std::to_string(height) +
                                " incompatible with filter/stride");
          }
          height = (height - layer.filter_h) / layer.stride_h + 1;
        }
        break;
      }
      case LayerKind::kMaxPool:
        if (collapsed) throw InvalidConfig(where + ": repeated max-pool");
        if (height != layer.filter_h) {
          throw InvalidConfig(where + ": pool window " + std::to_string(layer.filter_h) +
                              " must equal the remaining height " + std::to_string(height));
        }
        height = 1;
        collapsed = true;
        ++pools;
        break;
      case LayerKind::kDropout:
        if (layer.out_depth != layer.in_depth) {
          throw InvalidConfig(where + ": dropout must preserve depth");
        }
        break;
      case LayerKind::kBlstm:
        if (!collapsed) throw InvalidConfig(where + ": BLSTM before height collapse");
        if (layer.out_depth % 2 != 0) {
          throw InvalidConfig(where + ": BLSTM depth must be even (two directions)");
        }
        break;
      case LayerKind::kLinear:
        if (!collapsed) throw InvalidConfig(where + ": linear row before height collapse");
        break;
      case LayerKind::kOutputProjection:
        if (!collapsed) throw InvalidConfig(where + ": projection before height collapse");
        if (i + 1 != layers.size()) throw InvalidConfig(where + ": projection must be last");
        if (layer.out_depth != classes + 1) {
          throw InvalidConfig(where + ": projection depth must be classes+1 = " +
                              std::to_string(classes + 1));
        }
        break;
    }
    depth = layer.out_depth;
  }
  if (pools != 1) throw InvalidConfig("stack needs exactly one max-pool row");
  if (layers.back().kind != LayerKind::kOutputProjection) {
    throw InvalidConfig("stack must end with the output projection");
  }
}

int NetworkConfig::max_mix_ordinal() const {
  int best = 0;
  for (const auto& layer : layers) best = std::max(best, layer.conv_ordinal);
  return best;
}

int NetworkConfig::width_multiple() const {
  int multiple = 1;
  for (const auto& layer : layers) {
    if (layer.kind == LayerKind::kTiling) multiple *= layer.filter_w;
  }
  return multiple;
}

std::string NetworkConfig::serialize() const {
  KeyValueConfig out;
  out.set("preset", preset);
  out.set_int("input_height", input_height);
  out.set_int("classes", classes);
  out.set_double("dropout", dropout);
  out.set_int("layer_count", static_cast<int64_t>(layers.size()));
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    std::ostringstream row;
    row << kind_name(layer.kind) << ' ' << layer.in_depth << ' ' << layer.out_depth << ' '
        << layer.filter_h << ' ' << layer.filter_w << ' ' << layer.stride_h << ' '
        << layer.stride_w;
    out.set(layer_key(i), row.str());
  }
  return out.serialize();
}

NetworkConfig NetworkConfig::parse(const std::string& text) {
  KeyValueConfig in = KeyValueConfig::parse(text);
  NetworkConfig config;
  config.preset = in.require("preset");
  config.input_height = static_cast<int>(in.get_int("input_height", 0));
  config.classes = static_cast<int>(in.get_int("classes", 0));
  config.dropout = in.get_double("dropout", 0.0);
  const int64_t count = in.get_int("layer_count", -1);
  if (count < 1) throw InvalidConfig("layer_count missing or not positive");
  for (int64_t i = 0; i < count; ++i) {
    std::istringstream row(in.require(layer_key(static_cast<size_t>(i))));
    std::string kind;
    LayerSpec layer;
    if (!(row >> kind >> layer.in_depth >> layer.out_depth >> layer.filter_h >> layer.filter_w >>
          layer.stride_h >> layer.stride_w)) {
      throw InvalidConfig(layer_key(static_cast<size_t>(i)) + ": malformed layer row");
    }
    layer.kind = kind_from_name(kind);
    config.layers.push_back(layer);
  }
  number_conv_rows(config.layers);
  config.validate();
  return config;
}

std::string NetworkConfig::digest() const {
  const std::string text = serialize();
  uint64_t hash = 1469598103934665603ull;  // FNV-1a offset basis
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;  // FNV-1a prime
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

int64_t ModelParams::parameter_count() const {
  int64_t total = 0;
  for (const auto& tensor : tensors) total += tensor->size();
  return total;
}

std::vector<ParamSpec> expected_params(const NetworkConfig& config) {
  std::vector<ParamSpec> specs;
  for (size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& layer = config.layers[i];
    const std::string prefix = layer_prefix(i);
    switch (layer.kind) {
      case LayerKind::kTiling:
      case LayerKind::kMaxPool:
      case LayerKind::kDropout:
        break;
      case LayerKind::kConv:
      case LayerKind::kGatedConv: {
        const char* tag = layer.kind == LayerKind::kConv ? ".conv" : ".gate";
        const int64_t area = static_cast<int64_t>(layer.filter_h) * layer.filter_w;
        specs.push_back({prefix + tag + ".weight",
                         {layer.out_depth, layer.in_depth, layer.filter_h, layer.filter_w},
                         glorot_bound(layer.in_depth * area, layer.out_depth * area)});
        specs.push_back({prefix + tag + ".bias", {layer.out_depth}, 0.0});
        break;
      }
      case LayerKind::kBlstm: {
        const int hidden = layer.out_depth / 2;
        for (const char* dir : {".fw", ".bw"}) {
          specs.push_back({prefix + ".blstm" + dir + ".wx",
                           {layer.in_depth, 4 * hidden},
                           glorot_bound(layer.in_depth, 4 * hidden)});
          specs.push_back({prefix + ".blstm" + dir + ".wh",
                           {hidden, 4 * hidden},
                           glorot_bound(hidden, 4 * hidden)});
          specs.push_back({prefix + ".blstm" + dir + ".b", {4 * hidden}, 0.0});
        }
        break;
      }
      case LayerKind::kLinear:
      case LayerKind::kOutputProjection: {
        const char* tag = layer.kind == LayerKind::kLinear ? ".linear" : ".proj";
        specs.push_back({prefix + tag + ".weight",
                         {layer.in_depth, layer.out_depth},
                         glorot_bound(layer.in_depth, layer.out_depth)});
        specs.push_back({prefix + tag + ".bias", {layer.out_depth}, 0.0});
        break;
      }
    }
  }
  return specs;
}

ModelParams build(const NetworkConfig& config, Rng& rng) {
  config.validate();
  ModelParams params;
  for (const ParamSpec& spec : expected_params(config)) {
    TensorPtr tensor = Tensor::zeros(spec.shape, /*requires_grad=*/true);
    if (spec.init_bound > 0.0) {
      for (double& v : tensor->values) v = (2.0 * rng.uniform() - 1.0) * spec.init_bound;
    }
    params.tensors.push_back(std::move(tensor));
    params.names.push_back(spec.name);
  }
  return params;
}

TensorPtr gated_block(Tape& tape, const TensorPtr& x, const TensorPtr& weight,
                      const TensorPtr& bias) {
  TensorPtr gate = tape.sigmoid(tape.conv2d(x, weight, bias, 1, 1, Padding::kSame));
  return tape.mul(x, gate);
}

Network::Network(NetworkConfig config, ModelParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const std::vector<ParamSpec> specs = expected_params(config_);
  if (specs.size() != params_.tensors.size() || specs.size() != params_.names.size()) {
    throw ConfigMismatch("parameter count " + std::to_string(params_.tensors.size()) +
                         " does not match the architecture (" + std::to_string(specs.size()) +
                         " tensors)");
  }
  for (size_t i = 0; i < specs.size(); ++i) {
    if (params_.names[i] != specs[i].name) {
      throw ConfigMismatch("parameter " + std::to_string(i) + " is named '" + params_.names[i] +
                           "', expected '" + specs[i].name + "'");
    }
    if (params_.tensors[i]->shape != specs[i].shape) {
      throw ConfigMismatch("parameter '" + specs[i].name + "' has an unexpected shape");
    }
  }
}

TensorPtr Network::forward(Tape& tape, const TensorPtr& input, const mixup::MixPlan* plan,
                           bool training, Rng* dropout_rng) const {
  if (input->rank() != 4) throw ShapeMismatch("network input must be [B, D, H, W]");
  if (input->dim(1) != config_.layers.front().in_depth) {
    throw ShapeMismatch("network input depth " + std::to_string(input->dim(1)) +
                        ", expected " + std::to_string(config_.layers.front().in_depth));
  }
  if (input->dim(2) != config_.input_height) {
    throw ShapeMismatch("network input height " + std::to_string(input->dim(2)) +
                        ", expected " + std::to_string(config_.input_height));
  }
  const bool mixing = plan != nullptr && plan->enabled;
  if (mixing) {
    if (plan->batch_size() != input->dim(0)) {
      throw ShapeMismatch("mix plan covers " + std::to_string(plan->batch_size()) +
                          " samples, batch has " + std::to_string(input->dim(0)));
    }
    if (plan->depth < 0 || plan->depth > config_.max_mix_ordinal()) {
      throw InvalidDepth("mix depth " + std::to_string(plan->depth) +
                         " is not a convolutional ordinal of this stack");
    }
  }
  const bool dropping = training && config_.dropout > 0.0;
  if (dropping && dropout_rng == nullptr) {
    throw InvalidConfig("training with dropout requires a dropout RNG");
  }

  auto maybe_mix = [&](int ordinal, const TensorPtr& x) {
    if (mixing && ordinal == plan->depth) {
      return tape.mix_batch(x, plan->partner_rows(), plan->weight_rows());
    }
    return x;
  };

  TensorPtr x = maybe_mix(0, input);
  size_t p = 0;  // cursor into params_, advanced in expected_params order
  auto next = [&]() -> const TensorPtr& { return params_.tensors[p++]; };
  for (const LayerSpec& layer : config_.layers) {
    switch (layer.kind) {
      case LayerKind::kTiling:
        x = tape.space_to_depth(x, layer.filter_h, layer.filter_w);
        break;
      case LayerKind::kConv: {
        const TensorPtr& weight = next();
        const TensorPtr& bias = next();
        x = tape.tanh_act(
            tape.conv2d(x, weight, bias, layer.stride_h, layer.stride_w, conv_padding(layer)));
        x = maybe_mix(layer.conv_ordinal, x);
        break;
      }
      case LayerKind::kGatedConv: {
        const TensorPtr& weight = next();
        const TensorPtr& bias = next();
        x = gated_block(tape, x, weight, bias);
        x = maybe_mix(layer.conv_ordinal, x);
        break;
      }
      case LayerKind::kMaxPool:
        x = tape.max_pool(x, layer.filter_h, layer.filter_w, layer.stride_h, layer.stride_w);
        x = tape.collapse_height(x);  // [B,D,1,W] -> [B,T,D]
        break;
      case LayerKind::kDropout:
        if (dropping) x = tape.dropout(x, config_.dropout, true, *dropout_rng);
        break;
      case LayerKind::kBlstm: {
        autodiff::LstmParams fw{next(), next(), next()};
        autodiff::LstmParams bw{next(), next(), next()};
        x = tape.blstm(x, fw, bw, layer.out_depth / 2);
        break;
      }
      case LayerKind::kLinear: {
        const TensorPtr& weight = next();
        const TensorPtr& bias = next();
        x = tape.tanh_act(tape.affine(x, weight, bias));
        break;
      }
      case LayerKind::kOutputProjection: {
        const TensorPtr& weight = next();
        const TensorPtr& bias = next();
        x = tape.affine(x, weight, bias);
        break;
      }
    }
  }
  return x;
}

int Network::output_length(int padded_width) const {
  int width = padded_width;
  for (const LayerSpec& layer : config_.layers) {
    switch (layer.kind) {
      case LayerKind::kTiling:
        if (width % layer.filter_w != 0) {
          throw ShapeMismatch("width " + std::to_string(padded_width) +
                              " is not a multiple of the tiling block width " +
                              std::to_string(layer.filter_w));
        }
        width /= layer.filter_w;
        break;
      case LayerKind::kConv:
      case LayerKind::kGatedConv:
        if (conv_padding(layer) == Padding::kSame) {
          width = (width + layer.stride_w - 1) / layer.stride_w;
        } else {
          if (width < layer.filter_w) {
            throw TooNarrow("width " + std::to_string(padded_width) +
                            " vanishes in the stride chain");
          }
          width = (width - layer.filter_w) / layer.stride_w + 1;
        }
        break;
      case LayerKind::kMaxPool:
        if (width < layer.filter_w) {
          throw TooNarrow("width " + std::to_string(padded_width) +
                          " vanishes in the stride chain");
        }
        width = (width - layer.filter_w) / layer.stride_w + 1;
        break;
      default:
        break;
    }
  }
  if (width < 1) throw TooNarrow("width " + std::to_string(padded_width) + " yields no frames");
  return width;
}

int Network::min_width() const {
  for (int width = config_.width_multiple();; width += config_.width_multiple()) {
    try {
      output_length(width);
      return width;
    } catch (const TooNarrow&) {
    }
  }
}

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

// Bounds-checked little-endian reader over a loaded checkpoint image.
class ByteReader {
 public:
  ByteReader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
    return v;
  }

  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(byte()) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string str(uint32_t len) {
    need(len);
    std::string s = data_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  unsigned char byte() { return static_cast<unsigned char>(data_[pos_++]); }

  void need(size_t n) {
    if (pos_ + n > data_.size()) throw IoError("checkpoint truncated: " + path_);
  }

  const std::string& data_;
  const std::string path_;
  size_t pos_ = 0;
};

constexpr char kMagic[4] = {'M', 'X', 'C', 'K'};
constexpr uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const NetworkConfig& config,
                     const ModelParams& params) {
  const std::string config_text = config.serialize();
  const std::string digest = config.digest();

  std::string blob;
  blob.append(kMagic, sizeof(kMagic));
  put_u32(blob, kVersion);
  put_u32(blob, static_cast<uint32_t>(digest.size()));
  blob += digest;
  put_u32(blob, static_cast<uint32_t>(config_text.size()));
  blob += config_text;
  put_u32(blob, static_cast<uint32_t>(params.tensors.size()));
  for (size_t i = 0; i < params.tensors.size(); ++i) {
    const Tensor& tensor = *params.tensors[i];
    put_u32(blob, static_cast<uint32_t>(params.names[i].size()));
    blob += params.names[i];
    put_u32(blob, static_cast<uint32_t>(tensor.rank()));
    for (int dim : tensor.shape) put_u32(blob, static_cast<uint32_t>(dim));
    for (double v : tensor.values) put_f64(blob, v);
  }

  // Write-then-rename so a crash never leaves a half-written checkpoint
  // under the final name.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot move '" + tmp + "' onto '" + path + "'");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string data = buffer.str();

  ByteReader reader(data, path);
  if (reader.str(4) != std::string(kMagic, sizeof(kMagic))) {
    throw IoError("'" + path + "' is not a checkpoint file");
  }
  const uint32_t version = reader.u32();
  if (version != kVersion) {
    throw IoError("checkpoint version " + std::to_string(version) + " unsupported");
  }
  const std::string digest = reader.str(reader.u32());
  const std::string config_text = reader.str(reader.u32());

  Checkpoint ckpt;
  ckpt.config = NetworkConfig::parse(config_text);
  if (ckpt.config.digest() != digest) {
    throw ConfigMismatch("checkpoint digest does not match its embedded architecture");
  }

  const uint32_t count = reader.u32();
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = reader.str(reader.u32());
    const uint32_t rank = reader.u32();
    std::vector<int> shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(reader.u32()));
    const int64_t size = Tensor::element_count(shape);
    std::vector<double> values(static_cast<size_t>(size));
    for (double& v : values) v = reader.f64();
    ckpt.params.tensors.push_back(
        Tensor::from(std::move(shape), std::move(values), /*requires_grad=*/true));
    ckpt.params.names.push_back(name);
  }
  if (!reader.exhausted()) throw IoError("trailing bytes in checkpoint '" + path + "'");

  // Surface wrong tensor sets as ConfigMismatch right here rather than at
  // first use.
  Network check(ckpt.config, ckpt.params);
  return {check.config(), std::move(ckpt.params)};
}

}  // namespace mixctc::model
