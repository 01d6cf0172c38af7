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

#ifndef MIXCTC_AUTODIFF_TAPE_HPP
#define MIXCTC_AUTODIFF_TAPE_HPP

#include <functional>
#include <string>
#include <vector>

#include "autodiff/tensor.hpp"
#include "common/rng.hpp"

namespace mixctc::autodiff {

enum class Padding { kValid, kSame };

// Weights of one LSTM direction. Gate blocks are laid out [i f g o] along
// the second axis.
struct LstmParams {
  TensorPtr wx;  // [in_depth, 4*hidden]
  TensorPtr wh;  // [hidden, 4*hidden]
  TensorPtr b;   // [4*hidden]
};

// One recorded forward operation. The tape is an append-only topological
// order of the forward pass; backward replays it in exact reverse order.
struct TapeNode {
  const char* op;
  std::vector<TensorPtr> inputs;
  TensorPtr output;
  std::function<void()> backward;
};

// Reverse-mode tape over dense tensors. A tape is confined to one thread;
// tensors themselves are value-like and may move between threads.
class Tape {
 public:
  // --- elementwise ---
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr scale(const TensorPtr& a, double c);
  // Sum of all elements -> scalar of shape [1].
  TensorPtr sum(const TensorPtr& x);

  // --- activations ---
  TensorPtr sigmoid(const TensorPtr& x);
  TensorPtr tanh_act(const TensorPtr& x);
  // Softmax over the last (depth) axis; rows sum to 1.
  TensorPtr softmax_depth(const TensorPtr& x);

  // --- structural / network ops ---
  // input [B,D,H,W], kernel [D_out,D,kh,kw], bias [D_out] (may be null).
  TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel, const TensorPtr& bias,
                   int stride_h, int stride_w, Padding padding);
  TensorPtr max_pool(const TensorPtr& input, int win_h, int win_w, int stride_h, int stride_w);
  // 2x2-style tiling: [B,D,H,W] -> [B,D*bh*bw,H/bh,W/bw].
  TensorPtr space_to_depth(const TensorPtr& input, int block_h, int block_w);
  // [B,D,1,W] -> [B,W,D]; the width axis becomes the time axis.
  TensorPtr collapse_height(const TensorPtr& input);
  // x [B,T,Din] * w [Din,Dout] + b [Dout] -> [B,T,Dout].
  TensorPtr affine(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);
  // Bidirectional LSTM, directions concatenated along depth: [B,T,2*hidden].
  TensorPtr blstm(const TensorPtr& x, const LstmParams& forward, const LstmParams& backward,
                  int hidden);
  // Inverted dropout; identity when !training or rate == 0.
  TensorPtr dropout(const TensorPtr& x, double rate, bool training, Rng& rng);
  // Manifold mix across the batch axis: out[i] = sum_m weights[i][m] * x[src_m(i)]
  // with src_0(i) = i and src_m(i) = partners[m-1][i]. Zero weights are
  // skipped and a weight of exactly 1 copies, so endpoint plans are
  // bit-identical to no mixing.
  TensorPtr mix_batch(const TensorPtr& x, const std::vector<std::vector<int>>& partners,
                      const std::vector<std::vector<double>>& weights);

  // Registers a custom node (used by the CTC loss). `output` must have been
  // obtained from alloc_output.
  void record(const char* op, std::vector<TensorPtr> inputs, TensorPtr output,
              std::function<void()> backward);
  TensorPtr alloc_output(std::vector<int> shape, const std::vector<TensorPtr>& inputs);

  // Populates gradients of every requires_grad tensor reachable from `loss`.
  // Leaf gradients accumulate across calls; intermediate gradients are
  // recomputed per call.
  void backward(const TensorPtr& loss);

  size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<TapeNode> nodes_;
};

}  // namespace mixctc::autodiff

#endif  // MIXCTC_AUTODIFF_TAPE_HPP
