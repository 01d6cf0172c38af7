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

#ifndef MIXCTC_CTC_CTC_HPP
#define MIXCTC_CTC_CTC_HPP

#include <string>
#include <vector>

#include "autodiff/tape.hpp"
#include "common/errors.hpp"

namespace mixctc::ctc {

// Ordered character set. The blank class is implicit and always the last
// class index, so a vocabulary of C symbols scores M = C+1 classes.
class Vocabulary {
 public:
  explicit Vocabulary(std::string symbols);

  int classes() const { return static_cast<int>(symbols_.size()); }  // C
  int blank() const { return classes(); }
  int total() const { return classes() + 1; }  // M = C+1

  int index_of(char symbol) const;  // throws UnknownGlyph
  char symbol(int index) const;
  const std::string& symbols() const { return symbols_; }

 private:
  std::string symbols_;
  int index_by_char_[256];
};

// Target transcript as vocabulary indices; never contains the blank.
struct LabelSequence {
  std::vector<int> indices;

  static LabelSequence from_string(const std::string& text, const Vocabulary& v);
  std::string to_string(const Vocabulary& v) const;
  int length() const { return static_cast<int>(indices.size()); }
};

// Per-frame class distributions, row-major T x M with blank = M-1.
struct ProbSequence {
  int frames = 0;   // T
  int classes = 0;  // M = C+1
  std::vector<double> probs;

  static ProbSequence from(int frames, int classes, std::vector<double> probs);

  double at(int t, int c) const { return probs[static_cast<size_t>(t) * classes + c]; }

  // Each row must sum to 1 within 1e-9 with no negative entries.
  void validate() const;
};

// Blank-interleaved target [-, l1, -, l2, ..., lS, -] of length 2S+1.
std::vector<int> expand_targets(const LabelSequence& l, int blank);

// Shortest path that collapses to l: S plus one separating blank per
// adjacent repeated label. The alignment set is empty iff T is below this.
int min_path_length(const LabelSequence& l);

// Removes adjacent repeats, then blanks.
std::vector<int> collapse_path(const std::vector<int>& path, int blank);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad_probs;   // T x M, d loss / d y[t][c]
  std::vector<double> grad_scores;  // T x M, d loss / d a[t][c] where y = softmax(a)
};

// Exact negative log-probability of all alignments of l, with gradients,
// computed by the log-space forward-backward recursion.
LossGrad ctc_loss_grad(const ProbSequence& y, const LabelSequence& l);

// Enumeration oracle: sums the probability of every length-T path whose
// collapse equals l and returns the negative log of that total (the same
// convention as ctc_loss_grad). Treats rows as raw weights (no
// renormalisation), which lets the finite-difference companion perturb
// single entries.
double ctc_brute_force(const ProbSequence& y, const LabelSequence& l);

// Central differences of the enumeration oracle with respect to y.
std::vector<double> ctc_brute_force_grad(const ProbSequence& y, const LabelSequence& l,
                                         double step = 1e-6);

// Per-frame argmax (ties toward the lowest class index), collapse repeats,
// drop blanks.
LabelSequence greedy_decode(const ProbSequence& y, const Vocabulary& v);

// One weighted target for a batch item. Weight-0 terms are skipped without
// being evaluated, so a degenerate mixing plan is bit-identical to none.
struct LossTerm {
  LabelSequence label;
  double weight = 1.0;
};

// Softmax over the last axis of `logits` [B,T,M] composed with the alignment
// loss, recorded on the tape with exact logit gradients. Returns the sum over
// batch items of the weighted per-term losses; the caller normalises.
autodiff::TensorPtr tape_loss(autodiff::Tape& tape, const autodiff::TensorPtr& logits,
                              const std::vector<std::vector<LossTerm>>& terms);

}  // namespace mixctc::ctc

#endif  // MIXCTC_CTC_CTC_HPP
