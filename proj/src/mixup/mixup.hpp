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

#ifndef MIXCTC_MIXUP_MIXUP_HPP
#define MIXCTC_MIXUP_MIXUP_HPP

#include <vector>

#include "autodiff/tape.hpp"
#include "common/rng.hpp"
#include "ctc/ctc.hpp"

namespace mixctc::mixup {

enum class LambdaDistribution { kBeta, kUniform };

// Settings for within-batch feature blending.
struct MixupConfig {
  bool enabled = true;
  LambdaDistribution distribution = LambdaDistribution::kBeta;
  double alpha = 0.5;      // symmetric beta parameter
  double uniform_lo = 0.0;
  double uniform_hi = 1.0;
  std::vector<int> positions = {0, 4, 8};  // candidate blend depths
  int n_way = 2;
  bool multiply_gradients = true;  // off: unweighted sum of the two losses
  bool allow_no_fusion = false;    // extra "blend nothing" batch outcome
  double no_fusion_prob = 0.25;
  // Test hook: >= 0 pins every sampled weight toward the sample itself.
  double force_lambda = -1.0;

  void validate() const;  // throws InvalidConfig
};

// One batch's blending decisions. A disabled plan is the identity: every
// sample keeps weight 1 on itself and nothing is evaluated twice, which keeps
// it bit-identical to training without this module.
struct MixPlan {
  bool enabled = false;
  int depth = 0;                 // chosen blend depth k, meaningful when enabled
  std::vector<int> pairing;      // partner permutation, pairing[i] != i
  std::vector<int> pairing2;     // second partner for 3-way plans, else empty
  std::vector<double> lambdas;   // per-sample weight on the sample itself
  std::vector<double> lambdas2;  // per-sample weight on pairing[i] (3-way), else empty
  std::vector<bool> skipped;     // marked when the loss had to drop a label

  int batch_size() const { return static_cast<int>(lambdas.size()); }

  // Rows for Tape::mix_batch; empty partner list when not enabled.
  std::vector<std::vector<int>> partner_rows() const;
  std::vector<std::vector<double>> weight_rows() const;
};

// One weight draw: Beta(1/2,1/2) by the arcsine inverse transform, other
// alphas by the gamma-ratio construction, or affine uniform(lo,hi).
double sample_lambda(Rng& rng, const MixupConfig& config);

// Draws one batch plan: a single depth from `positions` (with an extra
// no-fusion outcome when allowed), a uniform random derangement for pairing,
// and one lambda per sample. Throws BatchTooSmall when enabled and
// batch_size < n_way.
MixPlan make_plan(int batch_size, Rng& rng, const MixupConfig& config);

// Convex combination of same-shape features, recorded on the tape so every
// input receives its weighted share of the gradient. A weight of exactly 1
// returns that input unchanged and weight-0 inputs are skipped.
autodiff::TensorPtr interpolate_features(autodiff::Tape& tape,
                                         const std::vector<autodiff::TensorPtr>& features,
                                         const std::vector<double>& weights);
autodiff::TensorPtr interpolate_features(autodiff::Tape& tape, const autodiff::TensorPtr& h_i,
                                         const autodiff::TensorPtr& h_j, double lambda);

struct MixupCtcResult {
  ctc::LossGrad value;   // combined loss and gradients
  bool skipped = false;  // one label was infeasible and dropped
  double weight_i = 0.0;
  double weight_j = 0.0;
};

// Weighted two-label alignment loss on one probability sequence:
// lambda * L(y, l_i) + (1 - lambda) * L(y, l_j), or the unweighted sum when
// multiply_gradients is off. Exactly one infeasible label falls back to the
// feasible one alone with weight 1; two infeasible labels throw.
MixupCtcResult mixup_ctc_loss(const ctc::ProbSequence& y, const ctc::LabelSequence& l_i,
                              const ctc::LabelSequence& l_j, double lambda,
                              bool multiply_gradients);

// Mixed one-hot cross-entropy over a single distribution:
// -(lambda * log y[class_i] + (1 - lambda) * log y[class_j]).
double mixup_crossentropy_loss(const std::vector<double>& y_hat, int class_i, int class_j,
                               double lambda);

// Builds the per-sample weighted loss terms for a planned batch, applying
// the multiply-gradients setting and the infeasibility fallback; sets
// plan.skipped where a label had to be dropped. `frames` is the sequence
// length every sample in the batch is scored over. Samples whose every label
// is infeasible end up with no terms (the caller drops them from the mean).
std::vector<std::vector<ctc::LossTerm>> plan_loss_terms(
    MixPlan& plan, const std::vector<ctc::LabelSequence>& labels, int frames,
    bool multiply_gradients);

}  // namespace mixctc::mixup

#endif  // MIXCTC_MIXUP_MIXUP_HPP
