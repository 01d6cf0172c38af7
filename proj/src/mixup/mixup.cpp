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

#include "mixup/mixup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mixctc::mixup {

namespace {

// Uniform random derangement by rejection; the acceptance rate tends to 1/e.
std::vector<int> random_derangement(int n, Rng& rng) {
  std::vector<int> p(static_cast<size_t>(n));
  for (;;) {
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(p);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) ok = p[i] != i;
    if (ok) return p;
  }
}

// Second partner permutation avoiding both the identity and the first
// pairing, so 3-way plans blend three distinct samples.
std::vector<int> second_derangement(const std::vector<int>& first, Rng& rng) {
  const int n = static_cast<int>(first.size());
  std::vector<int> p(static_cast<size_t>(n));
  for (;;) {
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(p);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) ok = p[i] != i && p[i] != first[i];
    if (ok) return p;
  }
}

bool feasible(const ctc::LabelSequence& l, int frames) {
  return frames >= ctc::min_path_length(l);
}

}  // namespace

void MixupConfig::validate() const {
  if (n_way != 2 && n_way != 3) throw InvalidConfig("mix n_way must be 2 or 3");
  if (distribution == LambdaDistribution::kBeta && alpha <= 0.0) {
    throw InvalidConfig("beta alpha must be positive");
  }
  if (distribution == LambdaDistribution::kUniform &&
      !(0.0 <= uniform_lo && uniform_lo < uniform_hi && uniform_hi <= 1.0)) {
    throw InvalidConfig("uniform lambda bounds must satisfy 0 <= lo < hi <= 1");
  }
  if (enabled && positions.empty()) {
    throw InvalidConfig("at least one blend depth is required when mixing is enabled");
  }
  for (int k : positions) {
    if (k < 0) throw InvalidConfig("blend depths must be nonnegative");
  }
  if (no_fusion_prob < 0.0 || no_fusion_prob >= 1.0) {
    throw InvalidConfig("no-fusion probability must be in [0, 1)");
  }
  if (force_lambda >= 0.0 && force_lambda > 1.0) {
    throw InvalidConfig("forced lambda must lie in [0, 1]");
  }
}

std::vector<std::vector<int>> MixPlan::partner_rows() const {
  std::vector<std::vector<int>> rows;
  if (!enabled) return rows;
  rows.push_back(pairing);
  if (!pairing2.empty()) rows.push_back(pairing2);
  return rows;
}

std::vector<std::vector<double>> MixPlan::weight_rows() const {
  std::vector<std::vector<double>> rows(lambdas.size());
  for (size_t i = 0; i < lambdas.size(); ++i) {
    if (!enabled) {
      rows[i] = {1.0};
    } else if (pairing2.empty()) {
      rows[i] = {lambdas[i], 1.0 - lambdas[i]};
    } else {
      rows[i] = {lambdas[i], lambdas2[i], 1.0 - lambdas[i] - lambdas2[i]};
    }
  }
  return rows;
}

double sample_lambda(Rng& rng, const MixupConfig& config) {
  if (config.force_lambda >= 0.0) return config.force_lambda;
  if (config.distribution == LambdaDistribution::kUniform) {
    return rng.uniform(config.uniform_lo, config.uniform_hi);
  }
  if (config.alpha == 0.5) {
    // Inverse transform of the arcsine CDF (2/pi) asin(sqrt(x)).
    const double s = std::sin(M_PI * rng.uniform() / 2.0);
    return s * s;
  }
  const double g1 = rng.gamma(config.alpha);
  const double g2 = rng.gamma(config.alpha);
  return g1 / (g1 + g2);
}

MixPlan make_plan(int batch_size, Rng& rng, const MixupConfig& config) {
  config.validate();
  if (batch_size < 1) throw BatchTooSmall("batch must not be empty");
  MixPlan plan;
  plan.lambdas.assign(static_cast<size_t>(batch_size), 1.0);
  plan.skipped.assign(static_cast<size_t>(batch_size), false);
  if (!config.enabled) return plan;
  if (batch_size < config.n_way) {
    throw BatchTooSmall("batch of " + std::to_string(batch_size) +
                        " cannot blend " + std::to_string(config.n_way) + " samples");
  }
  if (config.allow_no_fusion && rng.uniform() < config.no_fusion_prob) return plan;

  plan.enabled = true;
  plan.depth = config.positions[rng.uniform_int(static_cast<int>(config.positions.size()))];
  plan.pairing = random_derangement(batch_size, rng);
  if (config.n_way == 3) {
    plan.pairing2 = second_derangement(plan.pairing, rng);
    plan.lambdas2.assign(static_cast<size_t>(batch_size), 0.0);
  }
  for (int i = 0; i < batch_size; ++i) {
    if (config.n_way == 2) {
      plan.lambdas[static_cast<size_t>(i)] = sample_lambda(rng, config);
    } else if (config.force_lambda >= 0.0) {
      // Pin the self weight; split the remainder evenly over the partners.
      plan.lambdas[static_cast<size_t>(i)] = config.force_lambda;
      plan.lambdas2[static_cast<size_t>(i)] = (1.0 - config.force_lambda) / 2.0;
    } else {
      // Symmetric Dirichlet(alpha) by normalised gamma draws.
      const double a = config.distribution == LambdaDistribution::kBeta ? config.alpha : 1.0;
      const double g1 = rng.gamma(a), g2 = rng.gamma(a), g3 = rng.gamma(a);
      const double s = g1 + g2 + g3;
      plan.lambdas[static_cast<size_t>(i)] = g1 / s;
      plan.lambdas2[static_cast<size_t>(i)] = g2 / s;
    }
  }
  return plan;
}

autodiff::TensorPtr interpolate_features(autodiff::Tape& tape,
                                         const std::vector<autodiff::TensorPtr>& features,
                                         const std::vector<double>& weights) {
  if (features.empty() || features.size() != weights.size()) {
    throw ShapeMismatch("one weight per feature tensor is required");
  }
  for (const auto& f : features) {
    if (!f->same_shape(*features[0])) throw ShapeMismatch("blended features must match shapes");
  }
  // Endpoint plans pass one input through untouched (bit-identity).
  for (size_t m = 0; m < weights.size(); ++m) {
    bool rest_zero = true;
    for (size_t k = 0; k < weights.size(); ++k) rest_zero = rest_zero && (k == m || weights[k] == 0.0);
    if (weights[m] == 1.0 && rest_zero) return features[m];
  }

  auto out = tape.alloc_output(features[0]->shape, features);
  const int64_t n = out->size();
  for (size_t m = 0; m < features.size(); ++m) {
    const double w = weights[m];
    if (w == 0.0) continue;
    const auto& f = features[m];
    for (int64_t i = 0; i < n; ++i) out->values[i] += w * f->values[i];
  }
  auto w_copy = std::make_shared<std::vector<double>>(weights);
  tape.record("interpolate", features, out, [features, out, w_copy, n]() {
    for (size_t m = 0; m < features.size(); ++m) {
      const double w = (*w_copy)[m];
      if (w == 0.0 || !features[m]->requires_grad) continue;
      for (int64_t i = 0; i < n; ++i) features[m]->grad[i] += w * out->grad[i];
    }
  });
  return out;
}

autodiff::TensorPtr interpolate_features(autodiff::Tape& tape, const autodiff::TensorPtr& h_i,
                                         const autodiff::TensorPtr& h_j, double lambda) {
  return interpolate_features(tape, {h_i, h_j}, {lambda, 1.0 - lambda});
}

MixupCtcResult mixup_ctc_loss(const ctc::ProbSequence& y, const ctc::LabelSequence& l_i,
                              const ctc::LabelSequence& l_j, double lambda,
                              bool multiply_gradients) {
  const bool f_i = feasible(l_i, y.frames);
  const bool f_j = feasible(l_j, y.frames);
  if (!f_i && !f_j) {
    throw InfeasibleAlignment("neither label fits in " + std::to_string(y.frames) + " frames");
  }

  MixupCtcResult out;
  if (!f_i || !f_j) {
    // Unmix toward the feasible label.
    out.skipped = true;
    out.weight_i = f_i ? 1.0 : 0.0;
    out.weight_j = f_j ? 1.0 : 0.0;
    out.value = ctc::ctc_loss_grad(y, f_i ? l_i : l_j);
    return out;
  }

  out.weight_i = multiply_gradients ? lambda : 1.0;
  out.weight_j = multiply_gradients ? 1.0 - lambda : 1.0;

  const size_t n = y.probs.size();
  out.value.loss = 0.0;
  out.value.grad_probs.assign(n, 0.0);
  out.value.grad_scores.assign(n, 0.0);
  for (const auto& [label, weight] : {std::pair<const ctc::LabelSequence&, double>{l_i, out.weight_i},
                                      {l_j, out.weight_j}}) {
    if (weight == 0.0) continue;  // endpoint: the other term is never evaluated
    auto single = ctc::ctc_loss_grad(y, label);
    out.value.loss += weight * single.loss;
    for (size_t k = 0; k < n; ++k) {
      out.value.grad_probs[k] += weight * single.grad_probs[k];
      out.value.grad_scores[k] += weight * single.grad_scores[k];
    }
  }
  return out;
}

double mixup_crossentropy_loss(const std::vector<double>& y_hat, int class_i, int class_j,
                               double lambda) {
  const int m = static_cast<int>(y_hat.size());
  if (class_i < 0 || class_i >= m || class_j < 0 || class_j >= m) {
    throw UnknownGlyph("class index out of range");
  }
  const double log_i = std::log(y_hat[static_cast<size_t>(class_i)]);
  const double log_j = std::log(y_hat[static_cast<size_t>(class_j)]);
  return -(lambda * log_i + (1.0 - lambda) * log_j);
}

std::vector<std::vector<ctc::LossTerm>> plan_loss_terms(
    MixPlan& plan, const std::vector<ctc::LabelSequence>& labels, int frames,
    bool multiply_gradients) {
  const int b_n = plan.batch_size();
  if (static_cast<int>(labels.size()) != b_n) {
    throw ShapeMismatch("one label per planned sample is required");
  }
  std::vector<std::vector<ctc::LossTerm>> terms(static_cast<size_t>(b_n));
  for (int i = 0; i < b_n; ++i) {
    // Candidate labels and their pre-fallback weights for this sample.
    std::vector<std::pair<const ctc::LabelSequence*, double>> parts;
    if (!plan.enabled) {
      parts.push_back({&labels[static_cast<size_t>(i)], 1.0});
    } else {
      const double l1 = plan.lambdas[static_cast<size_t>(i)];
      if (plan.pairing2.empty()) {
        const double wi = multiply_gradients ? l1 : 1.0;
        const double wj = multiply_gradients ? 1.0 - l1 : 1.0;
        parts.push_back({&labels[static_cast<size_t>(i)], wi});
        parts.push_back({&labels[static_cast<size_t>(plan.pairing[i])], wj});
      } else {
        const double l2 = plan.lambdas2[static_cast<size_t>(i)];
        const double l3 = 1.0 - l1 - l2;
        parts.push_back({&labels[static_cast<size_t>(i)], multiply_gradients ? l1 : 1.0});
        parts.push_back(
            {&labels[static_cast<size_t>(plan.pairing[i])], multiply_gradients ? l2 : 1.0});
        parts.push_back(
            {&labels[static_cast<size_t>(plan.pairing2[i])], multiply_gradients ? l3 : 1.0});
      }
    }

    // Weight-zero parts are never evaluated, so they must also be invisible
    // to the fallback decision: an endpoint plan (lambda exactly 1) has to
    // stay bit-identical to no mixing, including the skip counter.
    bool active_feasible = true;
    for (const auto& [label, weight] : parts) {
      if (weight != 0.0 && !feasible(*label, frames)) active_feasible = false;
    }
    if (active_feasible) {
      for (const auto& [label, weight] : parts) {
        if (weight != 0.0) terms[static_cast<size_t>(i)].push_back({*label, weight});
      }
      continue;
    }

    // Some weighted label cannot fit: drop it and hand its share to the
    // feasible labels (a lone survivor takes weight 1).
    plan.skipped[static_cast<size_t>(i)] = true;
    std::vector<std::pair<const ctc::LabelSequence*, double>> survivors;
    double survivor_weight = 0.0;
    for (const auto& [label, weight] : parts) {
      if (feasible(*label, frames)) {
        survivors.push_back({label, weight});
        survivor_weight += weight;
      }
    }
    if (survivors.empty()) continue;  // the caller drops this sample from the mean
    for (const auto& [label, weight] : survivors) {
      double w;
      if (!multiply_gradients) {
        w = 1.0;
      } else if (survivor_weight > 0.0) {
        w = weight / survivor_weight;
      } else {
        w = 1.0 / static_cast<double>(survivors.size());
      }
      if (w == 0.0) continue;
      terms[static_cast<size_t>(i)].push_back({*label, w});
    }
  }
  return terms;
}

}  // namespace mixctc::mixup
