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

#include "selftest/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "autodiff/tape.hpp"
#include "common/rng.hpp"
#include "ctc/ctc.hpp"
#include "mixup/mixup.hpp"
#include "model/model.hpp"

namespace mixctc::selftest {
namespace {

using autodiff::Tape;
using autodiff::Tensor;
using autodiff::TensorPtr;

// Random per-frame distributions: positive entries, rows normalized to 1.
ctc::ProbSequence random_probs(int frames, int classes, Rng& rng) {
  std::vector<double> probs(static_cast<size_t>(frames) * classes);
  for (int t = 0; t < frames; ++t) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      const double v = rng.uniform() + 0.01;  // keep every entry well positive
      probs[static_cast<size_t>(t) * classes + c] = v;
      sum += v;
    }
    for (int c = 0; c < classes; ++c) probs[static_cast<size_t>(t) * classes + c] /= sum;
  }
  return ctc::ProbSequence::from(frames, classes, std::move(probs));
}

// Random label over `symbols` classes whose shortest alignment fits `frames`.
ctc::LabelSequence random_label(int frames, int symbols, int max_len, Rng& rng) {
  for (;;) {
    ctc::LabelSequence label;
    const int len = rng.uniform_int(max_len + 1);
    for (int s = 0; s < len; ++s) label.indices.push_back(rng.uniform_int(symbols));
    if (ctc::min_path_length(label) <= frames) return label;
  }
}

struct Instance {
  ctc::ProbSequence probs;
  ctc::LabelSequence label;
};

Instance random_instance(Rng& rng) {
  const int symbols = 1 + rng.uniform_int(4);  // C in 1..4
  const int frames = 2 + rng.uniform_int(7);   // T in 2..8
  Instance inst{random_probs(frames, symbols + 1, rng), {}};
  inst.label = random_label(frames, symbols, std::min(4, frames), rng);
  return inst;
}

// A differentiable scalar summary with fixed pseudo-random weights, so every
// output element influences the loss and gets a nonzero upstream gradient.
// The weights depend only on the shape: the finite-difference re-evaluations
// must see exactly the same scalar function as the analytic pass.
TensorPtr weighted_sum(Tape& tape, const TensorPtr& x) {
  Rng wrng(0x77656967687473ull + static_cast<uint64_t>(x->size()));
  std::vector<double> weights(static_cast<size_t>(x->size()));
  for (double& w : weights) w = wrng.uniform(-1.0, 1.0);
  return tape.sum(tape.mul(x, Tensor::from(x->shape, std::move(weights))));
}

// Central finite differences over every element of every leaf, against the
// analytic gradients of one backward pass. `build` must rebuild the graph
// from the leaves' current values on each call.
double max_gradient_error(const std::vector<TensorPtr>& leaves,
                          const std::function<TensorPtr(Tape&)>& build) {
  constexpr double kStep = 1e-6;
  Tape tape;
  const TensorPtr loss = build(tape);
  tape.backward(loss);

  double worst = 0.0;
  for (const TensorPtr& leaf : leaves) {
    const std::vector<double> analytic = leaf->grad;
    for (size_t i = 0; i < leaf->values.size(); ++i) {
      const double saved = leaf->values[i];
      leaf->values[i] = saved + kStep;
      Tape plus;
      const double up = build(plus)->scalar();
      leaf->values[i] = saved - kStep;
      Tape minus;
      const double down = build(minus)->scalar();
      leaf->values[i] = saved;
      const double fd = (up - down) / (2.0 * kStep);
      const double err = std::abs(analytic[i] - fd) / (1.0 + std::abs(fd));
      worst = std::max(worst, err);
    }
    leaf->zero_grad();
  }
  return worst;
}

}  // namespace

SuiteResult run_ctc_oracle(const SelftestOptions& options) {
  SuiteResult result{"ctc-oracle", options.oracle_cases, 0.0, 1e-9, false};
  Rng rng(splitmix64(options.seed ^ 0x6f7261636c65ull));
  for (int n = 0; n < options.oracle_cases; ++n) {
    const Instance inst = random_instance(rng);
    const double dp = ctc::ctc_loss_grad(inst.probs, inst.label).loss;
    const double brute = ctc::ctc_brute_force(inst.probs, inst.label);
    result.max_err = std::max(result.max_err, std::abs(dp - brute));
  }
  result.pass = result.max_err <= result.threshold;
  return result;
}

SuiteResult run_ctc_gradient(const SelftestOptions& options) {
  SuiteResult result{"ctc-gradient", options.gradient_cases, 0.0, 1e-5, false};
  Rng rng(splitmix64(options.seed ^ 0x677261646965ull));
  for (int n = 0; n < options.gradient_cases; ++n) {
    const Instance inst = random_instance(rng);
    const ctc::LossGrad analytic = ctc::ctc_loss_grad(inst.probs, inst.label);
    // Central differences of the enumerated loss w.r.t. each probability.
    const std::vector<double> fd = ctc::ctc_brute_force_grad(inst.probs, inst.label);
    const double sign = options.flip_ctc_gradient_sign ? -1.0 : 1.0;
    for (size_t i = 0; i < analytic.grad_probs.size(); ++i) {
      const double err =
          std::abs(sign * analytic.grad_probs[i] - fd[i]) / (1.0 + std::abs(fd[i]));
      result.max_err = std::max(result.max_err, err);
    }
  }
  result.pass = result.max_err <= result.threshold;
  return result;
}

SuiteResult run_primitive_gradients(const SelftestOptions& options) {
  SuiteResult result{"primitive-gradients", 0, 0.0, 1e-5, false};
  Rng rng(splitmix64(options.seed ^ 0x7072696d6974ull));

  auto leaf = [&](std::vector<int> shape) {
    const auto t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    for (double& v : t->values) v = rng.uniform(-1.0, 1.0);
    return t;
  };
  auto check = [&](const std::vector<TensorPtr>& leaves,
                   const std::function<TensorPtr(Tape&)>& build) {
    result.max_err = std::max(result.max_err, max_gradient_error(leaves, build));
    ++result.cases;
  };

  {
    const auto x = leaf({3, 4});
    check({x}, [&](Tape& t) { return weighted_sum(t, t.sigmoid(x)); });
  }
  {
    const auto x = leaf({3, 4});
    check({x}, [&](Tape& t) { return weighted_sum(t, t.tanh_act(x)); });
  }
  {
    const auto x = leaf({2, 3, 5});
    check({x}, [&](Tape& t) { return weighted_sum(t, t.softmax_depth(x)); });
  }
  {
    const auto x = leaf({1, 2, 4, 5});
    const auto k = leaf({3, 2, 3, 3});
    const auto b = leaf({3});
    check({x, k, b}, [&](Tape& t) {
      return weighted_sum(t, t.conv2d(x, k, b, 1, 1, autodiff::Padding::kSame));
    });
  }
  {
    const auto x = leaf({1, 2, 4, 6});
    const auto k = leaf({3, 2, 4, 2});
    const auto b = leaf({3});
    check({x, k, b}, [&](Tape& t) {
      return weighted_sum(t, t.conv2d(x, k, b, 4, 2, autodiff::Padding::kValid));
    });
  }
  {
    const auto x = leaf({1, 2, 4, 6});
    check({x}, [&](Tape& t) { return weighted_sum(t, t.max_pool(x, 2, 2, 2, 2)); });
  }
  {
    const auto x = leaf({1, 1, 4, 6});
    check({x}, [&](Tape& t) { return weighted_sum(t, t.space_to_depth(x, 2, 2)); });
  }
  {
    const auto x = leaf({2, 3, 1, 4});
    check({x}, [&](Tape& t) { return weighted_sum(t, t.collapse_height(x)); });
  }
  {
    const auto x = leaf({2, 3, 4});
    const auto w = leaf({4, 2});
    const auto b = leaf({2});
    check({x, w, b}, [&](Tape& t) { return weighted_sum(t, t.affine(x, w, b)); });
  }
  {
    const auto x = leaf({1, 3, 2});
    const autodiff::LstmParams fw{leaf({2, 8}), leaf({2, 8}), leaf({8})};
    const autodiff::LstmParams bw{leaf({2, 8}), leaf({2, 8}), leaf({8})};
    check({x, fw.wx, fw.wh, fw.b, bw.wx, bw.wh, bw.b},
          [&](Tape& t) { return weighted_sum(t, t.blstm(x, fw, bw, 2)); });
  }
  {
    const auto x = leaf({3, 2, 4});
    const std::vector<std::vector<int>> partners = {{1, 2, 0}};  // one row per extra source
    const std::vector<std::vector<double>> weights = {{0.3, 0.7}, {0.5, 0.5}, {0.9, 0.1}};
    check({x}, [&](Tape& t) { return weighted_sum(t, t.mix_batch(x, partners, weights)); });
  }

  result.pass = result.max_err <= result.threshold;
  return result;
}

SuiteResult run_sampler_beta(const SelftestOptions& options) {
  SuiteResult result{"sampler-beta-ks", options.sampler_draws, 0.0, 0.01, false};
  Rng rng(splitmix64(options.seed ^ 0x626574616b73ull));
  mixup::MixupConfig config;  // Beta(1/2,1/2) by default
  std::vector<double> draws(static_cast<size_t>(options.sampler_draws));
  for (double& d : draws) d = mixup::sample_lambda(rng, config);
  std::sort(draws.begin(), draws.end());
  // Kolmogorov-Smirnov distance to the arcsine CDF (2/pi)asin(sqrt(x)).
  const double n = static_cast<double>(draws.size());
  for (size_t i = 0; i < draws.size(); ++i) {
    const double cdf = (2.0 / M_PI) * std::asin(std::sqrt(draws[i]));
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    result.max_err = std::max({result.max_err, std::abs(cdf - lo), std::abs(cdf - hi)});
  }
  result.pass = result.max_err <= result.threshold;
  return result;
}

SuiteResult run_sampler_uniform(const SelftestOptions& options) {
  SuiteResult result{"sampler-uniform", options.sampler_draws, 0.0, 0.01, false};
  Rng rng(splitmix64(options.seed ^ 0x756e69666f72ull));
  mixup::MixupConfig config;
  config.distribution = mixup::LambdaDistribution::kUniform;
  config.uniform_lo = 0.1;
  config.uniform_hi = 0.9;
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < options.sampler_draws; ++i) {
    const double d = mixup::sample_lambda(rng, config);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    sum += d;
  }
  const double mean = sum / static_cast<double>(options.sampler_draws);
  result.max_err = std::abs(mean - 0.5);
  result.pass =
      lo >= config.uniform_lo && hi <= config.uniform_hi && result.max_err <= result.threshold;
  return result;
}

SuiteResult run_mixup_linearity(const SelftestOptions& options) {
  SuiteResult result{"mixup-linearity", options.linearity_draws, 0.0, 1e-10, false};
  Rng rng(splitmix64(options.seed ^ 0x6c696e656172ull));

  auto net_config = model::NetworkConfig::tiny_preset(3);
  net_config.dropout = 0.0;
  const model::Network net(net_config, model::build(net_config, rng));
  const std::vector<int> depths = {0, 4, 8};

  for (int draw = 0; draw < options.linearity_draws; ++draw) {
    // Random standardized-looking pair of lines and feasible random labels.
    const int width = 16 + 4 * rng.uniform_int(4);
    const auto images = Tensor::zeros({2, 1, net_config.input_height, width});
    for (double& v : images->values) v = rng.normal();
    const int frames = net.output_length(width);
    const std::vector<ctc::LabelSequence> labels = {
        random_label(frames, net_config.classes, 2, rng),
        random_label(frames, net_config.classes, 2, rng)};
    const double lambda = rng.uniform(0.05, 0.95);

    mixup::MixPlan plan;
    plan.enabled = true;
    plan.depth = depths[static_cast<size_t>(draw) % depths.size()];
    plan.pairing = {1, 0};
    plan.lambdas = {lambda, lambda};
    plan.skipped = {false, false};

    auto run = [&](const std::vector<std::vector<ctc::LossTerm>>& terms,
                   std::vector<double>& grads) {
      Tape tape;
      const auto logits = net.forward(tape, images, &plan, /*training=*/false, nullptr);
      const auto loss = ctc::tape_loss(tape, logits, terms);
      tape.backward(loss);
      grads.clear();
      for (const auto& tensor : net.params().tensors) {
        grads.insert(grads.end(), tensor->grad.begin(), tensor->grad.end());
        tensor->zero_grad();
      }
      return loss->scalar();
    };

    auto mixed_plan = plan;
    const auto mixed_terms = mixup::plan_loss_terms(mixed_plan, labels, frames, true);
    std::vector<double> g_mixed, g_self, g_cross;
    const double l_mixed = run(mixed_terms, g_mixed);
    const double l_self = run({{{labels[0], 1.0}}, {{labels[1], 1.0}}}, g_self);
    const double l_cross = run({{{labels[1], 1.0}}, {{labels[0], 1.0}}}, g_cross);

    const double l_expect = lambda * l_self + (1.0 - lambda) * l_cross;
    result.max_err =
        std::max(result.max_err, std::abs(l_mixed - l_expect) / (1.0 + std::abs(l_expect)));
    for (size_t i = 0; i < g_mixed.size(); ++i) {
      const double expect = lambda * g_self[i] + (1.0 - lambda) * g_cross[i];
      result.max_err =
          std::max(result.max_err, std::abs(g_mixed[i] - expect) / (1.0 + std::abs(expect)));
    }
  }

  result.pass = result.max_err <= result.threshold;
  return result;
}

std::vector<SuiteResult> run_all(const SelftestOptions& options,
                                 const std::function<void(const std::string&)>& emit) {
  std::vector<SuiteResult> results;
  SuiteResult (*const suites[])(const SelftestOptions&) = {
      run_ctc_oracle,     run_ctc_gradient,    run_primitive_gradients,
      run_sampler_beta,   run_sampler_uniform, run_mixup_linearity,
  };
  for (const auto& suite : suites) {
    results.push_back(suite(options));
    if (emit) emit(format_line(results.back()));
  }
  return results;
}

bool all_passed(const std::vector<SuiteResult>& results) {
  for (const SuiteResult& r : results) {
    if (!r.pass) return false;
  }
  return !results.empty();
}

std::string format_line(const SuiteResult& result) {
  char line[160];
  std::snprintf(line, sizeof line, "%-20s cases=%-6d max_err=%-12.3e threshold=%-8.0e %s",
                result.name.c_str(), result.cases, result.max_err, result.threshold,
                result.pass ? "PASS" : "FAIL");
  return line;
}

}  // namespace mixctc::selftest
