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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "mixup/mixup.hpp"
#include "test_support.hpp"

namespace {

using mixctc::BatchTooSmall;
using mixctc::InfeasibleAlignment;
using mixctc::InvalidConfig;
using mixctc::Rng;
using mixctc::ShapeMismatch;
namespace ctc = mixctc::ctc;
namespace mixup = mixctc::mixup;

// Kolmogorov-Smirnov distance between a sample and a closed-form CDF.
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
  }
  return d;
}

ctc::ProbSequence random_probs(int frames, int classes, Rng& rng) {
  std::vector<double> p(static_cast<size_t>(frames) * classes);
  for (int t = 0; t < frames; ++t) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      double v = rng.uniform(0.05, 1.0);
      p[static_cast<size_t>(t) * classes + c] = v;
      sum += v;
    }
    for (int c = 0; c < classes; ++c) p[static_cast<size_t>(t) * classes + c] /= sum;
  }
  return ctc::ProbSequence::from(frames, classes, std::move(p));
}

}  // namespace

TEST_SUITE("mixup") {

TEST_CASE("config invariants are enforced") {
  mixup::MixupConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_way = 4;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg.n_way = 2;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg.alpha = 0.5;
  cfg.positions.clear();
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg.enabled = false;
  CHECK_NOTHROW(cfg.validate());  // positions only required when enabled
  cfg.enabled = true;
  cfg.positions = {0};
  cfg.distribution = mixup::LambdaDistribution::kUniform;
  cfg.uniform_lo = 0.6;
  cfg.uniform_hi = 0.4;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

TEST_CASE("beta(1/2) draws match the arcsine distribution") {
  Rng rng(41);
  mixup::MixupConfig cfg;
  const int n = 100000;
  std::vector<double> draws(n);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    draws[i] = mixup::sample_lambda(rng, cfg);
    CHECK(draws[i] >= 0.0);
    CHECK(draws[i] <= 1.0);
    mean += draws[i];
  }
  mean /= n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.04));
  const double d = ks_distance(draws, [](double x) {
    return 2.0 / M_PI * std::asin(std::sqrt(std::clamp(x, 0.0, 1.0)));
  });
  CHECK(d < 0.01);
}

TEST_CASE("uniform lambda draws match the uniform CDF") {
  Rng rng(42);
  mixup::MixupConfig cfg;
  cfg.distribution = mixup::LambdaDistribution::kUniform;
  cfg.uniform_lo = 0.2;
  cfg.uniform_hi = 0.8;
  const int n = 100000;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) {
    draws[i] = mixup::sample_lambda(rng, cfg);
    CHECK(draws[i] >= 0.2);
    CHECK(draws[i] < 0.8);
  }
  const double d =
      ks_distance(draws, [](double x) { return std::clamp((x - 0.2) / 0.6, 0.0, 1.0); });
  CHECK(d < 0.01);
}

TEST_CASE("general beta draws have the right moments") {
  Rng rng(43);
  mixup::MixupConfig cfg;
  cfg.alpha = 2.0;  // Beta(2,2): mean 1/2, variance 1/20
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = mixup::sample_lambda(rng, cfg);
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(sum2 / n - mean * mean == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("forced lambda pins every draw") {
  Rng rng(44);
  mixup::MixupConfig cfg;
  cfg.force_lambda = 0.75;
  for (int i = 0; i < 5; ++i) CHECK(mixup::sample_lambda(rng, cfg) == 0.75);
}

TEST_CASE("disabled plans are the identity") {
  Rng rng(45);
  mixup::MixupConfig cfg;
  cfg.enabled = false;
  auto plan = mixup::make_plan(4, rng, cfg);
  CHECK_FALSE(plan.enabled);
  CHECK(plan.lambdas == std::vector<double>(4, 1.0));
  CHECK(plan.partner_rows().empty());
  auto w = plan.weight_rows();
  for (const auto& row : w) CHECK(row == std::vector<double>{1.0});
}

TEST_CASE("a two-sample batch can only swap") {
  Rng rng(46);
  mixup::MixupConfig cfg;
  cfg.positions = {0};
  auto plan = mixup::make_plan(2, rng, cfg);
  CHECK(plan.enabled);
  CHECK(plan.depth == 0);
  CHECK(plan.pairing == std::vector<int>{1, 0});
}

TEST_CASE("plans reject batches smaller than the blend arity") {
  Rng rng(47);
  mixup::MixupConfig cfg;
  CHECK_THROWS_AS(mixup::make_plan(1, rng, cfg), BatchTooSmall);
  cfg.n_way = 3;
  CHECK_THROWS_AS(mixup::make_plan(2, rng, cfg), BatchTooSmall);
}

TEST_CASE("plan statistics: depths uniform, pairings deranged, no-fusion rate") {
  Rng rng(48);
  mixup::MixupConfig cfg;
  const int trials = 10000;
  int depth_counts[3] = {0, 0, 0};
  for (int n = 0; n < trials; ++n) {
    auto plan = mixup::make_plan(6, rng, cfg);
    REQUIRE(plan.enabled);
    if (plan.depth == 0) ++depth_counts[0];
    if (plan.depth == 4) ++depth_counts[1];
    if (plan.depth == 8) ++depth_counts[2];
    std::vector<int> sorted = plan.pairing;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5});
    for (int i = 0; i < 6; ++i) {
      CHECK(plan.pairing[i] != i);
      CHECK(plan.lambdas[i] >= 0.0);
      CHECK(plan.lambdas[i] <= 1.0);
    }
  }
  for (int c : depth_counts) {
    CHECK(static_cast<double>(c) / trials == doctest::Approx(1.0 / 3).epsilon(0.06));
  }

  cfg.allow_no_fusion = true;
  cfg.no_fusion_prob = 0.25;
  int unfused = 0;
  for (int n = 0; n < trials; ++n) {
    if (!mixup::make_plan(6, rng, cfg).enabled) ++unfused;
  }
  CHECK(static_cast<double>(unfused) / trials == doctest::Approx(0.25).epsilon(0.08));
}

TEST_CASE("three-way plans use two disjoint partner permutations") {
  Rng rng(49);
  mixup::MixupConfig cfg;
  cfg.n_way = 3;
  for (int n = 0; n < 200; ++n) {
    auto plan = mixup::make_plan(5, rng, cfg);
    REQUIRE(plan.enabled);
    for (int i = 0; i < 5; ++i) {
      CHECK(plan.pairing[i] != i);
      CHECK(plan.pairing2[i] != i);
      CHECK(plan.pairing2[i] != plan.pairing[i]);
      const double sum = plan.lambdas[i] + plan.lambdas2[i];
      CHECK(sum <= 1.0 + 1e-12);
      CHECK(plan.lambdas[i] >= 0.0);
      CHECK(plan.lambdas2[i] >= 0.0);
    }
    auto rows = plan.weight_rows();
    for (const auto& row : rows) {
      CHECK(row.size() == 3);
      CHECK(row[0] + row[1] + row[2] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("feature interpolation endpoints, envelope, and gradients") {
  Rng rng(50);
  mixctc::autodiff::Tape tape;

  auto four = mixctc::autodiff::Tensor::from({1}, {4.0});
  auto eight = mixctc::autodiff::Tensor::from({1}, {8.0});
  auto blended = mixup::interpolate_features(tape, four, eight, 0.25);
  CHECK(blended->values[0] == doctest::Approx(7.0));

  auto a = test_support::random_leaf({2, 3}, rng);
  auto b = test_support::random_leaf({2, 3}, rng);
  // lambda = 1 passes the first input through untouched.
  CHECK(mixup::interpolate_features(tape, a, b, 1.0).get() == a.get());
  CHECK(mixup::interpolate_features(tape, a, b, 0.0).get() == b.get());

  // Equal inputs are a fixed point for every lambda.
  auto same = mixup::interpolate_features(tape, a, a, 0.37);
  for (int64_t i = 0; i < a->size(); ++i) {
    CHECK(same->values[i] == doctest::Approx(a->values[i]).epsilon(1e-15));
  }

  // Convexity: the blend stays inside the elementwise envelope.
  auto mid = mixup::interpolate_features(tape, a, b, 0.3);
  for (int64_t i = 0; i < a->size(); ++i) {
    CHECK(mid->values[i] >= std::min(a->values[i], b->values[i]) - 1e-15);
    CHECK(mid->values[i] <= std::max(a->values[i], b->values[i]) + 1e-15);
  }

  auto c = mixctc::autodiff::Tensor::zeros({3, 2});
  CHECK_THROWS_AS(mixup::interpolate_features(tape, a, c, 0.5), ShapeMismatch);

  test_support::check_gradients(
      {a, b},
      [&](mixctc::autodiff::Tape& t) {
        return test_support::weighted_scalar(t, mixup::interpolate_features(t, a, b, 0.3));
      },
      1e-5);
}

TEST_CASE("mixed alignment loss is the weighted sum of single-label losses") {
  Rng rng(51);
  auto y = random_probs(6, 4, rng);
  ctc::LabelSequence l_i{{0, 1}};
  ctc::LabelSequence l_j{{2, 2}};
  const double lambda = 0.35;

  auto mixed = mixup::mixup_ctc_loss(y, l_i, l_j, lambda, true);
  auto single_i = ctc::ctc_loss_grad(y, l_i);
  auto single_j = ctc::ctc_loss_grad(y, l_j);
  CHECK_FALSE(mixed.skipped);
  CHECK(std::abs(mixed.value.loss - (lambda * single_i.loss + (1 - lambda) * single_j.loss)) <
        1e-12);
  for (size_t k = 0; k < mixed.value.grad_probs.size(); ++k) {
    CHECK(std::abs(mixed.value.grad_probs[k] -
                   (lambda * single_i.grad_probs[k] + (1 - lambda) * single_j.grad_probs[k])) <
          1e-12);
    CHECK(std::abs(mixed.value.grad_scores[k] -
                   (lambda * single_i.grad_scores[k] + (1 - lambda) * single_j.grad_scores[k])) <
          1e-12);
  }

  // Gradient-multiplication ablation: plain unweighted sum.
  auto summed = mixup::mixup_ctc_loss(y, l_i, l_j, lambda, false);
  CHECK(std::abs(summed.value.loss - (single_i.loss + single_j.loss)) < 1e-12);

  // Endpoint is bitwise the single-label evaluation.
  auto endpoint = mixup::mixup_ctc_loss(y, l_i, l_j, 1.0, true);
  CHECK(endpoint.value.loss == single_i.loss);
  CHECK(endpoint.value.grad_scores == single_i.grad_scores);

  // Equal labels collapse to the single loss for every lambda.
  auto degenerate = mixup::mixup_ctc_loss(y, l_i, l_i, 0.3, true);
  CHECK(std::abs(degenerate.value.loss - single_i.loss) < 1e-12);
}

TEST_CASE("mixed alignment loss falls back when one label cannot fit") {
  Rng rng(52);
  auto y = random_probs(3, 4, rng);
  ctc::LabelSequence fits{{0, 1}};
  ctc::LabelSequence too_long{{0, 0, 1, 1}};  // needs 6 frames

  auto fell_back = mixup::mixup_ctc_loss(y, too_long, fits, 0.9, true);
  CHECK(fell_back.skipped);
  CHECK(fell_back.weight_i == 0.0);
  CHECK(fell_back.weight_j == 1.0);
  CHECK(fell_back.value.loss == ctc::ctc_loss_grad(y, fits).loss);

  CHECK_THROWS_AS(mixup::mixup_ctc_loss(y, too_long, too_long, 0.5, true),
                  InfeasibleAlignment);
}

TEST_CASE("mixed cross-entropy equals the weighted single-class losses") {
  std::vector<double> one_hot = {0.0, 1.0, 0.0};
  CHECK(mixup::mixup_crossentropy_loss(one_hot, 1, 1, 1.0) == doctest::Approx(0.0));

  std::vector<double> y = {0.2, 0.5, 0.3};
  CHECK(mixup::mixup_crossentropy_loss(y, 1, 1, 0.5) == doctest::Approx(-std::log(0.5)));
  const double expected = -(0.3 * std::log(0.2) + 0.7 * std::log(0.3));
  CHECK(std::abs(mixup::mixup_crossentropy_loss(y, 0, 2, 0.3) - expected) < 1e-12);
}

TEST_CASE("planned loss terms apply weights, endpoints, and fallbacks") {
  ctc::LabelSequence a{{0}};
  ctc::LabelSequence b{{1, 1}};          // min path length 3
  ctc::LabelSequence huge{{0, 0, 0, 0}};  // min path length 7
  std::vector<ctc::LabelSequence> labels = {a, b, huge};

  mixup::MixPlan plan;
  plan.enabled = true;
  plan.depth = 4;
  plan.pairing = {1, 2, 0};
  plan.lambdas = {0.25, 1.0, 0.5};
  plan.skipped.assign(3, false);

  auto terms = mixup::plan_loss_terms(plan, labels, /*frames=*/4, /*multiply_gradients=*/true);
  // Sample 0: both labels fit; weighted pair.
  REQUIRE(terms[0].size() == 2);
  CHECK(terms[0][0].weight == 0.25);
  CHECK(terms[0][1].weight == 0.75);
  // Sample 1: lambda = 1 endpoint never evaluates the partner.
  REQUIRE(terms[1].size() == 1);
  CHECK(terms[1][0].weight == 1.0);
  CHECK(terms[1][0].label.indices == b.indices);
  CHECK_FALSE(plan.skipped[1]);
  // Sample 2: own label infeasible; partner takes full weight and the sample
  // is marked as having dropped a label.
  REQUIRE(terms[2].size() == 1);
  CHECK(terms[2][0].weight == 1.0);
  CHECK(terms[2][0].label.indices == a.indices);
  CHECK(plan.skipped[2]);

  // Both labels infeasible: no terms at all.
  std::vector<ctc::LabelSequence> hopeless = {huge, huge, a};
  mixup::MixPlan plan2;
  plan2.enabled = true;
  plan2.pairing = {1, 0, 1};
  plan2.lambdas = {0.5, 0.5, 0.5};
  plan2.skipped.assign(3, false);
  auto terms2 = mixup::plan_loss_terms(plan2, hopeless, 4, true);
  CHECK(terms2[0].empty());
  CHECK(plan2.skipped[0]);

  // Identity plan: one full-weight term per sample.
  mixup::MixPlan identity;
  identity.lambdas.assign(3, 1.0);
  identity.skipped.assign(3, false);
  auto terms3 = mixup::plan_loss_terms(identity, labels, 7, true);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(terms3[i].size() == 1);
    CHECK(terms3[i][0].weight == 1.0);
  }
}

}  // TEST_SUITE("mixup")
