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

#ifndef MIXCTC_SELFTEST_SELFTEST_HPP
#define MIXCTC_SELFTEST_SELFTEST_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mixctc::selftest {

// One property suite's outcome. `max_err` is the suite's headline statistic:
// the largest deviation it observed (loss difference, gradient error, KS
// distance, ...); `threshold` is the bound it was held to.
struct SuiteResult {
  std::string name;
  int cases = 0;
  double max_err = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct SelftestOptions {
  uint64_t seed = 1;
  int oracle_cases = 300;      // alignment-loss enumeration cross-check
  int gradient_cases = 60;     // analytic vs finite-difference loss gradients
  int sampler_draws = 100000;  // KS sample size
  int linearity_draws = 6;     // model-level weighted-loss linearity probes
  // Test fixture: negate the analytic gradients before comparing, proving
  // the gradient suite can actually fail when the math is wrong.
  bool flip_ctc_gradient_sign = false;
};

// The enumeration oracle: dynamic-programming loss vs brute-force path
// summation on random small instances; max_err = max |loss_dp - loss_brute|.
SuiteResult run_ctc_oracle(const SelftestOptions& options);

// Analytic loss gradients vs central finite differences of the enumerated
// loss, elementwise over every frame/class entry.
SuiteResult run_ctc_gradient(const SelftestOptions& options);

// Finite-difference checks of every differentiable primitive used by the
// network (activations, convolutions, pooling, recurrences, blending).
SuiteResult run_primitive_gradients(const SelftestOptions& options);

// Beta(1/2,1/2) draws against the arcsine CDF (2/pi)asin(sqrt(x)) by the
// Kolmogorov-Smirnov distance.
SuiteResult run_sampler_beta(const SelftestOptions& options);

// Affine-uniform draws on [0.1, 0.9]: hard range bounds and mean 0.5 +- 0.01.
SuiteResult run_sampler_uniform(const SelftestOptions& options);

// Model-level blend linearity: with features blended at a fixed depth, the
// two-label loss and every parameter gradient must equal the lambda-weighted
// combination of the single-label evaluations.
SuiteResult run_mixup_linearity(const SelftestOptions& options);

// Every suite in a fixed order; `emit`, when set, receives one formatted
// line per suite as it finishes.
std::vector<SuiteResult> run_all(const SelftestOptions& options,
                                 const std::function<void(const std::string&)>& emit = nullptr);

bool all_passed(const std::vector<SuiteResult>& results);

// "name cases=N max_err=E threshold=T PASS|FAIL", aligned for table output.
std::string format_line(const SuiteResult& result);

}  // namespace mixctc::selftest

#endif  // MIXCTC_SELFTEST_SELFTEST_HPP
