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

#include <string>
#include <vector>

#include <doctest.h>

namespace {

using namespace mixctc;

// Reduced sample counts keep the unit run quick; the command-line harness
// and the acceptance gate run the full sizes.
selftest::SelftestOptions quick_options() {
  selftest::SelftestOptions options;
  options.oracle_cases = 40;
  options.gradient_cases = 10;
  options.sampler_draws = 20000;
  options.linearity_draws = 3;
  return options;
}

}  // namespace

TEST_SUITE("selftest") {

TEST_CASE("all property suites pass on a healthy build") {
  std::vector<std::string> lines;
  const auto results =
      selftest::run_all(quick_options(), [&](const std::string& line) { lines.push_back(line); });

  REQUIRE(results.size() == 6);
  CHECK(selftest::all_passed(results));
  CHECK(lines.size() == results.size());
  for (const auto& r : results) {
    CAPTURE(r.name);
    CHECK(r.pass);
    CHECK(r.cases > 0);
    CHECK(r.max_err <= r.threshold);
  }

  // The oracle suite's headline number is the worst loss disagreement
  // between the recursion and the enumeration, surfaced in its line.
  CHECK(results[0].name == "ctc-oracle");
  CHECK(lines[0].find("ctc-oracle") != std::string::npos);
  CHECK(lines[0].find("max_err") != std::string::npos);
  CHECK(lines[0].find("PASS") != std::string::npos);
}

TEST_CASE("an injected gradient sign flip makes the gradient suite fail") {
  auto options = quick_options();
  options.flip_ctc_gradient_sign = true;
  const auto broken = selftest::run_ctc_gradient(options);
  CHECK_FALSE(broken.pass);
  CHECK(broken.max_err > broken.threshold);
  CHECK(selftest::format_line(broken).find("FAIL") != std::string::npos);

  // The flag reaches only the gradient comparison; the loss oracle is blind
  // to it.
  CHECK(selftest::run_ctc_oracle(options).pass);
}

TEST_CASE("suite results are deterministic for a fixed seed") {
  const auto a = selftest::run_ctc_oracle(quick_options());
  const auto b = selftest::run_ctc_oracle(quick_options());
  CHECK(a.max_err == b.max_err);

  auto other = quick_options();
  other.seed = 2;
  const auto c = selftest::run_sampler_beta(quick_options());
  const auto d = selftest::run_sampler_beta(other);
  CHECK(c.max_err != d.max_err);  // different draws, different statistic
}

}  // TEST_SUITE
