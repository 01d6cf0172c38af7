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

#include "autodiff/tape.hpp"
#include "common/config.hpp"
#include "common/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

namespace {

using mixctc::EmptyOutput;
using mixctc::NotScalar;
using mixctc::Rng;
using mixctc::ShapeMismatch;
using mixctc::autodiff::LstmParams;
using mixctc::autodiff::Padding;
using mixctc::autodiff::Tape;
using mixctc::autodiff::Tensor;
using mixctc::autodiff::TensorPtr;
using test_support::check_gradients;
using test_support::random_leaf;
using test_support::weighted_scalar;

// Plain per-step reference for one LSTM direction, zero-initialised state.
std::vector<double> lstm_reference(const std::vector<double>& x, int t_n, int d_in,
                                   const LstmParams& p, int hidden, bool reversed) {
  const int gates = 4 * hidden;
  std::vector<double> h(hidden, 0.0), c(hidden, 0.0), out(static_cast<size_t>(t_n) * hidden);
  for (int s = 0; s < t_n; ++s) {
    const int t = reversed ? t_n - 1 - s : s;
    std::vector<double> z(p.b->values.begin(), p.b->values.end());
    for (int i = 0; i < d_in; ++i)
      for (int j = 0; j < gates; ++j) z[j] += x[t * d_in + i] * p.wx->values[i * gates + j];
    for (int i = 0; i < hidden; ++i)
      for (int j = 0; j < gates; ++j) z[j] += h[i] * p.wh->values[i * gates + j];
    for (int k = 0; k < hidden; ++k) {
      const double iv = 1.0 / (1.0 + std::exp(-z[k]));
      const double fv = 1.0 / (1.0 + std::exp(-z[hidden + k]));
      const double gv = std::tanh(z[2 * hidden + k]);
      const double ov = 1.0 / (1.0 + std::exp(-z[3 * hidden + k]));
      c[k] = fv * c[k] + iv * gv;
      h[k] = ov * std::tanh(c[k]);
      out[static_cast<size_t>(t) * hidden + k] = h[k];
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("tensor factories validate shapes and data length") {
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeMismatch);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), ShapeMismatch);
  auto t = Tensor::full({2, 3}, 0.5);
  CHECK(t->size() == 6);
  CHECK(t->values[5] == 0.5);
  CHECK_THROWS_AS(t->scalar(), NotScalar);
}

TEST_CASE("backward seeds a bare leaf and accumulates across calls") {
  Tape tape;
  auto x = Tensor::from({1}, {3.0}, true);
  tape.backward(x);
  CHECK(x->grad[0] == doctest::Approx(1.0));
  tape.backward(x);
  CHECK(x->grad[0] == doctest::Approx(2.0));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tape tape;
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  auto y = tape.scale(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), NotScalar);
}

TEST_CASE("leaf gradients accumulate while intermediate gradients reset") {
  auto x = Tensor::from({2}, {1.5, -0.5}, true);
  Tape tape;
  auto y = tape.scale(x, 2.0);
  auto loss = tape.sum(y);
  tape.backward(loss);
  CHECK(x->grad[0] == doctest::Approx(2.0));
  CHECK(y->grad[0] == doctest::Approx(1.0));
  tape.backward(loss);
  CHECK(x->grad[0] == doctest::Approx(4.0));
  CHECK(y->grad[0] == doctest::Approx(1.0));
}

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(11);
  auto a = random_leaf({2, 3}, rng);
  auto b = random_leaf({2, 3}, rng);
  check_gradients(
      {a, b},
      [&](Tape& t) { return weighted_scalar(t, t.add(t.mul(a, b), t.scale(a, 0.7))); }, 1e-5);
}

TEST_CASE("activation gradients match finite differences") {
  Rng rng(12);
  auto x = random_leaf({2, 4}, rng, true, -2.0, 2.0);
  check_gradients({x}, [&](Tape& t) { return weighted_scalar(t, t.sigmoid(x)); }, 1e-4);
  check_gradients({x}, [&](Tape& t) { return weighted_scalar(t, t.tanh_act(x)); }, 1e-4);
  check_gradients({x}, [&](Tape& t) { return weighted_scalar(t, t.softmax_depth(x)); }, 1e-4);
}

TEST_CASE("softmax rows are normalised") {
  Rng rng(23);
  auto x = random_leaf({3, 5}, rng, false, -4.0, 4.0);
  Tape t;
  auto y = t.softmax_depth(x);
  for (int r = 0; r < 3; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 5; ++c) sum += y->values[r * 5 + c];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("conv2d matches a hand-computed correlation") {
  auto x = Tensor::from({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  auto k = Tensor::from({1, 1, 2, 2}, {1.0, 1.0, 1.0, 1.0});
  Tape t;
  auto y = t.conv2d(x, k, nullptr, 1, 1, Padding::kValid);
  CHECK(y->shape == std::vector<int>{1, 1, 1, 1});
  CHECK(y->values[0] == doctest::Approx(10.0));
}

TEST_CASE("conv2d valid stride-1 matches finite differences") {
  Rng rng(13);
  auto x = random_leaf({2, 2, 4, 5}, rng);
  auto k = random_leaf({3, 2, 3, 3}, rng, true, -0.5, 0.5);
  auto bias = random_leaf({3}, rng);
  check_gradients(
      {x, k, bias},
      [&](Tape& t) { return weighted_scalar(t, t.conv2d(x, k, bias, 1, 1, Padding::kValid)); },
      1e-5);
}

TEST_CASE("conv2d strided valid matches finite differences") {
  // The 4x2-kernel stride-(4,2) shape used by the downsampling stages.
  Rng rng(14);
  auto x = random_leaf({1, 2, 8, 6}, rng);
  auto k = random_leaf({3, 2, 4, 2}, rng, true, -0.5, 0.5);
  auto bias = random_leaf({3}, rng);
  check_gradients(
      {x, k, bias},
      [&](Tape& t) { return weighted_scalar(t, t.conv2d(x, k, bias, 4, 2, Padding::kValid)); },
      1e-5);
}

TEST_CASE("conv2d same padding preserves spatial size and matches finite differences") {
  Rng rng(15);
  auto x = random_leaf({1, 2, 4, 5}, rng);
  auto k = random_leaf({2, 2, 3, 3}, rng, true, -0.5, 0.5);
  Tape t0;
  auto y = t0.conv2d(x, k, nullptr, 1, 1, Padding::kSame);
  CHECK(y->shape == std::vector<int>{1, 2, 4, 5});
  check_gradients(
      {x, k},
      [&](Tape& t) { return weighted_scalar(t, t.conv2d(x, k, nullptr, 1, 1, Padding::kSame)); },
      1e-5);
}

TEST_CASE("conv2d rejects mismatched shapes") {
  auto x = Tensor::zeros({1, 2, 4, 4});
  auto k_bad_depth = Tensor::zeros({2, 3, 3, 3});
  auto k_too_big = Tensor::zeros({2, 2, 5, 5});
  Tape t;
  CHECK_THROWS_AS(t.conv2d(x, k_bad_depth, nullptr, 1, 1, Padding::kValid), ShapeMismatch);
  CHECK_THROWS_AS(t.conv2d(x, k_too_big, nullptr, 1, 1, Padding::kValid), EmptyOutput);
}

TEST_CASE("max_pool forward picks window maxima and matches finite differences") {
  Rng rng(16);
  auto x = random_leaf({2, 2, 4, 6}, rng);
  Tape t0;
  auto y = t0.max_pool(x, 4, 1, 4, 1);
  CHECK(y->shape == std::vector<int>{2, 2, 1, 6});
  for (int p = 0; p < 4; ++p) {
    for (int ox = 0; ox < 6; ++ox) {
      double best = x->values[p * 24 + ox];
      for (int wy = 1; wy < 4; ++wy) best = std::max(best, x->values[p * 24 + wy * 6 + ox]);
      CHECK(y->values[p * 6 + ox] == best);
    }
  }
  check_gradients({x}, [&](Tape& t) { return weighted_scalar(t, t.max_pool(x, 4, 1, 4, 1)); },
                  1e-5);
}

TEST_CASE("max_pool breaks ties toward the lowest index") {
  auto x = Tensor::from({1, 1, 2, 2}, {1.0, 1.0, 1.0, 1.0}, true);
  Tape t;
  auto y = t.max_pool(x, 2, 2, 2, 2);
  auto loss = t.sum(y);
  t.backward(loss);
  CHECK(x->grad[0] == 1.0);
  CHECK(x->grad[1] == 0.0);
  CHECK(x->grad[2] == 0.0);
  CHECK(x->grad[3] == 0.0);
}

TEST_CASE("space_to_depth rearranges blocks into depth") {
  auto x = Tensor::from({1, 1, 2, 4}, {0, 1, 2, 3, 4, 5, 6, 7}, true);
  Tape t;
  auto y = t.space_to_depth(x, 2, 2);
  CHECK(y->shape == std::vector<int>{1, 4, 1, 2});
  CHECK(y->values == std::vector<double>{0, 2, 1, 3, 4, 6, 5, 7});
  CHECK_THROWS_AS(t.space_to_depth(x, 3, 2), ShapeMismatch);
  check_gradients({x}, [&](Tape& tt) { return weighted_scalar(tt, tt.space_to_depth(x, 2, 2)); },
                  1e-5);
}

TEST_CASE("collapse_height turns width into time") {
  auto x = Tensor::from({1, 2, 1, 3}, {0, 1, 2, 3, 4, 5}, true);
  Tape t;
  auto y = t.collapse_height(x);
  CHECK(y->shape == std::vector<int>{1, 3, 2});
  CHECK(y->values == std::vector<double>{0, 3, 1, 4, 2, 5});
  auto tall = Tensor::zeros({1, 2, 2, 3});
  CHECK_THROWS_AS(t.collapse_height(tall), ShapeMismatch);
  check_gradients({x}, [&](Tape& tt) { return weighted_scalar(tt, tt.collapse_height(x)); },
                  1e-5);
}

TEST_CASE("affine matches finite differences") {
  Rng rng(17);
  auto x = random_leaf({2, 3, 4}, rng);
  auto w = random_leaf({4, 5}, rng, true, -0.5, 0.5);
  auto b = random_leaf({5}, rng);
  check_gradients({x, w, b},
                  [&](Tape& t) { return weighted_scalar(t, t.affine(x, w, b)); }, 1e-5);
}

TEST_CASE("blstm halves match a per-step reference") {
  Rng rng(18);
  const int b_n = 2, t_n = 4, d_in = 3, hidden = 2;
  auto x = random_leaf({b_n, t_n, d_in}, rng, false);
  auto make_dir = [&]() {
    return LstmParams{random_leaf({d_in, 4 * hidden}, rng, false, -0.5, 0.5),
                      random_leaf({hidden, 4 * hidden}, rng, false, -0.5, 0.5),
                      random_leaf({4 * hidden}, rng, false, -0.2, 0.2)};
  };
  LstmParams fwd = make_dir(), bwd = make_dir();
  Tape t;
  auto y = t.blstm(x, fwd, bwd, hidden);
  CHECK(y->shape == std::vector<int>{b_n, t_n, 2 * hidden});
  for (int b = 0; b < b_n; ++b) {
    std::vector<double> xb(x->values.begin() + b * t_n * d_in,
                           x->values.begin() + (b + 1) * t_n * d_in);
    auto ref_f = lstm_reference(xb, t_n, d_in, fwd, hidden, false);
    auto ref_b = lstm_reference(xb, t_n, d_in, bwd, hidden, true);
    for (int tt = 0; tt < t_n; ++tt) {
      for (int k = 0; k < hidden; ++k) {
        const double* row = &y->values[(b * t_n + tt) * 2 * hidden];
        CHECK(row[k] == doctest::Approx(ref_f[tt * hidden + k]).epsilon(1e-12));
        CHECK(row[hidden + k] == doctest::Approx(ref_b[tt * hidden + k]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("blstm gradients match finite differences") {
  Rng rng(19);
  const int d_in = 3, hidden = 2;
  auto x = random_leaf({2, 3, d_in}, rng);
  auto make_dir = [&]() {
    return LstmParams{random_leaf({d_in, 4 * hidden}, rng, true, -0.5, 0.5),
                      random_leaf({hidden, 4 * hidden}, rng, true, -0.5, 0.5),
                      random_leaf({4 * hidden}, rng, true, -0.2, 0.2)};
  };
  LstmParams fwd = make_dir(), bwd = make_dir();
  check_gradients({x, fwd.wx, fwd.wh, fwd.b, bwd.wx, bwd.wh, bwd.b},
                  [&](Tape& t) { return weighted_scalar(t, t.blstm(x, fwd, bwd, hidden)); },
                  1e-4);
}

TEST_CASE("dropout is identity in eval mode and rescales kept units in training") {
  Rng rng(20);
  auto x = random_leaf({1, 1000}, rng, true, 0.5, 1.5);
  Tape t;
  Rng drop_rng(5);
  auto y_eval = t.dropout(x, 0.5, false, drop_rng);
  CHECK(y_eval.get() == x.get());
  auto y = t.dropout(x, 0.5, true, drop_rng);
  int kept = 0;
  for (int i = 0; i < 1000; ++i) {
    if (y->values[i] != 0.0) {
      ++kept;
      CHECK(y->values[i] == doctest::Approx(2.0 * x->values[i]));
    }
  }
  CHECK(kept > 400);
  CHECK(kept < 600);
}

TEST_CASE("dropout gradients match finite differences under a fixed mask") {
  Rng rng(21);
  auto x = random_leaf({2, 6}, rng);
  check_gradients({x},
                  [&](Tape& t) {
                    Rng mask_rng(77);  // identical mask on every rebuild
                    return weighted_scalar(t, t.dropout(x, 0.25, true, mask_rng));
                  },
                  1e-5);
}

TEST_CASE("mix_batch blends rows and keeps endpoints bit-identical") {
  Rng rng(22);
  auto x = random_leaf({3, 2, 2, 2}, rng);
  std::vector<std::vector<int>> partners = {{1, 2, 0}};
  std::vector<std::vector<double>> weights = {{0.3, 0.7}, {1.0, 0.0}, {0.0, 1.0}};
  Tape t0;
  auto y = t0.mix_batch(x, partners, weights);
  const int64_t plane = 8;
  for (int64_t k = 0; k < plane; ++k) {
    CHECK(y->values[k] == doctest::Approx(0.3 * x->values[k] + 0.7 * x->values[plane + k]));
    // Weight-1 terms copy; weight-0 terms are skipped entirely.
    CHECK(y->values[plane + k] == x->values[plane + k]);
    CHECK(y->values[2 * plane + k] == x->values[k]);
  }
  check_gradients(
      {x}, [&](Tape& t) { return weighted_scalar(t, t.mix_batch(x, partners, weights)); },
      1e-5);
}

}  // TEST_SUITE("autodiff")

TEST_SUITE("common") {

TEST_CASE("splitmix64 matches the reference stream") {
  CHECK(mixctc::splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(mixctc::splitmix64(1) != mixctc::splitmix64(0));
}

TEST_CASE("rng distributions have the expected support and moments") {
  Rng rng(42);
  const int n = 50000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(sum2 / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12.0).epsilon(0.05));

  double nsum = 0.0, nsum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal();
    nsum += v;
    nsum2 += v * v;
  }
  CHECK(nsum / n == doctest::Approx(0.0).epsilon(0.05));
  CHECK(nsum2 / n == doctest::Approx(1.0).epsilon(0.05));

  // Gamma(alpha) has mean alpha and variance alpha.
  for (double alpha : {0.5, 2.5}) {
    double gsum = 0.0, gsum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      double g = rng.gamma(alpha);
      CHECK(g > 0.0);
      gsum += g;
      gsum2 += g * g;
    }
    double mean = gsum / n;
    CHECK(mean == doctest::Approx(alpha).epsilon(0.05));
    CHECK(gsum2 / n - mean * mean == doctest::Approx(alpha).epsilon(0.10));
  }

  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_int(5)];
  for (int c : counts) CHECK(c == doctest::Approx(n / 5.0).epsilon(0.05));
}

TEST_CASE("rng shuffle produces a permutation and is seed-deterministic") {
  std::vector<int> a{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> b = a;
  Rng r1(9), r2(9);
  r1.shuffle(a);
  r2.shuffle(b);
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("key=value config round-trips and validates") {
  auto cfg = mixctc::KeyValueConfig::parse("# comment\nalpha = 0.5\nname=run1 # trailing\n\n");
  CHECK(cfg.get("name", "") == "run1");
  CHECK(cfg.get_double("alpha", 0.0) == doctest::Approx(0.5));
  cfg.set_int("epochs", 12);
  cfg.set_bool("mix", true);
  auto round = mixctc::KeyValueConfig::parse(cfg.serialize());
  CHECK(round.get_int("epochs", 0) == 12);
  CHECK(round.get_bool("mix", false) == true);
  CHECK(round.get("alpha", "") == cfg.get("alpha", ""));
  CHECK_THROWS_AS(mixctc::KeyValueConfig::parse("no equals sign"), mixctc::InvalidConfig);
  CHECK_THROWS_AS(cfg.require("missing"), mixctc::InvalidConfig);
  CHECK_THROWS_AS(cfg.reject_unknown_keys({"alpha", "name"}), mixctc::InvalidConfig);
}

}  // TEST_SUITE("common")
