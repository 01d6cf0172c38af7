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

#include "ctc/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixctc::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Log-space forward-backward over the blank-interleaved lattice.
//
// alpha_bar_t(s) excludes the emission at time t from the prefix and
// beta_tilde_t(s) excludes it from the suffix, so for every t
//   p(l | y) = sum_s alpha_bar_t(s) * y[t][lp[s]] * beta_tilde_t(s)
// and therefore d p / d y[t][c] = sum_{s: lp[s] = c} alpha_bar_t(s) *
// beta_tilde_t(s) -- no division by y, well defined at y = 0.
struct ForwardBackward {
  double log_prob;
  std::vector<double> post;  // T x M: logsumexp_{s: lp[s]=c} (alpha_bar + beta_tilde)
};

ForwardBackward forward_backward(const std::vector<double>& logy, int T, int M,
                                 const std::vector<int>& lp) {
  const int U = static_cast<int>(lp.size());
  std::vector<double> la_bar(static_cast<size_t>(T) * U, kNegInf);
  std::vector<double> la(static_cast<size_t>(T) * U, kNegInf);
  la_bar[0] = 0.0;
  if (U > 1) la_bar[1] = 0.0;
  for (int s = 0; s < std::min(U, 2); ++s) la[s] = la_bar[s] + logy[lp[s]];
  for (int t = 1; t < T; ++t) {
    const double* prev = &la[static_cast<size_t>(t - 1) * U];
    double* bar = &la_bar[static_cast<size_t>(t) * U];
    double* cur = &la[static_cast<size_t>(t) * U];
    const double* ly = &logy[static_cast<size_t>(t) * M];
    for (int s = 0; s < U; ++s) {
      double acc = prev[s];
      if (s >= 1) acc = lse2(acc, prev[s - 1]);
      if (s >= 2 && lp[s] != M - 1 && lp[s] != lp[s - 2]) acc = lse2(acc, prev[s - 2]);
      bar[s] = acc;
      cur[s] = acc + ly[lp[s]];
    }
  }

  std::vector<double> lb(static_cast<size_t>(T) * U, kNegInf);
  {
    double* last = &lb[static_cast<size_t>(T - 1) * U];
    last[U - 1] = 0.0;
    if (U > 1) last[U - 2] = 0.0;
  }
  for (int t = T - 2; t >= 0; --t) {
    double* cur = &lb[static_cast<size_t>(t) * U];
    const double* next = &lb[static_cast<size_t>(t + 1) * U];
    const double* ly_next = &logy[static_cast<size_t>(t + 1) * M];
    for (int s = 0; s < U; ++s) {
      double acc = next[s] + ly_next[lp[s]];
      if (s + 1 < U) acc = lse2(acc, next[s + 1] + ly_next[lp[s + 1]]);
      if (s + 2 < U && lp[s + 2] != M - 1 && lp[s + 2] != lp[s]) {
        acc = lse2(acc, next[s + 2] + ly_next[lp[s + 2]]);
      }
      cur[s] = acc;
    }
  }

  ForwardBackward fb;
  fb.log_prob = la[static_cast<size_t>(T - 1) * U + (U - 1)];
  if (U > 1) fb.log_prob = lse2(fb.log_prob, la[static_cast<size_t>(T - 1) * U + (U - 2)]);

  fb.post.assign(static_cast<size_t>(T) * M, kNegInf);
  for (int t = 0; t < T; ++t) {
    double* row = &fb.post[static_cast<size_t>(t) * M];
    const double* bar = &la_bar[static_cast<size_t>(t) * U];
    const double* bt = &lb[static_cast<size_t>(t) * U];
    for (int s = 0; s < U; ++s) {
      if (bar[s] == kNegInf || bt[s] == kNegInf) continue;
      row[lp[s]] = lse2(row[lp[s]], bar[s] + bt[s]);
    }
  }
  return fb;
}

void check_label_range(const LabelSequence& l, int blank) {
  for (int idx : l.indices) {
    if (idx < 0 || idx >= blank) throw UnknownGlyph("label index out of class range");
  }
}

// Depth-first enumeration of the defining sum. `last` is the previous raw
// path symbol; `matched` is how much of the target the collapsed prefix
// covers. Branches that can no longer collapse to the target contribute
// nothing and are cut.
void enumerate_paths(const ProbSequence& y, const std::vector<int>& target, int t, int last,
                     int matched, double product, double* total) {
  if (product == 0.0) return;
  const int pending = static_cast<int>(target.size()) - matched;
  if (pending > y.frames - t) return;
  if (t == y.frames) {
    if (pending == 0) *total += product;
    return;
  }
  const int blank = y.classes - 1;
  for (int c = 0; c < y.classes; ++c) {
    int next_matched = matched;
    if (c != blank && c != last) {
      if (matched == static_cast<int>(target.size()) || target[matched] != c) continue;
      next_matched = matched + 1;
    }
    enumerate_paths(y, target, t + 1, c, next_matched, product * y.at(t, c), total);
  }
}

}  // namespace

Vocabulary::Vocabulary(std::string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw InvalidConfig("vocabulary must not be empty");
  std::fill(std::begin(index_by_char_), std::end(index_by_char_), -1);
  for (size_t i = 0; i < symbols_.size(); ++i) {
    const auto c = static_cast<unsigned char>(symbols_[i]);
    if (index_by_char_[c] != -1) {
      throw InvalidConfig(std::string("duplicate vocabulary symbol: '") + symbols_[i] + "'");
    }
    index_by_char_[c] = static_cast<int>(i);
  }
}

int Vocabulary::index_of(char symbol) const {
  const int idx = index_by_char_[static_cast<unsigned char>(symbol)];
  if (idx < 0) throw UnknownGlyph(std::string("symbol not in vocabulary: '") + symbol + "'");
  return idx;
}

char Vocabulary::symbol(int index) const {
  if (index < 0 || index >= classes()) throw UnknownGlyph("class index out of range");
  return symbols_[static_cast<size_t>(index)];
}

LabelSequence LabelSequence::from_string(const std::string& text, const Vocabulary& v) {
  LabelSequence l;
  l.indices.reserve(text.size());
  for (char c : text) l.indices.push_back(v.index_of(c));
  return l;
}

std::string LabelSequence::to_string(const Vocabulary& v) const {
  std::string out;
  out.reserve(indices.size());
  for (int idx : indices) out.push_back(v.symbol(idx));
  return out;
}

ProbSequence ProbSequence::from(int frames, int classes, std::vector<double> probs) {
  if (frames < 1) throw ShapeMismatch("probability sequence needs at least one frame");
  if (classes < 2) throw ShapeMismatch("probability sequence needs at least two classes");
  if (static_cast<int64_t>(probs.size()) != static_cast<int64_t>(frames) * classes) {
    throw ShapeMismatch("probability data length does not match frames x classes");
  }
  ProbSequence y;
  y.frames = frames;
  y.classes = classes;
  y.probs = std::move(probs);
  return y;
}

void ProbSequence::validate() const {
  for (int t = 0; t < frames; ++t) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      const double p = at(t, c);
      if (p < 0.0) throw ShapeMismatch("negative probability entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ShapeMismatch("probability row does not sum to 1");
    }
  }
}

std::vector<int> expand_targets(const LabelSequence& l, int blank) {
  std::vector<int> lp;
  lp.reserve(2 * l.indices.size() + 1);
  lp.push_back(blank);
  for (int idx : l.indices) {
    lp.push_back(idx);
    lp.push_back(blank);
  }
  return lp;
}

int min_path_length(const LabelSequence& l) {
  int repeats = 0;
  for (size_t i = 1; i < l.indices.size(); ++i) {
    if (l.indices[i] == l.indices[i - 1]) ++repeats;
  }
  return l.length() + repeats;
}

std::vector<int> collapse_path(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int last = -1;
  for (int c : path) {
    if (c != last && c != blank) out.push_back(c);
    last = c;
  }
  return out;
}

LossGrad ctc_loss_grad(const ProbSequence& y, const LabelSequence& l) {
  y.validate();
  const int T = y.frames, M = y.classes, blank = M - 1;
  check_label_range(l, blank);
  if (T < min_path_length(l)) {
    throw InfeasibleAlignment("label of minimum path length " +
                              std::to_string(min_path_length(l)) + " cannot align to " +
                              std::to_string(T) + " frames");
  }
  const auto lp = expand_targets(l, blank);
  std::vector<double> logy(y.probs.size());
  for (size_t i = 0; i < logy.size(); ++i) {
    logy[i] = y.probs[i] > 0.0 ? std::log(y.probs[i]) : kNegInf;
  }
  const auto fb = forward_backward(logy, T, M, lp);
  if (fb.log_prob == kNegInf) {
    throw NonFiniteLoss("alignment probability is exactly zero");
  }

  LossGrad out;
  out.loss = -fb.log_prob;
  out.grad_probs.assign(logy.size(), 0.0);
  out.grad_scores.assign(logy.size(), 0.0);
  for (size_t i = 0; i < logy.size(); ++i) {
    const double post = fb.post[i];
    out.grad_probs[i] = post == kNegInf ? 0.0 : -std::exp(post - fb.log_prob);
    // On-path emission mass y * exp(post - log p), summed in the exponent so
    // a large posterior against a tiny probability cannot overflow.
    const double on_path = post == kNegInf ? 0.0 : std::exp(logy[i] + post - fb.log_prob);
    out.grad_scores[i] = y.probs[i] - on_path;
  }
  return out;
}

double ctc_brute_force(const ProbSequence& y, const LabelSequence& l) {
  if (y.frames > 10 || y.classes - 1 > 5) {
    throw TooLarge("path enumeration is bounded to T <= 10 and C <= 5");
  }
  check_label_range(l, y.classes - 1);
  double total = 0.0;
  enumerate_paths(y, l.indices, 0, y.classes - 1, 0, 1.0, &total);
  return -std::log(total);
}

std::vector<double> ctc_brute_force_grad(const ProbSequence& y, const LabelSequence& l,
                                         double step) {
  std::vector<double> grad(y.probs.size());
  ProbSequence perturbed = y;
  for (size_t i = 0; i < y.probs.size(); ++i) {
    perturbed.probs[i] = y.probs[i] + step;
    const double plus = ctc_brute_force(perturbed, l);
    perturbed.probs[i] = y.probs[i] - step;
    const double minus = ctc_brute_force(perturbed, l);
    perturbed.probs[i] = y.probs[i];
    grad[i] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

LabelSequence greedy_decode(const ProbSequence& y, const Vocabulary& v) {
  if (v.total() != y.classes) {
    throw ShapeMismatch("vocabulary size does not match probability class count");
  }
  std::vector<int> best(static_cast<size_t>(y.frames));
  for (int t = 0; t < y.frames; ++t) {
    int arg = 0;
    double best_p = y.at(t, 0);
    for (int c = 1; c < y.classes; ++c) {
      if (y.at(t, c) > best_p) {
        best_p = y.at(t, c);
        arg = c;
      }
    }
    best[static_cast<size_t>(t)] = arg;
  }
  LabelSequence out;
  out.indices = collapse_path(best, v.blank());
  return out;
}

autodiff::TensorPtr tape_loss(autodiff::Tape& tape, const autodiff::TensorPtr& logits,
                              const std::vector<std::vector<LossTerm>>& terms) {
  if (logits->rank() != 3) throw ShapeMismatch("tape_loss expects [batch, time, classes] logits");
  const int b_n = logits->shape[0], T = logits->shape[1], M = logits->shape[2];
  if (static_cast<int>(terms.size()) != b_n) {
    throw ShapeMismatch("tape_loss needs one term list per batch item");
  }

  auto out = tape.alloc_output({1}, {logits});
  auto grad_buf = std::make_shared<std::vector<double>>(logits->values.size(), 0.0);

  const int64_t block = static_cast<int64_t>(T) * M;
  std::vector<double> logy(static_cast<size_t>(block));
  std::vector<double> probs(static_cast<size_t>(block));
  double total = 0.0;
  for (int b = 0; b < b_n; ++b) {
    bool active = false;
    for (const auto& term : terms[b]) active = active || term.weight != 0.0;
    if (!active) continue;

    const double* a = &logits->values[b * block];
    for (int t = 0; t < T; ++t) {
      const double* row = a + static_cast<int64_t>(t) * M;
      double mx = row[0];
      for (int c = 1; c < M; ++c) mx = std::max(mx, row[c]);
      double sum = 0.0;
      for (int c = 0; c < M; ++c) sum += std::exp(row[c] - mx);
      const double lz = mx + std::log(sum);
      for (int c = 0; c < M; ++c) {
        logy[static_cast<size_t>(t) * M + c] = row[c] - lz;
        probs[static_cast<size_t>(t) * M + c] = std::exp(row[c] - lz);
      }
    }

    for (const auto& term : terms[b]) {
      if (term.weight == 0.0) continue;  // never evaluated: endpoint bit-identity
      check_label_range(term.label, M - 1);
      if (T < min_path_length(term.label)) {
        throw InfeasibleAlignment("label of minimum path length " +
                                  std::to_string(min_path_length(term.label)) +
                                  " cannot align to " + std::to_string(T) + " frames");
      }
      const auto lp = expand_targets(term.label, M - 1);
      const auto fb = forward_backward(logy, T, M, lp);
      if (!std::isfinite(fb.log_prob)) {
        throw NonFiniteLoss("alignment probability underflowed to zero");
      }
      total += term.weight * -fb.log_prob;
      double* g = &(*grad_buf)[b * block];
      for (int64_t i = 0; i < block; ++i) {
        const double post = fb.post[i];
        const double on_path =
            post == kNegInf ? 0.0
                            : std::exp(logy[static_cast<size_t>(i)] + post - fb.log_prob);
        g[i] += term.weight * (probs[static_cast<size_t>(i)] - on_path);
      }
    }
  }
  out->values[0] = total;

  tape.record("ctc_loss", {logits}, out, [logits, out, grad_buf]() {
    if (!logits->requires_grad) return;
    const double g = out->grad[0];
    for (size_t i = 0; i < grad_buf->size(); ++i) logits->grad[i] += g * (*grad_buf)[i];
  });
  return out;
}

}  // namespace mixctc::ctc
