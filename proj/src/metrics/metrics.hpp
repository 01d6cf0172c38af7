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
//
// Edit-distance evaluation: Levenshtein distance and the micro-averaged
// character error rate (corpus edits over corpus reference characters).

#ifndef MIXCTC_METRICS_METRICS_HPP
#define MIXCTC_METRICS_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mixctc::metrics {

// Minimum insertions + deletions + substitutions (unit costs) turning a
// into b. Symmetric.
int64_t levenshtein(const std::string& a, const std::string& b);

struct LineResult {
  std::string reference;
  std::string prediction;
  int64_t edits = 0;
};

struct EvalReport {
  int64_t total_ref_chars = 0;
  int64_t total_edits = 0;
  double cer = 0.0;
  // True when the corpus had no reference characters at all; `cer` then
  // degrades to the raw edit count rather than dividing by zero.
  bool zero_reference = false;
  std::vector<LineResult> lines;
  // Mean per-line alignment loss, filled by evaluation drivers; the edit
  // metrics above do not depend on it.
  double mean_loss = 0.0;

  // "cer=<float> lines=<int> edits=<int>", the machine-readable contract.
  std::string summary_line() const;
  // Per-line TSV with a header row: reference, prediction, edits.
  std::string to_tsv() const;
};

// Micro-averaged CER over parallel prediction/reference lists.
// Throws LengthMismatch when the lists differ in size.
EvalReport cer(const std::vector<std::string>& predictions,
               const std::vector<std::string>& references);

}  // namespace mixctc::metrics

#endif  // MIXCTC_METRICS_METRICS_HPP
