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

#include "metrics/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "common/errors.hpp"

namespace mixctc::metrics {

int64_t levenshtein(const std::string& a, const std::string& b) {
  const size_t n = b.size();
  // Rolling single row: prev[j] is the distance between a[0..i) and b[0..j).
  std::vector<int64_t> row(n + 1);
  for (size_t j = 0; j <= n; ++j) row[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    int64_t diagonal = row[0];  // distance for (i-1, j-1)
    row[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= n; ++j) {
      const int64_t substitution = diagonal + (a[i - 1] == b[j - 1] ? 0 : 1);
      diagonal = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, substitution});
    }
  }
  return row[n];
}

std::string EvalReport::summary_line() const {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "cer=%.6f lines=%d edits=%lld", cer,
                static_cast<int>(lines.size()), static_cast<long long>(total_edits));
  return buf;
}

std::string EvalReport::to_tsv() const {
  std::ostringstream out;
  out << "reference\tprediction\tedits\n";
  for (const LineResult& line : lines) {
    out << line.reference << '\t' << line.prediction << '\t' << line.edits << '\n';
  }
  return out.str();
}

EvalReport cer(const std::vector<std::string>& predictions,
               const std::vector<std::string>& references) {
  if (predictions.size() != references.size()) {
    throw LengthMismatch("got " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(references.size()) + " references");
  }
  EvalReport report;
  for (size_t i = 0; i < references.size(); ++i) {
    const int64_t edits = levenshtein(predictions[i], references[i]);
    report.lines.push_back({references[i], predictions[i], edits});
    report.total_edits += edits;
    report.total_ref_chars += static_cast<int64_t>(references[i].size());
  }
  if (report.total_ref_chars > 0) {
    report.cer = static_cast<double>(report.total_edits) /
                 static_cast<double>(report.total_ref_chars);
  } else {
    // No reference characters anywhere: report raw edits and flag it.
    report.cer = static_cast<double>(report.total_edits);
    report.zero_reference = true;
  }
  return report;
}

}  // namespace mixctc::metrics
