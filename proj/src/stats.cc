// Copyright 2026 The FedSim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedsim/stats.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "fedsim/errors.h"
#include "fedsim/rng.h"

namespace fedsim {

std::optional<double> FreqTable::Find(int word) const {
  auto it = counts.find(word);
  if (it == counts.end()) return std::nullopt;
  return it->second;
}

double FreqTable::Lookup(int word) const { return Find(word).value_or(floor); }

double FreqTable::MaxCount() const {
  double m = floor;
  for (const auto& [w, c] : counts) m = std::max(m, c);
  return m;
}

double AccTable::Lookup(int word) const {
  auto it = accuracy.find(word);
  return it == accuracy.end() ? 1.0 : it->second;
}

FreqTable DpHistogram(std::span<const WordSeq> client_words,
                      const DpHistogramOptions& options, uint64_t seed) {
  if (!(options.epsilon > 0.0)) {
    throw ConfigError("epsilon must be positive");
  }
  if (options.clip_per_client < 1) {
    throw ConfigError("clip_per_client must be >= 1");
  }
  if (!(options.floor > 0.0)) throw ConfigError("floor must be positive");

  std::map<int, double> exact;
  for (int w = 0; w < options.domain_size; ++w) exact[w] = 0.0;
  for (const WordSeq& words : client_words) {
    std::set<int> seen;
    for (int w : words) {
      if (static_cast<int>(seen.size()) == options.clip_per_client) break;
      if (seen.insert(w).second) exact[w] += 1.0;
    }
  }

  FreqTable table;
  table.epsilon = options.epsilon;
  table.floor = options.floor;
  Rng rng(seed);
  const double scale = options.clip_per_client / options.epsilon;
  for (const auto& [w, count] : exact) {
    const double noisy = std::nearbyint(count + rng.Laplace(scale));
    table.counts[w] = std::max(noisy, options.floor);
  }
  return table;
}

AccTable AccuracyTable(std::span<const WordSeq> references,
                       std::span<const WordSeq> incumbent_outputs) {
  if (references.empty()) throw ConfigError("empty evaluation set");
  if (references.size() != incumbent_outputs.size()) {
    throw ShapeError("reference and incumbent output counts differ");
  }
  std::map<int, std::pair<int64_t, int64_t>> hits;  // word -> (correct, total)
  for (size_t u = 0; u < references.size(); ++u) {
    const WordSeq& ref = references[u];
    const WordSeq& hyp = incumbent_outputs[u];
    if (ref.size() != hyp.size()) {
      throw ShapeError("incumbent output length differs from reference");
    }
    for (size_t p = 0; p < ref.size(); ++p) {
      auto& [correct, total] = hits[ref[p]];
      ++total;
      if (hyp[p] == ref[p]) ++correct;
    }
  }
  AccTable table;
  for (const auto& [w, ct] : hits) {
    const double acc = static_cast<double>(ct.first) / ct.second;
    table.accuracy[w] = std::clamp(acc, 0.0, 1.0);
  }
  return table;
}

int EditDistance(std::span<const int> hypothesis,
                 std::span<const int> reference) {
  const size_t n = hypothesis.size();
  const size_t m = reference.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (hypothesis[i - 1] == reference[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double Wer(std::span<const int> hypothesis, std::span<const int> reference) {
  if (reference.empty()) throw DataError("WER undefined for empty reference");
  return static_cast<double>(EditDistance(hypothesis, reference)) /
         reference.size();
}

std::optional<double> WerCounts::Rate() const {
  if (reference_words == 0) return std::nullopt;
  return static_cast<double>(errors) / reference_words;
}

WerReport EvaluateWer(const ParameterSet& params,
                      std::span<const Utterance> eval_set,
                      const CorrectedWordList& word_list, Execution exec) {
  const int64_t n = static_cast<int64_t>(eval_set.size());
  std::vector<int> errors(n);
#pragma omp parallel for schedule(static) if (exec == Execution::kParallel)
  for (int64_t u = 0; u < n; ++u) {
    const Utterance& utt = eval_set[u];
    errors[u] = EditDistance(Predict(params, utt.features), utt.truth);
  }
  WerReport report;
  for (int64_t u = 0; u < n; ++u) {
    const WordSeq& ref = eval_set[u].truth;
    report.general.errors += errors[u];
    report.general.reference_words += static_cast<int64_t>(ref.size());
    const bool in_target = std::any_of(ref.begin(), ref.end(), [&](int w) {
      return word_list.contains(w);
    });
    if (in_target) {
      report.target.errors += errors[u];
      report.target.reference_words += static_cast<int64_t>(ref.size());
    }
  }
  return report;
}

std::optional<double> TargetWer(const ParameterSet& params,
                                std::span<const Utterance> eval_set,
                                const CorrectedWordList& word_list) {
  if (word_list.empty()) throw ConfigError("corrected word list is empty");
  return EvaluateWer(params, eval_set, word_list).target_wer();
}

void WriteTable(std::ostream& os, const std::map<int, double>& table) {
  char buf[64];
  for (const auto& [w, v] : table) {
    std::snprintf(buf, sizeof(buf), "%d\t%.17g\n", w, v);
    os << buf;
  }
}

std::map<int, double> ReadTable(std::istream& is) {
  std::map<int, double> table;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("line " + std::to_string(line_no) + ": missing tab");
    }
    try {
      size_t used = 0;
      const int w = std::stoi(line.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("word id");
      const std::string value = line.substr(tab + 1);
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("value");
      table[w] = v;
    } catch (const std::logic_error&) {
      throw DataError("line " + std::to_string(line_no) + ": malformed entry");
    }
  }
  return table;
}

}  // namespace fedsim
