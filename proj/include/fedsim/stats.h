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

#ifndef FEDSIM_STATS_H_
#define FEDSIM_STATS_H_

// Word statistics used by weighted aggregation (differentially private
// frequency table, incumbent accuracy table) and word error rate metrics.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedsim/execution.h"
#include "fedsim/model.h"

namespace fedsim {

using WordSeq = std::vector<int>;

// Noisy per-word counts. Every stored value is >= floor.
struct FreqTable {
  std::map<int, double> counts;
  double epsilon = 0.0;
  double floor = 1.0;

  std::optional<double> Find(int word) const;
  // Stored count, or `floor` for words not in the table.
  double Lookup(int word) const;
  // Largest stored count, or `floor` when empty.
  double MaxCount() const;
};

// Per-word accuracy of the incumbent transcriber, values in [0, 1].
struct AccTable {
  std::map<int, double> accuracy;

  // Words never seen in the evaluation data count as recognized well.
  double Lookup(int word) const;
};

// The set of corrected words defining the target distribution.
using CorrectedWordList = std::set<int>;

struct DpHistogramOptions {
  double epsilon = 1.0;
  int clip_per_client = 1;
  double floor = 1.0;
  // When > 0 every word id in [0, domain_size) receives a noisy count, so the
  // released key set does not depend on the data. When 0 only observed words
  // are released.
  int domain_size = 0;
};

// Each client contributes its distinct words in first-occurrence order,
// truncated to clip_per_client words, one count each. Laplace noise of scale
// clip_per_client / epsilon is added per bin, then each count is rounded to
// the nearest integer and raised to the floor. Throws ConfigError when
// epsilon <= 0 or clip_per_client < 1.
FreqTable DpHistogram(std::span<const WordSeq> client_words,
                      const DpHistogramOptions& options, uint64_t seed);

// acc_w = #(positions with truth w transcribed as w) / #(positions with
// truth w). Reference and hypothesis sequences must have equal length
// position by position. Throws ConfigError on an empty evaluation set.
AccTable AccuracyTable(std::span<const WordSeq> references,
                       std::span<const WordSeq> incumbent_outputs);

// Minimum number of unit-cost substitutions, insertions and deletions.
int EditDistance(std::span<const int> hypothesis, std::span<const int> reference);

// Word error rate; throws DataError when the reference is empty.
double Wer(std::span<const int> hypothesis, std::span<const int> reference);

// A held-out utterance with ground truth.
struct Utterance {
  Features features;
  WordSeq truth;
};

struct WerCounts {
  int64_t errors = 0;
  int64_t reference_words = 0;

  std::optional<double> Rate() const;
};

struct WerReport {
  WerCounts general;
  WerCounts target;
  double general_wer() const { return general.Rate().value_or(0.0); }
  // Absent when no utterance contains a corrected word.
  std::optional<double> target_wer() const { return target.Rate(); }
};

// Transcribes each utterance with `params` and accumulates errors over the
// whole set (general) and over utterances whose reference contains at least
// one word of `word_list` (target).
WerReport EvaluateWer(const ParameterSet& params,
                      std::span<const Utterance> eval_set,
                      const CorrectedWordList& word_list,
                      Execution exec = Execution::kParallel);

// Target-only WER. Throws ConfigError on an empty word list.
std::optional<double> TargetWer(const ParameterSet& params,
                                std::span<const Utterance> eval_set,
                                const CorrectedWordList& word_list);

// Line format: word_id<TAB>value.
void WriteTable(std::ostream& os, const std::map<int, double>& table);
std::map<int, double> ReadTable(std::istream& is);  // throws DataError

}  // namespace fedsim

#endif  // FEDSIM_STATS_H_
