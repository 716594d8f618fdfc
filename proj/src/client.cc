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

#include "fedsim/client.h"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "fedsim/errors.h"

namespace fedsim {

ClientExample MakeExample(Features features, WordSeq truth, WordSeq incumbent,
                          WordSeq final_transcript) {
  if (static_cast<int>(incumbent.size()) != features.length) {
    throw DataError("incumbent transcript length " +
                    std::to_string(incumbent.size()) +
                    " != feature sequence length " +
                    std::to_string(features.length));
  }
  ClientExample ex;
  ex.features = std::move(features);
  ex.truth = std::move(truth);
  ex.is_correction = final_transcript != incumbent;
  ex.incumbent_transcript = std::move(incumbent);
  ex.final_transcript = std::move(final_transcript);
  return ex;
}

bool QualityHeuristic(const ClientExample& example, int max_word_len_diff) {
  if (!example.is_correction) {
    throw ContractError("quality heuristic applied to a non-correction");
  }
  const long diff =
      std::labs(static_cast<long>(example.final_transcript.size()) -
                static_cast<long>(example.incumbent_transcript.size()));
  return diff <= max_word_len_diff;
}

bool IsUsableCorrection(const ClientExample& example, int max_word_len_diff) {
  return example.is_correction &&
         QualityHeuristic(example, max_word_len_diff);
}

bool EligibilityTest(const ClientDataset& dataset,
                     const EligibilitySpec& spec) {
  int usable = 0;
  for (const auto& ex : dataset.examples) {
    if (IsUsableCorrection(ex, spec.max_word_len_diff) &&
        ++usable >= spec.min_corrections) {
      return true;
    }
  }
  return false;
}

std::vector<ClientExample> FilterBatch(const ClientDataset& dataset,
                                       const EligibilitySpec& spec,
                                       int batch_size) {
  std::vector<ClientExample> batch;
  for (const auto& ex : dataset.examples) {
    if (static_cast<int>(batch.size()) == batch_size) break;
    if (IsUsableCorrection(ex, spec.max_word_len_diff)) batch.push_back(ex);
  }
  if (static_cast<int>(batch.size()) < batch_size) {
    throw EligibilityError("client " + std::to_string(dataset.client_id) +
                           " has " + std::to_string(batch.size()) +
                           " usable corrections, batch needs " +
                           std::to_string(batch_size));
  }
  return batch;
}

std::vector<ClientExample> FirstBatch(const ClientDataset& dataset,
                                      int batch_size) {
  const size_t n = std::min<size_t>(batch_size, dataset.examples.size());
  return {dataset.examples.begin(), dataset.examples.begin() + n};
}

namespace {

// Pairs (incumbent index, final index); -1 marks a gap. Ties prefer the
// diagonal, then deletion of the incumbent word, then insertion.
std::vector<std::pair<int, int>> Align(const WordSeq& incumbent,
                                       const WordSeq& final_words) {
  const int n = static_cast<int>(incumbent.size());
  const int m = static_cast<int>(final_words.size());
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  for (int i = 0; i <= n; ++i) d[i][0] = i;
  for (int j = 0; j <= m; ++j) d[0][j] = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      const int sub =
          d[i - 1][j - 1] + (incumbent[i - 1] == final_words[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  std::vector<std::pair<int, int>> ops;
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] +
                       (incumbent[i - 1] == final_words[j - 1] ? 0 : 1)) {
      ops.emplace_back(--i, --j);
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ops.emplace_back(--i, -1);
    } else {
      ops.emplace_back(-1, --j);
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

// One label per feature position. Equal-length transcripts use the final
// transcript directly; otherwise each incumbent position takes its aligned
// final word, keeping the incumbent word where the edit deleted it.
WordSeq TrainingLabels(const ClientExample& ex) {
  if (ex.final_transcript.size() == ex.incumbent_transcript.size()) {
    return ex.final_transcript;
  }
  WordSeq labels = ex.incumbent_transcript;
  for (auto [i, j] : Align(ex.incumbent_transcript, ex.final_transcript)) {
    if (i >= 0 && j >= 0) labels[i] = ex.final_transcript[j];
  }
  return labels;
}

}  // namespace

WordSeq CorrectedWords(const ClientExample& example, bool with_multiplicity) {
  const WordSeq& inc = example.incumbent_transcript;
  const WordSeq& fin = example.final_transcript;
  WordSeq words;
  if (inc.size() == fin.size()) {
    for (size_t p = 0; p < fin.size(); ++p) {
      if (fin[p] != inc[p]) words.push_back(fin[p]);
    }
  } else {
    for (auto [i, j] : Align(inc, fin)) {
      if (j >= 0 && (i < 0 || inc[i] != fin[j])) words.push_back(fin[j]);
    }
  }
  if (!with_multiplicity) {
    std::set<int> seen;
    WordSeq unique;
    for (int w : words) {
      if (seen.insert(w).second) unique.push_back(w);
    }
    words = std::move(unique);
  }
  return words;
}

const char* WeightSchemeName(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::kUniform:
      return "uniform";
    case WeightScheme::kFrequency:
      return "frequency";
    case WeightScheme::kFreqAccuracy:
      return "freq_accuracy";
  }
  return "";
}

WeightScheme ParseWeightScheme(const std::string& text) {
  if (text == "uniform") return WeightScheme::kUniform;
  if (text == "frequency") return WeightScheme::kFrequency;
  if (text == "freq_accuracy") return WeightScheme::kFreqAccuracy;
  throw ConfigError("unknown weight scheme '" + text + "'");
}

double ComputeExampleWeight(const ClientExample& example, WeightScheme scheme,
                            const WeightTables& tables, WeightStats* stats) {
  if (scheme == WeightScheme::kUniform) return 1.0;
  if (tables.freq == nullptr ||
      (scheme == WeightScheme::kFreqAccuracy && tables.acc == nullptr)) {
    throw ContractError("weight scheme needs frequency/accuracy tables");
  }
  double weight = 0.0;
  for (int w : CorrectedWords(example, tables.with_multiplicity)) {
    std::optional<double> freq = tables.freq->Find(w);
    if (!freq) {
      freq = tables.freq->MaxCount();
      if (stats != nullptr) ++stats->misses;
    }
    const double numerator = scheme == WeightScheme::kFreqAccuracy
                                 ? 1.0 - tables.acc->Lookup(w)
                                 : 1.0;
    weight += numerator / *freq;
  }
  return weight;
}

LocalUpdate ComputeWeightedUpdate(const ParameterSet& params,
                                  std::span<const ClientExample> batch,
                                  std::span<const double> weights,
                                  bool checkpointing) {
  if (weights.size() != batch.size()) {
    throw ShapeError("one weight per example required");
  }
  LocalUpdate update;
  update.example_count = static_cast<int>(batch.size());
  std::map<std::string, std::vector<double>> sum;
  for (const Variable& v : params.variables()) {
    if (v.trainable) sum[v.name].assign(v.size(), 0.0);
  }
  for (size_t j = 0; j < batch.size(); ++j) {
    const ClientExample& ex = batch[j];
    const double w = weights[j];
    if (!(w >= 0.0)) throw ContractError("example weights must be >= 0");
    update.positions += ex.features.length;
    update.weight += w;
    if (w == 0.0) continue;
    const WordSeq labels = TrainingLabels(ex);
    const ForwardTrace trace = Forward(params, ex.features, checkpointing);
    const Gradients g = Backward(params, trace, labels);
    for (const auto& [name, values] : g) {
      std::vector<double>& acc = sum.at(name);
      for (size_t k = 0; k < values.size(); ++k) acc[k] += w * values[k];
    }
  }
  for (auto& [name, values] : sum) {
    update.gradient[name] = std::vector<float>(values.begin(), values.end());
  }
  return update;
}

LocalUpdate ComputeLocalUpdate(const ParameterSet& params,
                               std::span<const ClientExample> batch,
                               WeightScheme scheme, const WeightTables& tables,
                               bool checkpointing) {
  WeightStats stats;
  std::vector<double> weights;
  for (const ClientExample& ex : batch) {
    weights.push_back(ComputeExampleWeight(ex, scheme, tables, &stats));
  }
  LocalUpdate update =
      ComputeWeightedUpdate(params, batch, weights, checkpointing);
  update.weight_misses = stats.misses;
  return update;
}

WordSeq LabelsForTraining(const ClientExample& example) {
  return TrainingLabels(example);
}

}  // namespace fedsim
