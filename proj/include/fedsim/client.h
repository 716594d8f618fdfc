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

#ifndef FEDSIM_CLIENT_H_
#define FEDSIM_CLIENT_H_

// On-device side of a round: eligibility probing, correction filtering,
// per-example weights and the single-batch FedSGD gradient.

#include <cstdint>
#include <span>
#include <vector>

#include "fedsim/model.h"
#include "fedsim/stats.h"

namespace fedsim {

struct ClientExample {
  Features features;
  WordSeq truth;  // simulation only, never used for training
  WordSeq incumbent_transcript;
  WordSeq final_transcript;
  bool is_correction = false;
};

// Sets is_correction from the transcripts and checks that the incumbent
// transcript covers every feature vector. Throws DataError otherwise.
ClientExample MakeExample(Features features, WordSeq truth, WordSeq incumbent,
                          WordSeq final_transcript);

struct ClientDataset {
  int client_id = 0;
  std::vector<ClientExample> examples;  // stable on-device order
};

struct EligibilitySpec {
  int min_corrections = 1;
  int max_word_len_diff = 0;
};

// |#words(final) - #words(incumbent)| <= max_word_len_diff. Throws
// ContractError for an example that is not a correction.
bool QualityHeuristic(const ClientExample& example, int max_word_len_diff);

bool IsUsableCorrection(const ClientExample& example, int max_word_len_diff);

bool EligibilityTest(const ClientDataset& dataset, const EligibilitySpec& spec);

// First `batch_size` usable corrections in on-device order. Throws
// EligibilityError when fewer exist.
std::vector<ClientExample> FilterBatch(const ClientDataset& dataset,
                                       const EligibilitySpec& spec,
                                       int batch_size);

// First `batch_size` examples regardless of their content, for runs without
// data filtering.
std::vector<ClientExample> FirstBatch(const ClientDataset& dataset,
                                      int batch_size);

// Words of the final transcript that differ from the incumbent transcript.
// Equal lengths compare position by position; otherwise a minimum edit
// alignment is used and substituted or inserted final words are taken.
// Without `with_multiplicity` each distinct word appears once, in order of
// first occurrence.
WordSeq CorrectedWords(const ClientExample& example, bool with_multiplicity);

enum class WeightScheme { kUniform, kFrequency, kFreqAccuracy };

const char* WeightSchemeName(WeightScheme scheme);
WeightScheme ParseWeightScheme(const std::string& text);  // throws ConfigError

struct WeightTables {
  const FreqTable* freq = nullptr;
  const AccTable* acc = nullptr;
  bool with_multiplicity = false;
};

struct WeightStats {
  int64_t misses = 0;
};

// uniform: 1. frequency: sum over corrected words of 1 / freq_w.
// freq_accuracy: sum of (1 - acc_w) / freq_w. Words missing from the
// frequency table fall back to the table's largest count and are counted
// as misses.
double ComputeExampleWeight(const ClientExample& example, WeightScheme scheme,
                            const WeightTables& tables,
                            WeightStats* stats = nullptr);

struct LocalUpdate {
  int client_id = 0;
  Gradients gradient;  // sum_j w_ij * G_ij over the batch
  double weight = 0.0;  // sum_j w_ij
  int example_count = 0;
  int64_t positions = 0;
  int64_t weight_misses = 0;
};

// One FedSGD batch: per-example gradients against the final transcripts,
// combined with their example weights. `params` must already be prepared by
// the server (frozen set, precision).
LocalUpdate ComputeLocalUpdate(const ParameterSet& params,
                               std::span<const ClientExample> batch,
                               WeightScheme scheme, const WeightTables& tables,
                               bool checkpointing = true);

// Same with explicit per-example weights.
LocalUpdate ComputeWeightedUpdate(const ParameterSet& params,
                                  std::span<const ClientExample> batch,
                                  std::span<const double> weights,
                                  bool checkpointing = true);

// Per-position labels the client trains on. Equal-length transcripts use the
// final transcript; otherwise every feature position takes the final word it
// aligns to, or keeps the incumbent word where the edit deleted it.
WordSeq LabelsForTraining(const ClientExample& example);

}  // namespace fedsim

#endif  // FEDSIM_CLIENT_H_
