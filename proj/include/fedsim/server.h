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

#ifndef FEDSIM_SERVER_H_
#define FEDSIM_SERVER_H_

// The federated round loop: select clients through the eligibility test,
// prepare and ship the model, collect FedSGD updates, aggregate and apply.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/client.h"
#include "fedsim/execution.h"
#include "fedsim/metrics.h"
#include "fedsim/model.h"
#include "fedsim/partial.h"
#include "fedsim/payload.h"
#include "fedsim/rng.h"
#include "fedsim/stats.h"

namespace fedsim {

enum class Aggregation { kSimpleAvg, kExampleWeighted, kWca };

const char* AggregationName(Aggregation rule);
Aggregation ParseAggregation(const std::string& text);  // throws ConfigError

struct RoundConfig {
  int report_goal = 1;
  int batch_size = 1;
  Aggregation aggregation = Aggregation::kSimpleAvg;
  WeightScheme weight_scheme = WeightScheme::kUniform;
  bool omc_enabled = false;
  TrainableSet trainable = TrainableSet::Full();
  double learning_rate = 0.1;
  int rounds = 1;
  uint64_t seed = 0;

  // Eligibility-test selection; otherwise clients are drawn at random.
  bool client_selection = true;
  // Train only on usable corrections; otherwise on the first batch. Requires
  // client_selection.
  bool data_filtering = true;
  int max_word_len_diff = 0;
  bool weight_multiplicity = false;
  bool checkpointing = true;
  bool compress_transport = true;
  Execution execution = Execution::kParallel;

  void Validate() const;  // throws ConfigError
  EligibilitySpec eligibility() const {
    return {batch_size, max_word_len_diff};
  }
};

struct SelectionResult {
  std::vector<int> client_ids;  // in admission order
  bool pool_exhausted = false;
  int probed = 0;
};

// Probes clients in random order without replacement and admits those that
// pass the eligibility test until `report_goal` is reached. Throws
// NoEligibleClientsError when nobody passes.
SelectionResult SelectClients(std::span<const ClientDataset> pool,
                              const EligibilitySpec& spec, int report_goal,
                              Rng& rng);

// Random clients with no eligibility probing.
SelectionResult SampleClients(std::span<const ClientDataset> pool,
                              int report_goal, Rng& rng);

struct PreparedModel {
  ParameterSet params;  // what the client decodes
  Payload payload;
  int64_t raw_bytes = 0;
  int64_t compressed_bytes = 0;
  QuantizationStats quantization;
};

// Freeze per the trainable set, apply the precision policy, keep trainable
// variables at f32, serialize.
PreparedModel PrepareModel(const ParameterSet& params,
                           const RoundConfig& config);

// Gradient upload of one client as a parameter set mirroring the trainable
// variables (always f32).
ParameterSet GradientsAsParameters(const ParameterSet& model,
                                   const Gradients& gradients);

// simple_avg:        sum_i (G_i / w_i) / n
// example_weighted:  sum_i (G_i / w_i) E_i / sum_i E_i
// wca:               sum_i G_i / sum_i w_i, which with G_i = sum_j w_ij G_ij
//                    is the centralized weighted mean over every example.
// Clients with w_i = 0 are skipped; accumulation runs in ascending client id.
// Returns nullopt when no client carries weight.
std::optional<Gradients> Aggregate(std::span<const LocalUpdate> updates,
                                   Aggregation rule);

// theta <- theta - lr * g on the variables present in `gradient`, which must
// all be trainable. Throws ShapeError on a size mismatch, ConfigError on an
// unknown or frozen name.
ParameterSet ApplyUpdate(const ParameterSet& params, const Gradients& gradient,
                         double learning_rate);

// Receives each round's download wire bytes.
using PayloadSink = std::function<void(int round, std::span<const uint8_t>)>;

// Read-only inputs shared by every round.
struct Federation {
  std::span<const ClientDataset> pool;
  const FreqTable* freq = nullptr;
  const AccTable* acc = nullptr;
  std::span<const Utterance> eval_set;
  const CorrectedWordList* target_words = nullptr;
  PayloadSink download_sink;
};

struct ServerState {
  ParameterSet params;
  int round = 0;  // rounds completed
};

struct RoundResult {
  std::vector<int> participants;  // ascending client id
  bool pool_exhausted = false;
  bool skipped = false;  // no weight to aggregate
  std::optional<Gradients> aggregated;
  MetricsRecord metrics;
};

// Selection, shipping, local updates, aggregation and evaluation for round
// state.round + 1; advances `state`.
RoundResult RunRound(ServerState& state, const RoundConfig& config,
                     const Federation& federation);

std::vector<RoundResult> RunExperiment(ServerState& state,
                                       const RoundConfig& config,
                                       const Federation& federation);

}  // namespace fedsim

#endif  // FEDSIM_SERVER_H_
