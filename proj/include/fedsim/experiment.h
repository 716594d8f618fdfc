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

#ifndef FEDSIM_EXPERIMENT_H_
#define FEDSIM_EXPERIMENT_H_

// End-to-end experiment: synthetic task, warm-started server model, privacy
// pre-pass for the weight tables and the ablation ladder of round configs.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/metrics.h"
#include "fedsim/server.h"
#include "fedsim/stats.h"
#include "fedsim/task.h"

namespace fedsim {

struct PrivacyConfig {
  double epsilon = 1.0;
  int clip_per_client = 4;
  double floor = 1.0;
};

// Central SGD on the incumbent's transcripts of server-side audio; stands in
// for the pre-trained model FL starts from.
struct WarmStartConfig {
  int epochs = 4;
  int batch_utterances = 16;
  double learning_rate = 0.5;
};

struct ExperimentConfig {
  TaskSpec task;
  std::vector<int> hidden_dims = {32, 32, 32};
  RoundConfig round;
  PrivacyConfig privacy;
  WarmStartConfig warm_start;
  std::vector<uint64_t> seeds = {1};

  ModelArch arch() const {
    return {task.vocab_size, task.feature_dim, hidden_dims};
  }
  void Validate() const;  // throws ConfigError
};

// JSON text with optional sections "task", "model", "round", "privacy",
// "warm_start" and "seeds". Unknown keys are rejected. Throws ConfigError.
ExperimentConfig ParseExperimentConfig(const std::string& json_text);
ExperimentConfig LoadExperimentConfig(const std::string& path);
TaskSpec ParseTaskSpec(const std::string& json_text);
std::string ExperimentConfigToJson(const ExperimentConfig& config);

enum class Arm { kInitial, kSelect, kFilter, kWcaFreq, kWcaFreqAcc };

inline constexpr Arm kAllArms[] = {Arm::kInitial, Arm::kSelect, Arm::kFilter,
                                   Arm::kWcaFreq, Arm::kWcaFreqAcc};

const char* ArmName(Arm arm);  // initial, select, filter, wca-freq, ...
Arm ParseArm(const std::string& text);  // throws ConfigError

// Each arm adds one method on top of the previous one.
RoundConfig ConfigureArm(RoundConfig base, Arm arm);

ParameterSet WarmStart(const ModelArch& arch, const TaskData& data,
                       const WarmStartConfig& config, uint64_t seed);

// Everything an arm needs that does not depend on the arm.
struct World {
  uint64_t seed = 0;
  TaskData data;
  FreqTable freq;
  AccTable acc;
  ParameterSet initial_model;
  WerReport initial_wer;
};

World BuildWorld(const ExperimentConfig& config, uint64_t seed);

// Per-client word lists fed to the private histogram: corrected words of
// every correction that passes the quality heuristic.
std::vector<WordSeq> ClientCorrectionWords(const TaskData& data,
                                           int max_word_len_diff,
                                           bool with_multiplicity);

struct ArmRun {
  Arm arm = Arm::kInitial;
  uint64_t seed = 0;
  WerReport initial_wer;
  std::vector<MetricsRecord> rounds;
  ParameterSet final_model;
  bool aborted = false;  // no eligible clients
  std::string abort_reason;

  const MetricsRecord& final_round() const { return rounds.back(); }
};

ArmRun RunArm(const ExperimentConfig& config, const World& world, Arm arm,
              const PayloadSink& download_sink = {});

// Fixed-width table: one row per (arm, seed) with initial and final WERs,
// plus per-arm means across seeds.
std::string SummaryTable(const std::vector<ArmRun>& runs);

}  // namespace fedsim

#endif  // FEDSIM_EXPERIMENT_H_
