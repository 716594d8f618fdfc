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

#ifndef FEDSIM_TASK_H_
#define FEDSIM_TASK_H_

// Synthetic speech-transcription proxy. Every word has an embedding; a spoken
// word is its embedding plus gaussian noise. The incumbent transcriber is
// exact except on a set of hard words, each of which it confuses with an
// acoustically close partner at a per-word rate. Users then fix, garble or
// leave each transcript the incumbent got wrong.

#include <cstdint>
#include <map>
#include <vector>

#include "fedsim/client.h"
#include "fedsim/rng.h"
#include "fedsim/stats.h"

namespace fedsim {

struct TaskSpec {
  int vocab_size = 200;
  int feature_dim = 16;
  uint64_t embedding_seed = 1;
  double feature_noise = 0.1;  // per-coordinate standard deviation
  double zipf_exponent = 1.0;  // word id = frequency rank

  int hard_words = 12;
  int hard_rank_min = 0;  // hard words are drawn from ids in this range
  int hard_rank_max = 199;
  double p_err = 0.6;
  // Per-word error rates are spread evenly over p_err +- p_err_spread.
  double p_err_spread = 0.0;
  // Euclidean distance between a hard word and its confusion partner.
  double confusion_distance = 0.5;

  int min_utterance_len = 3;
  int max_utterance_len = 8;
  int clients = 200;
  int examples_per_client = 8;

  double fix_prob = 0.7;     // user restores the truth
  double garble_prob = 0.1;  // user inserts junk words
  int garble_min_extra = 2;
  int garble_max_extra = 4;

  int eval_utterances = 2000;
  int acc_eval_utterances = 2000;
  int warm_start_utterances = 6000;

  void Validate() const;  // throws ConfigError
};

class Incumbent {
 public:
  Incumbent() = default;
  Incumbent(std::map<int, int> confusion, std::map<int, double> error_rate);

  // Hard words are replaced by their partner with their own error rate,
  // independently per token.
  WordSeq Transcribe(const WordSeq& truth, Rng& rng) const;

  bool IsHard(int word) const { return confusion_.contains(word); }
  const std::map<int, int>& confusion() const { return confusion_; }
  const std::map<int, double>& error_rate() const { return error_rate_; }

 private:
  std::map<int, int> confusion_;
  std::map<int, double> error_rate_;
};

Incumbent BuildIncumbent(const TaskSpec& task, uint64_t seed);

struct TaskData {
  Incumbent incumbent;
  std::vector<std::vector<float>> embeddings;
  std::vector<ClientDataset> clients;
  std::vector<Utterance> eval_set;
  // Server-side labeled utterances and the incumbent's transcripts of them.
  std::vector<Utterance> accuracy_set;
  std::vector<WordSeq> accuracy_set_incumbent;
  std::vector<Utterance> warm_start_set;
  std::vector<WordSeq> warm_start_labels;
  // Words that users restored to the truth somewhere in the pool.
  CorrectedWordList corrected_words;
};

TaskData GenerateTask(const TaskSpec& task, uint64_t seed);

}  // namespace fedsim

#endif  // FEDSIM_TASK_H_
