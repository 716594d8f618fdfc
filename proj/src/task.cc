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

#include "fedsim/task.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fedsim/errors.h"

namespace fedsim {

namespace {

enum Stream : uint64_t {
  kWorld = 1,
  kEmbeddings = 2,
  kClients = 3,
  kEval = 4,
  kAccuracy = 5,
  kWarmStart = 6,
};

class WordSampler {
 public:
  WordSampler(int vocab, double exponent) : cdf_(vocab) {
    double total = 0.0;
    for (int r = 0; r < vocab; ++r) {
      total += std::pow(r + 1.0, -exponent);
      cdf_[r] = total;
    }
    for (double& c : cdf_) c /= total;
  }

  int Sample(Rng& rng) const {
    const double u = rng.Uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(std::min<ptrdiff_t>(it - cdf_.begin(),
                                                cdf_.size() - 1));
  }

 private:
  std::vector<double> cdf_;
};

uint64_t WorldSeed(const TaskSpec& task, uint64_t seed) {
  return Rng::Derive(seed, kWorld, task.embedding_seed);
}

struct World {
  const TaskSpec& task;
  std::vector<std::vector<float>> embeddings;
  WordSampler sampler;
};

Features Speak(const WordSeq& words, const World& world, Rng& rng) {
  Features f;
  f.length = static_cast<int>(words.size());
  f.dim = world.task.feature_dim;
  f.values.reserve(static_cast<size_t>(f.length) * f.dim);
  for (int w : words) {
    for (int d = 0; d < f.dim; ++d) {
      f.values.push_back(static_cast<float>(
          world.embeddings[w][d] + world.task.feature_noise * rng.Normal()));
    }
  }
  return f;
}

WordSeq SampleWords(const World& world, Rng& rng) {
  const int span =
      world.task.max_utterance_len - world.task.min_utterance_len + 1;
  const int len =
      world.task.min_utterance_len + static_cast<int>(rng.Below(span));
  WordSeq words(len);
  for (int& w : words) w = world.sampler.Sample(rng);
  return words;
}

// Incumbent transcript with extra junk words inserted at random positions.
WordSeq Garble(const WordSeq& incumbent, const TaskSpec& task, Rng& rng) {
  const int span = task.garble_max_extra - task.garble_min_extra + 1;
  const int extra = task.garble_min_extra + static_cast<int>(rng.Below(span));
  WordSeq out = incumbent;
  for (int k = 0; k < extra; ++k) {
    const size_t pos = rng.Below(out.size() + 1);
    out.insert(out.begin() + pos, static_cast<int>(rng.Below(task.vocab_size)));
  }
  return out;
}

}  // namespace

void TaskSpec::Validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(vocab_size >= 2, "vocab_size must be >= 2");
  require(feature_dim >= 1, "feature_dim must be >= 1");
  require(feature_noise >= 0.0, "feature_noise must be >= 0");
  require(zipf_exponent >= 0.0, "zipf_exponent must be >= 0");
  require(hard_words >= 0, "hard_words must be >= 0");
  require(hard_rank_min >= 0 && hard_rank_max < vocab_size &&
              hard_rank_min <= hard_rank_max,
          "hard word rank range must lie within the vocabulary");
  require(hard_words <= hard_rank_max - hard_rank_min + 1,
          "hard word rank range is smaller than the hard word count");
  require(2 * hard_words <= vocab_size,
          "vocabulary too small for hard words and their partners");
  require(p_err >= 0.0 && p_err <= 1.0, "p_err must be in [0, 1]");
  require(p_err_spread >= 0.0, "p_err_spread must be >= 0");
  require(confusion_distance >= 0.0, "confusion_distance must be >= 0");
  require(min_utterance_len >= 1 && min_utterance_len <= max_utterance_len,
          "utterance length range is invalid");
  require(clients >= 1, "clients must be >= 1");
  require(examples_per_client >= 1, "examples_per_client must be >= 1");
  require(fix_prob >= 0.0 && fix_prob <= 1.0, "fix_prob must be in [0, 1]");
  require(garble_prob >= 0.0 && garble_prob <= 1.0,
          "garble_prob must be in [0, 1]");
  require(fix_prob + garble_prob <= 1.0, "fix_prob + garble_prob must be <= 1");
  require(garble_min_extra >= 1 && garble_min_extra <= garble_max_extra,
          "garble extra-word range is invalid");
  require(eval_utterances >= 1, "eval_utterances must be >= 1");
  require(acc_eval_utterances >= 1, "acc_eval_utterances must be >= 1");
  require(warm_start_utterances >= 0, "warm_start_utterances must be >= 0");
}

Incumbent::Incumbent(std::map<int, int> confusion,
                     std::map<int, double> error_rate)
    : confusion_(std::move(confusion)), error_rate_(std::move(error_rate)) {}

WordSeq Incumbent::Transcribe(const WordSeq& truth, Rng& rng) const {
  WordSeq out = truth;
  for (int& w : out) {
    auto it = confusion_.find(w);
    if (it == confusion_.end()) continue;
    if (rng.Bernoulli(error_rate_.at(w))) w = it->second;
  }
  return out;
}

Incumbent BuildIncumbent(const TaskSpec& task, uint64_t seed) {
  task.Validate();
  Rng rng(WorldSeed(task, seed));
  std::vector<int> band(task.hard_rank_max - task.hard_rank_min + 1);
  std::iota(band.begin(), band.end(), task.hard_rank_min);
  for (int i = 0; i < task.hard_words; ++i) {
    std::swap(band[i], band[i + rng.Below(band.size() - i)]);
  }
  std::vector<int> hard(band.begin(), band.begin() + task.hard_words);
  const std::set<int> hard_set(hard.begin(), hard.end());

  std::vector<int> others;
  for (int w = 0; w < task.vocab_size; ++w) {
    if (!hard_set.contains(w)) others.push_back(w);
  }
  std::map<int, int> confusion;
  std::map<int, double> error_rate;
  for (int i = 0; i < task.hard_words; ++i) {
    std::swap(others[i], others[i + rng.Below(others.size() - i)]);
    confusion[hard[i]] = others[i];
    double rate = task.p_err;
    if (task.hard_words > 1) {
      rate += task.p_err_spread *
              (2.0 * i / (task.hard_words - 1) - 1.0);
    }
    error_rate[hard[i]] = std::clamp(rate, 0.0, 1.0);
  }
  return Incumbent(std::move(confusion), std::move(error_rate));
}

TaskData GenerateTask(const TaskSpec& task, uint64_t seed) {
  task.Validate();
  TaskData data;
  data.incumbent = BuildIncumbent(task, seed);

  // Embeddings with coordinates N(0, 1/dim); confusion partners are moved to
  // exactly `confusion_distance` from their hard word.
  Rng emb_rng(Rng::Derive(WorldSeed(task, seed), kEmbeddings));
  const double coord_scale = 1.0 / std::sqrt(static_cast<double>(task.feature_dim));
  data.embeddings.assign(task.vocab_size, std::vector<float>(task.feature_dim));
  for (auto& e : data.embeddings) {
    for (float& x : e) x = static_cast<float>(coord_scale * emb_rng.Normal());
  }
  for (const auto& [hard, partner] : data.incumbent.confusion()) {
    std::vector<double> dir(task.feature_dim);
    double norm = 0.0;
    for (double& d : dir) {
      d = emb_rng.Normal();
      norm += d * d;
    }
    norm = std::sqrt(norm);
    for (int d = 0; d < task.feature_dim; ++d) {
      data.embeddings[partner][d] = static_cast<float>(
          data.embeddings[hard][d] + task.confusion_distance * dir[d] / norm);
    }
  }

  World world{task, data.embeddings, WordSampler(task.vocab_size,
                                                 task.zipf_exponent)};

  for (int c = 0; c < task.clients; ++c) {
    Rng rng(Rng::Derive(seed, kClients, c));
    ClientDataset client;
    client.client_id = c;
    for (int e = 0; e < task.examples_per_client; ++e) {
      WordSeq truth = SampleWords(world, rng);
      Features features = Speak(truth, world, rng);
      WordSeq incumbent = data.incumbent.Transcribe(truth, rng);
      WordSeq final_transcript = incumbent;
      const double u = rng.Uniform();
      const bool erred = incumbent != truth;
      if (erred && u < task.fix_prob) {
        final_transcript = truth;
        for (size_t p = 0; p < truth.size(); ++p) {
          if (incumbent[p] != truth[p]) data.corrected_words.insert(truth[p]);
        }
      } else if (erred && u < task.fix_prob + task.garble_prob) {
        final_transcript = Garble(incumbent, task, rng);
      }
      client.examples.push_back(MakeExample(std::move(features),
                                            std::move(truth),
                                            std::move(incumbent),
                                            std::move(final_transcript)));
    }
    data.clients.push_back(std::move(client));
  }

  Rng eval_rng(Rng::Derive(seed, kEval));
  for (int i = 0; i < task.eval_utterances; ++i) {
    Utterance u;
    u.truth = SampleWords(world, eval_rng);
    u.features = Speak(u.truth, world, eval_rng);
    data.eval_set.push_back(std::move(u));
  }

  Rng acc_rng(Rng::Derive(seed, kAccuracy));
  for (int i = 0; i < task.acc_eval_utterances; ++i) {
    Utterance u;
    u.truth = SampleWords(world, acc_rng);
    u.features = Speak(u.truth, world, acc_rng);
    data.accuracy_set_incumbent.push_back(
        data.incumbent.Transcribe(u.truth, acc_rng));
    data.accuracy_set.push_back(std::move(u));
  }

  Rng warm_rng(Rng::Derive(seed, kWarmStart));
  for (int i = 0; i < task.warm_start_utterances; ++i) {
    Utterance u;
    u.truth = SampleWords(world, warm_rng);
    u.features = Speak(u.truth, world, warm_rng);
    data.warm_start_labels.push_back(
        data.incumbent.Transcribe(u.truth, warm_rng));
    data.warm_start_set.push_back(std::move(u));
  }
  return data;
}

}  // namespace fedsim
