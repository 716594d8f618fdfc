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

#include "fedsim/experiment.h"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedsim/errors.h"
#include "fedsim/rng.h"

namespace fedsim {

using nlohmann::json;

namespace {

enum Stream : uint64_t { kInit = 11, kWarmOrder = 12, kPrivacy = 13 };

// Reads typed fields out of one JSON object and rejects leftovers.
class Section {
 public:
  Section(const json& j, std::string name) : name_(std::move(name)) {
    if (!j.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    j_ = &j;
  }

  template <typename T>
  void Read(const char* key, T& out) {
    used_.insert(key);
    auto it = j_->find(key);
    if (it == j_->end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + " has the wrong type");
    }
  }

  void Finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!used_.contains(it.key())) {
        throw ConfigError("unknown key '" + name_ + "." + it.key() + "'");
      }
    }
  }

 private:
  const json* j_ = nullptr;
  std::string name_;
  std::set<std::string> used_;
};

void ReadTask(const json& j, TaskSpec& t) {
  Section s(j, "task");
  s.Read("vocab_size", t.vocab_size);
  s.Read("feature_dim", t.feature_dim);
  s.Read("embedding_seed", t.embedding_seed);
  s.Read("feature_noise", t.feature_noise);
  s.Read("zipf_exponent", t.zipf_exponent);
  s.Read("hard_words", t.hard_words);
  s.Read("hard_rank_min", t.hard_rank_min);
  s.Read("hard_rank_max", t.hard_rank_max);
  s.Read("p_err", t.p_err);
  s.Read("p_err_spread", t.p_err_spread);
  s.Read("confusion_distance", t.confusion_distance);
  s.Read("min_utterance_len", t.min_utterance_len);
  s.Read("max_utterance_len", t.max_utterance_len);
  s.Read("clients", t.clients);
  s.Read("examples_per_client", t.examples_per_client);
  s.Read("fix_prob", t.fix_prob);
  s.Read("garble_prob", t.garble_prob);
  s.Read("garble_min_extra", t.garble_min_extra);
  s.Read("garble_max_extra", t.garble_max_extra);
  s.Read("eval_utterances", t.eval_utterances);
  s.Read("acc_eval_utterances", t.acc_eval_utterances);
  s.Read("warm_start_utterances", t.warm_start_utterances);
  s.Finish();
}

void ReadRound(const json& j, RoundConfig& r) {
  Section s(j, "round");
  std::string aggregation = AggregationName(r.aggregation);
  std::string scheme = WeightSchemeName(r.weight_scheme);
  std::string trainable = r.trainable.ToString();
  std::string execution =
      r.execution == Execution::kParallel ? "parallel" : "serial";
  s.Read("report_goal", r.report_goal);
  s.Read("batch_size", r.batch_size);
  s.Read("aggregation", aggregation);
  s.Read("weight_scheme", scheme);
  s.Read("omc", r.omc_enabled);
  s.Read("trainable", trainable);
  s.Read("learning_rate", r.learning_rate);
  s.Read("rounds", r.rounds);
  s.Read("client_selection", r.client_selection);
  s.Read("data_filtering", r.data_filtering);
  s.Read("max_word_len_diff", r.max_word_len_diff);
  s.Read("weight_multiplicity", r.weight_multiplicity);
  s.Read("checkpointing", r.checkpointing);
  s.Read("compress_transport", r.compress_transport);
  s.Read("execution", execution);
  s.Finish();
  r.aggregation = ParseAggregation(aggregation);
  r.weight_scheme = ParseWeightScheme(scheme);
  r.trainable = TrainableSet::Parse(trainable);
  if (execution == "parallel") {
    r.execution = Execution::kParallel;
  } else if (execution == "serial") {
    r.execution = Execution::kSerial;
  } else {
    throw ConfigError("round.execution must be 'serial' or 'parallel'");
  }
}

json ParseJson(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

void ExperimentConfig::Validate() const {
  task.Validate();
  arch().Validate();
  round.Validate();
  Resolve(round.trainable, arch());
  if (!(privacy.epsilon > 0.0)) throw ConfigError("privacy.epsilon must be > 0");
  if (privacy.clip_per_client < 1) {
    throw ConfigError("privacy.clip_per_client must be >= 1");
  }
  if (!(privacy.floor > 0.0)) throw ConfigError("privacy.floor must be > 0");
  if (warm_start.epochs < 0 || warm_start.batch_utterances < 1 ||
      !(warm_start.learning_rate > 0.0)) {
    throw ConfigError("warm_start settings are invalid");
  }
  if (seeds.empty()) throw ConfigError("at least one seed is required");
}

ExperimentConfig ParseExperimentConfig(const std::string& json_text) {
  const json j = ParseJson(json_text);
  ExperimentConfig c;
  Section top(j, "config");
  json task = json::object(), model = json::object(), round = json::object(),
       privacy = json::object(), warm = json::object();
  top.Read("task", task);
  top.Read("model", model);
  top.Read("round", round);
  top.Read("privacy", privacy);
  top.Read("warm_start", warm);
  top.Read("seeds", c.seeds);
  top.Finish();

  ReadTask(task, c.task);
  Section m(model, "model");
  m.Read("hidden_dims", c.hidden_dims);
  m.Finish();
  ReadRound(round, c.round);
  Section p(privacy, "privacy");
  p.Read("epsilon", c.privacy.epsilon);
  p.Read("clip_per_client", c.privacy.clip_per_client);
  p.Read("floor", c.privacy.floor);
  p.Finish();
  Section w(warm, "warm_start");
  w.Read("epochs", c.warm_start.epochs);
  w.Read("batch_utterances", c.warm_start.batch_utterances);
  w.Read("learning_rate", c.warm_start.learning_rate);
  w.Finish();
  c.Validate();
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseExperimentConfig(ss.str());
}

TaskSpec ParseTaskSpec(const std::string& json_text) {
  const json j = ParseJson(json_text);
  // Accept either a bare task object or a full experiment config.
  if (j.is_object() && j.contains("task")) {
    return ParseExperimentConfig(json_text).task;
  }
  TaskSpec t;
  ReadTask(j, t);
  t.Validate();
  return t;
}

std::string ExperimentConfigToJson(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  const TaskSpec& t = c.task;
  j["task"] = {{"vocab_size", t.vocab_size},
               {"feature_dim", t.feature_dim},
               {"embedding_seed", t.embedding_seed},
               {"feature_noise", t.feature_noise},
               {"zipf_exponent", t.zipf_exponent},
               {"hard_words", t.hard_words},
               {"hard_rank_min", t.hard_rank_min},
               {"hard_rank_max", t.hard_rank_max},
               {"p_err", t.p_err},
               {"p_err_spread", t.p_err_spread},
               {"confusion_distance", t.confusion_distance},
               {"min_utterance_len", t.min_utterance_len},
               {"max_utterance_len", t.max_utterance_len},
               {"clients", t.clients},
               {"examples_per_client", t.examples_per_client},
               {"fix_prob", t.fix_prob},
               {"garble_prob", t.garble_prob},
               {"garble_min_extra", t.garble_min_extra},
               {"garble_max_extra", t.garble_max_extra},
               {"eval_utterances", t.eval_utterances},
               {"acc_eval_utterances", t.acc_eval_utterances},
               {"warm_start_utterances", t.warm_start_utterances}};
  j["model"] = {{"hidden_dims", c.hidden_dims}};
  const RoundConfig& r = c.round;
  j["round"] = {
      {"report_goal", r.report_goal},
      {"batch_size", r.batch_size},
      {"aggregation", AggregationName(r.aggregation)},
      {"weight_scheme", WeightSchemeName(r.weight_scheme)},
      {"omc", r.omc_enabled},
      {"trainable", r.trainable.ToString()},
      {"learning_rate", r.learning_rate},
      {"rounds", r.rounds},
      {"client_selection", r.client_selection},
      {"data_filtering", r.data_filtering},
      {"max_word_len_diff", r.max_word_len_diff},
      {"weight_multiplicity", r.weight_multiplicity},
      {"checkpointing", r.checkpointing},
      {"compress_transport", r.compress_transport},
      {"execution",
       r.execution == Execution::kParallel ? "parallel" : "serial"}};
  j["privacy"] = {{"epsilon", c.privacy.epsilon},
                  {"clip_per_client", c.privacy.clip_per_client},
                  {"floor", c.privacy.floor}};
  j["warm_start"] = {{"epochs", c.warm_start.epochs},
                     {"batch_utterances", c.warm_start.batch_utterances},
                     {"learning_rate", c.warm_start.learning_rate}};
  j["seeds"] = c.seeds;
  return j.dump(2);
}

const char* ArmName(Arm arm) {
  switch (arm) {
    case Arm::kInitial:
      return "initial";
    case Arm::kSelect:
      return "select";
    case Arm::kFilter:
      return "filter";
    case Arm::kWcaFreq:
      return "wca-freq";
    case Arm::kWcaFreqAcc:
      return "wca-freqacc";
  }
  return "";
}

Arm ParseArm(const std::string& text) {
  for (Arm arm : kAllArms) {
    if (text == ArmName(arm)) return arm;
  }
  throw ConfigError("unknown arm '" + text +
                    "' (expected initial|select|filter|wca-freq|wca-freqacc)");
}

RoundConfig ConfigureArm(RoundConfig base, Arm arm) {
  base.client_selection = arm != Arm::kInitial;
  base.data_filtering = arm != Arm::kInitial && arm != Arm::kSelect;
  switch (arm) {
    case Arm::kInitial:
    case Arm::kSelect:
    case Arm::kFilter:
      base.aggregation = Aggregation::kSimpleAvg;
      base.weight_scheme = WeightScheme::kUniform;
      break;
    case Arm::kWcaFreq:
      base.aggregation = Aggregation::kWca;
      base.weight_scheme = WeightScheme::kFrequency;
      break;
    case Arm::kWcaFreqAcc:
      base.aggregation = Aggregation::kWca;
      base.weight_scheme = WeightScheme::kFreqAccuracy;
      break;
  }
  return base;
}

ParameterSet WarmStart(const ModelArch& arch, const TaskData& data,
                       const WarmStartConfig& config, uint64_t seed) {
  ParameterSet params = InitModel(arch, Rng::Derive(seed, kInit));
  const size_t n = data.warm_start_set.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(Rng::Derive(seed, kWarmOrder));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t i = 0; i + 1 < n; ++i) {
      std::swap(order[i], order[i + rng.Below(n - i)]);
    }
    for (size_t start = 0; start < n; start += config.batch_utterances) {
      const size_t end = std::min(n, start + config.batch_utterances);
      Features batch;
      batch.dim = arch.feature_dim;
      WordSeq labels;
      for (size_t k = start; k < end; ++k) {
        const Utterance& u = data.warm_start_set[order[k]];
        batch.length += u.features.length;
        batch.values.insert(batch.values.end(), u.features.values.begin(),
                            u.features.values.end());
        const WordSeq& y = data.warm_start_labels[order[k]];
        labels.insert(labels.end(), y.begin(), y.end());
      }
      const Gradients g =
          Backward(params, Forward(params, batch, true), labels);
      params = ApplyUpdate(params, g, config.learning_rate);
    }
  }
  return params;
}

std::vector<WordSeq> ClientCorrectionWords(const TaskData& data,
                                           int max_word_len_diff,
                                           bool with_multiplicity) {
  std::vector<WordSeq> out;
  for (const ClientDataset& client : data.clients) {
    WordSeq words;
    for (const ClientExample& ex : client.examples) {
      if (!IsUsableCorrection(ex, max_word_len_diff)) continue;
      const WordSeq w = CorrectedWords(ex, with_multiplicity);
      words.insert(words.end(), w.begin(), w.end());
    }
    out.push_back(std::move(words));
  }
  return out;
}

World BuildWorld(const ExperimentConfig& config, uint64_t seed) {
  config.Validate();
  World world;
  world.seed = seed;
  world.data = GenerateTask(config.task, seed);
  world.initial_model =
      WarmStart(config.arch(), world.data, config.warm_start, seed);

  DpHistogramOptions dp;
  dp.epsilon = config.privacy.epsilon;
  dp.clip_per_client = config.privacy.clip_per_client;
  dp.floor = config.privacy.floor;
  dp.domain_size = config.task.vocab_size;
  world.freq = DpHistogram(
      ClientCorrectionWords(world.data, config.round.max_word_len_diff,
                            config.round.weight_multiplicity),
      dp, Rng::Derive(seed, kPrivacy));

  std::vector<WordSeq> refs;
  for (const Utterance& u : world.data.accuracy_set) refs.push_back(u.truth);
  world.acc = AccuracyTable(refs, world.data.accuracy_set_incumbent);

  world.initial_wer =
      EvaluateWer(world.initial_model, world.data.eval_set,
                  world.data.corrected_words, config.round.execution);
  return world;
}

ArmRun RunArm(const ExperimentConfig& config, const World& world, Arm arm,
              const PayloadSink& download_sink) {
  RoundConfig rc = ConfigureArm(config.round, arm);
  rc.seed = world.seed;
  ArmRun run;
  run.arm = arm;
  run.seed = world.seed;
  run.initial_wer = world.initial_wer;
  ServerState state{world.initial_model, 0};
  Federation fed;
  fed.pool = world.data.clients;
  fed.freq = &world.freq;
  fed.acc = &world.acc;
  fed.eval_set = world.data.eval_set;
  fed.target_words = &world.data.corrected_words;
  fed.download_sink = download_sink;
  try {
    for (int r = 0; r < rc.rounds; ++r) {
      run.rounds.push_back(RunRound(state, rc, fed).metrics);
    }
  } catch (const NoEligibleClientsError& e) {
    run.aborted = true;
    run.abort_reason = e.what();
  }
  run.final_model = std::move(state.params);
  return run;
}

namespace {

std::string FormatRate(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

}  // namespace

std::string SummaryTable(const std::vector<ArmRun>& runs) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %6s %10s %10s %10s %10s %7s\n",
                "arm", "seed", "init_gen", "init_tgt", "final_gen",
                "final_tgt", "rounds");
  os << line;
  std::map<int, std::vector<const ArmRun*>> by_arm;
  for (const ArmRun& r : runs) {
    by_arm[static_cast<int>(r.arm)].push_back(&r);
    const bool has = !r.rounds.empty();
    std::snprintf(
        line, sizeof(line), "%-12s %6llu %10s %10s %10s %10s %7zu%s\n",
        ArmName(r.arm), static_cast<unsigned long long>(r.seed),
        FormatRate(r.initial_wer.general_wer()).c_str(),
        FormatRate(r.initial_wer.target_wer()).c_str(),
        has ? FormatRate(r.final_round().general_wer).c_str() : "n/a",
        has ? FormatRate(r.final_round().target_wer).c_str() : "n/a",
        r.rounds.size(), r.aborted ? "  (aborted: no eligible clients)" : "");
    os << line;
  }
  os << "\nmean over seeds\n";
  for (const auto& [arm, list] : by_arm) {
    double gen = 0.0, tgt = 0.0;
    int n = 0;
    for (const ArmRun* r : list) {
      if (r->rounds.empty() || !r->final_round().target_wer) continue;
      gen += r->final_round().general_wer;
      tgt += *r->final_round().target_wer;
      ++n;
    }
    std::snprintf(line, sizeof(line), "%-12s %6d %10s %10s %10s %10s\n",
                  ArmName(static_cast<Arm>(arm)), n, "", "",
                  n ? FormatRate(gen / n).c_str() : "n/a",
                  n ? FormatRate(tgt / n).c_str() : "n/a");
    os << line;
  }
  return os.str();
}

}  // namespace fedsim
