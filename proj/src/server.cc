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

#include "fedsim/server.h"

#include <algorithm>
#include <exception>
#include <map>

#include "fedsim/errors.h"

namespace fedsim {

namespace {
constexpr uint64_t kSelectionStream = 0x5e1ec7;
}  // namespace

const char* AggregationName(Aggregation rule) {
  switch (rule) {
    case Aggregation::kSimpleAvg:
      return "simple_avg";
    case Aggregation::kExampleWeighted:
      return "example_weighted";
    case Aggregation::kWca:
      return "wca";
  }
  return "";
}

Aggregation ParseAggregation(const std::string& text) {
  if (text == "simple_avg") return Aggregation::kSimpleAvg;
  if (text == "example_weighted") return Aggregation::kExampleWeighted;
  if (text == "wca") return Aggregation::kWca;
  throw ConfigError("unknown aggregation '" + text + "'");
}

void RoundConfig::Validate() const {
  if (report_goal < 1) throw ConfigError("report_goal must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (rounds < 0) throw ConfigError("rounds must be >= 0");
  if (max_word_len_diff < 0) {
    throw ConfigError("max_word_len_diff must be >= 0");
  }
  if (data_filtering && !client_selection) {
    throw ConfigError("data_filtering requires client_selection");
  }
}

SelectionResult SelectClients(std::span<const ClientDataset> pool,
                              const EligibilitySpec& spec, int report_goal,
                              Rng& rng) {
  if (pool.empty()) throw ConfigError("client pool is empty");
  std::vector<int> order(pool.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  SelectionResult result;
  // Lazy Fisher-Yates: each probe draws the next client without replacement.
  for (size_t i = 0; i < order.size(); ++i) {
    std::swap(order[i], order[i + rng.Below(order.size() - i)]);
    const ClientDataset& client = pool[order[i]];
    ++result.probed;
    if (EligibilityTest(client, spec)) {
      result.client_ids.push_back(client.client_id);
      if (static_cast<int>(result.client_ids.size()) == report_goal) {
        return result;
      }
    }
  }
  if (result.client_ids.empty()) {
    throw NoEligibleClientsError("no client in a pool of " +
                                 std::to_string(pool.size()) +
                                 " passes the eligibility test");
  }
  result.pool_exhausted = true;
  return result;
}

SelectionResult SampleClients(std::span<const ClientDataset> pool,
                              int report_goal, Rng& rng) {
  if (pool.empty()) throw ConfigError("client pool is empty");
  std::vector<int> order(pool.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  SelectionResult result;
  const size_t n = std::min<size_t>(report_goal, pool.size());
  for (size_t i = 0; i < n; ++i) {
    std::swap(order[i], order[i + rng.Below(order.size() - i)]);
    result.client_ids.push_back(pool[order[i]].client_id);
    ++result.probed;
  }
  result.pool_exhausted = static_cast<int>(n) < report_goal;
  return result;
}

PreparedModel PrepareModel(const ParameterSet& params,
                           const RoundConfig& config) {
  const std::set<std::string> trainable =
      Resolve(config.trainable, InferArch(params));
  PreparedModel prepared;
  ParameterSet frozen = Freeze(params, trainable);
  ParameterSet quantized = ApplyPolicy(frozen, {config.omc_enabled},
                                       &prepared.quantization);
  prepared.params = DequantizeTrainable(quantized, trainable);
  prepared.payload = Serialize(prepared.params);
  prepared.raw_bytes =
      static_cast<int64_t>(MeasureTransport(prepared.payload, false));
  prepared.compressed_bytes =
      config.compress_transport
          ? static_cast<int64_t>(MeasureTransport(prepared.payload, true))
          : prepared.raw_bytes;
  return prepared;
}

ParameterSet GradientsAsParameters(const ParameterSet& model,
                                   const Gradients& gradients) {
  ParameterSet out;
  for (const Variable& v : model.variables()) {
    auto it = gradients.find(v.name);
    if (it == gradients.end()) continue;
    Variable g;
    g.name = v.name;
    g.layer_index = v.layer_index;
    g.kind = v.kind;
    g.shape = v.shape;
    g.precision = Precision::kF32;
    g.trainable = true;
    g.data = it->second;
    out.Add(std::move(g));
  }
  if (out.variables().size() != gradients.size()) {
    throw ConfigError("gradient for a variable the model does not have");
  }
  return out;
}

std::optional<Gradients> Aggregate(std::span<const LocalUpdate> updates,
                                   Aggregation rule) {
  if (updates.empty()) throw ContractError("no updates to aggregate");
  std::vector<const LocalUpdate*> order;
  for (const LocalUpdate& u : updates) {
    if (u.weight > 0.0) order.push_back(&u);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const LocalUpdate* a, const LocalUpdate* b) {
                     return a->client_id < b->client_id;
                   });
  if (order.empty()) return std::nullopt;

  // Each client enters as coefficient * G_i.
  std::vector<double> coeff;
  double denom = 0.0;
  for (const LocalUpdate* u : order) {
    switch (rule) {
      case Aggregation::kSimpleAvg:
        coeff.push_back(1.0 / u->weight);
        denom += 1.0;
        break;
      case Aggregation::kExampleWeighted:
        coeff.push_back(u->example_count / u->weight);
        denom += u->example_count;
        break;
      case Aggregation::kWca:
        coeff.push_back(1.0);
        denom += u->weight;
        break;
    }
  }
  if (!(denom > 0.0)) return std::nullopt;

  std::map<std::string, std::vector<double>> sum;
  for (size_t i = 0; i < order.size(); ++i) {
    for (const auto& [name, values] : order[i]->gradient) {
      std::vector<double>& acc = sum[name];
      if (acc.empty()) {
        acc.assign(values.size(), 0.0);
      } else if (acc.size() != values.size()) {
        throw ShapeError("clients disagree on the shape of '" + name + "'");
      }
      for (size_t k = 0; k < values.size(); ++k) acc[k] += coeff[i] * values[k];
    }
  }
  Gradients out;
  for (auto& [name, values] : sum) {
    std::vector<float>& dst = out[name];
    dst.resize(values.size());
    for (size_t k = 0; k < values.size(); ++k) {
      dst[k] = static_cast<float>(values[k] / denom);
    }
  }
  return out;
}

ParameterSet ApplyUpdate(const ParameterSet& params, const Gradients& gradient,
                         double learning_rate) {
  ParameterSet out = params;
  for (const auto& [name, g] : gradient) {
    Variable* v = out.FindMutable(name);
    if (v == nullptr) throw ConfigError("unknown variable '" + name + "'");
    if (!v->trainable) throw ConfigError("variable '" + name + "' is frozen");
    if (v->size() != g.size()) {
      throw ShapeError("gradient for '" + name + "' has " +
                       std::to_string(g.size()) + " elements, variable has " +
                       std::to_string(v->size()));
    }
    for (size_t k = 0; k < g.size(); ++k) {
      v->data[k] = static_cast<float>(static_cast<double>(v->data[k]) -
                                      learning_rate * g[k]);
    }
  }
  return out;
}

namespace {

struct ClientResult {
  LocalUpdate update;
  int64_t upload_raw = 0;
  int64_t upload_compressed = 0;
  int64_t peak_memory = 0;
  int64_t filtered_out = 0;
  std::exception_ptr error;
};

ClientResult RunClient(const ClientDataset& client, const ParameterSet& model,
                       const RoundConfig& config, const WeightTables& tables) {
  ClientResult r;
  std::vector<ClientExample> batch;
  if (config.data_filtering) {
    batch = FilterBatch(client, config.eligibility(), config.batch_size);
    for (const ClientExample& ex : client.examples) {
      if (!IsUsableCorrection(ex, config.max_word_len_diff)) ++r.filtered_out;
    }
  } else {
    batch = FirstBatch(client, config.batch_size);
  }
  r.update = ComputeLocalUpdate(model, batch, config.weight_scheme, tables,
                                config.checkpointing);
  r.update.client_id = client.client_id;
  const Payload upload =
      Serialize(GradientsAsParameters(model, r.update.gradient));
  r.upload_raw = static_cast<int64_t>(MeasureTransport(upload, false));
  r.upload_compressed =
      config.compress_transport
          ? static_cast<int64_t>(MeasureTransport(upload, true))
          : r.upload_raw;
  r.peak_memory = PeakMemoryEstimate(model, static_cast<int>(r.update.positions),
                                     config.checkpointing)
                      .total();
  return r;
}

}  // namespace

RoundResult RunRound(ServerState& state, const RoundConfig& config,
                     const Federation& federation) {
  config.Validate();
  const int round = state.round + 1;
  Rng rng(Rng::Derive(config.seed, kSelectionStream, round));

  SelectionResult selection =
      config.client_selection
          ? SelectClients(federation.pool, config.eligibility(),
                          config.report_goal, rng)
          : SampleClients(federation.pool, config.report_goal, rng);
  std::vector<int> ids = selection.client_ids;
  std::sort(ids.begin(), ids.end());

  // Every client decodes the same wire bytes.
  const PreparedModel prepared = PrepareModel(state.params, config);
  const std::vector<uint8_t> wire =
      prepared.payload.Wire(config.compress_transport);
  if (federation.download_sink) federation.download_sink(round, wire);
  const ParameterSet client_model = Deserialize(Payload::FromWire(wire));

  std::map<int, const ClientDataset*> by_id;
  for (const ClientDataset& c : federation.pool) by_id[c.client_id] = &c;

  const WeightTables tables{federation.freq, federation.acc,
                            config.weight_multiplicity};
  const int64_t n = static_cast<int64_t>(ids.size());
  std::vector<ClientResult> results(n);
#pragma omp parallel for schedule(dynamic) \
    if (config.execution == Execution::kParallel)
  for (int64_t i = 0; i < n; ++i) {
    try {
      results[i] = RunClient(*by_id.at(ids[i]), client_model, config, tables);
    } catch (...) {
      results[i].error = std::current_exception();
    }
  }
  for (const ClientResult& r : results) {
    if (r.error) std::rethrow_exception(r.error);
  }

  RoundResult out;
  out.participants = ids;
  out.pool_exhausted = selection.pool_exhausted;
  MetricsRecord& m = out.metrics;
  m.round = round;
  m.participants = static_cast<int>(n);
  m.pool_exhausted = selection.pool_exhausted;
  m.download_raw_bytes = prepared.raw_bytes;
  m.download_compressed_bytes = prepared.compressed_bytes;
  m.quantization_overflow = prepared.quantization.overflow;
  m.quantization_underflow = prepared.quantization.underflow;

  std::vector<LocalUpdate> updates;
  int64_t memory = 0;
  for (ClientResult& r : results) {
    m.upload_raw_bytes += r.upload_raw;
    m.upload_compressed_bytes += r.upload_compressed;
    memory += r.peak_memory;
    m.training_examples += r.update.example_count;
    m.filtered_out_examples += r.filtered_out;
    m.weight_misses += r.update.weight_misses;
    m.total_weight += r.update.weight;
    updates.push_back(std::move(r.update));
  }
  if (n > 0) m.peak_memory_bytes = memory / n;

  out.aggregated = Aggregate(updates, config.aggregation);
  out.skipped = !out.aggregated.has_value();
  m.skipped = out.skipped;
  if (out.aggregated) {
    state.params =
        ApplyUpdate(state.params, *out.aggregated, config.learning_rate);
  }
  state.round = round;

  if (!federation.eval_set.empty()) {
    static const CorrectedWordList kNoWords;
    const WerReport report = EvaluateWer(
        state.params, federation.eval_set,
        federation.target_words ? *federation.target_words : kNoWords,
        config.execution);
    m.general_wer = report.general_wer();
    m.target_wer = report.target_wer();
  }
  return out;
}

std::vector<RoundResult> RunExperiment(ServerState& state,
                                       const RoundConfig& config,
                                       const Federation& federation) {
  config.Validate();
  std::vector<RoundResult> results;
  for (int r = 0; r < config.rounds; ++r) {
    results.push_back(RunRound(state, config, federation));
  }
  return results;
}

}  // namespace fedsim
