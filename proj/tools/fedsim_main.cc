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

// fedsim: run federated experiments, generate synthetic data, audit payloads.
//
//   fedsim run --config <path> [--seed N] [--arm NAME]... [--out DIR]
//   fedsim gen-data --task <path> --out DIR [--seed N]
//   fedsim audit-payload --in <payload file>
//
// Exit codes: 0 ok, 1 runtime failure, 2 configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/errors.h"
#include "fedsim/experiment.h"
#include "fedsim/payload.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fedsim::ConfigError("cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), {}};
}

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fedsim::Error("cannot write '" + path.string() + "'");
  return out;
}

std::string SeedTag(uint64_t seed) { return "seed" + std::to_string(seed); }

int Run(const std::string& config_path, std::optional<uint64_t> seed,
        const std::vector<std::string>& arm_names, const std::string& out_dir,
        bool write_payloads) {
  fedsim::ExperimentConfig config = fedsim::LoadExperimentConfig(config_path);
  std::vector<fedsim::Arm> arms(std::begin(fedsim::kAllArms),
                                std::end(fedsim::kAllArms));
  if (!arm_names.empty()) {
    arms.clear();
    for (const std::string& name : arm_names) {
      arms.push_back(fedsim::ParseArm(name));
    }
  }
  std::vector<uint64_t> seeds = config.seeds;
  if (seed) seeds = {*seed};

  fs::create_directories(out_dir);
  OpenOut(fs::path(out_dir) / "config.json")
      << fedsim::ExperimentConfigToJson(config) << "\n";

  std::vector<fedsim::ArmRun> runs;
  bool aborted = false;
  for (uint64_t s : seeds) {
    const fedsim::World world = fedsim::BuildWorld(config, s);
    {
      auto out = OpenOut(fs::path(out_dir) / ("freq_" + SeedTag(s) + ".tsv"));
      fedsim::WriteTable(out, world.freq.counts);
    }
    {
      auto out = OpenOut(fs::path(out_dir) / ("acc_" + SeedTag(s) + ".tsv"));
      fedsim::WriteTable(out, world.acc.accuracy);
    }
    for (fedsim::Arm arm : arms) {
      fedsim::ExperimentConfig arm_config = config;
      const std::string tag =
          std::string(fedsim::ArmName(arm)) + "_" + SeedTag(s);
      fedsim::PayloadSink sink;
      if (write_payloads) {
        sink = [&](int round, std::span<const uint8_t> wire) {
          auto out = OpenOut(fs::path(out_dir) /
                             ("payload_" + tag + "_round" +
                              std::to_string(round) + ".bin"));
          out.write(reinterpret_cast<const char*>(wire.data()),
                    static_cast<std::streamsize>(wire.size()));
        };
      }
      fedsim::ArmRun run = fedsim::RunArm(arm_config, world, arm, sink);
      auto out = OpenOut(fs::path(out_dir) / ("metrics_" + tag + ".jsonl"));
      for (const fedsim::MetricsRecord& m : run.rounds) {
        out << fedsim::ToJsonLine(m) << "\n";
      }
      if (run.aborted) {
        std::cerr << "arm " << fedsim::ArmName(arm) << " seed " << s
                  << " aborted: " << run.abort_reason << "\n";
        aborted = true;
      }
      runs.push_back(std::move(run));
    }
  }
  const std::string summary = fedsim::SummaryTable(runs);
  OpenOut(fs::path(out_dir) / "summary.txt") << summary;
  std::cout << summary;
  return aborted ? kExitRuntime : 0;
}

nlohmann::json UtteranceJson(const fedsim::Features& f,
                             const fedsim::WordSeq& truth) {
  return {{"truth", truth}, {"feature_dim", f.dim}, {"features", f.values}};
}

int GenData(const std::string& task_path, const std::string& out_dir,
            uint64_t seed) {
  const fedsim::TaskSpec task = fedsim::ParseTaskSpec(ReadFile(task_path));
  const fedsim::TaskData data = fedsim::GenerateTask(task, seed);
  fs::create_directories(out_dir);
  {
    auto out = OpenOut(fs::path(out_dir) / "clients.jsonl");
    for (const fedsim::ClientDataset& c : data.clients) {
      nlohmann::json examples = nlohmann::json::array();
      for (const fedsim::ClientExample& ex : c.examples) {
        nlohmann::json e = UtteranceJson(ex.features, ex.truth);
        e["incumbent"] = ex.incumbent_transcript;
        e["final"] = ex.final_transcript;
        e["is_correction"] = ex.is_correction;
        examples.push_back(std::move(e));
      }
      out << nlohmann::json{{"client_id", c.client_id},
                            {"examples", examples}}
                 .dump()
          << "\n";
    }
  }
  {
    auto out = OpenOut(fs::path(out_dir) / "eval.jsonl");
    for (const fedsim::Utterance& u : data.eval_set) {
      out << UtteranceJson(u.features, u.truth).dump() << "\n";
    }
  }
  {
    auto out = OpenOut(fs::path(out_dir) / "accuracy_eval.jsonl");
    for (size_t i = 0; i < data.accuracy_set.size(); ++i) {
      nlohmann::json j = UtteranceJson(data.accuracy_set[i].features,
                                       data.accuracy_set[i].truth);
      j["incumbent"] = data.accuracy_set_incumbent[i];
      out << j.dump() << "\n";
    }
  }
  {
    auto out = OpenOut(fs::path(out_dir) / "corrected_words.txt");
    for (int w : data.corrected_words) out << w << "\n";
  }
  {
    auto out = OpenOut(fs::path(out_dir) / "incumbent.tsv");
    for (const auto& [hard, partner] : data.incumbent.confusion()) {
      out << hard << "\t" << partner << "\t"
          << data.incumbent.error_rate().at(hard) << "\n";
    }
  }
  std::cout << "wrote " << data.clients.size() << " clients, "
            << data.eval_set.size() << " eval utterances, "
            << data.corrected_words.size() << " corrected words to "
            << out_dir << "\n";
  return 0;
}

int AuditPayload(const std::string& path) {
  const std::string bytes = ReadFile(path);
  std::cout << fedsim::DescribePayload(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with weighted client aggregation"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::vector<std::string> arm_names;
  uint64_t seed = 0;
  bool write_payloads = false;
  auto* run = app.add_subcommand("run", "Run an experiment or ablation ladder");
  run->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seeds");
  run->add_option("--arm", arm_names,
                  "initial|select|filter|wca-freq|wca-freqacc, repeatable "
                  "(default: all)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--write-payloads", write_payloads,
                "Write every round's download payload");

  std::string task_path, gen_out;
  uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic task");
  gen->add_option("--task", task_path, "Task spec (JSON)")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Data seed");

  std::string payload_path;
  auto* audit = app.add_subcommand("audit-payload", "Decode a payload file");
  audit->add_option("--in", payload_path, "Payload file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      return Run(config_path,
                 *seed_opt ? std::optional<uint64_t>(seed) : std::nullopt,
                 arm_names,
                 out_dir, write_payloads);
    }
    if (*gen) return GenData(task_path, gen_out, gen_seed);
    if (*audit) return AuditPayload(payload_path);
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
