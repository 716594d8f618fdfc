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

#include "fedsim/partial.h"

#include "fedsim/errors.h"

namespace fedsim {

namespace {
constexpr char kTopKPrefix[] = "decoder_plus_top_k:";
}  // namespace

TrainableSet TrainableSet::Parse(const std::string& text) {
  if (text == "full") return Full();
  if (text == "decoder_only") return DecoderOnly();
  const std::string prefix = kTopKPrefix;
  if (text.rfind(prefix, 0) == 0) {
    const std::string digits = text.substr(prefix.size());
    size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(digits, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != digits.size() || digits.empty() || k < 1) {
      throw ConfigError("bad trainable set '" + text + "'");
    }
    return DecoderPlusTopK(k);
  }
  throw ConfigError("unknown trainable set '" + text +
                    "' (expected full, decoder_only, decoder_plus_top_k:<k>)");
}

std::string TrainableSet::ToString() const {
  switch (mode) {
    case Mode::kFull:
      return "full";
    case Mode::kDecoderOnly:
      return "decoder_only";
    case Mode::kDecoderPlusTopK:
      return kTopKPrefix + std::to_string(k);
  }
  return "";
}

std::set<std::string> Resolve(const TrainableSet& set, const ModelArch& arch) {
  arch.Validate();
  std::set<std::string> names = {kDecoderMatrix, kDecoderBias};
  int first_trainable = arch.num_hidden();
  switch (set.mode) {
    case TrainableSet::Mode::kFull:
      first_trainable = 0;
      break;
    case TrainableSet::Mode::kDecoderOnly:
      break;
    case TrainableSet::Mode::kDecoderPlusTopK:
      if (set.k < 1 || set.k > arch.num_hidden()) {
        throw ConfigError("top-k " + std::to_string(set.k) +
                          " outside [1, " + std::to_string(arch.num_hidden()) +
                          "]");
      }
      first_trainable = arch.num_hidden() - set.k;
      break;
  }
  for (int i = first_trainable; i < arch.num_hidden(); ++i) {
    names.insert(LayerMatrixName(i));
    names.insert(LayerBiasName(i));
  }
  return names;
}

ParameterSet Freeze(const ParameterSet& params,
                    const std::set<std::string>& trainable) {
  for (const std::string& name : trainable) {
    if (params.Find(name) == nullptr) {
      throw ConfigError("unknown variable '" + name + "'");
    }
  }
  ParameterSet out = params;
  for (Variable& v : out.mutable_variables()) {
    v.trainable = trainable.contains(v.name);
    if (v.trainable) v.precision = Precision::kF32;
  }
  return out;
}

}  // namespace fedsim
