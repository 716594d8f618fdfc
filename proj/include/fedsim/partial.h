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

#ifndef FEDSIM_PARTIAL_H_
#define FEDSIM_PARTIAL_H_

#include <set>
#include <string>

#include "fedsim/model.h"

namespace fedsim {

// Which variables clients train. Frozen layers always form a consecutive
// bottom block of the encoder stack.
struct TrainableSet {
  enum class Mode { kFull, kDecoderOnly, kDecoderPlusTopK };

  Mode mode = Mode::kFull;
  int k = 0;  // only for kDecoderPlusTopK

  static TrainableSet Full() { return {Mode::kFull, 0}; }
  static TrainableSet DecoderOnly() { return {Mode::kDecoderOnly, 0}; }
  static TrainableSet DecoderPlusTopK(int k) {
    return {Mode::kDecoderPlusTopK, k};
  }

  // "full", "decoder_only" or "decoder_plus_top_k:<k>".
  static TrainableSet Parse(const std::string& text);
  std::string ToString() const;

  friend bool operator==(const TrainableSet&, const TrainableSet&) = default;
};

// Names of the trainable variables for `arch`. Throws ConfigError when k is
// not in [1, number of hidden layers].
std::set<std::string> Resolve(const TrainableSet& set, const ModelArch& arch);

// Marks exactly the variables in `trainable` as trainable and every other
// variable as frozen. Newly trainable variables are widened to f32.
// Throws ConfigError on a name that is not in `params`.
ParameterSet Freeze(const ParameterSet& params,
                    const std::set<std::string>& trainable);

}  // namespace fedsim

#endif  // FEDSIM_PARTIAL_H_
