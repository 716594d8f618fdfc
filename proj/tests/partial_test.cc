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

#include <gtest/gtest.h>

#include "fedsim/errors.h"
#include "fedsim/payload.h"
#include "test_util.h"

namespace fedsim {
namespace {

using testing::kReferenceArch;

using Names = std::set<std::string>;

TEST(TrainableSetTest, ParseAndPrint) {
  for (const char* text : {"full", "decoder_only", "decoder_plus_top_k:2"}) {
    EXPECT_EQ(TrainableSet::Parse(text).ToString(), text);
  }
  EXPECT_EQ(TrainableSet::Parse("decoder_plus_top_k:1"),
            TrainableSet::DecoderPlusTopK(1));
  for (const char* bad : {"", "all", "decoder_plus_top_k:", "decoder_plus_top_k:0",
                          "decoder_plus_top_k:x", "decoder_plus_top_k:1x"}) {
    EXPECT_THROW(TrainableSet::Parse(bad), ConfigError) << bad;
  }
}

TEST(ResolveTest, DecoderOnly) {
  EXPECT_EQ(Resolve(TrainableSet::DecoderOnly(), kReferenceArch),
            (Names{kDecoderMatrix, kDecoderBias}));
}

TEST(ResolveTest, TopOneIsHighestLayer) {
  EXPECT_EQ(Resolve(TrainableSet::DecoderPlusTopK(1), kReferenceArch),
            (Names{kDecoderMatrix, kDecoderBias, "layer2/matrix",
                   "layer2/bias"}));
}

TEST(ResolveTest, FullIsEverything) {
  const std::vector<std::string> all = InitModel(kReferenceArch, 1).Names();
  EXPECT_EQ(Resolve(TrainableSet::Full(), kReferenceArch),
            Names(all.begin(), all.end()));
  EXPECT_EQ(Resolve(TrainableSet::DecoderPlusTopK(3), kReferenceArch),
            Names(all.begin(), all.end()));
}

TEST(ResolveTest, KOutOfRange) {
  EXPECT_THROW(Resolve(TrainableSet::DecoderPlusTopK(0), kReferenceArch),
               ConfigError);
  EXPECT_THROW(Resolve(TrainableSet::DecoderPlusTopK(4), kReferenceArch),
               ConfigError);
}

TEST(FreezeTest, FrozenBlockIsConsecutiveBottom) {
  for (int k = 1; k <= 3; ++k) {
    const ParameterSet p = Freeze(
        InitModel(kReferenceArch, 1),
        Resolve(TrainableSet::DecoderPlusTopK(k), kReferenceArch));
    for (const Variable& v : p.variables()) {
      EXPECT_EQ(v.trainable, v.layer_index >= 3 - k) << v.name << " k=" << k;
    }
  }
}

TEST(FreezeTest, UnknownNameFails) {
  EXPECT_THROW(Freeze(InitModel(kReferenceArch, 1), {"layer9/matrix"}),
               ConfigError);
}

TEST(FreezeTest, UnfreezingWidensToF32) {
  const ParameterSet frozen = ApplyPolicy(
      Freeze(InitModel(kReferenceArch, 1), {kDecoderMatrix, kDecoderBias}),
      {true});
  ASSERT_EQ(frozen.Get("layer0/matrix").precision, Precision::kF16);
  const ParameterSet thawed =
      Freeze(frozen, Resolve(TrainableSet::Full(), kReferenceArch));
  EXPECT_EQ(thawed.Get("layer0/matrix").precision, Precision::kF32);
  EXPECT_EQ(thawed.Get("layer0/matrix").data,
            frozen.Get("layer0/matrix").data);
}

TEST(FreezeTest, TrainableElementCounts) {
  const ParameterSet p = Freeze(
      InitModel(kReferenceArch, 1),
      Resolve(TrainableSet::DecoderPlusTopK(1), kReferenceArch));
  EXPECT_EQ(p.TrainableElementCount(), 32u * 200 + 200 + 32 * 32 + 32);
}

}  // namespace
}  // namespace fedsim
