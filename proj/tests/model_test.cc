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

#include "fedsim/model.h"

#include <gtest/gtest.h>

#include <cmath>

#include "fedsim/errors.h"
#include "fedsim/partial.h"
#include "fedsim/payload.h"
#include "test_util.h"

namespace fedsim {
namespace {

using testing::kReferenceArch;
using testing::kTinyArch;
using testing::RandomFeatures;
using testing::RandomLabels;

TEST(InitModelTest, DeterministicPerSeed) {
  EXPECT_TRUE(InitModel(kTinyArch, 7) == InitModel(kTinyArch, 7));
  EXPECT_FALSE(InitModel(kTinyArch, 7) == InitModel(kTinyArch, 8));
}

TEST(InitModelTest, BiasesAreZero) {
  const ParameterSet params = InitModel(kReferenceArch, 3);
  for (const Variable& v : params.variables()) {
    if (v.is_matrix()) continue;
    for (float x : v.data) EXPECT_EQ(x, 0.0f) << v.name;
  }
}

TEST(InitModelTest, TinyParameterCount) {
  EXPECT_EQ(kTinyArch.ParameterCount(), 25u);
  EXPECT_EQ(InitModel(kTinyArch, 1).ElementCount(), 25u);
}

TEST(InitModelTest, NamesShapesAndLayerIndices) {
  const ParameterSet p = InitModel(kReferenceArch, 1);
  EXPECT_EQ(p.Get("layer0/matrix").shape, (std::vector<uint32_t>{16, 32}));
  EXPECT_EQ(p.Get("layer2/bias").shape, (std::vector<uint32_t>{32}));
  EXPECT_EQ(p.Get(kDecoderMatrix).shape, (std::vector<uint32_t>{32, 200}));
  EXPECT_EQ(p.Get(kDecoderMatrix).layer_index, 3);
  EXPECT_TRUE(InferArch(p) == kReferenceArch);
}

TEST(ParameterSetTest, RejectsBadVariables) {
  ParameterSet p;
  Variable v{"m", 0, VariableKind::kMatrix, {2, 2}, Precision::kF32,
             {1, 2, 3, 4}, true};
  p.Add(v);
  EXPECT_THROW(p.Add(v), ConfigError);
  Variable bad_shape = v;
  bad_shape.name = "n";
  bad_shape.data.pop_back();
  EXPECT_THROW(p.Add(bad_shape), ShapeError);
  Variable f16_bias{"b", 0, VariableKind::kBias, {1}, Precision::kF16, {0},
                    false};
  EXPECT_THROW(p.Add(f16_bias), ContractError);
  Variable f16_trainable = v;
  f16_trainable.name = "t";
  f16_trainable.precision = Precision::kF16;
  EXPECT_THROW(p.Add(f16_trainable), ContractError);
  EXPECT_THROW(p.Get("missing"), ConfigError);
}

TEST(ForwardTest, ZeroModelGivesZeroLogits) {
  ParameterSet p = InitModel(kTinyArch, 1);
  for (Variable& v : p.mutable_variables()) {
    std::fill(v.data.begin(), v.data.end(), 0.0f);
  }
  Rng rng(1);
  const ForwardTrace t = Forward(p, RandomFeatures(3, 2, rng), false);
  for (double z : t.logits) EXPECT_EQ(z, 0.0);
  const std::vector<int> labels{0, 1, 2};
  EXPECT_NEAR(Loss(p, RandomFeatures(3, 2, rng), labels), std::log(4.0),
              1e-15);
}

TEST(ForwardTest, CheckpointingLeavesLogitsUnchanged) {
  const ParameterSet p = InitModel(kReferenceArch, 3);
  Rng rng(3);
  const Features f = RandomFeatures(6, 16, rng);
  const ForwardTrace a = Forward(p, f, true);
  const ForwardTrace b = Forward(p, f, false);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_TRUE(a.pre_activations.empty());
  EXPECT_EQ(b.pre_activations.size(), 3u);
}

TEST(ForwardTest, HandBuiltOneLayerModel) {
  // feat 2 -> hidden 2 (identity, bias {0, -1}) -> vocab 2.
  ParameterSet p;
  p.Add({"layer0/matrix", 0, VariableKind::kMatrix, {2, 2}, Precision::kF32,
         {1, 0, 0, 1}, true});
  p.Add({"layer0/bias", 0, VariableKind::kBias, {2}, Precision::kF32,
         {0, -1}, true});
  p.Add({kDecoderMatrix, 1, VariableKind::kMatrix, {2, 2}, Precision::kF32,
         {2, 1, 3, -1}, true});
  p.Add({kDecoderBias, 1, VariableKind::kBias, {2}, Precision::kF32,
         {0.5f, 0}, true});
  Features f{1, 2, {1.5f, 3.0f}};
  // h = relu([1.5, 2.0]) = [1.5, 2]; logits = [1.5*2 + 2*3 + 0.5,
  // 1.5*1 - 2] = [9.5, -0.5].
  const ForwardTrace t = Forward(p, f, false);
  ASSERT_EQ(t.logits.size(), 2u);
  EXPECT_DOUBLE_EQ(t.logits[0], 9.5);
  EXPECT_DOUBLE_EQ(t.logits[1], -0.5);
  EXPECT_EQ(Predict(p, f), (std::vector<int>{0}));
}

TEST(ForwardTest, RejectsWrongFeatureWidth) {
  Rng rng(1);
  EXPECT_THROW(Forward(InitModel(kTinyArch, 1), RandomFeatures(2, 3, rng),
                       true),
               ShapeError);
}

// Central differences in double on the float-stored parameter, using the
// perturbation that float storage actually realizes.
double NumericGradient(ParameterSet p, const std::string& name, size_t index,
                       const Features& f, const std::vector<int>& y,
                       double step) {
  float& x = p.FindMutable(name)->data[index];
  const float x0 = x;
  x = static_cast<float>(x0 + step);
  const double hi_x = x;
  const double hi = Loss(p, f, y);
  x = static_cast<float>(x0 - step);
  const double lo_x = x;
  const double lo = Loss(p, f, y);
  x = x0;
  return (hi - lo) / (hi_x - lo_x);
}

TEST(BackwardTest, MatchesFiniteDifferences) {
  const ModelArch arch{6, 4, {5, 5, 5}};
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    const ParameterSet p = InitModel(arch, seed);
    Rng rng(seed + 100);
    const Features f = RandomFeatures(4, arch.feature_dim, rng);
    const std::vector<int> y = RandomLabels(4, arch.vocab_size, rng);
    const Gradients g = Backward(p, Forward(p, f, true), y);
    const std::vector<std::string> names = p.Names();
    for (int k = 0; k < 20; ++k) {
      const std::string& name = names[rng.Below(names.size())];
      const size_t idx = rng.Below(p.Get(name).size());
      const double numeric = NumericGradient(p, name, idx, f, y, 1e-4);
      const double analytic = g.at(name)[idx];
      EXPECT_LT(std::abs(analytic - numeric),
                1e-3 * std::max(std::abs(numeric), 1e-6))
          << name << "[" << idx << "] analytic " << analytic << " numeric "
          << numeric;
    }
  }
}

TEST(BackwardTest, AllFrozenGivesEmptyMap) {
  const ParameterSet p = Freeze(InitModel(kTinyArch, 1), {});
  Rng rng(1);
  const Features f = RandomFeatures(3, 2, rng);
  EXPECT_TRUE(Backward(p, Forward(p, f, true), RandomLabels(3, 4, rng))
                  .empty());
}

TEST(BackwardTest, DuplicatedExampleGivesSameMeanGradient) {
  const ParameterSet p = InitModel(kReferenceArch, 2);
  Rng rng(2);
  const Features f = RandomFeatures(5, 16, rng);
  const std::vector<int> y = RandomLabels(5, 200, rng);
  Features twice = f;
  twice.length *= 2;
  twice.values.insert(twice.values.end(), f.values.begin(), f.values.end());
  std::vector<int> yy = y;
  yy.insert(yy.end(), y.begin(), y.end());
  const Gradients single = Backward(p, Forward(p, f, true), y);
  const Gradients doubled = Backward(p, Forward(p, twice, true), yy);
  for (const auto& [name, g] : single) {
    EXPECT_LT(testing::MaxRelativeError(g, doubled.at(name)), 1e-6) << name;
  }
}

TEST(BackwardTest, CheckpointingIsBitExact) {
  const ParameterSet p = InitModel(kReferenceArch, 5);
  Rng rng(5);
  const Features f = RandomFeatures(7, 16, rng);
  const std::vector<int> y = RandomLabels(7, 200, rng);
  EXPECT_EQ(Backward(p, Forward(p, f, true), y),
            Backward(p, Forward(p, f, false), y));
}

TEST(BackwardTest, StopsAtLowestTrainableLayer) {
  const ParameterSet p = Freeze(InitModel(kReferenceArch, 5),
                                Resolve(TrainableSet::DecoderPlusTopK(1),
                                        kReferenceArch));
  Rng rng(5);
  const Features f = RandomFeatures(3, 16, rng);
  const Gradients g = Backward(p, Forward(p, f, true), RandomLabels(3, 200, rng));
  EXPECT_EQ(g.size(), 4u);
  EXPECT_TRUE(g.contains("layer2/matrix"));
  EXPECT_FALSE(g.contains("layer1/matrix"));
}

TEST(BackwardTest, RejectsBadLabels) {
  const ParameterSet p = InitModel(kTinyArch, 1);
  Rng rng(1);
  const ForwardTrace t = Forward(p, RandomFeatures(2, 2, rng), true);
  EXPECT_THROW(Backward(p, t, std::vector<int>{0}), ShapeError);
  EXPECT_THROW(Backward(p, t, std::vector<int>{0, 4}), DataError);
}

TEST(MemoryTest, TinyParameterTerm) {
  const MemoryEstimate m =
      PeakMemoryEstimate(InitModel(kTinyArch, 1), 1, false);
  EXPECT_EQ(m.parameter_bytes, 100);
  EXPECT_EQ(m.gradient_bytes, 100);
}

TEST(MemoryTest, CheckpointingReducesActivations) {
  const ParameterSet p = InitModel(kReferenceArch, 1);
  const MemoryEstimate on = PeakMemoryEstimate(p, 10, true);
  const MemoryEstimate off = PeakMemoryEstimate(p, 10, false);
  EXPECT_LT(on.activation_bytes, off.activation_bytes);
  EXPECT_EQ(on.parameter_bytes, off.parameter_bytes);
}

TEST(MemoryTest, OmcShrinksParameterTermByHalfMatrixWidth) {
  const ParameterSet full = InitModel(kReferenceArch, 1);
  const ParameterSet frozen = Freeze(
      full, Resolve(TrainableSet::DecoderOnly(), kReferenceArch));
  const ParameterSet omc = ApplyPolicy(frozen, {true});
  int64_t frozen_matrix = 0;
  for (const Variable& v : frozen.variables()) {
    if (v.is_matrix() && !v.trainable) frozen_matrix += v.size();
  }
  EXPECT_EQ(PeakMemoryEstimate(omc, 4, true).parameter_bytes,
            PeakMemoryEstimate(frozen, 4, true).parameter_bytes -
                2 * frozen_matrix);
}

}  // namespace
}  // namespace fedsim
