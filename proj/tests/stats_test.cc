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

#include "fedsim/stats.h"

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <set>
#include <sstream>

#include "fedsim/errors.h"
#include "test_util.h"

namespace fedsim {
namespace {

// --- private histogram -----------------------------------------------------

TEST(DpHistogramTest, HugeEpsilonGivesClippedCounts) {
  // Client words in first-occurrence order; clip 2 keeps the first two
  // distinct words of each client.
  const std::vector<WordSeq> clients = {{5, 5, 7, 9}, {7}, {9, 7, 5}, {}};
  DpHistogramOptions o;
  o.epsilon = 1e9;
  o.clip_per_client = 2;
  o.floor = 1.0;
  const FreqTable t = DpHistogram(clients, o, 3);
  EXPECT_EQ(t.counts, (std::map<int, double>{{5, 1}, {7, 3}, {9, 1}}));
  o.floor = 2.0;
  EXPECT_EQ(DpHistogram(clients, o, 3).counts,
            (std::map<int, double>{{5, 2}, {7, 3}, {9, 2}}));
}

TEST(DpHistogramTest, DomainReleasesEveryWord) {
  DpHistogramOptions o;
  o.epsilon = 1e9;
  o.domain_size = 4;
  const std::vector<WordSeq> clients = {{2}};
  const FreqTable t = DpHistogram(clients, o, 1);
  EXPECT_EQ(t.counts, (std::map<int, double>{{0, 1}, {1, 1}, {2, 1}, {3, 1}}));
}

TEST(DpHistogramTest, EmptyPoolFallsBackToFloor) {
  DpHistogramOptions o;
  o.floor = 1.5;
  const FreqTable t = DpHistogram({}, o, 1);
  EXPECT_TRUE(t.counts.empty());
  EXPECT_EQ(t.Lookup(42), 1.5);
  EXPECT_EQ(t.MaxCount(), 1.5);
  EXPECT_FALSE(t.Find(42).has_value());
}

TEST(DpHistogramTest, DeterministicPerSeed) {
  const std::vector<WordSeq> clients = {{1, 2}, {2, 3}};
  DpHistogramOptions o;
  EXPECT_EQ(DpHistogram(clients, o, 9).counts,
            DpHistogram(clients, o, 9).counts);
}

TEST(DpHistogramTest, NoisyCountIsUnbiased) {
  // Three clients all holding word 0: true count 3, far enough above the
  // floor at scale 1 for clamping to be negligible.
  std::vector<WordSeq> clients(3, WordSeq{0});
  for (int i = 0; i < 60; ++i) clients.push_back({0});  // true count 63
  DpHistogramOptions o;
  o.epsilon = 1.0;
  o.clip_per_client = 1;
  o.floor = 1.0;
  const int kSeeds = 10000;
  double sum = 0.0;
  for (int s = 0; s < kSeeds; ++s) sum += DpHistogram(clients, o, s).counts[0];
  const double mean = sum / kSeeds;
  const double sigma = std::sqrt(2.0 + 1.0 / 12.0) / std::sqrt(kSeeds);
  EXPECT_NEAR(mean, 63.0, 3 * sigma);
}

TEST(DpHistogramTest, RejectsBadOptions) {
  DpHistogramOptions o;
  o.epsilon = 0.0;
  EXPECT_THROW(DpHistogram({}, o, 1), ConfigError);
  o.epsilon = 1.0;
  o.clip_per_client = 0;
  EXPECT_THROW(DpHistogram({}, o, 1), ConfigError);
}

TEST(FreqTableTest, LookupAndMax) {
  FreqTable t;
  t.counts = {{1, 4.0}, {2, 9.0}};
  EXPECT_EQ(t.Lookup(1), 4.0);
  EXPECT_EQ(t.Lookup(3), 1.0);
  EXPECT_EQ(t.MaxCount(), 9.0);
}

// --- accuracy table --------------------------------------------------------

TEST(AccuracyTableTest, PerfectIncumbent) {
  const std::vector<WordSeq> refs = {{1, 2, 3}, {3, 3}};
  const AccTable t = AccuracyTable(refs, refs);
  for (const auto& [w, a] : t.accuracy) EXPECT_EQ(a, 1.0) << w;
}

TEST(AccuracyTableTest, HandCountedValues) {
  const std::vector<WordSeq> refs = {{7, 1}, {7, 7}, {7, 2}};
  const std::vector<WordSeq> hyps = {{7, 9}, {8, 7}, {7, 2}};
  const AccTable t = AccuracyTable(refs, hyps);
  EXPECT_EQ(t.Lookup(7), 0.75);
  EXPECT_EQ(t.Lookup(1), 0.0);
  EXPECT_EQ(t.Lookup(2), 1.0);
  EXPECT_EQ(t.Lookup(99), 1.0);
}

TEST(AccuracyTableTest, Errors) {
  EXPECT_THROW(AccuracyTable({}, {}), ConfigError);
  const std::vector<WordSeq> refs = {{1, 2}};
  const std::vector<WordSeq> hyps = {{1}};
  EXPECT_THROW(AccuracyTable(refs, hyps), ShapeError);
}

// --- word error rate -------------------------------------------------------


TEST(WerTest, NamedCases) {
  EXPECT_EQ(Wer(WordSeq{1, 2, 3}, WordSeq{1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(Wer(WordSeq{1, 2, 3}, WordSeq{1, 9, 3}), 1.0 / 3);
  EXPECT_EQ(Wer(WordSeq{1, 2}, WordSeq{1, 2, 3, 4}), 0.5);
  EXPECT_EQ(Wer(WordSeq{}, WordSeq{1, 2}), 1.0);
  EXPECT_EQ(Wer(WordSeq{1, 2, 3, 4}, WordSeq{1}), 3.0);
  EXPECT_THROW(Wer(WordSeq{1}, WordSeq{}), DataError);
}

TEST(WerTest, MatchesBreadthFirstOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    WordSeq hyp(rng.Below(7)), ref(1 + rng.Below(6));
    for (int& w : hyp) w = static_cast<int>(rng.Below(4));
    for (int& w : ref) w = static_cast<int>(rng.Below(4));
    ASSERT_EQ(EditDistance(hyp, ref), testing::BruteForceEditDistance(hyp, ref))
        << "trial " << trial;
  }
}

// Identity network: the prediction at each position is the argmax of the
// feature vector, so transcripts can be dictated.
ParameterSet Dictation(int vocab) {
  ParameterSet p;
  std::vector<float> eye(static_cast<size_t>(vocab) * vocab, 0.0f);
  for (int i = 0; i < vocab; ++i) eye[static_cast<size_t>(i) * vocab + i] = 1;
  const uint32_t v = vocab;
  p.Add({"layer0/matrix", 0, VariableKind::kMatrix, {v, v}, Precision::kF32,
         eye, true});
  p.Add({"layer0/bias", 0, VariableKind::kBias, {v}, Precision::kF32,
         std::vector<float>(vocab, 0.0f), true});
  p.Add({kDecoderMatrix, 1, VariableKind::kMatrix, {v, v}, Precision::kF32,
         eye, true});
  p.Add({kDecoderBias, 1, VariableKind::kBias, {v}, Precision::kF32,
         std::vector<float>(vocab, 0.0f), true});
  return p;
}

Utterance Dictate(const WordSeq& spoken, const WordSeq& truth, int vocab) {
  Utterance u;
  u.truth = truth;
  u.features.length = static_cast<int>(spoken.size());
  u.features.dim = vocab;
  u.features.values.assign(spoken.size() * vocab, 0.0f);
  for (size_t i = 0; i < spoken.size(); ++i) {
    u.features.values[i * vocab + spoken[i]] = 1.0f;
  }
  return u;
}

TEST(EvaluateWerTest, TargetSubsetByHand) {
  const int v = 6;
  const ParameterSet p = Dictation(v);
  EXPECT_EQ(Predict(p, Dictate({3, 1}, {3, 1}, v).features),
            (WordSeq{3, 1}));
  const std::vector<Utterance> eval = {
      Dictate({0, 1, 2}, {0, 1, 2}, v),  // target, 0 errors
      Dictate({1, 1}, {5, 1}, v),        // target, 1 error
      Dictate({2, 3}, {2, 4}, v),        // general only, 1 error
      Dictate({3, 3, 3}, {3, 3, 3}, v),  // general only, 0 errors
  };
  const CorrectedWordList target = {0, 5};
  const WerReport r = EvaluateWer(p, eval, target);
  EXPECT_EQ(r.general.errors, 2);
  EXPECT_EQ(r.general.reference_words, 10);
  EXPECT_EQ(r.target.errors, 1);
  EXPECT_EQ(r.target.reference_words, 5);
  EXPECT_EQ(*r.target_wer(), 0.2);
  EXPECT_EQ(*TargetWer(p, eval, target), 0.2);

  const CorrectedWordList all = {0, 1, 2, 3, 4, 5};
  EXPECT_EQ(*EvaluateWer(p, eval, all).target_wer(), r.general_wer());
  EXPECT_FALSE(TargetWer(p, eval, {9}).has_value());
  EXPECT_THROW(TargetWer(p, eval, {}), ConfigError);
}

TEST(EvaluateWerTest, SerialMatchesParallel) {
  const ModelArch arch{20, 8, {16, 16}};
  const ParameterSet p = InitModel(arch, 4);
  Rng rng(4);
  std::vector<Utterance> eval;
  for (int i = 0; i < 300; ++i) {
    const int len = 1 + static_cast<int>(rng.Below(8));
    eval.push_back({testing::RandomFeatures(len, 8, rng),
                    testing::RandomLabels(len, 20, rng)});
  }
  const CorrectedWordList target = {1, 2, 3};
  const WerReport a = EvaluateWer(p, eval, target, Execution::kSerial);
  const WerReport b = EvaluateWer(p, eval, target, Execution::kParallel);
  EXPECT_EQ(a.general.errors, b.general.errors);
  EXPECT_EQ(a.target.errors, b.target.errors);
  EXPECT_EQ(a.target.reference_words, b.target.reference_words);
}

TEST(TableIoTest, RoundTripIsExact) {
  const std::map<int, double> t = {{0, 1.0}, {7, 0.1}, {12, 1.0 / 3}};
  std::stringstream ss;
  WriteTable(ss, t);
  EXPECT_EQ(ReadTable(ss), t);
}

TEST(TableIoTest, MalformedLines) {
  for (const char* text : {"1 2\n", "x\t1\n", "1\tabc\n", "1\t2x\n"}) {
    std::stringstream ss(text);
    EXPECT_THROW(ReadTable(ss), DataError) << text;
  }
}

}  // namespace
}  // namespace fedsim
