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

#ifndef FEDSIM_TESTS_TEST_UTIL_H_
#define FEDSIM_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <utility>
#include <vector>

#include "fedsim/client.h"
#include "fedsim/model.h"
#include "fedsim/rng.h"

namespace fedsim::testing {

inline const ModelArch kTinyArch{4, 2, {3}};
inline const ModelArch kReferenceArch{200, 16, {32, 32, 32}};

inline Features RandomFeatures(int length, int dim, Rng& rng) {
  Features f;
  f.length = length;
  f.dim = dim;
  f.values.resize(static_cast<size_t>(length) * dim);
  for (float& x : f.values) x = static_cast<float>(rng.Normal());
  return f;
}

inline std::vector<int> RandomLabels(int length, int vocab, Rng& rng) {
  std::vector<int> y(length);
  for (int& v : y) v = static_cast<int>(rng.Below(vocab));
  return y;
}

// A correction example whose final transcript substitutes one word.
inline ClientExample RandomCorrection(const ModelArch& arch, int length,
                                      Rng& rng) {
  Features f = RandomFeatures(length, arch.feature_dim, rng);
  WordSeq truth = RandomLabels(length, arch.vocab_size, rng);
  WordSeq incumbent = truth;
  const size_t p = rng.Below(length);
  incumbent[p] = (truth[p] + 1) % arch.vocab_size;
  return MakeExample(std::move(f), truth, std::move(incumbent), truth);
}

inline double RelativeError(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline double MaxRelativeError(const std::vector<float>& a,
                               const std::vector<float>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, RelativeError(a[i], b[i]));
  }
  return worst;
}

// Breadth-first search over single-word edits from `hyp` to `ref`, with
// intermediate lengths bounded by the longer of the two.
inline int BruteForceEditDistance(const WordSeq& hyp, const WordSeq& ref) {
  std::set<int> alphabet(ref.begin(), ref.end());
  const size_t max_len = std::max(hyp.size(), ref.size());
  std::set<WordSeq> seen = {hyp};
  std::deque<std::pair<WordSeq, int>> queue = {{hyp, 0}};
  while (!queue.empty()) {
    auto [s, d] = queue.front();
    queue.pop_front();
    if (s == ref) return d;
    std::vector<WordSeq> next;
    for (size_t i = 0; i < s.size(); ++i) {
      WordSeq del = s;
      del.erase(del.begin() + i);
      next.push_back(del);
      for (int a : alphabet) {
        if (a == s[i]) continue;
        WordSeq sub = s;
        sub[i] = a;
        next.push_back(sub);
      }
    }
    if (s.size() < max_len) {
      for (size_t i = 0; i <= s.size(); ++i) {
        for (int a : alphabet) {
          WordSeq ins = s;
          ins.insert(ins.begin() + i, a);
          next.push_back(ins);
        }
      }
    }
    for (WordSeq& n : next) {
      if (seen.insert(n).second) queue.push_back({std::move(n), d + 1});
    }
  }
  return -1;
}

}  // namespace fedsim::testing

#endif  // FEDSIM_TESTS_TEST_UTIL_H_
