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

#ifndef FEDSIM_RNG_H_
#define FEDSIM_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>

namespace fedsim {

// Seeded generator with portable derived distributions. The std::*
// distributions are implementation-defined, so uniform, normal and Laplace
// samples are derived from raw engine output here to keep metrics streams
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t Next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Requires n > 0.
  size_t Below(size_t n);

  // Standard normal via Box-Muller (one sample per call, no caching).
  double Normal();

  // Zero-mean double-exponential sample with scale b (variance 2 b^2).
  double Laplace(double scale);

  bool Bernoulli(double p) { return Uniform() < p; }

  // Independent stream seed for (seed, stream, index), splitmix64 mixed.
  static uint64_t Derive(uint64_t seed, uint64_t stream, uint64_t index = 0);

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedsim

#endif  // FEDSIM_RNG_H_
