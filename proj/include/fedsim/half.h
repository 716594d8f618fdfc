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

#ifndef FEDSIM_HALF_H_
#define FEDSIM_HALF_H_

#include <cstdint>

namespace fedsim {

inline constexpr float kHalfMax = 65504.0f;

struct QuantizationStats {
  int64_t overflow = 0;   // clamped to +-65504
  int64_t underflow = 0;  // nonzero input that rounded to zero
};

// IEEE 754 binary16 encoding with round-to-nearest-even. Finite values whose
// rounded magnitude would exceed the largest finite half are saturated.
// NaN maps to a quiet NaN; infinities saturate as well.
uint16_t FloatToHalfBits(float value, QuantizationStats* stats = nullptr);

// Exact widening.
float HalfBitsToFloat(uint16_t bits);

inline float RoundToHalf(float value, QuantizationStats* stats = nullptr) {
  return HalfBitsToFloat(FloatToHalfBits(value, stats));
}

}  // namespace fedsim

#endif  // FEDSIM_HALF_H_
