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

#include "fedsim/half.h"

#include <bit>

namespace fedsim {

namespace {

constexpr uint16_t kHalfMaxBits = 0x7bff;
constexpr uint16_t kHalfQuietNan = 0x7e00;

uint16_t Saturate(uint16_t sign, QuantizationStats* stats) {
  if (stats != nullptr) ++stats->overflow;
  return sign | kHalfMaxBits;
}

}  // namespace

uint16_t FloatToHalfBits(float value, QuantizationStats* stats) {
  const uint32_t bits = std::bit_cast<uint32_t>(value);
  const uint16_t sign = static_cast<uint16_t>((bits >> 16) & 0x8000u);
  const uint32_t exp = (bits >> 23) & 0xffu;
  const uint32_t mant = bits & 0x7fffffu;

  if (exp == 0xff) {
    if (mant != 0) return sign | kHalfQuietNan;
    return Saturate(sign, stats);
  }
  if (exp == 0 && mant == 0) return sign;

  const int e = static_cast<int>(exp) - 127;
  if (e > 15) return Saturate(sign, stats);

  if (e >= -14) {
    uint32_t half_exp = static_cast<uint32_t>(e + 15);
    uint32_t m = mant >> 13;
    const uint32_t rem = mant & 0x1fffu;
    if (rem > 0x1000u || (rem == 0x1000u && (m & 1u))) ++m;
    if (m == 0x400u) {
      m = 0;
      ++half_exp;
    }
    if (half_exp >= 31) return Saturate(sign, stats);
    return sign | static_cast<uint16_t>((half_exp << 10) | m);
  }

  // Subnormal half range: count in units of 2^-24.
  const uint32_t full = exp == 0 ? mant : (mant | 0x800000u);
  const int shift = exp == 0 ? 200 : -(e + 1);
  uint32_t m = 0;
  if (shift <= 24) {
    m = full >> shift;
    const uint32_t rem = full & ((1u << shift) - 1u);
    const uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (m & 1u))) ++m;
  }
  if (m == 0 && stats != nullptr) ++stats->underflow;
  return sign | static_cast<uint16_t>(m);
}

float HalfBitsToFloat(uint16_t bits) {
  const uint32_t sign = static_cast<uint32_t>(bits & 0x8000u) << 16;
  const uint32_t exp = (bits >> 10) & 0x1fu;
  uint32_t mant = bits & 0x3ffu;
  if (exp == 0) {
    if (mant == 0) return std::bit_cast<float>(sign);
    // Normalize the subnormal.
    int e = -14;
    while ((mant & 0x400u) == 0) {
      mant <<= 1;
      --e;
    }
    mant &= 0x3ffu;
    return std::bit_cast<float>(sign |
                                (static_cast<uint32_t>(e + 127) << 23) |
                                (mant << 13));
  }
  if (exp == 31) {
    return std::bit_cast<float>(sign | 0x7f800000u | (mant << 13));
  }
  return std::bit_cast<float>(sign | ((exp - 15 + 127) << 23) | (mant << 13));
}

}  // namespace fedsim
