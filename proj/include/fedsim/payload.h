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

#ifndef FEDSIM_PAYLOAD_H_
#define FEDSIM_PAYLOAD_H_

// Online model compression (matrices of frozen layers to half precision) and
// the little-endian wire format that carries parameter sets between server
// and clients.
//
// Wire layout
//   frame:   u8 codec (0 = stored, 1 = deflate)
//            u64 body length before compression
//            u64 stored length
//            stored bytes
//   body:    "FSPL" magic, u16 format version, u32 variable count
//   record:  u16 name length, name bytes, u8 precision (0 f32, 1 f16),
//            u8 flags (bit 0 bias, bit 1 trainable), u32 layer index,
//            u8 rank, rank x u32 dims, elements (4 or 2 bytes each)

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedsim/half.h"
#include "fedsim/model.h"

namespace fedsim {

struct PrecisionPolicy {
  bool omc_enabled = false;
};

// Rounds matrices of non-trainable variables to half precision when OMC is
// enabled. Biases and trainable variables are left untouched. Idempotent.
ParameterSet ApplyPolicy(const ParameterSet& params,
                         const PrecisionPolicy& policy,
                         QuantizationStats* stats = nullptr);

// Widens the named variables back to f32 storage. Values are unchanged since
// f16 -> f32 is exact. Throws ConfigError on an unknown name.
ParameterSet DequantizeTrainable(const ParameterSet& params,
                                 const std::set<std::string>& names);

inline constexpr uint16_t kPayloadVersion = 1;
inline constexpr size_t kPayloadHeaderBytes = 4 + 2 + 4;
inline constexpr size_t kFrameOverheadBytes = 1 + 8 + 8;

enum class Codec : uint8_t { kStored = 0, kDeflate = 1 };

// Uncompressed body of a serialized parameter set.
class Payload {
 public:
  Payload() = default;
  explicit Payload(std::vector<uint8_t> body) : body_(std::move(body)) {}

  const std::vector<uint8_t>& body() const { return body_; }

  // Framed bytes as sent on the wire. With `compressed`, deflate is used
  // unless it fails to shrink the body, in which case the body is stored.
  std::vector<uint8_t> Wire(bool compressed) const;

  // Parses framed bytes; throws DecodeError.
  static Payload FromWire(std::span<const uint8_t> wire);

  friend bool operator==(const Payload&, const Payload&) = default;

 private:
  std::vector<uint8_t> body_;
};

Payload Serialize(const ParameterSet& params);
ParameterSet Deserialize(const Payload& payload);  // throws DecodeError

// Closed-form body size, computed without encoding.
size_t PredictedBodySize(const ParameterSet& params);
inline size_t PredictedWireSize(const ParameterSet& params) {
  return kFrameOverheadBytes + PredictedBodySize(params);
}

// Exact on-wire byte count.
size_t MeasureTransport(const Payload& payload, bool compressed);

// Header line and per-variable lines describing a payload, for the CLI.
std::string DescribePayload(std::span<const uint8_t> wire);

}  // namespace fedsim

#endif  // FEDSIM_PAYLOAD_H_
