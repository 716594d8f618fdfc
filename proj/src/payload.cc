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

#include "fedsim/payload.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <sstream>

#include "fedsim/errors.h"

namespace fedsim {

ParameterSet ApplyPolicy(const ParameterSet& params,
                         const PrecisionPolicy& policy,
                         QuantizationStats* stats) {
  ParameterSet out = params;
  if (!policy.omc_enabled) return out;
  for (Variable& v : out.mutable_variables()) {
    if (!v.is_matrix() || v.trainable) continue;
    for (float& x : v.data) x = RoundToHalf(x, stats);
    v.precision = Precision::kF16;
  }
  return out;
}

ParameterSet DequantizeTrainable(const ParameterSet& params,
                                 const std::set<std::string>& names) {
  ParameterSet out = params;
  for (const std::string& name : names) {
    Variable* v = out.FindMutable(name);
    if (v == nullptr) throw ConfigError("unknown variable '" + name + "'");
    v->precision = Precision::kF32;
  }
  return out;
}

namespace {

class Writer {
 public:
  void U8(uint8_t v) { buf_.push_back(v); }
  void U16(uint16_t v) { Le(v, 2); }
  void U32(uint32_t v) { Le(v, 4); }
  void U64(uint64_t v) { Le(v, 8); }
  void Bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<uint8_t> Take() { return std::move(buf_); }
  void Reserve(size_t n) { buf_.reserve(n); }

 private:
  void Le(uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  std::vector<uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t U8() { return static_cast<uint8_t>(Le(1)); }
  uint16_t U16() { return static_cast<uint16_t>(Le(2)); }
  uint32_t U32() { return static_cast<uint32_t>(Le(4)); }
  uint64_t U64() { return Le(8); }
  std::span<const uint8_t> Bytes(size_t n) {
    Need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void Need(size_t n) const {
    if (data_.size() - pos_ < n) throw DecodeError("truncated payload");
  }
  uint64_t Le(int n) {
    Need(n);
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

constexpr char kMagic[4] = {'F', 'S', 'P', 'L'};
constexpr uint8_t kFlagBias = 1;
constexpr uint8_t kFlagTrainable = 2;

size_t RecordSize(const Variable& v) {
  return 2 + v.name.size() + 1 + 1 + 4 + 1 + 4 * v.shape.size() +
         v.size() * BytesPerElement(v.precision);
}

std::vector<uint8_t> Deflate(const std::vector<uint8_t>& in) {
  uLongf len = compressBound(in.size());
  std::vector<uint8_t> out(len);
  if (compress2(out.data(), &len, in.data(), in.size(), Z_DEFAULT_COMPRESSION) !=
      Z_OK) {
    throw Error("deflate failed");
  }
  out.resize(len);
  return out;
}

std::vector<uint8_t> Inflate(std::span<const uint8_t> in, size_t raw_size) {
  std::vector<uint8_t> out(raw_size);
  uLongf len = raw_size;
  if (uncompress(out.data(), &len, in.data(), in.size()) != Z_OK ||
      len != raw_size) {
    throw DecodeError("corrupt deflate stream");
  }
  return out;
}

}  // namespace

size_t PredictedBodySize(const ParameterSet& params) {
  size_t n = kPayloadHeaderBytes;
  for (const auto& v : params.variables()) n += RecordSize(v);
  return n;
}

Payload Serialize(const ParameterSet& params) {
  Writer w;
  w.Reserve(PredictedBodySize(params));
  w.Bytes(kMagic, 4);
  w.U16(kPayloadVersion);
  w.U32(static_cast<uint32_t>(params.variables().size()));
  for (const Variable& v : params.variables()) {
    if (v.name.size() > UINT16_MAX) throw ConfigError("variable name too long");
    w.U16(static_cast<uint16_t>(v.name.size()));
    w.Bytes(v.name.data(), v.name.size());
    w.U8(static_cast<uint8_t>(v.precision));
    w.U8((v.kind == VariableKind::kBias ? kFlagBias : 0) |
         (v.trainable ? kFlagTrainable : 0));
    w.U32(static_cast<uint32_t>(v.layer_index));
    w.U8(static_cast<uint8_t>(v.shape.size()));
    for (uint32_t d : v.shape) w.U32(d);
    if (v.precision == Precision::kF16) {
      for (float x : v.data) w.U16(FloatToHalfBits(x));
    } else {
      for (float x : v.data) w.U32(std::bit_cast<uint32_t>(x));
    }
  }
  return Payload(w.Take());
}

ParameterSet Deserialize(const Payload& payload) {
  Reader r(payload.body());
  auto magic = r.Bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw DecodeError("bad payload magic");
  }
  const uint16_t version = r.U16();
  if (version != kPayloadVersion) {
    throw DecodeError("unsupported payload version " + std::to_string(version));
  }
  const uint32_t count = r.U32();
  ParameterSet params;
  for (uint32_t k = 0; k < count; ++k) {
    Variable v;
    const uint16_t name_len = r.U16();
    auto name = r.Bytes(name_len);
    v.name.assign(name.begin(), name.end());
    const uint8_t precision = r.U8();
    if (precision > 1) throw DecodeError("bad precision tag");
    v.precision = static_cast<Precision>(precision);
    const uint8_t flags = r.U8();
    if (flags & ~(kFlagBias | kFlagTrainable)) throw DecodeError("bad flags");
    v.kind = (flags & kFlagBias) ? VariableKind::kBias : VariableKind::kMatrix;
    v.trainable = (flags & kFlagTrainable) != 0;
    v.layer_index = static_cast<int>(r.U32());
    const uint8_t rank = r.U8();
    uint64_t elements = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      v.shape.push_back(r.U32());
      elements *= v.shape.back();
    }
    const uint64_t width = BytesPerElement(v.precision);
    if (elements > r.remaining() / width) throw DecodeError("truncated payload");
    v.data.resize(elements);
    if (v.precision == Precision::kF16) {
      for (float& x : v.data) x = HalfBitsToFloat(r.U16());
    } else {
      for (float& x : v.data) x = std::bit_cast<float>(r.U32());
    }
    try {
      params.Add(std::move(v));
    } catch (const Error& e) {
      throw DecodeError(std::string("invalid record: ") + e.what());
    }
  }
  if (r.remaining() != 0) throw DecodeError("trailing bytes after payload");
  return params;
}

std::vector<uint8_t> Payload::Wire(bool compressed) const {
  Codec codec = Codec::kStored;
  std::vector<uint8_t> stored;
  if (compressed) {
    stored = Deflate(body_);
    if (stored.size() < body_.size()) codec = Codec::kDeflate;
  }
  const std::vector<uint8_t>& data = codec == Codec::kDeflate ? stored : body_;
  Writer w;
  w.Reserve(kFrameOverheadBytes + data.size());
  w.U8(static_cast<uint8_t>(codec));
  w.U64(body_.size());
  w.U64(data.size());
  w.Bytes(data.data(), data.size());
  return w.Take();
}

Payload Payload::FromWire(std::span<const uint8_t> wire) {
  Reader r(wire);
  const uint8_t codec = r.U8();
  const uint64_t raw_size = r.U64();
  const uint64_t stored_size = r.U64();
  if (stored_size != r.remaining()) {
    throw DecodeError("frame length does not match payload size");
  }
  auto stored = r.Bytes(stored_size);
  switch (static_cast<Codec>(codec)) {
    case Codec::kStored:
      if (raw_size != stored_size) throw DecodeError("stored length mismatch");
      return Payload(std::vector<uint8_t>(stored.begin(), stored.end()));
    case Codec::kDeflate:
      if (raw_size > stored_size * 1100 + 64) {
        throw DecodeError("declared raw length exceeds the deflate bound");
      }
      return Payload(Inflate(stored, raw_size));
  }
  throw DecodeError("unknown codec " + std::to_string(codec));
}

size_t MeasureTransport(const Payload& payload, bool compressed) {
  if (!compressed) return kFrameOverheadBytes + payload.body().size();
  return payload.Wire(true).size();
}

std::string DescribePayload(std::span<const uint8_t> wire) {
  Reader frame(wire);
  const uint8_t codec = frame.U8();
  const Payload payload = Payload::FromWire(wire);
  const ParameterSet params = Deserialize(payload);
  std::ostringstream os;
  os << "codec=" << (codec == 1 ? "deflate" : "stored")
     << " wire_bytes=" << wire.size()
     << " body_bytes=" << payload.body().size()
     << " version=" << kPayloadVersion
     << " variables=" << params.variables().size()
     << " elements=" << params.ElementCount() << "\n";
  for (const Variable& v : params.variables()) {
    os << v.name << "\tlayer=" << v.layer_index
       << "\tkind=" << (v.is_matrix() ? "matrix" : "bias")
       << "\tprecision=" << PrecisionName(v.precision) << "\tshape=[";
    for (size_t i = 0; i < v.shape.size(); ++i) {
      os << (i ? "," : "") << v.shape[i];
    }
    os << "]\ttrainable=" << (v.trainable ? 1 : 0)
       << "\tbytes=" << RecordSize(v) << "\n";
  }
  return os.str();
}

}  // namespace fedsim
