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

#include "fedsim/metrics.h"

#include <json.hpp>

#include "fedsim/errors.h"

namespace fedsim {

using ordered_json = nlohmann::ordered_json;

std::string ToJsonLine(const MetricsRecord& r) {
  ordered_json j;
  j["round"] = r.round;
  j["general_wer"] = r.general_wer;
  j["target_wer"] = r.target_wer ? ordered_json(*r.target_wer) : nullptr;
  j["download_raw_bytes"] = r.download_raw_bytes;
  j["download_compressed_bytes"] = r.download_compressed_bytes;
  j["upload_raw_bytes"] = r.upload_raw_bytes;
  j["upload_compressed_bytes"] = r.upload_compressed_bytes;
  j["peak_memory_bytes"] = r.peak_memory_bytes;
  j["participants"] = r.participants;
  j["pool_exhausted"] = r.pool_exhausted;
  j["skipped"] = r.skipped;
  j["training_examples"] = r.training_examples;
  j["filtered_out_examples"] = r.filtered_out_examples;
  j["weight_misses"] = r.weight_misses;
  j["quantization_overflow"] = r.quantization_overflow;
  j["quantization_underflow"] = r.quantization_underflow;
  j["total_weight"] = r.total_weight;
  return j.dump();
}

MetricsRecord FromJsonLine(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    MetricsRecord r;
    r.round = j.at("round");
    r.general_wer = j.at("general_wer");
    if (!j.at("target_wer").is_null()) r.target_wer = j.at("target_wer");
    r.download_raw_bytes = j.at("download_raw_bytes");
    r.download_compressed_bytes = j.at("download_compressed_bytes");
    r.upload_raw_bytes = j.at("upload_raw_bytes");
    r.upload_compressed_bytes = j.at("upload_compressed_bytes");
    r.peak_memory_bytes = j.at("peak_memory_bytes");
    r.participants = j.at("participants");
    r.pool_exhausted = j.at("pool_exhausted");
    r.skipped = j.at("skipped");
    r.training_examples = j.at("training_examples");
    r.filtered_out_examples = j.at("filtered_out_examples");
    r.weight_misses = j.at("weight_misses");
    r.quantization_overflow = j.at("quantization_overflow");
    r.quantization_underflow = j.at("quantization_underflow");
    r.total_weight = j.at("total_weight");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad metrics line: ") + e.what());
  }
}

}  // namespace fedsim
