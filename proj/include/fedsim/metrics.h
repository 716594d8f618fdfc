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

#ifndef FEDSIM_METRICS_H_
#define FEDSIM_METRICS_H_

#include <cstdint>
#include <optional>
#include <string>

namespace fedsim {

struct MetricsRecord {
  int round = 0;
  double general_wer = 0.0;
  std::optional<double> target_wer;
  int64_t download_raw_bytes = 0;
  int64_t download_compressed_bytes = 0;
  // Summed over participating clients.
  int64_t upload_raw_bytes = 0;
  int64_t upload_compressed_bytes = 0;
  // Mean over participating clients.
  int64_t peak_memory_bytes = 0;
  int participants = 0;
  bool pool_exhausted = false;
  bool skipped = false;
  int64_t training_examples = 0;
  int64_t filtered_out_examples = 0;
  int64_t weight_misses = 0;
  int64_t quantization_overflow = 0;
  int64_t quantization_underflow = 0;
  double total_weight = 0.0;
};

// One compact JSON object, no trailing newline. Keys are emitted in a fixed
// order so equal records serialize to equal bytes.
std::string ToJsonLine(const MetricsRecord& record);
MetricsRecord FromJsonLine(const std::string& line);  // throws DataError

}  // namespace fedsim

#endif  // FEDSIM_METRICS_H_
