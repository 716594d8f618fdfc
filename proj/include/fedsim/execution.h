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

#ifndef FEDSIM_EXECUTION_H_
#define FEDSIM_EXECUTION_H_

namespace fedsim {

// kSerial is the reference path; kParallel spreads independent work items
// (clients of a round, evaluation utterances) over OpenMP threads. Both
// produce bit-identical results because reductions happen afterwards in a
// fixed order.
enum class Execution { kSerial, kParallel };

}  // namespace fedsim

#endif  // FEDSIM_EXECUTION_H_
