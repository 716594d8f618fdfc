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

#ifndef FEDSIM_ERRORS_H_
#define FEDSIM_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fedsim {

// Base of every error thrown by the library. The CLI maps ConfigError to exit
// code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, unknown variable names, bad dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor or sequence dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed training data, e.g. a label outside the vocabulary.
class DataError : public Error {
 public:
  using Error::Error;
};

// Truncated or corrupt payload bytes.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// A precondition the caller was responsible for was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A client reached batch formation without enough usable corrections.
class EligibilityError : public Error {
 public:
  using Error::Error;
};

// Client selection found nobody who passes the eligibility test.
class NoEligibleClientsError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedsim

#endif  // FEDSIM_ERRORS_H_
