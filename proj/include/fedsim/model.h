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

#ifndef FEDSIM_MODEL_H_
#define FEDSIM_MODEL_H_

// Feed-forward per-position word classifier. Hidden ReLU layers play the role
// of the encoder stack, the final projection onto the vocabulary is the
// decoder. Gradients are exact reverse-mode; arithmetic runs in double and
// results are stored as float.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fedsim {

enum class Precision : uint8_t { kF32 = 0, kF16 = 1 };
enum class VariableKind : uint8_t { kMatrix = 0, kBias = 1 };

const char* PrecisionName(Precision p);
int BytesPerElement(Precision p);

struct Variable {
  std::string name;
  int layer_index = 0;
  VariableKind kind = VariableKind::kMatrix;
  std::vector<uint32_t> shape;
  // f16 variables hold values that are exactly representable in half
  // precision, widened to float.
  Precision precision = Precision::kF32;
  std::vector<float> data;
  bool trainable = true;

  size_t size() const { return data.size(); }
  bool is_matrix() const { return kind == VariableKind::kMatrix; }
};

size_t ShapeElementCount(std::span<const uint32_t> shape);

// Ordered collection of named variables. Insertion order is the wire order.
class ParameterSet {
 public:
  ParameterSet() = default;

  // Throws ConfigError on duplicate name, ShapeError when the data length
  // disagrees with the shape, ContractError when the precision invariants
  // (biases f32, trainable f32) are broken.
  void Add(Variable v);

  const std::vector<Variable>& variables() const { return variables_; }
  std::vector<Variable>& mutable_variables() { return variables_; }

  // nullptr when absent.
  const Variable* Find(const std::string& name) const;
  Variable* FindMutable(const std::string& name);
  const Variable& Get(const std::string& name) const;  // throws ConfigError

  size_t ElementCount() const;
  size_t TrainableElementCount() const;
  std::vector<std::string> Names() const;
  std::vector<std::string> TrainableNames() const;

  // Re-checks all invariants; throws like Add.
  void Validate() const;

  // Bit-identical comparison, NaN payloads included.
  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Variable> variables_;
  std::map<std::string, size_t> index_;
};

struct ModelArch {
  int vocab_size = 0;
  int feature_dim = 0;
  std::vector<int> hidden_dims;

  int num_hidden() const { return static_cast<int>(hidden_dims.size()); }
  // Input width of hidden layer `i`, or of the decoder when i == num_hidden().
  int InputWidth(int i) const;
  size_t ParameterCount() const;
  void Validate() const;  // throws ConfigError

  friend bool operator==(const ModelArch&, const ModelArch&) = default;
};

std::string LayerMatrixName(int layer);
std::string LayerBiasName(int layer);
inline constexpr char kDecoderMatrix[] = "decoder/matrix";
inline constexpr char kDecoderBias[] = "decoder/bias";

// Recovers the architecture from variable names and shapes.
ModelArch InferArch(const ParameterSet& params);

// Matrices are stored row-major with shape {fan_in, fan_out}.
ParameterSet InitModel(const ModelArch& arch, uint64_t seed);

// A sequence of feature vectors, one per spoken word, row-major.
struct Features {
  int length = 0;
  int dim = 0;
  std::vector<float> values;

  std::span<const float> Row(int i) const {
    return {values.data() + static_cast<size_t>(i) * dim,
            static_cast<size_t>(dim)};
  }
};

// Activations kept by the forward pass. Without checkpointing both the
// pre-activations and the ReLU outputs of every hidden layer are stored; with
// checkpointing only the layer-boundary outputs are kept and the backward pass
// recomputes each pre-activation from the boundary below it.
struct ForwardTrace {
  bool checkpointed = false;
  int positions = 0;
  // boundaries[0] is the input, boundaries[i + 1] the output of hidden i.
  std::vector<std::vector<double>> boundaries;
  std::vector<std::vector<double>> pre_activations;  // empty if checkpointed
  std::vector<double> logits;                        // positions x vocab
};

ForwardTrace Forward(const ParameterSet& params, const Features& features,
                     bool checkpointing);

using Gradients = std::map<std::string, std::vector<float>>;

// Gradient of the mean softmax cross-entropy over the trace positions with
// respect to every trainable variable. Frozen variables are absent.
Gradients Backward(const ParameterSet& params, const ForwardTrace& trace,
                   std::span<const int> labels);

// Mean cross-entropy, double precision throughout.
double Loss(const ParameterSet& params, const Features& features,
            std::span<const int> labels);

// Argmax word per position.
std::vector<int> Predict(const ParameterSet& params, const Features& features);

// Peak training memory of one client, analytic. Activations are counted at
// 4 bytes per element for `positions` rows; layers below the lowest trainable
// layer need no stored activations beyond their output.
struct MemoryEstimate {
  int64_t parameter_bytes = 0;
  int64_t gradient_bytes = 0;
  int64_t activation_bytes = 0;
  int64_t total() const {
    return parameter_bytes + gradient_bytes + activation_bytes;
  }
};

MemoryEstimate PeakMemoryEstimate(const ParameterSet& prepared, int positions,
                                  bool checkpointing);

}  // namespace fedsim

#endif  // FEDSIM_MODEL_H_
