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

#include "fedsim/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "fedsim/errors.h"
#include "fedsim/rng.h"

namespace fedsim {

const char* PrecisionName(Precision p) {
  return p == Precision::kF16 ? "f16" : "f32";
}

int BytesPerElement(Precision p) { return p == Precision::kF16 ? 2 : 4; }

size_t ShapeElementCount(std::span<const uint32_t> shape) {
  size_t n = 1;
  for (uint32_t d : shape) n *= d;
  return n;
}

namespace {

void CheckVariable(const Variable& v) {
  if (v.name.empty()) throw ConfigError("variable with empty name");
  if (ShapeElementCount(v.shape) != v.data.size()) {
    throw ShapeError("variable '" + v.name + "': data length " +
                     std::to_string(v.data.size()) +
                     " does not match shape element count " +
                     std::to_string(ShapeElementCount(v.shape)));
  }
  if (v.kind == VariableKind::kBias && v.precision != Precision::kF32) {
    throw ContractError("bias '" + v.name + "' must be f32");
  }
  if (v.trainable && v.precision != Precision::kF32) {
    throw ContractError("trainable variable '" + v.name + "' must be f32");
  }
}

}  // namespace

void ParameterSet::Add(Variable v) {
  CheckVariable(v);
  if (index_.contains(v.name)) {
    throw ConfigError("duplicate variable name '" + v.name + "'");
  }
  index_.emplace(v.name, variables_.size());
  variables_.push_back(std::move(v));
}

const Variable* ParameterSet::Find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &variables_[it->second];
}

Variable* ParameterSet::FindMutable(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &variables_[it->second];
}

const Variable& ParameterSet::Get(const std::string& name) const {
  const Variable* v = Find(name);
  if (v == nullptr) throw ConfigError("unknown variable '" + name + "'");
  return *v;
}

size_t ParameterSet::ElementCount() const {
  size_t n = 0;
  for (const auto& v : variables_) n += v.size();
  return n;
}

size_t ParameterSet::TrainableElementCount() const {
  size_t n = 0;
  for (const auto& v : variables_) {
    if (v.trainable) n += v.size();
  }
  return n;
}

std::vector<std::string> ParameterSet::Names() const {
  std::vector<std::string> out;
  for (const auto& v : variables_) out.push_back(v.name);
  return out;
}

std::vector<std::string> ParameterSet::TrainableNames() const {
  std::vector<std::string> out;
  for (const auto& v : variables_) {
    if (v.trainable) out.push_back(v.name);
  }
  return out;
}

void ParameterSet::Validate() const {
  if (index_.size() != variables_.size()) {
    throw ConfigError("variable names are not unique");
  }
  for (const auto& v : variables_) CheckVariable(v);
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.variables_.size() != b.variables_.size()) return false;
  for (size_t i = 0; i < a.variables_.size(); ++i) {
    const Variable& x = a.variables_[i];
    const Variable& y = b.variables_[i];
    if (x.name != y.name || x.layer_index != y.layer_index ||
        x.kind != y.kind || x.shape != y.shape ||
        x.precision != y.precision || x.trainable != y.trainable ||
        x.data.size() != y.data.size()) {
      return false;
    }
    if (!x.data.empty() &&
        std::memcmp(x.data.data(), y.data.data(),
                    x.data.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

int ModelArch::InputWidth(int i) const {
  return i == 0 ? feature_dim : hidden_dims[i - 1];
}

size_t ModelArch::ParameterCount() const {
  size_t n = 0;
  for (int i = 0; i <= num_hidden(); ++i) {
    const size_t out = i == num_hidden() ? vocab_size : hidden_dims[i];
    n += static_cast<size_t>(InputWidth(i)) * out + out;
  }
  return n;
}

void ModelArch::Validate() const {
  if (vocab_size <= 0) throw ConfigError("vocab_size must be positive");
  if (feature_dim <= 0) throw ConfigError("feature_dim must be positive");
  if (hidden_dims.empty()) throw ConfigError("hidden_dims must be non-empty");
  for (int h : hidden_dims) {
    if (h <= 0) throw ConfigError("hidden layer widths must be positive");
  }
}

std::string LayerMatrixName(int layer) {
  return "layer" + std::to_string(layer) + "/matrix";
}

std::string LayerBiasName(int layer) {
  return "layer" + std::to_string(layer) + "/bias";
}

ModelArch InferArch(const ParameterSet& params) {
  ModelArch arch;
  const Variable* first = params.Find(LayerMatrixName(0));
  const Variable* decoder = params.Find(kDecoderMatrix);
  if (first == nullptr || decoder == nullptr || first->shape.size() != 2 ||
      decoder->shape.size() != 2) {
    throw ShapeError("parameter set is not a classifier model");
  }
  arch.feature_dim = static_cast<int>(first->shape[0]);
  for (int i = 0;; ++i) {
    const Variable* w = params.Find(LayerMatrixName(i));
    if (w == nullptr) break;
    const Variable* b = params.Find(LayerBiasName(i));
    if (w->shape.size() != 2 || b == nullptr ||
        b->size() != w->shape[1] ||
        static_cast<int>(w->shape[0]) != arch.InputWidth(i)) {
      throw ShapeError("inconsistent shapes at layer " + std::to_string(i));
    }
    arch.hidden_dims.push_back(static_cast<int>(w->shape[1]));
  }
  arch.vocab_size = static_cast<int>(decoder->shape[1]);
  const Variable* db = params.Find(kDecoderBias);
  if (static_cast<int>(decoder->shape[0]) != arch.hidden_dims.back() ||
      db == nullptr || static_cast<int>(db->size()) != arch.vocab_size) {
    throw ShapeError("inconsistent decoder shapes");
  }
  return arch;
}

ParameterSet InitModel(const ModelArch& arch, uint64_t seed) {
  arch.Validate();
  Rng rng(seed);
  ParameterSet params;
  for (int i = 0; i <= arch.num_hidden(); ++i) {
    const bool decoder = i == arch.num_hidden();
    const uint32_t fan_in = arch.InputWidth(i);
    const uint32_t fan_out = decoder ? arch.vocab_size : arch.hidden_dims[i];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));

    Variable w;
    w.name = decoder ? kDecoderMatrix : LayerMatrixName(i);
    w.layer_index = i;
    w.kind = VariableKind::kMatrix;
    w.shape = {fan_in, fan_out};
    w.data.resize(static_cast<size_t>(fan_in) * fan_out);
    for (float& x : w.data) {
      x = static_cast<float>((2.0 * rng.Uniform() - 1.0) * bound);
    }

    Variable b;
    b.name = decoder ? kDecoderBias : LayerBiasName(i);
    b.layer_index = i;
    b.kind = VariableKind::kBias;
    b.shape = {fan_out};
    b.data.assign(fan_out, 0.0f);

    params.Add(std::move(w));
    params.Add(std::move(b));
  }
  return params;
}

namespace {

struct LayerRef {
  const Variable* matrix;
  const Variable* bias;
  int in = 0;
  int out = 0;
};

std::vector<LayerRef> Layers(const ParameterSet& params,
                             const ModelArch& arch) {
  std::vector<LayerRef> layers;
  for (int i = 0; i <= arch.num_hidden(); ++i) {
    const bool decoder = i == arch.num_hidden();
    LayerRef l;
    l.matrix = &params.Get(decoder ? kDecoderMatrix : LayerMatrixName(i));
    l.bias = &params.Get(decoder ? kDecoderBias : LayerBiasName(i));
    l.in = arch.InputWidth(i);
    l.out = decoder ? arch.vocab_size : arch.hidden_dims[i];
    layers.push_back(l);
  }
  return layers;
}

// z = x W + b for every position.
std::vector<double> Affine(const LayerRef& l, const std::vector<double>& x,
                           int positions) {
  std::vector<double> z(static_cast<size_t>(positions) * l.out);
  const float* w = l.matrix->data.data();
  const float* b = l.bias->data.data();
  for (int p = 0; p < positions; ++p) {
    double* zp = z.data() + static_cast<size_t>(p) * l.out;
    for (int j = 0; j < l.out; ++j) zp[j] = b[j];
    const double* xp = x.data() + static_cast<size_t>(p) * l.in;
    for (int i = 0; i < l.in; ++i) {
      const double xi = xp[i];
      if (xi == 0.0) continue;
      const float* wi = w + static_cast<size_t>(i) * l.out;
      for (int j = 0; j < l.out; ++j) zp[j] += xi * wi[j];
    }
  }
  return z;
}

std::vector<double> Relu(const std::vector<double>& z) {
  std::vector<double> h(z.size());
  for (size_t k = 0; k < z.size(); ++k) h[k] = z[k] > 0.0 ? z[k] : 0.0;
  return h;
}

// Row-wise softmax in place.
void Softmax(std::vector<double>& logits, int positions, int vocab) {
  for (int p = 0; p < positions; ++p) {
    double* row = logits.data() + static_cast<size_t>(p) * vocab;
    const double m = *std::max_element(row, row + vocab);
    double sum = 0.0;
    for (int v = 0; v < vocab; ++v) {
      row[v] = std::exp(row[v] - m);
      sum += row[v];
    }
    for (int v = 0; v < vocab; ++v) row[v] /= sum;
  }
}

void CheckLabels(std::span<const int> labels, int positions, int vocab) {
  if (static_cast<int>(labels.size()) != positions) {
    throw ShapeError("label count " + std::to_string(labels.size()) +
                     " != sequence length " + std::to_string(positions));
  }
  for (int y : labels) {
    if (y < 0 || y >= vocab) {
      throw DataError("label id " + std::to_string(y) +
                      " outside vocabulary of size " + std::to_string(vocab));
    }
  }
}

std::vector<float> ToFloat(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

}  // namespace

ForwardTrace Forward(const ParameterSet& params, const Features& features,
                     bool checkpointing) {
  const ModelArch arch = InferArch(params);
  if (features.dim != arch.feature_dim ||
      features.values.size() !=
          static_cast<size_t>(features.length) * features.dim) {
    throw ShapeError("feature vectors have width " +
                     std::to_string(features.dim) + ", model expects " +
                     std::to_string(arch.feature_dim));
  }
  const auto layers = Layers(params, arch);

  ForwardTrace trace;
  trace.checkpointed = checkpointing;
  trace.positions = features.length;
  trace.boundaries.emplace_back(features.values.begin(),
                                features.values.end());
  for (int i = 0; i < arch.num_hidden(); ++i) {
    std::vector<double> z = Affine(layers[i], trace.boundaries.back(),
                                   trace.positions);
    trace.boundaries.push_back(Relu(z));
    if (!checkpointing) trace.pre_activations.push_back(std::move(z));
  }
  trace.logits = Affine(layers.back(), trace.boundaries.back(),
                        trace.positions);
  return trace;
}

Gradients Backward(const ParameterSet& params, const ForwardTrace& trace,
                   std::span<const int> labels) {
  const ModelArch arch = InferArch(params);
  const int positions = trace.positions;
  const int vocab = arch.vocab_size;
  CheckLabels(labels, positions, vocab);
  const auto layers = Layers(params, arch);

  Gradients grads;
  int lowest_trainable = arch.num_hidden() + 1;
  for (int i = arch.num_hidden(); i >= 0; --i) {
    if (layers[i].matrix->trainable || layers[i].bias->trainable) {
      lowest_trainable = i;
    }
  }
  if (lowest_trainable > arch.num_hidden() || positions == 0) {
    if (positions == 0) {
      for (const auto& v : params.variables()) {
        if (v.trainable) grads[v.name].assign(v.size(), 0.0f);
      }
    }
    return grads;
  }

  // d(mean CE)/d logits.
  std::vector<double> delta = trace.logits;
  Softmax(delta, positions, vocab);
  const double scale = 1.0 / positions;
  for (int p = 0; p < positions; ++p) {
    double* row = delta.data() + static_cast<size_t>(p) * vocab;
    row[labels[p]] -= 1.0;
    for (int v = 0; v < vocab; ++v) row[v] *= scale;
  }

  for (int i = arch.num_hidden(); i >= lowest_trainable; --i) {
    const LayerRef& l = layers[i];
    const std::vector<double>& x = trace.boundaries[i];

    if (i < arch.num_hidden()) {
      // delta currently holds dL/dh for this layer's output; apply ReLU'.
      std::vector<double> recomputed;
      const std::vector<double>* z;
      if (trace.checkpointed) {
        recomputed = Affine(l, x, positions);
        z = &recomputed;
      } else {
        z = &trace.pre_activations[i];
      }
      for (size_t k = 0; k < delta.size(); ++k) {
        if (!((*z)[k] > 0.0)) delta[k] = 0.0;
      }
    }

    if (l.matrix->trainable) {
      std::vector<double> dw(static_cast<size_t>(l.in) * l.out, 0.0);
      for (int p = 0; p < positions; ++p) {
        const double* xp = x.data() + static_cast<size_t>(p) * l.in;
        const double* dp = delta.data() + static_cast<size_t>(p) * l.out;
        for (int a = 0; a < l.in; ++a) {
          const double xa = xp[a];
          if (xa == 0.0) continue;
          double* row = dw.data() + static_cast<size_t>(a) * l.out;
          for (int j = 0; j < l.out; ++j) row[j] += xa * dp[j];
        }
      }
      grads[l.matrix->name] = ToFloat(dw);
    }
    if (l.bias->trainable) {
      std::vector<double> db(l.out, 0.0);
      for (int p = 0; p < positions; ++p) {
        const double* dp = delta.data() + static_cast<size_t>(p) * l.out;
        for (int j = 0; j < l.out; ++j) db[j] += dp[j];
      }
      grads[l.bias->name] = ToFloat(db);
    }

    if (i == lowest_trainable) break;
    // Propagate to the layer below: dx = delta W^T.
    std::vector<double> dx(static_cast<size_t>(positions) * l.in, 0.0);
    const float* w = l.matrix->data.data();
    for (int p = 0; p < positions; ++p) {
      const double* dp = delta.data() + static_cast<size_t>(p) * l.out;
      double* dxp = dx.data() + static_cast<size_t>(p) * l.in;
      for (int a = 0; a < l.in; ++a) {
        const float* wa = w + static_cast<size_t>(a) * l.out;
        double s = 0.0;
        for (int j = 0; j < l.out; ++j) s += wa[j] * dp[j];
        dxp[a] = s;
      }
    }
    delta = std::move(dx);
  }
  return grads;
}

double Loss(const ParameterSet& params, const Features& features,
            std::span<const int> labels) {
  ForwardTrace trace = Forward(params, features, /*checkpointing=*/false);
  const int vocab = InferArch(params).vocab_size;
  CheckLabels(labels, trace.positions, vocab);
  if (trace.positions == 0) return 0.0;
  double total = 0.0;
  for (int p = 0; p < trace.positions; ++p) {
    const double* row = trace.logits.data() + static_cast<size_t>(p) * vocab;
    const double m = *std::max_element(row, row + vocab);
    double sum = 0.0;
    for (int v = 0; v < vocab; ++v) sum += std::exp(row[v] - m);
    total += (m + std::log(sum)) - row[labels[p]];
  }
  return total / trace.positions;
}

std::vector<int> Predict(const ParameterSet& params,
                         const Features& features) {
  ForwardTrace trace = Forward(params, features, /*checkpointing=*/true);
  const int vocab = static_cast<int>(trace.positions == 0
                                         ? 0
                                         : trace.logits.size() /
                                               trace.positions);
  std::vector<int> out(trace.positions);
  for (int p = 0; p < trace.positions; ++p) {
    const double* row = trace.logits.data() + static_cast<size_t>(p) * vocab;
    out[p] = static_cast<int>(std::max_element(row, row + vocab) - row);
  }
  return out;
}

MemoryEstimate PeakMemoryEstimate(const ParameterSet& prepared, int positions,
                                  bool checkpointing) {
  const ModelArch arch = InferArch(prepared);
  MemoryEstimate m;
  for (const auto& v : prepared.variables()) {
    m.parameter_bytes +=
        static_cast<int64_t>(v.size()) * BytesPerElement(v.precision);
    if (v.trainable) m.gradient_bytes += static_cast<int64_t>(v.size()) * 4;
  }

  // Lowest hidden layer that needs a backward pass.
  int first = arch.num_hidden();
  for (int i = 0; i < arch.num_hidden(); ++i) {
    if (prepared.Get(LayerMatrixName(i)).trainable ||
        prepared.Get(LayerBiasName(i)).trainable) {
      first = i;
      break;
    }
  }
  int64_t per_position = arch.InputWidth(first);
  int recompute = 0;
  for (int i = first; i < arch.num_hidden(); ++i) {
    per_position += checkpointing ? arch.hidden_dims[i]
                                  : 2 * arch.hidden_dims[i];
    recompute = std::max(recompute, arch.hidden_dims[i]);
  }
  if (checkpointing) per_position += recompute;
  per_position += 2 * arch.vocab_size;  // logits and softmax
  m.activation_bytes = per_position * positions * 4;
  return m;
}

}  // namespace fedsim
