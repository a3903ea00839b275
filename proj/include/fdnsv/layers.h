// Copyright 2026 The fdnsv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef FDNSV_LAYERS_H_
#define FDNSV_LAYERS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "fdnsv/tensor.h"

namespace fdnsv {

enum class Mode { kTrain, kEval };

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using TensorList = std::vector<NamedTensor>;

class Conv1dLayer {
 public:
  Conv1dLayer() = default;
  Conv1dLayer(std::size_t in_channels, std::size_t out_channels,
              std::size_t kernel, std::size_t stride = 1, std::size_t padding = 0);

  Tensor forward(const Tensor& x) const;

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t kernel() const { return weight.dim(2); }

  void collect_parameters(const std::string& prefix, TensorList& out) const;

  Tensor weight;  // (out, in, kernel)
  Tensor bias;    // (out)
  std::size_t stride = 1;
  std::size_t padding = 0;
};

class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  explicit BatchNorm1d(std::size_t channels);

  // update_stats=false runs train-mode normalization without touching the
  // running estimates (used when the same layer is applied twice per step).
  Tensor forward(const Tensor& x, Mode mode, bool update_stats = true);
  // Normalizes a mini-batch of (C x T) maps with joint statistics.
  std::vector<Tensor> forward(const std::vector<Tensor>& xs, Mode mode,
                              bool update_stats = true);

  std::size_t channels() const { return gamma.numel(); }

  void collect_parameters(const std::string& prefix, TensorList& out) const;
  void collect_buffers(const std::string& prefix, TensorList& out) const;

  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(std::size_t in_features, std::size_t out_features);

  Tensor forward(const Tensor& x) const;

  void collect_parameters(const std::string& prefix, TensorList& out) const;

  Tensor weight;  // (out, in)
  Tensor bias;    // (out)
};

// Single-layer unidirectional GRU with separate input and recurrent biases:
//   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
class GruLayer {
 public:
  GruLayer() = default;
  GruLayer(std::size_t input_size, std::size_t hidden_size);

  // seq is (T x input_size); returns the final hidden state starting from
  // a zero state.
  Tensor forward(const Tensor& seq) const;

  std::size_t input_size() const { return w_ir.dim(1); }
  std::size_t hidden_size() const { return w_ir.dim(0); }

  void collect_parameters(const std::string& prefix, TensorList& out) const;

  Tensor w_ir, w_iz, w_in;
  Tensor w_hr, w_hz, w_hn;
  Tensor b_ir, b_iz, b_in;
  Tensor b_hr, b_hz, b_hn;
};

// Conv/FC weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases zero; BN
// gamma 1, beta 0, running stats reset; GRU weights ~ U(+-sqrt(1/hidden)).
void init_parameters(Conv1dLayer& layer, std::uint64_t seed);
void init_parameters(BatchNorm1d& layer, std::uint64_t seed);
void init_parameters(LinearLayer& layer, std::uint64_t seed);
void init_parameters(GruLayer& layer, std::uint64_t seed);

}  // namespace fdnsv

#endif  // FDNSV_LAYERS_H_
