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

#include "fdnsv/layers.h"

#include <cmath>
#include <stdexcept>

#include "fdnsv/ops.h"
#include "fdnsv/rng.h"

namespace fdnsv {
namespace {

void fill_uniform(Tensor& t, double bound, SplitMix64& rng) {
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
}

void fill(Tensor& t, double value) {
  for (double& v : t.data()) v = value;
}

}  // namespace

Conv1dLayer::Conv1dLayer(std::size_t in_channels, std::size_t out_channels,
                         std::size_t kernel, std::size_t stride,
                         std::size_t padding)
    : weight(Tensor::zeros({out_channels, in_channels, kernel}, true)),
      bias(Tensor::zeros({out_channels}, true)),
      stride(stride),
      padding(padding) {
  if (kernel < 1) throw std::invalid_argument("conv kernel must be >= 1");
}

Tensor Conv1dLayer::forward(const Tensor& x) const {
  return ops::conv1d(x, weight, bias, stride, padding);
}

void Conv1dLayer::collect_parameters(const std::string& prefix,
                                     TensorList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

BatchNorm1d::BatchNorm1d(std::size_t channels)
    : gamma(Tensor::full({channels}, 1.0, true)),
      beta(Tensor::zeros({channels}, true)),
      running_mean(Tensor::zeros({channels})),
      running_var(Tensor::full({channels}, 1.0)) {}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode, bool update_stats) {
  ops::BatchNormOptions options;
  options.training = mode == Mode::kTrain;
  options.momentum = momentum;
  options.eps = eps;
  options.update_running_stats = update_stats;
  return ops::batch_norm(x, gamma, beta, running_mean, running_var, options);
}

std::vector<Tensor> BatchNorm1d::forward(const std::vector<Tensor>& xs, Mode mode,
                                         bool update_stats) {
  if (xs.size() == 1) return {forward(xs[0], mode, update_stats)};
  Tensor y = forward(ops::stack(xs), mode, update_stats);
  std::vector<Tensor> out;
  for (std::size_t n = 0; n < xs.size(); ++n) out.push_back(ops::select(y, n));
  return out;
}

void BatchNorm1d::collect_parameters(const std::string& prefix,
                                     TensorList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

void BatchNorm1d::collect_buffers(const std::string& prefix,
                                  TensorList& out) const {
  out.push_back({prefix + ".running_mean", running_mean});
  out.push_back({prefix + ".running_var", running_var});
}

LinearLayer::LinearLayer(std::size_t in_features, std::size_t out_features)
    : weight(Tensor::zeros({out_features, in_features}, true)),
      bias(Tensor::zeros({out_features}, true)) {}

Tensor LinearLayer::forward(const Tensor& x) const {
  return ops::linear(weight, x, bias);
}

void LinearLayer::collect_parameters(const std::string& prefix,
                                     TensorList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

GruLayer::GruLayer(std::size_t input_size, std::size_t hidden_size) {
  for (Tensor* w : {&w_ir, &w_iz, &w_in}) {
    *w = Tensor::zeros({hidden_size, input_size}, true);
  }
  for (Tensor* w : {&w_hr, &w_hz, &w_hn}) {
    *w = Tensor::zeros({hidden_size, hidden_size}, true);
  }
  for (Tensor* b : {&b_ir, &b_iz, &b_in, &b_hr, &b_hz, &b_hn}) {
    *b = Tensor::zeros({hidden_size}, true);
  }
}

Tensor GruLayer::forward(const Tensor& seq) const {
  if (seq.rank() != 2 || seq.dim(1) != input_size()) {
    throw std::invalid_argument("gru: expected (T x " +
                                std::to_string(input_size()) + ") input, got " +
                                shape_to_string(seq.shape()));
  }
  Tensor h = Tensor::zeros({hidden_size()});
  for (std::size_t t = 0; t < seq.dim(0); ++t) {
    Tensor x = ops::row(seq, t);
    Tensor r = ops::sigmoid(
        ops::add(ops::linear(w_ir, x, b_ir), ops::linear(w_hr, h, b_hr)));
    Tensor z = ops::sigmoid(
        ops::add(ops::linear(w_iz, x, b_iz), ops::linear(w_hz, h, b_hz)));
    Tensor n = ops::tanh(ops::add(ops::linear(w_in, x, b_in),
                                  ops::mul(r, ops::linear(w_hn, h, b_hn))));
    h = ops::add(ops::mul(ops::one_minus(z), n), ops::mul(z, h));
  }
  return h;
}

void GruLayer::collect_parameters(const std::string& prefix,
                                  TensorList& out) const {
  out.push_back({prefix + ".w_ir", w_ir});
  out.push_back({prefix + ".w_iz", w_iz});
  out.push_back({prefix + ".w_in", w_in});
  out.push_back({prefix + ".w_hr", w_hr});
  out.push_back({prefix + ".w_hz", w_hz});
  out.push_back({prefix + ".w_hn", w_hn});
  out.push_back({prefix + ".b_ir", b_ir});
  out.push_back({prefix + ".b_iz", b_iz});
  out.push_back({prefix + ".b_in", b_in});
  out.push_back({prefix + ".b_hr", b_hr});
  out.push_back({prefix + ".b_hz", b_hz});
  out.push_back({prefix + ".b_hn", b_hn});
}

void init_parameters(Conv1dLayer& layer, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const double fan_in = static_cast<double>(layer.in_channels() * layer.kernel());
  fill_uniform(layer.weight, std::sqrt(1.0 / fan_in), rng);
  fill(layer.bias, 0.0);
}

void init_parameters(BatchNorm1d& layer, std::uint64_t /*seed*/) {
  fill(layer.gamma, 1.0);
  fill(layer.beta, 0.0);
  fill(layer.running_mean, 0.0);
  fill(layer.running_var, 1.0);
}

void init_parameters(LinearLayer& layer, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const double fan_in = static_cast<double>(layer.weight.dim(1));
  fill_uniform(layer.weight, std::sqrt(1.0 / fan_in), rng);
  fill(layer.bias, 0.0);
}

void init_parameters(GruLayer& layer, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const double bound = std::sqrt(1.0 / static_cast<double>(layer.hidden_size()));
  for (Tensor* w : {&layer.w_ir, &layer.w_iz, &layer.w_in, &layer.w_hr,
                    &layer.w_hz, &layer.w_hn}) {
    fill_uniform(*w, bound, rng);
  }
  for (Tensor* b : {&layer.b_ir, &layer.b_iz, &layer.b_in, &layer.b_hr,
                    &layer.b_hz, &layer.b_hn}) {
    fill(*b, 0.0);
  }
}

}  // namespace fdnsv
