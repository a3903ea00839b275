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

#ifndef FDNSV_OPS_H_
#define FDNSV_OPS_H_

#include <span>
#include <vector>

#include "fdnsv/tensor.h"

// Differentiable tensor operations. Feature maps are channel-major (C x T).
// Every op records a backward rule on the active Tape when one of its inputs
// requires a gradient.
namespace fdnsv::ops {

// input (C_in x T), weight (C_out x C_in x k), bias (C_out).
// Output length is floor((T + 2*padding - k) / stride) + 1.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t padding);

// Non-overlapping max over windows along time. Ties route the gradient to
// the first maximal position.
Tensor maxpool1d(const Tensor& input, std::size_t window);

// (C x T) -> (C x 1), mean over time.
Tensor global_avg_pool(const Tensor& input);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor one_minus(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// f (C x T) times w (C x 1) broadcast along time.
Tensor channel_scale(const Tensor& f, const Tensor& w);

// Columns [begin, begin + length) of a (C x T) map.
Tensor slice_time(const Tensor& x, std::size_t begin, std::size_t length);

Tensor transpose(const Tensor& x);
// Row i of a rank-2 tensor as a rank-1 tensor.
Tensor row(const Tensor& x, std::size_t i);
Tensor reshape(const Tensor& x, Shape shape);

// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);
// Sub-tensor at index i of the leading axis (rank drops by one).
Tensor select(const Tensor& x, std::size_t i);
Tensor sum(const Tensor& x);

// weight (out x in) * x (in) + bias (out).
Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias);

// Mean over the batch of -log softmax(logits)[label]; logits are (N x K).
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;
  bool update_running_stats = true;
};

// Normalizes x of shape (C x T) or (N x C x T) per channel. In training mode
// batch statistics are used (and differentiated through); the running
// estimates are updated with the unbiased variance. Eval mode reads the
// running estimates only.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var,
                  const BatchNormOptions& options);

}  // namespace fdnsv::ops

#endif  // FDNSV_OPS_H_
