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

#ifndef FDNSV_GRAD_CHECK_H_
#define FDNSV_GRAD_CHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "fdnsv/tensor.h"

namespace fdnsv {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_tensor = 0;  // index into the checked tensors
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Coordinates whose +-step evaluations took different branches of a
  // piecewise op than the unperturbed pass; left out of max_rel_error.
  std::size_t excluded = 0;
};

// Compares reverse-mode gradients of a scalar loss against central
// differences. The error of a coordinate is
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
// loss_fn must be deterministic in the values of `inputs`; it is called once
// under a tape and twice per coordinate without one. Max-pool and leaky-relu
// are only piecewise differentiable; a coordinate whose perturbation moves
// any of them onto another piece (see BranchTrace) has no valid central
// difference and is counted in `excluded` instead.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           std::vector<Tensor> inputs, double step = 1e-5);

// Single-input form: max relative error of d fn(x) / dx at `point`.
double grad_check(const std::function<Tensor(const Tensor&)>& fn,
                  const Tensor& point, double step = 1e-5);

}  // namespace fdnsv

#endif  // FDNSV_GRAD_CHECK_H_
