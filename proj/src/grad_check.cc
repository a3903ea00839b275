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

#include "fdnsv/grad_check.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fdnsv {

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           std::vector<Tensor> inputs, double step) {
  std::vector<bool> saved_flags;
  for (Tensor& t : inputs) {
    saved_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.clear_grad();
  }
  std::uint64_t base_signature = 0;
  {
    Tape tape;
    BranchTrace trace;
    Tensor loss = loss_fn();
    base_signature = trace.signature();
    tape.backward(loss);
  }
  auto evaluate = [&](std::uint64_t& signature) {
    BranchTrace trace;
    const double value = loss_fn().item();
    signature = trace.signature();
    return value;
  };

  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double original = t[i];
      std::uint64_t sig_up = 0, sig_down = 0;
      t[i] = original + step;
      const double up = evaluate(sig_up);
      t[i] = original - step;
      const double down = evaluate(sig_down);
      t[i] = original;
      ++report.coordinates;
      if (sig_up != base_signature || sig_down != base_signature) {
        ++report.excluded;
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      const double denom =
          std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      const double err = std::abs(analytic[i] - numeric) / denom;
      if (err > report.max_rel_error || !std::isfinite(err)) {
        report.max_rel_error = std::isfinite(err) ? err : INFINITY;
        report.worst_tensor = ti;
        report.worst_index = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    inputs[ti].set_requires_grad(saved_flags[ti]);
  }
  return report;
}

double grad_check(const std::function<Tensor(const Tensor&)>& fn,
                  const Tensor& point, double step) {
  Tensor x = point.clone();
  return grad_check([&] { return fn(x); }, {x}, step).max_rel_error;
}

}  // namespace fdnsv
