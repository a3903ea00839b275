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

#ifndef FDNSV_GRAD_SUITE_H_
#define FDNSV_GRAD_SUITE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "fdnsv/model.h"

namespace fdnsv {

struct GradSuiteEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t excluded = 0;  // steps that crossed a kink
};

struct GradSuiteOptions {
  std::uint64_t seed = 7;
  double step = 1e-5;
  bool include_ops = true;
  bool include_seo = true;
  bool include_networks = true;  // full tiny FDN-L and FDN-H losses
};

// Central-difference checks of every differentiable op, each layer, the SEO
// and hierarchical SEO modules, and the cross-entropy loss of tiny FDN-L /
// FDN-H networks with respect to every parameter. Op inputs are drawn away
// from the leaky-relu kink; in the network entries the few coordinates whose
// step crosses a kink are reported as excluded.
std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteOptions& options);

// Cross-entropy of a single utterance in train mode; the scalar the network
// entries of the suite differentiate.
Tensor network_loss(FdnNetwork& network, const Tensor& wave, int label);

}  // namespace fdnsv

#endif  // FDNSV_GRAD_SUITE_H_
