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

#include "fdnsv/grad_suite.h"

#include <cmath>

#include "fdnsv/grad_check.h"
#include "fdnsv/layers.h"
#include "fdnsv/ops.h"
#include "fdnsv/rng.h"

namespace fdnsv {
namespace {

Tensor random_tensor(Shape shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Uniform magnitude in [0.05, 1] with random sign, clear of zero.
Tensor off_kink_tensor(Shape shape, SplitMix64& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) {
    const double m = rng.uniform(0.05, 1.0);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// Contracts an arbitrary output with fixed random weights so every output
// coordinate contributes a distinct gradient.
Tensor project(const Tensor& y, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor w = random_tensor(y.shape(), rng);
  return ops::sum(ops::mul(y, w));
}

std::vector<Tensor> tensors_of(const TensorList& list) {
  std::vector<Tensor> out;
  for (const NamedTensor& t : list) out.push_back(t.tensor);
  return out;
}

}  // namespace

Tensor network_loss(FdnNetwork& network, const Tensor& wave, int label) {
  ForwardResult out = network.forward(wave, Mode::kTrain);
  return ops::softmax_cross_entropy(
      ops::reshape(out.logits, {1, out.logits.numel()}),
      std::span<const int>(&label, 1));
}

std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteOptions& options) {
  SplitMix64 rng(options.seed);
  const double h = options.step;
  std::vector<GradSuiteEntry> results;
  auto add = [&](const std::string& name, const GradCheckReport& r) {
    results.push_back({name, r.max_rel_error, r.coordinates, r.excluded});
  };

  if (options.include_ops) {
    {
      Tensor x = random_tensor({4, 10}, rng), w = random_tensor({5, 4, 3}, rng),
             b = random_tensor({5}, rng);
      add("conv1d k3 s1 p1", grad_check([&] {
            return project(ops::conv1d(x, w, b, 1, 1), 11);
          }, {x, w, b}, h));
      Tensor x3 = random_tensor({2, 21}, rng), w3 = random_tensor({3, 2, 3}, rng),
             b3 = random_tensor({3}, rng);
      add("conv1d k3 s3 p0", grad_check([&] {
            return project(ops::conv1d(x3, w3, b3, 3, 0), 12);
          }, {x3, w3, b3}, h));
    }
    {
      Tensor x = random_tensor({3, 12}, rng);
      add("maxpool1d", grad_check([&] { return project(ops::maxpool1d(x, 3), 13); },
                                  {x}, h));
      add("global_avg_pool",
          grad_check([&] { return project(ops::global_avg_pool(x), 14); }, {x}, h));
      add("transpose", grad_check([&] { return project(ops::transpose(x), 15); },
                                  {x}, h));
      add("slice_time",
          grad_check([&] { return project(ops::slice_time(x, 2, 7), 16); }, {x}, h));
      add("row", grad_check([&] { return project(ops::row(x, 1), 17); }, {x}, h));
    }
    {
      Tensor x = off_kink_tensor({3, 8}, rng);
      add("leaky_relu", grad_check([&] {
            return project(ops::leaky_relu(x, 0.3), 18);
          }, {x}, h));
      add("sigmoid", grad_check([&] { return project(ops::sigmoid(x), 19); }, {x}, h));
      add("tanh", grad_check([&] { return project(ops::tanh(x), 20); }, {x}, h));
      add("one_minus", grad_check([&] { return project(ops::one_minus(x), 21); },
                                  {x}, h));
      add("scale", grad_check([&] { return project(ops::scale(x, -1.7), 22); },
                              {x}, h));
    }
    {
      Tensor a = random_tensor({3, 5}, rng), b = random_tensor({3, 5}, rng);
      add("add", grad_check([&] { return project(ops::add(a, b), 23); }, {a, b}, h));
      add("sub", grad_check([&] { return project(ops::sub(a, b), 24); }, {a, b}, h));
      add("mul", grad_check([&] { return project(ops::mul(a, b), 25); }, {a, b}, h));
      Tensor w = random_tensor({3, 1}, rng);
      add("channel_scale", grad_check([&] {
            return project(ops::channel_scale(a, w), 26);
          }, {a, w}, h));
      add("stack/select", grad_check([&] {
            return project(ops::select(ops::stack({a, b}), 1), 27);
          }, {a, b}, h));
    }
    {
      Tensor w = random_tensor({4, 6}, rng), x = random_tensor({6}, rng),
             b = random_tensor({4}, rng);
      add("linear", grad_check([&] { return project(ops::linear(w, x, b), 28); },
                               {w, x, b}, h));
      Tensor logits = random_tensor({3, 5}, rng, -3.0, 3.0);
      const std::vector<int> labels{0, 4, 2};
      add("softmax_cross_entropy", grad_check([&] {
            return ops::softmax_cross_entropy(logits, labels);
          }, {logits}, h));
    }
    {
      BatchNorm1d bn(3);
      for (double& v : bn.gamma.data()) v = rng.uniform(0.5, 1.5);
      for (double& v : bn.beta.data()) v = rng.uniform(-0.5, 0.5);
      Tensor x = random_tensor({2, 3, 7}, rng);
      add("batch_norm train", grad_check([&] {
            return project(bn.forward(x, Mode::kTrain, false), 29);
          }, {x, bn.gamma, bn.beta}, h));
      for (double& v : bn.running_mean.data()) v = rng.uniform(-0.5, 0.5);
      for (double& v : bn.running_var.data()) v = rng.uniform(0.5, 2.0);
      add("batch_norm eval", grad_check([&] {
            return project(bn.forward(x, Mode::kEval), 30);
          }, {x, bn.gamma, bn.beta}, h));
    }
    {
      GruLayer gru(4, 5);
      init_parameters(gru, rng.next());
      for (Tensor* b : {&gru.b_ir, &gru.b_iz, &gru.b_in, &gru.b_hr, &gru.b_hz,
                        &gru.b_hn}) {
        for (double& v : b->data()) v = rng.uniform(-0.3, 0.3);
      }
      Tensor seq = random_tensor({3, 4}, rng);
      TensorList params;
      gru.collect_parameters("gru", params);
      std::vector<Tensor> inputs = tensors_of(params);
      inputs.push_back(seq);
      add("gru", grad_check([&] { return project(gru.forward(seq), 31); }, inputs, h));
    }
  }

  if (options.include_seo) {
    const SplitSpec split;
    SeoModule seo(8, 8, 4, split);
    init_parameters(seo.end_reduce, rng.next());
    init_parameters(seo.begin_reduce, rng.next());
    init_parameters(seo.expand, rng.next());
    for (double& v : seo.expand.bias.data()) v = rng.uniform(-0.5, 0.5);
    Tensor x = random_tensor({8, 15}, rng);
    TensorList params;
    seo.collect_parameters("seo", params);
    std::vector<Tensor> inputs = tensors_of(params);
    inputs.push_back(x);
    add("seo", grad_check([&] { return project(seo_forward(x, seo).enhanced, 32); },
                          inputs, h));

    FdnBlock block(8, 16, Variant::kHeavy, true, 4, split, 0.3);
    for (auto* s : {&block.seo, &*block.inner_seo}) {
      init_parameters(s->end_reduce, rng.next());
      init_parameters(s->begin_reduce, rng.next());
      init_parameters(s->expand, rng.next());
    }
    init_parameters(block.conv_a, rng.next());
    TensorList hier;
    block.seo.collect_parameters("outer", hier);
    block.inner_seo->collect_parameters("inner", hier);
    block.bn_in->collect_parameters("bn_in", hier);
    block.conv_a.collect_parameters("conv_a", hier);
    std::vector<Tensor> hier_inputs = tensors_of(hier);
    hier_inputs.push_back(x);
    add("hierarchical seo", grad_check([&] {
          return project(seo_hierarchical_forward(
                             x, block.seo, *block.inner_seo,
                             [&](const Tensor& t) {
                               return block.first_conv(t, Mode::kTrain, false);
                             }),
                         33);
        }, hier_inputs, h));
  }

  if (options.include_networks) {
    for (Variant variant : {Variant::kLight, Variant::kHeavy}) {
      FdnNetwork network(ModelConfig::tiny(variant));
      network.initialize(rng.next());
      Tensor wave = random_tensor({1, network.config().crop_samples}, rng, -0.5, 0.5);
      const int label = static_cast<int>(rng.below(network.config().num_speakers));
      add(variant == Variant::kLight ? "tiny FDN-L loss" : "tiny FDN-H loss",
          grad_check([&] { return network_loss(network, wave, label); },
                     tensors_of(network.parameters()), h));
    }
  }
  return results;
}

}  // namespace fdnsv
