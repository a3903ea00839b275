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

#include <cmath>
#include <filesystem>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fdnsv/ops.h"
#include "fdnsv/training.h"
#include "test_util.h"

using namespace fdnsv;
using fdnsv::testing::max_abs_diff;

namespace fs = std::filesystem;

namespace {

const TrainingSet& tiny_corpus() {
  static const TrainingSet set = [] {
    fs::path dir = fs::path(FDNSV_TEST_TMP) / "train_corpus";
    fs::remove_all(dir);
    SyntheticCorpusOptions opts;
    opts.length = 2187;
    return load_training_set(generate_synthetic_corpus(opts, dir.string()).train);
  }();
  return set;
}

std::vector<double> flatten(const FdnNetwork& net) {
  std::vector<double> out;
  for (const NamedTensor& p : net.parameters()) {
    out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  }
  return out;
}

}  // namespace

TEST_CASE("AMSGrad first step by hand") {
  Tensor theta({1}, {1.0}, true);
  AmsGradOptions opts;
  opts.weight_decay = 0.0;
  AmsGrad opt({theta}, opts);
  {
    Tape tape;
    tape.backward(ops::sum(ops::mul(theta, theta)));
  }
  CHECK(theta.grad()[0] == 2.0);
  opt.step();
  // m_hat = 2, v_hat = 4: theta -= 1e-3 * 2 / (2 + 1e-8)
  CHECK(theta[0] == doctest::Approx(0.999).epsilon(1e-10));
  CHECK(std::abs(theta[0] - (1.0 - 1e-3 * 2.0 / (2.0 + 1e-8))) < 1e-15);
}

TEST_CASE("AMSGrad follows the update formulas over several steps") {
  SplitMix64 rng(1);
  Tensor p({3}, {0.5, -1.0, 2.0}, true);
  AmsGradOptions opts;
  opts.lr = 0.01;
  AmsGrad opt({p}, opts);
  std::vector<double> theta{0.5, -1.0, 2.0}, m(3, 0.0), v(3, 0.0), vmax(3, 0.0);
  for (int t = 1; t <= 6; ++t) {
    std::vector<double> g(3);
    for (int i = 0; i < 3; ++i) {
      g[i] = rng.uniform(-3, 3);
      p.grad()[i] = g[i];
    }
    std::vector<double> vmax_before = opt.max_second_moment(0);
    opt.step();
    for (int i = 0; i < 3; ++i) {
      const double gi = g[i] + opts.weight_decay * theta[i];
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      vmax[i] = std::max(vmax[i], v[i]);
      theta[i] -= opts.lr * (m[i] / (1 - std::pow(0.9, t))) /
                  (std::sqrt(vmax[i] / (1 - std::pow(0.999, t))) + 1e-8);
      CHECK(opt.max_second_moment(0)[i] >= vmax_before[i]);
    }
    CHECK(max_abs_diff(p.data(), theta) < 1e-14);
    p.zero_grad();
  }
}

TEST_CASE("AMSGrad leaves parameters alone without gradient or decay") {
  Tensor p({2}, {0.3, -0.7}, true);
  AmsGradOptions opts;
  opts.weight_decay = 0.0;
  AmsGrad opt({p}, opts);
  p.grad();
  for (int i = 0; i < 3; ++i) opt.step();
  CHECK(p[0] == 0.3);
  CHECK(p[1] == -0.7);
}

TEST_CASE("AMSGrad rejects non-finite gradients before updating") {
  Tensor a({1}, {1.0}, true), b({1}, {2.0}, true);
  AmsGrad opt({a, b});
  a.grad()[0] = 1.0;
  b.grad()[0] = NAN;
  CHECK_THROWS_WITH(opt.step(), doctest::Contains("non-finite gradient"));
  CHECK(a[0] == 1.0);
  CHECK(opt.steps() == 0);
  CHECK(opt.max_second_moment(0)[0] == 0.0);
}

TEST_CASE("zero epochs change nothing") {
  FdnNetwork net(ModelConfig::tiny());
  net.initialize(1);
  const std::vector<double> before = flatten(net);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK(train(net, tiny_corpus(), cfg).empty());
  CHECK(flatten(net) == before);
}

TEST_CASE("zero learning rate and decay keep parameters fixed") {
  FdnNetwork net(ModelConfig::tiny());
  net.initialize(2);
  const std::vector<double> before = flatten(net);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.optimizer.lr = 0.0;
  cfg.optimizer.weight_decay = 0.0;
  train(net, tiny_corpus(), cfg);
  CHECK(flatten(net) == before);
}

TEST_CASE("epoch-1 loss is reproducible bit for bit") {
  TrainConfig cfg;
  cfg.epochs = 1;
  double first[2];
  for (double& loss : first) {
    FdnNetwork net(ModelConfig::tiny());
    net.initialize(3);
    loss = train(net, tiny_corpus(), cfg).at(0).mean_loss;
  }
  CHECK(first[0] == first[1]);
  TrainConfig other = cfg;
  other.seed = 99;
  FdnNetwork net(ModelConfig::tiny());
  net.initialize(3);
  CHECK(train(net, tiny_corpus(), other).at(0).mean_loss != first[0]);
}

TEST_CASE("loss on a fixed batch falls over the first steps") {
  FdnNetwork net(ModelConfig::tiny());
  net.initialize(4);
  std::vector<double> params;
  std::vector<Tensor> tensors;
  for (const NamedTensor& p : net.parameters()) tensors.push_back(p.tensor);
  AmsGrad opt(tensors);
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  for (std::size_t i = 0; i < tiny_corpus().items.size(); i += 10) {
    const LabeledWave& item = tiny_corpus().items[i];
    Waveform w = pre_emphasis(item.wave);
    inputs.emplace_back(Shape{1, w.samples.size()}, w.samples);
    labels.push_back(item.label);
  }
  double previous = INFINITY;
  for (int step = 0; step < 5; ++step) {
    const double loss = train_step(net, opt, inputs, labels);
    CHECK(loss < previous);
    previous = loss;
  }
}

TEST_CASE("speaker mismatch is rejected up front") {
  ModelConfig c = ModelConfig::tiny();
  c.num_speakers = 5;
  FdnNetwork net(c);
  CHECK_THROWS_AS(train(net, tiny_corpus(), TrainConfig{}), std::invalid_argument);
  TrainConfig bad;
  bad.batch_size = 0;
  FdnNetwork ok(ModelConfig::tiny());
  CHECK_THROWS(train(ok, tiny_corpus(), bad));
}

TEST_CASE("training log and checkpoints") {
  fs::path dir = fs::path(FDNSV_TEST_TMP) / "ckpts";
  fs::remove_all(dir);
  FdnNetwork net(ModelConfig::tiny());
  net.initialize(5);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.checkpoint_every = 1;
  cfg.checkpoint_dir = dir.string();
  std::vector<EpochStats> log = train(net, tiny_corpus(), cfg);
  CHECK(fs::exists(dir / "epoch_001.ckpt"));
  CHECK(fs::exists(dir / "epoch_002.ckpt"));
  std::ostringstream out;
  write_training_log(out, {{1, 2.0794415416798357, 0.125}, {2, 1.5, 0.5}});
  CHECK(out.str() == "1\t2.07944\t0.125\n2\t1.5\t0.5\n");
  for (const EpochStats& s : log) {
    CHECK(s.accuracy >= 0.0);
    CHECK(s.accuracy <= 1.0);
  }
}

TEST_CASE("tiny model fits the synthetic corpus in 40 epochs") {
  FdnNetwork net(ModelConfig::tiny());
  net.initialize(1);
  TrainConfig cfg;
  cfg.epochs = 40;
  std::vector<EpochStats> log = train(net, tiny_corpus(), cfg);
  MESSAGE("final epoch loss " << log.back().mean_loss << " accuracy " << log.back().accuracy);
  CHECK(log.back().accuracy >= 0.99);
}
