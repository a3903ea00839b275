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
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fdnsv/checkpoint.h"
#include "fdnsv/model.h"
#include "fdnsv/ops.h"
#include "seo_reference.h"
#include "test_util.h"

using namespace fdnsv;
using namespace fdnsv::testing;

namespace {

// Trainable scalars derived from the layer list by hand.
std::size_t closed_form_count(const ModelConfig& c) {
  auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return in * out * k + out; };
  auto seo = [&](std::size_t ch, std::size_t out) {
    const std::size_t r = ch / c.alpha;
    return 2 * conv(ch, r, 1) + conv(r, out, 1);
  };
  auto block = [&](std::size_t in, std::size_t out, bool preact) {
    std::size_t n = seo(in, in) + conv(in, out, 3) + 2 * out + conv(out, out, 3);
    if (preact) n += 2 * in;
    if (in != out) n += conv(in, out, 1);
    if (c.variant == Variant::kHeavy) n += seo(out, in);
    return n;
  };
  const std::size_t c0 = c.front_width(), c1 = c.block1_width();
  const std::size_t h = c.gru_width(), e = c.embedding_width();
  std::size_t n = conv(1, c0, 3) + 2 * c0;
  for (std::size_t i = 0; i < c.block0_repeats; ++i) n += block(c0, c0, i != 0);
  for (std::size_t i = 0; i < c.block1_repeats; ++i) n += block(i == 0 ? c0 : c1, c1, true);
  n += 3 * (h * c1 + h * h + 2 * h);
  n += e * h + e;
  n += c.num_speakers * e + c.num_speakers;
  return n;
}

SeoModule random_seo(std::size_t channels, std::size_t alpha, SplitMix64& rng) {
  SeoModule seo(channels, channels, alpha, SplitSpec{});
  randomize(seo, rng);
  return seo;
}

Tensor tensor_from(const std::vector<double>& v) {
  return Tensor({v.size(), 1}, v);
}

}  // namespace

TEST_CASE("split windows") {
  SplitSpec split;
  split.shift_fraction = 0.2;
  std::vector<double> frames(10);
  for (std::size_t i = 0; i < 10; ++i) frames[i] = static_cast<double>(i);
  auto [f1, f2] = split_feature(Tensor({1, 10}, frames), split);
  CHECK(f1.shape() == Shape{1, 8});
  CHECK(f2.shape() == Shape{1, 8});
  CHECK(f1[0] == 0.0);
  CHECK(f1[7] == 7.0);
  CHECK(f2[0] == 2.0);
  CHECK(f2[7] == 9.0);

  split.shift_fraction = 0.05;  // ceil(0.5) = 1: windows overlap in T - 2 frames
  auto [g1, g2] = split_feature(Tensor({1, 10}, frames), split);
  CHECK(g1.dim(1) == 9);
  CHECK(g2[0] == 1.0);

  CHECK(SplitSpec{}.window_length(19683) == 17015);
  CHECK_THROWS_WITH(split_feature(Tensor({1, 1}, {1.0}), SplitSpec{}),
                    doctest::Contains("feature too short for split"));

  SplitSpec halves;
  halves.policy = SplitPolicy::kHalves;
  auto [h1, h2] = split_feature(Tensor({1, 10}, frames), halves);
  CHECK(h1[4] == 4.0);
  CHECK(h2[0] == 5.0);
}

TEST_CASE("SEO with a zeroed expansion halves the input") {
  SplitMix64 rng(1);
  SeoModule seo = random_seo(8, 4, rng);
  seo.expand.weight = Tensor::zeros(seo.expand.weight.shape());
  seo.expand.bias = Tensor::zeros(seo.expand.bias.shape());
  Tensor x = random_tensor({8, 20}, rng);
  SeoOutput out = seo_forward(x, seo);
  for (double v : out.attention.data()) CHECK(v == 0.5);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(out.enhanced[i] == 0.5 * x[i]);
}

TEST_CASE("SEO with tied reductions cancels constant maps and shifts") {
  SplitMix64 rng(2);
  SeoModule seo = random_seo(8, 4, rng);
  // dyadic weights keep every sum exact so the cancellation is bitwise
  for (Conv1dLayer* conv : {&seo.end_reduce, &seo.expand}) {
    for (double& v : conv->weight.data()) v = std::round(v * 16.0) / 16.0;
    for (double& v : conv->bias.data()) v = std::round(v * 16.0) / 16.0;
  }
  seo.begin_reduce.weight = seo.end_reduce.weight.clone();
  seo.begin_reduce.bias = seo.end_reduce.bias.clone();

  Tensor constant = Tensor::full({8, 30}, 0.75);
  Tensor a = seo_attention(constant, seo);
  Tensor expected = ops::sigmoid(ops::reshape(seo.expand.bias, {8, 1}));
  for (std::size_t c = 0; c < 8; ++c) CHECK(a[c] == expected[c]);

  // 38 frames -> windows of 32; the shift and the frames are dyadic
  Tensor x = Tensor::zeros({8, 38});
  for (double& v : x.data()) v = static_cast<double>(rng.below(64)) / 32.0;
  Tensor shifted = x.clone();
  for (double& v : shifted.data()) v += 1.5;
  Tensor s0 = seo_attention(x, seo), s1 = seo_attention(shifted, seo);
  for (std::size_t c = 0; c < 8; ++c) CHECK(s0[c] == s1[c]);
}

TEST_CASE("SEO matches the straight-line reference") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    SeoModule seo = random_seo(16, 8, rng);
    Tensor x = random_tensor({16, 40}, rng, -2.0, 2.0);
    const Matrix xm = to_matrix(x);
    const std::vector<double> w = reference_attention(xm, seo);
    SeoOutput out = seo_forward(x, seo);
    CHECK(max_abs_diff(out.attention.data(), w) < 1e-12);
    CHECK(max_diff(reweight(xm, w), out.enhanced) < 1e-12);
    for (double v : out.attention.data()) CHECK((v > 0.0 && v < 1.0));
  }
}

TEST_CASE("hierarchical SEO reference, symmetry and fixed points") {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    FdnBlock block = random_heavy_block(8, 16, 4, rng);
    Tensor f = random_tensor({8, 27}, rng, -2.0, 2.0);
    const Matrix fm = to_matrix(f);
    const Matrix conv_out = reference_first_conv(fm, block);
    const std::vector<double> w1 = reference_attention(fm, block.seo);
    const std::vector<double> w2 = reference_attention(conv_out, *block.inner_seo);
    std::vector<double> mean(w1.size());
    for (std::size_t c = 0; c < w1.size(); ++c) mean[c] = (w1[c] + w2[c]) / 2.0;
    Tensor u = seo_hierarchical_forward(f, block.seo, *block.inner_seo, [&](const Tensor& t) {
      return block.first_conv(t, Mode::kEval, false);
    });
    CHECK(max_diff(reweight(fm, mean), u) < 1e-12);
  }

  SeoModule a = random_seo(8, 4, rng), b = random_seo(8, 4, rng);
  Tensor f = random_tensor({8, 21}, rng);
  Tensor ab = seo_hierarchical_combine(f, f, a, b);
  Tensor ba = seo_hierarchical_combine(f, f, b, a);
  CHECK(max_abs_diff(ab.data(), ba.data()) == 0.0);

  Tensor same = seo_hierarchical_combine(f, f, a, a);
  CHECK(max_abs_diff(same.data(), seo_forward(f, a).enhanced.data()) < 1e-15);

  for (SeoModule* s : {&a, &b}) {
    s->expand.weight = Tensor::zeros(s->expand.weight.shape());
    s->expand.bias = Tensor::zeros(s->expand.bias.shape());
  }
  Tensor g = random_tensor({8, 21}, rng);
  Tensor half = seo_hierarchical_combine(f, g, a, b);
  for (std::size_t i = 0; i < f.numel(); ++i) CHECK(half[i] == 0.5 * f[i]);
}

TEST_CASE("block with a silent residual branch reduces to pooling its input") {
  SplitMix64 rng(5);
  for (Variant v : {Variant::kLight, Variant::kHeavy}) {
    FdnBlock block(8, 8, v, true, 4, SplitSpec{}, 0.3);
    randomize(block.seo, rng);
    Tensor x = random_tensor({8, 27}, rng);
    Tensor y = fdn_block_forward(x, block, Mode::kTrain);
    CHECK(max_abs_diff(y.data(), ops::maxpool1d(x, 3).data()) == 0.0);
  }
  FdnBlock block(8, 8, Variant::kLight, true, 4, SplitSpec{}, 0.3);
  CHECK_THROWS_WITH(fdn_block_forward(Tensor::zeros({8, 28}), block, Mode::kTrain),
                    doctest::Contains("T=28"));
}

TEST_CASE("stage shapes follow the size column for every power-of-three length") {
  FdnNetwork net(ModelConfig::tiny());
  net.initialize(3);
  const ModelConfig& c = net.config();
  SplitMix64 rng(6);
  for (std::size_t k = 4; k <= 10; ++k) {
    std::size_t t = 27;
    for (std::size_t i = 0; i < k; ++i) t *= 3;
    Tensor wave = random_tensor({1, t}, rng, -0.5, 0.5);
    ForwardResult r = net.forward(wave, Mode::kEval);
    INFO("T = " << t);
    REQUIRE(r.stage_shapes.size() == 6);
    CHECK(r.stage_shapes[0] == Shape{c.front_width(), t / 3});
    CHECK(r.stage_shapes[1] == Shape{c.front_width(), t / 27});
    CHECK(r.stage_shapes[2] == Shape{c.block1_width(), t / 2187});
    CHECK(r.stage_shapes[3] == Shape{c.gru_width()});
    CHECK(r.stage_shapes[4] == Shape{c.embedding_width()});
    CHECK(r.stage_shapes[5] == Shape{c.num_speakers});
  }
  // 3^3 * 27 = 729 samples is below one frame at the GRU
  CHECK_THROWS_WITH(net.forward(Tensor::zeros({1, 729}), Mode::kEval),
                    doctest::Contains("minimum length"));
}

TEST_CASE("full-width network on a three-crop utterance") {
  FdnNetwork net{ModelConfig{}};
  net.initialize(1);
  SplitMix64 rng(7);
  ForwardResult r = net.forward(random_tensor({1, 3 * 59049}, rng, -0.5, 0.5), Mode::kEval);
  CHECK(r.stage_shapes[2] == Shape{256, 81});
  CHECK(r.embedding.shape() == Shape{1024});
  for (double v : r.embedding.data()) CHECK(std::isfinite(v));
}

TEST_CASE("eval forward is deterministic") {
  FdnNetwork net(ModelConfig::tiny(Variant::kHeavy));
  net.initialize(8);
  SplitMix64 rng(8);
  Tensor wave = random_tensor({1, 6561}, rng, -0.5, 0.5);
  ForwardResult a = net.forward(wave, Mode::kEval), b = net.forward(wave, Mode::kEval);
  CHECK(max_abs_diff(a.logits.data(), b.logits.data()) == 0.0);
  CHECK(max_abs_diff(a.embedding.data(), b.embedding.data()) == 0.0);
}

TEST_CASE("batched forward shares batch statistics") {
  FdnNetwork net(ModelConfig::tiny());
  net.initialize(9);
  SplitMix64 rng(9);
  std::vector<Tensor> waves{random_tensor({1, 2187}, rng), random_tensor({1, 2187}, rng)};
  std::vector<ForwardResult> batch = net.forward(waves, Mode::kEval);
  // in eval mode batching must not change anything
  for (std::size_t i = 0; i < 2; ++i) {
    ForwardResult single = net.forward(waves[i], Mode::kEval);
    CHECK(max_abs_diff(batch[i].logits.data(), single.logits.data()) < 1e-12);
  }
  CHECK_THROWS(net.forward(std::vector<Tensor>{waves[0], Tensor::zeros({1, 6561})}, Mode::kTrain));
}

TEST_CASE("parameter counts") {
  for (std::size_t alpha : {2u, 4u, 8u, 16u, 32u}) {
    for (Variant v : {Variant::kLight, Variant::kHeavy}) {
      ModelConfig c;
      c.alpha = alpha;
      c.variant = v;
      CHECK(count_parameters(c) == closed_form_count(c));
    }
  }
  ModelConfig tiny = ModelConfig::tiny(Variant::kHeavy);
  CHECK(count_parameters(tiny) == closed_form_count(tiny));
  FdnNetwork net(tiny);
  CHECK(net.parameter_count() == count_parameters(tiny));

  ModelConfig c;
  const std::size_t at8 = count_parameters(c);
  CHECK(std::abs(static_cast<double>(at8) / 13.06e6 - 1.0) < 0.02);
  std::size_t previous = SIZE_MAX;
  for (std::size_t alpha : {2u, 4u, 8u, 16u, 32u}) {
    c.alpha = alpha;
    const std::size_t n = count_parameters(c);
    CHECK(n < previous);
    previous = n;
  }
  LinearLayer fc(1024, 6112);
  TensorList params;
  fc.collect_parameters("fc", params);
  CHECK(params[0].tensor.numel() + params[1].tensor.numel() == 6264800);
}

TEST_CASE("config validation") {
  ModelConfig c;
  c.alpha = 7;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  ModelConfig d;
  d.crop_samples = 1000;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  CHECK(parse_variant("heavy") == Variant::kHeavy);
  CHECK_THROWS(parse_variant("medium"));
}

TEST_CASE("checkpoint round trip is bit exact") {
  FdnNetwork net(ModelConfig::tiny(Variant::kHeavy));
  net.initialize(10);
  net.blocks()[1].bn_mid.running_var[0] = 1.2345678901234567;
  std::ostringstream first;
  save_checkpoint(first, net);
  std::istringstream in(first.str());
  FdnNetwork loaded = load_checkpoint(in);
  std::ostringstream second;
  save_checkpoint(second, loaded);
  CHECK(first.str() == second.str());
  TensorList a = net.state(), b = loaded.state();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(max_abs_diff(a[i].tensor.data(), b[i].tensor.data()) == 0.0);
  }
  CHECK(loaded.config().variant == Variant::kHeavy);

  std::string bad = first.str();
  bad.replace(0, 5, "xxxxx");
  std::istringstream bad_in(bad);
  CHECK_THROWS(load_checkpoint(bad_in));
  std::istringstream truncated(first.str().substr(0, first.str().size() - 8));
  CHECK_THROWS(load_checkpoint(truncated));
}
