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
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fdnsv/grad_suite.h"
#include "fdnsv/ops.h"
#include "test_util.h"

using namespace fdnsv;
using fdnsv::testing::max_abs_diff;
using fdnsv::testing::random_tensor;

namespace {

Tensor conv_reference(const Tensor& x, const Tensor& w, const Tensor& b,
                      std::size_t stride, std::size_t pad) {
  const std::size_t cin = x.dim(0), len = x.dim(1), cout = w.dim(0), k = w.dim(2);
  const std::size_t out_len = (len + 2 * pad - k) / stride + 1;
  Tensor y = Tensor::zeros({cout, out_len});
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t t = 0; t < out_len; ++t) {
      double acc = b[o];
      for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t j = 0; j < k; ++j) {
          const long pos = static_cast<long>(t * stride + j) - static_cast<long>(pad);
          if (pos < 0 || pos >= static_cast<long>(len)) continue;
          acc += w[(o * cin + c) * k + j] * x[c * len + static_cast<std::size_t>(pos)];
        }
      }
      y[o * out_len + t] = acc;
    }
  }
  return y;
}

}  // namespace

TEST_CASE("conv1d hand example") {
  Tensor y = ops::conv1d(Tensor({1, 3}, {1, 2, 3}), Tensor({1, 1, 3}, {1, 0, -1}),
                         Tensor({1}, {0}), 1, 0);
  CHECK(y.shape() == Shape{1, 1});
  CHECK(y[0] == -2.0);
}

TEST_CASE("conv1d matches the triple-loop reference") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_tensor({4, 10}, rng), w = random_tensor({5, 4, 3}, rng),
           b = random_tensor({5}, rng);
    CHECK(max_abs_diff(ops::conv1d(x, w, b, 1, 1).data(),
                       conv_reference(x, w, b, 1, 1).data()) < 1e-12);
    CHECK(max_abs_diff(ops::conv1d(x, w, b, 3, 0).data(),
                       conv_reference(x, w, b, 3, 0).data()) < 1e-12);
  }
}

TEST_CASE("conv1d front-end shape") {
  Tensor x = Tensor::zeros({1, 59049});
  Tensor y = ops::conv1d(x, Tensor::zeros({128, 1, 3}), Tensor::zeros({128}), 3, 0);
  CHECK(y.shape() == Shape{128, 19683});
}

TEST_CASE("conv1d k=1 unit kernel is the identity") {
  SplitMix64 rng(2);
  Tensor x = random_tensor({1, 17}, rng);
  Tensor y = ops::conv1d(x, Tensor({1, 1, 1}, {1.0}), Tensor({1}, {0.0}), 1, 0);
  CHECK(max_abs_diff(x.data(), y.data()) == 0.0);
}

TEST_CASE("conv1d errors") {
  CHECK_THROWS_WITH(ops::conv1d(Tensor::zeros({2, 5}), Tensor::zeros({1, 3, 3}),
                                Tensor::zeros({1}), 1, 0),
                    doctest::Contains("channel mismatch"));
  CHECK_THROWS_WITH(ops::conv1d(Tensor::zeros({1, 2}), Tensor::zeros({1, 1, 3}),
                                Tensor::zeros({1}), 1, 0),
                    doctest::Contains("input too short"));
}

TEST_CASE("maxpool1d values, shapes and routing") {
  Tensor y = ops::maxpool1d(Tensor({1, 6}, {1, 5, 2, 4, 4, 4}), 3);
  CHECK(y.shape() == Shape{1, 2});
  CHECK(y[0] == 5.0);
  CHECK(y[1] == 4.0);
  CHECK(ops::maxpool1d(Tensor::zeros({128, 19683}), 3).shape() == Shape{128, 6561});

  Tensor x({1, 3}, {1, 5, 2}, true);
  {
    Tape tape;
    tape.backward(ops::sum(ops::maxpool1d(x, 3)));
  }
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) ==
        std::vector<double>{0, 1, 0});

  Tensor tie({1, 3}, {4, 4, 4}, true);
  {
    Tape tape;
    tape.backward(ops::sum(ops::maxpool1d(tie, 3)));
  }
  CHECK(std::vector<double>(tie.grad().begin(), tie.grad().end()) ==
        std::vector<double>{1, 0, 0});
  CHECK_THROWS(ops::maxpool1d(x, 0));
}

TEST_CASE("global_avg_pool") {
  Tensor y = ops::global_avg_pool(Tensor({2, 2}, {1, 3, 2, 6}));
  CHECK(y.shape() == Shape{2, 1});
  CHECK(y[0] == 2.0);
  CHECK(y[1] == 4.0);
  Tensor c = ops::global_avg_pool(Tensor::full({3, 7}, 0.25));
  for (double v : c.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  SplitMix64 rng(4);
  Tensor x = random_tensor({8, 50}, rng);
  Tensor g = ops::global_avg_pool(x);
  for (std::size_t ch = 0; ch < 8; ++ch) {
    double acc = 0.0;
    for (std::size_t t = 0; t < 50; ++t) acc += x[ch * 50 + t];
    CHECK(std::abs(g[ch] - acc / 50.0) < 1e-12);
  }
}

TEST_CASE("pooling commutes with channel scaling") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor f = random_tensor({6, 13}, rng), w = random_tensor({6, 1}, rng);
    Tensor lhs = ops::global_avg_pool(ops::channel_scale(f, w));
    Tensor rhs = ops::mul(w, ops::global_avg_pool(f));
    CHECK(max_abs_diff(lhs.data(), rhs.data()) < 1e-12);
  }
}

TEST_CASE("elementwise examples") {
  CHECK(ops::leaky_relu(Tensor({1}, {-1.0}), 0.3)[0] == doctest::Approx(-0.3));
  CHECK(ops::leaky_relu(Tensor({1}, {2.0}), 0.3)[0] == 2.0);
  CHECK(ops::sigmoid(Tensor({1}, {0.0}))[0] == 0.5);
  SplitMix64 rng(6);
  Tensor f = random_tensor({3, 4}, rng);
  CHECK(max_abs_diff(ops::channel_scale(f, Tensor::full({3, 1}, 1.0)).data(), f.data()) ==
        0.0);
  CHECK_THROWS(ops::channel_scale(f, Tensor::full({4, 1}, 1.0)));
  CHECK_THROWS(ops::add(f, Tensor::zeros({4, 3})));
  CHECK_THROWS(ops::mul(f, Tensor::zeros({3, 5})));
}

TEST_CASE("softmax cross-entropy") {
  const std::vector<int> zero{0};
  CHECK(ops::softmax_cross_entropy(Tensor({1, 2}, {0, 0}), zero).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double big = ops::softmax_cross_entropy(Tensor({1, 2}, {1000, 0}), zero).item();
  CHECK(std::isfinite(big));
  CHECK(big < 1e-300);
  CHECK(ops::softmax_cross_entropy(Tensor::full({2, 7}, 3.5), std::vector<int>{1, 6})
            .item() == doctest::Approx(std::log(7.0)).epsilon(1e-15));
  CHECK_THROWS(ops::softmax_cross_entropy(Tensor({1, 2}, {0, 0}), std::vector<int>{2}));
  CHECK_THROWS(ops::softmax_cross_entropy(Tensor({1, 2}, {0, 0}), std::vector<int>{-1}));

  SplitMix64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = random_tensor({3, 5}, rng, -4.0, 4.0);
    std::vector<int> labels;
    for (int i = 0; i < 3; ++i) labels.push_back(static_cast<int>(rng.below(5)));
    long double naive = 0.0L;
    for (std::size_t n = 0; n < 3; ++n) {
      long double z = 0.0L;
      for (std::size_t k = 0; k < 5; ++k) z += std::exp(static_cast<long double>(logits[n * 5 + k]));
      naive += -std::log(std::exp(static_cast<long double>(logits[n * 5 + labels[n]])) / z);
    }
    naive /= 3.0L;
    const double loss = ops::softmax_cross_entropy(logits, labels).item();
    CHECK(loss >= 0.0);
    CHECK(std::abs(loss - static_cast<double>(naive)) < 1e-10);

    Tensor l = logits.clone();
    l.set_requires_grad(true);
    {
      Tape tape;
      tape.backward(ops::softmax_cross_entropy(l, labels));
    }
    for (std::size_t n = 0; n < 3; ++n) {
      double z = 0.0;
      for (std::size_t k = 0; k < 5; ++k) z += std::exp(l[n * 5 + k]);
      for (std::size_t k = 0; k < 5; ++k) {
        const double expected =
            (std::exp(l[n * 5 + k]) / z - (static_cast<int>(k) == labels[n] ? 1.0 : 0.0)) / 3.0;
        CHECK(std::abs(l.grad()[n * 5 + k] - expected) < 1e-12);
      }
    }
  }
}

TEST_CASE("batch norm examples and two-pass oracle") {
  ops::BatchNormOptions train;
  Tensor gamma = Tensor::full({1}, 1.0), beta = Tensor::zeros({1});
  Tensor rm = Tensor::zeros({1}), rv = Tensor::full({1}, 1.0);
  // mean 5, population variance 4
  Tensor x({1, 4}, {3, 3, 7, 7});
  Tensor y = ops::batch_norm(x, gamma, beta, rm, rv, train);
  double mean = 0.0, var = 0.0;
  for (double v : y.data()) mean += v / 4.0;
  for (double v : y.data()) var += (v - mean) * (v - mean) / 4.0;
  CHECK(std::abs(mean) < 1e-12);
  CHECK(var == doctest::Approx(4.0 / (4.0 + 1e-5)).epsilon(1e-12));
  // running stats move by momentum toward the batch mean / unbiased variance
  CHECK(rm[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rv[0] == doctest::Approx(0.9 + 0.1 * 16.0 / 3.0).epsilon(1e-15));

  ops::BatchNormOptions eval;
  eval.training = false;
  Tensor g2 = Tensor::full({1}, 2.0), b2 = Tensor::full({1}, 3.0);
  Tensor m0 = Tensor::zeros({1}), v1 = Tensor::full({1}, 1.0);
  Tensor e = ops::batch_norm(Tensor({1, 3}, {-1, 0, 2}), g2, b2, m0, v1, eval);
  const double s = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(e[0] == doctest::Approx(3 - 2 * s).epsilon(1e-15));
  CHECK(e[2] == doctest::Approx(3 + 4 * s).epsilon(1e-15));
  CHECK(m0[0] == 0.0);

  SplitMix64 rng(9);
  const std::size_t n = 3, c = 4, t = 6;
  Tensor xb = random_tensor({n, c, t}, rng, -3.0, 5.0);
  Tensor gm = random_tensor({c}, rng, 0.5, 1.5), bt = random_tensor({c}, rng);
  Tensor rmb = Tensor::zeros({c}), rvb = Tensor::full({c}, 1.0);
  Tensor yb = ops::batch_norm(xb, gm, bt, rmb, rvb, train);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < t; ++k) mu += xb[(i * c + ch) * t + k];
    mu /= static_cast<double>(n * t);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < t; ++k) v += std::pow(xb[(i * c + ch) * t + k] - mu, 2);
    v /= static_cast<double>(n * t);
    double ymean = 0.0, yvar = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < t; ++k) {
        const double ref = gm[ch] * (xb[(i * c + ch) * t + k] - mu) / std::sqrt(v + 1e-5) + bt[ch];
        CHECK(std::abs(yb[(i * c + ch) * t + k] - ref) < 1e-10);
        const double z = (yb[(i * c + ch) * t + k] - bt[ch]) / gm[ch];
        ymean += z;
        yvar += z * z;
      }
    }
    ymean /= static_cast<double>(n * t);
    yvar = yvar / static_cast<double>(n * t) - ymean * ymean;
    CHECK(std::abs(ymean) < 1e-8);
    CHECK(std::abs(yvar - v / (v + 1e-5)) < 1e-6);
    CHECK(rvb[ch] >= 0.0);
  }
}

TEST_CASE("batch norm rejects a degenerate batch") {
  ops::BatchNormOptions train;
  Tensor g = Tensor::full({2}, 1.0), b = Tensor::zeros({2});
  Tensor rm = Tensor::zeros({2}), rv = Tensor::full({2}, 1.0);
  CHECK_THROWS_WITH(ops::batch_norm(Tensor::zeros({2, 1}), g, b, rm, rv, train),
                    doctest::Contains("degenerate batch"));
  train.training = false;
  CHECK_NOTHROW(ops::batch_norm(Tensor::zeros({2, 1}), g, b, rm, rv, train));
}

TEST_CASE("every op passes the gradient check at random points") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    GradSuiteOptions opts;
    opts.seed = seed;
    opts.include_networks = false;
    for (const GradSuiteEntry& e : run_gradient_suite(opts)) {
      INFO(e.name << " seed " << seed);
      CHECK(e.max_rel_error < 1e-4);
      CHECK(e.excluded == 0);
    }
  }
}
