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

#include "fdnsv/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fdnsv::ops {
namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

std::vector<double>& grad_of(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (!t.defined() || t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " +
                                std::to_string(rank) + " tensor");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
}

// Shared plumbing for ops with one input whose derivative depends only on
// the input value and the output value.
template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df) {
  std::vector<double> out(x.numel());
  auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xs[i]);
  Tensor y(x.shape(), std::move(out));
  if (Tape::should_record({&x})) {
    ImplPtr xi = x.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [xi, yi, df] {
      auto& gx = grad_of(*xi);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        gx[i] += yi->grad[i] * df(xi->data[i], yi->data[i]);
      }
    });
  }
  return y;
}

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
  require_rank(input, 2, "conv1d");
  require_rank(weight, 3, "conv1d");
  require_rank(bias, 1, "conv1d");
  if (stride < 1) throw std::invalid_argument("conv1d: stride must be >= 1");
  const std::size_t c_in = input.dim(0), len = input.dim(1);
  const std::size_t c_out = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw std::invalid_argument("conv1d: channel mismatch (input has " +
                                std::to_string(c_in) + ", weight expects " +
                                std::to_string(weight.dim(1)) + ")");
  }
  if (bias.dim(0) != c_out) {
    throw std::invalid_argument("conv1d: channel mismatch in bias");
  }
  if (len + 2 * padding < k) {
    throw std::invalid_argument("conv1d: input too short");
  }
  const std::size_t out_len = (len + 2 * padding - k) / stride + 1;

  // Valid output range for tap j: 0 <= t*stride + j - padding < len.
  auto valid_range = [=](std::size_t j) {
    std::size_t lo = 0;
    if (j < padding) lo = (padding - j + stride - 1) / stride;
    std::size_t hi = 0;  // exclusive
    if (len + padding > j) {
      hi = std::min(out_len, (len + padding - j - 1) / stride + 1);
    }
    return std::pair{lo, std::max(lo, hi)};
  };

  std::vector<double> out(c_out * out_len);
  const double* in = input.data().data();
  const double* w = weight.data().data();
  const double* b = bias.data().data();
  for (std::size_t co = 0; co < c_out; ++co) {
    double* orow = out.data() + co * out_len;
    std::fill(orow, orow + out_len, b[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* irow = in + ci * len;
      for (std::size_t j = 0; j < k; ++j) {
        const double wv = w[(co * c_in + ci) * k + j];
        auto [lo, hi] = valid_range(j);
        const double* src = irow + (lo * stride + j - padding);
        if (stride == 1) {
          for (std::size_t t = lo; t < hi; ++t) orow[t] += wv * src[t - lo];
        } else {
          for (std::size_t t = lo; t < hi; ++t) {
            orow[t] += wv * src[(t - lo) * stride];
          }
        }
      }
    }
  }
  Tensor y({c_out, out_len}, std::move(out));

  if (Tape::should_record({&input, &weight, &bias})) {
    ImplPtr xi = input.shared(), wi = weight.shared(), bi = bias.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [=] {
      const double* gy = yi->grad.data();
      if (bi->requires_grad) {
        auto& gb = grad_of(*bi);
        for (std::size_t co = 0; co < c_out; ++co) {
          double s = 0.0;
          for (std::size_t t = 0; t < out_len; ++t) s += gy[co * out_len + t];
          gb[co] += s;
        }
      }
      const bool need_w = wi->requires_grad, need_x = xi->requires_grad;
      double* gw = need_w ? grad_of(*wi).data() : nullptr;
      double* gx = need_x ? grad_of(*xi).data() : nullptr;
      for (std::size_t co = 0; co < c_out; ++co) {
        const double* grow = gy + co * out_len;
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          const std::size_t base = ci * len;
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t widx = (co * c_in + ci) * k + j;
            auto [lo, hi] = valid_range(j);
            const std::size_t off = base + lo * stride + j - padding;
            if (need_w) {
              double s = 0.0;
              for (std::size_t t = lo; t < hi; ++t) {
                s += grow[t] * xi->data[off + (t - lo) * stride];
              }
              gw[widx] += s;
            }
            if (need_x) {
              const double wv = wi->data[widx];
              for (std::size_t t = lo; t < hi; ++t) {
                gx[off + (t - lo) * stride] += wv * grow[t];
              }
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor maxpool1d(const Tensor& input, std::size_t window) {
  require_rank(input, 2, "maxpool1d");
  if (window < 1) throw std::invalid_argument("maxpool1d: window must be >= 1");
  const std::size_t c = input.dim(0), len = input.dim(1);
  if (len < window) throw std::invalid_argument("maxpool1d: input too short");
  const std::size_t out_len = len / window;
  std::vector<double> out(c * out_len);
  std::vector<std::size_t> argmax(c * out_len);
  auto x = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = ch * len + t * window;
      for (std::size_t j = 1; j < window; ++j) {
        if (x[ch * len + t * window + j] > x[best]) best = ch * len + t * window + j;
      }
      out[ch * out_len + t] = x[best];
      BranchTrace::note(best - (ch * len + t * window));
      argmax[ch * out_len + t] = best;
    }
  }
  Tensor y({c, out_len}, std::move(out));
  if (Tape::should_record({&input})) {
    ImplPtr xi = input.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [xi, yi, argmax = std::move(argmax)] {
      auto& gx = grad_of(*xi);
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += yi->grad[i];
    });
  }
  return y;
}

Tensor global_avg_pool(const Tensor& input) {
  require_rank(input, 2, "global_avg_pool");
  const std::size_t c = input.dim(0), len = input.dim(1);
  std::vector<double> out(c);
  auto x = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += x[ch * len + t];
    out[ch] = s / static_cast<double>(len);
  }
  Tensor y({c, 1}, std::move(out));
  if (Tape::should_record({&input})) {
    ImplPtr xi = input.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [xi, yi, c, len] {
      auto& gx = grad_of(*xi);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double g = yi->grad[ch] / static_cast<double>(len);
        for (std::size_t t = 0; t < len; ++t) gx[ch * len + t] += g;
      }
    });
  }
  return y;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (BranchTrace::active()) {
    for (double v : x.data()) BranchTrace::note(v >= 0.0);
  }
  return unary(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor one_minus(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

namespace {

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind,
              const char* name) {
  require_same_shape(a, b, name);
  auto as = a.data(), bs = b.data();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (kind) {
      case BinaryKind::kAdd: out[i] = as[i] + bs[i]; break;
      case BinaryKind::kSub: out[i] = as[i] - bs[i]; break;
      case BinaryKind::kMul: out[i] = as[i] * bs[i]; break;
    }
  }
  Tensor y(a.shape(), std::move(out));
  if (Tape::should_record({&a, &b})) {
    ImplPtr ai = a.shared(), bi = b.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [ai, bi, yi, kind] {
      const auto& gy = yi->grad;
      if (ai->requires_grad) {
        auto& ga = grad_of(*ai);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          ga[i] += kind == BinaryKind::kMul ? gy[i] * bi->data[i] : gy[i];
        }
      }
      if (bi->requires_grad) {
        auto& gb = grad_of(*bi);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          switch (kind) {
            case BinaryKind::kAdd: gb[i] += gy[i]; break;
            case BinaryKind::kSub: gb[i] -= gy[i]; break;
            case BinaryKind::kMul: gb[i] += gy[i] * ai->data[i]; break;
          }
        }
      }
    });
  }
  return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, BinaryKind::kAdd, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, BinaryKind::kSub, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, BinaryKind::kMul, "mul");
}

Tensor channel_scale(const Tensor& f, const Tensor& w) {
  require_rank(f, 2, "channel_scale");
  const std::size_t c = f.dim(0), len = f.dim(1);
  if (w.numel() != c || (w.rank() == 2 && w.dim(1) != 1) || w.rank() > 2) {
    throw std::invalid_argument("channel_scale: weights of shape " +
                                shape_to_string(w.shape()) +
                                " cannot broadcast over " +
                                shape_to_string(f.shape()));
  }
  auto fs = f.data(), ws = w.data();
  std::vector<double> out(f.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t t = 0; t < len; ++t) {
      out[ch * len + t] = fs[ch * len + t] * ws[ch];
    }
  }
  Tensor y(f.shape(), std::move(out));
  if (Tape::should_record({&f, &w})) {
    ImplPtr fi = f.shared(), wi = w.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [fi, wi, yi, c, len] {
      const auto& gy = yi->grad;
      if (fi->requires_grad) {
        auto& gf = grad_of(*fi);
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t t = 0; t < len; ++t) {
            gf[ch * len + t] += gy[ch * len + t] * wi->data[ch];
          }
        }
      }
      if (wi->requires_grad) {
        auto& gw = grad_of(*wi);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double s = 0.0;
          for (std::size_t t = 0; t < len; ++t) {
            s += gy[ch * len + t] * fi->data[ch * len + t];
          }
          gw[ch] += s;
        }
      }
    });
  }
  return y;
}

Tensor slice_time(const Tensor& x, std::size_t begin, std::size_t length) {
  require_rank(x, 2, "slice_time");
  const std::size_t c = x.dim(0), len = x.dim(1);
  if (length < 1 || begin + length > len) {
    throw std::invalid_argument("slice_time: window out of range");
  }
  auto xs = x.data();
  std::vector<double> out(c * length);
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::copy_n(xs.begin() + ch * len + begin, length, out.begin() + ch * length);
  }
  Tensor y({c, length}, std::move(out));
  if (Tape::should_record({&x})) {
    ImplPtr xi = x.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [=] {
      auto& gx = grad_of(*xi);
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t t = 0; t < length; ++t) {
          gx[ch * len + begin + t] += yi->grad[ch * length + t];
        }
      }
    });
  }
  return y;
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  auto xs = x.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xs[i * c + j];
  }
  Tensor y({c, r}, std::move(out));
  if (Tape::should_record({&x})) {
    ImplPtr xi = x.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [=] {
      auto& gx = grad_of(*xi);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += yi->grad[j * r + i];
      }
    });
  }
  return y;
}

Tensor row(const Tensor& x, std::size_t i) {
  require_rank(x, 2, "row");
  const std::size_t cols = x.dim(1);
  if (i >= x.dim(0)) throw std::invalid_argument("row: index out of range");
  auto xs = x.data();
  std::vector<double> out(xs.begin() + i * cols, xs.begin() + (i + 1) * cols);
  Tensor y({cols}, std::move(out));
  if (Tape::should_record({&x})) {
    ImplPtr xi = x.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [=] {
      auto& gx = grad_of(*xi);
      for (std::size_t j = 0; j < cols; ++j) gx[i * cols + j] += yi->grad[j];
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " +
                                shape_to_string(x.shape()) + " as " +
                                shape_to_string(shape));
  }
  Tensor y(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (Tape::should_record({&x})) {
    ImplPtr xi = x.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [xi, yi] {
      auto& gx = grad_of(*xi);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += yi->grad[i];
    });
  }
  return y;
}

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack: no tensors");
  const Shape& inner = parts[0].shape();
  const std::size_t block = parts[0].numel();
  std::vector<double> out;
  out.reserve(block * parts.size());
  for (const Tensor& p : parts) {
    if (p.shape() != inner) require_same_shape(parts[0], p, "stack");
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor y(std::move(shape), std::move(out));
  bool record = false;
  for (const Tensor& p : parts) record = record || Tape::should_record({&p});
  if (record) {
    std::vector<ImplPtr> inputs;
    for (const Tensor& p : parts) inputs.push_back(p.shared());
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [inputs = std::move(inputs), yi, block] {
      for (std::size_t n = 0; n < inputs.size(); ++n) {
        if (!inputs[n]->requires_grad) continue;
        auto& g = grad_of(*inputs[n]);
        for (std::size_t i = 0; i < block; ++i) g[i] += yi->grad[n * block + i];
      }
    });
  }
  return y;
}

Tensor select(const Tensor& x, std::size_t i) {
  if (!x.defined() || x.rank() < 2) throw std::invalid_argument("select: rank < 2");
  if (i >= x.dim(0)) throw std::invalid_argument("select: index out of range");
  Shape shape(x.shape().begin() + 1, x.shape().end());
  const std::size_t block = shape_numel(shape);
  auto xs = x.data();
  std::vector<double> out(xs.begin() + i * block, xs.begin() + (i + 1) * block);
  Tensor y(std::move(shape), std::move(out));
  if (Tape::should_record({&x})) {
    ImplPtr xi = x.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [=] {
      auto& gx = grad_of(*xi);
      for (std::size_t j = 0; j < block; ++j) gx[i * block + j] += yi->grad[j];
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor y = Tensor::scalar(s);
  if (Tape::should_record({&x})) {
    ImplPtr xi = x.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [xi, yi] {
      auto& gx = grad_of(*xi);
      for (double& g : gx) g += yi->grad[0];
    });
  }
  return y;
}

Tensor linear(const Tensor& weight, const Tensor& x, const Tensor& bias) {
  require_rank(weight, 2, "linear");
  require_rank(x, 1, "linear");
  require_rank(bias, 1, "linear");
  const std::size_t out_dim = weight.dim(0), in_dim = weight.dim(1);
  if (x.dim(0) != in_dim || bias.dim(0) != out_dim) {
    throw std::invalid_argument("linear: shape mismatch, weight " +
                                shape_to_string(weight.shape()) + ", input " +
                                shape_to_string(x.shape()));
  }
  const double* w = weight.data().data();
  const double* xs = x.data().data();
  std::vector<double> out(out_dim);
  for (std::size_t o = 0; o < out_dim; ++o) {
    double s = bias[o];
    const double* wr = w + o * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) s += wr[i] * xs[i];
    out[o] = s;
  }
  Tensor y({out_dim}, std::move(out));
  if (Tape::should_record({&weight, &x, &bias})) {
    ImplPtr wi = weight.shared(), xi = x.shared(), bi = bias.shared();
    TensorImpl* yi = y.impl();
    Tape::current()->record(y, [=] {
      const auto& gy = yi->grad;
      if (bi->requires_grad) {
        auto& gb = grad_of(*bi);
        for (std::size_t o = 0; o < out_dim; ++o) gb[o] += gy[o];
      }
      if (wi->requires_grad) {
        auto& gw = grad_of(*wi);
        for (std::size_t o = 0; o < out_dim; ++o) {
          double* gr = gw.data() + o * in_dim;
          for (std::size_t i = 0; i < in_dim; ++i) gr[i] += gy[o] * xi->data[i];
        }
      }
      if (xi->requires_grad) {
        auto& gx = grad_of(*xi);
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double* wr = wi->data.data() + o * in_dim;
          for (std::size_t i = 0; i < in_dim; ++i) gx[i] += gy[o] * wr[i];
        }
      }
    });
  }
  return y;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw std::invalid_argument("softmax_cross_entropy: need one label per row");
  }
  auto z = logits.data();
  std::vector<double> probs(n * k);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      throw std::invalid_argument("softmax_cross_entropy: label " +
                                  std::to_string(labels[r]) +
                                  " out of range [0, " + std::to_string(k) + ")");
    }
    const double* zr = z.data() + r * k;
    const double zmax = *std::max_element(zr, zr + k);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      probs[r * k + j] = std::exp(zr[j] - zmax);
      denom += probs[r * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[r * k + j] /= denom;
    loss += -(zr[labels[r]] - zmax - std::log(denom));
  }
  Tensor y = Tensor::scalar(loss / static_cast<double>(n));
  if (Tape::should_record({&logits})) {
    ImplPtr li = logits.shared();
    TensorImpl* yi = y.impl();
    std::vector<int> lab(labels.begin(), labels.end());
    Tape::current()->record(y, [li, yi, n, k, lab = std::move(lab),
                                probs = std::move(probs)] {
      auto& gl = grad_of(*li);
      const double g = yi->grad[0] / static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
          const double onehot = static_cast<int>(j) == lab[r] ? 1.0 : 0.0;
          gl[r * k + j] += g * (probs[r * k + j] - onehot);
        }
      }
    });
  }
  return y;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var,
                  const BatchNormOptions& options) {
  if (!x.defined() || (x.rank() != 2 && x.rank() != 3)) {
    throw std::invalid_argument("batch_norm: expected (C x T) or (N x C x T)");
  }
  const std::size_t batch = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t c = x.rank() == 3 ? x.dim(1) : x.dim(0);
  const std::size_t len = x.shape().back();
  if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c ||
      running_var.numel() != c) {
    throw std::invalid_argument("batch_norm: channel mismatch");
  }
  const std::size_t m = batch * len;
  if (options.training && m < 2) {
    throw std::invalid_argument("batch_norm: degenerate batch (N*T < 2)");
  }
  auto idx = [=](std::size_t n, std::size_t ch, std::size_t t) {
    return (n * c + ch) * len + t;
  };
  auto xs = x.data();
  std::vector<double> mean(c), inv_std(c);
  if (options.training) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t t = 0; t < len; ++t) s += xs[idx(n, ch, t)];
      }
      const double mu = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t t = 0; t < len; ++t) {
          const double d = xs[idx(n, ch, t)] - mu;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(m);
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + options.eps);
      if (options.update_running_stats) {
        const double unbiased = ss / static_cast<double>(m - 1);
        running_mean[ch] =
            (1.0 - options.momentum) * running_mean[ch] + options.momentum * mu;
        running_var[ch] =
            (1.0 - options.momentum) * running_var[ch] + options.momentum * unbiased;
      }
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(running_var[ch] + options.eps);
    }
  }

  std::vector<double> xhat(x.numel()), out(x.numel());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t i = idx(n, ch, t);
        xhat[i] = (xs[i] - mean[ch]) * inv_std[ch];
        out[i] = gamma[ch] * xhat[i] + beta[ch];
      }
    }
  }
  Tensor y(x.shape(), std::move(out));

  if (Tape::should_record({&x, &gamma, &beta})) {
    ImplPtr xi = x.shared(), gi = gamma.shared(), bi = beta.shared();
    TensorImpl* yi = y.impl();
    const bool training = options.training;
    Tape::current()->record(y, [=, xhat = std::move(xhat),
                                inv_std = std::move(inv_std)] {
      const auto& gy = yi->grad;
      std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t i = idx(n, ch, t);
            sum_g[ch] += gy[i];
            sum_gx[ch] += gy[i] * xhat[i];
          }
        }
      }
      if (gi->requires_grad) {
        auto& gg = grad_of(*gi);
        for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += sum_gx[ch];
      }
      if (bi->requires_grad) {
        auto& gb = grad_of(*bi);
        for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += sum_g[ch];
      }
      if (!xi->requires_grad) return;
      auto& gx = grad_of(*xi);
      const double md = static_cast<double>(m);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double k = gi->data[ch] * inv_std[ch];
          for (std::size_t t = 0; t < len; ++t) {
            const std::size_t i = idx(n, ch, t);
            if (training) {
              gx[i] += k * (gy[i] - sum_g[ch] / md - xhat[i] * sum_gx[ch] / md);
            } else {
              gx[i] += k * gy[i];
            }
          }
        }
      }
    });
  }
  return y;
}

}  // namespace fdnsv::ops
