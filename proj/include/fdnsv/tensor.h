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

#ifndef FDNSV_TENSOR_H_
#define FDNSV_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fdnsv {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulated into
  bool requires_grad = false;
};

/// Shared handle to a dense row-major array of doubles.
///
/// Copies of a Tensor alias the same storage; use clone() for a deep copy.
/// Gradients live next to the data and are filled by Tape::backward().
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double& operator[](std::size_t i) { return impl_->data[i]; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Allocates a zero gradient on first access.
  std::span<double> grad();
  std::span<const double> grad() const { return impl_->grad; }
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); }

  Tensor clone() const;
  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Define-by-run record of differentiable operations.
///
/// Constructing a Tape installs it as the recording tape of the calling
/// thread; destruction restores the previously active one. Ops executed
/// while no tape is active record nothing (inference mode).
class Tape {
 public:
  using BackwardRule = std::function<void()>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  // True when an op with these inputs must be recorded.
  static bool should_record(std::initializer_list<const Tensor*> inputs);

  void record(const Tensor& output, BackwardRule rule);

  // Seeds d(loss)/d(loss) = 1 and runs every rule in reverse order.
  // Throws on a non-scalar loss or on a second call.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  bool spent() const { return spent_; }

 private:
  struct Entry {
    std::shared_ptr<TensorImpl> output;
    BackwardRule rule;
  };
  std::vector<Entry> entries_;
  Tape* previous_ = nullptr;
  bool spent_ = false;
};

/// Suspends recording on the calling thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

/// Fingerprint of the branch decisions taken by piecewise ops (leaky-relu
/// sign, max-pool argmax) on the calling thread while the trace is alive.
/// Two evaluations with equal signatures ran on the same linear piece.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  std::uint64_t signature() const { return hash_; }

  static bool active();
  static void note(std::uint64_t decision);

 private:
  std::uint64_t hash_;
  BranchTrace* previous_;
};

}  // namespace fdnsv

#endif  // FDNSV_TENSOR_H_
