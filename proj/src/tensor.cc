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

#include "fdnsv/tensor.h"

#include <sstream>
#include <stdexcept>

namespace fdnsv {
namespace {

thread_local Tape* active_tape = nullptr;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor extents must be positive");
  }
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(data.size()) +
                                " does not match shape " +
                                shape_to_string(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() on tensor of shape " +
                                shape_to_string(shape()));
  }
  return impl_->data[0];
}

std::span<double> Tensor::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  impl_->grad.assign(impl_->data.size(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, impl_->data, impl_->requires_grad);
}

Tape::Tape() : previous_(active_tape) { active_tape = this; }

Tape::~Tape() {
  if (active_tape == this) active_tape = previous_;
}

Tape* Tape::current() { return active_tape; }

bool Tape::should_record(std::initializer_list<const Tensor*> inputs) {
  if (active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Tape::record(const Tensor& output, BackwardRule rule) {
  if (spent_) throw std::logic_error("cannot record on a spent tape");
  output.impl()->requires_grad = true;
  entries_.push_back({output.shared(), std::move(rule)});
}

void Tape::backward(const Tensor& loss) {
  if (spent_) throw std::logic_error("backward called twice on the same tape");
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward requires a scalar loss");
  }
  spent_ = true;
  if (!loss.requires_grad()) return;
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not reachable from the loss
    it->rule();
  }
  entries_.clear();
}

NoGradGuard::NoGradGuard() : saved_(active_tape) { active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { active_tape = saved_; }

namespace {
thread_local BranchTrace* active_trace = nullptr;
}  // namespace

BranchTrace::BranchTrace() : hash_(0xcbf29ce484222325ULL), previous_(active_trace) {
  active_trace = this;
}

BranchTrace::~BranchTrace() { active_trace = previous_; }

bool BranchTrace::active() { return active_trace != nullptr; }

void BranchTrace::note(std::uint64_t decision) {
  if (active_trace == nullptr) return;
  std::uint64_t& h = active_trace->hash_;
  h = (h ^ (decision + 0x9e3779b97f4a7c15ULL)) * 0x100000001b3ULL;
}

}  // namespace fdnsv
