// Copyright 2026 The mixctc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "autodiff/tensor.hpp"

#include <algorithm>

namespace mixctc::autodiff {

int64_t Tensor::element_count(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeMismatch("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  int64_t n = element_count(shape);
  t->shape = std::move(shape);
  t->values.assign(static_cast<size_t>(n), 0.0);
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

TensorPtr Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  std::fill(t->values.begin(), t->values.end(), value);
  return t;
}

TensorPtr Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  int64_t n = element_count(shape);
  if (n != static_cast<int64_t>(data.size())) {
    throw ShapeMismatch("data length does not match shape");
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(data);
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

void Tensor::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

}  // namespace mixctc::autodiff
