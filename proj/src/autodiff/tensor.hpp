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

#ifndef MIXCTC_AUTODIFF_TENSOR_HPP
#define MIXCTC_AUTODIFF_TENSOR_HPP

#include <cstdint>
#include <memory>
#include <numeric>
#include <vector>

#include "common/errors.hpp"

namespace mixctc::autodiff {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense n-dimensional array of doubles in row-major layout, with an optional
// same-shape gradient buffer. 4-D tensors are (batch, depth, height, width),
// 3-D sequence tensors are (batch, time, depth).
class Tensor {
 public:
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  // False for tensors produced by a tape operation. Leaf gradients accumulate
  // across backward calls; non-leaf gradients are scratch per backward pass.
  bool is_leaf = true;

  static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
  static TensorPtr full(std::vector<int> shape, double value, bool requires_grad = false);
  static TensorPtr from(std::vector<int> shape, std::vector<double> data,
                        bool requires_grad = false);

  int64_t size() const { return static_cast<int64_t>(values.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[i]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  // Allocates the gradient buffer (zero-filled) if not yet present.
  void ensure_grad();
  void zero_grad();

  double scalar() const {
    if (size() != 1) throw NotScalar("tensor is not a scalar");
    return values[0];
  }

  static int64_t element_count(const std::vector<int>& shape);
};

}  // namespace mixctc::autodiff

#endif  // MIXCTC_AUTODIFF_TENSOR_HPP
