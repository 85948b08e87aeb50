// Copyright 2026 The spalab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPALAB_TESTS_SUPPORT_HPP
#define SPALAB_TESTS_SUPPORT_HPP

#include <cmath>

#include "spalab/model.hpp"
#include "spalab/rng.hpp"
#include "spalab/tensor.hpp"

namespace spalab::testing {

inline Tensor random_tensor(std::vector<int> shape, RngStream& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (int64_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

inline double dot_flat(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// Tiny CNN on small inputs, softplus activations (smooth for grad checks).
inline Model tiny_cnn(int h, int w, int c, int classes, uint64_t seed) {
  return Model::reference_cnn(c, classes, seed, h, w, 16);
}

/// A model whose logits are constant (all parameters zero): input gradients
/// vanish identically.
inline Model zero_model(int h, int w, int c, int classes) {
  Model m = Model::reference_cnn(c, classes, 0, h, w, 16);
  for (auto& p : m.params())
    for (int64_t i = 0; i < p.value.size(); ++i) p.value[i] = 0.0;
  return m;
}

}  // namespace spalab::testing

#endif  // SPALAB_TESTS_SUPPORT_HPP
