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

#include "spalab/attack_types.hpp"

#include <algorithm>
#include <cmath>

namespace spalab {

int pixel_l0(const Tensor& delta) {
  const int h = delta.dim(0), w = delta.dim(1), c = delta.dim(2);
  int count = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      bool hit = false;
      for (int ch = 0; ch < c && !hit; ++ch) hit = delta.at3(i, j, ch) != 0.0;
      count += hit ? 1 : 0;
    }
  return count;
}

double clip_magnitude(double x, double p, double eps_inf) {
  double d = std::min(std::max(p, std::max(-x, -eps_inf)), std::min(1.0 - x, eps_inf));
  // One-ulp snaps: the clamp above can still land the sum just outside the
  // image box because the bound 1-x is itself rounded.
  while (x + d > 1.0) d = std::nextafter(d, -2.0);
  while (x + d < 0.0) d = std::nextafter(d, 2.0);
  return d;
}

uint64_t tensor_digest(const Tensor& t, uint64_t h) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  const size_t n = static_cast<size_t>(t.size()) * sizeof(double);
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace spalab
