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

#ifndef SPALAB_ATTACK_TYPES_HPP
#define SPALAB_ATTACK_TYPES_HPP

#include <cstdint>
#include <vector>

#include "spalab/tensor.hpp"

namespace spalab {

enum class BackwardMode { kProjected, kUnprojected };

struct AttackOutcome {
  bool success = false;
  int iterations = 0;     // model evaluations consumed (queries, for RS)
  Tensor delta;           // [h,w,c]
  int pixel_l0 = 0;       // pixels with any perturbed channel
  int group_l0 = -1;      // approximated group l0 of delta, -1 when unstructured
  int group_mask_l0 = -1; // ||v||0 for structured attacks
  int reinits = 0;
  int64_t violations = 0; // feasibility violations observed per iteration (must stay 0)
  double final_loss = 0.0;
  Tensor grid_mask;       // structured attacks: final binary group mask v
  std::vector<uint64_t> trace;          // per-iteration state digests when requested
  std::vector<double> best_loss_curve;  // RS: best-so-far loss after each query
};

/// Number of pixels with any non-zero channel.
int pixel_l0(const Tensor& delta);

/// Projects a magnitude value onto the budget at pixel value x: the result
/// satisfies, exactly in floating point, |p| <= eps_inf and 0 <= x + p <= 1.
double clip_magnitude(double x, double p, double eps_inf);

/// FNV-1a over raw tensor bytes, used for state digests.
uint64_t tensor_digest(const Tensor& t, uint64_t h = 1469598103934665603ULL);

}  // namespace spalab

#endif  // SPALAB_ATTACK_TYPES_HPP
