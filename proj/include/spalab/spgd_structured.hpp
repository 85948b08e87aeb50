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

#ifndef SPALAB_SPGD_STRUCTURED_HPP
#define SPALAB_SPGD_STRUCTURED_HPP

#include <vector>

#include "spalab/group.hpp"
#include "spalab/spgd.hpp"

namespace spalab {

/// Sparse-PGD over a group-sparsity budget: the optimized mask lives on the
/// group grid and is expanded through the pattern kernel; cfg.eps counts
/// groups. With a 1x1 kernel this reproduces spgd_attack bit-exactly under
/// matched seeds and step sizes. Negative alpha/beta/tolerance resolve to
/// the structured defaults (0.0125*eps_inf, 0.0125*sqrt(h*w), 50).
AttackOutcome spgd_structured_attack(const Model& model, const Tensor& x, int label,
                                     const GroupSpec& spec, const SpgdConfig& cfg);

/// One row of the group-l0 ratio simulation.
struct RatioRow {
  int eps = 0;
  int samples = 0;
  double mean_ratio = 0.0;
  double std_ratio = 0.0;
  bool skipped = false;  // exact cover exceeded the cap at this sparsity
};

/// For each eps in [eps_min, eps_max], draws random group masks with
/// ||v||0 = eps, expands them, and reports mean/std of the ratio between the
/// exact group l0 norm and its approximation.
std::vector<RatioRow> ratio_simulation(const GroupSpec& spec, int eps_min, int eps_max,
                                       int n_samples, uint64_t seed, int cap = 8);

}  // namespace spalab

#endif  // SPALAB_SPGD_STRUCTURED_HPP
