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

#ifndef SPALAB_SPARSE_RS_HPP
#define SPALAB_SPARSE_RS_HPP

#include <functional>
#include <optional>

#include "spalab/attack_types.hpp"
#include "spalab/group.hpp"

namespace spalab {

/// Query-only random-search attack (score-based): proposals are accepted iff
/// the loss strictly increases. The model is visible only through a logits
/// callback, so the implementation cannot touch gradients.
struct RsConfig {
  int eps = 10;             // pixel budget, or group budget when spec is set
  double eps_inf = 1.0;
  int max_queries = 5000;
  double alpha_init = 0.8;  // initial fraction of elements resampled per proposal
  uint64_t seed = 0;
  std::optional<GroupSpec> spec;  // structured variant: pattern-masked patches
};

/// Piecewise-constant decaying resample fraction: alpha_init, halved once
/// each time progress passes 10%, 25%, 50% and 75% of the budget.
double rs_schedule(int iter, int total, double alpha_init);

using LogitsFn = std::function<Tensor(const Tensor& x)>;  // [h,w,c] -> [classes]

AttackOutcome rs_attack(const LogitsFn& logits_fn, const Tensor& x, int label,
                        const RsConfig& cfg);

}  // namespace spalab

#endif  // SPALAB_SPARSE_RS_HPP
