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

#ifndef SPALAB_SAA_HPP
#define SPALAB_SAA_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "spalab/dataset.hpp"
#include "spalab/group.hpp"
#include "spalab/model.hpp"
#include "spalab/spgd.hpp"

namespace spalab {

/// Parameter-free cascade: sPGD with the unprojected gradient, sPGD with the
/// sparse gradient, then the black-box random search. An instance is handed
/// to a stage only if every earlier stage failed on it; all stages share the
/// same budget.
struct SaaConfig {
  int eps = 10;
  double eps_inf = 1.0;
  std::optional<GroupSpec> spec;
  int spgd_iters = 1000;  // per sPGD stage; the reference setup uses 10000
  int rs_queries = 2000;
  uint64_t seed = 0;
};

constexpr int kSaaStages = 3;
extern const std::array<const char*, kSaaStages> kSaaStageNames;

struct CascadeReport {
  struct Row {
    int index = 0;
    bool clean_correct = false;
    int broken_by = -1;  // stage index, -1 if robust
    std::array<int, kSaaStages> iterations{};  // per-stage evaluations consumed
    int pixel_l0 = 0;
    int group_l0 = -1;
    int64_t violations = 0;
  };
  std::vector<Row> rows;

  double clean_accuracy() const;
  /// Fraction of instances no stage broke.
  double robust_accuracy() const;
  int broken_count() const;
};

/// Per-instance seed for a cascade stage; the stand-alone stage run with this
/// seed reproduces the in-cascade behavior exactly.
uint64_t saa_stage_seed(uint64_t seed, int stage, int instance);

/// Runs a single cascade stage on one instance (used by saa itself and by
/// the union-property checks).
AttackOutcome saa_run_stage(const Model& model, const Tensor& x, int label, const SaaConfig& cfg,
                            int stage, int instance);

CascadeReport saa(const Model& model, const Dataset& batch, const SaaConfig& cfg);

}  // namespace spalab

#endif  // SPALAB_SAA_HPP
