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

#ifndef SPALAB_ADV_TRAIN_HPP
#define SPALAB_ADV_TRAIN_HPP

#include <vector>

#include "spalab/model.hpp"
#include "spalab/spgd.hpp"

namespace spalab {

enum class BackwardPolicy { kProjected, kUnprojected, kAlternate, kRandom };
enum class AdvMethod { kSat, kStrades };

/// Adversarial training against sparse perturbations: per batch, the attack
/// runs at a budget of eps_multiplier times the evaluation budget, with a
/// higher reinitialization tolerance and the backward mode drawn per batch
/// according to the policy.
struct AdvTrainConfig {
  TrainConfig base;
  AdvMethod method = AdvMethod::kSat;
  int eval_eps = 10;
  double eps_multiplier = 6.0;
  int attack_iters = 20;
  int attack_tolerance = 10;
  double eps_inf = 1.0;
  BackwardPolicy policy = BackwardPolicy::kRandom;
  double trades_weight = 6.0;  // sTRADES only
  int probe_size = 100;        // instances for the per-epoch robustness probe
  int probe_iters = 20;

  int train_eps() const {
    const int e = static_cast<int>(eval_eps * eps_multiplier + 0.5);
    return e < 1 ? 1 : e;
  }
};

struct AdvEpochStats {
  int epoch = 0;
  double clean_acc = 0.0;
  double train_loss = 0.0;
  double robust_acc_probe = -1.0;
};

/// The backward mode the policy assigns to a given batch (exposed so tests
/// can replay the draw sequence).
BackwardMode policy_mode(const AdvTrainConfig& cfg, int epoch, int batch_index);

/// sPGD inside vanilla adversarial training.
std::vector<AdvEpochStats> sat_train(Model& model, const Dataset& train,
                                     const AdvTrainConfig& cfg, const Dataset* eval = nullptr);

/// sPGD inside TRADES: adversarial examples maximize cross-entropy; the
/// update minimizes clean cross-entropy plus the weighted KL divergence
/// between clean and adversarial predictive distributions. A zero weight is
/// exactly clean training on the same seed stream.
std::vector<AdvEpochStats> strades_train(Model& model, const Dataset& train,
                                         const AdvTrainConfig& cfg,
                                         const Dataset* eval = nullptr);

}  // namespace spalab

#endif  // SPALAB_ADV_TRAIN_HPP
