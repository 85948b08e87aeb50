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

#ifndef SPALAB_CAMPAIGN_HPP
#define SPALAB_CAMPAIGN_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spalab/attack_types.hpp"
#include "spalab/dataset.hpp"
#include "spalab/model.hpp"

namespace spalab {

constexpr const char* kCsvVersionTag = "#spalab-csv-v1";

struct CampaignRow {
  int index = 0;
  bool clean_correct = false;
  std::string attack;
  bool success = false;
  int iterations = 0;
  int l0 = 0;
  int group_l0 = -1;
  int64_t time_ms = 0;
};

/// Per-instance rows plus aggregates that are always recomputed from the
/// rows, so they cannot drift.
struct CampaignResult {
  std::vector<CampaignRow> rows;
  int64_t violations = 0;  // summed feasibility violations across all runs

  std::vector<std::string> attack_names() const;
  int instance_count() const;
  double clean_accuracy() const;
  /// 1 - (successes on clean-correct instances) / (clean-correct count).
  double robust_accuracy(const std::string& attack) const;
  /// successes on clean-correct instances / clean-correct count.
  double attack_success_rate(const std::string& attack) const;
  /// Counts of iterations-to-success in log2 bins [1,2),[2,4),...
  std::vector<int64_t> iteration_histogram(const std::string& attack, int bins = 16) const;
};

using InstanceAttackFn = std::function<AttackOutcome(const Tensor& x, int label, int instance)>;

struct NamedAttack {
  std::string name;
  InstanceAttackFn run;
};

/// Full grid over (attacks x instances); instances run in parallel, rows are
/// stored in instance-index order per attack. With record_time false the
/// time_ms column is written as 0 so reruns are byte-identical.
CampaignResult run_campaign(const Model& model, const Dataset& data,
                            const std::vector<NamedAttack>& attacks, bool record_time = true);

void write_campaign_csv(const CampaignResult& result, const std::string& path);
CampaignResult read_campaign_csv(const std::string& path);

struct TransferResult {
  double transfer_asr = 0.0;  // target fooled on x+delta, over target-clean-correct
  double direct_asr = 0.0;    // attack success on the source, over source-clean-correct
  int evaluated = 0;
};

/// Perturbations are generated by `attack` (bound to the source model) and
/// evaluated on the target.
TransferResult transfer_eval(const Model& source, const Model& target, const Dataset& data,
                             const NamedAttack& attack);

}  // namespace spalab

#endif  // SPALAB_CAMPAIGN_HPP
