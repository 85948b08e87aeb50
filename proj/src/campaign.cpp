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

#include "spalab/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace spalab {

std::vector<std::string> CampaignResult::attack_names() const {
  std::vector<std::string> names;
  for (const auto& r : rows)
    if (std::find(names.begin(), names.end(), r.attack) == names.end()) names.push_back(r.attack);
  return names;
}

int CampaignResult::instance_count() const {
  int n = 0;
  for (const auto& r : rows) n = std::max(n, r.index + 1);
  return n;
}

double CampaignResult::clean_accuracy() const {
  const auto names = attack_names();
  if (names.empty()) return 0.0;
  int total = 0, correct = 0;
  for (const auto& r : rows)
    if (r.attack == names.front()) {
      ++total;
      correct += r.clean_correct ? 1 : 0;
    }
  return total ? static_cast<double>(correct) / total : 0.0;
}

double CampaignResult::robust_accuracy(const std::string& attack) const {
  return 1.0 - attack_success_rate(attack);
}

double CampaignResult::attack_success_rate(const std::string& attack) const {
  int correct = 0, broken = 0;
  for (const auto& r : rows) {
    if (r.attack != attack || !r.clean_correct) continue;
    ++correct;
    broken += r.success ? 1 : 0;
  }
  return correct ? static_cast<double>(broken) / correct : 0.0;
}

std::vector<int64_t> CampaignResult::iteration_histogram(const std::string& attack,
                                                         int bins) const {
  std::vector<int64_t> hist(static_cast<size_t>(bins), 0);
  for (const auto& r : rows) {
    if (r.attack != attack || !r.success) continue;
    int bin = 0;
    int64_t edge = 2;
    while (bin < bins - 1 && r.iterations >= edge) {
      edge *= 2;
      ++bin;
    }
    ++hist[static_cast<size_t>(bin)];
  }
  return hist;
}

CampaignResult run_campaign(const Model& model, const Dataset& data,
                            const std::vector<NamedAttack>& attacks, bool record_time) {
  CampaignResult result;
  const int n = data.n();

  std::vector<char> clean(static_cast<size_t>(n), 0);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i)
    clean[static_cast<size_t>(i)] = model.predict_class(data.image(i)) == data.label(i) ? 1 : 0;

  for (const auto& attack : attacks) {
    std::vector<CampaignRow> rows(static_cast<size_t>(n));
    int64_t violations = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : violations)
    for (int i = 0; i < n; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const AttackOutcome o = attack.run(data.image(i), data.label(i), i);
      const auto t1 = std::chrono::steady_clock::now();
      CampaignRow row;
      row.index = i;
      row.clean_correct = clean[static_cast<size_t>(i)] != 0;
      row.attack = attack.name;
      row.success = o.success;
      row.iterations = o.iterations;
      row.l0 = o.pixel_l0;
      row.group_l0 = o.group_l0;
      row.time_ms =
          record_time
              ? std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
              : 0;
      violations += o.violations;
      rows[static_cast<size_t>(i)] = std::move(row);
    }
    result.violations += violations;
    for (auto& r : rows) result.rows.push_back(std::move(r));
  }
  return result;
}

void write_campaign_csv(const CampaignResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot open " + path);
  out << kCsvVersionTag << "\n";
  out << "index,clean_correct,attack,success,iterations,l0,group_l0,time_ms\n";
  for (const auto& r : result.rows)
    out << r.index << ',' << (r.clean_correct ? 1 : 0) << ',' << r.attack << ','
        << (r.success ? 1 : 0) << ',' << r.iterations << ',' << r.l0 << ',' << r.group_l0 << ','
        << r.time_ms << "\n";
}

CampaignResult read_campaign_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvVersionTag)
    throw std::runtime_error("csv: missing version tag");
  if (!std::getline(in, line) ||
      line != "index,clean_correct,attack,success,iterations,l0,group_l0,time_ms")
    throw std::runtime_error("csv: bad header row");

  CampaignResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    CampaignRow r;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("csv: short row");
      return field;
    };
    r.index = std::stoi(next());
    r.clean_correct = next() == "1";
    r.attack = next();
    r.success = next() == "1";
    r.iterations = std::stoi(next());
    r.l0 = std::stoi(next());
    r.group_l0 = std::stoi(next());
    r.time_ms = std::stoll(next());
    result.rows.push_back(std::move(r));
  }
  return result;
}

TransferResult transfer_eval(const Model& source, const Model& target, const Dataset& data,
                             const NamedAttack& attack) {
  (void)source;  // the attack closure is bound to the source model
  const int n = data.n();
  int target_correct = 0, transfer_broken = 0;
  int source_correct = 0, direct_broken = 0;

#pragma omp parallel for schedule(dynamic) \
    reduction(+ : target_correct, transfer_broken, source_correct, direct_broken)
  for (int i = 0; i < n; ++i) {
    const Tensor x = data.image(i);
    const int y = data.label(i);
    const AttackOutcome o = attack.run(x, y, i);
    if (source.predict_class(x) == y) {
      ++source_correct;
      direct_broken += o.success ? 1 : 0;
    }
    if (target.predict_class(x) == y) {
      ++target_correct;
      Tensor adv = x;
      for (int64_t j = 0; j < adv.size(); ++j) adv[j] += o.delta[j];
      transfer_broken += target.predict_class(adv) != y ? 1 : 0;
    }
  }

  TransferResult res;
  res.evaluated = target_correct;
  res.transfer_asr = target_correct ? static_cast<double>(transfer_broken) / target_correct : 0.0;
  res.direct_asr = source_correct ? static_cast<double>(direct_broken) / source_correct : 0.0;
  return res;
}

}  // namespace spalab
