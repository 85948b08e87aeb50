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

#include "spalab/saa.hpp"

#include "spalab/rng.hpp"
#include "spalab/sparse_rs.hpp"
#include "spalab/spgd_structured.hpp"

namespace spalab {

const std::array<const char*, kSaaStages> kSaaStageNames = {"spgd_unproj", "spgd_proj",
                                                            "sparse_rs"};

double CascadeReport::clean_accuracy() const {
  if (rows.empty()) return 0.0;
  int correct = 0;
  for (const auto& r : rows) correct += r.clean_correct ? 1 : 0;
  return static_cast<double>(correct) / rows.size();
}

double CascadeReport::robust_accuracy() const {
  if (rows.empty()) return 0.0;
  return static_cast<double>(rows.size() - broken_count()) / rows.size();
}

int CascadeReport::broken_count() const {
  int broken = 0;
  for (const auto& r : rows) broken += r.broken_by >= 0 ? 1 : 0;
  return broken;
}

uint64_t saa_stage_seed(uint64_t seed, int stage, int instance) {
  return mix_seed({seed, 0x734141ULL, static_cast<uint64_t>(stage),
                   static_cast<uint64_t>(instance)});
}

AttackOutcome saa_run_stage(const Model& model, const Tensor& x, int label, const SaaConfig& cfg,
                            int stage, int instance) {
  const uint64_t seed = saa_stage_seed(cfg.seed, stage, instance);
  if (stage == 0 || stage == 1) {
    SpgdConfig sc;
    sc.eps = cfg.eps;
    sc.eps_inf = cfg.eps_inf;
    sc.iters = cfg.spgd_iters;
    sc.mode = stage == 0 ? BackwardMode::kUnprojected : BackwardMode::kProjected;
    sc.seed = seed;
    return cfg.spec ? spgd_structured_attack(model, x, label, *cfg.spec, sc)
                    : spgd_attack(model, x, label, sc);
  }
  RsConfig rc;
  rc.eps = cfg.eps;
  rc.eps_inf = cfg.eps_inf;
  rc.max_queries = cfg.rs_queries;
  rc.seed = seed;
  rc.spec = cfg.spec;
  const LogitsFn fn = [&model](const Tensor& adv) { return model.logits(adv); };
  return rs_attack(fn, x, label, rc);
}

CascadeReport saa(const Model& model, const Dataset& batch, const SaaConfig& cfg) {
  CascadeReport report;
  report.rows.resize(static_cast<size_t>(batch.n()));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < batch.n(); ++i) {
    const Tensor x = batch.image(i);
    const int y = batch.label(i);
    CascadeReport::Row row;
    row.index = i;
    row.clean_correct = model.predict_class(x) == y;
    for (int stage = 0; stage < kSaaStages && row.broken_by < 0; ++stage) {
      const AttackOutcome o = saa_run_stage(model, x, y, cfg, stage, i);
      row.iterations[static_cast<size_t>(stage)] = o.iterations;
      row.violations += o.violations;
      if (o.success) {
        row.broken_by = stage;
        row.pixel_l0 = o.pixel_l0;
        row.group_l0 = o.group_l0;
      }
    }
    report.rows[static_cast<size_t>(i)] = row;
  }
  return report;
}

}  // namespace spalab
