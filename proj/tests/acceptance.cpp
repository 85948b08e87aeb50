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

// End-to-end acceptance suite. Each test case covers one criterion and
// prints a single PASS/FAIL line; thresholds are pinned in code.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>

#include "spalab/adv_train.hpp"
#include "spalab/campaign.hpp"
#include "spalab/dataset.hpp"
#include "spalab/graph.hpp"
#include "spalab/kernels.hpp"
#include "spalab/model.hpp"
#include "spalab/rng.hpp"
#include "spalab/saa.hpp"
#include "spalab/sparse_rs.hpp"
#include "spalab/spgd.hpp"
#include "spalab/spgd_structured.hpp"
#include "support.hpp"

using namespace spalab;
using namespace spalab::testing;

namespace {

std::atomic<int64_t> g_total_violations{0};

void verdict(int id, const char* name, bool pass) {
  std::printf("ACCEPTANCE %02d %-28s %s\n", id, name, pass ? "PASS" : "FAIL");
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Desk substrate: the synthetic task, an undefended reference CNN, and the
// evaluation budget shared by the end-to-end criteria.

struct Desk {
  SyntheticSpec spec;
  Dataset train;
  Dataset test;
  Model undefended;
  int eval_eps = 10;

  Desk() : undefended(Model::reference_cnn(3, 4, 1, 24, 24)) {
    spec.n = 1000;
    spec.h = 24;
    spec.w = 24;
    spec.amplitude = 0.12;
    spec.noise = 0.10;
    train = make_synthetic(spec, 2024, "train");
    SyntheticSpec tspec = spec;
    tspec.n = 300;
    test = make_synthetic(tspec, 2024, "test");

    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 128;
    cfg.lr = 0.05;
    cfg.seed = 9;
    sgd_train(undefended, train, cfg);
  }
};

Desk& desk() {
  static Desk d;
  return d;
}

double robust_accuracy_spgd(const Model& m, const Dataset& data, int eps, int iters,
                            BackwardMode mode, uint64_t seed) {
  int broken = 0;
  int64_t violations = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : broken, violations)
  for (int i = 0; i < data.n(); ++i) {
    SpgdConfig cfg;
    cfg.eps = eps;
    cfg.iters = iters;
    cfg.mode = mode;
    cfg.seed = mix_seed({seed, static_cast<uint64_t>(i)});
    const AttackOutcome o = spgd_attack(m, data.image(i), data.label(i), cfg);
    broken += o.success ? 1 : 0;
    violations += o.violations;
  }
  g_total_violations += violations;
  return 1.0 - static_cast<double>(broken) / data.n();
}

}  // namespace

TEST_CASE("criterion 1: gradient correctness on random smooth networks") {
  RngStream rng(101);
  double worst = 0.0;
  int passes = 0;
  for (int trial = 0; trial < 50; ++trial) {
    GradCheckReport rep;
    if (trial % 2 == 0) {
      const int h = 2 + rng.uniform_int(3), w = 2 + rng.uniform_int(3),
                c = 1 + rng.uniform_int(3);
      const int classes = 2 + rng.uniform_int(4);
      Model m = Model::mlp(h * w * c, 4 + rng.uniform_int(12), classes,
                           rng.bits());
      Tensor x = random_tensor({1, h, w, c}, rng, 0.0, 1.0);
      const int label = rng.uniform_int(classes);
      rep = grad_check(
          [&](Graph& g, Graph::NodeId xid) {
            auto bound = m.bind(g);
            return g.cross_entropy(bound.forward(xid), {label});
          },
          x, 1e-4);
    } else {
      const int c = 1 + rng.uniform_int(3);
      const int classes = 2 + rng.uniform_int(4);
      Model m = tiny_cnn(12, 12, c, classes, rng.bits());
      Tensor x = random_tensor({1, 12, 12, c}, rng, 0.0, 1.0);
      const int label = rng.uniform_int(classes);
      rep = grad_check(
          [&](Graph& g, Graph::NodeId xid) {
            auto bound = m.bind(g);
            return g.cross_entropy(bound.forward(xid), {label});
          },
          x, 1e-4);
    }
    worst = std::max(worst, rep.max_rel_err);
    passes += rep.pass ? 1 : 0;
  }
  const bool ok = passes == 50 && worst < 1e-4;
  verdict(1, "gradient-correctness", ok);
  CAPTURE(worst);
  CHECK(ok);
}

TEST_CASE("criterion 2: tconv/conv adjoint identity over 200 random shapes") {
  RngStream rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int a = 1 + rng.uniform_int(12), b = 1 + rng.uniform_int(12);
    const int r = 1 + rng.uniform_int(6), rw = 1 + rng.uniform_int(6);
    const int s = 1 + rng.uniform_int(3);
    Tensor v = random_tensor({a, b}, rng);
    Tensor k = random_tensor({r, rw}, rng);
    Tensor tv = tconv2d(v, k, s);
    Tensor g = random_tensor(tv.shape(), rng);
    const double lhs = dot_flat(tv, g);
    const double rhs = dot_flat(v, conv2d(g, k, s));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  const bool ok = worst < 1e-10;
  verdict(2, "adjoint-identity", ok);
  CAPTURE(worst);
  CHECK(ok);
}

TEST_CASE("criterion 3: projection optimality on exhaustively enumerated 4x4 grids") {
  RngStream rng(303);
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  bool ok = true;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    Tensor mt = random_tensor({4, 4, 1}, rng, -6.0, 6.0);
    if (trial % 4 == 0) mt[rng.uniform_int(16)] = mt[rng.uniform_int(16)];  // inject ties
    for (int eps = 1; eps <= 5 && ok; ++eps) {
      const Tensor m = project_mask(mt, eps);
      double got = 0.0;
      for (int i = 0; i < 16; ++i) got += m[i] * sigmoid(mt[i]);
      // Exhaustive maximum over all 2^16 masks with ||m||0 <= eps.
      double best = -1.0;
      for (int bits = 0; bits < (1 << 16); ++bits) {
        if (__builtin_popcount(static_cast<unsigned>(bits)) > eps) continue;
        double s = 0.0;
        for (int i = 0; i < 16; ++i)
          if (bits >> i & 1) s += sigmoid(mt[i]);
        if (s > best) best = s;
      }
      if (std::abs(got - best) > 1e-12) ok = false;
      // Lowest-index tie-break: the reference selection sorted by
      // (sigmoid desc, index asc) must match exactly.
      std::vector<int> order(16);
      for (int i = 0; i < 16; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](int x, int y) {
        const double sx = sigmoid(mt[x]), sy = sigmoid(mt[y]);
        return sx != sy ? sx > sy : x < y;
      });
      Tensor ref({4, 4, 1});
      for (int i = 0; i < eps; ++i) ref[order[i]] = 1.0;
      if (!bitwise_equal(ref, m)) ok = false;
    }
  }
  verdict(3, "projection-optimality", ok);
  CHECK(ok);
}

TEST_CASE("criterion 4: theorem inequality chain on 1000 random triples") {
  RngStream rng(404);
  int done = 0, violations = 0;
  while (done < 1000) {
    const int h = 8 + rng.uniform_int(25), w = 8 + rng.uniform_int(25);
    GroupSpec spec;
    const int kind = rng.uniform_int(4);
    if (kind == 0) {
      spec = GroupSpec::row(h, w);
    } else if (kind == 1) {
      spec = GroupSpec::column(h, w);
    } else {
      const int r = 1 + rng.uniform_int(5), rw = 1 + rng.uniform_int(5);
      Tensor k({r, rw});
      for (int64_t i = 0; i < k.size(); ++i) k[i] = rng.uniform() < 0.6 ? 1.0 : 0.0;
      bool any = false;
      for (int64_t i = 0; i < k.size(); ++i) any = any || k[i] == 1.0;
      if (!any) k[0] = 1.0;
      spec = GroupSpec::from_kernel(std::move(k), h, w, 1);
    }
    const int eps = 1 + rng.uniform_int(5);
    const int cells = spec.grid_h * spec.grid_w;
    if (eps > cells) continue;
    Tensor v({spec.grid_h, spec.grid_w});
    int placed = 0;
    while (placed < eps) {
      const int cell = rng.uniform_int(cells);
      if (v[cell] == 0.0) {
        v[cell] = 1.0;
        ++placed;
      }
    }
    Tensor mask = expand_group_mask(v, spec);
    for (int64_t i = 0; i < mask.size(); ++i)
      if (mask[i] == 1.0 && rng.uniform() < 0.25) mask[i] = 0.0;

    const int approx = approx_group_l0(mask, v, spec);
    const int exact = exact_group_l0(mask, spec, eps);
    if (!(exact <= approx && approx <= eps)) ++violations;
    ++done;
  }
  const bool ok = violations == 0;
  verdict(4, "theorem-inequality-chain", ok);
  CHECK(ok);
}

TEST_CASE("criterion 5: ratio simulation reproduction") {
  const GroupSpec patches = GroupSpec::patch(3, 32, 32);
  const auto rows = ratio_simulation(patches, 1, 5, 100, 550, /*cap=*/5);
  bool ok = true;
  for (const auto& r : rows) {
    CAPTURE(r.eps);
    CAPTURE(r.mean_ratio);
    if (r.skipped || r.mean_ratio < 0.95) ok = false;
    if (r.eps == 1 && r.mean_ratio != 1.0) ok = false;
  }
  for (const auto& spec : {GroupSpec::row(32, 32), GroupSpec::column(32, 32)}) {
    const auto rc = ratio_simulation(spec, 1, 5, 50, 551, 5);
    for (const auto& r : rc)
      if (r.skipped || r.mean_ratio != 1.0 || r.std_ratio != 0.0) ok = false;
  }
  verdict(5, "ratio-simulation", ok);
  CHECK(ok);
}

TEST_CASE("criterion 7: undefended-model efficacy") {
  Desk& d = desk();
  const double clean = accuracy(d.undefended, d.test);

  const double robust_unproj = robust_accuracy_spgd(d.undefended, d.test, d.eval_eps, 300,
                                                    BackwardMode::kUnprojected, 700);
  const double robust_proj = robust_accuracy_spgd(d.undefended, d.test, d.eval_eps, 300,
                                                  BackwardMode::kProjected, 701);

  SaaConfig sc;
  sc.eps = d.eval_eps;
  sc.spgd_iters = 300;
  sc.rs_queries = 1000;
  sc.seed = 702;
  const CascadeReport rep = saa(d.undefended, d.test, sc);
  for (const auto& row : rep.rows) g_total_violations += row.violations;
  const double robust_saa = rep.robust_accuracy();

  // Stand-alone stage robust accuracies on the same instances and seeds.
  double stage_robust[kSaaStages];
  for (int stage = 0; stage < kSaaStages; ++stage) {
    int broken = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : broken)
    for (int i = 0; i < d.test.n(); ++i) {
      const AttackOutcome o =
          saa_run_stage(d.undefended, d.test.image(i), d.test.label(i), sc, stage, i);
      broken += o.success ? 1 : 0;
    }
    stage_robust[stage] = 1.0 - static_cast<double>(broken) / d.test.n();
  }

  const bool ok = clean >= 0.95 && robust_unproj < 0.05 && robust_proj < 0.05 &&
                  robust_saa <= stage_robust[0] + 1e-12 &&
                  robust_saa <= stage_robust[1] + 1e-12 &&
                  robust_saa <= stage_robust[2] + 1e-12;
  std::printf("  clean %.4f | robust: unproj %.4f proj %.4f saa %.4f | stages %.4f %.4f %.4f\n",
              clean, robust_unproj, robust_proj, robust_saa, stage_robust[0], stage_robust[1],
              stage_robust[2]);
  verdict(7, "undefended-efficacy", ok);
  CHECK(ok);
}

TEST_CASE("criterion 8: limited-iteration advantage over random search") {
  Desk& d = desk();
  const int T = 50;
  int spgd_broken = 0, rs_broken = 0, clean_correct = 0;
  int64_t violations = 0;
#pragma omp parallel for schedule(dynamic) \
    reduction(+ : spgd_broken, rs_broken, clean_correct, violations)
  for (int i = 0; i < d.test.n(); ++i) {
    const Tensor x = d.test.image(i);
    const int y = d.test.label(i);
    if (d.undefended.predict_class(x) != y) continue;
    ++clean_correct;
    SpgdConfig sc;
    sc.eps = d.eval_eps;
    sc.iters = T;
    sc.seed = mix_seed({800, static_cast<uint64_t>(i)});
    const AttackOutcome a = spgd_attack(d.undefended, x, y, sc);
    spgd_broken += a.success ? 1 : 0;
    violations += a.violations;

    RsConfig rc;
    rc.eps = d.eval_eps;
    rc.max_queries = T;
    rc.seed = mix_seed({801, static_cast<uint64_t>(i)});
    const LogitsFn fn = [&](const Tensor& adv) { return d.undefended.logits(adv); };
    const AttackOutcome b = rs_attack(fn, x, y, rc);
    rs_broken += b.success ? 1 : 0;
    violations += b.violations;
  }
  g_total_violations += violations;
  const double spgd_asr = static_cast<double>(spgd_broken) / clean_correct;
  const double rs_asr = static_cast<double>(rs_broken) / clean_correct;
  const bool ok = spgd_asr - rs_asr >= 0.20;
  std::printf("  T=%d: sPGD ASR %.4f vs RS ASR %.4f (gap %.1f pp)\n", T, spgd_asr, rs_asr,
              100.0 * (spgd_asr - rs_asr));
  verdict(8, "limited-iteration-advantage", ok);
  CHECK(ok);
}

TEST_CASE("criterion 9: cascade union property on 200 instances") {
  Desk& d = desk();
  Dataset batch = d.test.head(200);
  SaaConfig sc;
  sc.eps = 3;  // scarce budget so each stage fails on some instances
  sc.spgd_iters = 120;
  sc.rs_queries = 240;
  sc.seed = 900;

  const CascadeReport rep = saa(d.undefended, batch, sc);
  for (const auto& row : rep.rows) g_total_violations += row.violations;
  std::set<int> cascade;
  for (const auto& row : rep.rows)
    if (row.broken_by >= 0) cascade.insert(row.index);

  std::set<int> unioned;
  for (int stage = 0; stage < kSaaStages; ++stage) {
    std::vector<char> broken(static_cast<size_t>(batch.n()), 0);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < batch.n(); ++i) {
      const AttackOutcome o =
          saa_run_stage(d.undefended, batch.image(i), batch.label(i), sc, stage, i);
      broken[static_cast<size_t>(i)] = o.success ? 1 : 0;
    }
    for (int i = 0; i < batch.n(); ++i)
      if (broken[static_cast<size_t>(i)]) unioned.insert(i);
  }
  const bool ok = cascade == unioned;
  std::printf("  cascade broke %zu, stage union %zu\n", cascade.size(), unioned.size());
  verdict(9, "cascade-union", ok);
  CHECK(ok);
}

TEST_CASE("criterion 10: adversarial-training benefit") {
  Desk& d = desk();
  const double clean_undef = accuracy(d.undefended, d.test);
  const double robust_undef = robust_accuracy_spgd(d.undefended, d.test, d.eval_eps, 300,
                                                   BackwardMode::kUnprojected, 1000);

  AdvTrainConfig cfg;
  cfg.base.epochs = 30;
  cfg.base.batch_size = 128;
  cfg.base.lr = 0.05;
  cfg.base.seed = 9;
  cfg.method = AdvMethod::kSat;
  cfg.eval_eps = d.eval_eps;
  cfg.eps_multiplier = 6.0;
  cfg.attack_iters = 20;
  cfg.attack_tolerance = 10;
  cfg.probe_size = 0;  // probes off: the final evaluation below is the measurement
  Model sat = Model::reference_cnn(3, 4, 1, d.spec.h, d.spec.w);
  sat_train(sat, d.train, cfg, nullptr);

  const double clean_sat = accuracy(sat, d.test);
  const double robust_sat =
      robust_accuracy_spgd(sat, d.test, d.eval_eps, 300, BackwardMode::kUnprojected, 1001);

  const bool ok =
      (robust_sat - robust_undef >= 0.30) && (clean_sat >= 0.85 * clean_undef);
  std::printf("  undefended: clean %.4f robust %.4f | sAT: clean %.4f robust %.4f\n",
              clean_undef, robust_undef, clean_sat, robust_sat);
  verdict(10, "adversarial-training-benefit", ok);
  CHECK(ok);
}

TEST_CASE("criterion 11: degenerate structured/unstructured equivalence") {
  Desk& d = desk();
  const GroupSpec spec = GroupSpec::pixel(d.spec.h, d.spec.w);
  bool ok = true;
  for (int i = 0; i < 20; ++i) {
    SpgdConfig cfg;
    cfg.eps = d.eval_eps;
    cfg.iters = 60;
    cfg.alpha = 0.25;
    cfg.beta = 0.25 * std::sqrt(static_cast<double>(d.spec.h) * d.spec.w);
    cfg.tolerance = 3;
    cfg.seed = mix_seed({1100, static_cast<uint64_t>(i)});
    cfg.trace = true;
    const Tensor x = d.test.image(i);
    const int y = d.test.label(i);
    const AttackOutcome a = spgd_attack(d.undefended, x, y, cfg);
    const AttackOutcome b = spgd_structured_attack(d.undefended, x, y, spec, cfg);
    g_total_violations += a.violations + b.violations;
    if (a.success != b.success || a.iterations != b.iterations || a.trace != b.trace ||
        !bitwise_equal(a.delta, b.delta))
      ok = false;
  }
  verdict(11, "degenerate-equivalence", ok);
  CHECK(ok);
}

TEST_CASE("criterion 12: campaign determinism (byte-identical csv)") {
  Desk& d = desk();
  Dataset batch = d.test.head(60);
  auto attacks = [&]() {
    std::vector<NamedAttack> list;
    list.push_back({"spgd_unproj", [&](const Tensor& x, int y, int instance) {
                      SpgdConfig cfg;
                      cfg.eps = d.eval_eps;
                      cfg.iters = 40;
                      cfg.seed = mix_seed({1200, static_cast<uint64_t>(instance)});
                      return spgd_attack(d.undefended, x, y, cfg);
                    }});
    list.push_back({"rs", [&](const Tensor& x, int y, int instance) {
                      RsConfig cfg;
                      cfg.eps = d.eval_eps;
                      cfg.max_queries = 80;
                      cfg.seed = mix_seed({1201, static_cast<uint64_t>(instance)});
                      const LogitsFn fn = [&](const Tensor& adv) {
                        return d.undefended.logits(adv);
                      };
                      return rs_attack(fn, x, y, cfg);
                    }});
    return list;
  }();

  const std::string p1 = "acceptance_rerun1.csv", p2 = "acceptance_rerun2.csv";
  CampaignResult r1 = run_campaign(d.undefended, batch, attacks, /*record_time=*/false);
  CampaignResult r2 = run_campaign(d.undefended, batch, attacks, /*record_time=*/false);
  g_total_violations += r1.violations + r2.violations;
  write_campaign_csv(r1, p1);
  write_campaign_csv(r2, p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  const bool ok = !b1.empty() && b1 == b2;
  std::remove(p1.c_str());
  std::remove(p2.c_str());
  verdict(12, "campaign-determinism", ok);
  CHECK(ok);
}

// Criterion 6 aggregates the per-iteration feasibility checks recorded by
// every attack run in this suite; it must come last.
TEST_CASE("criterion 6: feasibility invariants across all runs") {
  const bool ok = g_total_violations.load() == 0;
  std::printf("  aggregated violations: %ld\n", static_cast<long>(g_total_violations.load()));
  verdict(6, "feasibility-invariants", ok);
  CHECK(ok);
}
