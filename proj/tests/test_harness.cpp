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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "spalab/campaign.hpp"
#include "spalab/dataset.hpp"
#include "spalab/image_io.hpp"
#include "spalab/spgd.hpp"
#include "support.hpp"

using namespace spalab;
using namespace spalab::testing;

namespace {

Model trained_tiny(Dataset& train_out, uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.n = 240;
  train_out = make_synthetic(spec, seed, "train");
  Model m = Model::reference_cnn(3, 4, seed);
  TrainConfig cfg;
  cfg.epochs = 24;
  cfg.batch_size = 48;
  cfg.seed = seed;
  sgd_train(m, train_out, cfg);
  return m;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

NamedAttack spgd_named(const Model& m, const std::string& name, int eps, int iters,
                       uint64_t seed) {
  return {name, [&m, eps, iters, seed](const Tensor& x, int y, int instance) {
            SpgdConfig cfg;
            cfg.eps = eps;
            cfg.iters = iters;
            cfg.seed = mix_seed({seed, static_cast<uint64_t>(instance)});
            return spgd_attack(m, x, y, cfg);
          }};
}

}  // namespace

TEST_CASE("synthetic data is deterministic and split-disjoint") {
  SyntheticSpec spec;
  spec.n = 40;
  Dataset a = make_synthetic(spec, 5, "train");
  Dataset b = make_synthetic(spec, 5, "train");
  CHECK(bitwise_equal(a.images, b.images));
  CHECK(a.labels == b.labels);

  Dataset t = make_synthetic(spec, 5, "test");
  CHECK_FALSE(bitwise_equal(a.images, t.images));
  for (int i = 0; i < spec.n; ++i) CHECK((a.labels[i] >= 0 && a.labels[i] < spec.classes));
  for (int64_t i = 0; i < a.images.size(); ++i) {
    CHECK(a.images[i] >= 0.0);
    CHECK(a.images[i] <= 1.0);
  }
}

TEST_CASE("cifar record round-trips bit-identically") {
  RngStream rng(3);
  Tensor img = random_tensor({32, 32, 3}, rng, 0.0, 1.0);
  const auto rec = cifar10_encode_record(img, 7);
  REQUIRE(rec.size() == 3073);
  Tensor decoded;
  int label = -1;
  cifar10_decode_record(rec.data(), decoded, label);
  CHECK(label == 7);
  const auto rec2 = cifar10_encode_record(decoded, label);
  CHECK(rec == rec2);
}

TEST_CASE("cifar loader parses whole files and rejects malformed ones") {
  const std::string path = "cifar_test_batch.bin";
  {
    std::ofstream out(path, std::ios::binary);
    RngStream rng(9);
    for (int r = 0; r < 10; ++r) {
      Tensor img = random_tensor({32, 32, 3}, rng, 0.0, 1.0);
      const auto rec = cifar10_encode_record(img, r % 10);
      out.write(reinterpret_cast<const char*>(rec.data()),
                static_cast<std::streamsize>(rec.size()));
    }
  }
  Dataset d = load_cifar10(path);
  CHECK(d.n() == 10);  // 30730 bytes = exactly 10 records
  CHECK(d.h() == 32);
  CHECK(d.label(3) == 3);
  std::remove(path.c_str());

  const std::string truncated = "cifar_truncated.bin";
  std::ofstream(truncated, std::ios::binary) << "short";
  CHECK_THROWS_AS(load_cifar10(truncated), std::runtime_error);
  std::remove(truncated.c_str());

  const std::string badlabel = "cifar_badlabel.bin";
  {
    std::vector<uint8_t> rec(3073, 0);
    rec[0] = 255;
    std::ofstream out(badlabel, std::ios::binary);
    out.write(reinterpret_cast<const char*>(rec.data()), 3073);
  }
  CHECK_THROWS_AS(load_cifar10(badlabel), std::out_of_range);
  std::remove(badlabel.c_str());
}

TEST_CASE("perturbation export: zero delta gives identical panels") {
  RngStream rng(5);
  Tensor x = random_tensor({8, 8, 3}, rng, 0.0, 1.0);
  Tensor delta = Tensor::zeros({8, 8, 3});
  const std::string path = "export_zero.ppm";
  export_perturbation_image(x, delta, path);
  Tensor panels = read_ppm(path);
  REQUIRE(panels.shape() == std::vector<int>{8, 3 * 8 + 2 * kPanelGap, 3});
  const int adv_off = 8 + kPanelGap;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      for (int ch = 0; ch < 3; ++ch)
        CHECK(panels.at3(i, j, ch) == panels.at3(i, adv_off + j, ch));
  // Location map is empty.
  const int map_off = 2 * (8 + kPanelGap);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) CHECK(panels.at3(i, map_off + j, 0) == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("perturbation export: map marks exactly the perturbed pixels") {
  RngStream rng(7);
  Tensor x = random_tensor({8, 8, 3}, rng, 0.1, 0.9);
  Tensor delta = Tensor::zeros({8, 8, 3});
  delta.at3(2, 3, 1) = clip_magnitude(x.at3(2, 3, 1), 0.1, 1.0);
  delta.at3(5, 5, 0) = clip_magnitude(x.at3(5, 5, 0), -0.1, 1.0);
  delta.at3(5, 5, 2) = clip_magnitude(x.at3(5, 5, 2), 0.2, 1.0);
  const std::string path = "export_map.ppm";
  export_perturbation_image(x, delta, path, /*highlight=*/true);
  Tensor panels = read_ppm(path);
  const int map_off = 2 * (8 + kPanelGap);
  int marked = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) marked += panels.at3(i, map_off + j, 0) == 1.0 ? 1 : 0;
  CHECK(marked == pixel_l0(delta));

  // Re-read error stays inside the 8-bit quantization bound.
  Tensor adv = x;
  for (int64_t i = 0; i < adv.size(); ++i) adv[i] += delta[i];
  const int adv_off = 8 + kPanelGap;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      // Skip highlight pixels (red rectangle).
      bool is_red = panels.at3(i, adv_off + j, 0) == 1.0 && panels.at3(i, adv_off + j, 1) == 0.0 &&
                    panels.at3(i, adv_off + j, 2) == 0.0;
      if (is_red) continue;
      for (int ch = 0; ch < 3; ++ch)
        CHECK(std::abs(panels.at3(i, adv_off + j, ch) - adv.at3(i, j, ch)) <= 1.0 / 255.0);
    }
  std::remove(path.c_str());
}

TEST_CASE("campaign rows reproduce aggregates and csv round-trips") {
  Dataset train;
  Model m = trained_tiny(train);
  Dataset batch = train.head(12);
  const auto attacks = std::vector<NamedAttack>{
      spgd_named(m, "spgd_a", 6, 30, 1),
      spgd_named(m, "spgd_b", 2, 20, 2),
  };
  CampaignResult res = run_campaign(m, batch, attacks, /*record_time=*/false);
  REQUIRE(res.rows.size() == 24);
  CHECK(res.violations == 0);

  // Aggregates recompute from rows.
  int correct = 0, broken = 0;
  for (const auto& r : res.rows)
    if (r.attack == "spgd_a" && r.clean_correct) {
      ++correct;
      broken += r.success ? 1 : 0;
    }
  CHECK(res.robust_accuracy("spgd_a") ==
        doctest::Approx(1.0 - static_cast<double>(broken) / correct));

  const std::string path = "campaign_roundtrip.csv";
  write_campaign_csv(res, path);
  CampaignResult back = read_campaign_csv(path);
  REQUIRE(back.rows.size() == res.rows.size());
  for (size_t i = 0; i < res.rows.size(); ++i) {
    CHECK(back.rows[i].index == res.rows[i].index);
    CHECK(back.rows[i].attack == res.rows[i].attack);
    CHECK(back.rows[i].success == res.rows[i].success);
    CHECK(back.rows[i].iterations == res.rows[i].iterations);
  }
  // Byte-identical rewrite.
  const std::string path2 = "campaign_roundtrip2.csv";
  write_campaign_csv(back, path2);
  CHECK(file_bytes(path) == file_bytes(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("campaign reruns with identical seeds are byte-identical") {
  Dataset train;
  Model m = trained_tiny(train);
  Dataset batch = train.head(10);
  const auto attacks = std::vector<NamedAttack>{spgd_named(m, "spgd", 5, 25, 3)};
  const std::string p1 = "campaign_rerun1.csv", p2 = "campaign_rerun2.csv";
  write_campaign_csv(run_campaign(m, batch, attacks, false), p1);
  write_campaign_csv(run_campaign(m, batch, attacks, false), p2);
  CHECK(file_bytes(p1) == file_bytes(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("iteration sweep: success never shrinks with a larger budget") {
  Dataset train;
  Model m = trained_tiny(train);
  Dataset batch = train.head(15);
  for (int i = 0; i < batch.n(); ++i) {
    SpgdConfig lo;
    lo.eps = 4;
    lo.iters = 15;
    lo.seed = mix_seed({77, static_cast<uint64_t>(i)});
    SpgdConfig hi = lo;
    hi.iters = 60;
    const AttackOutcome a = spgd_attack(m, batch.image(i), batch.label(i), lo);
    const AttackOutcome b = spgd_attack(m, batch.image(i), batch.label(i), hi);
    if (a.success) {
      CHECK(b.success);
      CHECK(a.iterations == b.iterations);  // identical trajectory prefix
    }
  }
}

TEST_CASE("epsilon sweep: smaller-budget successes stay feasible at larger budgets") {
  Dataset train;
  Model m = trained_tiny(train);
  Dataset batch = train.head(10);
  for (int i = 0; i < batch.n(); ++i) {
    SpgdConfig cfg;
    cfg.eps = 3;
    cfg.iters = 40;
    cfg.seed = mix_seed({88, static_cast<uint64_t>(i)});
    const AttackOutcome o = spgd_attack(m, batch.image(i), batch.label(i), cfg);
    for (int bigger : {4, 6, 10}) CHECK(o.pixel_l0 <= bigger);
  }
}

TEST_CASE("transfer: attacking the source model transfers identically to itself") {
  Dataset train;
  Model m = trained_tiny(train);
  Dataset batch = train.head(15);
  const NamedAttack attack = spgd_named(m, "spgd", 8, 40, 5);
  const TransferResult res = transfer_eval(m, m, batch, attack);
  CHECK(res.transfer_asr == doctest::Approx(res.direct_asr));
}

TEST_CASE("transfer: zero-budget attack never transfers") {
  Dataset train;
  Model source = trained_tiny(train, 1);
  Model target = trained_tiny(train, 2);
  Dataset batch = train.head(12);
  // Budget zero: the harness path materializes an all-zero perturbation.
  const NamedAttack zero{"zero", [](const Tensor& x, int, int) {
                           AttackOutcome o;
                           o.delta = Tensor(x.shape());
                           return o;
                         }};
  const TransferResult res = transfer_eval(source, target, batch, zero);
  CHECK(res.transfer_asr == 0.0);
}

TEST_CASE("transfer between two independently trained models is recorded") {
  Dataset train;
  Model source = trained_tiny(train, 1);
  Model target = trained_tiny(train, 2);
  Dataset batch = train.head(20);
  const NamedAttack attack = spgd_named(source, "spgd", 10, 60, 6);
  const TransferResult res = transfer_eval(source, target, batch, attack);
  MESSAGE("transfer ASR ", res.transfer_asr, " direct ASR ", res.direct_asr);
  CHECK(res.transfer_asr > 0.0);
}
