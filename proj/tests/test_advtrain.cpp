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

#include "spalab/adv_train.hpp"
#include "spalab/dataset.hpp"
#include "support.hpp"

using namespace spalab;
using namespace spalab::testing;

namespace {

Dataset small_train() {
  SyntheticSpec spec;
  spec.n = 96;
  return make_synthetic(spec, 7, "train");
}

AdvTrainConfig quick_cfg() {
  AdvTrainConfig cfg;
  cfg.base.epochs = 2;
  cfg.base.batch_size = 32;
  cfg.base.lr = 0.05;
  cfg.base.seed = 13;
  cfg.eval_eps = 4;
  cfg.eps_multiplier = 2.0;
  cfg.attack_iters = 5;
  cfg.attack_tolerance = 10;
  cfg.probe_size = 0;  // skip probes in unit tests
  return cfg;
}

}  // namespace

TEST_CASE("random policy draws both modes with roughly equal frequency") {
  AdvTrainConfig cfg = quick_cfg();
  cfg.policy = BackwardPolicy::kRandom;
  int projected = 0;
  const int draws = 400;
  for (int b = 0; b < draws; ++b)
    projected += policy_mode(cfg, b % 7, b) == BackwardMode::kProjected ? 1 : 0;
  CHECK(projected > draws * 35 / 100);
  CHECK(projected < draws * 65 / 100);

  // The draw sequence is reproducible.
  for (int b = 0; b < 50; ++b) CHECK(policy_mode(cfg, 3, b) == policy_mode(cfg, 3, b));
}

TEST_CASE("alternate policy flips every five epochs") {
  AdvTrainConfig cfg = quick_cfg();
  cfg.policy = BackwardPolicy::kAlternate;
  for (int e = 0; e < 5; ++e) CHECK(policy_mode(cfg, e, 0) == BackwardMode::kUnprojected);
  for (int e = 5; e < 10; ++e) CHECK(policy_mode(cfg, e, 0) == BackwardMode::kProjected);
  for (int e = 10; e < 15; ++e) CHECK(policy_mode(cfg, e, 0) == BackwardMode::kUnprojected);
}

TEST_CASE("zero attack iterations reduce sAT to clean training") {
  Dataset train = small_train();
  AdvTrainConfig cfg = quick_cfg();
  cfg.attack_iters = 0;
  cfg.eps_multiplier = 1.0;

  Model adv = Model::reference_cnn(3, 4, 5);
  sat_train(adv, train, cfg);

  Model clean = Model::reference_cnn(3, 4, 5);
  sgd_train(clean, train, cfg.base);

  for (size_t i = 0; i < adv.params().size(); ++i)
    CHECK(bitwise_equal(adv.params()[i].value, clean.params()[i].value));
}

TEST_CASE("sTRADES with zero trade-off weight equals clean training bitwise") {
  Dataset train = small_train();
  AdvTrainConfig cfg = quick_cfg();
  cfg.method = AdvMethod::kStrades;
  cfg.trades_weight = 0.0;

  Model adv = Model::reference_cnn(3, 4, 21);
  strades_train(adv, train, cfg);

  Model clean = Model::reference_cnn(3, 4, 21);
  sgd_train(clean, train, cfg.base);

  for (size_t i = 0; i < adv.params().size(); ++i)
    CHECK(bitwise_equal(adv.params()[i].value, clean.params()[i].value));
}

TEST_CASE("adversarial training is deterministic given the seed") {
  Dataset train = small_train();
  AdvTrainConfig cfg = quick_cfg();
  Model a = Model::reference_cnn(3, 4, 2);
  Model b = Model::reference_cnn(3, 4, 2);
  sat_train(a, train, cfg);
  sat_train(b, train, cfg);
  for (size_t i = 0; i < a.params().size(); ++i)
    CHECK(bitwise_equal(a.params()[i].value, b.params()[i].value));
}

TEST_CASE("sTRADES trains without blowing up and keeps parameters finite") {
  Dataset train = small_train();
  AdvTrainConfig cfg = quick_cfg();
  cfg.method = AdvMethod::kStrades;
  cfg.trades_weight = 6.0;
  Model m = Model::reference_cnn(3, 4, 3);
  const auto hist = strades_train(m, train, cfg);
  CHECK(hist.size() == 2);
  for (const auto& p : m.params())
    for (int64_t i = 0; i < p.value.size(); ++i) CHECK(std::isfinite(p.value[i]));
}

TEST_CASE("train-time budget is the multiplier times the eval budget") {
  AdvTrainConfig cfg = quick_cfg();
  cfg.eval_eps = 10;
  cfg.eps_multiplier = 6.0;
  CHECK(cfg.train_eps() == 60);
  cfg.eps_multiplier = 1.0;
  CHECK(cfg.train_eps() == 10);
  cfg.eps_multiplier = 0.01;
  CHECK(cfg.train_eps() == 1);  // floors at one
}
