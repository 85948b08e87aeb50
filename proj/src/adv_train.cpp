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

#include "spalab/adv_train.hpp"

#include <algorithm>
#include <stdexcept>

#include "spalab/rng.hpp"

namespace spalab {

namespace {

constexpr uint64_t kTagPolicy = 0x706f6c79ULL;
constexpr uint64_t kTagAttack = 0x61747461ULL;
constexpr uint64_t kTagProbe = 0x70726f62ULL;

Tensor attack_batch(const Model& model, const Tensor& xb, const std::vector<int>& yb,
                    const AdvTrainConfig& cfg, BackwardMode mode, int epoch, int batch_index) {
  const int n = xb.dim(0), h = xb.dim(1), w = xb.dim(2), c = xb.dim(3);
  Tensor adv = xb;
  const int train_eps = cfg.train_eps();
  int64_t violations = 0;
  int l0_overruns = 0;

#pragma omp parallel for schedule(dynamic) reduction(+ : violations, l0_overruns)
  for (int i = 0; i < n; ++i) {
    Tensor xi({h, w, c});
    const int64_t stride = static_cast<int64_t>(h) * w * c;
    std::copy(xb.data() + i * stride, xb.data() + (i + 1) * stride, xi.data());

    SpgdConfig sc;
    sc.eps = train_eps;
    sc.eps_inf = cfg.eps_inf;
    sc.iters = cfg.attack_iters;
    sc.tolerance = cfg.attack_tolerance;
    sc.mode = mode;
    sc.seed = mix_seed({cfg.base.seed, kTagAttack, static_cast<uint64_t>(epoch),
                        static_cast<uint64_t>(batch_index), static_cast<uint64_t>(i)});
    const AttackOutcome o = spgd_attack(model, xi, yb[static_cast<size_t>(i)], sc);
    violations += o.violations;
    l0_overruns += o.pixel_l0 > train_eps ? 1 : 0;
    for (int64_t j = 0; j < stride; ++j) adv.data()[i * stride + j] = xi[j] + o.delta[j];
  }
  if (violations != 0 || l0_overruns != 0)
    throw std::logic_error("adv_train: attack produced an infeasible perturbation");
  return adv;
}

double robust_probe(const Model& model, const Dataset& data, const AdvTrainConfig& cfg,
                    int epoch) {
  const int n = std::min(cfg.probe_size, data.n());
  if (n <= 0 || cfg.probe_iters <= 0) return -1.0;
  int broken = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : broken)
  for (int i = 0; i < n; ++i) {
    SpgdConfig sc;
    sc.eps = cfg.eval_eps;
    sc.eps_inf = cfg.eps_inf;
    sc.iters = cfg.probe_iters;
    sc.seed = mix_seed({cfg.base.seed, kTagProbe, static_cast<uint64_t>(epoch),
                        static_cast<uint64_t>(i)});
    const AttackOutcome o = spgd_attack(model, data.image(i), data.label(i), sc);
    broken += o.success ? 1 : 0;
  }
  return static_cast<double>(n - broken) / n;
}

std::vector<AdvEpochStats> adv_train_impl(Model& model, const Dataset& train,
                                          const AdvTrainConfig& cfg, const Dataset* eval,
                                          bool trades) {
  if (train.n() == 0) throw std::invalid_argument("adv_train: empty dataset");
  const bool attack_enabled = cfg.attack_iters > 0 && (!trades || cfg.trades_weight > 0.0);
  std::vector<Tensor> momentum;
  std::vector<AdvEpochStats> history;
  const int n = train.n();

  for (int epoch = 0; epoch < cfg.base.epochs; ++epoch) {
    const double lr = train_detail::lr_at_epoch(cfg.base, epoch);
    const auto perm = train_detail::epoch_permutation(n, cfg.base.seed, epoch);
    double loss_sum = 0.0;
    int batch_index = 0;

    for (int start = 0; start < n; start += cfg.base.batch_size, ++batch_index) {
      const int count = std::min(cfg.base.batch_size, n - start);
      std::vector<int> yb;
      Tensor xb = train_detail::gather_batch(train, perm, start, count, yb);
      xb = train_detail::maybe_flip_batch(xb, cfg.base, epoch, start);

      Tensor x_adv;
      if (attack_enabled) {
        const BackwardMode mode = policy_mode(cfg, epoch, batch_index);
        x_adv = attack_batch(model, xb, yb, cfg, mode, epoch, batch_index);
      }

      Graph g;
      Model::Bound bound = model.bind(g);
      Graph::NodeId loss;
      if (!trades) {
        const Graph::NodeId xa = g.input(attack_enabled ? x_adv : xb);
        loss = g.cross_entropy(bound.forward(xa), yb);
      } else if (attack_enabled) {
        const Graph::NodeId xc = g.input(xb);
        const Graph::NodeId xa = g.input(x_adv);
        const Graph::NodeId logits_clean = bound.forward(xc);
        const Graph::NodeId logits_adv = bound.forward(xa);
        const Graph::NodeId ce = g.cross_entropy(logits_clean, yb);
        const Graph::NodeId kl = g.kl_div_logits(logits_clean, logits_adv);
        loss = g.add(ce, g.scale(kl, cfg.trades_weight));
      } else {
        const Graph::NodeId xc = g.input(xb);
        loss = g.cross_entropy(bound.forward(xc), yb);
      }
      g.backward(loss);
      loss_sum += g.value(loss)[0] * count;

      std::vector<Tensor> grads;
      grads.reserve(bound.params.size());
      for (const auto id : bound.params) grads.push_back(g.adjoint(id));
      train_detail::sgd_step(model, grads, momentum, cfg.base, lr);
    }

    AdvEpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / n;
    st.clean_acc = accuracy(model, eval ? *eval : train);
    st.robust_acc_probe = robust_probe(model, eval ? *eval : train, cfg, epoch);
    history.push_back(st);
  }
  return history;
}

}  // namespace

BackwardMode policy_mode(const AdvTrainConfig& cfg, int epoch, int batch_index) {
  switch (cfg.policy) {
    case BackwardPolicy::kProjected:
      return BackwardMode::kProjected;
    case BackwardPolicy::kUnprojected:
      return BackwardMode::kUnprojected;
    case BackwardPolicy::kAlternate:
      return (epoch / 5) % 2 == 0 ? BackwardMode::kUnprojected : BackwardMode::kProjected;
    case BackwardPolicy::kRandom:
    default: {
      RngStream rng(mix_seed({cfg.base.seed, kTagPolicy, static_cast<uint64_t>(epoch),
                              static_cast<uint64_t>(batch_index)}));
      return rng.uniform() < 0.5 ? BackwardMode::kProjected : BackwardMode::kUnprojected;
    }
  }
}

std::vector<AdvEpochStats> sat_train(Model& model, const Dataset& train,
                                     const AdvTrainConfig& cfg, const Dataset* eval) {
  return adv_train_impl(model, train, cfg, eval, false);
}

std::vector<AdvEpochStats> strades_train(Model& model, const Dataset& train,
                                         const AdvTrainConfig& cfg, const Dataset* eval) {
  return adv_train_impl(model, train, cfg, eval, true);
}

}  // namespace spalab
