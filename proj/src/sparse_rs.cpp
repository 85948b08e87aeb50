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

#include "spalab/sparse_rs.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "spalab/rng.hpp"

namespace spalab {

double rs_schedule(int iter, int total, double alpha_init) {
  const double progress = total > 0 ? static_cast<double>(iter) / total : 0.0;
  int halvings = 0;
  for (double milestone : {0.1, 0.25, 0.5, 0.75})
    if (progress >= milestone) ++halvings;
  return alpha_init / static_cast<double>(1 << halvings);
}

namespace {

inline int argmax_vec(const Tensor& logits) {
  int best = 0;
  for (int j = 1; j < logits.dim(0); ++j)
    if (logits[j] > logits[best]) best = j;
  return best;
}

double ce_loss_vec(const Tensor& logits, int label) {
  double mx = logits[0];
  for (int j = 1; j < logits.dim(0); ++j) mx = std::max(mx, logits[j]);
  double lse = 0.0;
  for (int j = 0; j < logits.dim(0); ++j) lse += std::exp(logits[j] - mx);
  return mx + std::log(lse) - logits[label];
}

int64_t box_violations(const Tensor& delta, const Tensor& x, double eps_inf) {
  int64_t bad = 0;
  for (int64_t i = 0; i < delta.size(); ++i) {
    if (std::abs(delta[i]) > eps_inf) ++bad;
    const double s = x[i] + delta[i];
    if (s < 0.0 || s > 1.0) ++bad;
  }
  return bad;
}

// Shared query/acceptance loop: `materialize` rebuilds delta from the
// proposal state, `propose`/`commit` mutate it.
struct SearchDriver {
  const LogitsFn& logits_fn;
  const Tensor& x;
  int label;
  const RsConfig& cfg;
  AttackOutcome& out;
  double best_loss = 0.0;

  // Returns true when finished (success or budget exhausted).
  bool evaluate(const Tensor& delta, bool& accepted) {
    Tensor adv = x;
    for (int64_t i = 0; i < adv.size(); ++i) adv[i] += delta[i];
    const Tensor logits = logits_fn(adv);
    ++out.iterations;
    const double loss = ce_loss_vec(logits, label);
    accepted = loss > best_loss;
    if (accepted) best_loss = loss;
    out.best_loss_curve.push_back(best_loss);
    out.final_loss = best_loss;
    if (argmax_vec(logits) != label) {
      out.success = true;
      out.delta = delta;
      return true;
    }
    return out.iterations >= cfg.max_queries;
  }
};

AttackOutcome rs_unstructured(const LogitsFn& logits_fn, const Tensor& x, int label,
                              const RsConfig& cfg) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int npix = h * w;
  AttackOutcome out;
  out.delta = Tensor({h, w, c});

  if (argmax_vec(logits_fn(x)) != label) {
    out.success = true;
    return out;
  }

  RngStream rng(cfg.seed);
  const int budget = std::min(cfg.eps, npix);

  std::vector<int> universe(static_cast<size_t>(npix));
  for (int i = 0; i < npix; ++i) universe[static_cast<size_t>(i)] = i;
  for (int i = 0; i < budget; ++i)
    std::swap(universe[static_cast<size_t>(i)],
              universe[static_cast<size_t>(i + rng.uniform_int(npix - i))]);
  std::vector<int> pixels(universe.begin(), universe.begin() + budget);
  std::vector<char> in_set(static_cast<size_t>(npix), 0);
  for (int p : pixels) in_set[static_cast<size_t>(p)] = 1;

  // Corner values aimed at {0,1} per channel, box/eps_inf respected exactly.
  Tensor delta({h, w, c});
  auto draw_pixel = [&](Tensor& d, int pix) {
    const int i = pix / w, j = pix % w;
    for (int ch = 0; ch < c; ++ch) {
      const double corner = rng.uniform() < 0.5 ? 0.0 : 1.0;
      const double xv = x.at3(i, j, ch);
      d.at3(i, j, ch) = clip_magnitude(xv, corner - xv, cfg.eps_inf);
    }
  };
  auto clear_pixel = [&](Tensor& d, int pix) {
    const int i = pix / w, j = pix % w;
    for (int ch = 0; ch < c; ++ch) d.at3(i, j, ch) = 0.0;
  };
  for (int p : pixels) draw_pixel(delta, p);

  SearchDriver drv{logits_fn, x, label, cfg, out};
  drv.best_loss = -1e300;
  bool accepted = false;
  out.delta = delta;
  if (drv.evaluate(delta, accepted)) {
    out.pixel_l0 = pixel_l0(out.delta);
    return out;
  }

  while (out.iterations < cfg.max_queries) {
    const double frac = rs_schedule(out.iterations, cfg.max_queries, cfg.alpha_init);
    int k = std::max(1, static_cast<int>(std::ceil(frac * budget)));
    k = std::min({k, budget, npix - budget});
    if (k == 0) break;  // nothing to swap (budget == npix)

    // Swap k positions: drop k random members, add k random outsiders.
    std::vector<int> prop_pixels = pixels;
    std::vector<char> prop_in = in_set;
    Tensor prop_delta = delta;
    for (int t = 0; t < k; ++t) {
      const int victim_idx = rng.uniform_int(static_cast<int>(prop_pixels.size()));
      const int victim = prop_pixels[static_cast<size_t>(victim_idx)];
      prop_pixels.erase(prop_pixels.begin() + victim_idx);
      prop_in[static_cast<size_t>(victim)] = 0;
      clear_pixel(prop_delta, victim);
    }
    for (int t = 0; t < k; ++t) {
      int cand = rng.uniform_int(npix);
      while (prop_in[static_cast<size_t>(cand)]) cand = rng.uniform_int(npix);
      prop_in[static_cast<size_t>(cand)] = 1;
      prop_pixels.push_back(cand);
      draw_pixel(prop_delta, cand);
    }

    out.violations += static_cast<int>(prop_pixels.size()) > cfg.eps ? 1 : 0;
    out.violations += box_violations(prop_delta, x, cfg.eps_inf);

    if (drv.evaluate(prop_delta, accepted)) {
      if (!out.success) {
        if (accepted) delta = std::move(prop_delta);
        out.delta = delta;
      }
      break;
    }
    if (accepted) {
      pixels = std::move(prop_pixels);
      in_set = std::move(prop_in);
      delta = std::move(prop_delta);
      out.delta = delta;
    }
  }
  if (!out.success) out.delta = delta;
  out.pixel_l0 = pixel_l0(out.delta);
  return out;
}

AttackOutcome rs_structured(const LogitsFn& logits_fn, const Tensor& x, int label,
                            const RsConfig& cfg) {
  const GroupSpec& spec = *cfg.spec;
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int cells = spec.grid_h * spec.grid_w;
  AttackOutcome out;
  out.delta = Tensor({h, w, c});
  out.grid_mask = Tensor({spec.grid_h, spec.grid_w});

  auto finish = [&](AttackOutcome& o, const std::vector<int>& positions) {
    Tensor v({spec.grid_h, spec.grid_w});
    for (int pos : positions) v[pos] = 1.0;
    o.grid_mask = v;
    o.group_mask_l0 = static_cast<int>(positions.size());
    o.pixel_l0 = pixel_l0(o.delta);
    Tensor mask({spec.h, spec.w});
    for (int i = 0; i < spec.h; ++i)
      for (int j = 0; j < spec.w; ++j)
        for (int ch = 0; ch < c; ++ch)
          if (o.delta.at3(i, j, ch) != 0.0) {
            mask.at2(i, j) = 1.0;
            break;
          }
    o.group_l0 = approx_group_l0(mask, v, spec);
  };

  if (argmax_vec(logits_fn(x)) != label) {
    out.success = true;
    finish(out, {});
    return out;
  }

  RngStream rng(cfg.seed);
  const int budget = std::min(cfg.eps, cells);

  std::vector<int> order(static_cast<size_t>(cells));
  for (int i = 0; i < cells; ++i) order[static_cast<size_t>(i)] = i;
  for (int i = 0; i < budget; ++i)
    std::swap(order[static_cast<size_t>(i)],
              order[static_cast<size_t>(i + rng.uniform_int(cells - i))]);
  std::vector<int> positions(order.begin(), order.begin() + budget);
  std::vector<char> in_set(static_cast<size_t>(cells), 0);
  for (int p : positions) in_set[static_cast<size_t>(p)] = 1;

  auto expand_positions = [&](const std::vector<int>& pos) {
    Tensor v({spec.grid_h, spec.grid_w});
    for (int p : pos) v[p] = 1.0;
    return expand_group_mask(v, spec);
  };

  // Corner targets for masked pixels; pixels keep their target when the mask
  // keeps covering them.
  Tensor target({h, w, c});
  auto redraw_region = [&](Tensor& tgt, const Tensor& mask) {
    for (int i = 0; i < spec.h; ++i)
      for (int j = 0; j < spec.w; ++j) {
        if (mask.at3(i, j, 0) == 0.0) continue;
        for (int ch = 0; ch < c; ++ch) tgt.at3(i, j, ch) = rng.uniform() < 0.5 ? 0.0 : 1.0;
      }
  };
  auto build_delta = [&](const Tensor& mask, const Tensor& tgt) {
    Tensor d({h, w, c});
    for (int i = 0; i < spec.h; ++i)
      for (int j = 0; j < spec.w; ++j) {
        if (mask.at3(i, j, 0) == 0.0) continue;
        for (int ch = 0; ch < c; ++ch) {
          const double xv = x.at3(i, j, ch);
          d.at3(i, j, ch) = clip_magnitude(xv, tgt.at3(i, j, ch) - xv, cfg.eps_inf);
        }
      }
    return d;
  };

  Tensor mask = expand_positions(positions);
  redraw_region(target, mask);
  Tensor delta = build_delta(mask, target);

  SearchDriver drv{logits_fn, x, label, cfg, out};
  drv.best_loss = -1e300;
  bool accepted = false;
  out.delta = delta;
  if (drv.evaluate(delta, accepted)) {
    if (!out.success) out.delta = delta;
    finish(out, positions);
    return out;
  }

  std::vector<int> mask_pixels;
  auto collect_mask_pixels = [&](const Tensor& msk) {
    mask_pixels.clear();
    for (int i = 0; i < spec.h; ++i)
      for (int j = 0; j < spec.w; ++j)
        if (msk.at3(i, j, 0) != 0.0) mask_pixels.push_back(i * spec.w + j);
  };
  collect_mask_pixels(mask);

  while (out.iterations < cfg.max_queries) {
    std::vector<int> prop_positions = positions;
    std::vector<char> prop_in = in_set;
    Tensor prop_target = target;

    const bool move = cells > budget && rng.uniform() < 0.5;
    if (move) {
      const int victim_idx = rng.uniform_int(static_cast<int>(prop_positions.size()));
      const int victim = prop_positions[static_cast<size_t>(victim_idx)];
      prop_in[static_cast<size_t>(victim)] = 0;
      int cand = rng.uniform_int(cells);
      while (prop_in[static_cast<size_t>(cand)]) cand = rng.uniform_int(cells);
      prop_in[static_cast<size_t>(cand)] = 1;
      prop_positions[static_cast<size_t>(victim_idx)] = cand;
      Tensor one({spec.grid_h, spec.grid_w});
      one[cand] = 1.0;
      redraw_region(prop_target, expand_group_mask(one, spec));
    } else {
      const double frac = rs_schedule(out.iterations, cfg.max_queries, cfg.alpha_init);
      const int k = std::max(
          1, std::min(static_cast<int>(mask_pixels.size()),
                      static_cast<int>(std::ceil(frac * static_cast<double>(mask_pixels.size())))));
      for (int t = 0; t < k; ++t) {
        const int pix = mask_pixels[static_cast<size_t>(
            rng.uniform_int(static_cast<int>(mask_pixels.size())))];
        const int i = pix / spec.w, j = pix % spec.w;
        for (int ch = 0; ch < c; ++ch)
          prop_target.at3(i, j, ch) = rng.uniform() < 0.5 ? 0.0 : 1.0;
      }
    }

    Tensor prop_mask = expand_positions(prop_positions);
    Tensor prop_delta = build_delta(prop_mask, prop_target);
    out.violations += static_cast<int>(prop_positions.size()) > cfg.eps ? 1 : 0;
    out.violations += box_violations(prop_delta, x, cfg.eps_inf);

    if (drv.evaluate(prop_delta, accepted)) {
      if (out.success) {
        positions = prop_positions;
      } else {
        if (accepted) {
          delta = std::move(prop_delta);
          positions = std::move(prop_positions);
        }
        out.delta = delta;
      }
      break;
    }
    if (accepted) {
      positions = std::move(prop_positions);
      in_set = std::move(prop_in);
      target = std::move(prop_target);
      mask = std::move(prop_mask);
      delta = std::move(prop_delta);
      collect_mask_pixels(mask);
      out.delta = delta;
    }
  }
  if (!out.success) out.delta = delta;
  finish(out, positions);
  return out;
}

}  // namespace

AttackOutcome rs_attack(const LogitsFn& logits_fn, const Tensor& x, int label,
                        const RsConfig& cfg) {
  if (x.rank() != 3) throw std::invalid_argument("rs_attack: x must be [h,w,c]");
  if (cfg.spec) {
    if (cfg.spec->h != x.dim(0) || cfg.spec->w != x.dim(1))
      throw std::invalid_argument("rs_attack: spec dims do not match image");
    return rs_structured(logits_fn, x, label, cfg);
  }
  return rs_unstructured(logits_fn, x, label, cfg);
}

}  // namespace spalab
