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

#include "spalab/spgd_structured.hpp"

#include <cmath>

#include "spalab/rng.hpp"

namespace spalab {

namespace {

struct GroupSpace final : detail::MaskSpace {
  const GroupSpec& spec;
  explicit GroupSpace(const GroupSpec& s) : spec(s) {}
  int grid_h() const override { return spec.grid_h; }
  int grid_w() const override { return spec.grid_w; }
  Tensor expand(const Tensor& v) const override {
    return expand_group_mask(v, spec).reshaped({spec.h, spec.w});
  }
  Tensor soft_expand(const Tensor& sv) const override {
    return soft_expand_group_mask(sv, spec);
  }
  Tensor reduce(const Tensor& gm) const override { return group_mask_gradient(gm, spec); }
};

Tensor delta_pixel_mask(const Tensor& delta) {
  const int h = delta.dim(0), w = delta.dim(1), c = delta.dim(2);
  Tensor m({h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int ch = 0; ch < c; ++ch)
        if (delta.at3(i, j, ch) != 0.0) {
          m.at2(i, j) = 1.0;
          break;
        }
  return m;
}

}  // namespace

AttackOutcome spgd_structured_attack(const Model& model, const Tensor& x, int label,
                                     const GroupSpec& spec, const SpgdConfig& cfg) {
  if (x.rank() != 3) throw std::invalid_argument("spgd_structured_attack: x must be [h,w,c]");
  if (spec.h != x.dim(0) || spec.w != x.dim(1))
    throw std::invalid_argument("spgd_structured_attack: spec dims do not match image");
  SpgdConfig rc = cfg;
  if (rc.alpha < 0.0) rc.alpha = 0.0125 * rc.eps_inf;
  if (rc.beta < 0.0) rc.beta = 0.0125 * std::sqrt(static_cast<double>(x.dim(0)) * x.dim(1));
  if (rc.tolerance < 0) rc.tolerance = 50;

  GroupSpace space(spec);
  AttackOutcome out = detail::spgd_engine(model, x, label, rc, space);

  int ones = 0;
  for (int64_t i = 0; i < out.grid_mask.size(); ++i) ones += out.grid_mask[i] == 1.0 ? 1 : 0;
  out.group_mask_l0 = ones;
  out.group_l0 = approx_group_l0(delta_pixel_mask(out.delta), out.grid_mask, spec);
  return out;
}

std::vector<RatioRow> ratio_simulation(const GroupSpec& spec, int eps_min, int eps_max,
                                       int n_samples, uint64_t seed, int cap) {
  const int cells = spec.grid_h * spec.grid_w;
  std::vector<RatioRow> rows;
  for (int eps = eps_min; eps <= eps_max; ++eps) {
    RatioRow row;
    row.eps = eps;
    if (eps > cells) {
      row.skipped = true;
      rows.push_back(row);
      continue;
    }
    double sum = 0.0, sum_sq = 0.0;
    int done = 0;
    for (int s = 0; s < n_samples && !row.skipped; ++s) {
      RngStream rng(mix_seed({seed, static_cast<uint64_t>(eps), static_cast<uint64_t>(s)}));
      std::vector<int> cells_idx(static_cast<size_t>(cells));
      for (int i = 0; i < cells; ++i) cells_idx[static_cast<size_t>(i)] = i;
      for (int i = 0; i < eps; ++i)
        std::swap(cells_idx[static_cast<size_t>(i)],
                  cells_idx[static_cast<size_t>(i + rng.uniform_int(cells - i))]);
      Tensor v({spec.grid_h, spec.grid_w});
      for (int i = 0; i < eps; ++i) v[cells_idx[static_cast<size_t>(i)]] = 1.0;

      const Tensor mask = expand_group_mask(v, spec);
      const int approx = approx_group_l0(mask, v, spec);
      try {
        const int exact = exact_group_l0(mask, spec, cap);
        const double ratio = static_cast<double>(exact) / approx;
        sum += ratio;
        sum_sq += ratio * ratio;
        ++done;
      } catch (const CoverCapExceededError&) {
        row.skipped = true;
      }
    }
    if (!row.skipped && done > 0) {
      row.samples = done;
      row.mean_ratio = sum / done;
      const double var = std::max(0.0, sum_sq / done - row.mean_ratio * row.mean_ratio);
      row.std_ratio = std::sqrt(var);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace spalab
