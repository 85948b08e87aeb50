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

#include "spalab/spgd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spalab/rng.hpp"

namespace spalab {

namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tensor update_magnitude(const Tensor& p, const Tensor& grad_p, double alpha, const Tensor& x,
                        double eps_inf) {
  require_same_shape(p, grad_p, "update_magnitude");
  require_same_shape(p, x, "update_magnitude");
  Tensor out = p;
  for (int64_t i = 0; i < p.size(); ++i)
    out[i] = clip_magnitude(x[i], p[i] + alpha * sign(grad_p[i]), eps_inf);
  return out;
}

Tensor project_mask(const Tensor& m_tilde, int eps) {
  const int64_t n = m_tilde.size();
  const int64_t keep = std::min<int64_t>(eps, n);
  std::vector<double> s(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) s[static_cast<size_t>(i)] = sigmoid(m_tilde[i]);
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                    [&](int64_t a, int64_t b) {
                      const double sa = s[static_cast<size_t>(a)], sb = s[static_cast<size_t>(b)];
                      return sa != sb ? sa > sb : a < b;
                    });
  Tensor m(m_tilde.shape());
  for (int64_t i = 0; i < keep; ++i) m[order[static_cast<size_t>(i)]] = 1.0;
  return m;
}

Tensor update_continuous_mask(const Tensor& m_tilde, const Tensor& grad, double beta,
                              double gamma) {
  require_same_shape(m_tilde, grad, "update_continuous_mask");
  double norm_sq = 0.0;
  for (int64_t i = 0; i < grad.size(); ++i) norm_sq += grad[i] * grad[i];
  const double norm = std::sqrt(norm_sq);
  if (norm < gamma) return m_tilde;
  Tensor out = m_tilde;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += beta * grad[i] / norm;
  return out;
}

Tensor mask_gradient(const Tensor& grad_delta, const Tensor& p, const Tensor& m_tilde) {
  require_same_shape(grad_delta, p, "mask_gradient");
  const int h = grad_delta.dim(0), w = grad_delta.dim(1), c = grad_delta.dim(2);
  require_shape(m_tilde, {h, w, 1}, "mask_gradient");
  Tensor g({h, w, 1});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int ch = 0; ch < c; ++ch) acc += grad_delta.at3(i, j, ch) * p.at3(i, j, ch);
      const double s = sigmoid(m_tilde.at3(i, j, 0));
      g.at3(i, j, 0) = acc * s * (1.0 - s);
    }
  return g;
}

Tensor magnitude_gradient(const Tensor& grad_delta, const Tensor& m, const Tensor& m_tilde,
                          BackwardMode mode) {
  const int h = grad_delta.dim(0), w = grad_delta.dim(1), c = grad_delta.dim(2);
  Tensor g({h, w, c});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double factor = mode == BackwardMode::kProjected
                                ? m.at3(i, j, 0)
                                : sigmoid(m_tilde.at3(i, j, 0));
      for (int ch = 0; ch < c; ++ch) g.at3(i, j, ch) = grad_delta.at3(i, j, ch) * factor;
    }
  return g;
}

namespace detail {

namespace {

struct PixelSpace final : MaskSpace {
  int h, w;
  PixelSpace(int h_, int w_) : h(h_), w(w_) {}
  int grid_h() const override { return h; }
  int grid_w() const override { return w; }
  Tensor expand(const Tensor& v) const override { return v; }
  Tensor soft_expand(const Tensor& sv) const override { return sv; }
  Tensor reduce(const Tensor& gm) const override { return gm; }
};

// Materializes delta = p ⊙ m with m broadcast over channels.
Tensor apply_mask(const Tensor& p, const Tensor& m) {
  const int h = p.dim(0), w = p.dim(1), c = p.dim(2);
  Tensor d({h, w, c});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const double mv = m.at2(i, j);
      for (int ch = 0; ch < c; ++ch) d.at3(i, j, ch) = p.at3(i, j, ch) * mv;
    }
  return d;
}

Tensor add_box_exact(const Tensor& x, const Tensor& d) {
  Tensor out = x;
  for (int64_t i = 0; i < x.size(); ++i) out[i] = x[i] + d[i];
  return out;
}

int64_t feasibility_violations(const Tensor& p, const Tensor& v, int eps, const Tensor& x,
                               double eps_inf) {
  int64_t bad = 0;
  int ones = 0;
  for (int64_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0 && v[i] != 1.0) ++bad;
    ones += v[i] == 1.0 ? 1 : 0;
  }
  if (ones > eps) ++bad;
  for (int64_t i = 0; i < p.size(); ++i) {
    if (std::abs(p[i]) > eps_inf) ++bad;
    const double sum = x[i] + p[i];
    if (sum < 0.0 || sum > 1.0) ++bad;
  }
  return bad;
}

}  // namespace

AttackOutcome spgd_engine(const Model& model, const Tensor& x, int label, const SpgdConfig& cfg,
                          const MaskSpace& space) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int gh = space.grid_h(), gw = space.grid_w();
  AttackOutcome out;
  out.delta = Tensor({h, w, c});
  out.grid_mask = Tensor({gh, gw});

  if (model.predict_class(x) != label) {
    out.success = true;
    return out;
  }

  RngStream rng(cfg.seed);

  Tensor p({h, w, c});
  for (int64_t i = 0; i < p.size(); ++i)
    p[i] = clip_magnitude(x[i], rng.uniform(-cfg.eps_inf, cfg.eps_inf), cfg.eps_inf);
  Tensor mt({gh, gw});
  for (int64_t i = 0; i < mt.size(); ++i) mt[i] = rng.uniform(-1.0, 1.0);

  Tensor v = project_mask(mt, cfg.eps);
  Tensor m = space.expand(v);

  Tensor sig_mt({gh, gw});
  int unchanged = 0;

  for (int it = 1; it <= cfg.iters; ++it) {
    const Tensor delta = apply_mask(p, m);
    const LossEval ev = loss_and_input_grad(model, add_box_exact(x, delta), label);
    out.iterations = it;
    out.final_loss = ev.loss;
    if (ev.pred != label) {
      out.success = true;
      out.delta = delta;
      break;
    }

    for (int64_t i = 0; i < mt.size(); ++i) sig_mt[i] = sigmoid(mt[i]);

    // Backward function for the magnitude.
    Tensor gp({h, w, c});
    if (cfg.mode == BackwardMode::kUnprojected) {
      const Tensor soft = space.soft_expand(sig_mt);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          for (int ch = 0; ch < c; ++ch)
            gp.at3(i, j, ch) = ev.input_grad.at3(i, j, ch) * soft.at2(i, j);
    } else {
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          for (int ch = 0; ch < c; ++ch)
            gp.at3(i, j, ch) = ev.input_grad.at3(i, j, ch) * m.at2(i, j);
    }

    // Continuous-mask gradient: channel-reduced grad ⊙ p mapped onto the
    // grid, times sigma'.
    Tensor gm_pixel({h, w});
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double acc = 0.0;
        for (int ch = 0; ch < c; ++ch) acc += ev.input_grad.at3(i, j, ch) * p.at3(i, j, ch);
        gm_pixel.at2(i, j) = acc;
      }
    Tensor g_grid = space.reduce(gm_pixel);
    for (int64_t i = 0; i < g_grid.size(); ++i)
      g_grid[i] *= sig_mt[i] * (1.0 - sig_mt[i]);

    p = update_magnitude(p, gp, cfg.alpha, x, cfg.eps_inf);
    mt = update_continuous_mask(mt, g_grid, cfg.beta, cfg.gamma);

    const Tensor v_old = v;
    v = project_mask(mt, cfg.eps);
    m = space.expand(v);

    bool changed = false;
    for (int64_t i = 0; i < v.size() && !changed; ++i) changed = v[i] != v_old[i];
    unchanged = changed ? 0 : unchanged + 1;
    if (unchanged >= cfg.tolerance) {
      // Reinitialization redraws the continuous mask only; p is kept. The
      // binary mask is reprojected immediately so the projection invariant
      // m = proj(sigma(m_tilde)) holds on every iteration.
      for (int64_t i = 0; i < mt.size(); ++i) mt[i] = rng.uniform(-1.0, 1.0);
      v = project_mask(mt, cfg.eps);
      m = space.expand(v);
      unchanged = 0;
      ++out.reinits;
    }

    out.violations += feasibility_violations(p, v, cfg.eps, x, cfg.eps_inf);
    if (cfg.trace) {
      uint64_t d = tensor_digest(p);
      d = tensor_digest(mt, d);
      d = tensor_digest(v, d);
      out.trace.push_back(d);
    }
    if (!out.success && it == cfg.iters) out.delta = apply_mask(p, m);
  }

  out.grid_mask = v;
  out.pixel_l0 = pixel_l0(out.delta);
  return out;
}

}  // namespace detail

AttackOutcome spgd_attack(const Model& model, const Tensor& x, int label, const SpgdConfig& cfg) {
  if (x.rank() != 3) throw std::invalid_argument("spgd_attack: x must be [h,w,c]");
  SpgdConfig rc = cfg;
  if (rc.alpha < 0.0) rc.alpha = 0.25 * rc.eps_inf;
  if (rc.beta < 0.0) rc.beta = 0.25 * std::sqrt(static_cast<double>(x.dim(0)) * x.dim(1));
  if (rc.tolerance < 0) rc.tolerance = 3;
  detail::PixelSpace space(x.dim(0), x.dim(1));
  return detail::spgd_engine(model, x, label, rc, space);
}

}  // namespace spalab
