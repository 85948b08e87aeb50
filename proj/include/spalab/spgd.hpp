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

#ifndef SPALAB_SPGD_HPP
#define SPALAB_SPGD_HPP

#include <cstdint>

#include "spalab/attack_types.hpp"
#include "spalab/model.hpp"
#include "spalab/tensor.hpp"

namespace spalab {

/// Sparse-PGD configuration. Negative alpha/beta/tolerance select the
/// defaults of the attack flavor: 0.25*eps_inf / 0.25*sqrt(h*w) / 3 for the
/// unstructured attack, 0.0125*eps_inf / 0.0125*sqrt(h*w) / 50 for the
/// structured one.
struct SpgdConfig {
  int eps = 10;           // pixel budget (group budget for the structured attack)
  double eps_inf = 1.0;   // l-inf bound on the magnitude; < 1 is watermark mode
  double alpha = -1.0;    // magnitude step
  double beta = -1.0;     // continuous-mask step
  int iters = 300;        // T
  int tolerance = -1;     // t, reinitialization tolerance
  double gamma = 2e-8;    // skip mask steps below this gradient norm
  BackwardMode mode = BackwardMode::kUnprojected;
  uint64_t seed = 0;
  bool trace = false;     // record per-iteration state digests
};

// Single update steps of the attack, exposed for direct testing.

/// p' = proj(p + alpha * sign(g)); the projection clips elementwise to
/// [max(-x,-eps_inf), min(1-x,eps_inf)], with sign(0) = 0.
Tensor update_magnitude(const Tensor& p, const Tensor& grad_p, double alpha, const Tensor& x,
                        double eps_inf);

/// Binary mask with exactly min(eps, size) ones at the largest values of
/// sigmoid(m_tilde); ties broken by lowest linear index. Shape-preserving.
Tensor project_mask(const Tensor& m_tilde, int eps);

/// m_tilde + beta * g/||g||2 when ||g||2 >= gamma, unchanged otherwise.
Tensor update_continuous_mask(const Tensor& m_tilde, const Tensor& grad, double beta,
                              double gamma);

/// Continuous-mask gradient: sigma'(m_tilde) times the channel sum of
/// grad_delta ⊙ p, as [h,w,1].
Tensor mask_gradient(const Tensor& grad_delta, const Tensor& p, const Tensor& m_tilde);

/// Magnitude gradient: grad_delta ⊙ m (projected) or grad_delta ⊙
/// sigmoid(m_tilde) (unprojected), masks broadcast over channels.
Tensor magnitude_gradient(const Tensor& grad_delta, const Tensor& m, const Tensor& m_tilde,
                          BackwardMode mode);

/// Sparse-PGD for l0-bounded pixel perturbations. Returns the first
/// misclassifying delta = p ⊙ m found within cfg.iters model evaluations,
/// else the last iterate with success = false. Inputs misclassified before
/// any perturbation report success with zero iterations and delta = 0.
AttackOutcome spgd_attack(const Model& model, const Tensor& x, int label, const SpgdConfig& cfg);

namespace detail {

/// Mapping between the optimized grid mask and the pixel mask. The pixel
/// space is the identity; the group space stamps a pattern kernel. Both
/// attacks share one engine through this interface, which is what makes the
/// 1x1-kernel structured attack reproduce the unstructured one bit-exactly.
struct MaskSpace {
  virtual ~MaskSpace() = default;
  virtual int grid_h() const = 0;
  virtual int grid_w() const = 0;
  virtual Tensor expand(const Tensor& v) const = 0;       // binary grid -> [h,w]
  virtual Tensor soft_expand(const Tensor& sv) const = 0; // real grid -> [h,w]
  virtual Tensor reduce(const Tensor& gm) const = 0;      // [h,w] -> grid
};

AttackOutcome spgd_engine(const Model& model, const Tensor& x, int label, const SpgdConfig& cfg,
                          const MaskSpace& space);

}  // namespace detail

}  // namespace spalab

#endif  // SPALAB_SPGD_HPP
