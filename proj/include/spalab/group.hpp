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

#ifndef SPALAB_GROUP_HPP
#define SPALAB_GROUP_HPP

#include <stdexcept>
#include <string>

#include "spalab/tensor.hpp"

namespace spalab {

/// Structured-sparsity group family over an h x w image: a binary pattern
/// kernel stamped on a position grid, or the degenerate row/column families
/// (disjoint groups, 1-D grid).
struct GroupSpec {
  enum class Kind { kKernel, kRow, kColumn };

  Kind kind = Kind::kKernel;
  Tensor kernel;  // [r,r] binary, at least one non-zero entry (kKernel only)
  int stride = 1;
  int h = 0, w = 0;        // image dims
  int grid_h = 0, grid_w = 0;
  std::string name;

  static GroupSpec patch(int r, int h, int w, int stride = 1);
  static GroupSpec pixel(int h, int w);  // 1x1 kernel; degenerates to unstructured
  static GroupSpec row(int h, int w);
  static GroupSpec column(int h, int w);
  static GroupSpec from_kernel(Tensor kernel, int h, int w, int stride = 1,
                               std::string name = "pattern");
  /// Plain-text grid file: first line "r c", then r lines of c 0/1 digits.
  static GroupSpec from_file(const std::string& path, int h, int w, int stride = 1);
};

struct InfeasibleCoverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CoverCapExceededError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// m = min(TConv(v, k, s), 1): union of kernels stamped at the selected grid
/// positions, as a binary [h,w,1] mask. Rows/columns expand their 1-D grid
/// directly.
Tensor expand_group_mask(const Tensor& v, const GroupSpec& spec);

/// Backward of the expansion with the clipping ignored: g_v = Conv(g_m, k, s)
/// on the group grid.
Tensor group_mask_gradient(const Tensor& g_m, const GroupSpec& spec);

/// Soft expansion used by the unprojected backward mode:
/// min(TConv(sv, k, s), 1) for real-valued sv.
Tensor soft_expand_group_mask(const Tensor& sv, const GroupSpec& spec);

/// Group l0 norm: minimal number of group positions whose stamped union
/// covers every non-zero pixel, by exhaustive branch-and-bound over the
/// candidate positions (those covering at least one perturbed pixel).
/// Throws InfeasibleCoverError for unreachable pixels and
/// CoverCapExceededError when the minimum exceeds `cap`.
int exact_group_l0(const Tensor& pixel_mask, const GroupSpec& spec, int cap = 8);

/// Approximated group l0 norm: the number of selected groups whose covered
/// region contains a non-zero pixel. Requires v to cover every non-zero
/// pixel of the mask.
int approx_group_l0(const Tensor& pixel_mask, const Tensor& v, const GroupSpec& spec);

}  // namespace spalab

#endif  // SPALAB_GROUP_HPP
