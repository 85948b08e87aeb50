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

#include "spalab/group.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace spalab {

namespace {

void validate_kernel(const Tensor& k) {
  if (k.rank() != 2) throw std::invalid_argument("group kernel must be rank-2");
  bool any = false;
  for (int64_t i = 0; i < k.size(); ++i) {
    if (k[i] != 0.0 && k[i] != 1.0)
      throw std::invalid_argument("group kernel entries must be 0 or 1");
    any = any || k[i] == 1.0;
  }
  if (!any) throw std::invalid_argument("group kernel must have a non-zero entry");
}

const Tensor& as_hw(const Tensor& m, const GroupSpec& spec, const char* what) {
  if (!((m.rank() == 2 && m.dim(0) == spec.h && m.dim(1) == spec.w) ||
        (m.rank() == 3 && m.dim(0) == spec.h && m.dim(1) == spec.w && m.dim(2) == 1)))
    throw std::invalid_argument(std::string(what) + ": pixel mask must be [h,w] or [h,w,1]");
  return m;
}

inline double mask_at(const Tensor& m, int i, int j) {
  return m.rank() == 2 ? m.at2(i, j) : m.at3(i, j, 0);
}

void check_grid(const Tensor& v, const GroupSpec& spec, const char* what) {
  if (v.rank() != 2 || v.dim(0) != spec.grid_h || v.dim(1) != spec.grid_w)
    throw std::invalid_argument(std::string(what) + ": group mask must match grid " +
                                std::to_string(spec.grid_h) + "x" + std::to_string(spec.grid_w));
}

}  // namespace

GroupSpec GroupSpec::from_kernel(Tensor kernel, int h, int w, int stride, std::string name) {
  validate_kernel(kernel);
  if (stride < 1) throw std::invalid_argument("group stride must be >= 1");
  const int r = kernel.dim(0), rw = kernel.dim(1);
  if (r > h || rw > w) throw std::invalid_argument("group kernel larger than image");
  GroupSpec s;
  s.kind = Kind::kKernel;
  s.kernel = std::move(kernel);
  s.stride = stride;
  s.h = h;
  s.w = w;
  s.grid_h = (h - r) / stride + 1;
  s.grid_w = (w - rw) / stride + 1;
  s.name = std::move(name);
  return s;
}

GroupSpec GroupSpec::patch(int r, int h, int w, int stride) {
  return from_kernel(Tensor::full({r, r}, 1.0), h, w, stride,
                     "patch" + std::to_string(r) + "x" + std::to_string(r));
}

GroupSpec GroupSpec::pixel(int h, int w) {
  GroupSpec s = from_kernel(Tensor::full({1, 1}, 1.0), h, w, 1, "pixel");
  return s;
}

GroupSpec GroupSpec::row(int h, int w) {
  GroupSpec s;
  s.kind = Kind::kRow;
  s.h = h;
  s.w = w;
  s.grid_h = h;
  s.grid_w = 1;
  s.name = "row";
  return s;
}

GroupSpec GroupSpec::column(int h, int w) {
  GroupSpec s;
  s.kind = Kind::kColumn;
  s.h = h;
  s.w = w;
  s.grid_h = 1;
  s.grid_w = w;
  s.name = "column";
  return s;
}

GroupSpec GroupSpec::from_file(const std::string& path, int h, int w, int stride) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("pattern file: cannot open " + path);
  int r = 0, c = 0;
  if (!(in >> r >> c) || r < 1 || c < 1)
    throw std::runtime_error("pattern file: bad header, expected \"r c\"");
  Tensor k({r, c});
  for (int i = 0; i < r * c; ++i) {
    int bit = 0;
    if (!(in >> bit) || (bit != 0 && bit != 1))
      throw std::runtime_error("pattern file: expected " + std::to_string(r * c) + " 0/1 digits");
    k[i] = bit;
  }
  return from_kernel(std::move(k), h, w, stride, path);
}

Tensor expand_group_mask(const Tensor& v, const GroupSpec& spec) {
  check_grid(v, spec, "expand_group_mask");
  for (int64_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0 && v[i] != 1.0)
      throw std::invalid_argument("expand_group_mask: group mask must be binary");

  Tensor m({spec.h, spec.w, 1});
  switch (spec.kind) {
    case GroupSpec::Kind::kKernel: {
      const int r = spec.kernel.dim(0), rw = spec.kernel.dim(1);
      for (int ii = 0; ii < spec.grid_h; ++ii)
        for (int jj = 0; jj < spec.grid_w; ++jj) {
          if (v.at2(ii, jj) == 0.0) continue;
          for (int di = 0; di < r; ++di)
            for (int dj = 0; dj < rw; ++dj)
              if (spec.kernel.at2(di, dj) == 1.0)
                m.at3(ii * spec.stride + di, jj * spec.stride + dj, 0) = 1.0;
        }
      break;
    }
    case GroupSpec::Kind::kRow:
      for (int i = 0; i < spec.h; ++i)
        if (v.at2(i, 0) == 1.0)
          for (int j = 0; j < spec.w; ++j) m.at3(i, j, 0) = 1.0;
      break;
    case GroupSpec::Kind::kColumn:
      for (int j = 0; j < spec.w; ++j)
        if (v.at2(0, j) == 1.0)
          for (int i = 0; i < spec.h; ++i) m.at3(i, j, 0) = 1.0;
      break;
  }
  return m;
}

Tensor group_mask_gradient(const Tensor& g_m_in, const GroupSpec& spec) {
  const Tensor& g_m = as_hw(g_m_in, spec, "group_mask_gradient");
  Tensor g_v({spec.grid_h, spec.grid_w});
  switch (spec.kind) {
    case GroupSpec::Kind::kKernel: {
      const int r = spec.kernel.dim(0), rw = spec.kernel.dim(1);
      for (int ii = 0; ii < spec.grid_h; ++ii)
        for (int jj = 0; jj < spec.grid_w; ++jj) {
          double acc = 0.0;
          for (int di = 0; di < r; ++di)
            for (int dj = 0; dj < rw; ++dj)
              acc += mask_at(g_m, ii * spec.stride + di, jj * spec.stride + dj) *
                     spec.kernel.at2(di, dj);
          g_v.at2(ii, jj) = acc;
        }
      break;
    }
    case GroupSpec::Kind::kRow:
      for (int i = 0; i < spec.h; ++i) {
        double acc = 0.0;
        for (int j = 0; j < spec.w; ++j) acc += mask_at(g_m, i, j);
        g_v.at2(i, 0) = acc;
      }
      break;
    case GroupSpec::Kind::kColumn:
      for (int j = 0; j < spec.w; ++j) {
        double acc = 0.0;
        for (int i = 0; i < spec.h; ++i) acc += mask_at(g_m, i, j);
        g_v.at2(0, j) = acc;
      }
      break;
  }
  return g_v;
}

Tensor soft_expand_group_mask(const Tensor& sv, const GroupSpec& spec) {
  check_grid(sv, spec, "soft_expand_group_mask");
  Tensor m({spec.h, spec.w});
  switch (spec.kind) {
    case GroupSpec::Kind::kKernel: {
      const int r = spec.kernel.dim(0), rw = spec.kernel.dim(1);
      // Gather per output cell in fixed (di, dj) order.
      for (int i = 0; i < spec.h; ++i)
        for (int j = 0; j < spec.w; ++j) {
          double acc = 0.0;
          for (int di = 0; di < r; ++di) {
            const int ti = i - di;
            if (ti < 0 || ti % spec.stride != 0) continue;
            const int ii = ti / spec.stride;
            if (ii >= spec.grid_h) continue;
            for (int dj = 0; dj < rw; ++dj) {
              const int tj = j - dj;
              if (tj < 0 || tj % spec.stride != 0) continue;
              const int jj = tj / spec.stride;
              if (jj >= spec.grid_w) continue;
              acc += sv.at2(ii, jj) * spec.kernel.at2(di, dj);
            }
          }
          m.at2(i, j) = std::min(acc, 1.0);
        }
      break;
    }
    case GroupSpec::Kind::kRow:
      for (int i = 0; i < spec.h; ++i)
        for (int j = 0; j < spec.w; ++j) m.at2(i, j) = std::min(sv.at2(i, 0), 1.0);
      break;
    case GroupSpec::Kind::kColumn:
      for (int i = 0; i < spec.h; ++i)
        for (int j = 0; j < spec.w; ++j) m.at2(i, j) = std::min(sv.at2(0, j), 1.0);
      break;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Exact group l0 (minimum cover) by branch and bound.

namespace {

struct CoverBits {
  std::vector<uint64_t> words;
  void resize(int bits) { words.assign((static_cast<size_t>(bits) + 63) / 64, 0); }
  void set(int i) { words[static_cast<size_t>(i) / 64] |= 1ULL << (i % 64); }
  bool covers_all(const CoverBits& full) const {
    for (size_t i = 0; i < words.size(); ++i)
      if ((words[i] & full.words[i]) != full.words[i]) return false;
    return true;
  }
};

int popcount_words(const std::vector<uint64_t>& w) {
  int c = 0;
  for (uint64_t x : w) c += __builtin_popcountll(x);
  return c;
}

struct CoverProblem {
  int n_pixels = 0;
  std::vector<CoverBits> candidates;
  CoverBits full;
  int max_group = 1;
  int best = 0;

  void search(std::vector<uint64_t>& covered, int depth) {
    // Lower bound: remaining pixels / largest group size.
    int uncovered = 0;
    for (size_t i = 0; i < covered.size(); ++i)
      uncovered += __builtin_popcountll(full.words[i] & ~covered[i]);
    if (uncovered == 0) {
      best = std::min(best, depth);
      return;
    }
    if (depth + (uncovered + max_group - 1) / max_group >= best) return;

    // Branch on the uncovered pixel with the fewest covering candidates.
    int pick = -1, pick_count = 0;
    for (int px = 0; px < n_pixels; ++px) {
      if (covered[static_cast<size_t>(px) / 64] >> (px % 64) & 1ULL) continue;
      int cnt = 0;
      for (const auto& cand : candidates)
        if (cand.words[static_cast<size_t>(px) / 64] >> (px % 64) & 1ULL) ++cnt;
      if (pick < 0 || cnt < pick_count) {
        pick = px;
        pick_count = cnt;
      }
    }
    for (size_t ci = 0; ci < candidates.size(); ++ci) {
      const auto& cand = candidates[ci];
      if (!(cand.words[static_cast<size_t>(pick) / 64] >> (pick % 64) & 1ULL)) continue;
      std::vector<uint64_t> next = covered;
      for (size_t i = 0; i < next.size(); ++i) next[i] |= cand.words[i];
      search(next, depth + 1);
    }
  }
};

// Cells covered by grid position (ii, jj).
std::vector<std::pair<int, int>> group_cells(const GroupSpec& spec, int ii, int jj) {
  std::vector<std::pair<int, int>> cells;
  switch (spec.kind) {
    case GroupSpec::Kind::kKernel: {
      const int r = spec.kernel.dim(0), rw = spec.kernel.dim(1);
      for (int di = 0; di < r; ++di)
        for (int dj = 0; dj < rw; ++dj)
          if (spec.kernel.at2(di, dj) == 1.0)
            cells.emplace_back(ii * spec.stride + di, jj * spec.stride + dj);
      break;
    }
    case GroupSpec::Kind::kRow:
      for (int j = 0; j < spec.w; ++j) cells.emplace_back(ii, j);
      break;
    case GroupSpec::Kind::kColumn:
      for (int i = 0; i < spec.h; ++i) cells.emplace_back(i, jj);
      break;
  }
  return cells;
}

}  // namespace

int exact_group_l0(const Tensor& pixel_mask_in, const GroupSpec& spec, int cap) {
  const Tensor& mask = as_hw(pixel_mask_in, spec, "exact_group_l0");

  std::vector<int> pixel_id(static_cast<size_t>(spec.h) * spec.w, -1);
  int n_pixels = 0;
  for (int i = 0; i < spec.h; ++i)
    for (int j = 0; j < spec.w; ++j)
      if (mask_at(mask, i, j) != 0.0) pixel_id[static_cast<size_t>(i) * spec.w + j] = n_pixels++;
  if (n_pixels == 0) return 0;

  CoverProblem prob;
  prob.n_pixels = n_pixels;
  prob.full.resize(n_pixels);
  for (int i = 0; i < n_pixels; ++i) prob.full.set(i);

  for (int ii = 0; ii < spec.grid_h; ++ii)
    for (int jj = 0; jj < spec.grid_w; ++jj) {
      CoverBits bits;
      bits.resize(n_pixels);
      bool any = false;
      for (const auto& [ci, cj] : group_cells(spec, ii, jj)) {
        const int id = pixel_id[static_cast<size_t>(ci) * spec.w + cj];
        if (id >= 0) {
          bits.set(id);
          any = true;
        }
      }
      if (any) {
        prob.max_group = std::max(prob.max_group, popcount_words(bits.words));
        prob.candidates.push_back(std::move(bits));
      }
    }

  // Feasibility: every perturbed pixel reachable by some candidate.
  {
    std::vector<uint64_t> reach(prob.full.words.size(), 0);
    for (const auto& cand : prob.candidates)
      for (size_t i = 0; i < reach.size(); ++i) reach[i] |= cand.words[i];
    for (size_t i = 0; i < reach.size(); ++i)
      if ((reach[i] & prob.full.words[i]) != prob.full.words[i])
        throw InfeasibleCoverError("exact_group_l0: a perturbed pixel is not coverable");
  }

  // Greedy incumbent.
  int greedy = 0;
  {
    std::vector<uint64_t> covered(prob.full.words.size(), 0);
    while (true) {
      int uncovered = 0;
      for (size_t i = 0; i < covered.size(); ++i)
        uncovered += __builtin_popcountll(prob.full.words[i] & ~covered[i]);
      if (uncovered == 0) break;
      int best_gain = 0;
      size_t best_ci = 0;
      for (size_t ci = 0; ci < prob.candidates.size(); ++ci) {
        int gain = 0;
        for (size_t i = 0; i < covered.size(); ++i)
          gain += __builtin_popcountll(prob.candidates[ci].words[i] & prob.full.words[i] &
                                       ~covered[i]);
        if (gain > best_gain) {
          best_gain = gain;
          best_ci = ci;
        }
      }
      for (size_t i = 0; i < covered.size(); ++i)
        covered[i] |= prob.candidates[best_ci].words[i];
      ++greedy;
    }
  }

  prob.best = std::min(greedy, cap + 1);
  std::vector<uint64_t> covered(prob.full.words.size(), 0);
  prob.search(covered, 0);

  if (prob.best > cap)
    throw CoverCapExceededError("exact_group_l0: minimum cover exceeds cap " +
                                std::to_string(cap));
  return prob.best;
}

int approx_group_l0(const Tensor& pixel_mask_in, const Tensor& v, const GroupSpec& spec) {
  const Tensor& mask = as_hw(pixel_mask_in, spec, "approx_group_l0");
  check_grid(v, spec, "approx_group_l0");

  // Coverage precondition: v must cover every non-zero pixel.
  Tensor covered = expand_group_mask(v, spec);
  for (int i = 0; i < spec.h; ++i)
    for (int j = 0; j < spec.w; ++j)
      if (mask_at(mask, i, j) != 0.0 && covered.at3(i, j, 0) == 0.0)
        throw std::invalid_argument("approx_group_l0: v does not cover all non-zero pixels");

  int count = 0;
  for (int ii = 0; ii < spec.grid_h; ++ii)
    for (int jj = 0; jj < spec.grid_w; ++jj) {
      if (v.at2(ii, jj) == 0.0) continue;
      bool hit = false;
      for (const auto& [ci, cj] : group_cells(spec, ii, jj))
        if (mask_at(mask, ci, cj) != 0.0) {
          hit = true;
          break;
        }
      count += hit ? 1 : 0;
    }
  return count;
}

}  // namespace spalab
