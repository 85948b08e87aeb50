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

#include "spalab/kernels.hpp"

#include <stdexcept>

namespace spalab {

namespace {

void check_conv_dims(int h, int w, int r, int rw, int stride) {
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (r > h || rw > w) throw std::invalid_argument("conv2d: kernel larger than input");
}

inline int out_dim(int in, int r, int stride) { return (in - r) / stride + 1; }

}  // namespace

Tensor conv2d_nhwc(const Tensor& x, const Tensor& k, int stride) {
  if (x.rank() != 4 || k.rank() != 4)
    throw std::invalid_argument("conv2d_nhwc: expects x[n,h,w,ci], k[r,r,ci,co]");
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), ci = x.dim(3);
  const int r = k.dim(0), rw = k.dim(1), co = k.dim(3);
  if (k.dim(2) != ci) throw std::invalid_argument("conv2d_nhwc: channel mismatch");
  check_conv_dims(h, w, r, rw, stride);
  const int oh = out_dim(h, r, stride), ow = out_dim(w, rw, stride);

  Tensor y({n, oh, ow, co});
  const double* xd = x.data();
  const double* kd = k.data();
  double* yd = y.data();

#pragma omp parallel for schedule(static)
  for (int64_t noi = 0; noi < static_cast<int64_t>(n) * oh; ++noi) {
    const int ni = static_cast<int>(noi / oh);
    const int oi = static_cast<int>(noi % oh);
    for (int oj = 0; oj < ow; ++oj) {
      double* out = yd + ((static_cast<int64_t>(ni) * oh + oi) * ow + oj) * co;
      for (int c = 0; c < co; ++c) out[c] = 0.0;
      for (int di = 0; di < r; ++di) {
        const int ii = oi * stride + di;
        for (int dj = 0; dj < rw; ++dj) {
          const int jj = oj * stride + dj;
          const double* xp = xd + ((static_cast<int64_t>(ni) * h + ii) * w + jj) * ci;
          const double* kp = kd + (static_cast<int64_t>(di) * rw + dj) * ci * co;
          for (int c = 0; c < ci; ++c) {
            const double xv = xp[c];
            const double* kc = kp + static_cast<int64_t>(c) * co;
            for (int o = 0; o < co; ++o) out[o] += xv * kc[o];
          }
        }
      }
    }
  }
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& k, int stride) {
  // Single-channel 2-D map with a 2-D kernel.
  if ((x.rank() == 2 || (x.rank() == 3 && x.dim(2) == 1)) && k.rank() == 2) {
    const bool keep3 = x.rank() == 3;
    const int h = x.dim(0), w = x.dim(1);
    const int r = k.dim(0), rw = k.dim(1);
    check_conv_dims(h, w, r, rw, stride);
    const int oh = out_dim(h, r, stride), ow = out_dim(w, rw, stride);
    Tensor y(keep3 ? std::vector<int>{oh, ow, 1} : std::vector<int>{oh, ow});
    const double* xd = x.data();
    const double* kd = k.data();
    double* yd = y.data();
#pragma omp parallel for schedule(static)
    for (int oi = 0; oi < oh; ++oi) {
      for (int oj = 0; oj < ow; ++oj) {
        double acc = 0.0;
        for (int di = 0; di < r; ++di)
          for (int dj = 0; dj < rw; ++dj)
            acc += xd[(oi * stride + di) * static_cast<int64_t>(w) + oj * stride + dj] *
                   kd[di * static_cast<int64_t>(rw) + dj];
        yd[oi * static_cast<int64_t>(ow) + oj] = acc;
      }
    }
    return y;
  }
  if (x.rank() == 3 && k.rank() == 4) {
    Tensor xb = x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
    Tensor y = conv2d_nhwc(xb, k, stride);
    return y.reshaped({y.dim(1), y.dim(2), y.dim(3)});
  }
  if (x.rank() == 4 && k.rank() == 4) return conv2d_nhwc(x, k, stride);
  throw std::invalid_argument("conv2d: unsupported rank combination " +
                              Tensor::shape_str(x.shape()) + " * " +
                              Tensor::shape_str(k.shape()));
}

Tensor tconv2d(const Tensor& v, const Tensor& k, int stride) {
  if (stride < 1) throw std::invalid_argument("tconv2d: stride must be >= 1");
  if (!((v.rank() == 2 || (v.rank() == 3 && v.dim(2) == 1)) && k.rank() == 2))
    throw std::invalid_argument("tconv2d: expects v[a,b], k[r,r]");
  const int a = v.dim(0), b = v.dim(1);
  const int r = k.dim(0), rw = k.dim(1);
  const int oh = (a - 1) * stride + r, ow = (b - 1) * stride + rw;
  Tensor y({oh, ow});
  const double* vd = v.data();
  const double* kd = k.data();
  double* yd = y.data();
  // Gather form: each output cell sums the stamps that reach it, in fixed
  // (di, dj) order, so the parallel loop is deterministic.
#pragma omp parallel for schedule(static)
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (int di = 0; di < r; ++di) {
        const int ti = i - di;
        if (ti < 0 || ti % stride != 0) continue;
        const int ii = ti / stride;
        if (ii >= a) continue;
        for (int dj = 0; dj < rw; ++dj) {
          const int tj = j - dj;
          if (tj < 0 || tj % stride != 0) continue;
          const int jj = tj / stride;
          if (jj >= b) continue;
          acc += vd[ii * static_cast<int64_t>(b) + jj] * kd[di * static_cast<int64_t>(rw) + dj];
        }
      }
      yd[i * static_cast<int64_t>(ow) + j] = acc;
    }
  }
  return y;
}

Tensor conv2d_input_grad(const Tensor& gy, const Tensor& k, int stride, int h, int w) {
  const int n = gy.dim(0), oh = gy.dim(1), ow = gy.dim(2), co = gy.dim(3);
  const int r = k.dim(0), rw = k.dim(1), ci = k.dim(2);
  Tensor gx({n, h, w, ci});
  const double* gd = gy.data();
  const double* kd = k.data();
  double* xd = gx.data();
#pragma omp parallel for schedule(static)
  for (int64_t nij = 0; nij < static_cast<int64_t>(n) * h; ++nij) {
    const int ni = static_cast<int>(nij / h);
    const int i = static_cast<int>(nij % h);
    for (int j = 0; j < w; ++j) {
      double* out = xd + ((static_cast<int64_t>(ni) * h + i) * w + j) * ci;
      for (int c = 0; c < ci; ++c) out[c] = 0.0;
      for (int di = 0; di < r; ++di) {
        const int ti = i - di;
        if (ti < 0 || ti % stride != 0) continue;
        const int oi = ti / stride;
        if (oi >= oh) continue;
        for (int dj = 0; dj < rw; ++dj) {
          const int tj = j - dj;
          if (tj < 0 || tj % stride != 0) continue;
          const int oj = tj / stride;
          if (oj >= ow) continue;
          const double* gp = gd + ((static_cast<int64_t>(ni) * oh + oi) * ow + oj) * co;
          const double* kp = kd + ((static_cast<int64_t>(di) * rw + dj) * ci) * co;
          for (int c = 0; c < ci; ++c) {
            double acc = 0.0;
            const double* kc = kp + static_cast<int64_t>(c) * co;
            for (int o = 0; o < co; ++o) acc += gp[o] * kc[o];
            out[c] += acc;
          }
        }
      }
    }
  }
  return gx;
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, int stride, int r) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), ci = x.dim(3);
  const int oh = gy.dim(1), ow = gy.dim(2), co = gy.dim(3);
  (void)h;
  Tensor gk({r, r, ci, co});
  const double* xd = x.data();
  const double* gd = gy.data();
  double* kd = gk.data();
  // One kernel entry per task; the (n, oi, oj) reduction order is fixed.
#pragma omp parallel for schedule(static)
  for (int64_t idx = 0; idx < gk.size(); ++idx) {
    const int o = static_cast<int>(idx % co);
    const int c = static_cast<int>((idx / co) % ci);
    const int dj = static_cast<int>((idx / (static_cast<int64_t>(co) * ci)) % r);
    const int di = static_cast<int>(idx / (static_cast<int64_t>(co) * ci * r));
    double acc = 0.0;
    for (int ni = 0; ni < n; ++ni)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj)
          acc += xd[((static_cast<int64_t>(ni) * x.dim(1) + oi * stride + di) * w + oj * stride + dj) * ci + c] *
                 gd[((static_cast<int64_t>(ni) * oh + oi) * ow + oj) * co + o];
    kd[idx] = acc;
  }
  return gk;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: bad shapes");
  const int n = a.dim(0), p = a.dim(1), q = b.dim(1);
  Tensor c({n, q});
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double* out = c.data() + static_cast<int64_t>(i) * q;
    for (int j = 0; j < q; ++j) out[j] = 0.0;
    for (int k = 0; k < p; ++k) {
      const double av = a.data()[static_cast<int64_t>(i) * p + k];
      const double* brow = b.data() + static_cast<int64_t>(k) * q;
      for (int j = 0; j < q; ++j) out[j] += av * brow[j];
    }
  }
  return c;
}

Tensor matmul_transA(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
    throw std::invalid_argument("matmul_transA: bad shapes");
  const int n = a.dim(0), p = a.dim(1), q = b.dim(1);
  Tensor c({p, q});
#pragma omp parallel for schedule(static)
  for (int i = 0; i < p; ++i) {
    double* out = c.data() + static_cast<int64_t>(i) * q;
    for (int j = 0; j < q; ++j) out[j] = 0.0;
    for (int k = 0; k < n; ++k) {
      const double av = a.data()[static_cast<int64_t>(k) * p + i];
      const double* brow = b.data() + static_cast<int64_t>(k) * q;
      for (int j = 0; j < q; ++j) out[j] += av * brow[j];
    }
  }
  return c;
}

Tensor matmul_transB(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw std::invalid_argument("matmul_transB: bad shapes");
  const int n = a.dim(0), q = a.dim(1), p = b.dim(0);
  Tensor c({n, p});
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      double acc = 0.0;
      for (int k = 0; k < q; ++k)
        acc += a.data()[static_cast<int64_t>(i) * q + k] * b.data()[static_cast<int64_t>(j) * q + k];
      c.data()[static_cast<int64_t>(i) * p + j] = acc;
    }
  }
  return c;
}

Tensor avgpool2(const Tensor& x) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int oh = h / 2, ow = w / 2;
  Tensor y({n, oh, ow, c});
#pragma omp parallel for schedule(static)
  for (int64_t noi = 0; noi < static_cast<int64_t>(n) * oh; ++noi) {
    const int ni = static_cast<int>(noi / oh);
    const int oi = static_cast<int>(noi % oh);
    for (int oj = 0; oj < ow; ++oj)
      for (int ch = 0; ch < c; ++ch) {
        const double s = x.at4(ni, 2 * oi, 2 * oj, ch) + x.at4(ni, 2 * oi, 2 * oj + 1, ch) +
                         x.at4(ni, 2 * oi + 1, 2 * oj, ch) + x.at4(ni, 2 * oi + 1, 2 * oj + 1, ch);
        y.at4(ni, oi, oj, ch) = 0.25 * s;
      }
  }
  return y;
}

Tensor avgpool2_grad(const Tensor& gy, int h, int w) {
  const int n = gy.dim(0), oh = gy.dim(1), ow = gy.dim(2), c = gy.dim(3);
  Tensor gx({n, h, w, c});
#pragma omp parallel for schedule(static)
  for (int64_t nij = 0; nij < static_cast<int64_t>(n) * h; ++nij) {
    const int ni = static_cast<int>(nij / h);
    const int i = static_cast<int>(nij % h);
    for (int j = 0; j < w; ++j)
      for (int ch = 0; ch < c; ++ch) {
        const int oi = i / 2, oj = j / 2;
        gx.at4(ni, i, j, ch) =
            (oi < oh && oj < ow) ? 0.25 * gy.at4(ni, oi, oj, ch) : 0.0;
      }
  }
  return gx;
}

namespace ref {

Tensor conv2d(const Tensor& x, const Tensor& k, int stride) {
  const int h = x.dim(0), w = x.dim(1);
  const int r = k.dim(0), rw = k.dim(1);
  const int oh = (h - r) / stride + 1, ow = (w - rw) / stride + 1;
  Tensor y({oh, ow});
  for (int oi = 0; oi < oh; ++oi)
    for (int oj = 0; oj < ow; ++oj)
      for (int di = 0; di < r; ++di)
        for (int dj = 0; dj < rw; ++dj)
          y.at2(oi, oj) += x.at2(oi * stride + di, oj * stride + dj) * k.at2(di, dj);
  return y;
}

Tensor tconv2d(const Tensor& v, const Tensor& k, int stride) {
  const int a = v.dim(0), b = v.dim(1);
  const int r = k.dim(0), rw = k.dim(1);
  Tensor y({(a - 1) * stride + r, (b - 1) * stride + rw});
  for (int i = 0; i < a; ++i)
    for (int j = 0; j < b; ++j)
      for (int di = 0; di < r; ++di)
        for (int dj = 0; dj < rw; ++dj)
          y.at2(i * stride + di, j * stride + dj) += v.at2(i, j) * k.at2(di, dj);
  return y;
}

Tensor conv2d_nhwc(const Tensor& x, const Tensor& k, int stride) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), ci = x.dim(3);
  const int r = k.dim(0), rw = k.dim(1), co = k.dim(3);
  const int oh = (h - r) / stride + 1, ow = (w - rw) / stride + 1;
  Tensor y({n, oh, ow, co});
  for (int ni = 0; ni < n; ++ni)
    for (int oi = 0; oi < oh; ++oi)
      for (int oj = 0; oj < ow; ++oj)
        for (int o = 0; o < co; ++o) {
          double acc = 0.0;
          for (int di = 0; di < r; ++di)
            for (int dj = 0; dj < rw; ++dj)
              for (int c = 0; c < ci; ++c)
                acc += x.at4(ni, oi * stride + di, oj * stride + dj, c) * k.at4(di, dj, c, o);
          y.at4(ni, oi, oj, o) = acc;
        }
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const int n = a.dim(0), p = a.dim(1), q = b.dim(1);
  Tensor c({n, q});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < q; ++j)
      for (int k = 0; k < p; ++k) c.at2(i, j) += a.at2(i, k) * b.at2(k, j);
  return c;
}

}  // namespace ref

}  // namespace spalab
