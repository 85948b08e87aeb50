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

#ifndef SPALAB_KERNELS_HPP
#define SPALAB_KERNELS_HPP

#include "spalab/tensor.hpp"

namespace spalab {

// OpenMP-parallel dense kernels. Every output element is produced by a
// serial reduction in a fixed order, so results are bit-identical for any
// thread count. The serial counterparts live in spalab::ref and are the
// oracle the tests and the benchmark compare against.

/// Valid (no-padding) cross-correlation. Accepted shapes:
///   x[h,w]      * k[r,r]         -> [oh,ow]
///   x[h,w,1]    * k[r,r]         -> [oh,ow,1]
///   x[h,w,ci]   * k[r,r,ci,co]   -> [oh,ow,co]
///   x[n,h,w,ci] * k[r,r,ci,co]   -> [n,oh,ow,co]
/// with oh = (h-r)/stride + 1 (floor), ow likewise.
Tensor conv2d(const Tensor& x, const Tensor& k, int stride);

/// Transposed convolution: stamps k at offset (i*stride, j*stride) for each
/// grid cell, summing overlaps. v[a,b] * k[r,r] -> [(a-1)*stride+r, (b-1)*stride+r].
Tensor tconv2d(const Tensor& v, const Tensor& k, int stride);

// Batched building blocks used by the compute graph.
Tensor conv2d_nhwc(const Tensor& x, const Tensor& k, int stride);
Tensor conv2d_input_grad(const Tensor& gy, const Tensor& k, int stride, int h, int w);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, int stride, int r);

Tensor matmul(const Tensor& a, const Tensor& b);         // [n,p] x [p,q] -> [n,q]
Tensor matmul_transA(const Tensor& a, const Tensor& b);  // a'b: [n,p],[n,q] -> [p,q]
Tensor matmul_transB(const Tensor& a, const Tensor& b);  // ab': [n,q],[p,q] -> [n,p]

Tensor avgpool2(const Tensor& x);                        // [n,h,w,c] -> [n,h/2,w/2,c]
Tensor avgpool2_grad(const Tensor& gy, int h, int w);

namespace ref {

// Serial naive reference implementations (direct loop transcriptions).
Tensor conv2d(const Tensor& x, const Tensor& k, int stride);
Tensor tconv2d(const Tensor& v, const Tensor& k, int stride);
Tensor conv2d_nhwc(const Tensor& x, const Tensor& k, int stride);
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace ref

}  // namespace spalab

#endif  // SPALAB_KERNELS_HPP
