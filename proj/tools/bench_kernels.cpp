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

// Compares the OpenMP kernels against the serial reference implementations:
// wall time and max elementwise deviation per kernel.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "spalab/kernels.hpp"
#include "spalab/rng.hpp"

using namespace spalab;

namespace {

Tensor random_tensor(std::vector<int> shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename F>
double time_ms(F&& fn, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double par_ms, double ser_ms, double diff) {
  std::printf("%-18s parallel %8.3f ms   serial %8.3f ms   speedup %5.2fx   max|diff| %.3g\n",
              name, par_ms, ser_ms, ser_ms / par_ms, diff);
}

}  // namespace

int main() {
  RngStream rng(20260808);
  const int reps = 5;

  {
    Tensor x = random_tensor({16, 32, 32, 16}, rng);
    Tensor k = random_tensor({3, 3, 16, 32}, rng);
    Tensor par = conv2d(x, k, 1);
    Tensor ser = ref::conv2d_nhwc(x, k, 1);
    report("conv2d_nhwc", time_ms([&] { conv2d(x, k, 1); }, reps),
           time_ms([&] { ref::conv2d_nhwc(x, k, 1); }, reps), max_diff(par, ser));
  }
  {
    Tensor x = random_tensor({512, 512}, rng);
    Tensor k = random_tensor({5, 5}, rng);
    Tensor par = conv2d(x, k, 1);
    Tensor ser = ref::conv2d(x, k, 1);
    report("conv2d_2d", time_ms([&] { conv2d(x, k, 1); }, reps),
           time_ms([&] { ref::conv2d(x, k, 1); }, reps), max_diff(par, ser));
  }
  {
    Tensor v = random_tensor({256, 256}, rng);
    Tensor k = random_tensor({7, 7}, rng);
    Tensor par = tconv2d(v, k, 2);
    Tensor ser = ref::tconv2d(v, k, 2);
    report("tconv2d", time_ms([&] { tconv2d(v, k, 2); }, reps),
           time_ms([&] { ref::tconv2d(v, k, 2); }, reps), max_diff(par, ser));
  }
  {
    Tensor a = random_tensor({256, 512}, rng);
    Tensor b = random_tensor({512, 128}, rng);
    Tensor par = matmul(a, b);
    Tensor ser = ref::matmul(a, b);
    report("matmul", time_ms([&] { matmul(a, b); }, reps),
           time_ms([&] { ref::matmul(a, b); }, reps), max_diff(par, ser));
  }
  return 0;
}
