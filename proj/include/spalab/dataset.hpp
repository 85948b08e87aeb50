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

#ifndef SPALAB_DATASET_HPP
#define SPALAB_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spalab/tensor.hpp"

namespace spalab {

struct Dataset {
  Tensor images;             // [n,h,w,c], values in [0,1]
  std::vector<int> labels;
  std::string split;
  std::string provenance;

  int n() const { return images.rank() == 4 ? images.dim(0) : 0; }
  int h() const { return images.dim(1); }
  int w() const { return images.dim(2); }
  int c() const { return images.dim(3); }

  /// Copy of image i as [h,w,c].
  Tensor image(int i) const;
  int label(int i) const { return labels.at(static_cast<size_t>(i)); }

  Dataset head(int count) const;
};

/// Parameters for the synthetic class-conditional stripe/blob task. The
/// default task is the acceptance substrate: small enough to train in
/// seconds, structured enough that sparse attacks are non-trivial.
struct SyntheticSpec {
  int n = 1000;
  int h = 16;
  int w = 16;
  int c = 3;
  int classes = 4;
  double amplitude = 0.22;
  double noise = 0.10;
};

/// Deterministic generator: same (spec, seed, split) gives the identical
/// dataset; "train" and "test" splits draw from disjoint streams.
Dataset make_synthetic(const SyntheticSpec& spec, uint64_t seed, const std::string& split);

/// CIFAR-10 binary format: 3073-byte records, 1 label byte (0-9) then three
/// 1024-byte row-major planes (R, G, B). `path` may be a single .bin file or
/// a directory whose *.bin files are loaded in sorted order.
Dataset load_cifar10(const std::string& path);

/// One record in the CIFAR-10 binary layout; pixels quantized with round().
std::vector<uint8_t> cifar10_encode_record(const Tensor& image, int label);
void cifar10_decode_record(const uint8_t* record, Tensor& image_out, int& label_out);

}  // namespace spalab

#endif  // SPALAB_DATASET_HPP
