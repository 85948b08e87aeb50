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

#include "spalab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "spalab/rng.hpp"

namespace spalab {

Tensor Dataset::image(int i) const {
  Tensor out({h(), w(), c()});
  const int64_t stride = static_cast<int64_t>(h()) * w() * c();
  const double* src = images.data() + static_cast<int64_t>(i) * stride;
  std::copy(src, src + stride, out.data());
  return out;
}

Dataset Dataset::head(int count) const {
  count = std::min(count, n());
  Dataset out;
  out.images = Tensor({count, h(), w(), c()});
  const int64_t stride = static_cast<int64_t>(h()) * w() * c();
  std::copy(images.data(), images.data() + count * stride, out.images.data());
  out.labels.assign(labels.begin(), labels.begin() + count);
  out.split = split;
  out.provenance = provenance;
  return out;
}

namespace {

constexpr uint64_t kTagTrain = 0x7261696eULL;  // "rain"
constexpr uint64_t kTagTest = 0x74657374ULL;   // "test"

// Binary on/off pattern for a (class, pixel) pair. Classes cycle through
// four pattern families; each family keeps roughly half the pixels "on" so
// the class evidence stays spatially distributed. Stripe periods are long
// enough to survive two rounds of 2x2 average pooling.
bool pattern_on(int cls, int i, int j, int h, int w, int phase, int ci, int cj) {
  switch (cls % 4) {
    case 0:
      return ((i + 2 * phase) % 8) < 4;  // horizontal stripes
    case 1:
      return ((j + 2 * phase) % 8) < 4;  // vertical stripes
    case 2: {                            // centered disk
      const double r = std::min(h, w) / 3.2;
      const double di = i - ci, dj = j - cj;
      return di * di + dj * dj <= r * r;
    }
    default:
      return ((i + j + 2 * phase) % 8) < 4;  // diagonal stripes
  }
}

}  // namespace

Dataset make_synthetic(const SyntheticSpec& spec, uint64_t seed, const std::string& split) {
  const uint64_t split_tag = (split == "train") ? kTagTrain : kTagTest;
  Dataset out;
  out.images = Tensor({spec.n, spec.h, spec.w, spec.c});
  out.labels.resize(static_cast<size_t>(spec.n));
  out.split = split;
  out.provenance = "synthetic(n=" + std::to_string(spec.n) + ",seed=" + std::to_string(seed) + ")";

  const double chan_scale[3] = {1.0, 0.75, 0.55};
  for (int idx = 0; idx < spec.n; ++idx) {
    RngStream rng(mix_seed({seed, split_tag, static_cast<uint64_t>(idx)}));
    const int cls = idx % spec.classes;
    const int phase = rng.uniform_int(4);
    const int ci = spec.h / 2 + rng.uniform_int(5) - 2;
    const int cj = spec.w / 2 + rng.uniform_int(5) - 2;
    out.labels[static_cast<size_t>(idx)] = cls;
    for (int i = 0; i < spec.h; ++i)
      for (int j = 0; j < spec.w; ++j) {
        const bool on = pattern_on(cls, i, j, spec.h, spec.w, phase, ci, cj);
        for (int ch = 0; ch < spec.c; ++ch) {
          const double sc = chan_scale[ch % 3];
          double v = 0.5 + (on ? spec.amplitude : -spec.amplitude) * sc + spec.noise * rng.normal();
          v = std::min(1.0, std::max(0.0, v));
          out.images.at4(idx, i, j, ch) = v;
        }
      }

  }
  return out;
}

std::vector<uint8_t> cifar10_encode_record(const Tensor& image, int label) {
  if (image.rank() != 3 || image.dim(0) != 32 || image.dim(1) != 32 || image.dim(2) != 3)
    throw std::invalid_argument("cifar10_encode_record: expects [32,32,3]");
  if (label < 0 || label > 9) throw std::out_of_range("cifar10_encode_record: label 0-9");
  std::vector<uint8_t> rec(3073);
  rec[0] = static_cast<uint8_t>(label);
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) {
        const double v = image.at3(i, j, ch);
        rec[1 + static_cast<size_t>(ch) * 1024 + static_cast<size_t>(i) * 32 + j] =
            static_cast<uint8_t>(std::lround(std::min(1.0, std::max(0.0, v)) * 255.0));
      }
  return rec;
}

void cifar10_decode_record(const uint8_t* record, Tensor& image_out, int& label_out) {
  const int label = record[0];
  if (label > 9) throw std::out_of_range("cifar10: label byte out of range (0-9)");
  label_out = label;
  image_out = Tensor({32, 32, 3});
  for (int ch = 0; ch < 3; ++ch)
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j)
        image_out.at3(i, j, ch) =
            record[1 + static_cast<size_t>(ch) * 1024 + static_cast<size_t>(i) * 32 + j] / 255.0;
}

namespace {

void append_cifar_file(const std::string& file, std::vector<Tensor>& images,
                       std::vector<int>& labels) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cifar10: cannot open " + file);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % 3073 != 0)
    throw std::runtime_error("cifar10: " + file + " is not a whole number of 3073-byte records");
  for (size_t off = 0; off < bytes.size(); off += 3073) {
    Tensor img;
    int label = 0;
    cifar10_decode_record(bytes.data() + off, img, label);
    images.push_back(std::move(img));
    labels.push_back(label);
  }
}

}  // namespace

Dataset load_cifar10(const std::string& path) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".bin") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("cifar10: no .bin files in " + path);
  } else {
    files.push_back(path);
  }

  std::vector<Tensor> images;
  std::vector<int> labels;
  for (const auto& f : files) append_cifar_file(f, images, labels);

  Dataset out;
  const int n = static_cast<int>(images.size());
  out.images = Tensor({n, 32, 32, 3});
  for (int i = 0; i < n; ++i)
    std::copy(images[static_cast<size_t>(i)].data(), images[static_cast<size_t>(i)].data() + 32 * 32 * 3,
              out.images.data() + static_cast<int64_t>(i) * 32 * 32 * 3);
  out.labels = std::move(labels);
  out.provenance = path;
  return out;
}

}  // namespace spalab
