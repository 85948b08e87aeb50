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

#include "spalab/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "spalab/attack_types.hpp"

namespace spalab {

void write_ppm(const std::string& path, const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3) throw std::invalid_argument("write_ppm: expects [h,w,3]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
  const int h = rgb.dim(0), w = rgb.dim(1);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<size_t>(h) * w * 3);
  for (int64_t i = 0; i < rgb.size(); ++i)
    bytes[static_cast<size_t>(i)] =
        static_cast<unsigned char>(std::lround(std::min(1.0, std::max(0.0, rgb[i])) * 255.0));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw std::runtime_error("read_ppm: not a P6 file");
  int w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("read_ppm: bad header");
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> bytes(static_cast<size_t>(h) * w * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error("read_ppm: truncated pixel data");
  Tensor t({h, w, 3});
  for (int64_t i = 0; i < t.size(); ++i) t[i] = bytes[static_cast<size_t>(i)] / 255.0;
  return t;
}

namespace {

// Any-channel value of a [h,w,c] tensor as RGB, replicating single channels.
void put_rgb(Tensor& canvas, int i, int j0, const Tensor& img, int pi, int pj) {
  const int c = img.dim(2);
  for (int ch = 0; ch < 3; ++ch)
    canvas.at3(i, j0, ch) = img.at3(pi, pj, c == 1 ? 0 : std::min(ch, c - 1));
}

}  // namespace

void export_perturbation_image(const Tensor& x, const Tensor& delta, const std::string& path,
                               bool highlight) {
  require_same_shape(x, delta, "export_perturbation_image");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int out_w = 3 * w + 2 * kPanelGap;
  Tensor canvas = Tensor::full({h, out_w, 3}, 1.0);

  Tensor adv = x;
  for (int64_t i = 0; i < adv.size(); ++i) adv[i] += delta[i];

  std::vector<char> perturbed(static_cast<size_t>(h) * w, 0);
  int min_i = h, max_i = -1, min_j = w, max_j = -1;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int ch = 0; ch < c; ++ch)
        if (delta.at3(i, j, ch) != 0.0) {
          perturbed[static_cast<size_t>(i) * w + j] = 1;
          min_i = std::min(min_i, i);
          max_i = std::max(max_i, i);
          min_j = std::min(min_j, j);
          max_j = std::max(max_j, j);
          break;
        }

  const int adv_off = w + kPanelGap;
  const int map_off = 2 * (w + kPanelGap);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      put_rgb(canvas, i, j, x, i, j);
      put_rgb(canvas, i, adv_off + j, adv, i, j);
      const double mark = perturbed[static_cast<size_t>(i) * w + j] ? 1.0 : 0.0;
      for (int ch = 0; ch < 3; ++ch) canvas.at3(i, map_off + j, ch) = mark;
    }

  if (highlight && max_i >= 0) {
    const int lo_i = std::max(0, min_i - 2), hi_i = std::min(h - 1, max_i + 2);
    const int lo_j = std::max(0, min_j - 2), hi_j = std::min(w - 1, max_j + 2);
    auto draw = [&](int i, int j) {
      if (perturbed[static_cast<size_t>(i) * w + j]) return;  // never over the perturbation
      canvas.at3(i, adv_off + j, 0) = 1.0;
      canvas.at3(i, adv_off + j, 1) = 0.0;
      canvas.at3(i, adv_off + j, 2) = 0.0;
    };
    for (int j = lo_j; j <= hi_j; ++j) {
      draw(lo_i, j);
      draw(hi_i, j);
    }
    for (int i = lo_i; i <= hi_i; ++i) {
      draw(i, lo_j);
      draw(i, hi_j);
    }
  }

  write_ppm(path, canvas);
}

}  // namespace spalab
