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

#ifndef SPALAB_IMAGE_IO_HPP
#define SPALAB_IMAGE_IO_HPP

#include <string>

#include "spalab/tensor.hpp"

namespace spalab {

/// 8-bit binary PPM (P6). Values are clipped to [0,1] and quantized with
/// round(), so a write/read round trip is within 1/255 per pixel.
void write_ppm(const std::string& path, const Tensor& rgb);  // [h,w,3]
Tensor read_ppm(const std::string& path);                    // [h,w,3] in [0,1]

/// Side-by-side panels [x | x+delta | perturbation map] separated by 2-pixel
/// white gutters. The map marks perturbed pixels (any channel) in white.
/// With highlight set, a red rectangle is drawn on the x+delta panel just
/// outside the perturbation's bounding box, never over perturbed pixels.
void export_perturbation_image(const Tensor& x, const Tensor& delta, const std::string& path,
                               bool highlight = false);

/// Gutter width used by the panel layout.
constexpr int kPanelGap = 2;

}  // namespace spalab

#endif  // SPALAB_IMAGE_IO_HPP
