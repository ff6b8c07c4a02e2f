/*
 * Copyright 2026 The FAAP Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Image file IO backed by OpenCV. Images are RGB CHW floats in [0,1].

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "faap/data.hpp"

namespace faap {

enum class ImageEncoding {
  kPng8,   // lossless for pixels on the 1/255 grid
  kPpm16,  // 16-bit portable pixmap, used for endpoint submissions
};

/// Decodes any format OpenCV understands. A non-zero `size` resizes to
/// size x size (area interpolation); equal sizes leave pixels untouched.
Image read_image(const std::filesystem::path& path, int size = 0);
void write_image(const std::filesystem::path& path, const Image& image);

std::vector<std::uint8_t> encode_image(const Image& image, ImageEncoding encoding);
Image decode_image(std::span<const std::uint8_t> bytes);

Image resize_image(const Image& image, int size);

}  // namespace faap
