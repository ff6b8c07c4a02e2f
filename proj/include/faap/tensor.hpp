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

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "faap/error.hpp"

namespace faap {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  int size() const { return channels * height * width; }
  int plane() const { return height * width; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

/// A batch of feature maps.
///
/// Storage is a (batch * height * width) x channels column-major matrix: row
/// (n * height + y) * width + x holds pixel (y, x) of sample n, and each
/// channel plane is contiguous across the whole batch. A convolution is then a
/// single GEMM against the im2col patch matrix, and a dense activation block
/// (height = width = 1) is an ordinary batch x features matrix.
template <typename Scalar>
struct Tensor {
  int batch = 0;
  int height = 0;
  int width = 0;
  Matrix<Scalar> data;

  Tensor() = default;
  Tensor(int batch_size, Shape shape)
      : batch(batch_size),
        height(shape.height),
        width(shape.width),
        data(Matrix<Scalar>::Zero(static_cast<Eigen::Index>(batch_size) * shape.plane(),
                                  shape.channels)) {}

  int channels() const { return static_cast<int>(data.cols()); }
  int plane() const { return height * width; }
  Shape shape() const { return {channels(), height, width}; }

  Scalar& at(int n, int c, int y, int x) {
    return data((static_cast<Eigen::Index>(n) * height + y) * width + x, c);
  }
  Scalar at(int n, int c, int y, int x) const {
    return data((static_cast<Eigen::Index>(n) * height + y) * width + x, c);
  }

  /// Rows belonging to one sample, as a (plane x channels) block.
  auto sample(int n) { return data.middleRows(static_cast<Eigen::Index>(n) * plane(), plane()); }
  auto sample(int n) const {
    return data.middleRows(static_cast<Eigen::Index>(n) * plane(), plane());
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out;
    out.batch = batch;
    out.height = height;
    out.width = width;
    out.data = data.template cast<Other>();
    return out;
  }

  /// Copies samples [first, first + count) into a new tensor.
  Tensor slice(int first, int count) const {
    Tensor out;
    out.batch = count;
    out.height = height;
    out.width = width;
    out.data = data.middleRows(static_cast<Eigen::Index>(first) * plane(),
                               static_cast<Eigen::Index>(count) * plane());
    return out;
  }
};

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (a.batch != b.batch || a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": " + a.shape().str() + " vs " +
                                               b.shape().str());
  }
}

/// FNV-1a over a byte range. Used for parameter checksums and config hashes.
inline std::uint64_t fnv1a(const void* bytes, std::size_t size,
                           std::uint64_t state = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < size; ++i) {
    state ^= p[i];
    state *= 0x100000001b3ULL;
  }
  return state;
}

}  // namespace faap
