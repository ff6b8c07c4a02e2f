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

// Differentiable building blocks as free functions over Tensor<Scalar>.
// Forward functions are pure; backward functions take the saved forward
// state and return the gradient with respect to the forward input.

#pragma once

#include <span>
#include <vector>

#include "faap/tensor.hpp"

namespace faap {

struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;

  int patch_size() const { return in_channels * kernel * kernel; }
  int out_extent(int in_extent) const { return (in_extent + 2 * padding - kernel) / stride + 1; }
};

/// Patch matrix of shape (batch * out_h * out_w) x (in_channels * k * k).
template <typename Scalar>
Matrix<Scalar> im2col(const Tensor<Scalar>& x, const ConvGeometry& geom);

/// Adjoint of im2col: scatters patch gradients back to an input-shaped tensor.
template <typename Scalar>
Tensor<Scalar> col2im(const Matrix<Scalar>& patches, const ConvGeometry& geom, int batch,
                      int in_h, int in_w);

/// weights: patch_size x out_channels, bias: 1 x out_channels.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Matrix<Scalar>& weights,
                      const Matrix<Scalar>& bias, const ConvGeometry& geom,
                      Matrix<Scalar>* patches_out = nullptr);

/// Accumulates into weight_grad / bias_grad when non-null; returns dL/dx when
/// need_input_grad, otherwise an empty tensor.
template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Matrix<Scalar>& patches, const Tensor<Scalar>& grad_out,
                               const Matrix<Scalar>& weights, const ConvGeometry& geom,
                               int in_h, int in_w, Matrix<Scalar>* weight_grad,
                               Matrix<Scalar>* bias_grad, bool need_input_grad);

enum class Activation { kRelu, kLeakyRelu, kTanh };

template <typename Scalar>
Tensor<Scalar> activate(const Tensor<Scalar>& x, Activation kind);

/// Gradient through an activation given its forward *output*.
template <typename Scalar>
Tensor<Scalar> activate_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& grad_out,
                                 Activation kind);

/// Mean over the spatial plane; output has height = width = 1.
template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x);

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Tensor<Scalar>& grad_out, int height, int width);

template <typename Scalar>
Tensor<Scalar> upsample_nearest2x(const Tensor<Scalar>& x);

template <typename Scalar>
Tensor<Scalar> upsample_nearest2x_backward(const Tensor<Scalar>& grad_out);

/// Row-wise softmax of a batch x classes logit matrix.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits);

/// Probability floor applied inside every logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

/// Mean cross-entropy of softmax(logits) against class indices. When
/// grad_logits is non-null it receives (softmax - onehot) / n, the gradient of
/// the unfloored loss, so a saturated row still pulls back toward its class.
template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, std::span<const int> classes,
                     Matrix<Scalar>* grad_logits = nullptr);

/// Mean Shannon entropy (natural log) of softmax(logits), with gradient.
template <typename Scalar>
Scalar mean_entropy(const Matrix<Scalar>& logits, Matrix<Scalar>* grad_logits = nullptr);

/// Maps a {-1,+1} label to a class index {0,1}.
constexpr int class_index(int signed_label) { return signed_label > 0 ? 1 : 0; }
/// Maps a class index {0,1} to a {-1,+1} label.
constexpr int signed_label(int index) { return index == 1 ? 1 : -1; }

/// argmax over two scores with ties resolved toward class 0 (label -1).
template <typename Scalar>
std::vector<int> argmax_labels(const Matrix<Scalar>& scores);

}  // namespace faap
