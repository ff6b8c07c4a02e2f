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

#include "faap/ops.hpp"

#include <algorithm>
#include <cmath>

namespace faap {

namespace {
constexpr double kLeakySlope = 0.2;
}

template <typename Scalar>
Matrix<Scalar> im2col(const Tensor<Scalar>& x, const ConvGeometry& geom) {
  const int k = geom.kernel;
  const int out_h = geom.out_extent(x.height);
  const int out_w = geom.out_extent(x.width);
  if (x.channels() != geom.in_channels) {
    throw Error(ErrorCode::kShapeMismatch, "conv expects " + std::to_string(geom.in_channels) +
                                               " channels, got " + std::to_string(x.channels()));
  }
  Matrix<Scalar> patches(static_cast<Eigen::Index>(x.batch) * out_h * out_w, geom.patch_size());
  for (int ci = 0; ci < geom.in_channels; ++ci) {
    const Scalar* src = x.data.col(ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* dst = patches.col((ci * k + ky) * k + kx).data();
        for (int n = 0; n < x.batch; ++n) {
          for (int oy = 0; oy < out_h; ++oy) {
            Scalar* row = dst + (static_cast<Eigen::Index>(n) * out_h + oy) * out_w;
            const int iy = oy * geom.stride + ky - geom.padding;
            if (iy < 0 || iy >= x.height) {
              std::fill(row, row + out_w, Scalar(0));
              continue;
            }
            const Scalar* src_row = src + (static_cast<Eigen::Index>(n) * x.height + iy) * x.width;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * geom.stride + kx - geom.padding;
              row[ox] = (ix >= 0 && ix < x.width) ? src_row[ix] : Scalar(0);
            }
          }
        }
      }
    }
  }
  return patches;
}

template <typename Scalar>
Tensor<Scalar> col2im(const Matrix<Scalar>& patches, const ConvGeometry& geom, int batch,
                      int in_h, int in_w) {
  const int k = geom.kernel;
  const int out_h = geom.out_extent(in_h);
  const int out_w = geom.out_extent(in_w);
  Tensor<Scalar> x(batch, {geom.in_channels, in_h, in_w});
  for (int ci = 0; ci < geom.in_channels; ++ci) {
    Scalar* dst = x.data.col(ci).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* src = patches.col((ci * k + ky) * k + kx).data();
        for (int n = 0; n < batch; ++n) {
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * geom.stride + ky - geom.padding;
            if (iy < 0 || iy >= in_h) continue;
            const Scalar* row = src + (static_cast<Eigen::Index>(n) * out_h + oy) * out_w;
            Scalar* dst_row = dst + (static_cast<Eigen::Index>(n) * in_h + iy) * in_w;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * geom.stride + kx - geom.padding;
              if (ix >= 0 && ix < in_w) dst_row[ix] += row[ox];
            }
          }
        }
      }
    }
  }
  return x;
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Matrix<Scalar>& weights,
                      const Matrix<Scalar>& bias, const ConvGeometry& geom,
                      Matrix<Scalar>* patches_out) {
  Matrix<Scalar> patches = im2col(x, geom);
  Tensor<Scalar> out;
  out.batch = x.batch;
  out.height = geom.out_extent(x.height);
  out.width = geom.out_extent(x.width);
  out.data.noalias() = patches * weights;
  out.data.rowwise() += bias.row(0);
  if (patches_out != nullptr) *patches_out = std::move(patches);
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Matrix<Scalar>& patches, const Tensor<Scalar>& grad_out,
                               const Matrix<Scalar>& weights, const ConvGeometry& geom,
                               int in_h, int in_w, Matrix<Scalar>* weight_grad,
                               Matrix<Scalar>* bias_grad, bool need_input_grad) {
  if (weight_grad != nullptr) weight_grad->noalias() += patches.transpose() * grad_out.data;
  if (bias_grad != nullptr) *bias_grad += grad_out.data.colwise().sum();
  if (!need_input_grad) return {};
  Matrix<Scalar> patch_grad = grad_out.data * weights.transpose();
  return col2im(patch_grad, geom, grad_out.batch, in_h, in_w);
}

template <typename Scalar>
Tensor<Scalar> activate(const Tensor<Scalar>& x, Activation kind) {
  Tensor<Scalar> out;
  out.batch = x.batch;
  out.height = x.height;
  out.width = x.width;
  switch (kind) {
    case Activation::kRelu:
      out.data = x.data.cwiseMax(Scalar(0));
      break;
    case Activation::kLeakyRelu:
      out.data = x.data.unaryExpr(
          [](Scalar v) { return v > Scalar(0) ? v : Scalar(kLeakySlope) * v; });
      break;
    case Activation::kTanh:
      out.data = x.data.array().tanh().matrix();
      break;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> activate_backward(const Tensor<Scalar>& output, const Tensor<Scalar>& grad_out,
                                 Activation kind) {
  Tensor<Scalar> dx;
  dx.batch = grad_out.batch;
  dx.height = grad_out.height;
  dx.width = grad_out.width;
  switch (kind) {
    case Activation::kRelu:
      dx.data = (output.data.array() > Scalar(0)).select(grad_out.data, Scalar(0));
      break;
    case Activation::kLeakyRelu:
      dx.data = (output.data.array() > Scalar(0))
                    .select(grad_out.data, Scalar(kLeakySlope) * grad_out.data);
      break;
    case Activation::kTanh:
      dx.data = (grad_out.data.array() * (Scalar(1) - output.data.array().square())).matrix();
      break;
  }
  return dx;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.batch, {x.channels(), 1, 1});
  const int plane = x.plane();
  for (int c = 0; c < x.channels(); ++c) {
    Eigen::Map<const Matrix<Scalar>> block(x.data.col(c).data(), plane, x.batch);
    out.data.col(c) = block.colwise().mean().transpose();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Tensor<Scalar>& grad_out, int height, int width) {
  Tensor<Scalar> dx(grad_out.batch, {grad_out.channels(), height, width});
  const int plane = height * width;
  const Scalar inv = Scalar(1) / Scalar(plane);
  for (int c = 0; c < grad_out.channels(); ++c) {
    Eigen::Map<Matrix<Scalar>> block(dx.data.col(c).data(), plane, grad_out.batch);
    block = (grad_out.data.col(c).transpose() * inv).replicate(plane, 1);
  }
  return dx;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest2x(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.batch, {x.channels(), 2 * x.height, 2 * x.width});
  for (int c = 0; c < x.channels(); ++c) {
    for (int n = 0; n < x.batch; ++n) {
      for (int y = 0; y < out.height; ++y) {
        for (int xx = 0; xx < out.width; ++xx) out.at(n, c, y, xx) = x.at(n, c, y / 2, xx / 2);
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest2x_backward(const Tensor<Scalar>& grad_out) {
  Tensor<Scalar> dx(grad_out.batch, {grad_out.channels(), grad_out.height / 2, grad_out.width / 2});
  for (int c = 0; c < grad_out.channels(); ++c) {
    for (int n = 0; n < grad_out.batch; ++n) {
      for (int y = 0; y < grad_out.height; ++y) {
        for (int xx = 0; xx < grad_out.width; ++xx) dx.at(n, c, y / 2, xx / 2) += grad_out.at(n, c, y, xx);
      }
    }
  }
  return dx;
}

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> shifted = logits.colwise() - logits.rowwise().maxCoeff();
  Matrix<Scalar> e = shifted.array().exp().matrix();
  return e.array().colwise() / e.rowwise().sum().array();
}

template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, std::span<const int> classes,
                     Matrix<Scalar>* grad_logits) {
  const auto n = logits.rows();
  if (n == 0 || static_cast<std::size_t>(n) != classes.size()) {
    throw Error(ErrorCode::kEmptyInput, "cross_entropy needs a non-empty, aligned batch");
  }
  const Matrix<Scalar> prob = softmax_rows(logits);
  const Scalar floor = Scalar(kProbabilityFloor);
  Scalar total = 0;
  if (grad_logits != nullptr) *grad_logits = prob / Scalar(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    total -= std::log(std::max(prob(i, classes[i]), floor));
    if (grad_logits != nullptr) (*grad_logits)(i, classes[i]) -= Scalar(1) / Scalar(n);
  }
  return total / Scalar(n);
}

template <typename Scalar>
Scalar mean_entropy(const Matrix<Scalar>& logits, Matrix<Scalar>* grad_logits) {
  const auto n = logits.rows();
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "mean_entropy needs a non-empty batch");
  const Matrix<Scalar> prob = softmax_rows(logits);
  const Matrix<Scalar> log_prob = prob.cwiseMax(Scalar(kProbabilityFloor)).array().log().matrix();
  const Vector<Scalar> entropy = -(prob.array() * log_prob.array()).rowwise().sum().matrix();
  if (grad_logits != nullptr) {
    *grad_logits = (-(prob.array() * (log_prob.colwise() + entropy).array()) / Scalar(n)).matrix();
  }
  return entropy.mean();
}

template <typename Scalar>
std::vector<int> argmax_labels(const Matrix<Scalar>& scores) {
  std::vector<int> labels(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    labels[static_cast<std::size_t>(i)] = scores(i, 1) > scores(i, 0) ? 1 : -1;
  }
  return labels;
}

#define FAAP_INSTANTIATE_OPS(S)                                                               \
  template Matrix<S> im2col(const Tensor<S>&, const ConvGeometry&);                           \
  template Tensor<S> col2im(const Matrix<S>&, const ConvGeometry&, int, int, int);            \
  template Tensor<S> conv2d(const Tensor<S>&, const Matrix<S>&, const Matrix<S>&,             \
                            const ConvGeometry&, Matrix<S>*);                                 \
  template Tensor<S> conv2d_backward(const Matrix<S>&, const Tensor<S>&, const Matrix<S>&,    \
                                     const ConvGeometry&, int, int, Matrix<S>*, Matrix<S>*,   \
                                     bool);                                                   \
  template Tensor<S> activate(const Tensor<S>&, Activation);                                  \
  template Tensor<S> activate_backward(const Tensor<S>&, const Tensor<S>&, Activation);       \
  template Tensor<S> global_avg_pool(const Tensor<S>&);                                       \
  template Tensor<S> global_avg_pool_backward(const Tensor<S>&, int, int);                    \
  template Tensor<S> upsample_nearest2x(const Tensor<S>&);                                    \
  template Tensor<S> upsample_nearest2x_backward(const Tensor<S>&);                           \
  template Matrix<S> softmax_rows(const Matrix<S>&);                                          \
  template S cross_entropy(const Matrix<S>&, std::span<const int>, Matrix<S>*);               \
  template S mean_entropy(const Matrix<S>&, Matrix<S>*);                                      \
  template std::vector<int> argmax_labels(const Matrix<S>&);

FAAP_INSTANTIATE_OPS(float)
FAAP_INSTANTIATE_OPS(double)

}  // namespace faap
