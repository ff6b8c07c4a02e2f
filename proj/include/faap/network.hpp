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

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"

#include "faap/ops.hpp"
#include "faap/tensor.hpp"

namespace faap {

/// State saved by a layer's forward pass for its backward pass.
template <typename Scalar>
struct LayerCache {
  std::vector<Tensor<Scalar>> tensors;
  std::vector<Matrix<Scalar>> matrices;
  int in_height = 0;
  int in_width = 0;
};

/// One differentiable stage. Layers are immutable during forward/backward:
/// caches and gradients live outside the layer, so a frozen network can be
/// shared by concurrent callers.
template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor<Scalar> forward(const Tensor<Scalar>& x, LayerCache<Scalar>* cache) const = 0;

  /// Returns dL/dx. Parameter gradients are accumulated into `param_grads`
  /// (same layout as params()) unless the span is empty.
  virtual Tensor<Scalar> backward(const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                                  std::span<Matrix<Scalar>> param_grads,
                                  bool need_input_grad) const = 0;

  virtual Shape output_shape(Shape in) const = 0;
  virtual nlohmann::json describe() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  std::vector<Matrix<Scalar>>& params() { return params_; }
  const std::vector<Matrix<Scalar>>& params() const { return params_; }

 protected:
  std::vector<Matrix<Scalar>> params_;
};

template <typename Scalar>
class Conv2dLayer final : public Layer<Scalar> {
 public:
  /// He-normal weights when rng is given, zeros otherwise.
  Conv2dLayer(ConvGeometry geom, std::mt19937_64* rng);
  Tensor<Scalar> forward(const Tensor<Scalar>& x, LayerCache<Scalar>* cache) const override;
  Tensor<Scalar> backward(const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                          std::span<Matrix<Scalar>> param_grads,
                          bool need_input_grad) const override;
  Shape output_shape(Shape in) const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer<Scalar>> clone() const override;

 private:
  ConvGeometry geom_;
};

template <typename Scalar>
class ActivationLayer final : public Layer<Scalar> {
 public:
  explicit ActivationLayer(Activation kind) : kind_(kind) {}
  Tensor<Scalar> forward(const Tensor<Scalar>& x, LayerCache<Scalar>* cache) const override;
  Tensor<Scalar> backward(const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                          std::span<Matrix<Scalar>> param_grads,
                          bool need_input_grad) const override;
  Shape output_shape(Shape in) const override { return in; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer<Scalar>> clone() const override;

 private:
  Activation kind_;
};

/// act(x + conv(act(conv(x)))), both convolutions 3x3 / stride 1.
template <typename Scalar>
class ResidualBlock final : public Layer<Scalar> {
 public:
  ResidualBlock(int channels, Activation kind, std::mt19937_64* rng);
  Tensor<Scalar> forward(const Tensor<Scalar>& x, LayerCache<Scalar>* cache) const override;
  Tensor<Scalar> backward(const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                          std::span<Matrix<Scalar>> param_grads,
                          bool need_input_grad) const override;
  Shape output_shape(Shape in) const override { return in; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer<Scalar>> clone() const override;

 private:
  ConvGeometry geom_;
  Activation kind_;
};

template <typename Scalar>
class GlobalAvgPoolLayer final : public Layer<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x, LayerCache<Scalar>* cache) const override;
  Tensor<Scalar> backward(const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                          std::span<Matrix<Scalar>> param_grads,
                          bool need_input_grad) const override;
  Shape output_shape(Shape in) const override { return {in.channels, 1, 1}; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer<Scalar>> clone() const override;
};

/// Dense layer over a (batch x features) block; requires height = width = 1.
template <typename Scalar>
class LinearLayer final : public Layer<Scalar> {
 public:
  LinearLayer(int in_features, int out_features, std::mt19937_64* rng);
  Tensor<Scalar> forward(const Tensor<Scalar>& x, LayerCache<Scalar>* cache) const override;
  Tensor<Scalar> backward(const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                          std::span<Matrix<Scalar>> param_grads,
                          bool need_input_grad) const override;
  Shape output_shape(Shape in) const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer<Scalar>> clone() const override;

 private:
  int in_features_;
  int out_features_;
};

template <typename Scalar>
class UpsampleLayer final : public Layer<Scalar> {
 public:
  Tensor<Scalar> forward(const Tensor<Scalar>& x, LayerCache<Scalar>* cache) const override;
  Tensor<Scalar> backward(const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                          std::span<Matrix<Scalar>> param_grads,
                          bool need_input_grad) const override;
  Shape output_shape(Shape in) const override { return {in.channels, 2 * in.height, 2 * in.width}; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer<Scalar>> clone() const override;
};

/// scale * tanh(x); the output lies strictly inside (-scale, scale).
template <typename Scalar>
class BoundedTanhLayer final : public Layer<Scalar> {
 public:
  explicit BoundedTanhLayer(double scale) : scale_(scale) {}
  Tensor<Scalar> forward(const Tensor<Scalar>& x, LayerCache<Scalar>* cache) const override;
  Tensor<Scalar> backward(const LayerCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                          std::span<Matrix<Scalar>> param_grads,
                          bool need_input_grad) const override;
  Shape output_shape(Shape in) const override { return in; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer<Scalar>> clone() const override;

 private:
  double scale_;
};

template <typename Scalar>
using Gradients = std::vector<Matrix<Scalar>>;

template <typename Scalar>
struct NetworkCache {
  std::vector<LayerCache<Scalar>> layers;
};

/// A sequential stack of layers with value semantics.
template <typename Scalar>
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Network& add(std::unique_ptr<Layer<Scalar>> layer);

  Tensor<Scalar> forward(const Tensor<Scalar>& x, NetworkCache<Scalar>* cache = nullptr) const;

  /// Backpropagates grad_out. Parameter gradients are accumulated into
  /// `grads` (see zero_gradients) when non-null.
  Tensor<Scalar> backward(const NetworkCache<Scalar>& cache, const Tensor<Scalar>& grad_out,
                          Gradients<Scalar>* grads, bool need_input_grad = true) const;

  Shape output_shape(Shape in) const;
  std::size_t num_layers() const { return layers_.size(); }
  Eigen::Index num_parameters() const;

  std::vector<Matrix<Scalar>*> parameters();
  std::vector<const Matrix<Scalar>*> parameters() const;
  Gradients<Scalar> zero_gradients() const;

  Vector<Scalar> flatten() const;
  void assign(const Vector<Scalar>& flat);

  std::uint64_t checksum() const;

  nlohmann::json describe() const;
  /// Rebuilds the architecture with zero parameters.
  static Network from_description(const nlohmann::json& description);

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out = Network<Other>::from_description(describe());
    out.assign(flatten().template cast<Other>());
    return out;
  }

 private:
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
};

}  // namespace faap
