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

#include "faap/network.hpp"

#include <cmath>

namespace faap {

namespace {

template <typename Scalar>
Matrix<Scalar> he_normal(Eigen::Index rows, Eigen::Index cols, int fan_in, std::mt19937_64* rng) {
  if (rng == nullptr) return Matrix<Scalar>::Zero(rows, cols);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  Matrix<Scalar> m(rows, cols);
  // Fill in a fixed order so initialization is reproducible across builds.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(normal(*rng));
  }
  return m;
}

std::string activation_name(Activation kind) {
  switch (kind) {
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kTanh: return "tanh";
  }
  return "relu";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "tanh") return Activation::kTanh;
  throw Error(ErrorCode::kCheckpointCorrupt, "unknown activation '" + name + "'");
}

template <typename Scalar>
Matrix<Scalar>* grad_slot(std::span<Matrix<Scalar>> grads, std::size_t i) {
  return grads.empty() ? nullptr : &grads[i];
}

}  // namespace

// --- Conv2dLayer -----------------------------------------------------------

template <typename Scalar>
Conv2dLayer<Scalar>::Conv2dLayer(ConvGeometry geom, std::mt19937_64* rng) : geom_(geom) {
  this->params_.push_back(
      he_normal<Scalar>(geom.patch_size(), geom.out_channels, geom.patch_size(), rng));
  this->params_.push_back(Matrix<Scalar>::Zero(1, geom.out_channels));
}

template <typename Scalar>
Tensor<Scalar> Conv2dLayer<Scalar>::forward(const Tensor<Scalar>& x,
                                            LayerCache<Scalar>* cache) const {
  if (cache == nullptr) return conv2d(x, this->params_[0], this->params_[1], geom_);
  cache->in_height = x.height;
  cache->in_width = x.width;
  cache->matrices.resize(1);
  return conv2d(x, this->params_[0], this->params_[1], geom_, &cache->matrices[0]);
}

template <typename Scalar>
Tensor<Scalar> Conv2dLayer<Scalar>::backward(const LayerCache<Scalar>& cache,
                                             const Tensor<Scalar>& grad_out,
                                             std::span<Matrix<Scalar>> param_grads,
                                             bool need_input_grad) const {
  return conv2d_backward(cache.matrices[0], grad_out, this->params_[0], geom_, cache.in_height,
                         cache.in_width, grad_slot(param_grads, 0), grad_slot(param_grads, 1),
                         need_input_grad);
}

template <typename Scalar>
Shape Conv2dLayer<Scalar>::output_shape(Shape in) const {
  return {geom_.out_channels, geom_.out_extent(in.height), geom_.out_extent(in.width)};
}

template <typename Scalar>
nlohmann::json Conv2dLayer<Scalar>::describe() const {
  return {{"type", "conv"},         {"in", geom_.in_channels}, {"out", geom_.out_channels},
          {"kernel", geom_.kernel}, {"stride", geom_.stride},  {"padding", geom_.padding}};
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> Conv2dLayer<Scalar>::clone() const {
  return std::make_unique<Conv2dLayer>(*this);
}

// --- ActivationLayer -------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> ActivationLayer<Scalar>::forward(const Tensor<Scalar>& x,
                                                LayerCache<Scalar>* cache) const {
  Tensor<Scalar> out = activate(x, kind_);
  if (cache != nullptr) cache->tensors = {out};
  return out;
}

template <typename Scalar>
Tensor<Scalar> ActivationLayer<Scalar>::backward(const LayerCache<Scalar>& cache,
                                                 const Tensor<Scalar>& grad_out,
                                                 std::span<Matrix<Scalar>>, bool) const {
  return activate_backward(cache.tensors[0], grad_out, kind_);
}

template <typename Scalar>
nlohmann::json ActivationLayer<Scalar>::describe() const {
  return {{"type", "act"}, {"kind", activation_name(kind_)}};
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> ActivationLayer<Scalar>::clone() const {
  return std::make_unique<ActivationLayer>(*this);
}

// --- ResidualBlock ---------------------------------------------------------

template <typename Scalar>
ResidualBlock<Scalar>::ResidualBlock(int channels, Activation kind, std::mt19937_64* rng)
    : geom_{channels, channels, 3, 1, 1}, kind_(kind) {
  const int fan_in = geom_.patch_size();
  this->params_.push_back(he_normal<Scalar>(fan_in, channels, fan_in, rng));
  this->params_.push_back(Matrix<Scalar>::Zero(1, channels));
  // The residual branch starts small so the block is close to identity.
  this->params_.push_back(Scalar(0.5) * he_normal<Scalar>(fan_in, channels, fan_in, rng));
  this->params_.push_back(Matrix<Scalar>::Zero(1, channels));
}

template <typename Scalar>
Tensor<Scalar> ResidualBlock<Scalar>::forward(const Tensor<Scalar>& x,
                                              LayerCache<Scalar>* cache) const {
  Matrix<Scalar> p1;
  Matrix<Scalar> p2;
  const bool keep = cache != nullptr;
  Tensor<Scalar> a1 =
      activate(conv2d(x, this->params_[0], this->params_[1], geom_, keep ? &p1 : nullptr), kind_);
  Tensor<Scalar> sum = conv2d(a1, this->params_[2], this->params_[3], geom_, keep ? &p2 : nullptr);
  sum.data += x.data;
  Tensor<Scalar> out = activate(sum, kind_);
  if (keep) {
    cache->in_height = x.height;
    cache->in_width = x.width;
    cache->matrices = {std::move(p1), std::move(p2)};
    cache->tensors = {std::move(a1), out};
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> ResidualBlock<Scalar>::backward(const LayerCache<Scalar>& cache,
                                               const Tensor<Scalar>& grad_out,
                                               std::span<Matrix<Scalar>> param_grads,
                                               bool need_input_grad) const {
  const Tensor<Scalar>& a1 = cache.tensors[0];
  const Tensor<Scalar>& out = cache.tensors[1];
  Tensor<Scalar> d_sum = activate_backward(out, grad_out, kind_);
  Tensor<Scalar> d_a1 = conv2d_backward(cache.matrices[1], d_sum, this->params_[2], geom_,
                                        cache.in_height, cache.in_width,
                                        grad_slot(param_grads, 2), grad_slot(param_grads, 3), true);
  Tensor<Scalar> d_h1 = activate_backward(a1, d_a1, kind_);
  Tensor<Scalar> d_x = conv2d_backward(cache.matrices[0], d_h1, this->params_[0], geom_,
                                       cache.in_height, cache.in_width, grad_slot(param_grads, 0),
                                       grad_slot(param_grads, 1), need_input_grad);
  if (!need_input_grad) return {};
  d_x.data += d_sum.data;
  return d_x;
}

template <typename Scalar>
nlohmann::json ResidualBlock<Scalar>::describe() const {
  return {{"type", "residual"}, {"channels", geom_.in_channels}, {"act", activation_name(kind_)}};
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> ResidualBlock<Scalar>::clone() const {
  return std::make_unique<ResidualBlock>(*this);
}

// --- GlobalAvgPoolLayer ----------------------------------------------------

template <typename Scalar>
Tensor<Scalar> GlobalAvgPoolLayer<Scalar>::forward(const Tensor<Scalar>& x,
                                                   LayerCache<Scalar>* cache) const {
  if (cache != nullptr) {
    cache->in_height = x.height;
    cache->in_width = x.width;
  }
  return global_avg_pool(x);
}

template <typename Scalar>
Tensor<Scalar> GlobalAvgPoolLayer<Scalar>::backward(const LayerCache<Scalar>& cache,
                                                    const Tensor<Scalar>& grad_out,
                                                    std::span<Matrix<Scalar>>, bool) const {
  return global_avg_pool_backward(grad_out, cache.in_height, cache.in_width);
}

template <typename Scalar>
nlohmann::json GlobalAvgPoolLayer<Scalar>::describe() const {
  return {{"type", "gap"}};
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> GlobalAvgPoolLayer<Scalar>::clone() const {
  return std::make_unique<GlobalAvgPoolLayer>(*this);
}

// --- LinearLayer -----------------------------------------------------------

template <typename Scalar>
LinearLayer<Scalar>::LinearLayer(int in_features, int out_features, std::mt19937_64* rng)
    : in_features_(in_features), out_features_(out_features) {
  this->params_.push_back(he_normal<Scalar>(in_features, out_features, in_features, rng));
  this->params_.push_back(Matrix<Scalar>::Zero(1, out_features));
}

template <typename Scalar>
Tensor<Scalar> LinearLayer<Scalar>::forward(const Tensor<Scalar>& x,
                                            LayerCache<Scalar>* cache) const {
  if (x.plane() != 1 || x.channels() != in_features_) {
    throw Error(ErrorCode::kShapeMismatch, "linear layer expects " +
                                               std::to_string(in_features_) + "x1x1, got " +
                                               x.shape().str());
  }
  Tensor<Scalar> out;
  out.batch = x.batch;
  out.height = 1;
  out.width = 1;
  out.data.noalias() = x.data * this->params_[0];
  out.data.rowwise() += this->params_[1].row(0);
  if (cache != nullptr) cache->tensors = {x};
  return out;
}

template <typename Scalar>
Tensor<Scalar> LinearLayer<Scalar>::backward(const LayerCache<Scalar>& cache,
                                             const Tensor<Scalar>& grad_out,
                                             std::span<Matrix<Scalar>> param_grads,
                                             bool need_input_grad) const {
  if (!param_grads.empty()) {
    param_grads[0].noalias() += cache.tensors[0].data.transpose() * grad_out.data;
    param_grads[1] += grad_out.data.colwise().sum();
  }
  if (!need_input_grad) return {};
  Tensor<Scalar> dx;
  dx.batch = grad_out.batch;
  dx.height = 1;
  dx.width = 1;
  dx.data.noalias() = grad_out.data * this->params_[0].transpose();
  return dx;
}

template <typename Scalar>
Shape LinearLayer<Scalar>::output_shape(Shape in) const {
  if (in.plane() != 1 || in.channels != in_features_) {
    throw Error(ErrorCode::kShapeMismatch, "linear layer input " + in.str());
  }
  return {out_features_, 1, 1};
}

template <typename Scalar>
nlohmann::json LinearLayer<Scalar>::describe() const {
  return {{"type", "linear"}, {"in", in_features_}, {"out", out_features_}};
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> LinearLayer<Scalar>::clone() const {
  return std::make_unique<LinearLayer>(*this);
}

// --- UpsampleLayer ---------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> UpsampleLayer<Scalar>::forward(const Tensor<Scalar>& x, LayerCache<Scalar>*) const {
  return upsample_nearest2x(x);
}

template <typename Scalar>
Tensor<Scalar> UpsampleLayer<Scalar>::backward(const LayerCache<Scalar>&,
                                               const Tensor<Scalar>& grad_out,
                                               std::span<Matrix<Scalar>>, bool) const {
  return upsample_nearest2x_backward(grad_out);
}

template <typename Scalar>
nlohmann::json UpsampleLayer<Scalar>::describe() const {
  return {{"type", "upsample2x"}};
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> UpsampleLayer<Scalar>::clone() const {
  return std::make_unique<UpsampleLayer>(*this);
}

// --- BoundedTanhLayer ------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> BoundedTanhLayer<Scalar>::forward(const Tensor<Scalar>& x,
                                                 LayerCache<Scalar>* cache) const {
  Tensor<Scalar> out;
  out.batch = x.batch;
  out.height = x.height;
  out.width = x.width;
  out.data = (x.data.array().tanh() * Scalar(scale_)).matrix();
  if (cache != nullptr) cache->tensors = {out};
  return out;
}

template <typename Scalar>
Tensor<Scalar> BoundedTanhLayer<Scalar>::backward(const LayerCache<Scalar>& cache,
                                                  const Tensor<Scalar>& grad_out,
                                                  std::span<Matrix<Scalar>>, bool) const {
  const Scalar s = Scalar(scale_);
  Tensor<Scalar> dx;
  dx.batch = grad_out.batch;
  dx.height = grad_out.height;
  dx.width = grad_out.width;
  dx.data = (grad_out.data.array() * (s - cache.tensors[0].data.array().square() / s)).matrix();
  return dx;
}

template <typename Scalar>
nlohmann::json BoundedTanhLayer<Scalar>::describe() const {
  return {{"type", "bounded_tanh"}, {"scale", scale_}};
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> BoundedTanhLayer<Scalar>::clone() const {
  return std::make_unique<BoundedTanhLayer>(*this);
}

// --- Network ---------------------------------------------------------------

template <typename Scalar>
Network<Scalar>::Network(const Network& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
}

template <typename Scalar>
Network<Scalar>& Network<Scalar>::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename Scalar>
Network<Scalar>& Network<Scalar>::add(std::unique_ptr<Layer<Scalar>> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::forward(const Tensor<Scalar>& x,
                                        NetworkCache<Scalar>* cache) const {
  if (cache != nullptr) cache->layers.assign(layers_.size(), {});
  Tensor<Scalar> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i]->forward(h, cache != nullptr ? &cache->layers[i] : nullptr);
  }
  return h;
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::backward(const NetworkCache<Scalar>& cache,
                                         const Tensor<Scalar>& grad_out, Gradients<Scalar>* grads,
                                         bool need_input_grad) const {
  std::vector<std::size_t> offsets(layers_.size() + 1, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    offsets[i + 1] = offsets[i] + layers_[i]->params().size();
  }
  Tensor<Scalar> g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    std::span<Matrix<Scalar>> slot;
    if (grads != nullptr) {
      slot = std::span<Matrix<Scalar>>(grads->data() + offsets[i], offsets[i + 1] - offsets[i]);
    }
    g = layers_[i]->backward(cache.layers[i], g, slot, i > 0 || need_input_grad);
  }
  return g;
}

template <typename Scalar>
Shape Network<Scalar>::output_shape(Shape in) const {
  for (const auto& layer : layers_) in = layer->output_shape(in);
  return in;
}

template <typename Scalar>
Eigen::Index Network<Scalar>::num_parameters() const {
  Eigen::Index total = 0;
  for (const auto* p : parameters()) total += p->size();
  return total;
}

template <typename Scalar>
std::vector<Matrix<Scalar>*> Network<Scalar>::parameters() {
  std::vector<Matrix<Scalar>*> out;
  for (auto& layer : layers_) {
    for (auto& p : layer->params()) out.push_back(&p);
  }
  return out;
}

template <typename Scalar>
std::vector<const Matrix<Scalar>*> Network<Scalar>::parameters() const {
  std::vector<const Matrix<Scalar>*> out;
  for (const auto& layer : layers_) {
    for (const auto& p : layer->params()) out.push_back(&p);
  }
  return out;
}

template <typename Scalar>
Gradients<Scalar> Network<Scalar>::zero_gradients() const {
  Gradients<Scalar> grads;
  for (const auto* p : parameters()) grads.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
  return grads;
}

template <typename Scalar>
Vector<Scalar> Network<Scalar>::flatten() const {
  Vector<Scalar> flat(num_parameters());
  Eigen::Index offset = 0;
  for (const auto* p : parameters()) {
    flat.segment(offset, p->size()) = p->reshaped();
    offset += p->size();
  }
  return flat;
}

template <typename Scalar>
void Network<Scalar>::assign(const Vector<Scalar>& flat) {
  if (flat.size() != num_parameters()) {
    throw Error(ErrorCode::kShapeMismatch, "parameter vector has " + std::to_string(flat.size()) +
                                               " entries, network needs " +
                                               std::to_string(num_parameters()));
  }
  Eigen::Index offset = 0;
  for (auto* p : parameters()) {
    p->reshaped() = flat.segment(offset, p->size());
    offset += p->size();
  }
}

template <typename Scalar>
std::uint64_t Network<Scalar>::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto* p : parameters()) {
    h = fnv1a(p->data(), sizeof(Scalar) * static_cast<std::size_t>(p->size()), h);
  }
  return h;
}

template <typename Scalar>
nlohmann::json Network<Scalar>::describe() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_) layers.push_back(layer->describe());
  return layers;
}

template <typename Scalar>
Network<Scalar> Network<Scalar>::from_description(const nlohmann::json& description) {
  Network net;
  try {
    for (const auto& d : description) {
      const std::string type = d.at("type").get<std::string>();
      if (type == "conv") {
        ConvGeometry g{d.at("in").get<int>(), d.at("out").get<int>(), d.at("kernel").get<int>(),
                       d.at("stride").get<int>(), d.at("padding").get<int>()};
        net.add(std::make_unique<Conv2dLayer<Scalar>>(g, nullptr));
      } else if (type == "act") {
        net.add(std::make_unique<ActivationLayer<Scalar>>(
            parse_activation(d.at("kind").get<std::string>())));
      } else if (type == "residual") {
        net.add(std::make_unique<ResidualBlock<Scalar>>(
            d.at("channels").get<int>(), parse_activation(d.at("act").get<std::string>()),
            nullptr));
      } else if (type == "gap") {
        net.add(std::make_unique<GlobalAvgPoolLayer<Scalar>>());
      } else if (type == "linear") {
        net.add(std::make_unique<LinearLayer<Scalar>>(d.at("in").get<int>(),
                                                      d.at("out").get<int>(), nullptr));
      } else if (type == "upsample2x") {
        net.add(std::make_unique<UpsampleLayer<Scalar>>());
      } else if (type == "bounded_tanh") {
        net.add(std::make_unique<BoundedTanhLayer<Scalar>>(d.at("scale").get<double>()));
      } else {
        throw Error(ErrorCode::kCheckpointCorrupt, "unknown layer type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCheckpointCorrupt, std::string("bad layer description: ") + e.what());
  }
  return net;
}

#define FAAP_INSTANTIATE_NETWORK(S)        \
  template class Conv2dLayer<S>;           \
  template class ActivationLayer<S>;       \
  template class ResidualBlock<S>;         \
  template class GlobalAvgPoolLayer<S>;    \
  template class LinearLayer<S>;           \
  template class UpsampleLayer<S>;         \
  template class BoundedTanhLayer<S>;      \
  template class Network<S>;

FAAP_INSTANTIATE_NETWORK(float)
FAAP_INSTANTIATE_NETWORK(double)

}  // namespace faap
