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

#include "faap/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faap/checkpoint.hpp"
#include "faap/optimizer.hpp"

namespace faap {

namespace {

template <typename Scalar>
Tensor<Scalar> dense(Matrix<Scalar> m) {
  Tensor<Scalar> t;
  t.batch = static_cast<int>(m.rows());
  t.height = 1;
  t.width = 1;
  t.data = std::move(m);
  return t;
}

std::vector<int> class_indices(const DatasetSplit& split, std::span<const std::size_t> idx,
                               bool protected_attr) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    const auto& s = split.samples[i];
    out.push_back(class_index(protected_attr ? s.z : s.y));
  }
  return out;
}

const char* activation_key(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kTanh: return "tanh";
  }
  return "relu";
}

}  // namespace

nlohmann::json ArchitectureConfig::to_json() const {
  return {{"input_channels", input_channels}, {"image_size", image_size},
          {"base_width", base_width},         {"stages", stages},
          {"blocks_per_stage", blocks_per_stage}, {"residual", residual},
          {"activation", activation_key(activation)}};
}

ArchitectureConfig ArchitectureConfig::from_json(const nlohmann::json& j) {
  ArchitectureConfig a;
  a.input_channels = j.at("input_channels").get<int>();
  a.image_size = j.at("image_size").get<int>();
  a.base_width = j.at("base_width").get<int>();
  a.stages = j.at("stages").get<int>();
  a.blocks_per_stage = j.at("blocks_per_stage").get<int>();
  a.residual = j.at("residual").get<bool>();
  const std::string act = j.at("activation").get<std::string>();
  a.activation = act == "tanh" ? Activation::kTanh
                 : act == "leaky_relu" ? Activation::kLeakyRelu
                                       : Activation::kRelu;
  return a;
}

template <typename Scalar>
Network<Scalar> build_feature_extractor(const ArchitectureConfig& arch, std::mt19937_64& rng) {
  Network<Scalar> net;
  int in_ch = arch.input_channels;
  for (int s = 0; s < arch.stages; ++s) {
    const int width = arch.base_width << s;
    net.add(std::make_unique<Conv2dLayer<Scalar>>(ConvGeometry{in_ch, width, 3, 2, 1}, &rng));
    net.add(std::make_unique<ActivationLayer<Scalar>>(arch.activation));
    for (int b = 0; b < arch.blocks_per_stage; ++b) {
      if (arch.residual) {
        net.add(std::make_unique<ResidualBlock<Scalar>>(width, arch.activation, &rng));
      } else {
        net.add(std::make_unique<Conv2dLayer<Scalar>>(ConvGeometry{width, width, 3, 1, 1}, &rng));
        net.add(std::make_unique<ActivationLayer<Scalar>>(arch.activation));
      }
    }
    in_ch = width;
  }
  return net;
}

template <typename Scalar>
Network<Scalar> build_label_predictor(const ArchitectureConfig& arch, std::mt19937_64& rng) {
  Network<Scalar> net;
  net.add(std::make_unique<GlobalAvgPoolLayer<Scalar>>());
  net.add(std::make_unique<LinearLayer<Scalar>>(arch.feature_channels(), 2, &rng));
  return net;
}

template <typename Scalar>
Network<Scalar> build_latent_head(int feature_channels, int hidden, std::mt19937_64& rng) {
  Network<Scalar> net;
  net.add(std::make_unique<GlobalAvgPoolLayer<Scalar>>());
  net.add(std::make_unique<LinearLayer<Scalar>>(feature_channels, hidden, &rng));
  net.add(std::make_unique<ActivationLayer<Scalar>>(Activation::kRelu));
  net.add(std::make_unique<LinearLayer<Scalar>>(hidden, 2, &rng));
  return net;
}

std::string to_string(TrainFlavor flavor) {
  switch (flavor) {
    case TrainFlavor::kNormal: return "normal";
    case TrainFlavor::kFairAdversarial: return "fair";
    case TrainFlavor::kUnfairLabelFlip: return "lf";
    case TrainFlavor::kUnfairReversedGradient: return "rg";
  }
  return "normal";
}

TrainFlavor parse_flavor(const std::string& name) {
  if (name == "normal") return TrainFlavor::kNormal;
  if (name == "fair" || name == "fair_adversarial") return TrainFlavor::kFairAdversarial;
  if (name == "lf" || name == "unfair_LF") return TrainFlavor::kUnfairLabelFlip;
  if (name == "rg" || name == "unfair_RG") return TrainFlavor::kUnfairReversedGradient;
  throw Error(ErrorCode::kInvalidConfig, "unknown flavor '" + name + "'");
}

void FlavorSpec::validate() const {
  const bool wants_rate = flavor == TrainFlavor::kUnfairLabelFlip;
  const bool wants_weight =
      flavor == TrainFlavor::kFairAdversarial || flavor == TrainFlavor::kUnfairReversedGradient;
  if (wants_rate != flip_rate.has_value()) {
    throw Error(ErrorCode::kInvalidConfig, "flip_rate is required by, and only by, lf");
  }
  if (wants_weight != adversary_weight.has_value()) {
    throw Error(ErrorCode::kInvalidConfig, "adversary_weight is required by, and only by, fair/rg");
  }
  if (flip_rate && (*flip_rate < 0.0 || *flip_rate > 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "flip_rate must lie in [0,1]");
  }
  if (adversary_weight && *adversary_weight < 0.0) {
    throw Error(ErrorCode::kInvalidConfig, "adversary_weight must be non-negative");
  }
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size <= 0 || learning_rate <= 0.0 || adversary_learning_rate <= 0.0 ||
      adversary_hidden <= 0) {
    throw Error(ErrorCode::kInvalidConfig, "epochs, batch_size, learning_rate out of range");
  }
  if (arch.stages <= 0 || arch.base_width <= 0 || arch.image_size % (1 << arch.stages) != 0) {
    throw Error(ErrorCode::kInvalidConfig, "image_size must be divisible by 2^stages");
  }
}

template <typename Scalar>
DeployedModel<Scalar>::DeployedModel(Network<Scalar> extractor, Network<Scalar> predictor,
                                     ModelMetadata metadata)
    : extractor_(std::move(extractor)),
      predictor_(std::move(predictor)),
      metadata_(std::move(metadata)) {}

template <typename Scalar>
void DeployedModel<Scalar>::check_input(const Tensor<Scalar>& images) const {
  if (images.shape() != input_shape()) {
    throw Error(ErrorCode::kShapeMismatch, "model expects " + input_shape().str() + " inputs, got " +
                                               images.shape().str());
  }
}

template <typename Scalar>
Tensor<Scalar> DeployedModel<Scalar>::extract_features(const Tensor<Scalar>& images) const {
  check_input(images);
  return extractor_.forward(images);
}

template <typename Scalar>
Matrix<Scalar> DeployedModel<Scalar>::scores(const Tensor<Scalar>& images) const {
  return predictor_.forward(extract_features(images)).data;
}

template <typename Scalar>
Prediction<Scalar> DeployedModel<Scalar>::predict(const Tensor<Scalar>& images) const {
  Prediction<Scalar> p;
  p.scores = scores(images);
  p.labels = argmax_labels(p.scores);
  return p;
}

template <typename Scalar>
std::uint64_t DeployedModel<Scalar>::checksum() const {
  const std::uint64_t g = extractor_.checksum();
  const std::uint64_t f = predictor_.checksum();
  return fnv1a(&f, sizeof(f), g);
}

DeployedModel<float> train_deployed(const DatasetSplit& train, const DatasetSplit& validation,
                                    const FlavorSpec& flavor, const TrainConfig& config,
                                    const std::string& dataset_id, const EpochCallback& on_epoch) {
  flavor.validate();
  config.validate();
  if (train.empty()) throw Error(ErrorCode::kEmptySplit, "training split is empty");
  if (train.shape() != config.arch.input_shape()) {
    throw Error(ErrorCode::kInvalidConfig, "architecture expects " +
                                               config.arch.input_shape().str() + " images, data is " +
                                               train.shape().str());
  }
  std::mt19937_64 rng(config.seed);
  Network<float> g = build_feature_extractor<float>(config.arch, rng);
  Network<float> f = build_label_predictor<float>(config.arch, rng);
  const bool adversarial = flavor.adversary_weight.has_value();
  Network<float> adversary;
  if (adversarial) {
    adversary = build_latent_head<float>(config.arch.feature_channels(), config.adversary_hidden, rng);
  }
  const float coupling = !adversarial ? 0.0f
                         : flavor.flavor == TrainFlavor::kFairAdversarial
                             ? -static_cast<float>(*flavor.adversary_weight)
                             : static_cast<float>(*flavor.adversary_weight);

  DatasetSplit flipped;
  const DatasetSplit* data = &train;
  if (flavor.flavor == TrainFlavor::kUnfairLabelFlip) {
    flipped = flip_labels(train, *flavor.flip_rate, config.seed);
    data = &flipped;
  }

  Optimizer<float> opt_g(g, config.learning_rate);
  Optimizer<float> opt_f(f, config.learning_rate);
  Optimizer<float> opt_a(adversary, config.adversary_learning_rate);

  std::vector<std::size_t> order(data->size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps_per_epoch = (order.size() + config.batch_size - 1) / config.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch) * std::max(config.epochs, 1);
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log{epoch + 1, 0, 0, 0};
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const Tensor<float> x = data->images(idx);
      const std::vector<int> y = class_indices(*data, idx, false);

      NetworkCache<float> cache_g;
      NetworkCache<float> cache_f;
      const Tensor<float> r = g.forward(x, &cache_g);
      const Tensor<float> logits = f.forward(r, &cache_f);
      Matrix<float> d_logits;
      const float loss = cross_entropy(logits.data, y, &d_logits);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kNonFiniteLoss, "deployed-model loss diverged in epoch " +
                                                   std::to_string(epoch));
      }
      log.label_loss += loss * static_cast<double>(count);
      const std::vector<int> predicted = argmax_labels(logits.data);
      for (std::size_t i = 0; i < count; ++i) {
        log.label_accuracy += class_index(predicted[i]) == y[i] ? 1.0 : 0.0;
      }
      Gradients<float> grad_g = g.zero_gradients();
      Gradients<float> grad_f = f.zero_gradients();
      Tensor<float> d_r = f.backward(cache_f, dense(std::move(d_logits)), &grad_f);

      if (adversarial) {
        const std::vector<int> z = class_indices(*data, idx, true);
        NetworkCache<float> cache_a;
        const Tensor<float> adv_logits = adversary.forward(r, &cache_a);
        Matrix<float> d_adv;
        log.adversary_loss += cross_entropy(adv_logits.data, z, &d_adv) * static_cast<double>(count);
        Gradients<float> grad_a = adversary.zero_gradients();
        const Tensor<float> d_r_adv = adversary.backward(cache_a, dense(std::move(d_adv)), &grad_a);
        // Coupling ramps from 0 to its full value: 2 / (1 + exp(-10 p)) - 1.
        const double progress = static_cast<double>(step) / total_steps;
        const float ramp = static_cast<float>(2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0);
        d_r.data += (coupling * ramp) * d_r_adv.data;
        opt_a.step(adversary, grad_a);
      }
      g.backward(cache_g, d_r, &grad_g, false);
      opt_g.step(g, grad_g);
      opt_f.step(f, grad_f);
      ++step;
    }
    const double n = static_cast<double>(order.size());
    log.label_loss /= n;
    log.label_accuracy /= n;
    log.adversary_loss /= n;
    if (on_epoch) on_epoch(log);
  }

  ModelMetadata meta{flavor, config.seed, dataset_id, config.arch};
  DeployedModel<float> model(std::move(g), std::move(f), std::move(meta));
  if (!validation.empty()) {
    const auto pred = predict_split(model, validation);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      correct += pred.labels[i] == validation.samples[i].y ? 1 : 0;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(validation.size());
    if (acc < 0.5 + config.convergence_margin) {
      throw Error(ErrorCode::kNonConvergence,
                  to_string(flavor.flavor) + " model reached validation accuracy " +
                      std::to_string(acc));
    }
  }
  return model;
}

template <typename Scalar>
Prediction<Scalar> predict_split(const DeployedModel<Scalar>& model, const DatasetSplit& split,
                                 int chunk) {
  Prediction<Scalar> out;
  out.scores.resize(static_cast<Eigen::Index>(split.size()), 2);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < split.size(); start += chunk) {
    const std::size_t count = std::min<std::size_t>(chunk, split.size() - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<Scalar> x = split.images(idx).template cast<Scalar>();
    out.scores.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) =
        model.scores(x);
  }
  out.labels = argmax_labels(out.scores);
  return out;
}

void save_model(const std::filesystem::path& path, const DeployedModel<float>& model) {
  const ModelMetadata& m = model.metadata();
  nlohmann::json meta = {{"flavor", to_string(m.flavor.flavor)},
                         {"seed", m.seed},
                         {"dataset_id", m.dataset_id},
                         {"arch", m.arch.to_json()},
                         {"provenance", m.provenance}};
  if (m.flavor.flip_rate) meta["flip_rate"] = *m.flavor.flip_rate;
  if (m.flavor.adversary_weight) meta["adversary_weight"] = *m.flavor.adversary_weight;
  write_checkpoint(path, {"deployed_model",
                          meta,
                          {{"extractor", model.extractor()}, {"predictor", model.predictor()}}});
}

DeployedModel<float> load_model(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path, "deployed_model");
  ModelMetadata m;
  try {
    m.flavor.flavor = parse_flavor(ckpt.metadata.at("flavor").get<std::string>());
    if (ckpt.metadata.contains("flip_rate")) m.flavor.flip_rate = ckpt.metadata["flip_rate"].get<double>();
    if (ckpt.metadata.contains("adversary_weight")) {
      m.flavor.adversary_weight = ckpt.metadata["adversary_weight"].get<double>();
    }
    m.seed = ckpt.metadata.at("seed").get<std::uint64_t>();
    m.dataset_id = ckpt.metadata.at("dataset_id").get<std::string>();
    m.arch = ArchitectureConfig::from_json(ckpt.metadata.at("arch"));
    m.provenance = ckpt.metadata.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCheckpointCorrupt, path.string() + ": bad metadata: " + e.what());
  }
  return DeployedModel<float>(ckpt.network("extractor"), ckpt.network("predictor"), m);
}

#define FAAP_INSTANTIATE_ZOO(S)                                                               \
  template Network<S> build_feature_extractor<S>(const ArchitectureConfig&, std::mt19937_64&); \
  template Network<S> build_label_predictor<S>(const ArchitectureConfig&, std::mt19937_64&);   \
  template Network<S> build_latent_head<S>(int, int, std::mt19937_64&);                        \
  template class DeployedModel<S>;                                                             \
  template Prediction<S> predict_split(const DeployedModel<S>&, const DatasetSplit&, int);

FAAP_INSTANTIATE_ZOO(float)
FAAP_INSTANTIATE_ZOO(double)

}  // namespace faap
