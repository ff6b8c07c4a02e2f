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

// Deployed classifiers: a feature extractor g producing the last
// convolutional block and a label predictor f on top of it, trained in one of
// four flavours and then frozen.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "faap/data.hpp"
#include "faap/network.hpp"

namespace faap {

/// Residual CNN family. Each stage is a stride-2 3x3 convolution followed by
/// `blocks_per_stage` residual blocks (or plain conv + activation blocks when
/// `residual` is false), so the feature block has stride 2^stages.
struct ArchitectureConfig {
  int input_channels = 3;
  int image_size = 32;
  int base_width = 8;
  int stages = 2;
  int blocks_per_stage = 1;
  bool residual = true;
  Activation activation = Activation::kRelu;

  int feature_channels() const { return base_width << (stages - 1); }
  int feature_stride() const { return 1 << stages; }
  Shape input_shape() const { return {input_channels, image_size, image_size}; }
  nlohmann::json to_json() const;
  static ArchitectureConfig from_json(const nlohmann::json& j);
};

template <typename Scalar>
Network<Scalar> build_feature_extractor(const ArchitectureConfig& arch, std::mt19937_64& rng);

/// Global average pool + linear layer to two class scores.
template <typename Scalar>
Network<Scalar> build_label_predictor(const ArchitectureConfig& arch, std::mt19937_64& rng);

/// Global average pool + two-layer perceptron to two class scores. Shared by
/// the fair-training adversary and the attribute discriminator.
template <typename Scalar>
Network<Scalar> build_latent_head(int feature_channels, int hidden, std::mt19937_64& rng);

enum class TrainFlavor { kNormal, kFairAdversarial, kUnfairLabelFlip, kUnfairReversedGradient };

std::string to_string(TrainFlavor flavor);
/// Accepts normal|fair|lf|rg (and the long forms returned by to_string).
TrainFlavor parse_flavor(const std::string& name);

/// A training flavour with its knobs: flip_rate exactly for label flipping,
/// adversary_weight exactly for the two adversarial flavours.
struct FlavorSpec {
  TrainFlavor flavor = TrainFlavor::kNormal;
  std::optional<double> flip_rate;
  std::optional<double> adversary_weight;

  static FlavorSpec normal() { return {}; }
  static FlavorSpec fair(double weight) { return {TrainFlavor::kFairAdversarial, {}, weight}; }
  static FlavorSpec label_flip(double rate) { return {TrainFlavor::kUnfairLabelFlip, rate, {}}; }
  static FlavorSpec reversed_gradient(double weight) {
    return {TrainFlavor::kUnfairReversedGradient, {}, weight};
  }
  void validate() const;
};

struct ModelMetadata {
  FlavorSpec flavor;
  std::uint64_t seed = 0;
  std::string dataset_id;
  ArchitectureConfig arch;
  nlohmann::json provenance = nlohmann::json::object();  // free-form run record
};

template <typename Scalar>
struct Prediction {
  Matrix<Scalar> scores;   // batch x 2, column 1 is the y = +1 score
  std::vector<int> labels; // {-1,+1}; ties go to -1
};

/// A frozen classifier split into g (extractor) and f (predictor). It offers
/// only const access to its parameters.
template <typename Scalar>
class DeployedModel {
 public:
  DeployedModel(Network<Scalar> extractor, Network<Scalar> predictor, ModelMetadata metadata);

  const Network<Scalar>& extractor() const { return extractor_; }
  const Network<Scalar>& predictor() const { return predictor_; }
  const ModelMetadata& metadata() const { return metadata_; }
  bool frozen() const { return true; }

  Shape input_shape() const { return metadata_.arch.input_shape(); }
  Shape feature_shape() const { return extractor_.output_shape(input_shape()); }

  /// g(x): the last convolutional feature block. Throws ShapeMismatch.
  Tensor<Scalar> extract_features(const Tensor<Scalar>& images) const;
  /// f(g(x)) scores.
  Matrix<Scalar> scores(const Tensor<Scalar>& images) const;
  Prediction<Scalar> predict(const Tensor<Scalar>& images) const;

  /// Checksum over g's and f's parameters.
  std::uint64_t checksum() const;

  template <typename Other>
  DeployedModel<Other> cast() const {
    return DeployedModel<Other>(extractor_.template cast<Other>(),
                                predictor_.template cast<Other>(), metadata_);
  }

 private:
  void check_input(const Tensor<Scalar>& images) const;

  Network<Scalar> extractor_;
  Network<Scalar> predictor_;
  ModelMetadata metadata_;
};

struct TrainConfig {
  ArchitectureConfig arch;
  int epochs = 8;
  int batch_size = 64;
  double learning_rate = 5e-4;
  std::uint64_t seed = 0;
  int adversary_hidden = 32;
  double adversary_learning_rate = 5e-3;
  /// Validation accuracy must exceed 0.5 + margin.
  double convergence_margin = 0.05;
  void validate() const;
};

/// Trains and freezes a deployed model on `train`; `validation` guards
/// against non-convergence (skipped when empty).
///   normal: cross-entropy on y.
///   fair:   plus an adversary predicting z from g's features, whose gradient
///           reaches g through a reversal of coefficient -adversary_weight.
///   lf:     normal training on flip_labels(train, flip_rate, seed).
///   rg:     the adversary's gradient reaches g un-reversed with coefficient
///           +adversary_weight, pushing z information into the features.
/// Both adversarial couplings ramp up as 2 / (1 + exp(-10 p)) - 1 with
/// training progress p in [0, 1).
struct EpochLog {
  int epoch = 0;
  double label_loss = 0;      // mean CE on y over the epoch
  double label_accuracy = 0;  // training accuracy on y
  double adversary_loss = 0;  // mean CE of the z adversary (0 without one)
};
using EpochCallback = std::function<void(const EpochLog&)>;

DeployedModel<float> train_deployed(const DatasetSplit& train, const DatasetSplit& validation,
                                    const FlavorSpec& flavor, const TrainConfig& config,
                                    const std::string& dataset_id = "",
                                    const EpochCallback& on_epoch = {});

/// Inference in fixed-size chunks; concatenated output matches one large batch.
template <typename Scalar>
Prediction<Scalar> predict_split(const DeployedModel<Scalar>& model, const DatasetSplit& split,
                                 int chunk = 256);

void save_model(const std::filesystem::path& path, const DeployedModel<float>& model);
DeployedModel<float> load_model(const std::filesystem::path& path);

}  // namespace faap
