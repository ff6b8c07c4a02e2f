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

// Fairness-aware adversarial perturbation.
//
// A generator G maps an image x to a bounded additive perturbation; the
// perturbed image is x_hat = clamp(x + clamp(G(x), -eps, eps), 0, 1). A
// discriminator D reads the frozen model's latent block g(x_hat) and predicts
// the protected attribute z. Training alternates, on the same batch:
//
//   L_D      = mean CE(D(g(x_hat)), z)                 D descends this
//   L_fair   = -L_D - alpha * mean H(D(g(x_hat)))
//   L_T      = mean CE(f(g(x_hat)), y)
//   L_G      = L_fair + beta * L_T                      G descends this
//
// alpha never enters the discriminator update. The deployed model is only
// read: gradients flow through g and f to the input, never into them.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "faap/data.hpp"
#include "faap/model_zoo.hpp"
#include "faap/network.hpp"
#include "faap/optimizer.hpp"

namespace faap {

enum class Ablation {
  kNone,
  kTargetOnly,  // G trained on beta * L_T alone (fairness term disabled)
};

struct FaapConfig {
  double alpha = 0.1;
  double beta = 1.0;
  double lr_discriminator = 5e-4;
  double lr_generator = 2e-4;
  int iterations = 1000;
  int batch_size = 64;
  double epsilon = 0.05;
  Ablation ablation = Ablation::kNone;
  OptimizerKind optimizer_discriminator = OptimizerKind::kAdam;
  OptimizerKind optimizer_generator = OptimizerKind::kAdam;
  int generator_width = 8;
  int discriminator_hidden = 32;

  void validate() const;
  nlohmann::json to_json() const;
  /// Hex FNV-1a of the canonical JSON form.
  std::string hash() const;
};

/// Encoder / residual / decoder image-to-image network whose last layer is
/// epsilon * tanh, so raw outputs already lie inside the budget.
template <typename Scalar>
Network<Scalar> build_generator(Shape input, int width, double epsilon, std::mt19937_64& rng);

/// x_hat = clamp(x + clamp(delta, -eps, eps), 0, 1). `pass_mask`, when given,
/// receives d x_hat / d delta (1 where neither clamp is active, else 0).
template <typename Scalar>
Tensor<Scalar> apply_perturbation(const Tensor<Scalar>& x, const Tensor<Scalar>& delta,
                                  double epsilon, Matrix<Scalar>* pass_mask = nullptr);

template <typename Scalar>
class PerturbationGenerator {
 public:
  struct Cache {
    NetworkCache<Scalar> network;
    Matrix<Scalar> pass_mask;
  };

  PerturbationGenerator(Network<Scalar> network, double epsilon,
                        nlohmann::json provenance = nlohmann::json::object());

  double epsilon() const { return epsilon_; }
  const Network<Scalar>& network() const { return network_; }
  Network<Scalar>& network() { return network_; }
  const nlohmann::json& provenance() const { return provenance_; }
  void set_provenance(nlohmann::json p) { provenance_ = std::move(p); }

  /// Raw generator output G(x), before clamping.
  Tensor<Scalar> raw(const Tensor<Scalar>& images) const;
  /// Perturbed images; both the budget and the [0,1] range hold exactly.
  Tensor<Scalar> perturb(const Tensor<Scalar>& images, Cache* cache = nullptr) const;
  /// Accumulates dL/dtheta_G given dL/dx_hat.
  void backward(const Cache& cache, const Tensor<Scalar>& grad_perturbed,
                Gradients<Scalar>* grads) const;

  template <typename Other>
  PerturbationGenerator<Other> cast() const {
    return PerturbationGenerator<Other>(network_.template cast<Other>(), epsilon_, provenance_);
  }

 private:
  Network<Scalar> network_;
  double epsilon_;
  nlohmann::json provenance_;
};

/// D: pooled latent block -> two-class scores over z.
template <typename Scalar>
class AttributeDiscriminator {
 public:
  explicit AttributeDiscriminator(Network<Scalar> network) : network_(std::move(network)) {}
  static AttributeDiscriminator create(int feature_channels, int hidden, std::mt19937_64& rng);

  const Network<Scalar>& network() const { return network_; }
  Network<Scalar>& network() { return network_; }

  Matrix<Scalar> logits(const Tensor<Scalar>& features) const;
  /// Row-stochastic batch x 2 matrix; column 1 is P(z = +1).
  Matrix<Scalar> probabilities(const Tensor<Scalar>& features) const;

 private:
  Network<Scalar> network_;
};

// --- Losses ------------------------------------------------------------------
// Labels are {-1,+1}. All losses are batch means with natural logarithms and
// a 1e-12 probability floor inside every log.

template <typename Scalar>
Scalar discriminator_loss(const AttributeDiscriminator<Scalar>& d,
                          const DeployedModel<Scalar>& model, const Tensor<Scalar>& perturbed,
                          std::span<const int> z);

template <typename Scalar>
Scalar fairness_loss(const AttributeDiscriminator<Scalar>& d, const DeployedModel<Scalar>& model,
                     const Tensor<Scalar>& perturbed, std::span<const int> z, double alpha);

template <typename Scalar>
Scalar target_loss(const DeployedModel<Scalar>& model, const Tensor<Scalar>& perturbed,
                   std::span<const int> y);

template <typename Scalar>
Scalar generator_total_loss(const AttributeDiscriminator<Scalar>& d,
                            const DeployedModel<Scalar>& model, const Tensor<Scalar>& perturbed,
                            std::span<const int> y, std::span<const int> z, double alpha,
                            double beta);

/// Loss values of one generator evaluation, averaged over ensemble members.
struct LossBreakdown {
  double discriminator = 0;  // L_D
  double entropy = 0;        // mean H(D(.))
  double fairness = 0;       // L_fair
  double target = 0;         // L_T
  double total = 0;          // fairness_weight * L_fair + target_weight * L_T
};

struct GeneratorLossWeights {
  double fairness = 1.0;
  double alpha = 0.1;
  double target = 1.0;  // beta
};

/// Generator objective on clean images x, averaged uniformly over
/// (model, discriminator) pairs. Accumulates dL/dtheta_G into grad_generator
/// when non-null.
template <typename Scalar>
LossBreakdown generator_objective(const PerturbationGenerator<Scalar>& generator,
                                  std::span<const AttributeDiscriminator<Scalar>* const> discs,
                                  std::span<const DeployedModel<Scalar>* const> models,
                                  const Tensor<Scalar>& x, std::span<const int> y,
                                  std::span<const int> z, const GeneratorLossWeights& weights,
                                  Gradients<Scalar>* grad_generator = nullptr);

/// L_D of one discriminator on G's perturbation of x. Accumulates
/// dL_D/dtheta_D into grad_discriminator when non-null.
template <typename Scalar>
Scalar discriminator_objective(const PerturbationGenerator<Scalar>& generator,
                               const AttributeDiscriminator<Scalar>& disc,
                               const DeployedModel<Scalar>& model, const Tensor<Scalar>& x,
                               std::span<const int> z,
                               Gradients<Scalar>* grad_discriminator = nullptr);

// --- Training ----------------------------------------------------------------

struct IterationLog {
  long iteration = 0;
  double l_d = 0;
  double l_fair = 0;
  double l_target = 0;
  double l_total = 0;
  bool operator==(const IterationLog&) const = default;
};

/// The alternating minimax loop over explicit batches. One discriminator per
/// deployed model; the generator descends the uniform average of the
/// per-model generator losses.
template <typename Scalar>
class FaapTrainer {
 public:
  FaapTrainer(std::vector<const DeployedModel<Scalar>*> models, const FaapConfig& config,
              std::uint64_t seed);

  /// Steps 2-3 of an iteration: perturb with the current G, update every D on
  /// L_D. Returns the mean L_D before the update. Does not read alpha.
  double discriminator_step(const Tensor<Scalar>& x, std::span<const int> z);

  /// Step 4: recompute on the same batch against the updated D and update G.
  LossBreakdown generator_step(const Tensor<Scalar>& x, std::span<const int> y,
                               std::span<const int> z);

  IterationLog step(const Tensor<Scalar>& x, std::span<const int> y, std::span<const int> z);

  const PerturbationGenerator<Scalar>& generator() const { return generator_; }
  const std::vector<AttributeDiscriminator<Scalar>>& discriminators() const { return discs_; }
  const FaapConfig& config() const { return config_; }
  long iteration() const { return iteration_; }

 private:
  std::vector<const DeployedModel<Scalar>*> models_;
  FaapConfig config_;
  PerturbationGenerator<Scalar> generator_;
  std::vector<AttributeDiscriminator<Scalar>> discs_;
  Optimizer<Scalar> generator_opt_;
  std::vector<Optimizer<Scalar>> disc_opts_;
  long iteration_ = 0;
};

template <typename Scalar>
struct FaapResult {
  PerturbationGenerator<Scalar> generator;
  std::vector<IterationLog> trace;
};

using IterationCallback =
    std::function<void(long iteration, const PerturbationGenerator<float>& generator)>;

/// Runs config.iterations alternating updates against a frozen model on
/// batches drawn (epoch-wise shuffled) from `data`. Throws FrozenViolation if
/// the model's checksum changes and NonFiniteLoss on divergence.
FaapResult<float> train_faap(const DeployedModel<float>& model, const DatasetSplit& data,
                             const FaapConfig& config, std::uint64_t seed,
                             const IterationCallback& on_iteration = {});

/// Ensemble variant over >= 2 surrogate models sharing an input shape.
FaapResult<float> train_faap_ensemble(std::span<const DeployedModel<float>* const> models,
                                      const DatasetSplit& data, const FaapConfig& config,
                                      std::uint64_t seed,
                                      const IterationCallback& on_iteration = {});

/// Perturbs a whole split in chunks; ids and labels are kept.
DatasetSplit perturb_split(const PerturbationGenerator<float>& generator, const DatasetSplit& split,
                           int chunk = 256);

void save_generator(const std::filesystem::path& path, const PerturbationGenerator<float>& generator);
PerturbationGenerator<float> load_generator(const std::filesystem::path& path);

/// Appends `iteration L_D L_G_fair L_G_T L_G` lines (header when new).
void append_loss_log(const std::filesystem::path& path, std::span<const IterationLog> trace);

}  // namespace faap
