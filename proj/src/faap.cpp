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

#include "faap/faap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "faap/checkpoint.hpp"

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

std::vector<int> to_classes(std::span<const int> labels) {
  std::vector<int> out(labels.size());
  std::transform(labels.begin(), labels.end(), out.begin(), class_index);
  return out;
}

template <typename Scalar>
void check_batch(const DeployedModel<Scalar>& model, const Tensor<Scalar>& x,
                 std::span<const int> labels) {
  if (x.shape() != model.input_shape()) {
    throw Error(ErrorCode::kShapeMismatch, "model expects " + model.input_shape().str() +
                                               " inputs, got " + x.shape().str());
  }
  if (static_cast<std::size_t>(x.batch) != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "batch of " + std::to_string(x.batch) + " images with " +
                                                std::to_string(labels.size()) + " labels");
  }
}

// One perturbation of a batch shared by the D and G updates of an iteration.
template <typename Scalar>
struct ForwardPass {
  typename PerturbationGenerator<Scalar>::Cache generator;
  Tensor<Scalar> perturbed;
  std::vector<Tensor<Scalar>> features;
  std::vector<NetworkCache<Scalar>> extractor;
};

template <typename Scalar>
ForwardPass<Scalar> run_forward(const PerturbationGenerator<Scalar>& generator,
                                std::span<const DeployedModel<Scalar>* const> models,
                                const Tensor<Scalar>& x, bool keep_cache) {
  ForwardPass<Scalar> pass;
  pass.perturbed = generator.perturb(x, keep_cache ? &pass.generator : nullptr);
  pass.extractor.resize(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    pass.features.push_back(
        models[m]->extractor().forward(pass.perturbed, keep_cache ? &pass.extractor[m] : nullptr));
  }
  return pass;
}

template <typename Scalar>
Scalar discriminator_update_grad(const AttributeDiscriminator<Scalar>& disc,
                                 const Tensor<Scalar>& features, std::span<const int> z_classes,
                                 Gradients<Scalar>* grads) {
  NetworkCache<Scalar> cache;
  const Tensor<Scalar> logits = disc.network().forward(features, grads ? &cache : nullptr);
  if (!grads) return cross_entropy(logits.data, z_classes);
  Matrix<Scalar> d_logits;
  const Scalar loss = cross_entropy(logits.data, z_classes, &d_logits);
  disc.network().backward(cache, dense(std::move(d_logits)), grads, false);
  return loss;
}

template <typename Scalar>
LossBreakdown generator_from_pass(const PerturbationGenerator<Scalar>& generator,
                                  std::span<const AttributeDiscriminator<Scalar>* const> discs,
                                  std::span<const DeployedModel<Scalar>* const> models,
                                  const ForwardPass<Scalar>& pass, std::span<const int> y_classes,
                                  std::span<const int> z_classes,
                                  const GeneratorLossWeights& w, Gradients<Scalar>* grads) {
  const double share = 1.0 / static_cast<double>(models.size());
  LossBreakdown out;
  Tensor<Scalar> d_perturbed;
  if (grads) d_perturbed = Tensor<Scalar>(pass.perturbed.batch, pass.perturbed.shape());
  for (std::size_t m = 0; m < models.size(); ++m) {
    const Tensor<Scalar>& r = pass.features[m];
    NetworkCache<Scalar> cache_d;
    NetworkCache<Scalar> cache_f;
    const Tensor<Scalar> d_logits = discs[m]->network().forward(r, grads ? &cache_d : nullptr);
    const Tensor<Scalar> f_logits = models[m]->predictor().forward(r, grads ? &cache_f : nullptr);
    Matrix<Scalar> g_ce;
    Matrix<Scalar> g_h;
    Matrix<Scalar> g_t;
    const double l_d = cross_entropy(d_logits.data, z_classes, grads ? &g_ce : nullptr);
    const double h = mean_entropy(d_logits.data, grads ? &g_h : nullptr);
    const double l_t = cross_entropy(f_logits.data, y_classes, grads ? &g_t : nullptr);
    const double l_fair = -l_d - w.alpha * h;
    out.discriminator += share * l_d;
    out.entropy += share * h;
    out.fairness += share * l_fair;
    out.target += share * l_t;
    out.total += share * (w.fairness * l_fair + w.target * l_t);
    if (!grads) continue;

    Tensor<Scalar> d_r(r.batch, r.shape());
    if (w.fairness != 0.0) {
      Matrix<Scalar> g_fair = (-g_ce - Scalar(w.alpha) * g_h) * Scalar(w.fairness * share);
      d_r.data += discs[m]->network().backward(cache_d, dense(std::move(g_fair)), nullptr).data;
    }
    if (w.target != 0.0) {
      g_t *= Scalar(w.target * share);
      d_r.data += models[m]->predictor().backward(cache_f, dense(std::move(g_t)), nullptr).data;
    }
    d_perturbed.data += models[m]->extractor().backward(pass.extractor[m], d_r, nullptr).data;
  }
  if (grads) generator.backward(pass.generator, d_perturbed, grads);
  return out;
}

GeneratorLossWeights weights_for(const FaapConfig& c) {
  return {c.ablation == Ablation::kTargetOnly ? 0.0 : 1.0, c.alpha, c.beta};
}

const char* optimizer_key(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

const char* ablation_key(Ablation a) { return a == Ablation::kTargetOnly ? "target_only" : "none"; }

}  // namespace

// --- FaapConfig ----------------------------------------------------------------

void FaapConfig::validate() const {
  auto bad = [](const std::string& what) { return Error(ErrorCode::kInvalidConfig, what); };
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw bad("alpha and beta must be non-negative");
  if (!(lr_discriminator > 0.0) || !(lr_generator > 0.0)) throw bad("learning rates must be positive");
  if (iterations < 0) throw bad("iterations must be non-negative");
  if (batch_size <= 0) throw bad("batch_size must be positive");
  if (!(epsilon > 0.0) || epsilon > 1.0) throw bad("epsilon must lie in (0, 1]");
  if (generator_width <= 0 || discriminator_hidden <= 0) throw bad("network widths must be positive");
}

nlohmann::json FaapConfig::to_json() const {
  return {{"alpha", alpha},
          {"beta", beta},
          {"lr_discriminator", lr_discriminator},
          {"lr_generator", lr_generator},
          {"iterations", iterations},
          {"batch_size", batch_size},
          {"epsilon", epsilon},
          {"ablation", ablation_key(ablation)},
          {"optimizer_discriminator", optimizer_key(optimizer_discriminator)},
          {"optimizer_generator", optimizer_key(optimizer_generator)},
          {"generator_width", generator_width},
          {"discriminator_hidden", discriminator_hidden}};
}

std::string FaapConfig::hash() const {
  const std::string s = to_json().dump();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(s.data(), s.size())));
  return buf;
}

// --- Generator / discriminator -------------------------------------------------

template <typename Scalar>
Network<Scalar> build_generator(Shape input, int width, double epsilon, std::mt19937_64& rng) {
  if (input.height % 4 != 0 || input.width % 4 != 0) {
    throw Error(ErrorCode::kInvalidConfig, "generator needs image sides divisible by 4, got " +
                                               input.str());
  }
  const Activation act = Activation::kLeakyRelu;
  const int c = input.channels;
  Network<Scalar> net;
  net.add(std::make_unique<Conv2dLayer<Scalar>>(ConvGeometry{c, width, 3, 2, 1}, &rng));
  net.add(std::make_unique<ActivationLayer<Scalar>>(act));
  net.add(std::make_unique<Conv2dLayer<Scalar>>(ConvGeometry{width, 2 * width, 3, 2, 1}, &rng));
  net.add(std::make_unique<ActivationLayer<Scalar>>(act));
  net.add(std::make_unique<ResidualBlock<Scalar>>(2 * width, act, &rng));
  net.add(std::make_unique<UpsampleLayer<Scalar>>());
  net.add(std::make_unique<Conv2dLayer<Scalar>>(ConvGeometry{2 * width, width, 3, 1, 1}, &rng));
  net.add(std::make_unique<ActivationLayer<Scalar>>(act));
  net.add(std::make_unique<UpsampleLayer<Scalar>>());
  auto out = std::make_unique<Conv2dLayer<Scalar>>(ConvGeometry{width, c, 3, 1, 1}, &rng);
  // Start close to the identity map x_hat = x.
  for (auto& p : out->params()) p *= Scalar(0.1);
  net.add(std::move(out));
  net.add(std::make_unique<BoundedTanhLayer<Scalar>>(epsilon));
  return net;
}

template <typename Scalar>
Tensor<Scalar> apply_perturbation(const Tensor<Scalar>& x, const Tensor<Scalar>& delta,
                                  double epsilon, Matrix<Scalar>* pass_mask) {
  require_same_shape(x, delta, "apply_perturbation");
  const Scalar eps = Scalar(epsilon);
  Tensor<Scalar> out = x;
  if (pass_mask) pass_mask->resize(x.data.rows(), x.data.cols());
  const Eigen::Index n = x.data.size();
  const Scalar* xs = x.data.data();
  const Scalar* ds = delta.data.data();
  Scalar* os = out.data.data();
  Scalar* ms = pass_mask ? pass_mask->data() : nullptr;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar d = std::clamp(ds[i], -eps, eps);
    const Scalar v = xs[i] + d;
    const Scalar clamped = std::clamp(v, Scalar(0), Scalar(1));
    os[i] = clamped;
    if (ms) ms[i] = (ds[i] > -eps && ds[i] < eps && v > Scalar(0) && v < Scalar(1)) ? 1 : 0;
  }
  return out;
}

template <typename Scalar>
PerturbationGenerator<Scalar>::PerturbationGenerator(Network<Scalar> network, double epsilon,
                                                     nlohmann::json provenance)
    : network_(std::move(network)), epsilon_(epsilon), provenance_(std::move(provenance)) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidConfig, "epsilon must be positive");
}

template <typename Scalar>
Tensor<Scalar> PerturbationGenerator<Scalar>::raw(const Tensor<Scalar>& images) const {
  return network_.forward(images);
}

template <typename Scalar>
Tensor<Scalar> PerturbationGenerator<Scalar>::perturb(const Tensor<Scalar>& images,
                                                      Cache* cache) const {
  const Tensor<Scalar> delta = network_.forward(images, cache ? &cache->network : nullptr);
  return apply_perturbation(images, delta, epsilon_, cache ? &cache->pass_mask : nullptr);
}

template <typename Scalar>
void PerturbationGenerator<Scalar>::backward(const Cache& cache,
                                             const Tensor<Scalar>& grad_perturbed,
                                             Gradients<Scalar>* grads) const {
  Tensor<Scalar> grad_delta = grad_perturbed;
  grad_delta.data.array() *= cache.pass_mask.array();
  network_.backward(cache.network, grad_delta, grads, false);
}

template <typename Scalar>
AttributeDiscriminator<Scalar> AttributeDiscriminator<Scalar>::create(int feature_channels,
                                                                      int hidden,
                                                                      std::mt19937_64& rng) {
  Network<Scalar> net = build_latent_head<Scalar>(feature_channels, hidden, rng);
  // Zero output layer: D starts at the uniform prediction, L_D = ln 2.
  auto params = net.parameters();
  params[params.size() - 2]->setZero();
  params.back()->setZero();
  return AttributeDiscriminator(std::move(net));
}

template <typename Scalar>
Matrix<Scalar> AttributeDiscriminator<Scalar>::logits(const Tensor<Scalar>& features) const {
  return network_.forward(features).data;
}

template <typename Scalar>
Matrix<Scalar> AttributeDiscriminator<Scalar>::probabilities(const Tensor<Scalar>& features) const {
  return softmax_rows(logits(features));
}

// --- Losses --------------------------------------------------------------------

template <typename Scalar>
Scalar discriminator_loss(const AttributeDiscriminator<Scalar>& d,
                          const DeployedModel<Scalar>& model, const Tensor<Scalar>& perturbed,
                          std::span<const int> z) {
  check_batch(model, perturbed, z);
  return cross_entropy(d.logits(model.extract_features(perturbed)), to_classes(z));
}

template <typename Scalar>
Scalar fairness_loss(const AttributeDiscriminator<Scalar>& d, const DeployedModel<Scalar>& model,
                     const Tensor<Scalar>& perturbed, std::span<const int> z, double alpha) {
  check_batch(model, perturbed, z);
  const Matrix<Scalar> logits = d.logits(model.extract_features(perturbed));
  return -cross_entropy(logits, to_classes(z)) - Scalar(alpha) * mean_entropy(logits);
}

template <typename Scalar>
Scalar target_loss(const DeployedModel<Scalar>& model, const Tensor<Scalar>& perturbed,
                   std::span<const int> y) {
  check_batch(model, perturbed, y);
  return cross_entropy(model.scores(perturbed), to_classes(y));
}

template <typename Scalar>
Scalar generator_total_loss(const AttributeDiscriminator<Scalar>& d,
                            const DeployedModel<Scalar>& model, const Tensor<Scalar>& perturbed,
                            std::span<const int> y, std::span<const int> z, double alpha,
                            double beta) {
  return fairness_loss(d, model, perturbed, z, alpha) +
         Scalar(beta) * target_loss(model, perturbed, y);
}

template <typename Scalar>
LossBreakdown generator_objective(const PerturbationGenerator<Scalar>& generator,
                                  std::span<const AttributeDiscriminator<Scalar>* const> discs,
                                  std::span<const DeployedModel<Scalar>* const> models,
                                  const Tensor<Scalar>& x, std::span<const int> y,
                                  std::span<const int> z, const GeneratorLossWeights& weights,
                                  Gradients<Scalar>* grad_generator) {
  if (models.empty() || discs.size() != models.size()) {
    throw Error(ErrorCode::kLengthMismatch, "need one discriminator per model");
  }
  for (const auto* m : models) {
    check_batch(*m, x, y);
    check_batch(*m, x, z);
  }
  const auto pass = run_forward(generator, models, x, grad_generator != nullptr);
  return generator_from_pass(generator, discs, models, pass, to_classes(y), to_classes(z), weights,
                             grad_generator);
}

template <typename Scalar>
Scalar discriminator_objective(const PerturbationGenerator<Scalar>& generator,
                               const AttributeDiscriminator<Scalar>& disc,
                               const DeployedModel<Scalar>& model, const Tensor<Scalar>& x,
                               std::span<const int> z, Gradients<Scalar>* grad_discriminator) {
  check_batch(model, x, z);
  const Tensor<Scalar> features = model.extract_features(generator.perturb(x));
  return discriminator_update_grad(disc, features, to_classes(z), grad_discriminator);
}

// --- Trainer -------------------------------------------------------------------

template <typename Scalar>
FaapTrainer<Scalar>::FaapTrainer(std::vector<const DeployedModel<Scalar>*> models,
                                 const FaapConfig& config, std::uint64_t seed)
    : models_(std::move(models)),
      config_(config),
      generator_(Network<Scalar>(), config.epsilon),
      generator_opt_(Network<Scalar>(), config.lr_generator, config.optimizer_generator) {
  config_.validate();
  if (models_.empty()) throw Error(ErrorCode::kEmptyInput, "no deployed model to attack");
  const Shape in = models_.front()->input_shape();
  const Shape feat = models_.front()->feature_shape();
  for (const auto* m : models_) {
    if (m->input_shape() != in || m->feature_shape() != feat) {
      throw Error(ErrorCode::kShapeMismatch, "ensemble members disagree on input or feature shape");
    }
  }
  std::seed_seq g_seed{seed, std::uint64_t{1}};
  std::mt19937_64 g_rng(g_seed);
  generator_ = PerturbationGenerator<Scalar>(
      build_generator<Scalar>(in, config_.generator_width, config_.epsilon, g_rng), config_.epsilon);
  generator_opt_ =
      Optimizer<Scalar>(generator_.network(), config_.lr_generator, config_.optimizer_generator);
  // Every member's discriminator starts from the same draw.
  for (std::size_t m = 0; m < models_.size(); ++m) {
    std::seed_seq d_seed{seed, std::uint64_t{2}};
    std::mt19937_64 d_rng(d_seed);
    discs_.push_back(
        AttributeDiscriminator<Scalar>::create(feat.channels, config_.discriminator_hidden, d_rng));
    disc_opts_.emplace_back(discs_.back().network(), config_.lr_discriminator,
                            config_.optimizer_discriminator);
  }
}

template <typename Scalar>
double FaapTrainer<Scalar>::discriminator_step(const Tensor<Scalar>& x, std::span<const int> z) {
  for (const auto* m : models_) check_batch(*m, x, z);
  const auto pass = run_forward<Scalar>(generator_, models_, x, false);
  const std::vector<int> zc = to_classes(z);
  double total = 0;
  for (std::size_t m = 0; m < models_.size(); ++m) {
    Gradients<Scalar> grads = discs_[m].network().zero_gradients();
    total += discriminator_update_grad(discs_[m], pass.features[m], zc, &grads);
    disc_opts_[m].step(discs_[m].network(), grads);
  }
  return total / static_cast<double>(models_.size());
}

template <typename Scalar>
LossBreakdown FaapTrainer<Scalar>::generator_step(const Tensor<Scalar>& x, std::span<const int> y,
                                                  std::span<const int> z) {
  std::vector<const AttributeDiscriminator<Scalar>*> discs;
  for (const auto& d : discs_) discs.push_back(&d);
  Gradients<Scalar> grads = generator_.network().zero_gradients();
  const LossBreakdown losses = generator_objective<Scalar>(
      generator_, discs, models_, x, y, z, weights_for(config_), &grads);
  generator_opt_.step(generator_.network(), grads);
  return losses;
}

template <typename Scalar>
IterationLog FaapTrainer<Scalar>::step(const Tensor<Scalar>& x, std::span<const int> y,
                                       std::span<const int> z) {
  for (const auto* m : models_) {
    check_batch(*m, x, y);
    check_batch(*m, x, z);
  }
  // The perturbation and latent features are computed once; D's update does
  // not change them, so G's step reuses them against the updated D.
  const auto pass = run_forward<Scalar>(generator_, models_, x, true);
  const std::vector<int> yc = to_classes(y);
  const std::vector<int> zc = to_classes(z);
  double l_d = 0;
  for (std::size_t m = 0; m < models_.size(); ++m) {
    Gradients<Scalar> grads = discs_[m].network().zero_gradients();
    l_d += discriminator_update_grad(discs_[m], pass.features[m], zc, &grads);
    disc_opts_[m].step(discs_[m].network(), grads);
  }
  l_d /= static_cast<double>(models_.size());

  std::vector<const AttributeDiscriminator<Scalar>*> discs;
  for (const auto& d : discs_) discs.push_back(&d);
  Gradients<Scalar> grads = generator_.network().zero_gradients();
  const LossBreakdown g = generator_from_pass<Scalar>(generator_, discs, models_, pass, yc, zc,
                                                      weights_for(config_), &grads);
  ++iteration_;
  const IterationLog log{iteration_, l_d, g.fairness, g.target, g.total};
  if (!std::isfinite(l_d) || !std::isfinite(g.total)) {
    throw Error(ErrorCode::kNonFiniteLoss, "perturbation training diverged at iteration " +
                                               std::to_string(iteration_));
  }
  generator_opt_.step(generator_.network(), grads);
  return log;
}

// --- Driver --------------------------------------------------------------------

namespace {

nlohmann::json model_provenance(const DeployedModel<float>& m) {
  const ModelMetadata& meta = m.metadata();
  char sum[20];
  std::snprintf(sum, sizeof(sum), "%016llx", static_cast<unsigned long long>(m.checksum()));
  return {{"flavor", to_string(meta.flavor.flavor)},
          {"seed", meta.seed},
          {"dataset_id", meta.dataset_id},
          {"checksum", sum}};
}

FaapResult<float> run_training(std::span<const DeployedModel<float>* const> models,
                               const DatasetSplit& data, const FaapConfig& config,
                               std::uint64_t seed, const IterationCallback& on_iteration) {
  config.validate();
  if (data.empty()) throw Error(ErrorCode::kEmptySplit, "perturbation training split is empty");
  std::vector<std::uint64_t> before;
  for (const auto* m : models) before.push_back(m->checksum());

  FaapTrainer<float> trainer({models.begin(), models.end()}, config, seed);
  std::seed_seq b_seed{seed, std::uint64_t{3}};
  std::mt19937_64 batch_rng(b_seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min<std::size_t>(config.batch_size, data.size());
  std::size_t cursor = order.size();

  FaapResult<float> result{trainer.generator(), {}};
  result.trace.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    if (cursor + batch > order.size()) {
      std::shuffle(order.begin(), order.end(), batch_rng);
      cursor = 0;
    }
    const std::span<const std::size_t> idx(order.data() + cursor, batch);
    cursor += batch;
    const Tensor<float> x = data.images(idx);
    std::vector<int> y;
    std::vector<int> z;
    for (std::size_t i : idx) {
      y.push_back(data.samples[i].y);
      z.push_back(data.samples[i].z);
    }
    result.trace.push_back(trainer.step(x, y, z));
    if (on_iteration) on_iteration(trainer.iteration(), trainer.generator());
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m]->checksum() != before[m]) {
      throw Error(ErrorCode::kFrozenViolation, "deployed model parameters changed during training");
    }
  }
  result.generator = trainer.generator();
  nlohmann::json sources = nlohmann::json::array();
  for (const auto* m : models) sources.push_back(model_provenance(*m));
  result.generator.set_provenance({{"models", sources},
                                   {"config", config.to_json()},
                                   {"config_hash", config.hash()},
                                   {"seed", seed},
                                   {"iterations", config.iterations}});
  return result;
}

}  // namespace

FaapResult<float> train_faap(const DeployedModel<float>& model, const DatasetSplit& data,
                             const FaapConfig& config, std::uint64_t seed,
                             const IterationCallback& on_iteration) {
  const DeployedModel<float>* one[] = {&model};
  return run_training(one, data, config, seed, on_iteration);
}

FaapResult<float> train_faap_ensemble(std::span<const DeployedModel<float>* const> models,
                                      const DatasetSplit& data, const FaapConfig& config,
                                      std::uint64_t seed, const IterationCallback& on_iteration) {
  if (models.size() < 2) {
    throw Error(ErrorCode::kInvalidConfig, "an ensemble needs at least two surrogate models");
  }
  return run_training(models, data, config, seed, on_iteration);
}

DatasetSplit perturb_split(const PerturbationGenerator<float>& generator, const DatasetSplit& split,
                           int chunk) {
  DatasetSplit out;
  out.name = split.name;
  out.seed = split.seed;
  out.samples.reserve(split.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < split.size(); start += chunk) {
    const std::size_t count = std::min<std::size_t>(chunk, split.size() - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor<float> perturbed = generator.perturb(split.images(idx));
    for (std::size_t i = 0; i < count; ++i) {
      LabeledSample s = split.samples[start + i];
      s.image = image_from_tensor(perturbed, static_cast<int>(i));
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

void save_generator(const std::filesystem::path& path, const PerturbationGenerator<float>& generator) {
  write_checkpoint(path, {"perturbation_generator",
                          {{"epsilon", generator.epsilon()}, {"provenance", generator.provenance()}},
                          {{"generator", generator.network()}}});
}

PerturbationGenerator<float> load_generator(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path, "perturbation_generator");
  double epsilon = 0;
  try {
    epsilon = ckpt.metadata.at("epsilon").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCheckpointCorrupt, path.string() + ": bad metadata: " + e.what());
  }
  return PerturbationGenerator<float>(ckpt.network("generator"), epsilon,
                                      ckpt.metadata.value("provenance", nlohmann::json::object()));
}

void append_loss_log(const std::filesystem::path& path, std::span<const IterationLog> trace) {
  const bool fresh = !std::filesystem::exists(path);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIoError, "cannot append to " + path.string());
  if (fresh) out << "iteration L_D L_G_fair L_G_T L_G\n";
  char line[160];
  for (const auto& r : trace) {
    std::snprintf(line, sizeof(line), "%ld %.8g %.8g %.8g %.8g\n", r.iteration, r.l_d, r.l_fair,
                  r.l_target, r.l_total);
    out << line;
  }
}

#define FAAP_INSTANTIATE_CORE(S)                                                                 \
  template Network<S> build_generator<S>(Shape, int, double, std::mt19937_64&);                  \
  template Tensor<S> apply_perturbation<S>(const Tensor<S>&, const Tensor<S>&, double,           \
                                           Matrix<S>*);                                          \
  template class PerturbationGenerator<S>;                                                       \
  template class AttributeDiscriminator<S>;                                                      \
  template S discriminator_loss<S>(const AttributeDiscriminator<S>&, const DeployedModel<S>&,    \
                                   const Tensor<S>&, std::span<const int>);                      \
  template S fairness_loss<S>(const AttributeDiscriminator<S>&, const DeployedModel<S>&,         \
                              const Tensor<S>&, std::span<const int>, double);                   \
  template S target_loss<S>(const DeployedModel<S>&, const Tensor<S>&, std::span<const int>);    \
  template S generator_total_loss<S>(const AttributeDiscriminator<S>&, const DeployedModel<S>&,  \
                                     const Tensor<S>&, std::span<const int>,                     \
                                     std::span<const int>, double, double);                      \
  template LossBreakdown generator_objective<S>(                                                 \
      const PerturbationGenerator<S>&, std::span<const AttributeDiscriminator<S>* const>,        \
      std::span<const DeployedModel<S>* const>, const Tensor<S>&, std::span<const int>,          \
      std::span<const int>, const GeneratorLossWeights&, Gradients<S>*);                         \
  template S discriminator_objective<S>(const PerturbationGenerator<S>&,                         \
                                        const AttributeDiscriminator<S>&,                        \
                                        const DeployedModel<S>&, const Tensor<S>&,               \
                                        std::span<const int>, Gradients<S>*);                    \
  template class FaapTrainer<S>;

FAAP_INSTANTIATE_CORE(float)
FAAP_INSTANTIATE_CORE(double)

}  // namespace faap
