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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "faap/faap.hpp"

namespace faap {
namespace {

namespace fs = std::filesystem;
using D = double;

// 2-conv extractor, pooled linear head, 8x8 inputs.
DeployedModel<D> mini_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Network<D> g;
  g.add(std::make_unique<Conv2dLayer<D>>(ConvGeometry{3, 4, 3, 1, 1}, &rng));
  g.add(std::make_unique<ActivationLayer<D>>(Activation::kTanh));
  g.add(std::make_unique<Conv2dLayer<D>>(ConvGeometry{4, 4, 3, 2, 1}, &rng));
  g.add(std::make_unique<ActivationLayer<D>>(Activation::kTanh));
  Network<D> f;
  f.add(std::make_unique<GlobalAvgPoolLayer<D>>());
  f.add(std::make_unique<LinearLayer<D>>(4, 2, &rng));
  ModelMetadata meta;
  meta.arch.image_size = 8;
  meta.arch.stages = 1;
  meta.arch.base_width = 4;
  return DeployedModel<D>(std::move(g), std::move(f), meta);
}

Tensor<D> images(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<D> u(0.1, 0.9);
  Tensor<D> x(n, {3, 8, 8});
  for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = u(rng);
  return x;
}

std::vector<int> signs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> v(n);
  for (auto& s : v) s = rng() % 2 ? 1 : -1;
  return v;
}

AttributeDiscriminator<D> random_disc(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Network<D> net = build_latent_head<D>(4, 6, rng);
  std::normal_distribution<D> n(0.0, 0.5);
  for (auto* p : net.parameters()) {
    for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] = n(rng);
  }
  return AttributeDiscriminator<D>(std::move(net));
}

PerturbationGenerator<D> mini_generator(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return PerturbationGenerator<D>(build_generator<D>({3, 8, 8}, 2, 0.05, rng), 0.05);
}

// Max relative error of <grad, d> against central differences along random
// unit directions.
template <typename Loss>
double directional_error(Network<D>& net, const Gradients<D>& grad, Loss loss, int directions) {
  std::mt19937_64 rng(99);
  std::normal_distribution<D> n;
  const Vector<D> theta = net.flatten();
  Vector<D> g(theta.size());
  Eigen::Index off = 0;
  for (const auto& m : grad) {
    g.segment(off, m.size()) = Eigen::Map<const Vector<D>>(m.data(), m.size());
    off += m.size();
  }
  double worst = 0;
  for (int k = 0; k < directions; ++k) {
    Vector<D> d(theta.size());
    for (auto& v : d) v = n(rng);
    d.normalize();
    const D h = 1e-3;
    net.assign(theta + h * d);
    const D lp = loss();
    net.assign(theta - h * d);
    const D lm = loss();
    net.assign(theta);
    const D fd = (lp - lm) / (2 * h);
    const D an = g.dot(d);
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
  }
  return worst;
}

TEST(Perturb, ClampArithmetic) {
  Tensor<D> x(1, {1, 1, 3});
  x.data << 0.5, 0.99, 0.02;
  Tensor<D> delta(1, {1, 1, 3});
  delta.data << 0.08, 0.05, -0.3;
  const Tensor<D> out = apply_perturbation(x, delta, 0.05);
  EXPECT_DOUBLE_EQ(out.data(0), 0.55);
  EXPECT_DOUBLE_EQ(out.data(1), 1.0);
  EXPECT_DOUBLE_EQ(out.data(2), 0.0);
  const Tensor<D> same = apply_perturbation(x, Tensor<D>(1, {1, 1, 3}), 0.05);
  EXPECT_EQ(same.data, x.data);
}

TEST(Perturb, BudgetHoldsForSaturatedGenerators) {
  PerturbationGenerator<D> gen = mini_generator(1);
  for (auto* p : gen.network().parameters()) *p *= 50.0;
  Tensor<D> x = images(4, 2);
  x.data.topRows(10).setZero();
  x.data.bottomRows(10).setOnes();
  const Tensor<D> out = gen.perturb(x);
  EXPECT_LE((out.data - x.data).cwiseAbs().maxCoeff(), 0.05 + 1e-12);
  EXPECT_GE(out.data.minCoeff(), 0.0);
  EXPECT_LE(out.data.maxCoeff(), 1.0);
}

TEST(Losses, UniformDiscriminatorAndPredictor) {
  const DeployedModel<D> m0 = mini_model(3);
  Network<D> f = m0.predictor();
  for (auto* p : f.parameters()) p->setZero();
  const DeployedModel<D> model(m0.extractor(), f, m0.metadata());
  std::mt19937_64 rng(4);
  const auto disc = AttributeDiscriminator<D>::create(4, 6, rng);  // zero output layer
  const Tensor<D> x = images(6, 5);
  const auto y = signs(6, 6), z = signs(6, 7);
  const D ln2 = std::log(2.0);
  EXPECT_NEAR(discriminator_loss(disc, model, x, z), ln2, 1e-15);
  EXPECT_NEAR(target_loss(model, x, y), ln2, 1e-15);
  EXPECT_NEAR(fairness_loss(disc, model, x, z, 1.0), -2 * ln2, 1e-15);
  EXPECT_NEAR(generator_total_loss(disc, model, x, y, z, 0.0, 1.0), 0.0, 1e-15);
  const Matrix<D> p = disc.probabilities(model.extract_features(x));
  EXPECT_LT((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Losses, DefinitionalIdentities) {
  const DeployedModel<D> model = mini_model(8);
  const auto disc = random_disc(9);
  const Tensor<D> x = images(6, 10);
  const auto y = signs(6, 11), z = signs(6, 12);
  const D ld = discriminator_loss(disc, model, x, z);
  const D lt = target_loss(model, x, y);
  EXPECT_GE(ld, 0.0);
  EXPECT_DOUBLE_EQ(fairness_loss(disc, model, x, z, 0.0), -ld);
  const D fair = fairness_loss(disc, model, x, z, 0.3);
  EXPECT_DOUBLE_EQ(generator_total_loss(disc, model, x, y, z, 0.3, 0.0), fair);
  for (D beta : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(generator_total_loss(disc, model, x, y, z, 0.3, beta), fair + beta * lt, 1e-12);
  }
}

TEST(Losses, FairnessFallsAsDiscriminatorApproachesUniform) {
  // Constant D logits (0, b) for every sample and z = +1 throughout; b -> 0
  // moves D toward the uniform output.
  const DeployedModel<D> model = mini_model(13);
  std::mt19937_64 rng(14);
  AttributeDiscriminator<D> disc = AttributeDiscriminator<D>::create(4, 6, rng);
  const Tensor<D> x = images(4, 15);
  const std::vector<int> z(4, 1);
  D prev = std::numeric_limits<D>::infinity();
  for (D b = 5.0; b >= 0.0; b -= 0.25) {
    disc.network().parameters().back()->operator()(0, 1) = b;
    const D v = fairness_loss(disc, model, x, z, 10.0);
    EXPECT_LT(v, prev) << "b=" << b;
    prev = v;
  }
}

TEST(Gradients, DiscriminatorLoss) {
  const DeployedModel<D> model = mini_model(20);
  AttributeDiscriminator<D> disc = random_disc(21);
  const PerturbationGenerator<D> gen = mini_generator(22);
  const Tensor<D> x = images(5, 23);
  const auto z = signs(5, 24);
  Gradients<D> grad = disc.network().zero_gradients();
  discriminator_objective(gen, disc, model, x, z, &grad);
  const double err = directional_error(disc.network(), grad, [&] {
    return discriminator_objective<D>(gen, disc, model, x, z);
  }, 100);
  EXPECT_LE(err, 1e-4);
}

TEST(Gradients, GeneratorLosses) {
  const DeployedModel<D> model = mini_model(30);
  const AttributeDiscriminator<D> disc = random_disc(31);
  PerturbationGenerator<D> gen = mini_generator(32);
  const Tensor<D> x = images(5, 33);
  const auto y = signs(5, 34), z = signs(5, 35);
  const AttributeDiscriminator<D>* discs[] = {&disc};
  const DeployedModel<D>* models[] = {&model};
  for (const GeneratorLossWeights w : {GeneratorLossWeights{1.0, 0.7, 0.0},
                                       GeneratorLossWeights{0.0, 0.7, 1.0},
                                       GeneratorLossWeights{1.0, 0.7, 1.3}}) {
    Gradients<D> grad = gen.network().zero_gradients();
    generator_objective<D>(gen, discs, models, x, y, z, w, &grad);
    const double err = directional_error(gen.network(), grad, [&] {
      return generator_objective<D>(gen, discs, models, x, y, z, w).total;
    }, 100);
    EXPECT_LE(err, 1e-4) << "weights " << w.fairness << "/" << w.target;
  }
}

TEST(Trainer, AlphaDoesNotEnterDiscriminatorUpdate) {
  const DeployedModel<D> model = mini_model(40);
  const Tensor<D> x = images(8, 41);
  const auto z = signs(8, 42);
  std::vector<double> losses;
  std::vector<Vector<D>> params;
  for (double alpha : {0.0, 1.0, 10.0}) {
    FaapConfig c;
    c.alpha = alpha;
    c.discriminator_hidden = 6;
    c.generator_width = 2;
    FaapTrainer<D> t({&model}, c, 7);
    losses.push_back(t.discriminator_step(x, z));
    params.push_back(t.discriminators().front().network().flatten());
  }
  for (std::size_t i = 1; i < losses.size(); ++i) {
    EXPECT_EQ(losses[i], losses[0]);
    EXPECT_EQ(params[i], params[0]);
  }
}

TEST(Trainer, NonFiniteLossAborts) {
  const DeployedModel<D> model = mini_model(43);
  FaapConfig c;
  c.generator_width = 2;
  FaapTrainer<D> t({&model}, c, 1);
  Tensor<D> x = images(4, 44);
  x.data(0, 0) = std::numeric_limits<D>::quiet_NaN();
  try {
    t.step(x, signs(4, 45), signs(4, 46));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
  }
}

TEST(Trainer, EmptyEnsembleIsRejected) {
  EXPECT_THROW(FaapTrainer<D>({}, FaapConfig{}, 0), Error);
}

struct TrainingRuns : ::testing::Test {
  static DatasetBundle& bundle() {
    static DatasetBundle b = [] {
      BiasSpec spec;
      spec.n = 400;
      return generate_planted_bias_dataset(spec, 16, 2);
    }();
    return b;
  }
  static const DeployedModel<float>& model() {
    static DeployedModel<float> m = [] {
      TrainConfig c;
      c.arch.image_size = 16;
      c.epochs = 2;
      c.convergence_margin = 0.0;
      return train_deployed(bundle().deployed_train, bundle().validation, FlavorSpec::normal(), c);
    }();
    return m;
  }
  static FaapConfig config(int iterations) {
    FaapConfig c;
    c.iterations = iterations;
    c.batch_size = 16;
    return c;
  }
};

TEST_F(TrainingRuns, ZeroIterationsReturnsInitialGenerator) {
  const std::uint64_t before = model().checksum();
  const auto r = train_faap(model(), bundle().faap_train, config(0), 3);
  EXPECT_TRUE(r.trace.empty());
  const Tensor<float> x = bundle().test.images();
  EXPECT_LT((r.generator.perturb(x).data - x.data).cwiseAbs().maxCoeff(), 0.05f);
  EXPECT_EQ(model().checksum(), before);
}

TEST_F(TrainingRuns, TraceIsBitReproducibleAndModelFrozen) {
  const std::uint64_t before = model().checksum();
  const auto a = train_faap(model(), bundle().faap_train, config(3), 5);
  const auto b = train_faap(model(), bundle().faap_train, config(3), 5);
  ASSERT_EQ(a.trace.size(), 3u);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.generator.network().flatten(), b.generator.network().flatten());
  EXPECT_EQ(model().checksum(), before);
  EXPECT_EQ(a.generator.provenance().at("config_hash"), config(3).hash());
}

TEST_F(TrainingRuns, DuplicatedEnsembleMatchesSingleModel) {
  const DeployedModel<float>* pair[] = {&model(), &model()};
  const auto single = train_faap(model(), bundle().faap_train, config(4), 6);
  const auto twin = train_faap_ensemble(pair, bundle().faap_train, config(4), 6);
  ASSERT_EQ(single.trace.size(), twin.trace.size());
  for (std::size_t i = 0; i < single.trace.size(); ++i) {
    EXPECT_DOUBLE_EQ(twin.trace[i].l_total, single.trace[i].l_total);
    EXPECT_DOUBLE_EQ(twin.trace[i].l_d, single.trace[i].l_d);
  }
  const DeployedModel<float>* one[] = {&model()};
  EXPECT_THROW(train_faap_ensemble(one, bundle().faap_train, config(1), 6), Error);
}

TEST_F(TrainingRuns, BudgetHoldsAtEveryIteration) {
  const Tensor<float> x = bundle().test.images();
  double worst = 0;
  bool in_range = true;
  train_faap(model(), bundle().faap_train, config(5), 8,
             [&](long, const PerturbationGenerator<float>& g) {
               const Tensor<float> out = g.perturb(x);
               worst = std::max<double>(worst, (out.data - x.data).cwiseAbs().maxCoeff());
               in_range = in_range && out.data.minCoeff() >= 0.0f && out.data.maxCoeff() <= 1.0f;
             });
  EXPECT_LE(worst, 0.05 + 1e-6);
  EXPECT_TRUE(in_range);
}

TEST_F(TrainingRuns, GeneratorCheckpointAndLossLog) {
  const auto r = train_faap(model(), bundle().faap_train, config(2), 9);
  const fs::path dir = fs::temp_directory_path() / "faap_test_faap";
  fs::remove_all(dir);
  save_generator(dir / "g.ckpt", r.generator);
  const PerturbationGenerator<float> back = load_generator(dir / "g.ckpt");
  EXPECT_EQ(back.epsilon(), r.generator.epsilon());
  EXPECT_EQ(back.provenance(), r.generator.provenance());
  EXPECT_EQ(back.perturb(bundle().test.images()).data, r.generator.perturb(bundle().test.images()).data);

  append_loss_log(dir / "loss.log", r.trace);
  append_loss_log(dir / "loss.log", r.trace);
  std::ifstream in(dir / "loss.log");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "iteration L_D L_G_fair L_G_T L_G");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 4);
}

TEST(Config, ValidationAndHash) {
  FaapConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.hash(), FaapConfig{}.hash());
  FaapConfig d = c;
  d.alpha = 0.2;
  EXPECT_NE(d.hash(), c.hash());
  d.epsilon = 0.0;
  EXPECT_THROW(d.validate(), Error);
}

}  // namespace
}  // namespace faap
