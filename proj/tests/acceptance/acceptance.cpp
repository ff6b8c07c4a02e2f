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

// Acceptance suite. Prints one PASS/FAIL line per criterion A1..A10 and
// exits non-zero if any fails. The end-to-end criteria drive the same
// commands as the `faap` executable on the bundled desk-scale config.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "faap/commands.hpp"
#include "faap/config.hpp"
#include "faap/eval.hpp"
#include "faap/faap.hpp"
#include "faap/metrics.hpp"
#include "faap/viz.hpp"

namespace faap {
namespace {

namespace fs = std::filesystem;

// --- Pinned tolerances ---------------------------------------------------------

constexpr double kOracleTolerance = 1e-12;
constexpr double kA1Seconds = 10.0;
constexpr double kBudget = 0.05 + 1e-6;
constexpr double kA2Seconds = 60.0;
constexpr double kMinPreDeo = 0.2;
constexpr double kDeoRatio = 0.5;
constexpr double kMaxAccDrop = 0.05;
constexpr double kGradTolerance = 1e-4;
constexpr double kA5Seconds = 120.0;
constexpr double kZProbeMaxPerturbed = 0.65;
constexpr double kZProbeMinClean = 0.9;
constexpr double kYProbeMinPerturbed = 0.85;
constexpr double kMassInBox = 0.5;
constexpr double kFocusedFraction = 0.8;

// --- Reporting -----------------------------------------------------------------

struct Outcome {
  std::string id;
  bool pass = false;
  std::string detail;
};

std::vector<Outcome> g_outcomes;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

void note(const std::string& line) { std::printf("    %s\n", line.c_str()); }

void record(const std::string& id, bool pass, const std::string& detail, double seconds) {
  g_outcomes.push_back({id, pass, detail});
  std::printf("%s %s  %s [%.1fs]\n", id.c_str(), pass ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const BeforeAfterRow& find_row(const std::vector<BeforeAfterRow>& rows, const std::string& name) {
  for (const auto& r : rows) {
    if (r.condition == name) return r;
  }
  throw Error(ErrorCode::kMissingArtifact, "report has no row " + name);
}

// --- A1: metric oracle -------------------------------------------------------------

struct OracleValues {
  double dp, deo, acc;
};

// Integer counts per (group, true class, predicted class).
OracleValues count_oracle(const std::vector<PredictionRecord>& r) {
  long c[2][2][2] = {};
  for (const auto& x : r) ++c[x.z > 0][x.y_true > 0][x.y_pred > 0];
  auto frac = [](long a, long b) { return static_cast<double>(a) / static_cast<double>(b); };
  double accept[2], fpr[2], fnr[2];
  long correct = 0;
  for (int g = 0; g < 2; ++g) {
    const long size = c[g][0][0] + c[g][0][1] + c[g][1][0] + c[g][1][1];
    accept[g] = frac(c[g][0][1] + c[g][1][1], size);
    fpr[g] = frac(c[g][0][1], c[g][0][0] + c[g][0][1]);
    fnr[g] = frac(c[g][1][0], c[g][1][0] + c[g][1][1]);
    correct += c[g][0][0] + c[g][1][1];
  }
  return {std::abs(accept[1] - accept[0]), std::abs(fpr[1] - fpr[0]) + std::abs(fnr[1] - fnr[0]),
          frac(correct, static_cast<long>(r.size()))};
}

void check_a1() {
  Stopwatch t;
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> len(4, 64), bit(0, 1);
  double worst = 0.0;
  int sets = 0;
  while (sets < 1000) {
    std::vector<PredictionRecord> r(len(rng));
    for (auto& x : r) x = {bit(rng) ? 1 : -1, bit(rng) ? 1 : -1, bit(rng) ? 1 : -1};
    bool cells[2][2] = {};
    for (const auto& x : r) cells[x.z > 0][x.y_true > 0] = true;
    if (!(cells[0][0] && cells[0][1] && cells[1][0] && cells[1][1])) continue;
    const OracleValues o = count_oracle(r);
    const FairnessReport rep = audit(r);
    worst = std::max({worst, std::abs(rep.dp_gap - o.dp), std::abs(rep.deo_gap - o.deo),
                      std::abs(rep.accuracy - o.acc)});
    ++sets;
  }
  const double s = t.seconds();
  record("A1", worst <= kOracleTolerance && s < kA1Seconds,
         fmt("%d record sets, max |metric - oracle| = %.3g (<= %.0e), runtime %.2fs (< %.0fs)", sets,
             worst, kOracleTolerance, s, kA1Seconds),
         s);
}

// --- A5: gradients on a miniature model ----------------------------------------------

DeployedModel<double> mini_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Network<double> g;
  g.add(std::make_unique<Conv2dLayer<double>>(ConvGeometry{3, 4, 3, 1, 1}, &rng));
  g.add(std::make_unique<ActivationLayer<double>>(Activation::kTanh));
  g.add(std::make_unique<Conv2dLayer<double>>(ConvGeometry{4, 4, 3, 2, 1}, &rng));
  g.add(std::make_unique<ActivationLayer<double>>(Activation::kTanh));
  Network<double> f;
  f.add(std::make_unique<GlobalAvgPoolLayer<double>>());
  f.add(std::make_unique<LinearLayer<double>>(4, 2, &rng));
  ModelMetadata meta;
  meta.arch.image_size = 8;
  meta.arch.stages = 1;
  meta.arch.base_width = 4;
  return DeployedModel<double>(std::move(g), std::move(f), meta);
}

Vector<double> flat(const Gradients<double>& grads) {
  Eigen::Index size = 0;
  for (const auto& m : grads) size += m.size();
  Vector<double> out(size);
  Eigen::Index off = 0;
  for (const auto& m : grads) {
    out.segment(off, m.size()) = Eigen::Map<const Vector<double>>(m.data(), m.size());
    off += m.size();
  }
  return out;
}

// Max relative error of the directional derivative over `directions` random
// unit directions, against central differences.
double directional_error(Network<double>& net, const Vector<double>& grad,
                         const std::function<double()>& loss, int directions, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  const Vector<double> theta = net.flatten();
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    Vector<double> d(theta.size());
    for (auto& v : d) v = n(rng);
    d.normalize();
    const double h = 1e-5;
    net.assign(theta + h * d);
    const double lp = loss();
    net.assign(theta - h * d);
    const double lm = loss();
    net.assign(theta);
    const double fd = (lp - lm) / (2 * h);
    const double an = grad.dot(d);
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-10}));
  }
  return worst;
}

void check_a5() {
  Stopwatch t;
  const DeployedModel<double> model = mini_model(11);
  std::mt19937_64 rng(12);
  AttributeDiscriminator<double> disc(build_latent_head<double>(4, 6, rng));
  std::normal_distribution<double> normal(0.0, 0.5);
  for (auto* p : disc.network().parameters()) {
    for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] = normal(rng);
  }
  // Random generator weights and a wide budget keep every loss term's
  // gradient well away from the finite-difference noise floor.
  Network<double> gnet = build_generator<double>({3, 8, 8}, 2, 0.3, rng);
  for (auto* p : gnet.parameters()) {
    for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] = normal(rng);
  }
  PerturbationGenerator<double> gen(std::move(gnet), 0.3);
  Tensor<double> x(6, {3, 8, 8});
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = u(rng);
  const std::vector<int> y = {1, -1, 1, 1, -1, -1}, z = {1, 1, -1, -1, 1, -1};
  const AttributeDiscriminator<double>* discs[] = {&disc};
  const DeployedModel<double>* models[] = {&model};

  std::map<std::string, double> err;
  {
    Gradients<double> g = disc.network().zero_gradients();
    discriminator_objective(gen, disc, model, x, z, &g);
    err["L_D"] = directional_error(disc.network(), flat(g), [&] {
      return discriminator_objective<double>(gen, disc, model, x, z);
    }, 100, 1);
  }
  const double alpha = 0.7, beta = 1.3;
  const std::pair<const char*, GeneratorLossWeights> terms[] = {
      {"L_G^fair", {1.0, alpha, 0.0}}, {"L_G^T", {0.0, alpha, 1.0}}, {"L_G", {1.0, alpha, beta}}};
  for (const auto& [name, w] : terms) {
    Gradients<double> g = gen.network().zero_gradients();
    generator_objective<double>(gen, discs, models, x, y, z, w, &g);
    err[name] = directional_error(gen.network(), flat(g), [&, w = w] {
      return generator_objective<double>(gen, discs, models, x, y, z, w).total;
    }, 100, 2);
  }
  double worst = 0.0;
  std::string parts;
  for (const auto& [name, e] : err) {
    worst = std::max(worst, e);
    parts += fmt("%s %.2e, ", name.c_str(), e);
  }
  const double s = t.seconds();
  record("A5", worst <= kGradTolerance && s < kA5Seconds,
         parts + fmt("max relative error over 100 directions each (<= %.0e)", kGradTolerance), s);
}

// --- Pipeline --------------------------------------------------------------------

struct Pipeline {
  RunConfig config;
  fs::path root;

  RunContext context(std::uint64_t seed) const {
    ::setenv(kOutputRootEnv, root.c_str(), 1);
    return RunContext::create(config, seed, false);
  }
};

void train_flavor(const Pipeline& p, std::uint64_t seed, const std::string& flavor) {
  const RunContext ctx = p.context(seed);
  cmd_gen_data(ctx);
  cmd_train_deployed(ctx, flavor);
  cmd_train_faap(ctx, flavor);
}

ExperimentTable normal_table(const Pipeline& p, const fs::path& out) {
  const RunContext ctx = p.context(0);
  ExperimentSpec spec;
  spec.dataset_id = "planted-bias";
  spec.flavors = {"normal"};
  spec.seeds = p.config.eval.seeds;
  spec.artifact_dir = ctx.dir;
  spec.output_dir = out;
  spec.config_hash = p.config.hash();
  return run_experiment(spec, [&](std::uint64_t s) { return load_bundle(ctx, s).test; });
}

double drop(const BeforeAfterRow& r) { return r.before.accuracy - r.after.accuracy; }

void check_a3(const Pipeline& p, const fs::path& out) {
  Stopwatch t;
  for (std::uint64_t s : p.config.eval.seeds) train_flavor(p, s, "normal");
  const ExperimentTable table = normal_table(p, out);
  for (const auto& r : table.rows) {
    note(fmt("%s: DEO %.4f -> %.4f, ACC %.4f -> %.4f", r.condition.c_str(), r.before.deo_gap,
             r.after.deo_gap, r.before.accuracy, r.after.accuracy));
  }
  const BeforeAfterRow& m = table.medians.front();
  const bool pass = m.before.deo_gap >= kMinPreDeo &&
                    m.after.deo_gap <= kDeoRatio * m.before.deo_gap && drop(m) <= kMaxAccDrop;
  record("A3", pass,
         fmt("median pre DEO %.4f (>= %.1f), post DEO %.4f (<= %.4f), ACC %.4f -> %.4f, drop "
             "%.2f pts (<= %.0f)",
             m.before.deo_gap, kMinPreDeo, m.after.deo_gap, kDeoRatio * m.before.deo_gap,
             m.before.accuracy, m.after.accuracy, 100 * drop(m), 100 * kMaxAccDrop),
         t.seconds());
}

void check_a4(const Pipeline& p) {
  Stopwatch t;
  for (std::uint64_t s : p.config.eval.seeds) {
    for (const char* f : {"fair", "lf", "rg"}) train_flavor(p, s, f);
  }
  const RunContext ctx = p.context(0);
  cmd_evaluate(ctx);
  const auto rows = parse_rows(slurp(ctx.reports_dir() / "table1.records"));
  std::map<std::string, BeforeAfterRow> med;
  for (const char* f : {"normal", "fair", "lf", "rg"}) {
    med[f] = find_row(rows, std::string(f) + "/median");
    note(fmt("%s/median: DEO %.4f -> %.4f, ACC %.4f -> %.4f", f, med[f].before.deo_gap,
             med[f].after.deo_gap, med[f].before.accuracy, med[f].after.accuracy));
  }
  const double normal = med["normal"].before.deo_gap;
  const bool order = med["fair"].before.deo_gap < normal && normal < med["lf"].before.deo_gap &&
                     normal < med["rg"].before.deo_gap;
  const bool lf = med["lf"].after.deo_gap <= kDeoRatio * med["lf"].before.deo_gap;
  const bool rg = med["rg"].after.deo_gap <= kDeoRatio * med["rg"].before.deo_gap;
  record("A4", order && lf && rg,
         fmt("median DEO fair %.4f < normal %.4f < {LF %.4f, RG %.4f}: %s; post/pre LF %.3f, RG "
             "%.3f (<= %.1f)",
             med["fair"].before.deo_gap, normal, med["lf"].before.deo_gap, med["rg"].before.deo_gap,
             order ? "holds" : "violated", med["lf"].after.deo_gap / med["lf"].before.deo_gap,
             med["rg"].after.deo_gap / med["rg"].before.deo_gap, kDeoRatio),
         t.seconds());
}

// --- A2: budget invariant ------------------------------------------------------------

void check_a2(const Pipeline& p) {
  Stopwatch t;
  const RunContext ctx = p.context(0);
  const DeployedModel<float> model = load_model(ctx.model_path("normal", 0));
  const DatasetBundle bundle = load_bundle(ctx, 0);

  std::vector<PerturbationGenerator<float>> states;
  // Ten snapshots from the first 100 iterations of a fresh run.
  FaapConfig short_run = p.config.faap;
  short_run.iterations = 100;
  train_faap(model, bundle.faap_train, short_run, 77, [&](long it, const PerturbationGenerator<float>& g) {
    if (it % 10 == 0) states.push_back(g);
  });
  for (std::uint64_t s : p.config.eval.seeds) states.push_back(load_generator(ctx.generator_path("normal", s)));
  for (const char* f : {"fair", "lf", "rg"}) states.push_back(load_generator(ctx.generator_path(f, 0)));
  // Untrained generators, two of them driven deep into saturation.
  std::mt19937_64 rng(5);
  const Shape shape = model.input_shape();
  for (float scale : {1.0f, 1.0f, 40.0f, 400.0f}) {
    Network<float> net = build_generator<float>(shape, p.config.faap.generator_width,
                                                p.config.faap.epsilon, rng);
    for (auto* m : net.parameters()) *m *= scale;
    states.emplace_back(std::move(net), p.config.faap.epsilon);
  }
  if (states.size() > 20) states.erase(states.begin() + 20, states.end());

  // 1000 images: uniform noise with some pixels pinned to the range ends.
  Tensor<float> x(1000, shape);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (Eigen::Index i = 0; i < x.data.size(); ++i) {
    const float v = u(rng);
    x.data.data()[i] = v < 0.05f ? 0.0f : (v > 0.95f ? 1.0f : u(rng));
  }
  long violations = 0;
  double worst = 0.0;
  for (const auto& g : states) {
    for (int first = 0; first < x.batch; first += 250) {
      const Tensor<float> in = x.slice(first, 250);
      const Tensor<float> out = g.perturb(in);
      const auto diff = (out.data - in.data).cwiseAbs().cast<double>().eval();
      worst = std::max(worst, diff.maxCoeff());
      violations += (diff.array() > kBudget).count() + (out.data.array() < 0.0f).count() +
                    (out.data.array() > 1.0f).count();
    }
  }
  const double s = t.seconds();
  record("A2", violations == 0 && states.size() == 20 && s < kA2Seconds,
         fmt("%zu generator states x 1000 images, max |x_hat - x| = %.6f (<= %.6f), %ld violations, "
             "runtime %.1fs (< %.0fs)",
             states.size(), worst, kBudget, violations, s, kA2Seconds),
         s);
}

// --- A6: alpha never reaches the discriminator update ----------------------------------

void check_a6(const Pipeline& p) {
  Stopwatch t;
  const RunContext ctx = p.context(0);
  const DeployedModel<float> model = load_model(ctx.model_path("normal", 0));
  const DatasetSplit& data = load_bundle(ctx, 0).faap_train;
  std::vector<std::size_t> idx(64);
  std::iota(idx.begin(), idx.end(), 0);
  const Tensor<float> x = data.images(idx);
  std::vector<int> z;
  for (std::size_t i : idx) z.push_back(data.samples[i].z);

  std::vector<double> losses;
  std::vector<Vector<float>> deltas;
  for (double alpha : {0.0, 1.0, 10.0}) {
    FaapConfig c = p.config.faap;
    c.alpha = alpha;
    FaapTrainer<float> trainer({&model}, c, 3);
    const Vector<float> before = trainer.discriminators().front().network().flatten();
    losses.push_back(trainer.discriminator_step(x, z));
    // A second step on the same batch, so the update reads a non-trivial state.
    losses.push_back(trainer.discriminator_step(x, z));
    deltas.push_back(trainer.discriminators().front().network().flatten() - before);
  }
  bool same = true;
  for (int k = 1; k < 3; ++k) {
    same = same && std::memcmp(&losses[2 * k], &losses[0], sizeof(double)) == 0 &&
           std::memcmp(&losses[2 * k + 1], &losses[1], sizeof(double)) == 0 &&
           deltas[k].size() == deltas[0].size() &&
           std::memcmp(deltas[k].data(), deltas[0].data(), sizeof(float) * deltas[0].size()) == 0;
  }
  record("A6", same && deltas[0].cwiseAbs().maxCoeff() > 0.0f,
         fmt("two D updates on a fixed 64-sample batch: losses and %ld parameter deltas "
             "bit-identical across alpha in {0, 1, 10}: %s",
             static_cast<long>(deltas[0].size()), same ? "yes" : "no"),
         t.seconds());
}

// --- A7: latent probes ---------------------------------------------------------------

void check_a7(const Pipeline& p) {
  Stopwatch t;
  std::vector<double> z_clean, z_pert, y_pert;
  for (std::uint64_t s : p.config.eval.seeds) {
    const RunContext ctx = p.context(s);
    const DeployedModel<float> model = load_model(ctx.model_path("normal", s));
    const PerturbationGenerator<float> gen = load_generator(ctx.generator_path("normal", s));
    const DatasetBundle b = load_bundle(ctx, s);
    const Tensor<float> ftr = split_features(model, b.faap_train);
    const Tensor<float> fte = split_features(model, b.test);
    const Tensor<float> ptr = split_features(model, b.faap_train, &gen);
    const Tensor<float> pte = split_features(model, b.test, &gen);
    ProbeConfig pc;
    pc.seed = s;
    const auto ztr = b.faap_train.protected_attributes(), zte = b.test.protected_attributes();
    const auto ytr = b.faap_train.targets(), yte = b.test.targets();
    z_clean.push_back(probe_accuracy(ftr, ztr, fte, zte, pc));
    z_pert.push_back(probe_accuracy(ptr, ztr, pte, zte, pc));
    y_pert.push_back(probe_accuracy(ptr, ytr, pte, yte, pc));
    note(fmt("seed %llu: z-probe g(x) %.4f, g(x_hat) %.4f; y-probe g(x_hat) %.4f",
             static_cast<unsigned long long>(s), z_clean.back(), z_pert.back(), y_pert.back()));
  }
  const double zc = median(z_clean), zp = median(z_pert), yp = median(y_pert);
  record("A7", zp <= kZProbeMaxPerturbed && zc >= kZProbeMinClean && yp >= kYProbeMinPerturbed,
         fmt("median z-probe on g(x_hat) %.4f (<= %.2f), on g(x) %.4f (>= %.2f); y-probe on "
             "g(x_hat) %.4f (>= %.2f)",
             zp, kZProbeMaxPerturbed, zc, kZProbeMinClean, yp, kYProbeMinPerturbed),
         t.seconds());
}

// --- A8: transfer to the mock endpoint ----------------------------------------------------

void check_a8(const Pipeline& p) {
  Stopwatch t;
  for (std::uint64_t s : p.config.eval.seeds) {
    const RunContext ctx = p.context(s);
    cmd_train_deployed(ctx, "", true);
    cmd_train_faap(ctx, "", true);
  }
  const RunContext ctx = p.context(0);
  cmd_transfer(ctx);
  const auto rows = parse_rows(slurp(ctx.reports_dir() / "table2.records"));
  for (const auto& r : rows) {
    note(fmt("%s: DEO %.4f -> %.4f, ACC %.4f -> %.4f%s", r.condition.c_str(), r.before.deo_gap,
             r.after.deo_gap, r.before.accuracy, r.after.accuracy, r.partial ? " (partial)" : ""));
  }
  const BeforeAfterRow& m = find_row(rows, "mock/median");
  record("A8", m.after.deo_gap < m.before.deo_gap && drop(m) <= kMaxAccDrop,
         fmt("median over seeds through the mock endpoint: DEO %.4f -> %.4f (strict decrease), "
             "ACC drop %.2f pts (<= %.0f)",
             m.before.deo_gap, m.after.deo_gap, 100 * drop(m), 100 * kMaxAccDrop),
         t.seconds());
}

// --- A9: Grad-CAM focus ------------------------------------------------------------------

void check_a9(const Pipeline& p) {
  Stopwatch t;
  std::vector<double> fractions;
  for (std::uint64_t s : p.config.eval.seeds) {
    const RunContext ctx = p.context(s);
    const DeployedModel<float> model = load_model(ctx.model_path("normal", s));
    const PerturbationGenerator<float> gen = load_generator(ctx.generator_path("normal", s));
    const DatasetSplit test = perturb_split(gen, load_bundle(ctx, s).test);
    const Prediction<float> pred = predict_split(model, test);
    const Box box = label_cue_box(p.config.data.image_size);
    long correct = 0, focused = 0;
    double mass = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (pred.labels[i] != test.samples[i].y) continue;
      const double m = grad_cam(model, test.samples[i].image, pred.labels[i]).mass_in(box);
      ++correct;
      mass += m;
      focused += m >= kMassInBox;
    }
    fractions.push_back(static_cast<double>(focused) / static_cast<double>(correct));
    note(fmt("seed %llu: %ld of %ld correct post-FAAP samples focused (%.4f), mean mass in box %.4f",
             static_cast<unsigned long long>(s), focused, correct, fractions.back(),
             mass / static_cast<double>(correct)));
  }
  const double f = median(fractions);
  record("A9", f >= kFocusedFraction,
         fmt("median fraction of correct post-FAAP samples with >= %.0f%% heatmap mass in the "
             "label-cue box: %.4f (>= %.2f)",
             100 * kMassInBox, f, kFocusedFraction),
         t.seconds());
}

// --- A10: determinism ---------------------------------------------------------------------

void check_a10(const Pipeline& first, const fs::path& first_reports, const fs::path& work) {
  Stopwatch t;
  Pipeline again = first;
  again.root = work / "rerun";
  fs::remove_all(again.root);
  for (std::uint64_t s : again.config.eval.seeds) train_flavor(again, s, "normal");
  const fs::path reports = work / "a10_reports";
  normal_table(again, reports);
  bool same = true;
  for (const char* f : {"table1.records", "table1.txt"}) {
    const std::string a = slurp(first_reports / f), b = slurp(reports / f);
    same = same && !a.empty() && a == b;
  }
  record("A10", same,
         fmt("independent rerun of the A3 pipeline (data, models, generators, report): reports "
             "byte-identical: %s",
             same ? "yes" : "no"),
         t.seconds());
}

}  // namespace
}  // namespace faap

int main(int argc, char** argv) {
  using namespace faap;
  CLI::App app{"FAAP acceptance suite"};
  std::string work = "acceptance_work";
  std::string config_file = std::string(FAAP_SOURCE_DIR) + "/configs/desk_synth.cfg";
  bool reuse = false;
  app.add_option("--work-dir", work, "Scratch directory for run artifacts");
  app.add_option("--config", config_file, "Run configuration");
  app.add_flag("--reuse", reuse, "Keep artifacts from a previous run of the suite");
  CLI11_PARSE(app, argc, argv);

  const fs::path root = fs::absolute(work);
  if (!reuse) fs::remove_all(root);
  fs::create_directories(root);

  try {
    Pipeline p{load_run_config(config_file), root / "run"};
    std::printf("acceptance: config %s (hash %s), seeds", config_file.c_str(), p.config.hash().c_str());
    for (auto s : p.config.eval.seeds) std::printf(" %llu", static_cast<unsigned long long>(s));
    std::printf("\n");
    const fs::path a3_reports = root / "a3_reports";

    check_a1();
    check_a5();
    check_a3(p, a3_reports);
    check_a4(p);
    check_a2(p);
    check_a6(p);
    check_a7(p);
    check_a8(p);
    check_a9(p);
    check_a10(p, a3_reports, root);
  } catch (const Error& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 1;
  }

  std::sort(g_outcomes.begin(), g_outcomes.end(), [](const Outcome& a, const Outcome& b) {
    return std::stoi(a.id.substr(1)) < std::stoi(b.id.substr(1));
  });
  int passed = 0;
  std::printf("\nsummary\n");
  for (const auto& o : g_outcomes) {
    std::printf("%-4s %s\n", o.id.c_str(), o.pass ? "PASS" : "FAIL");
    passed += o.pass;
  }
  std::printf("%d of %zu criteria passed\n", passed, g_outcomes.size());
  return passed == static_cast<int>(g_outcomes.size()) ? 0 : 1;
}
