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

#include "faap/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>

namespace faap {

namespace fs = std::filesystem;

namespace {

std::string seed_tag(std::uint64_t s) { return "s" + std::to_string(s); }

std::string canonical_flavor(const std::string& name) { return to_string(parse_flavor(name)); }

void require(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kMissingArtifact, "not found: " + path.string());
}

// True when `path` exists and the command should leave it alone.
bool up_to_date(const RunContext& ctx, const fs::path& path) {
  if (fs::exists(path) && !ctx.force) {
    log_info("up to date: " + path.string() + " (use --force to rebuild)");
    return true;
  }
  return false;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "not found: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

DeployedModel<float> with_provenance(const DeployedModel<float>& model, nlohmann::json provenance) {
  ModelMetadata meta = model.metadata();
  meta.provenance = std::move(provenance);
  return DeployedModel<float>(model.extractor(), model.predictor(), std::move(meta));
}

FaapConfig faap_config(const RunContext& ctx) { return ctx.config.faap; }

}  // namespace

void log_info(const std::string& message) { std::cerr << "[faap] " << message << std::endl; }

RunContext RunContext::create(RunConfig config, std::uint64_t seed, bool force) {
  RunContext ctx;
  const char* env = std::getenv(kOutputRootEnv);
  const fs::path root = env && *env ? fs::path(env) : config.output_dir;
  ctx.dir = root / config.hash();
  ctx.config = std::move(config);
  ctx.seed = seed;
  ctx.force = force;
  fs::create_directories(ctx.dir);
  nlohmann::json manifest = {{"config", ctx.config.to_json()},
                             {"config_hash", ctx.config.hash()},
                             {"version", library_version()}};
  write_text(ctx.dir / "manifest.json", manifest.dump(2) + "\n");
  return ctx;
}

fs::path RunContext::data_dir(std::uint64_t s) const { return dir / "data" / seed_tag(s); }

fs::path RunContext::model_path(const std::string& flavor, std::uint64_t s) const {
  return model_checkpoint_path(dir, flavor, s);
}

fs::path RunContext::heldout_path(std::uint64_t s) const {
  return dir / "models" / ("heldout_" + seed_tag(s) + ".ckpt");
}

fs::path RunContext::generator_path(const std::string& flavor, std::uint64_t s) const {
  fs::path p = generator_checkpoint_path(dir, flavor, s);
  if (config.faap.ablation == Ablation::kTargetOnly) {
    p.replace_filename(p.stem().string() + "_target_only.ckpt");
  }
  return p;
}

fs::path RunContext::ensemble_path(std::uint64_t s) const {
  return dir / "generators" / ("ensemble_" + seed_tag(s) + ".ckpt");
}

nlohmann::json RunContext::provenance(std::uint64_t s) const {
  return {{"config_hash", config.hash()}, {"seed", s}, {"version", library_version()}};
}

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw Error(ErrorCode::kIoError, "run directory is locked: " + path_.string());
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

DatasetBundle load_bundle(const RunContext& ctx, std::uint64_t seed) {
  const DataSection& d = ctx.config.data;
  if (d.source == "corpus") {
    return load_attribute_corpus(d.corpus, d.target_attribute, d.protected_attribute, d.image_size,
                                 seed);
  }
  const fs::path dir = ctx.data_dir(seed);
  require(dir / "dataset.json");
  const auto meta = nlohmann::json::parse(read_text(dir / "dataset.json"));
  DatasetBundle bundle =
      load_attribute_corpus(dir, "Target", "Protected", d.image_size, seed);
  bundle.id = meta.at("id").get<std::string>();
  return bundle;
}

void cmd_gen_data(const RunContext& ctx) {
  const DataSection& d = ctx.config.data;
  const fs::path dir = ctx.data_dir(ctx.seed);
  if (d.source == "corpus") {
    const DatasetBundle b = load_bundle(ctx, ctx.seed);
    log_info("corpus " + b.id + ": " + std::to_string(b.deployed_train.size()) + " / " +
             std::to_string(b.faap_train.size()) + " / " + std::to_string(b.validation.size()) +
             " / " + std::to_string(b.test.size()) + " samples");
    return;
  }
  if (up_to_date(ctx, dir / "dataset.json")) return;
  const DatasetBundle bundle = generate_planted_bias_dataset(d.bias, d.image_size, ctx.seed);
  if (fs::exists(dir)) fs::remove_all(dir);
  save_dataset(bundle, dir);
  nlohmann::json meta = ctx.provenance(ctx.seed);
  meta["id"] = bundle.id;
  write_text(dir / "dataset.json", meta.dump(2) + "\n");
  log_info("wrote " + std::to_string(bundle.deployed_train.size() + bundle.faap_train.size() +
                                     bundle.validation.size() + bundle.test.size()) +
           " samples to " + dir.string());
}

void cmd_train_deployed(const RunContext& ctx, const std::string& flavor_arg, bool heldout) {
  const DeployedSection& dep = ctx.config.deployed;
  const std::string flavor = heldout ? "normal" : (flavor_arg.empty() ? dep.flavor : flavor_arg);
  const fs::path out = heldout ? ctx.heldout_path(ctx.seed) : ctx.model_path(flavor, ctx.seed);
  if (up_to_date(ctx, out)) return;
  const DatasetBundle bundle = load_bundle(ctx, ctx.seed);

  TrainConfig train = dep.train;
  train.seed = heldout ? ctx.seed + 1000 : ctx.seed;
  if (heldout) train.arch = dep.heldout;
  train.arch.image_size = ctx.config.data.image_size;
  log_info("training " + (heldout ? std::string("held-out") : canonical_flavor(flavor)) +
           " model, seed " + std::to_string(ctx.seed));
  const DeployedModel<float> model = train_deployed(
      bundle.deployed_train, bundle.validation, dep.flavor_spec(flavor), train, bundle.id,
      [](const EpochLog& e) {
        log_info("  epoch " + std::to_string(e.epoch) + " loss " + std::to_string(e.label_loss) +
                 " acc " + std::to_string(e.label_accuracy));
      });
  fs::create_directories(out.parent_path());
  save_model(out, with_provenance(model, ctx.provenance(ctx.seed)));
  log_info("wrote " + out.string());
}

void cmd_train_faap(const RunContext& ctx, const std::string& flavor_arg, bool ensemble) {
  const std::string flavor = flavor_arg.empty() ? ctx.config.deployed.flavor : flavor_arg;
  const fs::path out = ensemble ? ctx.ensemble_path(ctx.seed) : ctx.generator_path(flavor, ctx.seed);
  if (up_to_date(ctx, out)) return;
  const DatasetBundle bundle = load_bundle(ctx, ctx.seed);
  const FaapConfig cfg = faap_config(ctx);

  auto progress = [&](long it, const PerturbationGenerator<float>&) {
    if (it % 100 == 0) log_info("  iteration " + std::to_string(it));
  };
  FaapResult<float> result = [&] {
    if (!ensemble) {
      const DeployedModel<float> model = load_model(ctx.model_path(flavor, ctx.seed));
      log_info("training generator against " + canonical_flavor(flavor) + ", seed " +
               std::to_string(ctx.seed));
      return train_faap(model, bundle.faap_train, cfg, ctx.seed, progress);
    }
    std::vector<DeployedModel<float>> models;
    for (const auto& f : ctx.config.eval.surrogates) models.push_back(load_model(ctx.model_path(f, ctx.seed)));
    std::vector<const DeployedModel<float>*> ptrs;
    for (const auto& m : models) ptrs.push_back(&m);
    log_info("training ensemble generator over " + std::to_string(ptrs.size()) + " surrogates");
    return train_faap_ensemble(ptrs, bundle.faap_train, cfg, ctx.seed, progress);
  }();

  nlohmann::json prov = result.generator.provenance();
  prov["run"] = ctx.provenance(ctx.seed);
  result.generator.set_provenance(prov);
  fs::create_directories(out.parent_path());
  save_generator(out, result.generator);

  const fs::path log = ctx.logs_dir() / (out.stem().string() + ".loss");
  if (fs::exists(log)) fs::remove(log);
  write_text(log, "# config_hash=" + ctx.config.hash() + " seed=" + std::to_string(ctx.seed) +
                      " version=" + library_version() + "\n");
  append_loss_log(log, result.trace);
  log_info("wrote " + out.string());
}

void cmd_evaluate(const RunContext& ctx) {
  ExperimentSpec spec;
  spec.flavors = ctx.config.eval.flavors;
  spec.seeds = ctx.config.eval.seeds;
  spec.artifact_dir = ctx.dir;
  spec.output_dir = ctx.reports_dir();
  spec.config_hash = ctx.config.hash();
  spec.target_attribute = ctx.config.data.target_attribute;
  spec.protected_attribute = ctx.config.data.protected_attribute;
  spec.dataset_id = ctx.config.data.source == "corpus" ? ctx.config.data.corpus.filename().string()
                                                       : "planted-bias";
  const ExperimentTable table =
      run_experiment(spec, [&](std::uint64_t s) { return load_bundle(ctx, s).test; });
  log_info("wrote " + (ctx.reports_dir() / "table1.txt").string() + " (" +
           std::to_string(table.rows.size()) + " rows)");
}

void cmd_transfer(const RunContext& ctx) {
  const EvalSection& ev = ctx.config.eval;
  std::vector<BeforeAfterRow> rows;
  for (std::uint64_t s : ev.seeds) {
    require(ctx.heldout_path(s));
    require(ctx.ensemble_path(s));
    const PerturbationGenerator<float> gen = load_generator(ctx.ensemble_path(s));
    const DatasetSplit test = load_bundle(ctx, s).test;
    MockEndpoint endpoint(load_model(ctx.heldout_path(s)), ev.label_scheme,
                          {ev.failure_rate, false, s});
    const RemoteResult r =
        evaluate_remote(endpoint, gen, test, "mock/" + seed_tag(s), {ev.max_attempts});
    write_remote_log(ctx.logs_dir() / ("remote_original_" + seed_tag(s) + ".log"), r.original_log);
    write_remote_log(ctx.logs_dir() / ("remote_perturbed_" + seed_tag(s) + ".log"), r.perturbed_log);
    if (r.dropped) log_info("seed " + std::to_string(s) + ": dropped " + std::to_string(r.dropped));
    rows.push_back(r.row);
  }
  rows.push_back(median_row(rows, "mock/median"));
  write_report(ctx.reports_dir() / "table2",
               {"Transfer to a black-box endpoint", ctx.config.hash(), ev.seeds}, rows);
  log_info("wrote " + (ctx.reports_dir() / "table2.txt").string());
}

void cmd_visualize(const RunContext& ctx, const std::string& flavor_arg) {
  const std::string flavor = flavor_arg.empty() ? ctx.config.deployed.flavor : flavor_arg;
  const VizSection& viz = ctx.config.viz;
  const DeployedModel<float> model = load_model(ctx.model_path(flavor, ctx.seed));
  RunContext ours = ctx;
  ours.config.faap.ablation = Ablation::kNone;
  RunContext only_t = ctx;
  only_t.config.faap.ablation = Ablation::kTargetOnly;
  require(ours.generator_path(flavor, ctx.seed));
  const PerturbationGenerator<float> gen = load_generator(ours.generator_path(flavor, ctx.seed));
  const DatasetSplit test = load_bundle(ctx, ctx.seed).test;
  const std::string stem = canonical_flavor(flavor) + "_" + seed_tag(ctx.seed);

  if (viz.grad_cam) {
    std::vector<std::size_t> idx(std::min<std::size_t>(viz.grid_samples, test.size()));
    std::iota(idx.begin(), idx.end(), 0);
    auto column = [&](const std::string& name, const PerturbationGenerator<float>* g) {
      ComparisonColumn col{name, {}, {}};
      for (std::size_t i : idx) {
        Image img = test.samples[i].image;
        if (g) {
          const Image one[] = {img};
          img = image_from_tensor(g->perturb(tensor_from_images(one)), 0);
        }
        col.heatmaps.push_back(grad_cam(model, img, test.samples[i].y));
        col.images.push_back(std::move(img));
      }
      return col;
    };
    std::vector<ComparisonColumn> cols{column("original", nullptr)};
    const fs::path ablated = only_t.generator_path(flavor, ctx.seed);
    if (fs::exists(ablated)) {
      const PerturbationGenerator<float> g_t = load_generator(ablated);
      cols.push_back(column("only_T", &g_t));
    } else {
      log_info("no target-only generator at " + ablated.string() + "; omitting that column");
    }
    cols.push_back(column("ours", &gen));
    const fs::path out = ctx.figures_dir() / ("gradcam_" + stem + ".png");
    render_comparison(out, cols);
    log_info("wrote " + out.string());
  }

  if (viz.embedding) {
    const std::size_t n = std::min<std::size_t>(viz.embed_points, test.size());
    DatasetSplit subset = test;
    subset.samples.resize(n);
    for (const bool perturbed : {false, true}) {
      const Matrix<double> feats =
          pooled_features(split_features(model, subset, perturbed ? &gen : nullptr));
      std::vector<EmbeddingPoint> meta;
      for (const auto& s : subset.samples) meta.push_back({s.id, 0, 0, s.y, s.z, perturbed});
      TsneConfig tsne = viz.tsne;
      tsne.seed = ctx.seed;
      const EmbeddingPlot plot = embed_features(feats, std::move(meta), tsne);
      const fs::path out =
          ctx.figures_dir() / ("embedding_" + stem + (perturbed ? "_perturbed" : "_original"));
      write_embedding(out, plot);
      log_info("wrote " + out.string() + ".png");
    }
  }
}

}  // namespace faap
