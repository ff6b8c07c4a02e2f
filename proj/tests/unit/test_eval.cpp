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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "faap/eval.hpp"

namespace faap {
namespace {

namespace fs = std::filesystem;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIoError;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("faap_test_eval_" + name);
  fs::remove_all(p);
  return p;
}

struct Harness : ::testing::Test {
  static DatasetBundle& bundle() {
    static DatasetBundle b = [] {
      BiasSpec spec;
      spec.n = 400;
      return generate_planted_bias_dataset(spec, 16, 3);
    }();
    return b;
  }
  static TrainConfig config(std::uint64_t seed) {
    TrainConfig c;
    c.arch.image_size = 16;
    c.epochs = 2;
    c.seed = seed;
    c.convergence_margin = 0.0;
    return c;
  }
  static const DeployedModel<float>& model() {
    static DeployedModel<float> m = train_deployed(bundle().deployed_train, bundle().validation,
                                                   FlavorSpec::normal(), config(1), bundle().id);
    return m;
  }
  static PerturbationGenerator<float> zero_generator() {
    std::mt19937_64 rng(0);
    Network<float> net = build_generator<float>({3, 16, 16}, 2, 0.05, rng);
    for (auto* p : net.parameters()) p->setZero();
    return PerturbationGenerator<float>(std::move(net), 0.05);
  }
  static PerturbationGenerator<float> random_generator(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return PerturbationGenerator<float>(build_generator<float>({3, 16, 16}, 2, 0.05, rng), 0.05);
  }
};

// Answers the same token whatever it is sent.
class ConstantEndpoint final : public RemoteEndpoint {
 public:
  explicit ConstantEndpoint(std::string token) : token_(std::move(token)) {}
  std::string submit(const std::string&, std::span<const std::uint8_t>) override { return token_; }
  LabelScheme scheme() const override { return LabelScheme::kBinary; }

 private:
  std::string token_;
};

TEST_F(Harness, ZeroGeneratorLeavesMetricsUnchanged) {
  const BeforeAfterRow row = evaluate_before_after(model(), zero_generator(), bundle().test, "n");
  EXPECT_EQ(row.before, row.after);
  EXPECT_FALSE(row.partial);
  EXPECT_EQ(row.before.n_records, bundle().test.size());
}

TEST_F(Harness, PredictionRecordsRejectLengthMismatch) {
  const std::vector<int> short_preds(3, 1);
  EXPECT_EQ(code_of([&] { prediction_records(bundle().test, short_preds); }),
            ErrorCode::kLengthMismatch);
}

TEST_F(Harness, ConstantEndpointHasNoGapsAndBaseRateAccuracy) {
  ConstantEndpoint endpoint("1");
  const RemoteResult r = evaluate_remote(endpoint, random_generator(2), bundle().test, "const");
  double positives = 0;
  for (const auto& s : bundle().test.samples) positives += s.y > 0;
  for (const FairnessReport* rep : {&r.row.before, &r.row.after}) {
    EXPECT_DOUBLE_EQ(rep->dp_gap, 0.0);
    EXPECT_DOUBLE_EQ(rep->deo_gap, 0.0);
    EXPECT_DOUBLE_EQ(rep->accuracy, positives / bundle().test.size());
  }
  EXPECT_EQ(r.original_log.size(), bundle().test.size());
  EXPECT_EQ(r.perturbed_log.front().filename.rfind("perturbed/", 0), 0u);
}

TEST_F(Harness, MockEndpointMatchesModelOnCleanImages) {
  MockEndpoint endpoint(model(), LabelScheme::kBinary);
  const RemoteResult r = evaluate_remote(endpoint, zero_generator(), bundle().test, "mock");
  const BeforeAfterRow local = evaluate_before_after(model(), zero_generator(), bundle().test, "n");
  EXPECT_NEAR(r.row.before.accuracy, local.before.accuracy, 2.0 / bundle().test.size());
  EXPECT_EQ(endpoint.requests(), 2 * bundle().test.size());
  EXPECT_EQ(r.dropped, 0u);
}

TEST_F(Harness, UnreachableEndpointFailsAfterRetries) {
  MockEndpoint endpoint(model(), LabelScheme::kSmile, {0.0, true, 0});
  EXPECT_EQ(code_of([&] {
              evaluate_remote(endpoint, zero_generator(), bundle().test, "down", {3});
            }),
            ErrorCode::kEndpointFailure);
  // Every original submission was attempted exactly max_attempts times.
  EXPECT_EQ(endpoint.requests(), 3 * bundle().test.size());
}

TEST_F(Harness, FlakyEndpointGivesPartialRow) {
  MockEndpoint endpoint(model(), LabelScheme::kSmile, {0.5, false, 7});
  const RemoteResult r =
      evaluate_remote(endpoint, zero_generator(), bundle().test, "flaky", {1});
  EXPECT_TRUE(r.row.partial);
  EXPECT_GT(r.dropped, 0u);
  EXPECT_EQ(r.row.before.n_records + r.dropped, bundle().test.size());
  EXPECT_EQ(r.row.after.n_records, r.row.before.n_records);
  const std::string table = render_before_after("T", std::span(&r.row, 1));
  EXPECT_NE(table.find("(partial)"), std::string::npos);
}

TEST(Labels, TokenMapping) {
  EXPECT_EQ(map_label("none", LabelScheme::kSmile), -1);
  EXPECT_EQ(map_label("smile", LabelScheme::kSmile), 1);
  EXPECT_EQ(map_label("laugh", LabelScheme::kSmile), 1);
  EXPECT_EQ(map_label("0", LabelScheme::kBinary), -1);
  EXPECT_EQ(map_label("-1", LabelScheme::kBinary), -1);
  EXPECT_EQ(map_label("1", LabelScheme::kBinary), 1);
  EXPECT_EQ(map_label("+1", LabelScheme::kBinary), 1);
  EXPECT_EQ(code_of([] { map_label("grin", LabelScheme::kSmile); }), ErrorCode::kEndpointFailure);
  EXPECT_EQ(code_of([] { map_label("2", LabelScheme::kBinary); }), ErrorCode::kEndpointFailure);
}

TEST(RemoteLog, RoundTrip) {
  const std::vector<RemoteLogEntry> log = {{"a.png", "smile"}, {"perturbed/a.png", ""},
                                           {"b.png", "none"}};
  const fs::path p = scratch("log") / "remote.log";
  write_remote_log(p, log);
  EXPECT_EQ(read_remote_log(p), log);
}

TEST(Reports, SerializeParseRoundTrip) {
  std::vector<PredictionRecord> recs;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 40; ++i) {
    recs.push_back({i % 2 ? 1 : -1, (i / 2) % 2 ? 1 : -1, rng() % 2 ? 1 : -1});
  }
  BeforeAfterRow row{"normal/s0", audit(recs), audit(recs), true};
  row.after.accuracy = 0.25;
  const std::vector<BeforeAfterRow> rows = {row, {"fair/s0", audit(recs), audit(recs), false}};
  const std::string text = serialize_rows({"Title", "abc123", {0, 1, 2}}, rows);
  EXPECT_EQ(text.rfind("# Title\n# config_hash=abc123 seeds=0,1,2 version=" + library_version(), 0),
            0u);
  const auto back = parse_rows(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].condition, "normal/s0");
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(back[k].before.deo_gap, rows[k].before.deo_gap, 5e-7);
    EXPECT_EQ(back[k].before.privileged, rows[k].before.privileged);
  }
  EXPECT_DOUBLE_EQ(back[0].after.accuracy, 0.25);
  EXPECT_TRUE(back[0].partial);
  EXPECT_FALSE(back[1].partial);
}

TEST(Reports, MedianOfOddAndEvenCounts) {
  auto row = [](double acc, double deo) {
    BeforeAfterRow r;
    r.before.accuracy = r.after.accuracy = acc;
    r.before.deo_gap = r.after.deo_gap = deo;
    return r;
  };
  const std::vector<BeforeAfterRow> odd = {row(0.9, 0.1), row(0.7, 0.5), row(0.8, 0.3)};
  EXPECT_DOUBLE_EQ(median_row(odd, "m").after.accuracy, 0.8);
  EXPECT_DOUBLE_EQ(median_row(odd, "m").after.deo_gap, 0.3);
  const std::vector<BeforeAfterRow> even = {row(0.9, 0.1), row(0.7, 0.5)};
  EXPECT_DOUBLE_EQ(median_row(even, "m").before.accuracy, 0.8);
  EXPECT_EQ(code_of([] { median_row({}, "m"); }), ErrorCode::kEmptyInput);
}

TEST_F(Harness, ExperimentGridFromCheckpoints) {
  const fs::path dir = scratch("grid");
  ExperimentSpec spec;
  spec.dataset_id = bundle().id;
  spec.flavors = {"normal", "fair", "lf", "rg"};
  spec.seeds = {0, 1, 2};
  spec.artifact_dir = dir;
  spec.output_dir = dir / "reports";
  spec.config_hash = "h";
  const TestSplitProvider provider = [](std::uint64_t) { return bundle().test; };

  try {
    run_experiment(spec, provider);
    FAIL() << "expected MissingArtifact";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingArtifact);
    EXPECT_NE(std::string(e.what()).find(model_checkpoint_path(dir, "normal", 0).string()),
              std::string::npos);
  }

  // One tiny model reused for every cell; the grid logic is what is tested.
  for (const auto& flavor : spec.flavors) {
    for (std::uint64_t seed : spec.seeds) {
      fs::create_directories(model_checkpoint_path(dir, flavor, seed).parent_path());
      fs::create_directories(generator_checkpoint_path(dir, flavor, seed).parent_path());
      save_model(model_checkpoint_path(dir, flavor, seed), model());
      save_generator(generator_checkpoint_path(dir, flavor, seed), random_generator(seed));
    }
  }
  const ExperimentTable t = run_experiment(spec, provider);
  ASSERT_EQ(t.rows.size(), 12u);
  ASSERT_EQ(t.medians.size(), 4u);
  EXPECT_EQ(t.rows[3].condition, "fair/s0");
  EXPECT_EQ(t.medians[2].condition, "lf/median");
  const std::string first = slurp(spec.output_dir / "table1.records");
  EXPECT_EQ(parse_rows(first).size(), 16u);
  run_experiment(spec, provider);
  EXPECT_EQ(slurp(spec.output_dir / "table1.records"), first);
  EXPECT_NE(slurp(spec.output_dir / "table1.txt").find("fair/median + FAAP"), std::string::npos);
}

TEST_F(Harness, SplitFeaturesCoverEverySample) {
  const Tensor<float> f = split_features(model(), bundle().test, nullptr, 7);
  EXPECT_EQ(f.batch, static_cast<int>(bundle().test.size()));
  EXPECT_LE((f.data - model().extract_features(bundle().test.images()).data).cwiseAbs().maxCoeff(),
            1e-5f);
}

TEST(Probe, SeparatesPlantedChannelAndFailsOnNoise) {
  // Channel 0 carries the label on every cell; channel 1 is noise.
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n;
  auto make = [&](int count, std::vector<int>* labels) {
    Tensor<float> t(count, {2, 2, 2});
    labels->clear();
    for (int i = 0; i < count; ++i) {
      const int y = rng() % 2 ? 1 : -1;
      labels->push_back(y);
      for (int c = 0; c < 4; ++c) {
        t.at(i, 0, c / 2, c % 2) = 0.8f * y + 0.3f * n(rng);
        t.at(i, 1, c / 2, c % 2) = n(rng);
      }
    }
    return t;
  };
  std::vector<int> ytr, yte;
  const Tensor<float> tr = make(400, &ytr), te = make(200, &yte);
  EXPECT_GE(probe_accuracy(tr, ytr, te, yte), 0.97);
  EXPECT_EQ(probe_accuracy(tr, ytr, te, yte), probe_accuracy(tr, ytr, te, yte));
  std::vector<int> shuffled = ytr;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_LE(probe_accuracy(tr, shuffled, te, yte), 0.65);
}

}  // namespace
}  // namespace faap
