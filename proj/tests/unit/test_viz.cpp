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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "faap/image_io.hpp"
#include "faap/viz.hpp"

namespace faap {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("faap_test_viz_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIoError;
}

struct Viz : ::testing::Test {
  static DatasetBundle& bundle() {
    static DatasetBundle b = [] {
      BiasSpec spec;
      spec.n = 300;
      return generate_planted_bias_dataset(spec, 16, 5);
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
};

TEST_F(Viz, HeatmapShapesAndRange) {
  const Image& img = bundle().test.samples.front().image;
  const Heatmap h = grad_cam(model(), img, 1);
  const int side = 16 / model().metadata().arch.feature_stride();
  EXPECT_EQ(h.grid.rows(), side);
  EXPECT_EQ(h.grid.cols(), side);
  EXPECT_EQ(h.overlay.rows(), 16);
  EXPECT_EQ(h.overlay.cols(), 16);
  if (!h.degenerate) {
    EXPECT_DOUBLE_EQ(h.grid.maxCoeff(), 1.0);
    EXPECT_GE(h.overlay.minCoeff(), 0.0);
    EXPECT_LE(h.overlay.maxCoeff(), 1.0);
    EXPECT_NEAR(h.mass_in({0, 16, 0, 16}), 1.0, 1e-12);
  }
  EXPECT_THROW(grad_cam(model(), img, 0), Error);
}

TEST_F(Viz, ConstantModelGivesDegenerateMap) {
  Network<float> f = model().predictor();
  for (auto* p : f.parameters()) p->setZero();
  const DeployedModel<float> flat(model().extractor(), f, model().metadata());
  const Heatmap h = grad_cam(flat, bundle().test.samples.front().image, 1);
  EXPECT_TRUE(h.degenerate);
  EXPECT_EQ(h.overlay.sum(), 0.0);
  EXPECT_EQ(h.mass_in({0, 16, 0, 16}), 0.0);
}

TEST_F(Viz, HeatmapIgnoresPositiveScoreScaling) {
  const DeployedModel<double> base = DeployedModel<double>(
      model().extractor().cast<double>(), model().predictor().cast<double>(), model().metadata());
  Network<double> f = base.predictor();
  for (auto* p : f.parameters()) *p *= 3.5;
  const DeployedModel<double> scaled(base.extractor(), f, base.metadata());
  for (int i = 0; i < 5; ++i) {
    const Image& img = bundle().test.samples[i].image;
    for (int label : {-1, 1}) {
      const Heatmap a = grad_cam(base, img, label);
      const Heatmap b = grad_cam(scaled, img, label);
      EXPECT_EQ(a.degenerate, b.degenerate);
      EXPECT_LT((a.grid - b.grid).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

std::vector<EmbeddingPoint> meta(int n) {
  std::vector<EmbeddingPoint> m(n);
  for (int i = 0; i < n; ++i) {
    m[i].id = "p" + std::to_string(i);
    m[i].label = i % 2 ? 1 : -1;
  }
  return m;
}

TsneConfig quick_tsne() {
  TsneConfig c;
  c.iterations = 300;
  c.exaggeration_iterations = 100;
  c.perplexity = 5;
  c.seed = 3;
  return c;
}

TEST(Tsne, SeparatesClustersAndIsDeterministic) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.1);
  Matrix<double> x(30, 5);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 5; ++j) x(i, j) = n(rng) + (i < 15 ? 0.0 : 10.0);
  }
  const EmbeddingPlot a = embed_features(x, meta(30), quick_tsne());
  const EmbeddingPlot b = embed_features(x, meta(30), quick_tsne());
  for (int i = 0; i < 30; ++i) {
    EXPECT_EQ(a.points[i].x, b.points[i].x);
    EXPECT_EQ(a.points[i].y, b.points[i].y);
    EXPECT_EQ(a.points[i].id, "p" + std::to_string(i));
  }
  // Leave-one-out 3-nearest-neighbour vote recovers the cluster of almost
  // every point.
  int agree = 0;
  for (int i = 0; i < 30; ++i) {
    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < 30; ++j) {
      if (j != i) d.push_back({std::hypot(a.points[i].x - a.points[j].x, a.points[i].y - a.points[j].y), j});
    }
    std::partial_sort(d.begin(), d.begin() + 3, d.end());
    int same = 0;
    for (int k = 0; k < 3; ++k) same += (d[k].second < 15) == (i < 15);
    agree += same >= 2;
  }
  EXPECT_GE(agree, 27);
}

TEST(Tsne, DuplicatesLandTogether) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Matrix<double> x(24, 4);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = n(rng);
    x.row(i + 12) = x.row(i);
  }
  const EmbeddingPlot p = embed_features(x, meta(24), quick_tsne());
  std::vector<double> all;
  double dup = 0;
  for (int i = 0; i < 24; ++i) {
    for (int j = i + 1; j < 24; ++j) {
      all.push_back(std::hypot(p.points[i].x - p.points[j].x, p.points[i].y - p.points[j].y));
    }
  }
  for (int i = 0; i < 12; ++i) {
    dup = std::max(dup, std::hypot(p.points[i].x - p.points[i + 12].x,
                                   p.points[i].y - p.points[i + 12].y));
  }
  std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
  EXPECT_LT(dup, 0.25 * all[all.size() / 2]);
}

TEST(Tsne, InputValidation) {
  EXPECT_EQ(code_of([] { embed_features(Matrix<double>::Zero(9, 3), meta(9)); }),
            ErrorCode::kTooFewSamples);
  EXPECT_EQ(code_of([] { embed_features(Matrix<double>::Zero(12, 3), meta(11)); }),
            ErrorCode::kLengthMismatch);
}

TEST(Embedding, CoordinatesFile) {
  EmbeddingPlot plot{meta(3)};
  plot.points[1].x = 1.5;
  plot.points[2].perturbed = true;
  const fs::path dir = scratch("embed");
  write_embedding(dir / "emb", plot, 64);
  EXPECT_TRUE(fs::exists(dir / "emb.png"));
  std::ifstream in(dir / "emb.coords");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# id x y label attribute perturbed");
  int rows = 0;
  for (; std::getline(in, line); ++rows) {
    if (rows == 1) {
      EXPECT_EQ(line, "p1 1.500000 0.000000 1 1 0");
    }
  }
  EXPECT_EQ(rows, 3);
}

TEST_F(Viz, ComparisonGridLayoutAndDeterminism) {
  std::vector<ComparisonColumn> cols(3);
  const char* names[] = {"original", "only_T", "ours"};
  for (int c = 0; c < 3; ++c) {
    cols[c].name = names[c];
    for (int r = 0; r < 4; ++r) {
      cols[c].images.push_back(bundle().test.samples[r].image);
      if (c > 0) cols[c].heatmaps.push_back(grad_cam(model(), bundle().test.samples[r].image, 1));
    }
  }
  const fs::path dir = scratch("grid");
  const GridLayout g = render_comparison(dir / "a.png", cols, 4);
  EXPECT_EQ(g.rows, 4);
  EXPECT_EQ(g.cols, 3);
  EXPECT_EQ(g.cell, 64);
  render_comparison(dir / "b.png", cols, 4);
  EXPECT_EQ(slurp(dir / "a.png"), slurp(dir / "b.png"));
  const Image png = read_image(dir / "a.png");
  EXPECT_EQ(png.shape.width, 3 * 64);
  EXPECT_EQ(png.shape.height, 14 + 4 * 64);

  EXPECT_EQ(code_of([&] { render_comparison(dir / "c.png", {}, 4); }), ErrorCode::kEmptyInput);
  cols[1].images.pop_back();
  EXPECT_EQ(code_of([&] { render_comparison(dir / "c.png", cols, 4); }),
            ErrorCode::kLengthMismatch);
}

}  // namespace
}  // namespace faap
