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

// Static diagnostics: Grad-CAM heatmaps and 2-D feature embeddings.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "faap/data.hpp"
#include "faap/model_zoo.hpp"

namespace faap {

struct Heatmap {
  Matrix<double> grid;     // feature-block resolution, values in [0,1]
  Matrix<double> overlay;  // bilinear upsample of grid to image resolution
  /// Nothing survived rectification (or the map was flat); grid and overlay
  /// are all zeros.
  bool degenerate = false;

  /// Fraction of overlay mass inside `box`; 0 for a degenerate map.
  double mass_in(const Box& box) const;
};

/// Grad-CAM on the last convolutional block g(x) of `model` for the class
/// with signed label `label` (-1 or +1). The channel weights are the spatial
/// means of d score / d g(x).
template <typename Scalar>
Heatmap grad_cam(const DeployedModel<Scalar>& model, const Image& image, int label);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  /// <= 0 picks n / (4 * early_exaggeration). Larger steps make the
  /// exaggerated phase oscillate, the more so the fewer the points.
  double learning_rate = 0.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  std::uint64_t seed = 0;
};

struct EmbeddingPoint {
  std::string id;
  double x = 0;
  double y = 0;
  int label = 1;       // y in {-1,+1}
  int attribute = 1;   // z in {-1,+1}
  bool perturbed = false;
};

struct EmbeddingPlot {
  std::vector<EmbeddingPoint> points;
};

/// Pools a feature block to one row per sample (mean over spatial cells).
Matrix<double> pooled_features(const Tensor<float>& features);

/// Exact t-SNE of the rows of `features`: Gaussian affinities calibrated to
/// the perplexity by bisection, Student-t output kernel, gradient descent
/// with momentum and gains. Deterministic given the seed. `meta` supplies
/// ids and labels (coordinates are overwritten). Throws TooFewSamples below
/// 10 rows and LengthMismatch if meta disagrees in length.
EmbeddingPlot embed_features(const Matrix<double>& features, std::vector<EmbeddingPoint> meta,
                             const TsneConfig& config = {});

/// Scatter plot PNG plus `<stem>.coords` with one
/// `id x y label attribute perturbed` line per point. Marker colour encodes
/// (label, attribute); perturbed points are drawn hollow.
void write_embedding(const std::filesystem::path& stem, const EmbeddingPlot& plot, int size = 512);

struct ComparisonColumn {
  std::string name;
  std::vector<Image> images;
  std::vector<Heatmap> heatmaps;  // empty, or one per image
};

struct GridLayout {
  int rows = 0;
  int cols = 0;
  int cell = 0;  // pixel side of one tile
};

/// Writes a PNG grid: one row per sample, one column per condition, with
/// the heatmap alpha-blended over each tile. Throws EmptyInput and
/// LengthMismatch.
GridLayout render_comparison(const std::filesystem::path& path,
                             std::span<const ComparisonColumn> columns, int scale = 4);

}  // namespace faap
