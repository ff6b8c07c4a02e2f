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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "faap/tensor.hpp"

namespace faap {

/// A CHW image with pixel values in [0,1].
struct Image {
  Shape shape;
  std::vector<float> pixels;

  Image() = default;
  explicit Image(Shape s) : shape(s), pixels(static_cast<std::size_t>(s.size()), 0.0f) {}

  float& at(int c, int y, int x) {
    return pixels[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
  float at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
  bool operator==(const Image&) const = default;
};

struct LabeledSample {
  std::string id;  // file name within the corpus image directory
  Image image;
  int y = 1;  // target label in {-1,+1}
  int z = 1;  // protected attribute in {-1,+1}
};

enum class SplitName { kDeployedTrain, kFaapTrain, kValidation, kTest };

std::string to_string(SplitName name);
inline constexpr std::array<SplitName, 4> kAllSplits = {
    SplitName::kDeployedTrain, SplitName::kFaapTrain, SplitName::kValidation, SplitName::kTest};

struct DatasetSplit {
  SplitName name = SplitName::kDeployedTrain;
  std::vector<LabeledSample> samples;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  Shape shape() const { return samples.empty() ? Shape{} : samples.front().image.shape; }

  /// Stacks the selected samples into a batch tensor.
  Tensor<float> images(std::span<const std::size_t> indices) const;
  Tensor<float> images() const;
  std::vector<int> targets() const;
  std::vector<int> protected_attributes() const;
};

/// The four splits used by the pipeline: one half of the training data for
/// the deployed model, the other half for perturbation training, plus
/// validation and test.
struct DatasetBundle {
  std::string id;
  DatasetSplit deployed_train;
  DatasetSplit faap_train;
  DatasetSplit validation;
  DatasetSplit test;

  DatasetSplit& split(SplitName name);
  const DatasetSplit& split(SplitName name) const;
  std::size_t total_size() const;
};

/// Tensor batch -> per-sample images (and back through DatasetSplit::images).
Image image_from_tensor(const Tensor<float>& batch, int n);
Tensor<float> tensor_from_images(std::span<const Image> images);

/// Pearson correlation of two {-1,+1} label vectors.
double label_correlation(std::span<const int> a, std::span<const int> b);

// --- Planted-bias synthetic data ------------------------------------------

/// Joint distribution of (y, z) plus the rendering knobs of the synthetic
/// images. The label cue is a striped patch (horizontal stripes for y=+1,
/// vertical for y=-1) in the lower centre of the image. A cue_free_fraction of
/// the samples carry no stripes at all, so a classifier can only resolve them
/// through the protected cue. The protected cue is a red/blue tint of amplitude cue_strength
/// over the top band.
struct BiasSpec {
  double correlation = 0.8;
  double positive_rate = 0.5;
  double group_rate = 0.5;
  int n = 4000;
  double cue_strength = 0.04;
  double label_cue_contrast = 0.2;
  double cue_free_fraction = 0.25;
  double pixel_noise = 0.03;
  double validation_fraction = 0.2;
  double test_fraction = 0.5;

  /// P(y, z) as {p(+1,+1), p(+1,-1), p(-1,+1), p(-1,-1)}; throws InvalidSpec
  /// when the requested table has a negative cell.
  std::array<double, 4> joint_table() const;
  void validate() const;
};

/// Pixel box (inclusive-exclusive) holding the label cue for a given size.
struct Box {
  int y0, y1, x0, x1;
  bool contains(int y, int x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
};
Box label_cue_box(int image_size);
Box protected_cue_box(int image_size);

/// Renders one synthetic image; pixels are quantised to multiples of 1/255.
Image render_planted_bias_image(const BiasSpec& spec, int image_size, int y, int z,
                                std::uint64_t sample_seed);

/// Training, FAAP and validation splits follow spec.correlation; the test
/// split is drawn with correlation 0 and balanced marginals.
DatasetBundle generate_planted_bias_dataset(const BiasSpec& spec, int image_size,
                                            std::uint64_t seed);

/// Negates y on a seeded subset of the samples whose (y, z) pair opposes the
/// split's majority correlation; each eligible sample flips with probability
/// flip_rate.
DatasetSplit flip_labels(const DatasetSplit& split, double flip_rate, std::uint64_t seed);

// --- Corpus layout --------------------------------------------------------
//
// <root>/attributes.txt (or list_attr_celeba.txt): optional first line with
// the record count, then a header of attribute names, then rows of
// `filename v1 v2 ...` with values in {-1,+1}. Images live in <root>/images
// (or <root>/img_align_celeba). Optional <root>/splits/<split>.txt index files
// list one file name per line.

/// Reads the corpus and returns the four splits. Without index files the
/// corpus is permuted with `seed`: 10% test, 10% validation and the rest
/// halved between the deployed model and perturbation training.
DatasetBundle load_attribute_corpus(const std::filesystem::path& root,
                                    const std::string& target_attr,
                                    const std::string& protected_attr, int image_size,
                                    std::uint64_t seed = 0);

/// Writes images, the attribute table and split index files.
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& root,
                  const std::string& target_attr = "Target",
                  const std::string& protected_attr = "Protected");

}  // namespace faap
