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

#include "faap/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "faap/image_io.hpp"

namespace faap {

namespace {

namespace fs = std::filesystem;

// Independent stream per (seed, stream, index); generation order never
// affects a sample's content.
std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

float quantize(double v) {
  const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<float>(q) / 255.0f;
}

// Cell counts proportional to `table` that sum to n (largest remainder).
std::array<int, 4> stratify(const std::array<double, 4>& table, int n) {
  std::array<int, 4> counts{};
  std::array<double, 4> rema{};
  int assigned = 0;
  for (int i = 0; i < 4; ++i) {
    const double exact = table[i] * n;
    counts[i] = static_cast<int>(std::floor(exact));
    rema[i] = exact - counts[i];
    assigned += counts[i];
  }
  while (assigned < n) {
    const int best = static_cast<int>(std::max_element(rema.begin(), rema.end()) - rema.begin());
    counts[best] += 1;
    rema[best] = -1.0;
    ++assigned;
  }
  return counts;
}

constexpr std::array<std::pair<int, int>, 4> kCells = {{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

DatasetSplit generate_split(SplitName name, const BiasSpec& spec,
                            const std::array<double, 4>& table, int count, int image_size,
                            std::uint64_t seed, std::uint64_t stream, const std::string& prefix) {
  DatasetSplit split;
  split.name = name;
  split.seed = seed;
  const auto counts = stratify(table, count);
  std::vector<int> cells;
  for (int c = 0; c < 4; ++c) cells.insert(cells.end(), counts[c], c);
  auto order_rng = keyed_rng(seed, stream, 0xffffffffULL);
  std::shuffle(cells.begin(), cells.end(), order_rng);
  split.samples.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto rng = keyed_rng(seed, stream, i);
    LabeledSample s;
    char name_buf[64];
    std::snprintf(name_buf, sizeof(name_buf), "%s_%05zu.png", prefix.c_str(), i);
    s.id = name_buf;
    s.y = kCells[cells[i]].first;
    s.z = kCells[cells[i]].second;
    s.image = render_planted_bias_image(spec, image_size, s.y, s.z, rng());
    split.samples.push_back(std::move(s));
  }
  return split;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string to_string(SplitName name) {
  switch (name) {
    case SplitName::kDeployedTrain: return "deployed_train";
    case SplitName::kFaapTrain: return "faap_train";
    case SplitName::kValidation: return "validation";
    case SplitName::kTest: return "test";
  }
  return "unknown";
}

Tensor<float> DatasetSplit::images(std::span<const std::size_t> indices) const {
  if (samples.empty()) throw Error(ErrorCode::kEmptySplit, to_string(name) + " is empty");
  const Shape s = shape();
  Tensor<float> batch(static_cast<int>(indices.size()), s);
  const int plane = s.plane();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Image& img = samples[indices[b]].image;
    if (img.shape != s) throw Error(ErrorCode::kShapeMismatch, "non-uniform image sizes");
    for (int c = 0; c < s.channels; ++c) {
      batch.data.col(c).segment(static_cast<Eigen::Index>(b) * plane, plane) =
          Eigen::Map<const Eigen::VectorXf>(img.pixels.data() + c * plane, plane);
    }
  }
  return batch;
}

Tensor<float> DatasetSplit::images() const {
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), 0);
  return images(all);
}

std::vector<int> DatasetSplit::targets() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.y);
  return out;
}

std::vector<int> DatasetSplit::protected_attributes() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.z);
  return out;
}

DatasetSplit& DatasetBundle::split(SplitName name) {
  switch (name) {
    case SplitName::kDeployedTrain: return deployed_train;
    case SplitName::kFaapTrain: return faap_train;
    case SplitName::kValidation: return validation;
    case SplitName::kTest: return test;
  }
  return test;
}

const DatasetSplit& DatasetBundle::split(SplitName name) const {
  return const_cast<DatasetBundle*>(this)->split(name);
}

std::size_t DatasetBundle::total_size() const {
  return deployed_train.size() + faap_train.size() + validation.size() + test.size();
}

Image image_from_tensor(const Tensor<float>& batch, int n) {
  Image img(batch.shape());
  const int plane = batch.plane();
  for (int c = 0; c < batch.channels(); ++c) {
    Eigen::Map<Eigen::VectorXf>(img.pixels.data() + c * plane, plane) =
        batch.data.col(c).segment(static_cast<Eigen::Index>(n) * plane, plane);
  }
  return img;
}

Tensor<float> tensor_from_images(std::span<const Image> images) {
  if (images.empty()) throw Error(ErrorCode::kEmptyInput, "no images");
  DatasetSplit tmp;
  for (const auto& img : images) tmp.samples.push_back({"", img, 1, 1});
  return tmp.images();
}

double label_correlation(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::kLengthMismatch, "correlation needs aligned, non-empty inputs");
  }
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

std::array<double, 4> BiasSpec::joint_table() const {
  const double a = positive_rate;
  const double b = group_rate;
  const double p11 = a * b + correlation * std::sqrt(a * (1 - a) * b * (1 - b));
  return {p11, a - p11, b - p11, 1.0 - a - b + p11};
}

void BiasSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidSpec, what); };
  if (correlation < -1.0 || correlation > 1.0) fail("correlation must lie in [-1,1]");
  if (positive_rate <= 0.0 || positive_rate >= 1.0) fail("positive_rate must lie in (0,1)");
  if (group_rate <= 0.0 || group_rate >= 1.0) fail("group_rate must lie in (0,1)");
  if (n < 4) fail("n must be at least 4");
  if (cue_strength < 0.0) fail("cue_strength must be non-negative");
  if (label_cue_contrast < 0.0 || pixel_noise < 0.0) fail("contrast and noise must be >= 0");
  if (cue_free_fraction < 0.0 || cue_free_fraction >= 1.0) fail("cue_free_fraction must lie in [0,1)");
  if (validation_fraction < 0.0 || test_fraction <= 0.0) fail("split fractions out of range");
  for (double p : joint_table()) {
    if (p < -1e-12) fail("requested (y, z) joint distribution has a negative cell");
  }
}

Box label_cue_box(int size) {
  const int y0 = size * 9 / 16;
  const int x0 = size * 5 / 16;
  const int extent = std::max(2, size * 3 / 8);
  return {y0, std::min(size, y0 + extent), x0, std::min(size, x0 + extent)};
}

Box protected_cue_box(int size) { return {0, std::max(1, size * 5 / 16), 0, size}; }

Image render_planted_bias_image(const BiasSpec& spec, int size, int y, int z,
                                std::uint64_t sample_seed) {
  std::mt19937_64 rng(sample_seed);
  Image img(Shape{3, size, size});
  const double base = 0.4 + 0.2 * uniform01(rng);
  // A cue-free sample carries no label evidence at all; the rest have a
  // contrast in [c/4, c].
  const double u = uniform01(rng);
  const double q = spec.cue_free_fraction;
  const double contrast =
      u < q ? 0.0 : spec.label_cue_contrast * (0.25 + 0.75 * (u - q) / (1.0 - q));
  const Box label_box = label_cue_box(size);
  const Box tint_box = protected_cue_box(size);
  const int half_period = std::max(1, size / 16);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < size; ++r) {
      for (int col = 0; col < size; ++col) {
        double v = base + spec.pixel_noise * (2.0 * uniform01(rng) - 1.0);
        if (tint_box.contains(r, col)) {
          if (c == 0) v += z * spec.cue_strength;
          if (c == 2) v -= z * spec.cue_strength;
        }
        if (label_box.contains(r, col)) {
          const int phase = y > 0 ? (r - label_box.y0) : (col - label_box.x0);
          v += ((phase / half_period) % 2 == 0 ? contrast : -contrast);
        }
        img.at(c, r, col) = quantize(v);
      }
    }
  }
  return img;
}

DatasetBundle generate_planted_bias_dataset(const BiasSpec& spec, int image_size,
                                            std::uint64_t seed) {
  spec.validate();
  if (image_size < 8) throw Error(ErrorCode::kInvalidSpec, "image_size must be at least 8");
  const auto biased = spec.joint_table();
  BiasSpec balanced = spec;
  balanced.correlation = 0.0;
  balanced.positive_rate = 0.5;
  balanced.group_rate = 0.5;
  const auto unbiased = balanced.joint_table();

  const int half = spec.n / 2;
  const int n_val = static_cast<int>(std::lround(spec.n * spec.validation_fraction));
  const int n_test = static_cast<int>(std::lround(spec.n * spec.test_fraction));

  DatasetBundle bundle;
  bundle.deployed_train = generate_split(SplitName::kDeployedTrain, spec, biased, half,
                                         image_size, seed, 1, "deploy");
  bundle.faap_train = generate_split(SplitName::kFaapTrain, spec, biased, spec.n - half,
                                     image_size, seed, 2, "faap");
  bundle.validation =
      generate_split(SplitName::kValidation, spec, biased, n_val, image_size, seed, 3, "val");
  bundle.test =
      generate_split(SplitName::kTest, spec, unbiased, n_test, image_size, seed, 4, "test");

  std::ostringstream key;
  key.precision(17);
  key << spec.correlation << ' ' << spec.positive_rate << ' ' << spec.group_rate << ' ' << spec.n
      << ' ' << spec.cue_strength << ' ' << spec.label_cue_contrast << ' ' << spec.pixel_noise
      << ' ' << spec.cue_free_fraction << ' ' << spec.validation_fraction << ' ' << spec.test_fraction << ' ' << image_size << ' '
      << seed;
  const std::string k = key.str();
  bundle.id = "synthetic-" + hex64(fnv1a(k.data(), k.size()));
  return bundle;
}

DatasetSplit flip_labels(const DatasetSplit& split, double flip_rate, std::uint64_t seed) {
  if (flip_rate < 0.0 || flip_rate > 1.0) {
    throw Error(ErrorCode::kInvalidSpec, "flip_rate must lie in [0,1]");
  }
  DatasetSplit out = split;
  if (split.empty()) return out;
  const std::vector<int> ys = split.targets();
  const std::vector<int> zs = split.protected_attributes();
  const int majority = label_correlation(ys, zs) >= 0.0 ? 1 : -1;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    auto& s = out.samples[i];
    if (s.y * s.z == majority) continue;
    auto rng = keyed_rng(seed, 7, i);
    if (uniform01(rng) < flip_rate) s.y = -s.y;
  }
  return out;
}

// --- Corpus layout --------------------------------------------------------

namespace {

struct AttributeTable {
  std::vector<std::string> names;
  std::vector<std::string> files;
  std::vector<std::vector<int>> values;
};

fs::path first_existing(const fs::path& root, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (fs::exists(root / n)) return root / n;
  }
  return {};
}

AttributeTable read_attribute_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "cannot open " + path.string());
  AttributeTable table;
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
  }
  std::size_t cursor = 0;
  auto tokens = [](const std::string& l) {
    std::istringstream ss(l);
    std::vector<std::string> out;
    std::string t;
    while (ss >> t) out.push_back(t);
    return out;
  };
  if (cursor < lines.size()) {
    auto first = tokens(lines[cursor]);
    if (first.size() == 1 && std::all_of(first[0].begin(), first[0].end(), ::isdigit)) ++cursor;
  }
  if (cursor >= lines.size()) {
    throw Error(ErrorCode::kInvalidSpec, "attribute table " + path.string() + " has no header");
  }
  table.names = tokens(lines[cursor++]);
  for (; cursor < lines.size(); ++cursor) {
    auto row = tokens(lines[cursor]);
    if (row.size() != table.names.size() + 1) {
      throw Error(ErrorCode::kInvalidSpec, "malformed attribute row: " + lines[cursor]);
    }
    std::vector<int> vals;
    for (std::size_t j = 1; j < row.size(); ++j) {
      const int v = std::stoi(row[j]);
      if (v != 1 && v != -1) {
        throw Error(ErrorCode::kInvalidSpec, "attribute values must be -1 or 1: " + lines[cursor]);
      }
      vals.push_back(v);
    }
    table.files.push_back(row[0]);
    table.values.push_back(std::move(vals));
  }
  return table;
}

std::size_t attribute_column(const AttributeTable& table, const std::string& name) {
  auto it = std::find(table.names.begin(), table.names.end(), name);
  if (it == table.names.end()) {
    throw Error(ErrorCode::kMissingAttribute, "attribute '" + name + "' not in table");
  }
  return static_cast<std::size_t>(it - table.names.begin());
}

}  // namespace

DatasetBundle load_attribute_corpus(const fs::path& root, const std::string& target_attr,
                                    const std::string& protected_attr, int image_size,
                                    std::uint64_t seed) {
  const fs::path table_path = first_existing(root, {"attributes.txt", "list_attr_celeba.txt"});
  if (table_path.empty()) {
    throw Error(ErrorCode::kMissingArtifact, "no attribute table under " + root.string());
  }
  const fs::path image_dir = first_existing(root, {"images", "img_align_celeba"});
  if (image_dir.empty()) {
    throw Error(ErrorCode::kMissingArtifact, "no image directory under " + root.string());
  }
  const AttributeTable table = read_attribute_table(table_path);
  const std::size_t y_col = attribute_column(table, target_attr);
  const std::size_t z_col = attribute_column(table, protected_attr);
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < table.files.size(); ++i) row_of[table.files[i]] = i;

  std::map<SplitName, std::vector<std::size_t>> assignment;
  const fs::path split_dir = root / "splits";
  if (fs::is_directory(split_dir)) {
    for (SplitName name : kAllSplits) {
      const fs::path index = split_dir / (to_string(name) + ".txt");
      std::ifstream in(index);
      if (!in) throw Error(ErrorCode::kMissingArtifact, "missing split index " + index.string());
      std::string file;
      while (std::getline(in, file)) {
        if (!file.empty() && file.back() == '\r') file.pop_back();
        if (file.empty()) continue;
        auto it = row_of.find(file);
        if (it == row_of.end()) {
          throw Error(ErrorCode::kMissingArtifact, file + " listed in " + index.string() +
                                                        " but absent from the attribute table");
        }
        assignment[name].push_back(it->second);
      }
    }
  } else {
    std::vector<std::size_t> order(table.files.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n = order.size();
    const std::size_t n_test = n / 10;
    const std::size_t n_val = n / 10;
    const std::size_t n_rest = n - n_test - n_val;
    const std::size_t n_deploy = n_rest / 2;
    auto take = [&](std::size_t from, std::size_t count) {
      return std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(from),
                                      order.begin() + static_cast<std::ptrdiff_t>(from + count));
    };
    assignment[SplitName::kDeployedTrain] = take(0, n_deploy);
    assignment[SplitName::kFaapTrain] = take(n_deploy, n_rest - n_deploy);
    assignment[SplitName::kValidation] = take(n_rest, n_val);
    assignment[SplitName::kTest] = take(n_rest + n_val, n_test);
  }

  DatasetBundle bundle;
  bundle.id = "corpus-" + root.filename().string();
  for (SplitName name : kAllSplits) {
    DatasetSplit& split = bundle.split(name);
    split.name = name;
    split.seed = seed;
    for (std::size_t row : assignment[name]) {
      LabeledSample s;
      s.id = table.files[row];
      s.y = table.values[row][y_col];
      s.z = table.values[row][z_col];
      s.image = read_image(image_dir / s.id, image_size);
      split.samples.push_back(std::move(s));
    }
    if (split.empty()) throw Error(ErrorCode::kEmptySplit, to_string(name) + " split is empty");
  }
  return bundle;
}

void save_dataset(const DatasetBundle& bundle, const fs::path& root,
                  const std::string& target_attr, const std::string& protected_attr) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "splits");
  std::ofstream table(root / "attributes.txt");
  if (!table) throw Error(ErrorCode::kIoError, "cannot write " + (root / "attributes.txt").string());
  table << bundle.total_size() << '\n' << target_attr << ' ' << protected_attr << '\n';
  for (SplitName name : kAllSplits) {
    const DatasetSplit& split = bundle.split(name);
    std::ofstream index(root / "splits" / (to_string(name) + ".txt"));
    for (const auto& s : split.samples) {
      write_image(root / "images" / s.id, s.image);
      table << s.id << ' ' << s.y << ' ' << s.z << '\n';
      index << s.id << '\n';
    }
  }
}

}  // namespace faap
