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

#include "faap/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "faap/ops.hpp"

namespace faap {

namespace {

cv::Mat to_bgr8(const Image& image) {
  cv::Mat mat(image.shape.height, image.shape.width, CV_8UC3);
  for (int y = 0; y < image.shape.height; ++y) {
    for (int x = 0; x < image.shape.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int src = image.shape.channels == 3 ? c : 0;
        const float v = std::clamp(image.at(src, y, x), 0.0f, 1.0f);
        mat.at<cv::Vec3b>(y, x)[2 - c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return mat;
}

cv::Mat to_mat(const Matrix<double>& m) {
  cv::Mat out(static_cast<int>(m.rows()), static_cast<int>(m.cols()), CV_64F);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) out.at<double>(r, c) = m(r, c);
  }
  return out;
}

Matrix<double> from_mat(const cv::Mat& mat) {
  Matrix<double> m(mat.rows, mat.cols);
  for (int r = 0; r < mat.rows; ++r) {
    for (int c = 0; c < mat.cols; ++c) m(r, c) = mat.at<double>(r, c);
  }
  return m;
}

void write_png(const std::filesystem::path& path, const cv::Mat& mat) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<std::uint8_t> bytes;
  cv::imencode(".png", mat, bytes);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Squared Euclidean distances between rows.
Matrix<double> squared_distances(const Matrix<double>& x) {
  const Vector<double> sq = x.rowwise().squaredNorm();
  Matrix<double> d = (-2.0 * x * x.transpose()).colwise() + sq;
  d.rowwise() += sq.transpose();
  return d.cwiseMax(0.0);
}

// Row-conditional Gaussian affinities whose entropy matches log(perplexity).
Matrix<double> conditional_affinities(const Matrix<double>& dist, double perplexity) {
  const Eigen::Index n = dist.rows();
  const double target = std::log(perplexity);
  Matrix<double> p = Matrix<double>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    Vector<double> row(n);
    for (int step = 0; step < 100; ++step) {
      double sum = 0.0;
      double weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * dist(i, j));
        sum += row[j];
        weighted += row[j] * dist(i, j);
      }
      sum = std::max(sum, std::numeric_limits<double>::min());
      const double entropy = std::log(sum) + beta * weighted / sum;
      row /= sum;
      if (std::abs(entropy - target) < 1e-5) break;
      if (entropy > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    p.row(i) = row.transpose();
  }
  return p;
}

cv::Scalar marker_colour(int label, int attribute) {
  if (label > 0) return attribute > 0 ? cv::Scalar(40, 40, 220) : cv::Scalar(220, 120, 30);
  return attribute > 0 ? cv::Scalar(30, 160, 240) : cv::Scalar(60, 170, 60);
}

}  // namespace

double Heatmap::mass_in(const Box& box) const {
  const double total = overlay.sum();
  if (degenerate || total <= 0.0) return 0.0;
  double inside = 0.0;
  for (Eigen::Index y = 0; y < overlay.rows(); ++y) {
    for (Eigen::Index x = 0; x < overlay.cols(); ++x) {
      if (box.contains(static_cast<int>(y), static_cast<int>(x))) inside += overlay(y, x);
    }
  }
  return inside / total;
}

template <typename Scalar>
Heatmap grad_cam(const DeployedModel<Scalar>& model, const Image& image, int label) {
  if (label != 1 && label != -1) {
    throw Error(ErrorCode::kInvalidRecord, "class label must be -1 or +1");
  }
  const Image one[] = {image};
  const Tensor<Scalar> x = tensor_from_images(one).template cast<Scalar>();
  const Tensor<Scalar> features = model.extract_features(x);

  NetworkCache<Scalar> cache;
  const Tensor<Scalar> scores = model.predictor().forward(features, &cache);
  Tensor<Scalar> seed(1, {scores.channels(), 1, 1});
  seed.data(0, class_index(label)) = Scalar(1);
  const Tensor<Scalar> grad = model.predictor().backward(cache, seed, nullptr);

  const Vector<double> weights = grad.data.template cast<double>().colwise().mean().transpose();
  const Vector<double> cam =
      (features.data.template cast<double>() * weights).cwiseMax(0.0);

  Heatmap map;
  map.grid = Matrix<double>::Zero(features.height, features.width);
  map.overlay = Matrix<double>::Zero(image.shape.height, image.shape.width);
  const double hi = cam.maxCoeff();
  const double lo = cam.minCoeff();
  if (!(hi > 0.0) || hi - lo <= 1e-12 * hi) {
    map.degenerate = true;
    return map;
  }
  for (int y = 0; y < features.height; ++y) {
    for (int xx = 0; xx < features.width; ++xx) {
      map.grid(y, xx) = (cam[y * features.width + xx] - lo) / (hi - lo);
    }
  }
  cv::Mat up;
  cv::resize(to_mat(map.grid), up, cv::Size(image.shape.width, image.shape.height), 0, 0,
             cv::INTER_LINEAR);
  map.overlay = from_mat(up).cwiseMax(0.0).cwiseMin(1.0);
  return map;
}

template Heatmap grad_cam<float>(const DeployedModel<float>&, const Image&, int);
template Heatmap grad_cam<double>(const DeployedModel<double>&, const Image&, int);

Matrix<double> pooled_features(const Tensor<float>& features) {
  Matrix<double> out(features.batch, features.channels());
  for (int n = 0; n < features.batch; ++n) {
    out.row(n) = features.sample(n).template cast<double>().colwise().mean();
  }
  return out;
}

EmbeddingPlot embed_features(const Matrix<double>& features, std::vector<EmbeddingPoint> meta,
                             const TsneConfig& config) {
  const Eigen::Index n = features.rows();
  if (n < 10) {
    throw Error(ErrorCode::kTooFewSamples,
                "embedding needs at least 10 samples, got " + std::to_string(n));
  }
  if (static_cast<Eigen::Index>(meta.size()) != n) {
    throw Error(ErrorCode::kLengthMismatch, "embedding metadata disagrees with feature rows");
  }
  const double perplexity = std::min(config.perplexity, (static_cast<double>(n) - 1.0) / 3.0);

  Matrix<double> p = conditional_affinities(squared_distances(features), perplexity);
  p = (p + p.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1e-4);
  Matrix<double> y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i, 0) = normal(rng);
    y(i, 1) = normal(rng);
  }
  const double learning_rate =
      config.learning_rate > 0.0
          ? config.learning_rate
          : static_cast<double>(n) / (4.0 * config.early_exaggeration);
  Matrix<double> velocity = Matrix<double>::Zero(n, 2);
  Matrix<double> gains = Matrix<double>::Ones(n, 2);

  for (int it = 0; it < config.iterations; ++it) {
    const double exaggeration = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum = it < config.exaggeration_iterations ? 0.5 : 0.8;

    Matrix<double> num = (1.0 + squared_distances(y).array()).inverse().matrix();
    num.diagonal().setZero();
    const double z = std::max(num.sum(), std::numeric_limits<double>::min());
    // Coefficients (exaggeration * p - q) * num; gradient of KL is 4 * (diag(rowsum) - W) y.
    const Matrix<double> w = ((exaggeration * p).array() - num.array() / z).matrix().cwiseProduct(num);
    const Matrix<double> grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);

    for (Eigen::Index i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) {
        const bool same = (grad(i, d) > 0.0) == (velocity(i, d) > 0.0);
        gains(i, d) = std::max(same ? gains(i, d) * 0.8 : gains(i, d) + 0.2, 0.01);
      }
    }
    velocity = momentum * velocity - learning_rate * gains.cwiseProduct(grad);
    y += velocity;
    y.rowwise() -= y.colwise().mean();
  }

  EmbeddingPlot plot{std::move(meta)};
  for (Eigen::Index i = 0; i < n; ++i) {
    plot.points[i].x = y(i, 0);
    plot.points[i].y = y(i, 1);
  }
  return plot;
}

void write_embedding(const std::filesystem::path& stem, const EmbeddingPlot& plot, int size) {
  if (plot.points.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to plot");
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());

  double x0 = plot.points.front().x, x1 = x0, y0 = plot.points.front().y, y1 = y0;
  for (const auto& pt : plot.points) {
    x0 = std::min(x0, pt.x);
    x1 = std::max(x1, pt.x);
    y0 = std::min(y0, pt.y);
    y1 = std::max(y1, pt.y);
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-12});
  const double margin = 12.0;
  const double scale = (size - 2.0 * margin) / span;

  cv::Mat canvas(size, size, CV_8UC3, cv::Scalar(255, 255, 255));
  for (const auto& pt : plot.points) {
    const cv::Point centre(static_cast<int>(std::lround(margin + (pt.x - x0) * scale)),
                           static_cast<int>(std::lround(margin + (y1 - pt.y) * scale)));
    cv::circle(canvas, centre, 3, marker_colour(pt.label, pt.attribute), pt.perturbed ? 1 : -1,
               cv::LINE_8);
  }
  write_png(stem.string() + ".png", canvas);

  std::ofstream out(stem.string() + ".coords", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + stem.string() + ".coords");
  out << "# id x y label attribute perturbed\n";
  char line[160];
  for (const auto& pt : plot.points) {
    std::snprintf(line, sizeof line, " %.6f %.6f %d %d %d\n", pt.x, pt.y, pt.label, pt.attribute,
                  pt.perturbed ? 1 : 0);
    out << pt.id << line;
  }
}

GridLayout render_comparison(const std::filesystem::path& path,
                             std::span<const ComparisonColumn> columns, int scale) {
  if (columns.empty() || columns.front().images.empty()) {
    throw Error(ErrorCode::kEmptyInput, "comparison grid needs at least one image");
  }
  const std::size_t rows = columns.front().images.size();
  const Shape shape = columns.front().images.front().shape;
  for (const auto& col : columns) {
    if (col.images.size() != rows || (!col.heatmaps.empty() && col.heatmaps.size() != rows)) {
      throw Error(ErrorCode::kLengthMismatch, "column '" + col.name + "' has a different length");
    }
    for (const auto& img : col.images) {
      if (img.shape != shape) throw Error(ErrorCode::kShapeMismatch, "grid images differ in shape");
    }
  }

  GridLayout layout{static_cast<int>(rows), static_cast<int>(columns.size()),
                    std::max(shape.height, shape.width) * std::max(scale, 1)};
  const int header = 14;
  cv::Mat canvas(header + layout.rows * layout.cell, layout.cols * layout.cell, CV_8UC3,
                 cv::Scalar(255, 255, 255));
  for (int c = 0; c < layout.cols; ++c) {
    const ComparisonColumn& col = columns[c];
    cv::putText(canvas, col.name, cv::Point(c * layout.cell + 2, header - 3),
                cv::FONT_HERSHEY_PLAIN, 0.8, cv::Scalar(0, 0, 0), 1, cv::LINE_8);
    for (int r = 0; r < layout.rows; ++r) {
      cv::Mat tile;
      cv::resize(to_bgr8(col.images[r]), tile, cv::Size(layout.cell, layout.cell), 0, 0,
                 cv::INTER_NEAREST);
      if (!col.heatmaps.empty()) {
        cv::Mat heat8;
        to_mat(col.heatmaps[r].overlay).convertTo(heat8, CV_8U, 255.0);
        cv::Mat colour;
        cv::applyColorMap(heat8, colour, cv::COLORMAP_JET);
        cv::resize(colour, colour, tile.size(), 0, 0, cv::INTER_NEAREST);
        cv::addWeighted(tile, 0.5, colour, 0.5, 0.0, tile);
      }
      tile.copyTo(canvas(cv::Rect(c * layout.cell, header + r * layout.cell, layout.cell,
                                  layout.cell)));
    }
  }
  write_png(path, canvas);
  return layout;
}

}  // namespace faap
