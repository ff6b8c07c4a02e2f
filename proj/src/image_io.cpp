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

#include "faap/image_io.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace faap {

namespace {

// OpenCV stores interleaved BGR; Image is planar RGB.
Image from_mat(const cv::Mat& mat) {
  cv::Mat src = mat;
  if (src.channels() == 1) cv::cvtColor(mat, src, cv::COLOR_GRAY2BGR);
  if (src.channels() == 4) cv::cvtColor(mat, src, cv::COLOR_BGRA2BGR);
  double scale = 1.0;
  switch (src.depth()) {
    case CV_8U: scale = 255.0; break;
    case CV_16U: scale = 65535.0; break;
    case CV_32F: scale = 1.0; break;
    default:
      throw Error(ErrorCode::kCorruptImage, "unsupported pixel depth");
  }
  cv::Mat f;
  src.convertTo(f, CV_32F);
  Image image(Shape{3, f.rows, f.cols});
  for (int y = 0; y < f.rows; ++y) {
    const auto* row = f.ptr<cv::Vec3f>(y);
    for (int x = 0; x < f.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        // Division (not multiplication by a reciprocal) keeps k/255 exact.
        image.at(c, y, x) = std::clamp(row[x][2 - c] / static_cast<float>(scale), 0.0f, 1.0f);
      }
    }
  }
  return image;
}

cv::Mat to_mat(const Image& image, int depth) {
  if (image.shape.channels != 3 && image.shape.channels != 1) {
    throw Error(ErrorCode::kShapeMismatch, "only 1- or 3-channel images can be encoded");
  }
  const double scale = depth == CV_16U ? 65535.0 : 255.0;
  cv::Mat mat(image.shape.height, image.shape.width, CV_MAKETYPE(depth, 3));
  for (int y = 0; y < image.shape.height; ++y) {
    for (int x = 0; x < image.shape.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int src_c = image.shape.channels == 1 ? 0 : c;
        const double v = std::round(std::clamp(image.at(src_c, y, x), 0.0f, 1.0f) * scale);
        if (depth == CV_16U) {
          mat.at<cv::Vec3w>(y, x)[2 - c] = static_cast<std::uint16_t>(v);
        } else {
          mat.at<cv::Vec3b>(y, x)[2 - c] = static_cast<std::uint8_t>(v);
        }
      }
    }
  }
  return mat;
}

}  // namespace

Image read_image(const std::filesystem::path& path, int size) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_COLOR);
  if (mat.empty()) throw Error(ErrorCode::kCorruptImage, "cannot decode " + path.string());
  Image image = from_mat(mat);
  return size > 0 ? resize_image(image, size) : image;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), to_mat(image, CV_8U))) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  }
}

std::vector<std::uint8_t> encode_image(const Image& image, ImageEncoding encoding) {
  std::vector<std::uint8_t> bytes;
  const bool ok = encoding == ImageEncoding::kPpm16
                      ? cv::imencode(".ppm", to_mat(image, CV_16U), bytes)
                      : cv::imencode(".png", to_mat(image, CV_8U), bytes);
  if (!ok) throw Error(ErrorCode::kIoError, "image encoding failed");
  return bytes;
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorCode::kCorruptImage, "empty image payload");
  const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8U,
                       const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat mat = cv::imdecode(buffer, cv::IMREAD_ANYDEPTH | cv::IMREAD_COLOR);
  if (mat.empty()) throw Error(ErrorCode::kCorruptImage, "cannot decode image payload");
  return from_mat(mat);
}

Image resize_image(const Image& image, int size) {
  if (image.shape.height == size && image.shape.width == size) return image;
  Image out(Shape{image.shape.channels, size, size});
  const int plane_in = image.shape.plane();
  for (int c = 0; c < image.shape.channels; ++c) {
    const cv::Mat src(image.shape.height, image.shape.width, CV_32F,
                      const_cast<float*>(image.pixels.data() + c * plane_in));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(size, size), 0, 0, cv::INTER_AREA);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) out.at(c, y, x) = std::clamp(dst.at<float>(y, x), 0.0f, 1.0f);
    }
  }
  return out;
}

}  // namespace faap
