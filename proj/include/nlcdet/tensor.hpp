// Copyright (c) 2026 The nlcdet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace nlcdet {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Dense C x H x W grid, channel-major (each channel is a row-major H x W
// plane).
class Tensor2D {
 public:
  Tensor2D() = default;
  // Throws Error(kShapeError) if any extent is zero.
  Tensor2D(std::size_t channels, std::size_t height, std::size_t width);

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t c, std::size_t r, std::size_t col) {
    return data_[(c * height_ + r) * width_ + col];
  }
  double at(std::size_t c, std::size_t r, std::size_t col) const {
    return data_[(c * height_ + r) * width_ + col];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // C x (H*W) view: one row per channel.
  MatrixMap matrix() {
    return MatrixMap(data_.data(), static_cast<Eigen::Index>(channels_),
                     static_cast<Eigen::Index>(pixels()));
  }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(channels_),
                          static_cast<Eigen::Index>(pixels()));
  }

  bool SameShape(const Tensor2D& other) const {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }
  bool operator==(const Tensor2D&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

// N x C per-point features, row-major. N may be zero.
class PointFeatures {
 public:
  PointFeatures() = default;
  // Throws Error(kShapeError) if channels is zero.
  PointFeatures(std::size_t count, std::size_t channels);

  std::size_t count() const { return count_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t i, std::size_t c) { return data_[i * channels_ + c]; }
  double at(std::size_t i, std::size_t c) const {
    return data_[i * channels_ + c];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  MatrixMap matrix() {
    return MatrixMap(data_.data(), static_cast<Eigen::Index>(count_),
                     static_cast<Eigen::Index>(channels_));
  }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(count_),
                          static_cast<Eigen::Index>(channels_));
  }

  bool SameShape(const PointFeatures& other) const {
    return count_ == other.count_ && channels_ == other.channels_;
  }
  bool operator==(const PointFeatures&) const = default;

 private:
  std::size_t count_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

// Continuous image-plane location of a point, in pixels. Pixel (r, c) covers
// [c, c + 1) x [r, r + 1); its center is (c + 0.5, r + 0.5).
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

using ProjectedCoords = std::vector<PixelCoord>;

}  // namespace nlcdet
