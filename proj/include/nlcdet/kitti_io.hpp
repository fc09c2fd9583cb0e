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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nlcdet/geometry.hpp"

namespace nlcdet::kitti {

using Mat34 = Eigen::Matrix<double, 3, 4>;

struct Calib {
  Mat34 p2;
  Mat3 r0_rect;
  Mat34 tr_velo_to_cam;

  bool operator==(const Calib&) const = default;
};

struct Label {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox2d{};  // left, top, right, bottom (px)
  double height = 0.0;
  double width = 0.0;
  double length = 0.0;
  Vec3 location = Vec3::Zero();  // bottom center, rectified camera frame
  double rotation_y = 0.0;
  std::optional<double> score;  // present in detection files only

  bool IsDontCare() const { return type == "DontCare"; }
  bool operator==(const Label&) const = default;
};

// Throws Error(kMissingField) naming the key, Error(kMalformedMatrix) for the
// wrong number of values, Error(kParseError) with line/column otherwise.
Calib ParseCalib(std::string_view text);
std::string EmitCalib(const Calib& calib);

// One label per non-empty line; 15 fields, or 16 with a trailing score.
// Throws Error(kParseError) with the offending line number.
std::vector<Label> ParseLabels(std::string_view text);
std::string EmitLabels(std::span<const Label> labels);

// Little-endian float32 quadruples (x, y, z, reflectance). Throws
// Error(kTruncatedFile) when the length is not a multiple of 16 and
// Error(kParseError) for non-finite coordinates.
PointCloud ReadVelodyne(std::span<const std::uint8_t> bytes);
// Values are narrowed to float32.
std::vector<std::uint8_t> WriteVelodyne(const PointCloud& cloud);

// LiDAR-to-image calibration K [R | T] equivalent to P2 * R0_rect * Tr.
// The rotation is snapped to the nearest proper rotation. Throws
// Error(kDegenerateCalib) when the composition is singular.
Calibration ToCalibration(const Calib& calib);

// Camera bottom-center label to LiDAR box: the center is lifted by h / 2
// along camera -y, mapped through (R0_rect * Tr)^-1, and yaw is
// -rotation_y - pi / 2. Throws Error(kInvalidArgument) for DontCare and
// Error(kDegenerateCalib) for a singular rectified transform.
Box3D LabelToLidarBox(const Label& label, const Calib& calib);

// Inverse of LabelToLidarBox for geometry fields; the rest are defaulted
// (alpha and bbox2d are not derivable without an image model).
Label LidarBoxToLabel(const Box3D& box, const Calib& calib,
                      const std::string& type);

struct DetectionRange {
  double x_min = 0.0, x_max = 70.4;
  double y_min = -40.0, y_max = 40.0;
  double z_min = -3.0, z_max = 1.0;
};

// Keeps points inside the closed range, preserving order.
PointCloud FilterDetectionRange(const PointCloud& cloud,
                                const DetectionRange& range = {});

enum class SamplingStrategy { kRandom, kFarthestPoint };

// Reduces the cloud to at most `budget` points. Random sampling draws
// without replacement and keeps the original relative order; farthest-point
// sampling starts from point 0. Clouds within budget are returned unchanged.
PointCloud DownsamplePoints(const PointCloud& cloud, std::size_t budget,
                            std::uint64_t seed,
                            SamplingStrategy strategy = SamplingStrategy::kRandom);

inline constexpr std::size_t kTrainingPointBudget = 16384;

}  // namespace nlcdet::kitti
