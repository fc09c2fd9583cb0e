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
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace nlcdet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Wraps an angle into (-pi, pi].
double NormalizeAngle(double radians);

// 7-DOF oriented box in the LiDAR frame (x forward, y left, z up).
// `yaw` is the counter-clockwise heading of the box's length axis about +z.
class Box3D {
 public:
  // Throws Error(kInvalidArgument) for non-positive or non-finite dimensions
  // or non-finite center/yaw.
  Box3D(const Vec3& center, double length, double width, double height,
        double yaw);

  const Vec3& center() const { return center_; }
  double length() const { return length_; }
  double width() const { return width_; }
  double height() const { return height_; }
  double yaw() const { return yaw_; }
  Vec3 dims() const { return {length_, width_, height_}; }
  double volume() const { return length_ * width_ * height_; }

  // Rotation taking box-frame vectors to the LiDAR frame.
  Mat3 rotation() const;

  bool operator==(const Box3D&) const = default;

 private:
  Vec3 center_;
  double length_;
  double width_;
  double height_;
  double yaw_;
};

// Pinhole camera model: image ~ K [R | T] p.
class Calibration {
 public:
  // Validates K upper-triangular with positive diagonal and R a proper
  // rotation (orthonormal, det +1) within 1e-9.
  Calibration(const Mat3& intrinsics, const Mat3& rotation,
              const Vec3& translation);

  const Mat3& K() const { return intrinsics_; }
  const Mat3& R() const { return rotation_; }
  const Vec3& T() const { return translation_; }

  static Calibration Identity();

 private:
  Mat3 intrinsics_;
  Mat3 rotation_;
  Vec3 translation_;
};

struct LidarPoint {
  Vec3 position;
  double reflectance = 0.0;

  bool operator==(const LidarPoint&) const = default;
};

struct PointCloud {
  std::vector<LidarPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool operator==(const PointCloud&) const = default;
};

struct ImageProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

// Depths at or below this are treated as behind the camera.
inline constexpr double kMinProjectionDepth = 1e-9;

// Throws Error(kBehindCamera) when the camera-frame depth is <= 1e-9.
ImageProjection ProjectPoint(const Vec3& p, const Calibration& calib);

// Non-throwing variant; returns false for points behind the camera.
bool TryProjectPoint(const Vec3& p, const Calibration& calib,
                     ImageProjection* out);

// Corner i is the LiDAR-frame image of the normalized local coordinate
// (i & 1, (i >> 1) & 1, (i >> 2) & 1). Corners 0..3 therefore form the bottom
// face, counter-clockwise when seen from above.
std::array<Vec3, 8> BoxCorners(const Box3D& box);

// Indices of points whose normalized local coordinates all lie in
// [-margin, 1 + margin]. Requires margin >= 0.
std::vector<std::size_t> PointsInBox(const PointCloud& cloud,
                                     const Box3D& box, double margin);

bool PointInBox(const Vec3& p, const Box3D& box, double margin);

// BEV rotated-polygon intersection times vertical overlap.
double IntersectionVolume(const Box3D& a, const Box3D& b);
double Iou3d(const Box3D& a, const Box3D& b);

// Record of one draw of global augmentation. Steps are applied in the order
// flip (y -> -y), rotation about +z, uniform scaling; a step that did not
// fire leaves the data untouched.
struct GlobalTransform {
  bool flipped = false;
  bool rotated = false;
  double rotation = 0.0;
  bool scaled = false;
  double scale = 1.0;

  bool IsIdentity() const { return !flipped && !rotated && !scaled; }
};

struct AugmentOptions {
  double flip_prob = 0.5;
  double rotation_prob = 0.5;
  double scale_prob = 0.5;
  std::pair<double, double> scale_range{0.95, 1.05};
  std::pair<double, double> rotation_range{-0.7853981633974483,
                                           0.7853981633974483};
};

struct AugmentResult {
  PointCloud cloud;
  std::vector<Box3D> boxes;
  GlobalTransform transform;
};

GlobalTransform SampleGlobalTransform(std::uint64_t seed,
                                      const AugmentOptions& options);

AugmentResult ApplyGlobalTransform(const PointCloud& cloud,
                                   const std::vector<Box3D>& boxes,
                                   const GlobalTransform& transform);

// Throws Error(kInvalidArgument) for ill-ordered ranges or probabilities
// outside [0, 1].
AugmentResult AugmentGlobal(const PointCloud& cloud,
                            const std::vector<Box3D>& boxes,
                            std::uint64_t seed,
                            const AugmentOptions& options = {});

}  // namespace nlcdet
