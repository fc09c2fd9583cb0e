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

#include "nlcdet/pipeline/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "nlcdet/error.hpp"
#include "nlcdet/kitti_io.hpp"
#include "nlcdet/random.hpp"

namespace nlcdet::pipeline {
namespace {

constexpr double kInset = 0.02;
constexpr double kSurfaceJitter = 0.01;
constexpr double kMaxDepth = 80.0;
constexpr int kMinSurfacePoints = 50;
constexpr int kMaxSurfacePoints = 500;
constexpr int kPlacementAttempts = 200;

bool InImage(const ImageProjection& proj, const SceneOptions& options) {
  return proj.u >= 0.0 && proj.u < options.width && proj.v >= 0.0 &&
         proj.v < options.height;
}

// Horizontal half field of view as a lateral/forward ratio, with a margin.
double LateralRatio(const SceneOptions& options) {
  return 0.8 * (0.5 * options.width) / options.focal;
}

Box3D SampleBox(Rng& rng, const SceneOptions& options) {
  const double x = rng.Uniform(8.0, 36.0);
  const double lateral = std::min(LateralRatio(options) * x, 20.0);
  const double y = rng.Uniform(-lateral, lateral);
  double yaw = rng.Uniform(-std::numbers::pi, std::numbers::pi);
  if (options.yaw_spread >= 0.0) {
    yaw = rng.Normal(0.0, options.yaw_spread);
  }
  const double l = rng.Uniform(3.2, 4.6);
  const double w = rng.Uniform(1.5, 1.9);
  const double h = rng.Uniform(1.4, 1.7);
  return Box3D(Vec3(x, y, options.ground_z + 0.05 + 0.5 * h), l, w, h, yaw);
}

bool Separated(const Box3D& a, const Box3D& b) {
  // Inflate both footprints so even surface jitter cannot touch.
  const Box3D ia(a.center(), a.length() + 1.0, a.width() + 1.0, a.height(), a.yaw());
  const Box3D ib(b.center(), b.length() + 1.0, b.width() + 1.0, b.height(), b.yaw());
  return IntersectionVolume(ia, ib) == 0.0;
}

struct Face {
  int axis;      // 0, 1, 2 in NLC
  double level;  // NLC value on that axis
};

// Sensor-facing vertical faces plus the top.
std::vector<Face> VisibleFaces(const Box3D& box) {
  std::vector<Face> faces;
  const Vec3 to_sensor = -box.center();
  const Mat3 rot = box.rotation();
  for (int axis = 0; axis < 2; ++axis) {
    for (double sign : {-1.0, 1.0}) {
      const Vec3 normal = sign * rot.col(axis);
      if (normal.dot(to_sensor) > 0.0) {
        faces.push_back({axis, sign > 0.0 ? 1.0 - kInset : kInset});
      }
    }
  }
  faces.push_back({2, 1.0 - kInset});
  return faces;
}

double FaceArea(const Box3D& box, int axis) {
  const Vec3 d = box.dims();
  return d[(axis + 1) % 3] * d[(axis + 2) % 3];
}

}  // namespace

Calibration SyntheticCalibration(const SceneOptions& options) {
  Mat3 k;
  k << options.focal, 0.0, 0.5 * options.width, 0.0, options.focal,
      0.5 * options.height, 0.0, 0.0, 1.0;
  Mat3 r;
  r << 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0;
  return Calibration(k, r, Vec3::Zero());
}

SyntheticScene GenerateScene(std::uint64_t seed, const SceneOptions& options) {
  if (options.min_boxes < 1 || options.max_boxes < options.min_boxes ||
      options.height == 0 || options.width == 0 || !(options.focal > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid scene options");
  }
  Rng rng(seed);
  const Calibration calib = SyntheticCalibration(options);
  const kitti::DetectionRange range;
  const auto visible = [&](const Vec3& p) {
    ImageProjection proj;
    return p.x() >= range.x_min && p.x() <= range.x_max && p.y() >= range.y_min &&
           p.y() <= range.y_max && p.z() >= range.z_min && p.z() <= range.z_max &&
           TryProjectPoint(p, calib, &proj) && InImage(proj, options);
  };

  const int box_count = rng.UniformInt(options.min_boxes, options.max_boxes);
  std::vector<Box3D> boxes;
  PointCloud cloud;
  for (int attempt = 0;
       attempt < kPlacementAttempts && static_cast<int>(boxes.size()) < box_count;
       ++attempt) {
    const Box3D box = SampleBox(rng, options);
    const bool clear = std::all_of(boxes.begin(), boxes.end(),
                                   [&](const Box3D& b) { return Separated(b, box); });
    if (!clear) continue;

    const double range_xy = box.center().head<2>().norm();
    const int count = std::clamp(
        static_cast<int>(std::lround(options.surface_density / range_xy)),
        kMinSurfacePoints, kMaxSurfacePoints);
    const auto faces = VisibleFaces(box);
    std::vector<double> cumulative;
    double total_area = 0.0;
    for (const Face& f : faces) {
      total_area += FaceArea(box, f.axis);
      cumulative.push_back(total_area);
    }
    std::vector<LidarPoint> samples;
    for (int i = 0; i < count; ++i) {
      const double pick = rng.Uniform(0.0, total_area);
      std::size_t fi = 0;
      while (fi + 1 < faces.size() && pick >= cumulative[fi]) ++fi;
      NlcValue n;
      for (int a = 0; a < 3; ++a) n[a] = rng.Uniform(kInset, 1.0 - kInset);
      n[faces[fi].axis] =
          faces[fi].level + rng.Uniform(-kSurfaceJitter, kSurfaceJitter);
      const double reflectance =
          std::clamp(0.2 + 0.6 * n.x() + rng.Normal(0.0, 0.05), 0.0, 1.0);
      const Vec3 p = NlcToLidar(n, box);
      if (visible(p)) samples.push_back({p, reflectance});
    }
    if (static_cast<int>(samples.size()) < kMinSurfacePoints) continue;
    boxes.push_back(box);
    cloud.points.insert(cloud.points.end(), samples.begin(), samples.end());
  }
  if (boxes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "could not place any box");
  }

  const auto outside_boxes = [&](const Vec3& p) {
    return std::none_of(boxes.begin(), boxes.end(),
                        [&](const Box3D& b) { return PointInBox(p, b, 0.0); });
  };
  const double ratio = LateralRatio(options) / 0.8;
  for (int i = 0; i < options.ground_points; ++i) {
    const double x = rng.Uniform(4.0, 45.0);
    const double y = rng.Uniform(-ratio * x, ratio * x);
    const Vec3 p(x, y, options.ground_z + rng.Normal(0.0, 0.02));
    const double reflectance = rng.Uniform(0.0, 0.4);
    if (visible(p) && outside_boxes(p)) cloud.points.push_back({p, reflectance});
  }
  for (int i = 0; i < options.clutter_points; ++i) {
    const double x = rng.Uniform(2.0, 60.0);
    const double y = rng.Uniform(-ratio * x, ratio * x);
    const Vec3 p(x, y, rng.Uniform(options.ground_z, 1.0));
    const double reflectance = rng.Uniform(0.0, 1.0);
    if (visible(p) && outside_boxes(p)) cloud.points.push_back({p, reflectance});
  }

  const std::size_t n = cloud.size();
  GtNlcMap gt = BuildGtNlcMapDetailed(cloud, boxes, calib, options.height, options.width);

  SyntheticScene scene{cloud,
                       boxes,
                       calib,
                       {},
                       Tensor2D(kImageChannels, options.height, options.width),
                       PointFeatures(n, kPointChannels),
                       std::move(gt),
                       std::vector<int>(n, 0),
                       std::vector<int>(static_cast<std::size_t>(options.height) *
                                            options.width,
                                        0),
                       PointFeatures(n, 3),
                       PointFeatures(n, 3),
                       std::vector<bool>(n, false)};

  std::vector<double> nearest(scene.sem2d.size(), kMaxDepth + 1.0);
  std::vector<int> nearest_owner(scene.sem2d.size(), -1);
  scene.coords.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LidarPoint& pt = cloud.points[i];
    const ImageProjection proj = ProjectPoint(pt.position, calib);
    scene.coords.push_back({proj.u, proj.v});
    const std::size_t pixel = static_cast<std::size_t>(std::floor(proj.v)) * options.width +
                              static_cast<std::size_t>(std::floor(proj.u));
    const int owner = scene.gt.point_owner[i];
    // Depth ties go to the earlier point; input order is fixed by the seed.
    if (proj.depth < nearest[pixel]) {
      nearest[pixel] = proj.depth;
      nearest_owner[pixel] = owner;
    }

    scene.point_inputs.at(i, 0) = pt.position.x() / 40.0;
    scene.point_inputs.at(i, 1) = pt.position.y() / 20.0;
    scene.point_inputs.at(i, 2) = (pt.position.z() - options.ground_z) / 2.0;
    scene.point_inputs.at(i, 3) = pt.reflectance;
    if (owner < 0) continue;
    const Box3D& box = boxes[static_cast<std::size_t>(owner)];
    scene.sem3d[i] = 1;
    scene.foreground[i] = true;
    const NlcValue nlc = LidarToNlc(pt.position, box);
    const Vec3 offset = box.center() - pt.position;
    for (int c = 0; c < 3; ++c) {
      scene.point_nlc.at(i, c) = nlc[c];
      scene.center_offsets.at(i, c) = offset[c];
    }
  }

  for (std::size_t px = 0; px < scene.sem2d.size(); ++px) {
    const std::size_t r = px / options.width;
    const std::size_t c = px % options.width;
    scene.sem2d[px] = scene.gt.map.valid(r, c) ? 1 : 0;
    if (nearest[px] > kMaxDepth) continue;
    scene.image.at(0, r, c) = 1.0 - nearest[px] / kMaxDepth;
    const double level = nearest_owner[px] >= 0 ? 0.7 : 0.3;
    scene.image.at(1, r, c) = level + rng.Normal(0.0, 0.15);
  }
  return scene;
}

}  // namespace nlcdet::pipeline
