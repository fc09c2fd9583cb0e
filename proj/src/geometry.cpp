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

#include "nlcdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "nlcdet/error.hpp"
#include "nlcdet/nlc.hpp"
#include "nlcdet/random.hpp"

namespace nlcdet {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCalibTolerance = 1e-9;
constexpr double kMinClipArea = 1e-12;

struct Point2 {
  double x;
  double y;
};

double Cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::vector<Point2> BevPolygon(const Box3D& box) {
  const auto corners = BoxCorners(box);
  return {{corners[0].x(), corners[0].y()},
          {corners[1].x(), corners[1].y()},
          {corners[3].x(), corners[3].y()},
          {corners[2].x(), corners[2].y()}};
}

// Sutherland-Hodgman: clip `subject` against the convex CCW polygon `clip`.
std::vector<Point2> ClipConvex(std::vector<Point2> subject,
                               const std::vector<Point2>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % clip.size()];
    std::vector<Point2> output;
    output.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Point2& cur = subject[i];
      const Point2& prev = subject[(i + subject.size() - 1) % subject.size()];
      const double s_cur = Cross(a, b, cur);
      const double s_prev = Cross(a, b, prev);
      const bool in_cur = s_cur >= 0.0;
      const bool in_prev = s_prev >= 0.0;
      if (in_cur != in_prev) {
        const double t = s_prev / (s_prev - s_cur);
        output.push_back({prev.x + t * (cur.x - prev.x),
                          prev.y + t * (cur.y - prev.y)});
      }
      if (in_cur) output.push_back(cur);
    }
    subject = std::move(output);
  }
  return subject;
}

double ShoelaceArea(const std::vector<Point2>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(twice);
}

bool AllFinite(const Vec3& v) { return v.allFinite(); }

}  // namespace

double NormalizeAngle(double radians) {
  double r = std::remainder(radians, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  if (r > kPi) r -= 2.0 * kPi;
  return r;
}

Box3D::Box3D(const Vec3& center, double length, double width, double height,
             double yaw)
    : center_(center),
      length_(length),
      width_(width),
      height_(height),
      yaw_(0.0) {
  if (!AllFinite(center) || !std::isfinite(yaw)) {
    throw Error(ErrorCode::kInvalidArgument, "box center and yaw must be finite");
  }
  if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0) ||
      !std::isfinite(length) || !std::isfinite(width) ||
      !std::isfinite(height)) {
    throw Error(ErrorCode::kInvalidArgument,
                "box dimensions must be finite and strictly positive");
  }
  yaw_ = NormalizeAngle(yaw);
}

Mat3 Box3D::rotation() const {
  const double c = std::cos(yaw_);
  const double s = std::sin(yaw_);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Calibration::Calibration(const Mat3& intrinsics, const Mat3& rotation,
                         const Vec3& translation)
    : intrinsics_(intrinsics), rotation_(rotation), translation_(translation) {
  if (!intrinsics.allFinite() || !rotation.allFinite() ||
      !translation.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "calibration must be finite");
  }
  if (intrinsics(1, 0) != 0.0 || intrinsics(2, 0) != 0.0 ||
      intrinsics(2, 1) != 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "intrinsics must be upper-triangular");
  }
  if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0) ||
      !(intrinsics(2, 2) > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "intrinsics must have a positive diagonal");
  }
  const double ortho_err =
      (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det_err = std::abs(rotation.determinant() - 1.0);
  if (ortho_err > kCalibTolerance || det_err > kCalibTolerance) {
    throw Error(ErrorCode::kInvalidArgument,
                "rotation must be orthonormal with determinant +1 (error " +
                    std::to_string(std::max(ortho_err, det_err)) + ")");
  }
}

Calibration Calibration::Identity() {
  return Calibration(Mat3::Identity(), Mat3::Identity(), Vec3::Zero());
}

bool TryProjectPoint(const Vec3& p, const Calibration& calib,
                     ImageProjection* out) {
  const Vec3 h = calib.K() * (calib.R() * p + calib.T());
  if (!(h.z() > kMinProjectionDepth)) return false;
  out->u = h.x() / h.z();
  out->v = h.y() / h.z();
  out->depth = h.z();
  return true;
}

ImageProjection ProjectPoint(const Vec3& p, const Calibration& calib) {
  ImageProjection proj;
  if (!TryProjectPoint(p, calib, &proj)) {
    throw Error(ErrorCode::kBehindCamera,
                "point projects to non-positive depth");
  }
  return proj;
}

std::array<Vec3, 8> BoxCorners(const Box3D& box) {
  std::array<Vec3, 8> corners;
  for (int i = 0; i < 8; ++i) {
    const NlcValue n((i & 1), (i >> 1) & 1, (i >> 2) & 1);
    corners[i] = NlcToLidar(n, box);
  }
  return corners;
}

bool PointInBox(const Vec3& p, const Box3D& box, double margin) {
  const NlcValue n = LidarToNlc(p, box);
  const double lo = -margin;
  const double hi = 1.0 + margin;
  return n.x() >= lo && n.x() <= hi && n.y() >= lo && n.y() <= hi &&
         n.z() >= lo && n.z() <= hi;
}

std::vector<std::size_t> PointsInBox(const PointCloud& cloud,
                                     const Box3D& box, double margin) {
  if (!(margin >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "margin must be >= 0");
  }
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (PointInBox(cloud.points[i].position, box, margin)) inside.push_back(i);
  }
  return inside;
}

double IntersectionVolume(const Box3D& a, const Box3D& b) {
  const double a_lo = a.center().z() - 0.5 * a.height();
  const double a_hi = a.center().z() + 0.5 * a.height();
  const double b_lo = b.center().z() - 0.5 * b.height();
  const double b_hi = b.center().z() + 0.5 * b.height();
  const double overlap_z = std::min(a_hi, b_hi) - std::max(a_lo, b_lo);
  if (overlap_z <= 0.0) return 0.0;

  const double area = ShoelaceArea(ClipConvex(BevPolygon(a), BevPolygon(b)));
  if (area < kMinClipArea) return 0.0;
  return area * overlap_z;
}

double Iou3d(const Box3D& a, const Box3D& b) {
  // Sort the pair so the clip order, and therefore rounding, is symmetric.
  const auto key = [](const Box3D& box) {
    return std::array<double, 7>{box.center().x(), box.center().y(),
                                 box.center().z(), box.length(),
                                 box.width(),      box.height(),
                                 box.yaw()};
  };
  const bool swap = key(b) < key(a);
  const Box3D& first = swap ? b : a;
  const Box3D& second = swap ? a : b;
  const double inter = IntersectionVolume(first, second);
  if (inter <= 0.0) return 0.0;
  const double uni = first.volume() + second.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

GlobalTransform SampleGlobalTransform(std::uint64_t seed,
                                      const AugmentOptions& options) {
  const auto check_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(options.scale_range.first <= options.scale_range.second) ||
      !(options.rotation_range.first <= options.rotation_range.second) ||
      !(options.scale_range.first > 0.0) || !check_prob(options.flip_prob) ||
      !check_prob(options.rotation_prob) || !check_prob(options.scale_prob)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid augmentation options");
  }
  Rng rng(seed);
  GlobalTransform t;
  // Every draw is consumed regardless of outcome so the stream layout is
  // fixed.
  t.flipped = rng.Bernoulli(options.flip_prob);
  t.rotated = rng.Bernoulli(options.rotation_prob);
  const double angle =
      rng.Uniform(options.rotation_range.first, options.rotation_range.second);
  t.scaled = rng.Bernoulli(options.scale_prob);
  const double scale =
      rng.Uniform(options.scale_range.first, options.scale_range.second);
  t.rotation = t.rotated ? angle : 0.0;
  t.scale = t.scaled ? scale : 1.0;
  return t;
}

AugmentResult ApplyGlobalTransform(const PointCloud& cloud,
                                   const std::vector<Box3D>& boxes,
                                   const GlobalTransform& transform) {
  AugmentResult result{cloud, boxes, transform};
  if (transform.flipped) {
    for (auto& p : result.cloud.points) p.position.y() = -p.position.y();
    for (auto& b : result.boxes) {
      Vec3 c = b.center();
      c.y() = -c.y();
      b = Box3D(c, b.length(), b.width(), b.height(), -b.yaw());
    }
  }
  if (transform.rotated) {
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(transform.rotation, Vec3::UnitZ()).toRotationMatrix();
    for (auto& p : result.cloud.points) p.position = rot * p.position;
    for (auto& b : result.boxes) {
      b = Box3D(rot * b.center(), b.length(), b.width(), b.height(),
                b.yaw() + transform.rotation);
    }
  }
  if (transform.scaled) {
    const double s = transform.scale;
    for (auto& p : result.cloud.points) p.position *= s;
    for (auto& b : result.boxes) {
      b = Box3D(b.center() * s, b.length() * s, b.width() * s,
                b.height() * s, b.yaw());
    }
  }
  return result;
}

AugmentResult AugmentGlobal(const PointCloud& cloud,
                            const std::vector<Box3D>& boxes,
                            std::uint64_t seed,
                            const AugmentOptions& options) {
  return ApplyGlobalTransform(cloud, boxes,
                              SampleGlobalTransform(seed, options));
}

}  // namespace nlcdet
