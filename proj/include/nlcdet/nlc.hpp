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
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nlcdet/geometry.hpp"
#include "nlcdet/tensor.hpp"

namespace nlcdet {

// Normalized local coordinate: box interior maps to [0, 1]^3, center to 0.5.
using NlcValue = Eigen::Vector3d;

// Rotate (p - c) into the box frame, divide by (l, w, h), add 0.5.
NlcValue LidarToNlc(const Vec3& p, const Box3D& box);
// Exact inverse of LidarToNlc.
Vec3 NlcToLidar(const NlcValue& n, const Box3D& box);

// Image-aligned three-channel NLC map. Values and depth are stored in single
// precision, matching the on-disk format, so a written map reads back
// bit-identically.
class NlcMap {
 public:
  static constexpr float kEmptyDepth = std::numeric_limits<float>::infinity();

  // Throws Error(kShapeError) for zero extents.
  NlcMap(std::uint32_t height, std::uint32_t width);

  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::size_t pixels() const {
    return static_cast<std::size_t>(height_) * width_;
  }

  bool valid(std::size_t row, std::size_t col) const {
    return mask_[Index(row, col)] != 0;
  }
  // Channel c in {0, 1, 2} = {x, y, z}.
  float value(std::size_t c, std::size_t row, std::size_t col) const {
    return values_[c * pixels() + Index(row, col)];
  }
  float depth(std::size_t row, std::size_t col) const {
    return depth_[Index(row, col)];
  }

  // Marks the pixel valid. Values must be finite.
  void Set(std::size_t row, std::size_t col, const NlcValue& nlc,
           double depth);
  void Clear(std::size_t row, std::size_t col);

  std::size_t CountValid() const;

  const std::vector<float>& values() const { return values_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  const std::vector<float>& depths() const { return depth_; }

  // Raw access for deserialization; callers keep the mask/sentinel invariant.
  std::vector<float>& mutable_values() { return values_; }
  std::vector<std::uint8_t>& mutable_mask() { return mask_; }
  std::vector<float>& mutable_depths() { return depth_; }

  bool operator==(const NlcMap&) const;

 private:
  std::size_t Index(std::size_t row, std::size_t col) const {
    return row * width_ + col;
  }

  std::uint32_t height_;
  std::uint32_t width_;
  std::vector<float> values_;
  std::vector<std::uint8_t> mask_;
  std::vector<float> depth_;
};

struct GtNlcMap {
  NlcMap map;
  // Per pixel, index of the box whose point claimed it; -1 where invalid.
  std::vector<int> owner;
  // Per point, index of the containing box (nearest center wins); -1 for
  // background points.
  std::vector<int> point_owner;
};

// Index of the box claiming `p` (nearest center among containing boxes,
// lower index on ties), or -1.
int AssignPointToBox(const Vec3& p, std::span<const Box3D> boxes,
                     double margin = 0.0);

// Ground-truth NLC map. A pixel takes the NLC of the nearest-depth foreground
// point projecting into it; equal depths are resolved by comparing NLC
// values, so the result does not depend on point order.
GtNlcMap BuildGtNlcMapDetailed(const PointCloud& cloud,
                               std::span<const Box3D> boxes,
                               const Calibration& calib, std::uint32_t height,
                               std::uint32_t width);

NlcMap BuildGtNlcMap(const PointCloud& cloud, std::span<const Box3D> boxes,
                     const Calibration& calib, std::uint32_t height,
                     std::uint32_t width);

struct PixelIndex {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
};

struct ObjectPixels {
  Box3D box;
  std::vector<PixelIndex> pixels;
};

struct MmaeResult {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

// Mean over objects of the per-object mean absolute NLC error. `prediction`
// is a 3 x H x W tensor matching the map. Objects with no pixels are skipped
// and tallied. Throws Error(kShapeError) on shape mismatch and
// Error(kInvalidArgument) for pixels outside the map or not valid in it.
MmaeResult Mmae(const NlcMap& gt, const Tensor2D& prediction,
                std::span<const ObjectPixels> objects);

// Groups the valid pixels of a detailed map by owning box.
std::vector<ObjectPixels> ObjectPixelsFromOwners(const GtNlcMap& gt,
                                                 std::span<const Box3D> boxes);

// Binary container: "NLCM", u32 version (1), u32 H, u32 W, three planar f32
// channels, H*W mask bytes, f32 depth plane; all little-endian.
std::vector<std::uint8_t> EncodeNlcMap(const NlcMap& map);
// Throws Error(kBadMagic | kUnsupportedVersion | kTruncatedFile |
// kParseError).
NlcMap DecodeNlcMap(std::span<const std::uint8_t> bytes);

// One row per valid pixel: row,col,x_nlc,y_nlc,z_nlc,depth.
std::string NlcMapToCsv(const NlcMap& map);

}  // namespace nlcdet
