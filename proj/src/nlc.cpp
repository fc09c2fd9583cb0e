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

#include "nlcdet/nlc.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <string>
#include <tuple>

#include "nlcdet/error.hpp"

namespace nlcdet {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'N', 'L', 'C', 'M'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kHeaderBytes = 16;

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void PutF32(std::vector<std::uint8_t>& out, float f) {
  PutU32(out, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t GetU32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  }
  return v;
}

float GetF32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return std::bit_cast<float>(GetU32(bytes, offset));
}

void AppendFloat(std::string& out, float v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

struct PixelCandidate {
  double depth = 0.0;
  NlcValue nlc = NlcValue::Zero();
  int owner = -1;

  auto Key() const {
    return std::make_tuple(depth, nlc.x(), nlc.y(), nlc.z(), owner);
  }
};

}  // namespace

NlcValue LidarToNlc(const Vec3& p, const Box3D& box) {
  const Vec3 d = p - box.center();
  const double c = std::cos(box.yaw());
  const double s = std::sin(box.yaw());
  const double local_x = c * d.x() + s * d.y();
  const double local_y = -s * d.x() + c * d.y();
  return {local_x / box.length() + 0.5, local_y / box.width() + 0.5,
          d.z() / box.height() + 0.5};
}

Vec3 NlcToLidar(const NlcValue& n, const Box3D& box) {
  const double local_x = (n.x() - 0.5) * box.length();
  const double local_y = (n.y() - 0.5) * box.width();
  const double local_z = (n.z() - 0.5) * box.height();
  const double c = std::cos(box.yaw());
  const double s = std::sin(box.yaw());
  return box.center() + Vec3(c * local_x - s * local_y,
                             s * local_x + c * local_y, local_z);
}

NlcMap::NlcMap(std::uint32_t height, std::uint32_t width)
    : height_(height), width_(width) {
  if (height == 0 || width == 0) {
    throw Error(ErrorCode::kShapeError, "NLC map extents must be positive");
  }
  values_.assign(3 * pixels(), 0.0f);
  mask_.assign(pixels(), 0);
  depth_.assign(pixels(), kEmptyDepth);
}

void NlcMap::Set(std::size_t row, std::size_t col, const NlcValue& nlc,
                 double depth) {
  if (row >= height_ || col >= width_) {
    throw Error(ErrorCode::kInvalidArgument, "pixel outside NLC map");
  }
  if (!nlc.allFinite() || !std::isfinite(depth)) {
    throw Error(ErrorCode::kInvalidArgument, "NLC map entries must be finite");
  }
  const std::size_t idx = Index(row, col);
  for (std::size_t c = 0; c < 3; ++c) {
    values_[c * pixels() + idx] = static_cast<float>(nlc[c]);
  }
  mask_[idx] = 1;
  depth_[idx] = static_cast<float>(depth);
}

void NlcMap::Clear(std::size_t row, std::size_t col) {
  const std::size_t idx = Index(row, col);
  for (std::size_t c = 0; c < 3; ++c) values_[c * pixels() + idx] = 0.0f;
  mask_[idx] = 0;
  depth_[idx] = kEmptyDepth;
}

std::size_t NlcMap::CountValid() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1));
}

bool NlcMap::operator==(const NlcMap& other) const {
  // Bitwise comparison: the infinity sentinel and signed zeros included.
  const auto bits_equal = [](const std::vector<float>& a,
                             const std::vector<float>& b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](float x, float y) {
             return std::bit_cast<std::uint32_t>(x) ==
                    std::bit_cast<std::uint32_t>(y);
           });
  };
  return height_ == other.height_ && width_ == other.width_ &&
         mask_ == other.mask_ && bits_equal(values_, other.values_) &&
         bits_equal(depth_, other.depth_);
}

int AssignPointToBox(const Vec3& p, std::span<const Box3D> boxes,
                     double margin) {
  int best = -1;
  double best_dist = 0.0;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    if (!PointInBox(p, boxes[b], margin)) continue;
    const double dist = (p - boxes[b].center()).squaredNorm();
    if (best < 0 || dist < best_dist) {
      best = static_cast<int>(b);
      best_dist = dist;
    }
  }
  return best;
}

GtNlcMap BuildGtNlcMapDetailed(const PointCloud& cloud,
                               std::span<const Box3D> boxes,
                               const Calibration& calib, std::uint32_t height,
                               std::uint32_t width) {
  GtNlcMap gt{NlcMap(height, width),
              std::vector<int>(static_cast<std::size_t>(height) * width, -1),
              std::vector<int>(cloud.size(), -1)};
  std::vector<PixelCandidate> best(gt.owner.size());
  std::vector<std::uint8_t> taken(gt.owner.size(), 0);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i].position;
    const int owner = AssignPointToBox(p, boxes);
    gt.point_owner[i] = owner;
    if (owner < 0) continue;
    ImageProjection proj;
    if (!TryProjectPoint(p, calib, &proj)) continue;
    if (!(proj.u >= 0.0 && proj.u < width && proj.v >= 0.0 &&
          proj.v < height)) {
      continue;
    }
    const auto row = static_cast<std::size_t>(std::floor(proj.v));
    const auto col = static_cast<std::size_t>(std::floor(proj.u));
    const std::size_t idx = row * width + col;
    PixelCandidate cand{proj.depth, LidarToNlc(p, boxes[owner]), owner};
    if (!taken[idx] || cand.Key() < best[idx].Key()) {
      best[idx] = cand;
      taken[idx] = 1;
    }
  }

  for (std::size_t idx = 0; idx < best.size(); ++idx) {
    if (!taken[idx]) continue;
    gt.map.Set(idx / width, idx % width, best[idx].nlc, best[idx].depth);
    gt.owner[idx] = best[idx].owner;
  }
  return gt;
}

NlcMap BuildGtNlcMap(const PointCloud& cloud, std::span<const Box3D> boxes,
                     const Calibration& calib, std::uint32_t height,
                     std::uint32_t width) {
  return BuildGtNlcMapDetailed(cloud, boxes, calib, height, width).map;
}

MmaeResult Mmae(const NlcMap& gt, const Tensor2D& prediction,
                std::span<const ObjectPixels> objects) {
  if (prediction.channels() != 3 || prediction.height() != gt.height() ||
      prediction.width() != gt.width()) {
    throw Error(ErrorCode::kShapeError,
                "prediction must be 3 x H x W matching the NLC map");
  }
  MmaeResult result;
  std::array<std::vector<double>, 3> per_object;
  std::vector<double> errors;
  for (const ObjectPixels& obj : objects) {
    if (obj.pixels.empty()) {
      ++result.skipped;
      continue;
    }
    for (std::size_t q = 0; q < 3; ++q) {
      errors.clear();
      for (const PixelIndex& px : obj.pixels) {
        if (px.row >= gt.height() || px.col >= gt.width() ||
            !gt.valid(px.row, px.col)) {
          throw Error(ErrorCode::kInvalidArgument,
                      "object pixel is outside the map or has no ground truth");
        }
        errors.push_back(std::abs(static_cast<double>(gt.value(q, px.row, px.col)) -
                                  prediction.at(q, px.row, px.col)));
      }
      // Summation in sorted order makes the result independent of the order
      // in which pixels and objects are listed.
      std::sort(errors.begin(), errors.end());
      double sum = 0.0;
      for (double e : errors) sum += e;
      per_object[q].push_back(sum / static_cast<double>(errors.size()));
    }
    ++result.evaluated;
  }
  if (result.evaluated == 0) {
    result.x = result.y = result.z = std::nan("");
    return result;
  }
  std::array<double, 3> means{};
  for (std::size_t q = 0; q < 3; ++q) {
    std::sort(per_object[q].begin(), per_object[q].end());
    double sum = 0.0;
    for (double v : per_object[q]) sum += v;
    means[q] = sum / static_cast<double>(per_object[q].size());
  }
  result.x = means[0];
  result.y = means[1];
  result.z = means[2];
  return result;
}

std::vector<ObjectPixels> ObjectPixelsFromOwners(
    const GtNlcMap& gt, std::span<const Box3D> boxes) {
  std::vector<ObjectPixels> objects;
  objects.reserve(boxes.size());
  for (const Box3D& b : boxes) objects.push_back({b, {}});
  const std::uint32_t width = gt.map.width();
  for (std::size_t idx = 0; idx < gt.owner.size(); ++idx) {
    const int owner = gt.owner[idx];
    if (owner < 0 || static_cast<std::size_t>(owner) >= objects.size()) continue;
    objects[owner].pixels.push_back({static_cast<std::uint32_t>(idx / width),
                                     static_cast<std::uint32_t>(idx % width)});
  }
  return objects;
}

std::vector<std::uint8_t> EncodeNlcMap(const NlcMap& map) {
  const std::size_t n = map.pixels();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 17 * n);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  PutU32(out, kFormatVersion);
  PutU32(out, map.height());
  PutU32(out, map.width());
  for (float v : map.values()) PutF32(out, v);
  out.insert(out.end(), map.mask().begin(), map.mask().end());
  for (float d : map.depths()) PutF32(out, d);
  return out;
}

NlcMap DecodeNlcMap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) {
    if (bytes.size() >= 4 && !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
      throw Error(ErrorCode::kBadMagic, "missing NLCM magic");
    }
    throw Error(ErrorCode::kTruncatedFile, "NLC map header is truncated");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::kBadMagic, "missing NLCM magic");
  }
  const std::uint32_t version = GetU32(bytes, 4);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "unsupported NLC map version " + std::to_string(version));
  }
  const std::uint32_t height = GetU32(bytes, 8);
  const std::uint32_t width = GetU32(bytes, 12);
  if (height == 0 || width == 0) {
    throw Error(ErrorCode::kParseError, "NLC map extents must be positive");
  }
  const std::uint64_t n = static_cast<std::uint64_t>(height) * width;
  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  if (payload / 17 < n) {
    throw Error(ErrorCode::kTruncatedFile, "NLC map payload is truncated");
  }
  if (payload != 17 * n) {
    throw Error(ErrorCode::kParseError, "trailing bytes after NLC map");
  }

  NlcMap map(height, width);
  std::size_t offset = kHeaderBytes;
  for (float& v : map.mutable_values()) {
    v = GetF32(bytes, offset);
    offset += 4;
  }
  auto& mask = map.mutable_mask();
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(offset), n, mask.begin());
  offset += n;
  for (float& d : map.mutable_depths()) {
    d = GetF32(bytes, offset);
    offset += 4;
  }

  const auto& values = map.values();
  const auto& depth = map.depths();
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] > 1) {
      throw Error(ErrorCode::kParseError, "mask byte must be 0 or 1");
    }
    const bool valid = mask[i] == 1;
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = values[c * n + i];
      if (valid ? !std::isfinite(v) : v != 0.0f) {
        throw Error(ErrorCode::kParseError, "NLC value violates mask invariant");
      }
    }
    if (valid ? !std::isfinite(depth[i]) : depth[i] != NlcMap::kEmptyDepth) {
      throw Error(ErrorCode::kParseError, "depth violates mask invariant");
    }
  }
  return map;
}

std::string NlcMapToCsv(const NlcMap& map) {
  std::string out;
  for (std::size_t r = 0; r < map.height(); ++r) {
    for (std::size_t c = 0; c < map.width(); ++c) {
      if (!map.valid(r, c)) continue;
      out += std::to_string(r);
      out += ',';
      out += std::to_string(c);
      for (std::size_t q = 0; q < 3; ++q) {
        out += ',';
        AppendFloat(out, map.value(q, r, c));
      }
      out += ',';
      AppendFloat(out, map.depth(r, c));
      out += '\n';
    }
  }
  return out;
}

}  // namespace nlcdet
