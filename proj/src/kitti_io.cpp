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

#include "nlcdet/kitti_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "nlcdet/error.hpp"
#include "nlcdet/random.hpp"

namespace nlcdet::kitti {
namespace {

struct Token {
  std::string_view text;
  int column;  // 1-based
};

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

std::vector<Token> Tokenize(std::string_view line, int column_offset = 0) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && IsSpace(line[i])) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && !IsSpace(line[i])) ++i;
    tokens.push_back({line.substr(start, i - start),
                      static_cast<int>(start) + 1 + column_offset});
  }
  return tokens;
}

// Splits on '\n'; a trailing newline does not produce an extra empty line.
std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

double ParseReal(const Token& tok, int line) {
  double value = 0.0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line) + ", column " +
                    std::to_string(tok.column) + ": expected a finite number, got '" +
                    std::string(tok.text) + "'",
                line, tok.column);
  }
  return value;
}

int ParseInt(const Token& tok, int line) {
  int value = 0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line) + ", column " +
                    std::to_string(tok.column) + ": expected an integer, got '" +
                    std::string(tok.text) + "'",
                line, tok.column);
  }
  return value;
}

void AppendReal(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

template <typename Matrix>
void AppendRowMajor(std::string& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out += ' ';
      AppendReal(out, m(r, c));
    }
  }
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

float GetF32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  }
  return std::bit_cast<float>(v);
}

constexpr std::string_view kCalibKeys[] = {"P2", "R0_rect", "Tr_velo_to_cam"};
constexpr std::size_t kCalibCounts[] = {12, 9, 12};

}  // namespace

Calib ParseCalib(std::string_view text) {
  std::map<std::string_view, std::vector<double>> found;
  const auto lines = SplitLines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int line_no = static_cast<int>(li) + 1;
    const std::string_view line = lines[li];
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) {
      if (Tokenize(line).empty()) continue;
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected 'KEY: values'",
                  line_no, 1);
    }
    const auto key_tokens = Tokenize(line.substr(0, colon));
    if (key_tokens.size() != 1) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": malformed key", line_no, 1);
    }
    const std::string_view key = key_tokens[0].text;
    const auto it = std::find(std::begin(kCalibKeys), std::end(kCalibKeys), key);
    if (it == std::end(kCalibKeys)) continue;
    if (found.contains(key)) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": duplicate key " +
                      std::string(key),
                  line_no, key_tokens[0].column);
    }
    const std::size_t expected = kCalibCounts[it - std::begin(kCalibKeys)];
    const auto values =
        Tokenize(line.substr(colon + 1), static_cast<int>(colon) + 1);
    if (values.size() != expected) {
      throw Error(ErrorCode::kMalformedMatrix,
                  std::string(key) + " expects " + std::to_string(expected) +
                      " values, got " + std::to_string(values.size()),
                  line_no, 0);
    }
    std::vector<double> parsed;
    parsed.reserve(values.size());
    for (const Token& tok : values) parsed.push_back(ParseReal(tok, line_no));
    found.emplace(key, std::move(parsed));
  }

  for (std::string_view key : kCalibKeys) {
    if (!found.contains(key)) {
      throw Error(ErrorCode::kMissingField,
                  "missing calibration key " + std::string(key));
    }
  }
  Calib calib;
  const auto& p2 = found.at("P2");
  const auto& r0 = found.at("R0_rect");
  const auto& tr = found.at("Tr_velo_to_cam");
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      calib.p2(r, c) = p2[r * 4 + c];
      calib.tr_velo_to_cam(r, c) = tr[r * 4 + c];
    }
    for (int c = 0; c < 3; ++c) calib.r0_rect(r, c) = r0[r * 3 + c];
  }
  return calib;
}

std::string EmitCalib(const Calib& calib) {
  std::string out = "P2:";
  AppendRowMajor(out, calib.p2);
  out += "\nR0_rect:";
  AppendRowMajor(out, calib.r0_rect);
  out += "\nTr_velo_to_cam:";
  AppendRowMajor(out, calib.tr_velo_to_cam);
  out += '\n';
  return out;
}

std::vector<Label> ParseLabels(std::string_view text) {
  std::vector<Label> labels;
  const auto lines = SplitLines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int line_no = static_cast<int>(li) + 1;
    const auto tok = Tokenize(lines[li]);
    if (tok.empty()) continue;
    if (tok.size() != 15 && tok.size() != 16) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected 15 or 16 fields, got " +
                      std::to_string(tok.size()),
                  line_no, 0);
    }
    Label label;
    label.type = std::string(tok[0].text);
    label.truncated = ParseReal(tok[1], line_no);
    label.occluded = ParseInt(tok[2], line_no);
    const bool occlusion_ok = (label.occluded >= 0 && label.occluded <= 3) ||
                              (label.occluded == -1 && label.IsDontCare());
    if (!occlusion_ok) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": occlusion level " +
                      std::to_string(label.occluded) + " outside {0,1,2,3}",
                  line_no, tok[2].column);
    }
    label.alpha = ParseReal(tok[3], line_no);
    for (int k = 0; k < 4; ++k) label.bbox2d[k] = ParseReal(tok[4 + k], line_no);
    label.height = ParseReal(tok[8], line_no);
    label.width = ParseReal(tok[9], line_no);
    label.length = ParseReal(tok[10], line_no);
    label.location = Vec3(ParseReal(tok[11], line_no), ParseReal(tok[12], line_no),
                          ParseReal(tok[13], line_no));
    label.rotation_y = ParseReal(tok[14], line_no);
    if (tok.size() == 16) label.score = ParseReal(tok[15], line_no);
    labels.push_back(std::move(label));
  }
  return labels;
}

std::string EmitLabels(std::span<const Label> labels) {
  std::string out;
  for (const Label& l : labels) {
    out += l.type;
    const auto field = [&out](double v) {
      out += ' ';
      AppendReal(out, v);
    };
    field(l.truncated);
    out += ' ';
    out += std::to_string(l.occluded);
    field(l.alpha);
    for (double v : l.bbox2d) field(v);
    field(l.height);
    field(l.width);
    field(l.length);
    field(l.location.x());
    field(l.location.y());
    field(l.location.z());
    field(l.rotation_y);
    if (l.score) field(*l.score);
    out += '\n';
  }
  return out;
}

PointCloud ReadVelodyne(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorCode::kTruncatedFile,
                "velodyne size " + std::to_string(bytes.size()) +
                    " is not a multiple of 16 bytes");
  }
  PointCloud cloud;
  cloud.points.reserve(bytes.size() / 16);
  for (std::size_t off = 0; off < bytes.size(); off += 16) {
    const float x = GetF32(bytes, off);
    const float y = GetF32(bytes, off + 4);
    const float z = GetF32(bytes, off + 8);
    const float refl = GetF32(bytes, off + 12);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) ||
        !std::isfinite(refl)) {
      throw Error(ErrorCode::kParseError,
                  "non-finite value in point " + std::to_string(off / 16));
    }
    cloud.points.push_back({Vec3(x, y, z), refl});
  }
  return cloud;
}

std::vector<std::uint8_t> WriteVelodyne(const PointCloud& cloud) {
  std::vector<std::uint8_t> out;
  out.reserve(cloud.size() * 16);
  for (const auto& p : cloud.points) {
    for (double v : {p.position.x(), p.position.y(), p.position.z(), p.reflectance}) {
      PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

Calibration ToCalibration(const Calib& calib) {
  const Mat3 k = calib.p2.leftCols<3>();
  if (k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0 || !(k(0, 0) > 0.0) ||
      !(k(1, 1) > 0.0) || !(k(2, 2) > 0.0)) {
    throw Error(ErrorCode::kDegenerateCalib,
                "P2 left block is not an upper-triangular intrinsic matrix");
  }
  const Mat3 rect_rot = calib.r0_rect * calib.tr_velo_to_cam.leftCols<3>();
  const Vec3 rect_trans = calib.r0_rect * calib.tr_velo_to_cam.col(3);
  Eigen::JacobiSVD<Mat3> svd(rect_rot, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s[2] > 1e-6 * s[0]) || !(rect_rot.determinant() > 0.0)) {
    throw Error(ErrorCode::kDegenerateCalib,
                "R0_rect * Tr_velo_to_cam is singular or a reflection");
  }
  const Mat3 rotation = svd.matrixU() * svd.matrixV().transpose();
  const Vec3 camera_offset = k.triangularView<Eigen::Upper>().solve(
      Vec3(calib.p2.col(3)));
  return Calibration(k, rotation, rect_trans + camera_offset);
}

namespace {

struct RectTransform {
  Mat3 rotation;
  Vec3 translation;
};

RectTransform RectFromVelo(const Calib& calib) {
  RectTransform t{calib.r0_rect * calib.tr_velo_to_cam.leftCols<3>(),
                  calib.r0_rect * calib.tr_velo_to_cam.col(3)};
  const double det = t.rotation.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-12) {
    throw Error(ErrorCode::kDegenerateCalib,
                "R0_rect * Tr_velo_to_cam is not invertible");
  }
  return t;
}

}  // namespace

Box3D LabelToLidarBox(const Label& label, const Calib& calib) {
  if (label.IsDontCare()) {
    throw Error(ErrorCode::kInvalidArgument, "DontCare labels carry no box");
  }
  const RectTransform t = RectFromVelo(calib);
  const Vec3 center_rect = label.location - Vec3(0.0, 0.5 * label.height, 0.0);
  const Vec3 center = t.rotation.partialPivLu().solve(center_rect - t.translation);
  return Box3D(center, label.length, label.width, label.height,
               -label.rotation_y - 0.5 * std::numbers::pi);
}

Label LidarBoxToLabel(const Box3D& box, const Calib& calib,
                      const std::string& type) {
  const RectTransform t = RectFromVelo(calib);
  Label label;
  label.type = type;
  label.height = box.height();
  label.width = box.width();
  label.length = box.length();
  label.location =
      t.rotation * box.center() + t.translation + Vec3(0.0, 0.5 * box.height(), 0.0);
  label.rotation_y = NormalizeAngle(-box.yaw() - 0.5 * std::numbers::pi);
  label.alpha = NormalizeAngle(label.rotation_y -
                               std::atan2(label.location.x(), label.location.z()));
  return label;
}

PointCloud FilterDetectionRange(const PointCloud& cloud,
                                const DetectionRange& range) {
  PointCloud out;
  for (const auto& p : cloud.points) {
    const Vec3& x = p.position;
    if (x.x() >= range.x_min && x.x() <= range.x_max && x.y() >= range.y_min &&
        x.y() <= range.y_max && x.z() >= range.z_min && x.z() <= range.z_max) {
      out.points.push_back(p);
    }
  }
  return out;
}

PointCloud DownsamplePoints(const PointCloud& cloud, std::size_t budget,
                            std::uint64_t seed, SamplingStrategy strategy) {
  const std::size_t n = cloud.size();
  if (n <= budget) return cloud;
  std::vector<std::size_t> chosen;
  chosen.reserve(budget);
  if (strategy == SamplingStrategy::kRandom) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < budget; ++i) {
      const std::size_t j = i + rng.UniformIndex(n - i);
      std::swap(idx[i], idx[j]);
    }
    chosen.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(budget));
  } else if (budget > 0) {
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::size_t current = 0;
    for (std::size_t k = 0; k < budget; ++k) {
      chosen.push_back(current);
      std::size_t next = 0;
      double far = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d =
            (cloud.points[i].position - cloud.points[current].position).squaredNorm();
        dist[i] = std::min(dist[i], d);
        if (dist[i] > far) {
          far = dist[i];
          next = i;
        }
      }
      current = next;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  PointCloud out;
  out.points.reserve(chosen.size());
  for (std::size_t i : chosen) out.points.push_back(cloud.points[i]);
  return out;
}

}  // namespace nlcdet::kitti
