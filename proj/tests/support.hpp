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

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include "nlcdet/geometry.hpp"
#include "nlcdet/random.hpp"

namespace nlcdet::testing {

inline std::string FixturePath(const std::string& name) {
  return std::string(NLCDET_FIXTURE_DIR) + "/" + name;
}

inline std::string ReadFileText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  const std::string s = ReadFileText(path);
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

inline Box3D RandomBox(Rng& rng, double spread = 20.0) {
  return Box3D(Vec3(rng.Uniform(-spread, spread), rng.Uniform(-spread, spread),
                    rng.Uniform(-2.0, 2.0)),
               rng.Uniform(0.3, 6.0), rng.Uniform(0.3, 3.0), rng.Uniform(0.3, 3.0),
               rng.Uniform(-std::numbers::pi, std::numbers::pi));
}

// Independent box-frame containment: project the offset on the box axes.
inline bool InsideBoxOracle(const Vec3& p, const Box3D& b, double slack = 0.0) {
  const double c = std::cos(b.yaw());
  const double s = std::sin(b.yaw());
  const Vec3 d = p - b.center();
  const double along = d.x() * c + d.y() * s;
  const double across = -d.x() * s + d.y() * c;
  return std::abs(along) <= b.length() / 2 + slack &&
         std::abs(across) <= b.width() / 2 + slack && std::abs(d.z()) <= b.height() / 2 + slack;
}

// Monte-Carlo IoU over the joint axis-aligned bounding region.
inline double MonteCarloIou(const Box3D& a, const Box3D& b, int samples, Rng& rng) {
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (const Box3D* box : {&a, &b}) {
    const double r = 0.5 * std::hypot(box->length(), box->width());
    lo = lo.cwiseMin(box->center() - Vec3(r, r, box->height() / 2));
    hi = hi.cwiseMax(box->center() + Vec3(r, r, box->height() / 2));
  }
  long in_a = 0, in_b = 0, both = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec3 p(rng.Uniform(lo.x(), hi.x()), rng.Uniform(lo.y(), hi.y()),
                 rng.Uniform(lo.z(), hi.z()));
    const bool ia = InsideBoxOracle(p, a);
    const bool ib = InsideBoxOracle(p, b);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

// Fisher-Yates with the project generator.
template <typename T>
void Shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.UniformIndex(i)]);
}

}  // namespace nlcdet::testing
