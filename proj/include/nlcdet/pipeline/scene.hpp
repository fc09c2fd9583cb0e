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

#include <cstdint>
#include <vector>

#include "nlcdet/geometry.hpp"
#include "nlcdet/nlc.hpp"
#include "nlcdet/tensor.hpp"

namespace nlcdet::pipeline {

struct SceneOptions {
  std::uint32_t height = 24;
  std::uint32_t width = 64;
  double focal = 32.0;
  double ground_z = -1.7;
  int min_boxes = 1;
  int max_boxes = 4;
  int ground_points = 200;
  int clutter_points = 60;
  // Surface samples per box scale as this over the range, clamped to [50, 500].
  double surface_density = 1500.0;
  // Standard deviation of the heading around the road axis (0 or pi);
  // negative draws headings uniformly.
  double yaw_spread = 0.1;
};

// Channels of the rendered proxy image.
inline constexpr std::size_t kImageChannels = 2;  // depth, noisy foreground
// Per-point input channels: scaled x, y, height above ground, reflectance.
inline constexpr std::size_t kPointChannels = 4;

struct SyntheticScene {
  PointCloud cloud;
  std::vector<Box3D> boxes;
  Calibration calib;
  ProjectedCoords coords;        // every point projects inside the image
  Tensor2D image;                // kImageChannels x H x W
  PointFeatures point_inputs;    // N x kPointChannels
  GtNlcMap gt;                   // map, pixel owners, point owners
  std::vector<int> sem3d;        // 1 foreground, 0 background
  std::vector<int> sem2d;        // per pixel, 1 where the NLC map is valid
  PointFeatures point_nlc;       // N x 3, zero for background
  PointFeatures center_offsets;  // N x 3, box center minus point; zero for background
  std::vector<bool> foreground;
};

// Camera looking along LiDAR +x with the given pinhole parameters.
Calibration SyntheticCalibration(const SceneOptions& options);

// Deterministic in (seed, options). Boxes sit on the ground inside the
// detection range and the camera field of view, never overlap, and each
// carries at least 50 surface points visible in the image.
SyntheticScene GenerateScene(std::uint64_t seed, const SceneOptions& options = {});

}  // namespace nlcdet::pipeline
