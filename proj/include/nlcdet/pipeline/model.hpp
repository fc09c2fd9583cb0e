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
#include <string>
#include <vector>

#include "nlcdet/losses.hpp"
#include "nlcdet/propagation.hpp"
#include "nlcdet/tensor.hpp"

namespace nlcdet::pipeline {

inline constexpr int kStages = 2;

struct ModelConfig {
  std::size_t point_in = 4;
  std::size_t image_in = 2;
  std::size_t hidden = 8;
  bool image_branch = true;  // false builds a point-only network
  bool enable_p2i = true;
  bool enable_i2p = true;
};

enum class Branch { kPoint, kImage };

// Two-stage point and image trunks with optional bidirectional fusion per
// stage. Point-to-pixel fusion layers belong to the image branch (their
// output lives on the grid), pixel-to-point ones to the point branch.
template <typename Layer, typename Fusion>
struct ModelParams {
  Layer point_stage[kStages];
  Layer image_stage[kStages];
  Fusion p2i[kStages];
  Fusion i2p[kStages];
  Layer image_nlc_head;     // 3-channel NLC map
  Layer image_sem_head;     // 2-class map
  Layer point_sem_head;     // 2-class per point
  Layer point_center_head;  // 3 offsets per point
  Layer point_nlc_head;     // NLC probe on detached point features
};

using ToyModel = ModelParams<DenseLayer, FusionLayers>;
using ToyModelGrad = ModelParams<DenseLayerGrad, FusionGrads>;

// Visits every dense layer that exists under `config`, in a fixed order.
// `fn(name, branch, layer)`; works on models and gradients alike.
template <typename Params, typename Fn>
void ForEachLayer(Params& params, const ModelConfig& config, Fn&& fn) {
  static const char* const kStageNames[kStages] = {"1", "2"};
  for (int s = 0; s < kStages; ++s) {
    const std::string tag = kStageNames[s];
    fn("point_stage" + tag, Branch::kPoint, params.point_stage[s]);
    if (config.image_branch) {
      fn("image_stage" + tag, Branch::kImage, params.image_stage[s]);
    }
    if (config.enable_p2i) {
      fn("p2i" + tag + ".first", Branch::kImage, params.p2i[s].first);
      fn("p2i" + tag + ".second", Branch::kImage, params.p2i[s].second);
    }
    if (config.enable_i2p) {
      fn("i2p" + tag + ".first", Branch::kPoint, params.i2p[s].first);
      fn("i2p" + tag + ".second", Branch::kPoint, params.i2p[s].second);
    }
  }
  if (config.image_branch) {
    fn(std::string("image_nlc_head"), Branch::kImage, params.image_nlc_head);
    fn(std::string("image_sem_head"), Branch::kImage, params.image_sem_head);
  }
  fn(std::string("point_sem_head"), Branch::kPoint, params.point_sem_head);
  fn(std::string("point_center_head"), Branch::kPoint, params.point_center_head);
  fn(std::string("point_nlc_head"), Branch::kPoint, params.point_nlc_head);
}

// Throws Error(kInvalidArgument) when fusion is requested without an image
// branch or a width is zero. Each branch and each fusion block draws from
// its own stream derived from `seed`, so point-branch parameters do not
// depend on which other parts exist.
ToyModel InitModel(const ModelConfig& config, std::uint64_t seed);
ToyModelGrad ZeroGrad(const ToyModel& model, const ModelConfig& config);

struct ParameterCount {
  std::size_t point = 0;
  std::size_t image = 0;
  std::size_t total() const { return point + image; }
};
ParameterCount CountParameters(const ToyModel& model, const ModelConfig& config);

// Network input for one scene.
struct ModelInput {
  PointFeatures points;    // N x point_in
  Tensor2D image;          // image_in x H x W (ignored without image branch)
  ProjectedCoords coords;  // N
};

struct StageCache {
  Activations point_pre;
  Activations point_act;  // relu(point_pre), input to fusion
  Activations image_pre;
  Activations image_act;
  Activations scattered;  // point_to_pixel(point_act)
  Activations gathered;   // pixel_to_point(image_act)
  FusionCache p2i;
  FusionCache i2p;
  Activations point_out;
  Activations image_out;
};

struct ForwardResult {
  // Channel-major activations: C x N for points, C x (H*W) for the image.
  Activations image_nlc;
  Activations image_sem;
  Activations point_sem;
  Activations point_center;
  Activations point_nlc;

  Activations point_in;
  Activations image_in;
  StageCache stages[kStages];
  std::size_t height = 0;
  std::size_t width = 0;
};

// Throws Error(kShapeError) for inconsistent input shapes.
ForwardResult Forward(const ToyModel& model, const ModelConfig& config,
                      const ModelInput& input);

// Gradients of a scalar with respect to the head outputs; empty matrices
// stand for zero.
struct HeadGrads {
  Activations image_nlc;
  Activations image_sem;
  Activations point_sem;
  Activations point_center;
  Activations point_nlc;
};

// Accumulates parameter gradients into `grad`. The point NLC probe reads
// detached features: its gradient updates the probe only.
void Backward(const ToyModel& model, const ModelConfig& config,
              const ModelInput& input, const ForwardResult& forward,
              const HeadGrads& head_grads, ToyModelGrad* grad);

struct Targets {
  PointFeatures point_nlc;       // N x 3
  PointFeatures center_offsets;  // N x 3
  ForegroundMask foreground;     // N
  std::vector<int> sem3d;        // N
  std::vector<int> sem2d;        // H * W
};

struct LossBreakdown {
  double image_nlc = 0.0;  // Huber on the NLC map gathered at foreground points
  double sem2d = 0.0;
  double sem3d = 0.0;
  double center = 0.0;
  double point_nlc = 0.0;  // probe on point features, outside the total
  double total = 0.0;      // weighted image NLC, sem2d, sem3d and center terms

  // Point-branch quality used for validation.
  double PointBranch() const { return point_nlc + center; }
};

struct LossGrads {
  LossBreakdown losses;
  HeadGrads image_terms;  // image-head objectives only
  HeadGrads point_terms;  // point-head objectives, including the probe
};

// Weighted objective; the image terms are skipped without an image branch.
// The proposal and refinement losses of the full detector are outside the
// toy and enter as zero.
LossGrads ComputeLosses(const ModelConfig& config, const ModelInput& input,
                        const ForwardResult& forward, const Targets& targets,
                        const LossWeights& weights, double huber_delta);

// Smallest distance of any ReLU pre-activation from 0 and of any Huber
// residual magnitude from delta; finite differences need both away from 0.
double KinkDistance(const ModelConfig& config, const ModelInput& input,
                    const ForwardResult& forward, const Targets& targets,
                    double huber_delta);

}  // namespace nlcdet::pipeline
