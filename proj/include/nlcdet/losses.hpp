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
#include <span>
#include <vector>

#include "nlcdet/tensor.hpp"

namespace nlcdet {

struct LossWeights {
  double nlc = 1.0;
  double sem2d = 1.0;
  double sem3d = 1.0;
  double center = 1.0;
};

// One flag per LiDAR point.
using ForegroundMask = std::vector<bool>;

inline constexpr double kDefaultHuberDelta = 1.0;

// r^2 / 2 for |r| <= delta, delta (|r| - delta / 2) otherwise.
double Huber(double r, double delta);
double HuberDerivative(double r, double delta);

struct LossResult {
  double value = 0.0;
  PointFeatures grad;  // same shape as the prediction
};

// (1 / N_pos) * sum over foreground points of the channel-summed Huber
// penalty. Background rows get exactly zero gradient. Throws
// Error(kEmptyForeground) if no point is foreground, Error(kShapeError) on
// shape mismatch, Error(kInvalidArgument) for delta <= 0.
LossResult MaskedHuberLoss(const PointFeatures& prediction,
                           const PointFeatures& target,
                           const ForegroundMask& foreground, double delta);

// NLC regression (predictions gathered at the foreground points' pixels).
LossResult NlcLoss(const PointFeatures& pred_nlc, const PointFeatures& gt_nlc,
                   const ForegroundMask& foreground,
                   double delta = kDefaultHuberDelta);

// Center-offset regression; targets are (box center - point) in meters.
LossResult CenterLoss(const PointFeatures& pred_offsets,
                      const PointFeatures& gt_offsets,
                      const ForegroundMask& foreground,
                      double delta = kDefaultHuberDelta);

// Mean softmax cross-entropy over rows of an M x K logit matrix.
// Throws Error(kLabelError) for labels outside [0, K) and
// Error(kShapeError) for K < 2 or a label count mismatch.
LossResult CrossEntropy(const PointFeatures& logits, std::span<const int> labels);

double TotalLoss(double rpn, double rcnn, double nlc, double sem2d,
                 double sem3d, double center, const LossWeights& weights);

}  // namespace nlcdet
