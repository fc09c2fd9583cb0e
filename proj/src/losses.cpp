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

#include "nlcdet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nlcdet/error.hpp"

namespace nlcdet {

double Huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double HuberDerivative(double r, double delta) {
  if (std::abs(r) <= delta) return r;
  return r > 0.0 ? delta : -delta;
}

LossResult MaskedHuberLoss(const PointFeatures& prediction,
                           const PointFeatures& target,
                           const ForegroundMask& foreground, double delta) {
  if (!(delta > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "Huber delta must be positive");
  }
  if (!prediction.SameShape(target) || foreground.size() != prediction.count()) {
    throw Error(ErrorCode::kShapeError, "prediction, target and mask disagree");
  }
  std::size_t positives = 0;
  for (bool fg : foreground) positives += fg ? 1 : 0;
  if (positives == 0) {
    throw Error(ErrorCode::kEmptyForeground, "no foreground points");
  }
  const double inv = 1.0 / static_cast<double>(positives);
  LossResult result{0.0, PointFeatures(prediction.count(), prediction.channels())};
  for (std::size_t i = 0; i < prediction.count(); ++i) {
    if (!foreground[i]) continue;
    for (std::size_t c = 0; c < prediction.channels(); ++c) {
      const double r = prediction.at(i, c) - target.at(i, c);
      result.value += Huber(r, delta);
      result.grad.at(i, c) = HuberDerivative(r, delta) * inv;
    }
  }
  result.value *= inv;
  return result;
}

LossResult NlcLoss(const PointFeatures& pred_nlc, const PointFeatures& gt_nlc,
                   const ForegroundMask& foreground, double delta) {
  if (pred_nlc.channels() != 3) {
    throw Error(ErrorCode::kShapeError, "NLC predictions need 3 channels");
  }
  return MaskedHuberLoss(pred_nlc, gt_nlc, foreground, delta);
}

LossResult CenterLoss(const PointFeatures& pred_offsets,
                      const PointFeatures& gt_offsets,
                      const ForegroundMask& foreground, double delta) {
  if (pred_offsets.channels() != 3) {
    throw Error(ErrorCode::kShapeError, "center offsets need 3 channels");
  }
  return MaskedHuberLoss(pred_offsets, gt_offsets, foreground, delta);
}

LossResult CrossEntropy(const PointFeatures& logits, std::span<const int> labels) {
  const std::size_t k = logits.channels();
  if (k < 2) throw Error(ErrorCode::kShapeError, "cross-entropy needs K >= 2");
  if (labels.size() != logits.count()) {
    throw Error(ErrorCode::kShapeError, "one label per logit row required");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw Error(ErrorCode::kLabelError,
                  "label " + std::to_string(labels[i]) + " at row " +
                      std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
  }
  LossResult result{0.0, PointFeatures(logits.count(), k)};
  if (logits.count() == 0) return result;
  const double inv = 1.0 / static_cast<double>(logits.count());
  for (std::size_t i = 0; i < logits.count(); ++i) {
    double max_logit = logits.at(i, 0);
    for (std::size_t c = 1; c < k; ++c) max_logit = std::max(max_logit, logits.at(i, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(logits.at(i, c) - max_logit);
    const double log_denom = std::log(denom);
    const auto label = static_cast<std::size_t>(labels[i]);
    result.value += log_denom - (logits.at(i, label) - max_logit);
    for (std::size_t c = 0; c < k; ++c) {
      const double prob = std::exp(logits.at(i, c) - max_logit - log_denom);
      result.grad.at(i, c) = (prob - (c == label ? 1.0 : 0.0)) * inv;
    }
  }
  result.value *= inv;
  return result;
}

double TotalLoss(double rpn, double rcnn, double nlc, double sem2d,
                 double sem3d, double center, const LossWeights& weights) {
  return rpn + rcnn + weights.nlc * nlc + weights.sem2d * sem2d +
         weights.sem3d * sem3d + weights.center * center;
}

}  // namespace nlcdet
