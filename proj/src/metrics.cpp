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

#include "nlcdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "nlcdet/error.hpp"

namespace nlcdet {

std::vector<DetectionMatch> MatchDetections(std::span<const Detection> dets,
                                            std::span<const Box3D> gts,
                                            double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "IoU threshold must be in (0, 1]");
  }
  for (const auto& d : dets) {
    if (!std::isfinite(d.score)) {
      throw Error(ErrorCode::kInvalidArgument, "detection scores must be finite");
    }
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<bool> taken(gts.size(), false);
  std::vector<DetectionMatch> matches;
  matches.reserve(dets.size());
  for (std::size_t d : order) {
    DetectionMatch m{d, std::nullopt};
    double best = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double iou = Iou3d(dets[d].box, gts[g]);
      if (iou >= iou_threshold && iou > best) {
        best = iou;
        m.ground_truth = g;
      }
    }
    if (m.ground_truth) taken[*m.ground_truth] = true;
    matches.push_back(m);
  }
  return matches;
}

double AveragePrecision(std::span<const ScoredOutcome> outcomes,
                        std::size_t num_gt, RecallSampling sampling) {
  if (num_gt < 1) {
    throw Error(ErrorCode::kInvalidArgument, "AP needs at least one ground truth");
  }
  std::vector<ScoredOutcome> ranked(outcomes.begin(), outcomes.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ScoredOutcome& a, const ScoredOutcome& b) {
                     return a.score > b.score;
                   });
  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i].true_positive) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  // Suffix maximum turns the curve into the interpolated envelope.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }

  const int positions = sampling == RecallSampling::kR40 ? 40 : 11;
  double total = 0.0;
  for (int k = 0; k < positions; ++k) {
    const double r = sampling == RecallSampling::kR40 ? (k + 1) / 40.0 : k / 10.0;
    // First rank whose recall reaches r; recall is non-decreasing.
    const auto it = std::lower_bound(recall.begin(), recall.end(), r - 1e-12);
    if (it != recall.end()) total += precision[it - recall.begin()];
  }
  return total / positions;
}

std::vector<ClassAp> EvaluateDetections(std::span<const EvalFrame> frames,
                                        double iou_threshold,
                                        RecallSampling sampling) {
  std::set<int> classes;
  for (const auto& f : frames) {
    if (f.ground_truth.size() != f.ground_truth_class.size()) {
      throw Error(ErrorCode::kShapeError, "one class label per ground truth box");
    }
    for (const auto& d : f.detections) classes.insert(d.class_id);
    classes.insert(f.ground_truth_class.begin(), f.ground_truth_class.end());
  }

  std::vector<ClassAp> result;
  for (int cls : classes) {
    ClassAp entry;
    entry.class_id = cls;
    std::vector<ScoredOutcome> outcomes;
    for (const auto& f : frames) {
      std::vector<Detection> dets;
      std::vector<Box3D> gts;
      for (const auto& d : f.detections) {
        if (d.class_id == cls) dets.push_back(d);
      }
      for (std::size_t g = 0; g < f.ground_truth.size(); ++g) {
        if (f.ground_truth_class[g] == cls) gts.push_back(f.ground_truth[g]);
      }
      entry.num_gt += gts.size();
      entry.num_detections += dets.size();
      for (const auto& m : MatchDetections(dets, gts, iou_threshold)) {
        const bool tp = m.ground_truth.has_value();
        entry.true_positives += tp ? 1 : 0;
        outcomes.push_back({dets[m.detection].score, tp});
      }
    }
    // Within a frame outcomes are already score-sorted; the stable sort in
    // AveragePrecision merges frames deterministically.
    entry.ap = entry.num_gt == 0 ? 0.0 : AveragePrecision(outcomes, entry.num_gt, sampling);
    result.push_back(entry);
  }
  return result;
}

}  // namespace nlcdet
