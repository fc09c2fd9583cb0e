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
#include <optional>
#include <span>
#include <vector>

#include "nlcdet/geometry.hpp"

namespace nlcdet {

struct Detection {
  Box3D box;
  double score = 0.0;
  int class_id = 0;
};

struct DetectionMatch {
  std::size_t detection = 0;
  std::optional<std::size_t> ground_truth;
};

// Greedy assignment: detections are visited by descending score (ties by
// index), each takes the unmatched ground truth with the highest IoU (ties by
// lower index) if that IoU reaches `iou_threshold`. Results are in visiting
// order. Throws Error(kInvalidArgument) unless 0 < iou_threshold <= 1 and
// every score is finite.
std::vector<DetectionMatch> MatchDetections(std::span<const Detection> dets,
                                            std::span<const Box3D> gts,
                                            double iou_threshold);

struct ScoredOutcome {
  double score = 0.0;
  bool true_positive = false;
};

enum class RecallSampling {
  kR40,  // recall 1/40, 2/40, ..., 1
  kR11,  // recall 0, 0.1, ..., 1
};

// Precision at recall r is the best precision reached at any recall >= r
// (zero when r is never reached); AP is the mean over the sampled positions.
// Outcomes are ranked by descending score, ties keep input order.
// Throws Error(kInvalidArgument) when num_gt < 1.
double AveragePrecision(std::span<const ScoredOutcome> outcomes,
                        std::size_t num_gt,
                        RecallSampling sampling = RecallSampling::kR40);

// One frame of a dataset: detections and labelled ground truth boxes.
struct EvalFrame {
  std::vector<Detection> detections;
  std::vector<Box3D> ground_truth;
  std::vector<int> ground_truth_class;
};

struct ClassAp {
  int class_id = 0;
  std::size_t num_gt = 0;
  std::size_t num_detections = 0;
  std::size_t true_positives = 0;
  double ap = 0.0;
};

// Per-class AP over all frames, classes in ascending order. A class with
// detections but no ground truth scores 0.
std::vector<ClassAp> EvaluateDetections(std::span<const EvalFrame> frames,
                                        double iou_threshold,
                                        RecallSampling sampling = RecallSampling::kR40);

}  // namespace nlcdet
