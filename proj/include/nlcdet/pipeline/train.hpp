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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlcdet/losses.hpp"
#include "nlcdet/pipeline/model.hpp"
#include "nlcdet/pipeline/scene.hpp"

namespace nlcdet::pipeline {

struct TrainConfig {
  std::uint64_t seed = 0;       // model initialization
  std::uint64_t data_seed = 0;  // scene generation
  int epochs = 200;
  double learning_rate = 0.03;
  double huber_delta = kDefaultHuberDelta;
  LossWeights weights;
  bool image_branch = true;
  bool enable_p2i = true;
  bool enable_i2p = true;
  int train_scenes = 50;
  int val_scenes = 20;
  std::size_t hidden = 8;
  SceneOptions scene;
  // Ablation only: one run per seed for each of the four fusion settings.
  std::vector<std::uint64_t> seeds = {0, 1, 2};

  ModelConfig Model() const;
};

// Flat `key = value` lines; '#' starts a comment. Keys mirror the fields
// above (weights as weight_nlc, weight_sem2d, weight_sem3d, weight_center;
// seeds as a comma-separated list). Throws Error(kParseError) with the line
// for unknown keys or bad values and Error(kInvalidArgument) for values out
// of range.
TrainConfig ParseTrainConfig(std::string_view text);
void ValidateTrainConfig(const TrainConfig& config);

ModelInput InputFromScene(const SyntheticScene& scene);
Targets TargetsFromScene(const SyntheticScene& scene);

// Train scenes use data seeds MixSeed(data_seed, i); validation scenes are
// drawn from a disjoint index range.
std::vector<SyntheticScene> TrainScenes(const TrainConfig& config);
std::vector<SyntheticScene> ValidationScenes(const TrainConfig& config);

struct GradNorms {
  double point_from_point = 0.0;  // point-branch parameters, point objectives
  double point_from_image = 0.0;  // point-branch parameters, image objectives
  double image_from_image = 0.0;
  double image_from_point = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;  // mean over the epoch's steps, each before its update
  GradNorms grad_norms;  // mean over the epoch's steps
};

struct Evaluation {
  LossBreakdown losses;  // mean over scenes
  double point_branch = 0.0;
  // Mean of per-scene mMAE of the image NLC head (absent without an image
  // branch); per-axis means and scenes with at least one evaluated object.
  std::optional<double> mmae;
  double mmae_x = 0.0, mmae_y = 0.0, mmae_z = 0.0;
  std::size_t mmae_scenes = 0;
};

struct TrainingReport {
  TrainConfig config;
  ParameterCount parameters;
  std::vector<EpochRecord> epochs;
  bool diverged = false;
  std::optional<int> diverged_epoch;
  std::optional<Evaluation> validation;
  ToyModel model;
};

// Plain gradient descent, one step per scene in a fixed order (scenes are
// never batched together). Single-threaded and deterministic.
// Stops at the first non-finite loss and marks the report diverged.
TrainingReport Train(const TrainConfig& config,
                     const std::vector<SyntheticScene>& train,
                     const std::vector<SyntheticScene>& validation);
TrainingReport Train(const TrainConfig& config);

Evaluation Evaluate(const ToyModel& model, const ModelConfig& model_config,
                    const std::vector<SyntheticScene>& scenes,
                    const TrainConfig& config);

struct AblationRow {
  std::string name;
  bool enable_p2i = false;
  bool enable_i2p = false;
  std::vector<TrainingReport> runs;  // one per seed
  double mean_point_branch = 0.0;
  std::optional<double> mean_mmae;
  double mean_point_from_image = 0.0;  // final-epoch telemetry, mean over seeds
};

struct AblationReport {
  TrainConfig config;
  std::vector<AblationRow> rows;  // none, p2i, i2p, both
  bool diverged = false;
  // Relative improvement of p2i-only over no fusion.
  double p2i_gain = 0.0;
  bool ordering_holds = false;  // both <= p2i <= none and gain >= 2%
};

// Each seed s drives both the model initialization and the data, so every
// row sees identical scenes and initial weights.
AblationReport RunAblation(const TrainConfig& config);

std::string TrainingReportJson(const TrainingReport& report);
std::string TrainingCurvesCsv(const TrainingReport& report);
std::string AblationReportJson(const AblationReport& report);
std::string AblationCurvesCsv(const AblationReport& report);

}  // namespace nlcdet::pipeline
