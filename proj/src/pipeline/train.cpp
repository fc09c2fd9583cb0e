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

#include "nlcdet/pipeline/train.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "nlcdet/error.hpp"
#include "nlcdet/random.hpp"
#include "nlcdet/nlc.hpp"

namespace nlcdet::pipeline {
namespace {

constexpr std::uint64_t kValidationOffset = 1'000'000;

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void BadValue(int line, std::string_view key, std::string_view value) {
  throw Error(ErrorCode::kParseError,
              "line " + std::to_string(line) + ": bad value '" + std::string(value) +
                  "' for " + std::string(key),
              line, 0);
}

template <typename T>
T ParseNumber(int line, std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    BadValue(line, key, value);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) BadValue(line, key, value);
  }
  return out;
}

bool ParseBool(int line, std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  BadValue(line, key, value);
}

double SquaredNorm(const ToyModelGrad& grad, const ModelConfig& config, Branch branch) {
  double total = 0.0;
  ForEachLayer(grad, config, [&](const std::string&, Branch b, const DenseLayerGrad& g) {
    if (b == branch) total += g.SquaredNorm();
  });
  return total;
}

void AddLosses(LossBreakdown* dst, const LossBreakdown& src) {
  dst->image_nlc += src.image_nlc;
  dst->sem2d += src.sem2d;
  dst->sem3d += src.sem3d;
  dst->center += src.center;
  dst->point_nlc += src.point_nlc;
  dst->total += src.total;
}

void ScaleLosses(LossBreakdown* l, double s) {
  l->image_nlc *= s;
  l->sem2d *= s;
  l->sem3d *= s;
  l->center *= s;
  l->point_nlc *= s;
  l->total *= s;
}

bool AllFinite(const LossBreakdown& l) {
  return std::isfinite(l.image_nlc) && std::isfinite(l.sem2d) &&
         std::isfinite(l.sem3d) && std::isfinite(l.center) &&
         std::isfinite(l.point_nlc) && std::isfinite(l.total);
}

}  // namespace

ModelConfig TrainConfig::Model() const {
  ModelConfig m;
  m.point_in = kPointChannels;
  m.image_in = kImageChannels;
  m.hidden = hidden;
  m.image_branch = image_branch;
  m.enable_p2i = enable_p2i;
  m.enable_i2p = enable_i2p;
  return m;
}

TrainConfig ParseTrainConfig(std::string_view text) {
  TrainConfig config;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected 'key = value'",
                  line_no, 0);
    }
    const std::string_view key = Trim(line.substr(0, eq));
    const std::string_view value = Trim(line.substr(eq + 1));
    if (key == "seed") {
      config.seed = ParseNumber<std::uint64_t>(line_no, key, value);
    } else if (key == "data_seed") {
      config.data_seed = ParseNumber<std::uint64_t>(line_no, key, value);
    } else if (key == "epochs") {
      config.epochs = ParseNumber<int>(line_no, key, value);
    } else if (key == "learning_rate") {
      config.learning_rate = ParseNumber<double>(line_no, key, value);
    } else if (key == "huber_delta") {
      config.huber_delta = ParseNumber<double>(line_no, key, value);
    } else if (key == "weight_nlc") {
      config.weights.nlc = ParseNumber<double>(line_no, key, value);
    } else if (key == "weight_sem2d") {
      config.weights.sem2d = ParseNumber<double>(line_no, key, value);
    } else if (key == "weight_sem3d") {
      config.weights.sem3d = ParseNumber<double>(line_no, key, value);
    } else if (key == "weight_center") {
      config.weights.center = ParseNumber<double>(line_no, key, value);
    } else if (key == "image_branch") {
      config.image_branch = ParseBool(line_no, key, value);
    } else if (key == "enable_p2i") {
      config.enable_p2i = ParseBool(line_no, key, value);
    } else if (key == "enable_i2p") {
      config.enable_i2p = ParseBool(line_no, key, value);
    } else if (key == "train_scenes") {
      config.train_scenes = ParseNumber<int>(line_no, key, value);
    } else if (key == "val_scenes") {
      config.val_scenes = ParseNumber<int>(line_no, key, value);
    } else if (key == "hidden") {
      config.hidden = ParseNumber<std::size_t>(line_no, key, value);
    } else if (key == "seeds") {
      config.seeds.clear();
      std::size_t p = 0;
      while (p <= value.size()) {
        std::size_t q = value.find(',', p);
        if (q == std::string_view::npos) q = value.size();
        config.seeds.push_back(
            ParseNumber<std::uint64_t>(line_no, key, Trim(value.substr(p, q - p))));
        p = q + 1;
      }
    } else {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": unknown key '" +
                      std::string(key) + "'",
                  line_no, 0);
    }
  }
  ValidateTrainConfig(config);
  return config;
}

void ValidateTrainConfig(const TrainConfig& c) {
  const auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, what);
  };
  if (c.epochs < 1) fail("epochs must be positive");
  if (c.train_scenes < 1 || c.val_scenes < 1) fail("scene counts must be positive");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    fail("learning_rate must be finite and non-negative");
  }
  if (!(c.huber_delta > 0.0)) fail("huber_delta must be positive");
  if (!(c.weights.nlc >= 0.0 && c.weights.sem2d >= 0.0 && c.weights.sem3d >= 0.0 &&
        c.weights.center >= 0.0)) {
    fail("loss weights must be non-negative");
  }
  if (c.hidden < 1) fail("hidden must be positive");
  if (!c.image_branch && (c.enable_p2i || c.enable_i2p)) {
    fail("fusion requires image_branch = true");
  }
  if (c.seeds.empty()) fail("seeds must not be empty");
}

ModelInput InputFromScene(const SyntheticScene& scene) {
  return {scene.point_inputs, scene.image, scene.coords};
}

Targets TargetsFromScene(const SyntheticScene& scene) {
  return {scene.point_nlc, scene.center_offsets, scene.foreground, scene.sem3d,
          scene.sem2d};
}

std::vector<SyntheticScene> TrainScenes(const TrainConfig& config) {
  std::vector<SyntheticScene> scenes;
  scenes.reserve(static_cast<std::size_t>(config.train_scenes));
  for (int i = 0; i < config.train_scenes; ++i) {
    scenes.push_back(
        GenerateScene(MixSeed(config.data_seed, static_cast<std::uint64_t>(i)), config.scene));
  }
  return scenes;
}

std::vector<SyntheticScene> ValidationScenes(const TrainConfig& config) {
  std::vector<SyntheticScene> scenes;
  scenes.reserve(static_cast<std::size_t>(config.val_scenes));
  for (int i = 0; i < config.val_scenes; ++i) {
    scenes.push_back(GenerateScene(
        MixSeed(config.data_seed, kValidationOffset + static_cast<std::uint64_t>(i)),
        config.scene));
  }
  return scenes;
}

Evaluation Evaluate(const ToyModel& model, const ModelConfig& model_config,
                    const std::vector<SyntheticScene>& scenes,
                    const TrainConfig& config) {
  Evaluation eval;
  double mmae_sum = 0.0;
  for (const SyntheticScene& scene : scenes) {
    const ModelInput input = InputFromScene(scene);
    const ForwardResult fwd = Forward(model, model_config, input);
    const LossGrads lg = ComputeLosses(model_config, input, fwd, TargetsFromScene(scene),
                                       config.weights, config.huber_delta);
    AddLosses(&eval.losses, lg.losses);
    if (model_config.image_branch) {
      const auto objects = ObjectPixelsFromOwners(scene.gt, scene.boxes);
      const MmaeResult m =
          Mmae(scene.gt.map, TensorFromActivations(fwd.image_nlc, fwd.height, fwd.width),
               objects);
      if (m.evaluated > 0) {
        eval.mmae_x += m.x;
        eval.mmae_y += m.y;
        eval.mmae_z += m.z;
        mmae_sum += (m.x + m.y + m.z) / 3.0;
        ++eval.mmae_scenes;
      }
    }
  }
  if (!scenes.empty()) ScaleLosses(&eval.losses, 1.0 / static_cast<double>(scenes.size()));
  eval.point_branch = eval.losses.PointBranch();
  if (eval.mmae_scenes > 0) {
    const double inv = 1.0 / static_cast<double>(eval.mmae_scenes);
    eval.mmae = mmae_sum * inv;
    eval.mmae_x *= inv;
    eval.mmae_y *= inv;
    eval.mmae_z *= inv;
  }
  return eval;
}

TrainingReport Train(const TrainConfig& config, const std::vector<SyntheticScene>& train,
                     const std::vector<SyntheticScene>& validation) {
  ValidateTrainConfig(config);
  if (train.empty()) throw Error(ErrorCode::kInvalidArgument, "no training scenes");
  const ModelConfig mc = config.Model();
  TrainingReport report{config, {}, {}, false, std::nullopt, std::nullopt,
                        InitModel(mc, config.seed)};
  ToyModel& model = report.model;
  report.parameters = CountParameters(model, mc);

  std::vector<ModelInput> inputs;
  std::vector<Targets> targets;
  for (const SyntheticScene& s : train) {
    inputs.push_back(InputFromScene(s));
    targets.push_back(TargetsFromScene(s));
  }
  const double inv_scenes = 1.0 / static_cast<double>(train.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    bool finite = true;
    for (std::size_t i = 0; i < inputs.size() && finite; ++i) {
      const ForwardResult fwd = Forward(model, mc, inputs[i]);
      const LossGrads lg =
          ComputeLosses(mc, inputs[i], fwd, targets[i], config.weights, config.huber_delta);
      AddLosses(&record.train, lg.losses);
      finite = AllFinite(lg.losses);
      if (!finite) break;

      ToyModelGrad from_image = ZeroGrad(model, mc);
      ToyModelGrad from_point = ZeroGrad(model, mc);
      Backward(model, mc, inputs[i], fwd, lg.image_terms, &from_image);
      Backward(model, mc, inputs[i], fwd, lg.point_terms, &from_point);
      GradNorms& g = record.grad_norms;
      g.point_from_point += std::sqrt(SquaredNorm(from_point, mc, Branch::kPoint));
      g.point_from_image += std::sqrt(SquaredNorm(from_image, mc, Branch::kPoint));
      g.image_from_image += std::sqrt(SquaredNorm(from_image, mc, Branch::kImage));
      g.image_from_point += std::sqrt(SquaredNorm(from_point, mc, Branch::kImage));

      std::vector<const DenseLayerGrad*> g_image;
      std::vector<const DenseLayerGrad*> g_point;
      ForEachLayer(from_image, mc, [&](const std::string&, Branch, const DenseLayerGrad& d) {
        g_image.push_back(&d);
      });
      ForEachLayer(from_point, mc, [&](const std::string&, Branch, const DenseLayerGrad& d) {
        g_point.push_back(&d);
      });
      std::size_t k = 0;
      ForEachLayer(model, mc, [&](const std::string&, Branch, DenseLayer& layer) {
        layer.weights -= config.learning_rate * (g_image[k]->weights + g_point[k]->weights);
        layer.bias -= config.learning_rate * (g_image[k]->bias + g_point[k]->bias);
        ++k;
      });
    }
    ScaleLosses(&record.train, inv_scenes);
    record.grad_norms.point_from_point *= inv_scenes;
    record.grad_norms.point_from_image *= inv_scenes;
    record.grad_norms.image_from_image *= inv_scenes;
    record.grad_norms.image_from_point *= inv_scenes;
    report.epochs.push_back(record);
    if (!finite || !AllFinite(record.train)) {
      report.diverged = true;
      report.diverged_epoch = epoch;
      return report;
    }
  }

  if (!validation.empty()) {
    report.validation = Evaluate(model, mc, validation, config);
    if (!std::isfinite(report.validation->losses.total)) {
      report.diverged = true;
      report.diverged_epoch = config.epochs;
    }
  }
  return report;
}

TrainingReport Train(const TrainConfig& config) {
  ValidateTrainConfig(config);
  return Train(config, TrainScenes(config), ValidationScenes(config));
}

AblationReport RunAblation(const TrainConfig& config) {
  ValidateTrainConfig(config);
  if (config.seeds.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "the ablation needs at least two seeds");
  }
  AblationReport report;
  report.config = config;
  const struct {
    const char* name;
    bool p2i;
    bool i2p;
  } kRows[] = {{"no_fusion", false, false},
               {"p2i_only", true, false},
               {"i2p_only", false, true},
               {"bidirectional", true, true}};
  for (const auto& r : kRows) report.rows.push_back({r.name, r.p2i, r.i2p, {}, 0.0, {}, 0.0});

  for (std::uint64_t seed : config.seeds) {
    TrainConfig run = config;
    run.seed = seed;
    run.data_seed = seed;
    run.image_branch = true;
    const auto train = TrainScenes(run);
    const auto validation = ValidationScenes(run);
    for (AblationRow& row : report.rows) {
      run.enable_p2i = row.enable_p2i;
      run.enable_i2p = row.enable_i2p;
      row.runs.push_back(Train(run, train, validation));
      if (row.runs.back().diverged) report.diverged = true;
    }
  }

  const double inv = 1.0 / static_cast<double>(config.seeds.size());
  for (AblationRow& row : report.rows) {
    double mmae = 0.0;
    bool have_mmae = true;
    for (const TrainingReport& run : row.runs) {
      if (!run.validation) {
        row.mean_point_branch = std::nan("");
        have_mmae = false;
        continue;
      }
      row.mean_point_branch += run.validation->point_branch * inv;
      if (run.validation->mmae) {
        mmae += *run.validation->mmae * inv;
      } else {
        have_mmae = false;
      }
      if (!run.epochs.empty()) {
        row.mean_point_from_image += run.epochs.back().grad_norms.point_from_image * inv;
      }
    }
    if (have_mmae) row.mean_mmae = mmae;
  }
  const double none = report.rows[0].mean_point_branch;
  const double p2i = report.rows[1].mean_point_branch;
  const double both = report.rows[3].mean_point_branch;
  report.p2i_gain = (none - p2i) / none;
  report.ordering_holds = both <= p2i && p2i <= none && report.p2i_gain >= 0.02;
  return report;
}

}  // namespace nlcdet::pipeline
