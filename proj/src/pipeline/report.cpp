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

#include <charconv>
#include <cmath>
#include <string>

#include <json.hpp>

#include "nlcdet/pipeline/train.hpp"

namespace nlcdet::pipeline {
namespace {

using Json = nlohmann::ordered_json;

Json LossesJson(const LossBreakdown& l) {
  return Json{{"total", l.total},         {"image_nlc", l.image_nlc},
              {"sem2d", l.sem2d},         {"sem3d", l.sem3d},
              {"center", l.center},       {"point_nlc", l.point_nlc},
              {"point_branch", l.PointBranch()}};
}

Json ConfigJson(const TrainConfig& c) {
  return Json{{"seed", c.seed},
              {"data_seed", c.data_seed},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"huber_delta", c.huber_delta},
              {"weight_nlc", c.weights.nlc},
              {"weight_sem2d", c.weights.sem2d},
              {"weight_sem3d", c.weights.sem3d},
              {"weight_center", c.weights.center},
              {"image_branch", c.image_branch},
              {"enable_p2i", c.enable_p2i},
              {"enable_i2p", c.enable_i2p},
              {"train_scenes", c.train_scenes},
              {"val_scenes", c.val_scenes},
              {"hidden", c.hidden},
              {"seeds", c.seeds}};
}

Json GradJson(const GradNorms& g) {
  return Json{{"point_from_point", g.point_from_point},
              {"point_from_image", g.point_from_image},
              {"image_from_image", g.image_from_image},
              {"image_from_point", g.image_from_point}};
}

Json EvaluationJson(const Evaluation& e) {
  Json j{{"losses", LossesJson(e.losses)}, {"point_branch", e.point_branch}};
  if (e.mmae) {
    j["mmae"] = Json{{"mean", *e.mmae},
                     {"x", e.mmae_x},
                     {"y", e.mmae_y},
                     {"z", e.mmae_z},
                     {"scenes", e.mmae_scenes}};
  } else {
    j["mmae"] = nullptr;
  }
  return j;
}

Json RunJson(const TrainingReport& r, bool with_epochs) {
  Json j;
  j["parameters"] = Json{{"point", r.parameters.point},
                         {"image", r.parameters.image},
                         {"total", r.parameters.total()}};
  j["diverged"] = r.diverged;
  j["diverged_epoch"] = r.diverged_epoch ? Json(*r.diverged_epoch) : Json(nullptr);
  if (!r.epochs.empty()) {
    j["first_epoch"] = LossesJson(r.epochs.front().train);
    j["last_epoch"] = LossesJson(r.epochs.back().train);
    j["last_grad_norms"] = GradJson(r.epochs.back().grad_norms);
  }
  j["validation"] = r.validation ? EvaluationJson(*r.validation) : Json(nullptr);
  if (with_epochs) {
    Json epochs = Json::array();
    for (const EpochRecord& e : r.epochs) {
      epochs.push_back(Json{{"epoch", e.epoch},
                            {"train", LossesJson(e.train)},
                            {"grad_norms", GradJson(e.grad_norms)}});
    }
    j["epochs"] = std::move(epochs);
  }
  return j;
}

void AppendNumber(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    return;
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

constexpr const char* kCurveHeader =
    "epoch,total,image_nlc,sem2d,sem3d,center,point_nlc,grad_point_from_point,"
    "grad_point_from_image,grad_image_from_image,grad_image_from_point\n";

void AppendCurveRow(std::string& out, const EpochRecord& e) {
  out += std::to_string(e.epoch);
  for (double v : {e.train.total, e.train.image_nlc, e.train.sem2d, e.train.sem3d,
                   e.train.center, e.train.point_nlc, e.grad_norms.point_from_point,
                   e.grad_norms.point_from_image, e.grad_norms.image_from_image,
                   e.grad_norms.image_from_point}) {
    out += ',';
    AppendNumber(out, v);
  }
  out += '\n';
}

}  // namespace

std::string TrainingReportJson(const TrainingReport& report) {
  Json j{{"config", ConfigJson(report.config)}};
  j.update(RunJson(report, true));
  return j.dump(2) + "\n";
}

std::string TrainingCurvesCsv(const TrainingReport& report) {
  std::string out = kCurveHeader;
  for (const EpochRecord& e : report.epochs) AppendCurveRow(out, e);
  return out;
}

std::string AblationReportJson(const AblationReport& report) {
  Json rows = Json::array();
  for (const AblationRow& row : report.rows) {
    Json runs = Json::array();
    for (std::size_t i = 0; i < row.runs.size(); ++i) {
      Json run{{"seed", report.config.seeds[i]}};
      run.update(RunJson(row.runs[i], false));
      runs.push_back(std::move(run));
    }
    rows.push_back(Json{{"name", row.name},
                        {"enable_p2i", row.enable_p2i},
                        {"enable_i2p", row.enable_i2p},
                        {"mean_point_branch", row.mean_point_branch},
                        {"mean_mmae", row.mean_mmae ? Json(*row.mean_mmae) : Json(nullptr)},
                        {"mean_point_from_image_grad", row.mean_point_from_image},
                        {"runs", std::move(runs)}});
  }
  Json j{{"config", ConfigJson(report.config)},
         {"rows", std::move(rows)},
         {"p2i_gain", report.p2i_gain},
         {"ordering_holds", report.ordering_holds},
         {"diverged", report.diverged}};
  return j.dump(2) + "\n";
}

std::string AblationCurvesCsv(const AblationReport& report) {
  std::string out = std::string("row,seed,") + kCurveHeader;
  for (const AblationRow& row : report.rows) {
    for (std::size_t i = 0; i < row.runs.size(); ++i) {
      for (const EpochRecord& e : row.runs[i].epochs) {
        out += row.name;
        out += ',';
        out += std::to_string(report.config.seeds[i]);
        out += ',';
        AppendCurveRow(out, e);
      }
    }
  }
  return out;
}

}  // namespace nlcdet::pipeline
