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

#include "nlcdet/cli/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "nlcdet/cli/csv.hpp"
#include "nlcdet/error.hpp"
#include "nlcdet/gradcheck.hpp"
#include "nlcdet/kitti_io.hpp"
#include "nlcdet/metrics.hpp"
#include "nlcdet/nlc.hpp"
#include "nlcdet/pipeline/train.hpp"
#include "nlcdet/solver.hpp"

namespace nlcdet::cli {
namespace {

using Json = nlohmann::ordered_json;

// An Error raised while reading a named input file.
struct FileError {
  std::string path;
  Error error;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::shared_ptr<spdlog::logger> log;
};

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError{path, Error(ErrorCode::kIoError, "cannot open file")};
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<std::uint8_t> ReadBytes(const std::string& path) {
  const std::string text = ReadText(path);
  return std::vector<std::uint8_t>(text.begin(), text.end());
}

template <typename Fn>
auto ParseFile(const std::string& path, Fn parse) {
  try {
    return parse();
  } catch (const Error& e) {
    throw FileError{path, e};
  }
}

void WriteFile(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.close();
  if (!out) throw FileError{path, Error(ErrorCode::kIoError, "cannot write file")};
}

// Writes to `path` when given, otherwise to standard output.
void Emit(const Context& ctx, const std::string& path, const std::string& data) {
  if (path.empty()) {
    ctx.out << data;
  } else {
    WriteFile(path, data);
  }
}

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

Json BoxJson(const Box3D& box) {
  return Json{{"x", box.center().x()}, {"y", box.center().y()}, {"z", box.center().z()},
              {"l", box.length()},     {"w", box.width()},      {"h", box.height()},
              {"yaw", box.yaw()}};
}

Box3D BoxFromJson(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "expected a JSON object");
  const auto get = [&](const char* key) {
    if (!j.contains(key)) {
      throw Error(ErrorCode::kMissingField, std::string("missing field '") + key + "'");
    }
    if (!j[key].is_number()) {
      throw Error(ErrorCode::kParseError, std::string("field '") + key + "' is not a number");
    }
    return j[key].get<double>();
  };
  return Box3D(Vec3(get("x"), get("y"), get("z")), get("l"), get("w"), get("h"), get("yaw"));
}

// ---- nlcmap ---------------------------------------------------------------

struct NlcmapArgs {
  std::string calib, label, velodyne, out, csv;
  std::uint32_t height = 375;
  std::uint32_t width = 1242;
};

int RunNlcmap(const Context& ctx, const NlcmapArgs& a) {
  const kitti::Calib calib =
      ParseFile(a.calib, [&] { return kitti::ParseCalib(ReadText(a.calib)); });
  const Calibration calibration = ParseFile(a.calib, [&] { return kitti::ToCalibration(calib); });
  const std::vector<kitti::Label> labels =
      ParseFile(a.label, [&] { return kitti::ParseLabels(ReadText(a.label)); });
  const PointCloud cloud = ParseFile(
      a.velodyne, [&] { return kitti::ReadVelodyne(ReadBytes(a.velodyne)); });

  std::vector<Box3D> boxes;
  std::vector<std::size_t> label_index;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].IsDontCare()) continue;
    boxes.push_back(ParseFile(a.label, [&] { return kitti::LabelToLidarBox(labels[i], calib); }));
    label_index.push_back(i);
  }
  const PointCloud in_range = kitti::FilterDetectionRange(cloud);
  ctx.log->info("{} of {} points in range, {} objects", in_range.size(), cloud.size(),
                boxes.size());
  const GtNlcMap gt = BuildGtNlcMapDetailed(in_range, boxes, calibration, a.height, a.width);

  const std::vector<std::uint8_t> encoded = EncodeNlcMap(gt.map);
  WriteFile(a.out, std::string_view(reinterpret_cast<const char*>(encoded.data()),
                                    encoded.size()));
  if (!a.csv.empty()) WriteFile(a.csv, NlcMapToCsv(gt.map));

  std::vector<std::size_t> counts(boxes.size(), 0);
  for (const int owner : gt.owner) {
    if (owner >= 0) ++counts[static_cast<std::size_t>(owner)];
  }
  Json objects = Json::array();
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    objects.push_back({{"label_line", label_index[b] + 1},
                       {"type", labels[label_index[b]].type},
                       {"foreground_pixels", counts[b]}});
  }
  ctx.out << Dump({{"height", a.height},
                   {"width", a.width},
                   {"points_in_range", in_range.size()},
                   {"valid_pixels", gt.map.CountValid()},
                   {"objects", objects}});
  return kExitOk;
}

// ---- solve ----------------------------------------------------------------

struct SolveArgs {
  std::string corrs, init, out;
  bool noise_report = false;
  std::uint64_t seed = 0;
  int trials = 100;
};

int RunSolve(const Context& ctx, const SolveArgs& a) {
  const std::vector<Correspondence> corrs =
      ParseFile(a.corrs, [&] { return ParseCorrespondencesCsv(ReadText(a.corrs)); });
  std::optional<Box3D> init;
  if (!a.init.empty()) init = ParseFile(a.init, [&] { return BoxFromJson(ReadText(a.init)); });

  const SolveReport report = SolveBox(corrs, init);
  const DofReport dof = DofAnalysis(corrs, report.box);
  ctx.log->info("solved in {} iterations, rms {}", report.iterations, report.rms_residual);

  Json j{{"box", BoxJson(report.box)},
         {"rms_residual", report.rms_residual},
         {"iterations", report.iterations},
         {"condition_estimate", report.condition_estimate},
         {"converged", report.converged},
         {"degenerate", report.degenerate},
         {"rms_history", report.rms_history},
         {"dof", {{"equations", dof.equations},
                  {"unknowns", dof.unknowns},
                  {"jacobian_rank", dof.jacobian_rank}}}};
  if (a.noise_report) {
    constexpr std::size_t kSweepPoints = 50;
    const std::vector<double> sigmas = {0.0, 0.005, 0.01, 0.02, 0.05};
    Json levels = Json::array();
    for (const NoiseLevel& level :
         NoiseSweep(report.box, sigmas, a.trials, kSweepPoints, a.seed)) {
      levels.push_back({{"sigma", level.sigma},
                        {"trials", level.trials},
                        {"points", kSweepPoints},
                        {"converged", level.converged},
                        {"median_center_error", level.median_center_error},
                        {"median_dim_error", level.median_dim_error},
                        {"median_yaw_error", level.median_yaw_error}});
    }
    j["noise_report"] = {{"seed", a.seed}, {"levels", levels}};
  }
  Emit(ctx, a.out, Dump(j));
  return kExitOk;
}

// ---- gradcheck ------------------------------------------------------------

struct GradcheckArgs {
  std::string op = "all";
  GradcheckOptions options;
};

int RunGradcheckCommand(const Context& ctx, const GradcheckArgs& a) {
  const std::vector<GradcheckResult> results = RunGradcheck(a.op, a.options);
  bool all_passed = true;
  Json rows = Json::array();
  for (const auto& r : results) {
    all_passed = all_passed && r.passed();
    rows.push_back({{"name", r.name},
                    {"trials", r.trials},
                    {"max_error", r.max_error},
                    {"threshold", r.threshold},
                    {"passed", r.passed()}});
    if (!r.passed()) {
      ctx.log->error("{}: error {} exceeds {}", r.name, r.max_error, r.threshold);
    }
  }
  ctx.out << Dump({{"op", a.op},
                   {"trials", a.options.trials},
                   {"seed", a.options.seed},
                   {"results", rows},
                   {"passed", all_passed}});
  return all_passed ? kExitOk : kExitCheckFailed;
}

// ---- train / ablation -----------------------------------------------------

struct TrainArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

pipeline::TrainConfig LoadConfig(const std::string& path) {
  return ParseFile(path, [&] {
    pipeline::TrainConfig config = pipeline::ParseTrainConfig(ReadText(path));
    pipeline::ValidateTrainConfig(config);
    return config;
  });
}

void PrepareOutDir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FileError{dir, Error(ErrorCode::kIoError, ec.message())};
}

int RunTrain(const Context& ctx, const TrainArgs& a) {
  pipeline::TrainConfig config = LoadConfig(a.config);
  if (a.seed) {
    config.seed = *a.seed;
    config.data_seed = *a.seed;
  }
  ctx.log->info("training: {} scenes, {} epochs, seed {}", config.train_scenes, config.epochs,
                config.seed);
  const pipeline::TrainingReport report = pipeline::Train(config);
  const std::string json = pipeline::TrainingReportJson(report);
  if (a.out.empty()) {
    ctx.out << json;
  } else {
    PrepareOutDir(a.out);
    WriteFile(a.out + "/training_report.json", json);
    WriteFile(a.out + "/training_curves.csv", pipeline::TrainingCurvesCsv(report));
  }
  if (report.diverged) {
    ctx.log->error("training diverged at epoch {}", report.diverged_epoch.value_or(-1));
    return kExitCheckFailed;
  }
  return kExitOk;
}

int RunAblationCommand(const Context& ctx, const TrainArgs& a) {
  const pipeline::TrainConfig config = LoadConfig(a.config);
  ctx.log->info("ablation: 4 rows x {} seeds", config.seeds.size());
  const pipeline::AblationReport report = pipeline::RunAblation(config);
  const std::string json = pipeline::AblationReportJson(report);
  if (a.out.empty()) {
    ctx.out << json;
  } else {
    PrepareOutDir(a.out);
    WriteFile(a.out + "/ablation_report.json", json);
    WriteFile(a.out + "/ablation_curves.csv", pipeline::AblationCurvesCsv(report));
  }
  if (report.diverged) {
    ctx.log->error("a training run diverged");
    return kExitCheckFailed;
  }
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string dets, gts, out;
  double iou = 0.7;
  bool r11 = false;
};

int RunEval(const Context& ctx, const EvalArgs& a) {
  EvalFrame frame;
  frame.detections = ParseFile(a.dets, [&] { return ParseDetectionsCsv(ReadText(a.dets)); });
  GroundTruthTable gts = ParseFile(a.gts, [&] { return ParseGroundTruthCsv(ReadText(a.gts)); });
  frame.ground_truth = std::move(gts.boxes);
  frame.ground_truth_class = std::move(gts.classes);
  const RecallSampling sampling = a.r11 ? RecallSampling::kR11 : RecallSampling::kR40;
  const std::vector<EvalFrame> frames = {frame};
  Json classes = Json::array();
  for (const ClassAp& c : EvaluateDetections(frames, a.iou, sampling)) {
    classes.push_back({{"class", c.class_id},
                       {"num_gt", c.num_gt},
                       {"num_detections", c.num_detections},
                       {"true_positives", c.true_positives},
                       {"ap", c.ap}});
  }
  Emit(ctx, a.out, Dump({{"iou_threshold", a.iou},
                         {"sampling", a.r11 ? "R11" : "R40"},
                         {"classes", classes}}));
  return kExitOk;
}

std::shared_ptr<spdlog::logger> MakeLogger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err);
  auto log = std::make_shared<spdlog::logger>("nlcdet", sink);
  log->set_pattern("nlcdet: %l: %v");
  log->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("NLCDET_LOG")) {
    const std::string level = env;
    if (level == "error" || level == "warn" || level == "info" || level == "debug") {
      log->set_level(spdlog::level::from_str(level));
    } else {
      log->warn("ignoring NLCDET_LOG='{}'; expected error, warn, info or debug", level);
    }
  }
  return log;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"NLC map, box recovery, gradient checks, toy training and evaluation", "nlcdet"};
  app.require_subcommand(1);

  NlcmapArgs nlcmap;
  auto* cmd_nlcmap = app.add_subcommand("nlcmap", "Build the ground-truth NLC map of a KITTI frame");
  cmd_nlcmap->add_option("--calib", nlcmap.calib, "KITTI calibration file")->required();
  cmd_nlcmap->add_option("--label", nlcmap.label, "KITTI label file")->required();
  cmd_nlcmap->add_option("--velodyne", nlcmap.velodyne, "Velodyne .bin file")->required();
  cmd_nlcmap->add_option("--out", nlcmap.out, "Output NLCM file")->required();
  cmd_nlcmap->add_option("--csv", nlcmap.csv, "Also write valid pixels as CSV");
  cmd_nlcmap->add_option("--height", nlcmap.height, "Image height")->capture_default_str()
      ->check(CLI::Range(1u, 65535u));
  cmd_nlcmap->add_option("--width", nlcmap.width, "Image width")->capture_default_str()
      ->check(CLI::Range(1u, 65535u));

  SolveArgs solve;
  auto* cmd_solve = app.add_subcommand("solve", "Fit a 7-DOF box to point/NLC correspondences");
  cmd_solve->add_option("--corrs", solve.corrs, "CSV x,y,z,x_nlc,y_nlc,z_nlc")->required();
  cmd_solve->add_option("--init", solve.init, "JSON initial box {x,y,z,l,w,h,yaw}");
  cmd_solve->add_flag("--noise-report", solve.noise_report, "Run the NLC noise sweep");
  cmd_solve->add_option("--seed", solve.seed, "Noise sweep seed")->capture_default_str();
  cmd_solve->add_option("--trials", solve.trials, "Noise sweep trials per level")
      ->capture_default_str()->check(CLI::Range(1, 1000000));
  cmd_solve->add_option("--out", solve.out, "Write the report here instead of stdout");

  GradcheckArgs gradcheck;
  auto* cmd_grad = app.add_subcommand("gradcheck", "Compare backward passes with finite differences");
  std::vector<std::string> ops = {"all"};
  ops.insert(ops.end(), GradcheckGroups().begin(), GradcheckGroups().end());
  cmd_grad->add_option("--op", gradcheck.op, "Operator group")->capture_default_str()
      ->check(CLI::IsMember(ops));
  cmd_grad->add_option("--trials", gradcheck.options.trials, "Random instances per operator")
      ->capture_default_str()->check(CLI::Range(1, 1000000));
  cmd_grad->add_option("--seed", gradcheck.options.seed, "Seed")->capture_default_str();
  cmd_grad->add_flag("--perturb-backward", gradcheck.options.perturb_backward)->group("");

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "Train the toy two-branch model");
  cmd_train->add_option("--config", train.config, "key = value config file")->required();
  cmd_train->add_option("--out", train.out, "Directory for report JSON and curves CSV");
  cmd_train->add_option("--seed", train.seed, "Override the model and data seed");

  TrainArgs ablation;
  auto* cmd_ablation = app.add_subcommand("ablation", "Run the four-row fusion ablation");
  cmd_ablation->add_option("--config", ablation.config, "key = value config file")->required();
  cmd_ablation->add_option("--out", ablation.out, "Directory for report JSON and curves CSV");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "Per-class average precision");
  cmd_eval->add_option("--dets", eval.dets, "CSV x,y,z,l,w,h,yaw,score,class")->required();
  cmd_eval->add_option("--gts", eval.gts, "CSV x,y,z,l,w,h,yaw,class")->required();
  cmd_eval->add_option("--iou", eval.iou, "IoU threshold in (0, 1]")->capture_default_str()
      ->check([](const std::string& s) -> std::string {
        double v = 0.0;
        try {
          v = std::stod(s);
        } catch (...) {
          return "not a number";
        }
        return v > 0.0 && v <= 1.0 ? "" : "must be in (0, 1]";
      });
  cmd_eval->add_flag("--r11", eval.r11, "Use 11 recall positions instead of 40");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Context ctx{out, err, MakeLogger(err)};
  try {
    if (*cmd_nlcmap) return RunNlcmap(ctx, nlcmap);
    if (*cmd_solve) return RunSolve(ctx, solve);
    if (*cmd_grad) return RunGradcheckCommand(ctx, gradcheck);
    if (*cmd_train) return RunTrain(ctx, train);
    if (*cmd_ablation) return RunAblationCommand(ctx, ablation);
    if (*cmd_eval) return RunEval(ctx, eval);
  } catch (const FileError& e) {
    err << "error: " << e.path;
    if (e.error.line() > 0) err << ":" << e.error.line();
    if (e.error.column() > 0) err << ":" << e.error.column();
    err << ": " << e.error.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace nlcdet::cli
