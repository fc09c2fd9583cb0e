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

// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]; no arguments runs all ten.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "../support.hpp"
#include "nlcdet/cli/csv.hpp"
#include "nlcdet/error.hpp"
#include "nlcdet/geometry.hpp"
#include "nlcdet/gradcheck.hpp"
#include "nlcdet/kitti_io.hpp"
#include "nlcdet/metrics.hpp"
#include "nlcdet/nlc.hpp"
#include "nlcdet/pipeline/scene.hpp"
#include "nlcdet/pipeline/train.hpp"
#include "nlcdet/solver.hpp"

using namespace nlcdet;
using nlcdet::testing::FixturePath;
using nlcdet::testing::InsideBoxOracle;
using nlcdet::testing::RandomBox;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;
};

// Collects failed checks; the first few are kept for the report.
class Checker {
 public:
  void Expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Outcome Finish(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " failed check(s): " + notes_ + " | " + summary};
  }

 private:
  int failures_ = 0;
  std::string notes_;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// 1. NLC round trip and containment.
Outcome NlcRoundTrip() {
  Checker check;
  Rng rng(1001);
  double worst = 0.0;
  int inside = 0;
  for (int i = 0; i < 100000; ++i) {
    const Box3D box = RandomBox(rng);
    const NlcValue n(rng.Uniform(), rng.Uniform(), rng.Uniform());
    const double err = (LidarToNlc(NlcToLidar(n, box), box) - n).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    check.Expect(err <= 1e-12, Fmt("round trip error %.3g", err));

    const Vec3 p = box.center() + Vec3(rng.Uniform(-0.7, 0.7) * box.length(),
                                       rng.Uniform(-0.7, 0.7) * box.width(),
                                       rng.Uniform(-0.7, 0.7) * box.height());
    const NlcValue q = LidarToNlc(p, box);
    const bool in_unit = (q.array() >= 0.0).all() && (q.array() <= 1.0).all();
    const bool in_box = InsideBoxOracle(p, box);
    inside += in_box ? 1 : 0;
    if (in_unit) check.Expect(InsideBoxOracle(p, box, 1e-9), "unit NLC outside the box");
    if (in_box) {
      check.Expect((q.array() >= -1e-9).all() && (q.array() <= 1.0 + 1e-9).all(),
                   "inside point with NLC outside [0,1]^3");
    }
  }
  return check.Finish(Fmt("100000 pairs, max round-trip error %.2e, %d inside points", worst, inside));
}

// 2. Projection laws.
Outcome Projection() {
  Checker check;
  Rng rng(1002);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 q(rng.Uniform(-5, 5), rng.Uniform(-5, 5), rng.Uniform(0.1, 50));
    const ImageProjection r = ProjectPoint(q, Calibration::Identity());
    check.Expect(r.u == q.x() / q.z() && r.v == q.y() / q.z() && r.depth == q.z(),
                 "identity projection is not (x/z, y/z, z)");
  }
  Mat3 k;
  k << 700, 0, 600, 0, 700, 180, 0, 0, 1;
  const ImageProjection p = ProjectPoint(Vec3(1, 0, 10), Calibration(k, Mat3::Identity(), Vec3::Zero()));
  // (700 * 1 + 600 * 10) / 10 = 670, (180 * 10) / 10 = 180.
  check.Expect(std::abs(p.u - 670.0) <= 1e-9 && std::abs(p.v - 180.0) <= 1e-9 &&
                   std::abs(p.depth - 10.0) <= 1e-9,
               Fmt("worked example gave (%.12g, %.12g, %.12g)", p.u, p.v, p.depth));
  return check.Finish(Fmt("identity law on 10000 points; worked example (%.9f, %.9f, %.9f)", p.u,
                          p.v, p.depth));
}

// 3. Gradient checks.
Outcome Gradients() {
  Checker check;
  GradcheckOptions options;
  options.trials = 100;
  std::string summary;
  for (const auto& r : RunGradcheck("all", options)) {
    const bool adjoint = r.name.find("adjoint") != std::string::npos;
    const double limit = adjoint ? 1e-10 : (r.name == "model" ? 1e-5 : 1e-6);
    check.Expect(r.trials >= 100, r.name + " ran too few trials");
    check.Expect(r.max_error < limit, Fmt("%s error %.3g >= %.0e", r.name.c_str(), r.max_error, limit));
    summary += Fmt("%s%s %.1e", summary.empty() ? "" : ", ", r.name.c_str(), r.max_error);
  }
  return check.Finish("100 trials each; " + summary);
}

// 4. Box solver recovery and degrees of freedom.
Outcome Solver() {
  Checker check;
  Rng rng(1004);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Box3D truth = RandomBox(rng);
    std::vector<Correspondence> corrs(4 + rng.UniformIndex(29));
    for (auto& c : corrs) {
      c.nlc = NlcValue(rng.Uniform(), rng.Uniform(), rng.Uniform());
      c.point = NlcToLidar(c.nlc, truth);
    }
    const Box3D init(truth.center() + Vec3(rng.Uniform(-0.3, 0.3), rng.Uniform(-0.3, 0.3),
                                           rng.Uniform(-0.3, 0.3)),
                     truth.length() * (1 + rng.Uniform(-0.1, 0.1)),
                     truth.width() * (1 + rng.Uniform(-0.1, 0.1)),
                     truth.height() * (1 + rng.Uniform(-0.1, 0.1)),
                     truth.yaw() + rng.Uniform(-0.15, 0.15));
    const SolveReport r = SolveBox(corrs, init);
    const double err = std::max({(r.box.center() - truth.center()).cwiseAbs().maxCoeff(),
                                 (r.box.dims() - truth.dims()).cwiseAbs().maxCoeff(),
                                 std::abs(NormalizeAngle(r.box.yaw() - truth.yaw()))});
    worst = std::max(worst, err);
    check.Expect(err < 1e-6, Fmt("instance %d parameter error %.3g", t, err));
  }

  std::size_t min_rank = 7;
  for (int t = 0; t < 100; ++t) {
    const Box3D b = RandomBox(rng);
    std::vector<Correspondence> three(3);
    for (auto& c : three) {
      c.nlc = NlcValue(rng.Uniform(), rng.Uniform(), rng.Uniform());
      c.point = NlcToLidar(c.nlc, b);
    }
    const DofReport d = DofAnalysis(three, b);
    min_rank = std::min(min_rank, d.jacobian_rank);
    check.Expect(d.jacobian_rank == 7, Fmt("3 generic points gave rank %zu", d.jacobian_rank));
  }
  // Points confined to the mid-height plane leave the height unobservable.
  const Box3D truth(Vec3(2, 1, 0), 4, 2, 1.5, 0.4);
  std::vector<Correspondence> planar(7);
  for (auto& c : planar) {
    c.nlc = NlcValue(rng.Uniform(), rng.Uniform(), 0.5);
    c.point = NlcToLidar(c.nlc, truth);
  }
  const std::size_t planar_rank = DofAnalysis(planar, truth).jacobian_rank;
  check.Expect(planar_rank <= 6, Fmt("coplanar points gave rank %zu", planar_rank));
  return check.Finish(Fmt("1000 instances, max parameter error %.2e; 3-point rank %zu, coplanar rank %zu",
                          worst, min_rank, planar_rank));
}

// 5. IoU against a Monte-Carlo volume oracle.
Outcome IouChecks() {
  Checker check;
  Rng rng(1005);
  Rng sampler(1006);
  double worst = 0.0, worst_sym = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Box3D a = RandomBox(rng, 1.0);
    const Box3D b = RandomBox(rng, 1.0);
    const double iou = Iou3d(a, b);
    const double diff = std::abs(iou - nlcdet::testing::MonteCarloIou(a, b, 1000000, sampler));
    const double sym = std::abs(iou - Iou3d(b, a));
    worst = std::max(worst, diff);
    worst_sym = std::max(worst_sym, sym);
    check.Expect(diff < 1e-2, Fmt("pair %d differs from Monte Carlo by %.3g", i, diff));
    check.Expect(sym <= 1e-12, Fmt("pair %d asymmetric by %.3g", i, sym));
  }
  const double cube = Iou3d(Box3D(Vec3::Zero(), 1, 1, 1, 0), Box3D(Vec3(0.5, 0, 0), 1, 1, 1, 0));
  check.Expect(std::abs(cube - 1.0 / 3.0) <= 1e-9, Fmt("offset cubes gave %.12g", cube));
  return check.Finish(Fmt("200 pairs, max |IoU - MC| %.2e, max asymmetry %.1e, offset cubes %.12f",
                          worst, worst_sym, cube));
}

// 6. Average precision.
Outcome MetricsChecks() {
  Checker check;
  const std::vector<ScoredOutcome> perfect = {{0.9, true}, {0.6, true}, {0.3, true}};
  const double ap_perfect = AveragePrecision(perfect, 3);
  check.Expect(ap_perfect == 1.0, "perfect detector AP != 1");
  const std::vector<ScoredOutcome> misses = {{0.9, false}, {0.6, false}};
  const double ap_zero = AveragePrecision(misses, 2);
  check.Expect(ap_zero == 0.0, "zero-match AP != 0");

  // TP .9, FP .8, TP .7 over 2 GTs: precision 1 at the first 20 recall
  // positions and 2/3 at the last 20.
  const std::vector<ScoredOutcome> hand = {{0.9, true}, {0.8, false}, {0.7, true}};
  double enumerated = 0.0;
  for (int k = 1; k <= 40; ++k) enumerated += (2 * k <= 40) ? 1.0 : 2.0 / 3.0;
  enumerated /= 40.0;
  const double ap_hand = AveragePrecision(hand, 2);
  check.Expect(std::abs(ap_hand - enumerated) <= 1e-12 && std::abs(ap_hand - 5.0 / 6.0) <= 1e-12,
               Fmt("hand case gave %.15g", ap_hand));

  Rng rng(1007);
  for (int t = 0; t < 1000; ++t) {
    std::vector<ScoredOutcome> outcomes(1 + rng.UniformIndex(30));
    std::size_t tps = 0;
    for (auto& o : outcomes) {
      o.score = rng.Uniform();
      o.true_positive = rng.Bernoulli(0.5);
      tps += o.true_positive ? 1 : 0;
    }
    const std::size_t num_gt = tps + 1 + rng.UniformIndex(3);
    const double base = AveragePrecision(outcomes, num_gt);
    const double scale = std::exp(rng.Normal(0, 3));
    for (auto& o : outcomes) o.score *= scale;
    check.Expect(AveragePrecision(outcomes, num_gt) == base, "AP changed under score rescaling");
  }
  return check.Finish(Fmt("perfect %.1f, zero %.1f, hand case %.15f (5/6), rescaling over 1000 lists",
                          ap_perfect, ap_zero, ap_hand));
}

std::string RandomReal(Rng& rng) {
  const double v = rng.Normal(0, 100);
  switch (rng.UniformIndex(4)) {
    case 0: return Fmt("%.6e", v);
    case 1: return Fmt("%.2f", v);
    case 2: return Fmt("%.17g", v);
    default: return Fmt("%d", static_cast<int>(v));
  }
}

template <typename Fn>
void FeedStructured(Fn&& fn, std::size_t* structured, bool* other) {
  try {
    fn();
  } catch (const Error&) {
    ++*structured;
  } catch (...) {
    *other = true;
  }
}

// 7. Parser round trips and arbitrary-byte fuzzing.
Outcome Parsers() {
  Checker check;
  Rng rng(1008);
  for (int t = 0; t < 1000; ++t) {
    std::string calib;
    for (const auto& [key, n] : {std::pair{"P2", 12}, {"R0_rect", 9}, {"Tr_velo_to_cam", 12}}) {
      calib += key;
      calib += ":";
      for (int i = 0; i < n; ++i) calib += (rng.Bernoulli(0.2) ? "\t" : " ") + RandomReal(rng);
      calib += "\n";
    }
    const kitti::Calib c = kitti::ParseCalib(calib);
    check.Expect(kitti::ParseCalib(kitti::EmitCalib(c)) == c, "calibration text round trip");
  }
  for (int t = 0; t < 1000; ++t) {
    std::string text;
    for (int k = 0, n = static_cast<int>(rng.UniformIndex(5)); k < n; ++k) {
      text += Fmt("Car %s %d", RandomReal(rng).c_str(), static_cast<int>(rng.UniformIndex(4)));
      for (int f = 0; f < 12; ++f) text += " " + RandomReal(rng);
      if (rng.Bernoulli(0.3)) text += " " + RandomReal(rng);
      text += "\n";
    }
    const auto labels = kitti::ParseLabels(text);
    check.Expect(kitti::ParseLabels(kitti::EmitLabels(labels)) == labels, "label text round trip");
  }
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::uint8_t> bytes;
    for (std::size_t i = 0, n = 16 * rng.UniformIndex(64); i < n; i += 4) {
      float f;
      do {
        f = std::bit_cast<float>(static_cast<std::uint32_t>(rng.NextU64()));
      } while (!std::isfinite(f));
      const auto u = std::bit_cast<std::uint32_t>(f);
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
    }
    check.Expect(kitti::WriteVelodyne(kitti::ReadVelodyne(bytes)) == bytes, "velodyne binary round trip");
  }
  for (int t = 0; t < 1000; ++t) {
    NlcMap map(1 + static_cast<std::uint32_t>(rng.UniformIndex(12)),
               1 + static_cast<std::uint32_t>(rng.UniformIndex(12)));
    for (std::size_t r = 0; r < map.height(); ++r) {
      for (std::size_t c = 0; c < map.width(); ++c) {
        if (rng.Bernoulli(0.4)) {
          map.Set(r, c, NlcValue(rng.Normal(0.5, 1), rng.Uniform(), rng.Uniform()), rng.Uniform(1, 80));
        }
      }
    }
    const auto bytes = EncodeNlcMap(map);
    check.Expect(EncodeNlcMap(DecodeNlcMap(bytes)) == bytes, "NLC map binary round trip");
  }

  const std::vector<std::string> seeds = {
      nlcdet::testing::ReadFileText(FixturePath("kitti/000002.calib.txt")),
      nlcdet::testing::ReadFileText(FixturePath("kitti/000002.label.txt")),
      "x,y,z,x_nlc,y_nlc,z_nlc\n1,2,3,0.5,0.5,0.5\n",
      "1,2,3,4,2,1.5,0.1,0.9,0\n",
  };
  std::vector<std::uint8_t> nlcm = EncodeNlcMap(NlcMap(3, 4));
  std::size_t structured = 0;
  bool other = false;
  for (int t = 0; t < 100000; ++t) {
    std::vector<std::uint8_t> bytes;
    switch (t % 3) {
      case 0:
        bytes.resize(rng.UniformIndex(256));
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.NextU64());
        break;
      case 1: {
        const std::string& base = seeds[rng.UniformIndex(seeds.size())];
        bytes.assign(base.begin(), base.end());
        break;
      }
      default:
        bytes = nlcm;
        break;
    }
    if (t % 3 != 0) {
      for (int m = 0, n = 1 + static_cast<int>(rng.UniformIndex(4)); m < n && !bytes.empty(); ++m) {
        bytes[rng.UniformIndex(bytes.size())] = static_cast<std::uint8_t>(rng.NextU64());
      }
      if (rng.Bernoulli(0.3)) bytes.resize(rng.UniformIndex(bytes.size() + 1));
    }
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    FeedStructured([&] { kitti::ParseCalib(text); }, &structured, &other);
    FeedStructured([&] { kitti::ParseLabels(text); }, &structured, &other);
    FeedStructured([&] { kitti::ReadVelodyne(bytes); }, &structured, &other);
    FeedStructured([&] { DecodeNlcMap(bytes); }, &structured, &other);
    FeedStructured([&] { cli::ParseCorrespondencesCsv(text); }, &structured, &other);
    FeedStructured([&] { cli::ParseDetectionsCsv(text); }, &structured, &other);
    FeedStructured([&] { cli::ParseGroundTruthCsv(text); }, &structured, &other);
  }
  check.Expect(!other, "a parser raised something other than a structured error");
  return check.Finish(Fmt("1000 round trips each for calib, labels, velodyne, NLCM; 100000 fuzz inputs "
                          "x 7 parsers, %zu structured errors, no other exceptions",
                          structured));
}

// 8. Fusion ablation direction.
Outcome Ablation() {
  const pipeline::TrainConfig config;
  const pipeline::AblationReport report = pipeline::RunAblation(config);
  std::string rows;
  double none = 0, p2i = 0, both = 0;
  for (const auto& row : report.rows) {
    rows += Fmt("%s%s %.4f", rows.empty() ? "" : ", ", row.name.c_str(), row.mean_point_branch);
    if (row.enable_p2i && row.enable_i2p) both = row.mean_point_branch;
    else if (row.enable_p2i) p2i = row.mean_point_branch;
    else if (!row.enable_i2p) none = row.mean_point_branch;
  }
  Checker check;
  check.Expect(!report.diverged, "a run diverged");
  check.Expect(both <= p2i, "bidirectional > p2i-only");
  check.Expect(p2i <= none, "p2i-only > no fusion");
  const double gain = (none - p2i) / none;
  check.Expect(gain >= 0.02, Fmt("p2i-only gain %.2f%% < 2%%", 100 * gain));
  return check.Finish(Fmt("mean point-branch val loss over %zu seeds: %s; p2i gain %.2f%%",
                          config.seeds.size(), rows.c_str(), 100 * gain));
}

// 9. mMAE.
Outcome MmaeChecks() {
  Checker check;
  std::size_t objects_seen = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const pipeline::SyntheticScene scene = pipeline::GenerateScene(seed);
    const NlcMap& gt = scene.gt.map;
    std::vector<ObjectPixels> objects = ObjectPixelsFromOwners(scene.gt, scene.boxes);
    objects_seen += objects.size();
    Tensor2D exact(3, gt.height(), gt.width());
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t r = 0; r < gt.height(); ++r) {
        for (std::size_t col = 0; col < gt.width(); ++col) exact.at(c, r, col) = gt.value(c, r, col);
      }
    }
    const MmaeResult zero = nlcdet::Mmae(gt, exact, objects);
    check.Expect(zero.x == 0.0 && zero.y == 0.0 && zero.z == 0.0, "perfect prediction not zero");

    // Binary-fraction offsets shift every float32 target without rounding.
    const double offsets[3] = {0.125, -0.0625, 0.25};
    Tensor2D shifted = exact;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t r = 0; r < gt.height(); ++r) {
        for (std::size_t col = 0; col < gt.width(); ++col) shifted.at(c, r, col) += offsets[c];
      }
    }
    const MmaeResult off = nlcdet::Mmae(gt, shifted, objects);
    check.Expect(off.x == 0.125 && off.y == 0.0625 && off.z == 0.25, "constant offset not exact");

    Rng rng(2000 + seed);
    Tensor2D noisy = exact;
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy.data()[i] += rng.Normal(0, 0.1);
    const MmaeResult base = nlcdet::Mmae(gt, noisy, objects);
    for (int p = 0; p < 5; ++p) {
      nlcdet::testing::Shuffle(objects, rng);
      const MmaeResult again = nlcdet::Mmae(gt, noisy, objects);
      check.Expect(again.x == base.x && again.y == base.y && again.z == base.z,
                   "object order changed mMAE");
    }
  }
  return check.Finish(Fmt("20 synthetic scenes, %zu objects: zero, exact offsets (0.125, 0.0625, 0.25), "
                          "order invariance over 5 shuffles each",
                          objects_seen));
}

std::string ReadAll(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void WriteAll(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

// 10. Seeded commands give bit-identical output on consecutive runs.
Outcome Determinism() {
  const fs::path work = fs::temp_directory_path() / "nlcdet_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  // Inputs for solve and eval.
  Rng rng(1010);
  const Box3D truth(Vec3(14, -2, -0.8), 4.1, 1.7, 1.5, 0.3);
  std::string corrs;
  for (int i = 0; i < 30; ++i) {
    const NlcValue n(rng.Uniform(), rng.Uniform(), rng.Uniform());
    const Vec3 p = NlcToLidar(n, truth);
    corrs += Fmt("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.x(), p.y(), p.z(), n.x(), n.y(), n.z());
  }
  WriteAll(work / "corrs.csv", corrs);
  WriteAll(work / "gts.csv", "10,0,-1,4,1.8,1.5,0,0\n20,5,-1,4,1.8,1.5,0.2,0\n");
  WriteAll(work / "dets.csv", "10.2,0,-1,4,1.8,1.5,0,0.9,0\n30,0,-1,4,1.8,1.5,0,0.8,0\n20,5,-1,4,1.8,1.5,0.25,0.7,0\n");
  WriteAll(work / "train.cfg", "epochs = 20\ntrain_scenes = 10\nval_scenes = 5\n");
  WriteAll(work / "ablation.cfg", "epochs = 5\ntrain_scenes = 4\nval_scenes = 3\nseeds = 0, 1\n");

  const std::string cli = NLCDET_CLI_PATH;
  const std::string k3 = FixturePath("kitti/000003");
  struct Command {
    std::string name;
    std::string args;           // {dir} is replaced by the run directory
    std::vector<std::string> files;
  };
  const std::vector<Command> commands = {
      {"nlcmap",
       "nlcmap --calib " + k3 + ".calib.txt --label " + k3 + ".label.txt --velodyne " + k3 +
           ".bin --out {dir}/map.nlcm --csv {dir}/map.csv",
       {"map.nlcm", "map.csv"}},
      {"solve", "solve --corrs " + (work / "corrs.csv").string() + " --noise-report --seed 7 --trials 30", {}},
      {"gradcheck", "gradcheck --seed 5 --trials 20", {}},
      {"train", "train --config " + (work / "train.cfg").string() + " --seed 3 --out {dir}/train",
       {"train/training_report.json", "train/training_curves.csv"}},
      {"ablation", "ablation --config " + (work / "ablation.cfg").string() + " --out {dir}/ablation",
       {"ablation/ablation_report.json", "ablation/ablation_curves.csv"}},
      {"eval", "eval --dets " + (work / "dets.csv").string() + " --gts " + (work / "gts.csv").string() +
                   " --iou 0.5",
       {}},
  };

  Checker check;
  std::string names;
  for (const Command& cmd : commands) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path dir = work / (cmd.name + std::to_string(run));
      fs::create_directories(dir);
      std::string args = cmd.args;
      for (std::size_t at; (at = args.find("{dir}")) != std::string::npos;) {
        args.replace(at, 5, dir.string());
      }
      const std::string line = cli + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                               (dir / "stderr.txt").string();
      const int status = std::system(line.c_str());
      check.Expect(status == 0, cmd.name + " exited with status " + std::to_string(status));
      outputs[run] = ReadAll(dir / "stdout.txt");
      for (const auto& f : cmd.files) {
        const std::string content = ReadAll(dir / f);
        check.Expect(!content.empty(), cmd.name + " wrote no " + f);
        outputs[run] += "\n--" + f + "--\n" + content;
      }
    }
    check.Expect(!outputs[0].empty() && outputs[0] == outputs[1], cmd.name + " output differs between runs");
    names += (names.empty() ? "" : ", ") + cmd.name;
  }
  return check.Finish("two runs each of " + names + " (stdout and written files compared byte-wise)");
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
  double limit_seconds;  // 0 when the criterion states no runtime bound
};

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  const std::vector<Criterion> criteria = {
      {1, "NLC round trip", NlcRoundTrip, 5},
      {2, "projection", Projection, 0},
      {3, "gradient checks", Gradients, 60},
      {4, "box solver", Solver, 60},
      {5, "IoU", IouChecks, 0},
      {6, "metrics", MetricsChecks, 0},
      {7, "parsers", Parsers, 0},
      {8, "ablation direction", Ablation, 600},
      {9, "mMAE", MmaeChecks, 0},
      {10, "determinism", Determinism, 0},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0 && seconds >= c.limit_seconds) {
      outcome.passed = false;
      outcome.detail += Fmt(" | runtime %.1f s exceeds %.0f s", seconds, c.limit_seconds);
    }
    failed += outcome.passed ? 0 : 1;
    std::printf("criterion %d (%s): %s [%.1f s] %s\n", c.number, c.name,
                outcome.passed ? "PASS" : "FAIL", seconds, outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
