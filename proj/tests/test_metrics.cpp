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

#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "nlcdet/error.hpp"
#include "nlcdet/metrics.hpp"
#include "nlcdet/random.hpp"
#include "support.hpp"

using namespace nlcdet;

namespace {

const Box3D kCar(Vec3(10, 0, -1), 4.0, 1.8, 1.5, 0.0);

// Interpolated AP by direct enumeration: at each sampled recall, scan the
// whole ranked list for the best precision with recall at least r.
double EnumeratedAp(std::vector<ScoredOutcome> outcomes, std::size_t num_gt, int positions,
                    bool from_zero) {
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  double total = 0.0;
  for (int k = 0; k < positions; ++k) {
    const int numerator = from_zero ? k : k + 1;
    const int denominator = from_zero ? positions - 1 : positions;
    double best = 0.0;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      tp += outcomes[i].true_positive ? 1 : 0;
      // recall >= r  <=>  tp * denominator >= numerator * num_gt, in integers.
      if (tp * denominator >= static_cast<std::size_t>(numerator) * num_gt) {
        best = std::max(best, static_cast<double>(tp) / static_cast<double>(i + 1));
      }
    }
    total += best;
  }
  return total / positions;
}

// Greedy matching written as repeated selection of the best remaining
// detection instead of a sort.
std::vector<DetectionMatch> GreedyOracle(const std::vector<Detection>& dets,
                                         const std::vector<Box3D>& gts, double thresh) {
  std::vector<bool> done(dets.size(), false), taken(gts.size(), false);
  std::vector<DetectionMatch> out;
  for (std::size_t step = 0; step < dets.size(); ++step) {
    std::size_t pick = dets.size();
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (!done[d] && (pick == dets.size() || dets[d].score > dets[pick].score)) pick = d;
    }
    done[pick] = true;
    DetectionMatch m{pick, std::nullopt};
    double best = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double iou = Iou3d(dets[pick].box, gts[g]);
      if (!taken[g] && iou >= thresh && (!m.ground_truth || iou > best)) {
        best = iou;
        m.ground_truth = g;
      }
    }
    if (m.ground_truth) taken[*m.ground_truth] = true;
    out.push_back(m);
  }
  return out;
}

Box3D Jitter(const Box3D& b, Rng& rng, double scale) {
  return Box3D(b.center() + Vec3(rng.Normal(0, scale), rng.Normal(0, scale), rng.Normal(0, scale)),
               b.length() * std::exp(rng.Normal(0, scale / 4)),
               b.width() * std::exp(rng.Normal(0, scale / 4)),
               b.height() * std::exp(rng.Normal(0, scale / 4)), b.yaw() + rng.Normal(0, scale / 4));
}

std::vector<ScoredOutcome> RandomOutcomes(Rng& rng, std::size_t n) {
  std::vector<ScoredOutcome> out(n);
  for (auto& o : out) {
    o.score = static_cast<double>(rng.UniformIndex(20)) / 20.0;
    o.true_positive = rng.Bernoulli(0.5);
  }
  return out;
}

}  // namespace

TEST_CASE("matching examples") {
  const std::vector<Box3D> gts = {kCar};
  const std::vector<Detection> one = {{kCar, 0.5, 0}};
  const auto m = MatchDetections(one, gts, 0.7);
  REQUIRE(m.size() == 1);
  CHECK(m[0].ground_truth == 0u);

  const std::vector<Detection> two = {{kCar, 0.4, 0}, {kCar, 0.9, 0}};
  const auto m2 = MatchDetections(two, gts, 0.7);
  REQUIRE(m2.size() == 2);
  CHECK(m2[0].detection == 1);
  CHECK(m2[0].ground_truth == 0u);
  CHECK(m2[1].detection == 0);
  CHECK_FALSE(m2[1].ground_truth.has_value());

  // Equal scores fall back to the detection index.
  const std::vector<Detection> tied = {{kCar, 0.5, 0}, {kCar, 0.5, 0}};
  CHECK(MatchDetections(tied, gts, 0.7)[0].detection == 0);

  // A 1 m shift along the length leaves IoU 3/5, matched at 0.5 only.
  const std::vector<Detection> shifted = {{Box3D(Vec3(11, 0, -1), 4.0, 1.8, 1.5, 0.0), 1.0, 0}};
  CHECK_FALSE(MatchDetections(shifted, gts, 0.7)[0].ground_truth.has_value());
  CHECK(MatchDetections(shifted, gts, 0.5)[0].ground_truth == 0u);
  CHECK(MatchDetections(shifted, gts, 0.6)[0].ground_truth == 0u);

  CHECK(MatchDetections({}, gts, 0.7).empty());
  CHECK_FALSE(MatchDetections(one, {}, 0.7)[0].ground_truth.has_value());
  CHECK_THROWS_AS(MatchDetections(one, gts, 0.0), Error);
  CHECK_THROWS_AS(MatchDetections(one, gts, 1.5), Error);
  const std::vector<Detection> bad = {{kCar, std::nan(""), 0}};
  CHECK_THROWS_AS(MatchDetections(bad, gts, 0.7), Error);
}

TEST_CASE("matching agrees with the greedy oracle") {
  Rng rng(211);
  for (int t = 0; t < 500; ++t) {
    std::vector<Box3D> gts;
    for (std::size_t g = 0, n = rng.UniformIndex(5); g < n; ++g) {
      gts.push_back(Box3D(Vec3(rng.Uniform(0, 12), rng.Uniform(-3, 3), -1), 4.0, 1.8, 1.5,
                          rng.Uniform(-0.3, 0.3)));
    }
    std::vector<Detection> dets;
    for (std::size_t d = 0, n = rng.UniformIndex(7); d < n; ++d) {
      const Box3D base = gts.empty() || rng.Bernoulli(0.2) ? nlcdet::testing::RandomBox(rng, 10.0)
                                                           : gts[rng.UniformIndex(gts.size())];
      dets.push_back({Jitter(base, rng, 0.3), static_cast<double>(rng.UniformIndex(4)), 0});
    }
    for (double thresh : {0.3, 0.5, 0.7}) {
      const auto got = MatchDetections(dets, gts, thresh);
      const auto want = GreedyOracle(dets, gts, thresh);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].detection == want[i].detection);
        CHECK(got[i].ground_truth == want[i].ground_truth);
      }
    }
  }
}

TEST_CASE("matching is invariant to input permutation") {
  Rng rng(223);
  for (int t = 0; t < 300; ++t) {
    std::vector<Box3D> gts;
    for (int g = 0; g < 4; ++g) {
      gts.push_back(Box3D(Vec3(6.0 * g, rng.Uniform(-1, 1), -1), 4.0, 1.8, 1.5, 0.0));
    }
    std::vector<Detection> dets;
    for (int d = 0; d < 6; ++d) {
      dets.push_back({Jitter(gts[rng.UniformIndex(4)], rng, 0.3), rng.Uniform(), 0});
    }
    std::vector<std::size_t> dp(dets.size()), gp(gts.size());
    std::iota(dp.begin(), dp.end(), 0);
    std::iota(gp.begin(), gp.end(), 0);
    nlcdet::testing::Shuffle(dp, rng);
    nlcdet::testing::Shuffle(gp, rng);
    std::vector<Detection> pdets;
    std::vector<Box3D> pgts;
    for (std::size_t i : dp) pdets.push_back(dets[i]);
    for (std::size_t i : gp) pgts.push_back(gts[i]);

    const auto a = MatchDetections(dets, gts, 0.5);
    const auto b = MatchDetections(pdets, pgts, 0.5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(dp[b[i].detection] == a[i].detection);
      CHECK(b[i].ground_truth.has_value() == a[i].ground_truth.has_value());
      if (b[i].ground_truth) CHECK(gp[*b[i].ground_truth] == *a[i].ground_truth);
    }
  }
}

TEST_CASE("average precision examples") {
  const std::vector<ScoredOutcome> perfect = {{0.9, true}, {0.5, true}, {0.1, true}};
  CHECK(AveragePrecision(perfect, 3) == 1.0);
  CHECK(AveragePrecision(perfect, 3, RecallSampling::kR11) == 1.0);
  const std::vector<ScoredOutcome> misses = {{0.9, false}, {0.5, false}};
  CHECK(AveragePrecision(misses, 2) == 0.0);
  CHECK(AveragePrecision({}, 4) == 0.0);

  // Ranked TP, FP, TP over 2 GTs: precision 1 up to recall 1/2 and 2/3 above.
  const std::vector<ScoredOutcome> hand = {{0.9, true}, {0.8, false}, {0.7, true}};
  CHECK(EnumeratedAp(hand, 2, 40, false) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(AveragePrecision(hand, 2) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(AveragePrecision(hand, 2, RecallSampling::kR11) ==
        doctest::Approx(28.0 / 33.0).epsilon(1e-15));

  // Half the objects found with perfect precision: exactly 20 of 40 positions.
  CHECK(AveragePrecision(std::vector<ScoredOutcome>{{1.0, true}}, 2) == 0.5);
  // One TP of 10 at rank 2: precision 1/2 at recall 0 and 0.1, 0 above.
  CHECK(AveragePrecision(std::vector<ScoredOutcome>{{0.9, false}, {0.1, true}}, 10,
                         RecallSampling::kR11) == doctest::Approx(1.0 / 11.0));
  CHECK_THROWS_AS(AveragePrecision(hand, 0), Error);
}

TEST_CASE("average precision matches enumeration") {
  Rng rng(227);
  for (int t = 0; t < 2000; ++t) {
    const auto outcomes = RandomOutcomes(rng, rng.UniformIndex(30));
    std::size_t tps = 0;
    for (const auto& o : outcomes) tps += o.true_positive ? 1 : 0;
    const std::size_t num_gt = tps + rng.UniformIndex(5) + (tps == 0 ? 1 : 0);
    const double r40 = AveragePrecision(outcomes, num_gt);
    const double r11 = AveragePrecision(outcomes, num_gt, RecallSampling::kR11);
    CHECK(r40 == doctest::Approx(EnumeratedAp(outcomes, num_gt, 40, false)).epsilon(1e-12));
    CHECK(r11 == doctest::Approx(EnumeratedAp(outcomes, num_gt, 11, true)).epsilon(1e-12));
    CHECK(r40 >= 0.0);
    CHECK(r40 <= 1.0);
  }
}

TEST_CASE("average precision properties") {
  Rng rng(229);
  for (int t = 0; t < 2000; ++t) {
    auto outcomes = RandomOutcomes(rng, 1 + rng.UniformIndex(20));
    std::size_t tps = 0;
    double lowest = 1.0;
    for (const auto& o : outcomes) {
      tps += o.true_positive ? 1 : 0;
      lowest = std::min(lowest, o.score);
    }
    const std::size_t num_gt = tps + 1 + rng.UniformIndex(4);
    const double ap = AveragePrecision(outcomes, num_gt);

    auto more_tp = outcomes;
    more_tp.push_back({rng.Uniform(), true});
    CHECK(AveragePrecision(more_tp, num_gt) >= ap);

    auto more_fp = outcomes;
    more_fp.push_back({lowest - 0.5, false});
    CHECK(AveragePrecision(more_fp, num_gt) <= ap);

    const double scale = std::exp(rng.Normal(0, 2));
    auto scaled = outcomes;
    for (auto& o : scaled) o.score *= scale;
    CHECK(AveragePrecision(scaled, num_gt) == ap);

    // Reordering the input only matters among equal scores; distinct
    // scores make the ranking unique.
    auto distinct = outcomes;
    for (std::size_t i = 0; i < distinct.size(); ++i) distinct[i].score += 1e-3 * i;
    const double base = AveragePrecision(distinct, num_gt);
    nlcdet::testing::Shuffle(distinct, rng);
    CHECK(AveragePrecision(distinct, num_gt) == base);
  }
}

TEST_CASE("per-class evaluation") {
  const Box3D ped(Vec3(5, 3, -1), 0.8, 0.6, 1.7, 0.0);
  std::vector<EvalFrame> frames(2);
  frames[0].ground_truth = {kCar, ped};
  frames[0].ground_truth_class = {0, 1};
  frames[0].detections = {{kCar, 0.9, 0}, {ped, 0.8, 1}, {Box3D(Vec3(30, 0, -1), 4, 1.8, 1.5, 0), 0.7, 0}};
  frames[1].ground_truth = {kCar};
  frames[1].ground_truth_class = {0};
  frames[1].detections = {{kCar, 0.6, 0}, {kCar, 0.95, 2}};

  const auto result = EvaluateDetections(frames, 0.7);
  REQUIRE(result.size() == 3);
  // Cars: TP .9, FP .7, TP .6 over 2 GTs, the hand example.
  CHECK(result[0].class_id == 0);
  CHECK(result[0].num_gt == 2);
  CHECK(result[0].num_detections == 3);
  CHECK(result[0].true_positives == 2);
  CHECK(result[0].ap == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(result[1].class_id == 1);
  CHECK(result[1].ap == 1.0);
  // Class 2 has detections but no ground truth.
  CHECK(result[2].class_id == 2);
  CHECK(result[2].num_gt == 0);
  CHECK(result[2].ap == 0.0);

  const auto r11 = EvaluateDetections(frames, 0.7, RecallSampling::kR11);
  CHECK(r11[0].ap == doctest::Approx(28.0 / 33.0).epsilon(1e-15));

  frames[1].ground_truth_class.clear();
  CHECK_THROWS_AS(EvaluateDetections(frames, 0.7), Error);
}
