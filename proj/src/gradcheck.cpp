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

#include "nlcdet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Core>

#include "nlcdet/error.hpp"
#include "nlcdet/losses.hpp"
#include "nlcdet/pipeline/model.hpp"
#include "nlcdet/propagation.hpp"
#include "nlcdet/random.hpp"

namespace nlcdet {
namespace {

using Vector = Eigen::VectorXd;
using Objective = std::function<double()>;

constexpr double kOperatorTolerance = 1e-6;
constexpr double kModelTolerance = 1e-5;
constexpr double kAdjointTolerance = 1e-10;
constexpr double kKinkMargin = 1e-4;
constexpr double kPerturbation = 1e-3;
constexpr int kMaxResamples = 1000;

double RelativeError(const Vector& analytic, const Vector& numeric) {
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale == 0.0) return 0.0;
  return (analytic - numeric).norm() / scale;
}

// Central differences of `f` with respect to each variable behind `vars`.
Vector NumericGradient(const std::vector<double*>& vars, const Objective& f,
                       double eps) {
  Vector g(static_cast<Eigen::Index>(vars.size()));
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const double saved = *vars[i];
    *vars[i] = saved + eps;
    const double plus = f();
    *vars[i] = saved - eps;
    const double minus = f();
    *vars[i] = saved;
    g[static_cast<Eigen::Index>(i)] = (plus - minus) / (2.0 * eps);
  }
  return g;
}

template <typename Container>
void AddPointers(Container& data, std::vector<double*>* out) {
  for (double& v : data) out->push_back(&v);
}

void AddPointers(DenseLayer& layer, std::vector<double*>* out) {
  for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
    out->push_back(layer.weights.data() + i);
  }
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) out->push_back(layer.bias.data() + i);
}

void Append(std::vector<double>* out, const DenseLayerGrad& g) {
  out->insert(out->end(), g.weights.data(), g.weights.data() + g.weights.size());
  out->insert(out->end(), g.bias.data(), g.bias.data() + g.bias.size());
}

Vector ToVector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double Dot(const std::vector<double>& a, const std::vector<double>& b) {
  return ToVector(a).dot(ToVector(b));
}

void FillNormal(std::vector<double>* v, Rng& rng) {
  for (double& x : *v) x = rng.Normal();
}

ProjectedCoords RandomCoords(std::size_t n, std::size_t h, std::size_t w, Rng& rng,
                             double margin) {
  ProjectedCoords coords(n);
  for (auto& c : coords) {
    c.u = rng.Uniform(-margin, static_cast<double>(w) + margin);
    c.v = rng.Uniform(-margin, static_cast<double>(h) + margin);
  }
  return coords;
}

DenseLayer RandomLayer(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer layer = DenseLayer::Random(in, out, rng);
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.Normal(0.0, 0.5);
  return layer;
}

struct Tally {
  GradcheckResult result;
  void Add(double error) {
    ++result.trials;
    if (!(error <= result.max_error)) result.max_error = error;
  }
};

Tally MakeTally(std::string name, double threshold) {
  return Tally{GradcheckResult{std::move(name), 0, 0.0, threshold}};
}

// point_to_pixel and pixel_to_point: gradient of <w, op(x)> and the adjoint
// identity <op(x), t> = <x, op^T(t)>.
void CheckLinearOperators(bool scatter, const GradcheckOptions& opt, Rng& rng,
                          std::vector<GradcheckResult>* results) {
  const double factor = opt.perturb_backward ? 1.0 + kPerturbation : 1.0;
  Tally grad = MakeTally(scatter ? "point_to_pixel" : "pixel_to_point", kOperatorTolerance);
  Tally adjoint = MakeTally(scatter ? "point_to_pixel_adjoint" : "pixel_to_point_adjoint",
                            kAdjointTolerance);
  for (int t = 0; t < opt.trials; ++t) {
    const std::size_t n = 1 + rng.UniformIndex(30);
    const std::size_t c = 1 + rng.UniformIndex(4);
    const std::size_t h = 2 + rng.UniformIndex(7);
    const std::size_t w = 2 + rng.UniformIndex(7);
    const ProjectedCoords coords = RandomCoords(n, h, w, rng, 1.0);
    PointFeatures points(n, c);
    Tensor2D grid(c, h, w);
    FillNormal(&points.data(), rng);
    FillNormal(&grid.data(), rng);

    if (scatter) {
      Tensor2D weight(c, h, w);
      FillNormal(&weight.data(), rng);
      PointFeatures analytic = PointToPixelBackward(weight, coords, n);
      std::vector<double*> vars;
      AddPointers(points.data(), &vars);
      const Vector numeric = NumericGradient(vars, [&] {
        return Dot(PointToPixel(points, coords, h, w).data(), weight.data());
      }, opt.epsilon);
      grad.Add(RelativeError(factor * ToVector(analytic.data()), numeric));

      const double lhs = Dot(PointToPixel(points, coords, h, w).data(), grid.data());
      const double rhs =
          factor * Dot(points.data(), PointToPixelBackward(grid, coords, n).data());
      adjoint.Add(std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)}));
    } else {
      PointFeatures weight(n, c);
      FillNormal(&weight.data(), rng);
      Tensor2D analytic = PixelToPointBackward(weight, coords, h, w);
      std::vector<double*> vars;
      AddPointers(grid.data(), &vars);
      const Vector numeric = NumericGradient(vars, [&] {
        return Dot(PixelToPoint(grid, coords).data(), weight.data());
      }, opt.epsilon);
      grad.Add(RelativeError(factor * ToVector(analytic.data()), numeric));

      const double lhs = Dot(PixelToPoint(grid, coords).data(), points.data());
      const double rhs =
          factor * Dot(grid.data(), PixelToPointBackward(points, coords, h, w).data());
      adjoint.Add(std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)}));
    }
  }
  results->push_back(grad.result);
  results->push_back(adjoint.result);
}

double MinAbs(const Activations& a) { return a.cwiseAbs().minCoeff(); }

void CheckFusion(const GradcheckOptions& opt, Rng& rng,
                 std::vector<GradcheckResult>* results) {
  const double factor = opt.perturb_backward ? 1.0 + kPerturbation : 1.0;
  for (const bool image_side : {true, false}) {
    Tally tally = MakeTally(image_side ? "fuse_p2i" : "fuse_i2p", kOperatorTolerance);
    for (int t = 0; t < opt.trials; ++t) {
      const std::size_t ca = 1 + rng.UniformIndex(4);
      const std::size_t cb = 1 + rng.UniformIndex(4);
      const std::size_t hidden = 1 + rng.UniformIndex(4);
      const std::size_t out = 1 + rng.UniformIndex(4);
      const std::size_t h = 1 + rng.UniformIndex(4);
      const std::size_t w = 1 + rng.UniformIndex(4);
      const std::size_t n = 1 + rng.UniformIndex(12);
      FusionLayers layers;
      Tensor2D ta(ca, h, w), tb(cb, h, w), tw(out, h, w);
      PointFeatures pa(n, ca), pb(n, cb), pw(n, out);
      FusionCache cache;
      for (int attempt = 0;; ++attempt) {
        layers = {RandomLayer(ca, hidden, rng), RandomLayer(hidden + cb, out, rng)};
        FillNormal(&ta.data(), rng);
        FillNormal(&tb.data(), rng);
        FillNormal(&pa.data(), rng);
        FillNormal(&pb.data(), rng);
        if (image_side) {
          FuseP2I(ta, tb, layers, &cache);
        } else {
          FuseI2P(pa, pb, layers, &cache);
        }
        if (std::min(MinAbs(cache.pre_first), MinAbs(cache.pre_second)) > kKinkMargin) break;
        if (attempt == kMaxResamples) {
          throw Error(ErrorCode::kInvalidArgument, "could not avoid activation kinks");
        }
      }
      FillNormal(&tw.data(), rng);
      FillNormal(&pw.data(), rng);

      std::vector<double> analytic;
      std::vector<double*> vars;
      Objective f;
      if (image_side) {
        const FuseP2IGrads g = FuseP2IBackward(cache, layers, tw);
        analytic = g.grad_p2i.data();
        analytic.insert(analytic.end(), g.grad_img.data().begin(), g.grad_img.data().end());
        Append(&analytic, g.layers.first);
        Append(&analytic, g.layers.second);
        AddPointers(ta.data(), &vars);
        AddPointers(tb.data(), &vars);
        f = [&] { return Dot(FuseP2I(ta, tb, layers).data(), tw.data()); };
      } else {
        const FuseI2PGrads g = FuseI2PBackward(cache, layers, pw);
        analytic = g.grad_i2p.data();
        analytic.insert(analytic.end(), g.grad_points.data().begin(),
                        g.grad_points.data().end());
        Append(&analytic, g.layers.first);
        Append(&analytic, g.layers.second);
        AddPointers(pa.data(), &vars);
        AddPointers(pb.data(), &vars);
        f = [&] { return Dot(FuseI2P(pa, pb, layers).data(), pw.data()); };
      }
      AddPointers(layers.first, &vars);
      AddPointers(layers.second, &vars);
      const Vector numeric = NumericGradient(vars, f, opt.epsilon);
      tally.Add(RelativeError(factor * ToVector(analytic), numeric));
    }
    results->push_back(tally.result);
  }
}

void CheckLosses(const GradcheckOptions& opt, Rng& rng,
                 std::vector<GradcheckResult>* results) {
  const double factor = opt.perturb_backward ? 1.0 + kPerturbation : 1.0;

  Tally huber = MakeTally("huber", kOperatorTolerance);
  for (int t = 0; t < opt.trials; ++t) {
    const double delta = rng.Uniform(0.1, 2.0);
    double r = 0.0;
    do {
      r = rng.Uniform(-3.0, 3.0);
    } while (std::abs(std::abs(r) - delta) < kKinkMargin);
    const double numeric =
        (Huber(r + opt.epsilon, delta) - Huber(r - opt.epsilon, delta)) / (2.0 * opt.epsilon);
    Vector a(1), nv(1);
    a[0] = factor * HuberDerivative(r, delta);
    nv[0] = numeric;
    huber.Add(RelativeError(a, nv));
  }
  results->push_back(huber.result);

  for (const bool center : {false, true}) {
    Tally tally = MakeTally(center ? "center_loss" : "nlc_loss", kOperatorTolerance);
    for (int t = 0; t < opt.trials; ++t) {
      const std::size_t n = 1 + rng.UniformIndex(20);
      const double delta = rng.Uniform(0.2, 2.0);
      PointFeatures pred(n, 3), target(n, 3);
      ForegroundMask fg(n);
      for (;;) {
        FillNormal(&pred.data(), rng);
        FillNormal(&target.data(), rng);
        bool any = false;
        double kink = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
          fg[i] = rng.Bernoulli(0.6);
          any = any || fg[i];
          for (std::size_t c = 0; c < 3 && fg[i]; ++c) {
            kink = std::min(kink, std::abs(std::abs(pred.at(i, c) - target.at(i, c)) - delta));
          }
        }
        if (any && kink > kKinkMargin) break;
      }
      const auto loss = [&] {
        return center ? CenterLoss(pred, target, fg, delta) : NlcLoss(pred, target, fg, delta);
      };
      const LossResult analytic = loss();
      std::vector<double*> vars;
      AddPointers(pred.data(), &vars);
      const Vector numeric = NumericGradient(vars, [&] { return loss().value; }, opt.epsilon);
      tally.Add(RelativeError(factor * ToVector(analytic.grad.data()), numeric));
    }
    results->push_back(tally.result);
  }

  Tally ce = MakeTally("cross_entropy", kOperatorTolerance);
  for (int t = 0; t < opt.trials; ++t) {
    const std::size_t m = 1 + rng.UniformIndex(20);
    const std::size_t k = 2 + rng.UniformIndex(4);
    PointFeatures logits(m, k);
    FillNormal(&logits.data(), rng);
    for (double& v : logits.data()) v *= 3.0;
    std::vector<int> labels(m);
    for (int& l : labels) l = static_cast<int>(rng.UniformIndex(k));
    const LossResult analytic = CrossEntropy(logits, labels);
    std::vector<double*> vars;
    AddPointers(logits.data(), &vars);
    const Vector numeric =
        NumericGradient(vars, [&] { return CrossEntropy(logits, labels).value; }, opt.epsilon);
    ce.Add(RelativeError(factor * ToVector(analytic.grad.data()), numeric));
  }
  results->push_back(ce.result);
}

void CheckModel(const GradcheckOptions& opt, Rng& rng,
                std::vector<GradcheckResult>* results) {
  using namespace pipeline;
  const double factor = opt.perturb_backward ? 1.0 + kPerturbation : 1.0;
  constexpr std::size_t kPoints = 3;
  constexpr std::size_t kGrid = 4;
  const ModelConfig config{4, 2, 4, true, true, true};
  const double delta = kDefaultHuberDelta;
  const LossWeights weights;

  Tally tally = MakeTally("model", kModelTolerance);
  for (int t = 0; t < opt.trials; ++t) {
    ToyModel model = InitModel(config, rng.NextU64());
    ModelInput input{PointFeatures(kPoints, config.point_in),
                     Tensor2D(config.image_in, kGrid, kGrid),
                     RandomCoords(kPoints, kGrid, kGrid, rng, 0.0)};
    Targets targets{PointFeatures(kPoints, 3), PointFeatures(kPoints, 3),
                    ForegroundMask(kPoints), std::vector<int>(kPoints),
                    std::vector<int>(kGrid * kGrid)};
    for (int attempt = 0;; ++attempt) {
      ForEachLayer(model, config, [&](const std::string&, Branch, DenseLayer& layer) {
        layer = RandomLayer(layer.in_channels(), layer.out_channels(), rng);
      });
      FillNormal(&input.points.data(), rng);
      for (double& v : input.image.data()) v = rng.Uniform(0.0, 1.0);
      for (double& v : targets.point_nlc.data()) v = rng.Uniform(0.0, 1.0);
      FillNormal(&targets.center_offsets.data(), rng);
      bool any = false;
      for (std::size_t i = 0; i < kPoints; ++i) {
        targets.foreground[i] = rng.Bernoulli(0.7);
        any = any || targets.foreground[i];
        targets.sem3d[i] = targets.foreground[i] ? 1 : 0;
      }
      for (int& l : targets.sem2d) l = static_cast<int>(rng.UniformIndex(2));
      if (any) {
        const ForwardResult fwd = Forward(model, config, input);
        if (KinkDistance(config, input, fwd, targets, delta) > kKinkMargin) break;
      }
      if (attempt == kMaxResamples) {
        throw Error(ErrorCode::kInvalidArgument, "could not avoid activation kinks");
      }
    }

    const ForwardResult fwd = Forward(model, config, input);
    const LossGrads lg = ComputeLosses(config, input, fwd, targets, weights, delta);
    ToyModelGrad grad = ZeroGrad(model, config);
    Backward(model, config, input, fwd, lg.image_terms, &grad);
    HeadGrads point_terms = lg.point_terms;
    point_terms.point_nlc.resize(0, 0);
    Backward(model, config, input, fwd, point_terms, &grad);

    // The probe is excluded from the total and checked against its own loss.
    std::vector<double> analytic;
    std::vector<double*> vars;
    ForEachLayer(grad, config, [&](const std::string& name, Branch, const DenseLayerGrad& g) {
      if (name != "point_nlc_head") Append(&analytic, g);
    });
    ForEachLayer(model, config, [&](const std::string& name, Branch, DenseLayer& layer) {
      if (name != "point_nlc_head") AddPointers(layer, &vars);
    });
    const auto loss = [&] {
      const ForwardResult f = Forward(model, config, input);
      return ComputeLosses(config, input, f, targets, weights, delta).losses;
    };
    Vector numeric =
        NumericGradient(vars, [&] { return loss().total; }, opt.epsilon);

    ToyModelGrad probe = ZeroGrad(model, config);
    HeadGrads probe_terms;
    probe_terms.point_nlc = lg.point_terms.point_nlc;
    Backward(model, config, input, fwd, probe_terms, &probe);
    std::vector<double*> probe_vars;
    AddPointers(model.point_nlc_head, &probe_vars);
    Append(&analytic, probe.point_nlc_head);
    const Vector probe_numeric =
        NumericGradient(probe_vars, [&] { return loss().point_nlc; }, opt.epsilon);
    Vector all_numeric(numeric.size() + probe_numeric.size());
    all_numeric << numeric, probe_numeric;
    tally.Add(RelativeError(factor * ToVector(analytic), all_numeric));
  }
  results->push_back(tally.result);
}

}  // namespace

const std::vector<std::string>& GradcheckGroups() {
  static const std::vector<std::string> kGroups = {"p2i", "i2p", "fuse", "losses", "model"};
  return kGroups;
}

std::vector<GradcheckResult> RunGradcheck(std::string_view group,
                                          const GradcheckOptions& options) {
  if (options.trials < 1) {
    throw Error(ErrorCode::kInvalidArgument, "trials must be at least 1");
  }
  if (!(options.epsilon > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");
  }
  const auto& groups = GradcheckGroups();
  if (group != "all" && std::find(groups.begin(), groups.end(), group) == groups.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown operator group '" + std::string(group) + "'");
  }
  std::vector<GradcheckResult> results;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (group != "all" && group != groups[g]) continue;
    // Each group has its own stream so selecting one reproduces its numbers
    // from an "all" run.
    Rng rng(MixSeed(options.seed, g));
    if (groups[g] == "p2i") CheckLinearOperators(true, options, rng, &results);
    if (groups[g] == "i2p") CheckLinearOperators(false, options, rng, &results);
    if (groups[g] == "fuse") CheckFusion(options, rng, &results);
    if (groups[g] == "losses") CheckLosses(options, rng, &results);
    if (groups[g] == "model") CheckModel(options, rng, &results);
  }
  return results;
}

}  // namespace nlcdet
