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

#include "nlcdet/pipeline/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlcdet/error.hpp"
#include "nlcdet/random.hpp"

namespace nlcdet::pipeline {
namespace {

constexpr double kFusionInitScale = 0.1;

Activations Relu(const Activations& x) { return x.cwiseMax(0.0); }

// Empty matrices stand for zero gradients.
void Accumulate(Activations* dst, const Activations& src) {
  if (src.size() == 0) return;
  if (dst->size() == 0) {
    *dst = src;
  } else {
    *dst += src;
  }
}

void AccumulateLayer(DenseLayerGrad* grad, const Activations& dout,
                     const Activations& input) {
  grad->weights.noalias() += dout * input.transpose();
  grad->bias += dout.rowwise().sum();
}

// Gradient of a dense layer's input, accumulating the layer's own gradient.
Activations DenseBackward(const DenseLayer& layer, const Activations& input,
                          const Activations& dout, DenseLayerGrad* grad) {
  AccumulateLayer(grad, dout, input);
  return layer.weights.transpose() * dout;
}

void HeadBackward(const DenseLayer& layer, const Activations& input,
                  const Activations& dout, DenseLayerGrad* grad,
                  Activations* dinput) {
  if (dout.size() == 0) return;
  Accumulate(dinput, DenseBackward(layer, input, dout, grad));
}

void AccumulateFusion(FusionGrads* dst, const FusionGrads& src) {
  dst->first += src.first;
  dst->second += src.second;
}

double MinAbs(const Activations& a) {
  return a.size() == 0 ? std::numeric_limits<double>::infinity()
                       : a.cwiseAbs().minCoeff();
}

double HuberKink(const PointFeatures& pred, const PointFeatures& target,
                 const ForegroundMask& fg, double delta) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pred.count(); ++i) {
    if (!fg[i]) continue;
    for (std::size_t c = 0; c < pred.channels(); ++c) {
      best = std::min(best, std::abs(std::abs(pred.at(i, c) - target.at(i, c)) - delta));
    }
  }
  return best;
}

// The second layer starts as identity on the branch's own features plus a
// small random read of the propagated ones, so enabling fusion does not
// disturb either branch at initialization.
FusionLayers InitFusion(std::size_t hidden, Rng& rng) {
  FusionLayers f{DenseLayer::Random(hidden, hidden, rng),
                 DenseLayer::Random(2 * hidden, hidden, rng)};
  const auto h = static_cast<Eigen::Index>(hidden);
  f.second.weights.leftCols(h) *= kFusionInitScale;
  f.second.weights.rightCols(h).setIdentity();
  return f;
}

}  // namespace

ToyModel InitModel(const ModelConfig& config, std::uint64_t seed) {
  if (config.point_in == 0 || config.hidden == 0 ||
      (config.image_branch && config.image_in == 0)) {
    throw Error(ErrorCode::kInvalidArgument, "layer widths must be positive");
  }
  if (!config.image_branch && (config.enable_p2i || config.enable_i2p)) {
    throw Error(ErrorCode::kInvalidArgument, "fusion needs the image branch");
  }
  const std::size_t h = config.hidden;
  ToyModel model;
  Rng point_rng(MixSeed(seed, 1));
  model.point_stage[0] = DenseLayer::Random(config.point_in, h, point_rng);
  model.point_stage[1] = DenseLayer::Random(h, h, point_rng);
  model.point_sem_head = DenseLayer::Random(h, 2, point_rng);
  model.point_center_head = DenseLayer::Random(h, 3, point_rng);
  model.point_nlc_head = DenseLayer::Random(h, 3, point_rng);
  if (config.image_branch) {
    Rng image_rng(MixSeed(seed, 2));
    model.image_stage[0] = DenseLayer::Random(config.image_in, h, image_rng);
    model.image_stage[1] = DenseLayer::Random(h, h, image_rng);
    model.image_nlc_head = DenseLayer::Random(h, 3, image_rng);
    model.image_sem_head = DenseLayer::Random(h, 2, image_rng);
  }
  for (int s = 0; s < kStages; ++s) {
    if (config.enable_p2i) {
      Rng rng(MixSeed(seed, 10 + static_cast<std::uint64_t>(s)));
      model.p2i[s] = InitFusion(h, rng);
    }
    if (config.enable_i2p) {
      Rng rng(MixSeed(seed, 20 + static_cast<std::uint64_t>(s)));
      model.i2p[s] = InitFusion(h, rng);
    }
  }
  return model;
}

ToyModelGrad ZeroGrad(const ToyModel& model, const ModelConfig& config) {
  ToyModelGrad grad;
  // Mirror the layer layout by walking both structures in the same order.
  std::vector<const DenseLayer*> layers;
  ForEachLayer(model, config, [&](const std::string&, Branch, const DenseLayer& l) {
    layers.push_back(&l);
  });
  std::size_t k = 0;
  ForEachLayer(grad, config, [&](const std::string&, Branch, DenseLayerGrad& g) {
    g = DenseLayerGrad::ZerosLike(*layers[k++]);
  });
  return grad;
}

ParameterCount CountParameters(const ToyModel& model, const ModelConfig& config) {
  ParameterCount count;
  ForEachLayer(model, config, [&](const std::string&, Branch b, const DenseLayer& l) {
    (b == Branch::kPoint ? count.point : count.image) += l.parameter_count();
  });
  return count;
}

ForwardResult Forward(const ToyModel& model, const ModelConfig& config,
                      const ModelInput& input) {
  const std::size_t n = input.points.count();
  if (input.points.channels() != config.point_in || input.coords.size() != n) {
    throw Error(ErrorCode::kShapeError, "point inputs do not match the model");
  }
  ForwardResult out;
  out.point_in = ToActivations(input.points);
  if (config.image_branch) {
    if (input.image.channels() != config.image_in) {
      throw Error(ErrorCode::kShapeError, "image inputs do not match the model");
    }
    out.height = input.image.height();
    out.width = input.image.width();
    out.image_in = ToActivations(input.image);
  }

  for (int s = 0; s < kStages; ++s) {
    StageCache& st = out.stages[s];
    const Activations& point_prev = s == 0 ? out.point_in : out.stages[s - 1].point_out;
    st.point_pre = DenseForward(model.point_stage[s], point_prev);
    st.point_act = Relu(st.point_pre);
    if (config.image_branch) {
      const Activations& image_prev =
          s == 0 ? out.image_in : out.stages[s - 1].image_out;
      st.image_pre = DenseForward(model.image_stage[s], image_prev);
      st.image_act = Relu(st.image_pre);
    }
    // Both directions read the pre-fusion features of this stage.
    if (config.enable_p2i) {
      st.scattered = ToActivations(PointToPixel(PointsFromActivations(st.point_act),
                                                input.coords, out.height, out.width));
      st.image_out = FuseForward(st.scattered, st.image_act, model.p2i[s], &st.p2i);
    } else {
      st.image_out = st.image_act;
    }
    if (config.enable_i2p) {
      st.gathered = ToActivations(PixelToPoint(
          TensorFromActivations(st.image_act, out.height, out.width), input.coords));
      st.point_out = FuseForward(st.gathered, st.point_act, model.i2p[s], &st.i2p);
    } else {
      st.point_out = st.point_act;
    }
  }

  const StageCache& last = out.stages[kStages - 1];
  if (config.image_branch) {
    out.image_nlc = DenseForward(model.image_nlc_head, last.image_out);
    out.image_sem = DenseForward(model.image_sem_head, last.image_out);
  }
  out.point_sem = DenseForward(model.point_sem_head, last.point_out);
  out.point_center = DenseForward(model.point_center_head, last.point_out);
  out.point_nlc = DenseForward(model.point_nlc_head, last.point_out);
  return out;
}

void Backward(const ToyModel& model, const ModelConfig& config,
              const ModelInput& input, const ForwardResult& fwd,
              const HeadGrads& head_grads, ToyModelGrad* grad) {
  const std::size_t n = input.points.count();
  const StageCache& last = fwd.stages[kStages - 1];
  Activations d_point;
  Activations d_image;
  HeadBackward(model.point_sem_head, last.point_out, head_grads.point_sem,
               &grad->point_sem_head, &d_point);
  HeadBackward(model.point_center_head, last.point_out, head_grads.point_center,
               &grad->point_center_head, &d_point);
  if (head_grads.point_nlc.size() != 0) {
    AccumulateLayer(&grad->point_nlc_head, head_grads.point_nlc, last.point_out);
  }
  if (config.image_branch) {
    HeadBackward(model.image_nlc_head, last.image_out, head_grads.image_nlc,
                 &grad->image_nlc_head, &d_image);
    HeadBackward(model.image_sem_head, last.image_out, head_grads.image_sem,
                 &grad->image_sem_head, &d_image);
  }

  for (int s = kStages - 1; s >= 0; --s) {
    const StageCache& st = fwd.stages[s];
    Activations d_point_act;
    Activations d_image_act;
    if (config.enable_i2p) {
      if (d_point.size() != 0) {
        FuseBackwardResult r = FuseBackward(st.i2p, model.i2p[s], d_point);
        AccumulateFusion(&grad->i2p[s], r.layers);
        Accumulate(&d_point_act, r.grad_b);
        Accumulate(&d_image_act,
                   ToActivations(PixelToPointBackward(PointsFromActivations(r.grad_a),
                                                      input.coords, fwd.height,
                                                      fwd.width)));
      }
    } else {
      Accumulate(&d_point_act, d_point);
    }
    if (config.enable_p2i) {
      if (d_image.size() != 0) {
        FuseBackwardResult r = FuseBackward(st.p2i, model.p2i[s], d_image);
        AccumulateFusion(&grad->p2i[s], r.layers);
        Accumulate(&d_image_act, r.grad_b);
        Accumulate(&d_point_act,
                   ToActivations(PointToPixelBackward(
                       TensorFromActivations(r.grad_a, fwd.height, fwd.width),
                       input.coords, n)));
      }
    } else {
      Accumulate(&d_image_act, d_image);
    }

    d_point.resize(0, 0);
    d_image.resize(0, 0);
    if (d_point_act.size() != 0) {
      const Activations d_pre = (st.point_pre.array() > 0.0).select(d_point_act, 0.0);
      const Activations& prev = s == 0 ? fwd.point_in : fwd.stages[s - 1].point_out;
      AccumulateLayer(&grad->point_stage[s], d_pre, prev);
      if (s > 0) d_point = model.point_stage[s].weights.transpose() * d_pre;
    }
    if (d_image_act.size() != 0) {
      const Activations d_pre = (st.image_pre.array() > 0.0).select(d_image_act, 0.0);
      const Activations& prev = s == 0 ? fwd.image_in : fwd.stages[s - 1].image_out;
      AccumulateLayer(&grad->image_stage[s], d_pre, prev);
      if (s > 0) d_image = model.image_stage[s].weights.transpose() * d_pre;
    }
  }
}

LossGrads ComputeLosses(const ModelConfig& config, const ModelInput& input,
                        const ForwardResult& fwd, const Targets& targets,
                        const LossWeights& weights, double huber_delta) {
  LossGrads out;
  LossBreakdown& l = out.losses;

  if (config.image_branch) {
    const PointFeatures gathered = PixelToPoint(
        TensorFromActivations(fwd.image_nlc, fwd.height, fwd.width), input.coords);
    LossResult nlc = NlcLoss(gathered, targets.point_nlc, targets.foreground, huber_delta);
    l.image_nlc = nlc.value;
    nlc.grad.matrix() *= weights.nlc;
    out.image_terms.image_nlc = ToActivations(
        PixelToPointBackward(nlc.grad, input.coords, fwd.height, fwd.width));

    LossResult sem = CrossEntropy(PointsFromActivations(fwd.image_sem), targets.sem2d);
    l.sem2d = sem.value;
    out.image_terms.image_sem = weights.sem2d * ToActivations(sem.grad);
  }

  LossResult sem3d = CrossEntropy(PointsFromActivations(fwd.point_sem), targets.sem3d);
  l.sem3d = sem3d.value;
  out.point_terms.point_sem = weights.sem3d * ToActivations(sem3d.grad);

  LossResult center = CenterLoss(PointsFromActivations(fwd.point_center),
                                 targets.center_offsets, targets.foreground, huber_delta);
  l.center = center.value;
  out.point_terms.point_center = weights.center * ToActivations(center.grad);

  LossResult pnlc = NlcLoss(PointsFromActivations(fwd.point_nlc), targets.point_nlc,
                            targets.foreground, huber_delta);
  l.point_nlc = pnlc.value;
  out.point_terms.point_nlc = ToActivations(pnlc.grad);

  l.total = TotalLoss(0.0, 0.0, l.image_nlc, l.sem2d, l.sem3d, l.center, weights);
  return out;
}

double KinkDistance(const ModelConfig& config, const ModelInput& input,
                    const ForwardResult& fwd, const Targets& targets,
                    double huber_delta) {
  double best = std::numeric_limits<double>::infinity();
  for (const StageCache& st : fwd.stages) {
    best = std::min({best, MinAbs(st.point_pre), MinAbs(st.image_pre),
                     MinAbs(st.p2i.pre_first), MinAbs(st.p2i.pre_second),
                     MinAbs(st.i2p.pre_first), MinAbs(st.i2p.pre_second)});
  }
  if (config.image_branch) {
    const PointFeatures gathered = PixelToPoint(
        TensorFromActivations(fwd.image_nlc, fwd.height, fwd.width), input.coords);
    best = std::min(best, HuberKink(gathered, targets.point_nlc, targets.foreground,
                                    huber_delta));
  }
  best = std::min(best, HuberKink(PointsFromActivations(fwd.point_center),
                                  targets.center_offsets, targets.foreground,
                                  huber_delta));
  best = std::min(best, HuberKink(PointsFromActivations(fwd.point_nlc),
                                  targets.point_nlc, targets.foreground, huber_delta));
  return best;
}

}  // namespace nlcdet::pipeline
