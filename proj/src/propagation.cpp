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

#include "nlcdet/propagation.hpp"

#include <cmath>
#include <vector>

#include "nlcdet/error.hpp"

namespace nlcdet {
namespace {

// Pixel index of a point under floor binning, or -1 when outside the grid.
long BinIndex(const PixelCoord& x, std::size_t height, std::size_t width) {
  if (!(x.u >= 0.0 && x.u < static_cast<double>(width) && x.v >= 0.0 &&
        x.v < static_cast<double>(height))) {
    return -1;
  }
  const auto r = static_cast<long>(std::floor(x.v));
  const auto c = static_cast<long>(std::floor(x.u));
  return r * static_cast<long>(width) + c;
}

struct BilinearTap {
  long index[4];
  double weight[4];
};

// Four neighbours of (u, v); taps outside the grid get index -1.
bool BilinearTaps(const PixelCoord& x, std::size_t height, std::size_t width,
                  BilinearTap* tap) {
  const double gx = x.u - 0.5;
  const double gy = x.v - 0.5;
  if (!(gx > -1.0 && gx < static_cast<double>(width) && gy > -1.0 &&
        gy < static_cast<double>(height))) {
    return false;
  }
  const double fx0 = std::floor(gx);
  const double fy0 = std::floor(gy);
  const double ax = gx - fx0;
  const double ay = gy - fy0;
  const long x0 = static_cast<long>(fx0);
  const long y0 = static_cast<long>(fy0);
  const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
  const double ws[4] = {(1.0 - ax) * (1.0 - ay), ax * (1.0 - ay),
                        (1.0 - ax) * ay, ax * ay};
  for (int k = 0; k < 4; ++k) {
    const bool inside = xs[k] >= 0 && xs[k] < static_cast<long>(width) &&
                        ys[k] >= 0 && ys[k] < static_cast<long>(height);
    tap->index[k] = inside ? ys[k] * static_cast<long>(width) + xs[k] : -1;
    tap->weight[k] = ws[k];
  }
  return true;
}

Activations Relu(const Activations& x) { return x.cwiseMax(0.0); }

Activations ReluMask(const Activations& pre, const Activations& grad) {
  return (pre.array() > 0.0).select(grad, 0.0);
}

void CheckLayer(const DenseLayer& layer, Eigen::Index in_channels,
                const char* what) {
  if (layer.weights.cols() != in_channels ||
      layer.bias.size() != layer.weights.rows()) {
    throw Error(ErrorCode::kShapeError,
                std::string(what) + ": layer does not match input channels");
  }
}

}  // namespace

Tensor2D PointToPixel(const PointFeatures& features,
                      const ProjectedCoords& coords, std::size_t height,
                      std::size_t width) {
  if (features.count() != coords.size()) {
    throw Error(ErrorCode::kShapeError, "point_to_pixel: count mismatch");
  }
  const std::size_t channels = features.channels();
  Tensor2D out(channels, height, width);
  std::vector<int> counts(height * width, 0);
  const std::size_t plane = height * width;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const long idx = BinIndex(coords[i], height, width);
    if (idx < 0) continue;
    ++counts[idx];
    for (std::size_t c = 0; c < channels; ++c) {
      out.data()[c * plane + idx] += features.at(i, c);
    }
  }
  for (std::size_t idx = 0; idx < plane; ++idx) {
    if (counts[idx] <= 1) continue;
    const double inv = 1.0 / counts[idx];
    for (std::size_t c = 0; c < channels; ++c) out.data()[c * plane + idx] *= inv;
  }
  return out;
}

PointFeatures PointToPixelBackward(const Tensor2D& grad_out,
                                   const ProjectedCoords& coords,
                                   std::size_t count) {
  if (count != coords.size()) {
    throw Error(ErrorCode::kShapeError, "point_to_pixel_backward: count mismatch");
  }
  const std::size_t height = grad_out.height();
  const std::size_t width = grad_out.width();
  const std::size_t plane = height * width;
  std::vector<int> counts(plane, 0);
  std::vector<long> bins(count);
  for (std::size_t i = 0; i < count; ++i) {
    bins[i] = BinIndex(coords[i], height, width);
    if (bins[i] >= 0) ++counts[bins[i]];
  }
  PointFeatures grad(count, grad_out.channels());
  for (std::size_t i = 0; i < count; ++i) {
    if (bins[i] < 0) continue;
    const double inv = 1.0 / counts[bins[i]];
    for (std::size_t c = 0; c < grad_out.channels(); ++c) {
      grad.at(i, c) = grad_out.data()[c * plane + bins[i]] * inv;
    }
  }
  return grad;
}

PointFeatures PixelToPoint(const Tensor2D& features,
                           const ProjectedCoords& coords) {
  const std::size_t plane = features.pixels();
  PointFeatures out(coords.size(), features.channels());
  BilinearTap tap;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!BilinearTaps(coords[i], features.height(), features.width(), &tap)) {
      continue;
    }
    for (std::size_t c = 0; c < features.channels(); ++c) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) {
        if (tap.index[k] >= 0) {
          acc += tap.weight[k] * features.data()[c * plane + tap.index[k]];
        }
      }
      out.at(i, c) = acc;
    }
  }
  return out;
}

Tensor2D PixelToPointBackward(const PointFeatures& grad_points,
                              const ProjectedCoords& coords,
                              std::size_t height, std::size_t width) {
  if (grad_points.count() != coords.size()) {
    throw Error(ErrorCode::kShapeError, "pixel_to_point_backward: count mismatch");
  }
  Tensor2D grad(grad_points.channels(), height, width);
  const std::size_t plane = height * width;
  BilinearTap tap;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!BilinearTaps(coords[i], height, width, &tap)) continue;
    for (std::size_t c = 0; c < grad_points.channels(); ++c) {
      const double g = grad_points.at(i, c);
      for (int k = 0; k < 4; ++k) {
        if (tap.index[k] >= 0) {
          grad.data()[c * plane + tap.index[k]] += tap.weight[k] * g;
        }
      }
    }
  }
  return grad;
}

DenseLayer DenseLayer::Zeros(std::size_t in, std::size_t out) {
  return {RowMatrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
}

DenseLayer DenseLayer::Identity(std::size_t channels) {
  const auto n = static_cast<Eigen::Index>(channels);
  return {RowMatrix::Identity(n, n), Eigen::VectorXd::Zero(n)};
}

DenseLayer DenseLayer::Random(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer layer = Zeros(in, out);
  const double scale = std::sqrt(2.0 / static_cast<double>(in));
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      layer.weights(r, c) = rng.Normal(0.0, scale);
    }
  }
  return layer;
}

DenseLayerGrad DenseLayerGrad::ZerosLike(const DenseLayer& layer) {
  return {RowMatrix::Zero(layer.weights.rows(), layer.weights.cols()),
          Eigen::VectorXd::Zero(layer.bias.size())};
}

DenseLayerGrad& DenseLayerGrad::operator+=(const DenseLayerGrad& other) {
  weights += other.weights;
  bias += other.bias;
  return *this;
}

Activations DenseForward(const DenseLayer& layer, const Activations& input) {
  CheckLayer(layer, input.rows(), "dense");
  Activations out = layer.weights * input;
  out.colwise() += layer.bias;
  return out;
}

Activations FuseForward(const Activations& a, const Activations& b,
                        const FusionLayers& layers, FusionCache* cache) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeError, "fusion inputs differ in sample count");
  }
  CheckLayer(layers.first, a.rows(), "fusion first layer");
  CheckLayer(layers.second, layers.first.weights.rows() + b.rows(),
             "fusion second layer");
  Activations pre_first = DenseForward(layers.first, a);
  Activations hidden = Relu(pre_first);
  Activations cat(hidden.rows() + b.rows(), a.cols());
  cat.topRows(hidden.rows()) = hidden;
  cat.bottomRows(b.rows()) = b;
  Activations pre_second = DenseForward(layers.second, cat);
  Activations out = Relu(pre_second);
  if (cache != nullptr) {
    cache->a = a;
    cache->b = b;
    cache->pre_first = std::move(pre_first);
    cache->hidden = std::move(hidden);
    cache->pre_second = std::move(pre_second);
  }
  return out;
}

FuseBackwardResult FuseBackward(const FusionCache& cache,
                                const FusionLayers& layers,
                                const Activations& grad_out) {
  if (grad_out.rows() != cache.pre_second.rows() ||
      grad_out.cols() != cache.pre_second.cols()) {
    throw Error(ErrorCode::kShapeError, "fusion backward: gradient shape mismatch");
  }
  const Eigen::Index hidden_rows = cache.hidden.rows();
  Activations cat(hidden_rows + cache.b.rows(), cache.a.cols());
  cat.topRows(hidden_rows) = cache.hidden;
  cat.bottomRows(cache.b.rows()) = cache.b;

  FuseBackwardResult result;
  const Activations g2 = ReluMask(cache.pre_second, grad_out);
  result.layers.second.weights = g2 * cat.transpose();
  result.layers.second.bias = g2.rowwise().sum();
  const Activations grad_cat = layers.second.weights.transpose() * g2;
  result.grad_b = grad_cat.bottomRows(cache.b.rows());
  const Activations g1 = ReluMask(cache.pre_first, grad_cat.topRows(hidden_rows));
  result.layers.first.weights = g1 * cache.a.transpose();
  result.layers.first.bias = g1.rowwise().sum();
  result.grad_a = layers.first.weights.transpose() * g1;
  return result;
}

Activations ToActivations(const Tensor2D& t) { return t.matrix(); }

Activations ToActivations(const PointFeatures& p) {
  return p.matrix().transpose();
}

Tensor2D TensorFromActivations(const Activations& a, std::size_t height,
                               std::size_t width) {
  if (static_cast<std::size_t>(a.cols()) != height * width) {
    throw Error(ErrorCode::kShapeError, "activation columns != H * W");
  }
  Tensor2D t(static_cast<std::size_t>(a.rows()), height, width);
  t.matrix() = a;
  return t;
}

PointFeatures PointsFromActivations(const Activations& a) {
  PointFeatures p(static_cast<std::size_t>(a.cols()),
                  static_cast<std::size_t>(a.rows()));
  p.matrix() = a.transpose();
  return p;
}

Tensor2D FuseP2I(const Tensor2D& f_p2i, const Tensor2D& f_img,
                 const FusionLayers& layers, FusionCache* cache) {
  if (f_p2i.height() != f_img.height() || f_p2i.width() != f_img.width()) {
    throw Error(ErrorCode::kShapeError, "fuse_p2i: spatial extents differ");
  }
  return TensorFromActivations(
      FuseForward(ToActivations(f_p2i), ToActivations(f_img), layers, cache),
      f_img.height(), f_img.width());
}

FuseP2IGrads FuseP2IBackward(const FusionCache& cache,
                             const FusionLayers& layers,
                             const Tensor2D& grad_out) {
  FuseBackwardResult r = FuseBackward(cache, layers, ToActivations(grad_out));
  return {TensorFromActivations(r.grad_a, grad_out.height(), grad_out.width()),
          TensorFromActivations(r.grad_b, grad_out.height(), grad_out.width()),
          std::move(r.layers)};
}

PointFeatures FuseI2P(const PointFeatures& f_i2p, const PointFeatures& g,
                      const FusionLayers& layers, FusionCache* cache) {
  return PointsFromActivations(
      FuseForward(ToActivations(f_i2p), ToActivations(g), layers, cache));
}

FuseI2PGrads FuseI2PBackward(const FusionCache& cache,
                             const FusionLayers& layers,
                             const PointFeatures& grad_out) {
  FuseBackwardResult r = FuseBackward(cache, layers, ToActivations(grad_out));
  return {PointsFromActivations(r.grad_a), PointsFromActivations(r.grad_b),
          std::move(r.layers)};
}

}  // namespace nlcdet
