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

#include <Eigen/Core>

#include "nlcdet/random.hpp"
#include "nlcdet/tensor.hpp"

namespace nlcdet {

// --- Point <-> pixel propagation -------------------------------------------
//
// Points are binned into pixel (floor(v), floor(u)); points outside
// [0, W) x [0, H) are ignored in both directions. All four operators are
// linear in their feature argument, and each *Backward is the exact adjoint
// of its forward.

// Average of the features of all points falling in each pixel; empty pixels
// are 0. Throws Error(kShapeError) if coords and features disagree in count.
Tensor2D PointToPixel(const PointFeatures& features,
                      const ProjectedCoords& coords, std::size_t height,
                      std::size_t width);

// A point in a pixel shared by n points receives grad(r, c) / n.
PointFeatures PointToPixelBackward(const Tensor2D& grad_out,
                                   const ProjectedCoords& coords,
                                   std::size_t count);

// Bilinear sample at each point with zero padding; pixel centers sit at
// half-integer coordinates.
PointFeatures PixelToPoint(const Tensor2D& features,
                           const ProjectedCoords& coords);

// Scatters each point's gradient to its four bilinear neighbours.
Tensor2D PixelToPointBackward(const PointFeatures& grad_points,
                              const ProjectedCoords& coords,
                              std::size_t height, std::size_t width);

// --- Dense layers and fusion blocks ----------------------------------------

// Shared linear map applied independently to every pixel or point.
struct DenseLayer {
  RowMatrix weights;        // out x in
  Eigen::VectorXd bias;     // out

  std::size_t in_channels() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_channels() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(weights.size() + bias.size());
  }

  static DenseLayer Zeros(std::size_t in, std::size_t out);
  // Identity weights (in == out), zero bias.
  static DenseLayer Identity(std::size_t channels);
  // He-scaled normal weights, zero bias.
  static DenseLayer Random(std::size_t in, std::size_t out, Rng& rng);
};

struct DenseLayerGrad {
  RowMatrix weights;
  Eigen::VectorXd bias;

  static DenseLayerGrad ZerosLike(const DenseLayer& layer);
  DenseLayerGrad& operator+=(const DenseLayerGrad& other);
  double SquaredNorm() const {
    return weights.squaredNorm() + bias.squaredNorm();
  }
};

// Channel-major activations: rows are channels, columns are samples.
using Activations = Eigen::MatrixXd;

// W x + b for every column.
Activations DenseForward(const DenseLayer& layer, const Activations& input);

// relu(second(cat[relu(first(a)), b])). `first` maps a's channels; `second`
// consumes first.out + b's channels.
struct FusionLayers {
  DenseLayer first;
  DenseLayer second;

  std::size_t parameter_count() const {
    return first.parameter_count() + second.parameter_count();
  }
};

struct FusionGrads {
  DenseLayerGrad first;
  DenseLayerGrad second;
};

struct FusionCache {
  Activations a;
  Activations b;
  Activations pre_first;
  Activations hidden;
  Activations pre_second;
};

// Throws Error(kShapeError) on channel or sample-count mismatch.
Activations FuseForward(const Activations& a, const Activations& b,
                        const FusionLayers& layers, FusionCache* cache);

struct FuseBackwardResult {
  Activations grad_a;
  Activations grad_b;
  FusionGrads layers;
};

FuseBackwardResult FuseBackward(const FusionCache& cache,
                                const FusionLayers& layers,
                                const Activations& grad_out);

// Point-to-pixel refinement: relu(CONV(CAT[relu(CONV(f_p2i)), f_img])) with
// 1x1 convolutions.
Tensor2D FuseP2I(const Tensor2D& f_p2i, const Tensor2D& f_img,
                 const FusionLayers& layers, FusionCache* cache = nullptr);

struct FuseP2IGrads {
  Tensor2D grad_p2i;
  Tensor2D grad_img;
  FusionGrads layers;
};

FuseP2IGrads FuseP2IBackward(const FusionCache& cache,
                             const FusionLayers& layers,
                             const Tensor2D& grad_out);

// Pixel-to-point refinement: relu(MLP(CAT[relu(MLP(f_i2p)), g])).
PointFeatures FuseI2P(const PointFeatures& f_i2p, const PointFeatures& g,
                      const FusionLayers& layers, FusionCache* cache = nullptr);

struct FuseI2PGrads {
  PointFeatures grad_i2p;
  PointFeatures grad_points;
  FusionGrads layers;
};

FuseI2PGrads FuseI2PBackward(const FusionCache& cache,
                             const FusionLayers& layers,
                             const PointFeatures& grad_out);

// Conversions between the containers and channel-major activations.
Activations ToActivations(const Tensor2D& t);
Activations ToActivations(const PointFeatures& p);
Tensor2D TensorFromActivations(const Activations& a, std::size_t height,
                               std::size_t width);
PointFeatures PointsFromActivations(const Activations& a);

}  // namespace nlcdet
