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

#include "nlcdet/tensor.hpp"

#include "nlcdet/error.hpp"

namespace nlcdet {

Tensor2D::Tensor2D(std::size_t channels, std::size_t height, std::size_t width)
    : channels_(channels), height_(height), width_(width) {
  if (channels == 0 || height == 0 || width == 0) {
    throw Error(ErrorCode::kShapeError, "tensor extents must be positive");
  }
  data_.assign(channels * height * width, 0.0);
}

PointFeatures::PointFeatures(std::size_t count, std::size_t channels)
    : count_(count), channels_(channels) {
  if (channels == 0) {
    throw Error(ErrorCode::kShapeError, "point features need >= 1 channel");
  }
  data_.assign(count * channels, 0.0);
}

}  // namespace nlcdet
