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

#include <string_view>
#include <vector>

#include "nlcdet/metrics.hpp"
#include "nlcdet/solver.hpp"

namespace nlcdet::cli {

// Comma-separated numeric tables. Blank lines and lines starting with '#'
// are skipped, as is a first line whose first field is not a number (a
// header). Throws Error(kParseError) with 1-based line and column.

// x,y,z,x_nlc,y_nlc,z_nlc
std::vector<Correspondence> ParseCorrespondencesCsv(std::string_view text);

// x,y,z,l,w,h,yaw,score,class
std::vector<Detection> ParseDetectionsCsv(std::string_view text);

// x,y,z,l,w,h,yaw,class
struct GroundTruthTable {
  std::vector<Box3D> boxes;
  std::vector<int> classes;
};
GroundTruthTable ParseGroundTruthCsv(std::string_view text);

}  // namespace nlcdet::cli
