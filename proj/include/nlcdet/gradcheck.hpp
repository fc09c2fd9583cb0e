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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nlcdet {

struct GradcheckOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  double epsilon = 1e-6;
  // Scales every analytic gradient by 1 + 1e-3; a negative control that
  // must make the check fail.
  bool perturb_backward = false;
};

struct GradcheckResult {
  std::string name;
  int trials = 0;
  // Norm-wise relative error |analytic - numeric| / max(|analytic|, |numeric|),
  // or for adjoint checks the relative mismatch of the two inner products.
  double max_error = 0.0;
  double threshold = 0.0;
  bool passed() const { return max_error < threshold; }
};

// Operator groups accepted by RunGradcheck besides "all".
const std::vector<std::string>& GradcheckGroups();

// Compares analytic backward passes against central finite differences on
// random double-precision instances, resampling instances whose activations
// or Huber residuals sit within 1e-4 of a kink. Groups: p2i, i2p (each with
// its adjoint identity), fuse, losses, model. Throws Error(kInvalidArgument)
// for an unknown group or trials < 1.
std::vector<GradcheckResult> RunGradcheck(std::string_view group,
                                          const GradcheckOptions& options);

}  // namespace nlcdet
