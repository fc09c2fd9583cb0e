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
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nlcdet/geometry.hpp"
#include "nlcdet/nlc.hpp"

namespace nlcdet {

// A LiDAR-frame point together with its normalized local coordinate.
struct Correspondence {
  Vec3 point;
  NlcValue nlc;
};

struct SolveOptions {
  int max_iterations = 200;
  // Convergence on the change of the RMS residual between accepted steps.
  double tol = 1e-10;
  double lm_damping_init = 1e-3;
  // Jacobian condition number above which the optimum is declared degenerate.
  double degenerate_condition = 1e8;
};

struct SolveReport {
  Box3D box;
  double rms_residual = 0.0;
  int iterations = 0;
  double condition_estimate = 0.0;
  bool converged = false;
  bool degenerate = false;
  // RMS residual after the initial guess and after every accepted step.
  std::vector<double> rms_history;
};

// Fits the 7-DOF box minimizing sum ||LidarToNlc(p_i, box) - n_i||^2 with
// Levenberg-Marquardt over (center, log dims, yaw).
//
// Correspondences are put in canonical order first, so permuting the input
// gives a bit-identical report. Without `init`, the fit is started from a
// PCA guess at each of the four axis-aligned yaw hypotheses and the lowest
// residual wins.
//
// Throws Error(kUnderdetermined) for fewer than 3 correspondences and
// Error(kInvalidArgument) for non-finite input.
SolveReport SolveBox(std::span<const Correspondence> corrs,
                     const std::optional<Box3D>& init = std::nullopt,
                     const SolveOptions& options = {});

// Residual vector (3 per correspondence) and its Jacobian with respect to
// (cx, cy, cz, log l, log w, log h, yaw).
void NlcResidualJacobian(std::span<const Correspondence> corrs,
                         const Box3D& box, Eigen::VectorXd* residual,
                         Eigen::MatrixXd* jacobian);

// The PCA-based starting box used when no init is supplied.
Box3D InitialBoxGuess(std::span<const Correspondence> corrs);

struct DofReport {
  std::size_t equations = 0;
  std::size_t unknowns = 7;
  std::size_t jacobian_rank = 0;
  Eigen::VectorXd singular_values;
};

// Counts equations and reports the numerical rank (singular values above
// 1e-10 * sigma_max) of the Jacobian at `at`, or, when omitted, at a
// least-squares estimate (>= 3 correspondences) or the initial guess.
// Throws Error(kInvalidArgument) for an empty input.
DofReport DofAnalysis(std::span<const Correspondence> corrs,
                      const std::optional<Box3D>& at = std::nullopt);

struct NoiseLevel {
  double sigma = 0.0;
  int trials = 0;
  // Medians over trials of the center distance (m), the largest absolute
  // dimension error (m) and the absolute wrapped yaw error (rad).
  double median_center_error = 0.0;
  double median_dim_error = 0.0;
  double median_yaw_error = 0.0;
  int converged = 0;
};

// Monte-Carlo sensitivity of SolveBox (no init) to NLC noise: for every
// sigma, `trials` times draw `points` uniform interior NLCs of `box`, add
// N(0, sigma) per axis and refit. Throws Error(kInvalidArgument) for
// trials < 1, points < 3 or a negative sigma.
std::vector<NoiseLevel> NoiseSweep(const Box3D& box,
                                   std::span<const double> sigmas, int trials,
                                   std::size_t points, std::uint64_t seed);

}  // namespace nlcdet
