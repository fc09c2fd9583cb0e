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

#include "nlcdet/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <tuple>

#include <Eigen/Dense>

#include "nlcdet/error.hpp"
#include "nlcdet/random.hpp"

namespace nlcdet {
namespace {

using Params = Eigen::Matrix<double, 7, 1>;

constexpr double kMinInitDim = 0.1;
constexpr double kMaxDamping = 1e16;
constexpr double kRankRelTolerance = 1e-10;

Params ToParams(const Box3D& box) {
  Params x;
  x << box.center(), std::log(box.length()), std::log(box.width()),
      std::log(box.height()), box.yaw();
  return x;
}

Box3D ToBox(const Params& x) {
  return Box3D(x.head<3>(), std::exp(x[3]), std::exp(x[4]), std::exp(x[5]), x[6]);
}

bool ParamsUsable(const Params& x) {
  // exp() of the log-dimensions must stay finite and positive.
  return x.allFinite() && x.segment<3>(3).maxCoeff() < 700.0 &&
         x.segment<3>(3).minCoeff() > -700.0;
}

double Rms(const Eigen::VectorXd& r) {
  return std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

std::vector<Correspondence> Canonical(std::span<const Correspondence> corrs) {
  std::vector<Correspondence> sorted(corrs.begin(), corrs.end());
  const auto key = [](const Correspondence& c) {
    return std::make_tuple(c.point.x(), c.point.y(), c.point.z(), c.nlc.x(),
                           c.nlc.y(), c.nlc.z());
  };
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](const Correspondence& a, const Correspondence& b) {
                     return key(a) < key(b);
                   });
  return sorted;
}

double ConditionNumber(const Eigen::MatrixXd& jacobian) {
  if (jacobian.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return s[0] / smin;
}

SolveReport RunLevenbergMarquardt(std::span<const Correspondence> corrs,
                                  const Box3D& init,
                                  const SolveOptions& options) {
  Params x = ToParams(init);
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  NlcResidualJacobian(corrs, init, &r, &jac);
  double cost = r.squaredNorm();
  double rms = Rms(r);

  SolveReport report{init, rms, 0, 0.0, false, false, {rms}};
  double lambda = options.lm_damping_init;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    report.iterations = iter + 1;
    const Params grad = jac.transpose() * r;
    if (cost == 0.0 || grad.lpNorm<Eigen::Infinity>() == 0.0) {
      report.converged = true;
      break;
    }
    const Eigen::Matrix<double, 7, 7> normal = jac.transpose() * jac;
    // Marquardt scaling; the floor keeps unobservable directions damped.
    const double diag_floor = 1e-12 * std::max(normal.diagonal().maxCoeff(), 1.0);
    const Params scale = normal.diagonal().cwiseMax(diag_floor);

    Eigen::Matrix<double, 7, 7> damped = normal;
    damped.diagonal() += lambda * scale;
    const Params step = damped.ldlt().solve(-grad);
    const Params candidate = x + step;

    bool accepted = false;
    if (step.allFinite() && ParamsUsable(candidate)) {
      const Box3D trial = ToBox(candidate);
      Eigen::VectorXd r_new;
      Eigen::MatrixXd jac_new;
      NlcResidualJacobian(corrs, trial, &r_new, &jac_new);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < cost) {
        accepted = true;
        const double prev_rms = rms;
        x = candidate;
        r = std::move(r_new);
        jac = std::move(jac_new);
        cost = cost_new;
        rms = Rms(r);
        report.box = trial;
        report.rms_residual = rms;
        report.rms_history.push_back(rms);
        lambda *= 0.5;
        if (prev_rms - rms < options.tol) {
          report.converged = true;
          break;
        }
      }
    }
    if (!accepted) {
      lambda *= 10.0;
      if (lambda > kMaxDamping) {
        // No damping level yields descent: numerically at a minimum.
        report.converged = true;
        break;
      }
    }
  }

  report.condition_estimate = ConditionNumber(jac);
  if (!(report.condition_estimate <= options.degenerate_condition)) {
    report.degenerate = true;
    report.converged = false;
  }
  if (!std::isfinite(report.rms_residual)) report.converged = false;
  return report;
}

}  // namespace

void NlcResidualJacobian(std::span<const Correspondence> corrs,
                         const Box3D& box, Eigen::VectorXd* residual,
                         Eigen::MatrixXd* jacobian) {
  const auto m = static_cast<Eigen::Index>(3 * corrs.size());
  residual->resize(m);
  jacobian->setZero(m, 7);
  const double c = std::cos(box.yaw());
  const double s = std::sin(box.yaw());
  const double l = box.length();
  const double w = box.width();
  const double h = box.height();
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 d = corrs[i].point - box.center();
    const double ax = c * d.x() + s * d.y();
    const double ay = -s * d.x() + c * d.y();
    const double az = d.z();
    const auto row = static_cast<Eigen::Index>(3 * i);
    (*residual)[row] = ax / l + 0.5 - corrs[i].nlc.x();
    (*residual)[row + 1] = ay / w + 0.5 - corrs[i].nlc.y();
    (*residual)[row + 2] = az / h + 0.5 - corrs[i].nlc.z();

    auto& j = *jacobian;
    j(row, 0) = -c / l;
    j(row, 1) = -s / l;
    j(row, 3) = -ax / l;
    j(row, 6) = ay / l;

    j(row + 1, 0) = s / w;
    j(row + 1, 1) = -c / w;
    j(row + 1, 4) = -ay / w;
    j(row + 1, 6) = -ax / w;

    j(row + 2, 2) = -1.0 / h;
    j(row + 2, 5) = -az / h;
  }
}

Box3D InitialBoxGuess(std::span<const Correspondence> corrs) {
  if (corrs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no correspondences");
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : corrs) centroid += c.point;
  centroid /= static_cast<double>(corrs.size());

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& c : corrs) {
    const Vec3 d = c.point - centroid;
    sxx += d.x() * d.x();
    syy += d.y() * d.y();
    sxy += d.x() * d.y();
  }
  const double yaw = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const double cy = std::cos(yaw);
  const double sy = std::sin(yaw);

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& c : corrs) {
    const Vec3 d = c.point - centroid;
    const Vec3 local(cy * d.x() + sy * d.y(), -sy * d.x() + cy * d.y(), d.z());
    lo = lo.cwiseMin(local);
    hi = hi.cwiseMax(local);
  }
  // Twice the half-range along each PCA axis.
  const Vec3 dims = (hi - lo).cwiseMax(kMinInitDim);
  return Box3D(centroid, dims.x(), dims.y(), dims.z(), yaw);
}

SolveReport SolveBox(std::span<const Correspondence> corrs,
                     const std::optional<Box3D>& init,
                     const SolveOptions& options) {
  if (corrs.size() < 3) {
    throw Error(ErrorCode::kUnderdetermined,
                "need at least 3 correspondences, got " +
                    std::to_string(corrs.size()));
  }
  for (const auto& c : corrs) {
    if (!c.point.allFinite() || !c.nlc.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "correspondences must be finite");
    }
  }
  if (options.max_iterations < 0 || !(options.tol >= 0.0) ||
      !(options.lm_damping_init > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid solver options");
  }
  const std::vector<Correspondence> sorted = Canonical(corrs);
  if (init.has_value()) return RunLevenbergMarquardt(sorted, *init, options);

  const Box3D guess = InitialBoxGuess(sorted);
  std::optional<SolveReport> best;
  for (int k = 0; k < 4; ++k) {
    const bool swap = (k % 2) == 1;
    const Box3D start(guess.center(), swap ? guess.width() : guess.length(),
                      swap ? guess.length() : guess.width(), guess.height(),
                      guess.yaw() + k * 0.5 * std::numbers::pi);
    SolveReport report = RunLevenbergMarquardt(sorted, start, options);
    if (!best || report.rms_residual < best->rms_residual) best = std::move(report);
  }
  return *best;
}

namespace {

double Median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

}  // namespace

std::vector<NoiseLevel> NoiseSweep(const Box3D& box,
                                   std::span<const double> sigmas, int trials,
                                   std::size_t points, std::uint64_t seed) {
  if (trials < 1 || points < 3) {
    throw Error(ErrorCode::kInvalidArgument, "noise sweep needs trials >= 1 and points >= 3");
  }
  std::vector<NoiseLevel> levels;
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    const double sigma = sigmas[s];
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw Error(ErrorCode::kInvalidArgument, "noise sigma must be finite and >= 0");
    }
    Rng rng(MixSeed(seed, s));
    NoiseLevel level{sigma, trials, 0.0, 0.0, 0.0, 0};
    std::vector<double> center_err, dim_err, yaw_err;
    for (int t = 0; t < trials; ++t) {
      std::vector<Correspondence> corrs(points);
      for (auto& c : corrs) {
        const NlcValue n(rng.Uniform(), rng.Uniform(), rng.Uniform());
        c.point = NlcToLidar(n, box);
        c.nlc = n + NlcValue(rng.Normal(0.0, sigma), rng.Normal(0.0, sigma),
                             rng.Normal(0.0, sigma));
      }
      const SolveReport report = SolveBox(corrs);
      if (report.converged) ++level.converged;
      center_err.push_back((report.box.center() - box.center()).norm());
      dim_err.push_back((report.box.dims() - box.dims()).cwiseAbs().maxCoeff());
      const double dyaw = NormalizeAngle(report.box.yaw() - box.yaw());
      yaw_err.push_back(std::abs(dyaw));
    }
    level.median_center_error = Median(center_err);
    level.median_dim_error = Median(dim_err);
    level.median_yaw_error = Median(yaw_err);
    levels.push_back(level);
  }
  return levels;
}

DofReport DofAnalysis(std::span<const Correspondence> corrs,
                      const std::optional<Box3D>& at) {
  if (corrs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no correspondences");
  }
  DofReport report;
  report.equations = 3 * corrs.size();
  const std::vector<Correspondence> sorted = Canonical(corrs);
  Box3D where = at.has_value()        ? *at
                : sorted.size() >= 3 ? SolveBox(sorted).box
                                     : InitialBoxGuess(sorted);
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  NlcResidualJacobian(sorted, where, &r, &jac);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  report.singular_values = svd.singularValues();
  const double smax = report.singular_values.size() > 0 ? report.singular_values[0] : 0.0;
  for (Eigen::Index i = 0; i < report.singular_values.size(); ++i) {
    if (smax > 0.0 && report.singular_values[i] > kRankRelTolerance * smax) {
      ++report.jacobian_rank;
    }
  }
  return report;
}

}  // namespace nlcdet
