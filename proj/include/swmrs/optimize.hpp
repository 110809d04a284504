// Copyright 2026 The swmrs Authors
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

#include <Eigen/Dense>

#include <functional>

namespace swmrs {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;  // infinity norm, unscaled
  bool converged = false;
};

/// Derivative-free simplex minimization.
OptimResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, double step = 0.5,
                        double ftol = 1e-8, int max_iter = 400);

/// Central-difference gradient.
Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double h = 1e-4);

struct BfgsOptions {
  /// Converged when |g|_inf / max(1, |f|) < gtol (or |g|_inf < gtol when
  /// `relative` is false).
  double gtol = 1e-6;
  bool relative = true;
  int max_iter = 500;
  double fd_step = 1e-4;
};

/// Quasi-Newton with backtracking (Armijo) line search and finite-difference
/// gradients. Accepted iterates never increase f.
OptimResult bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opt = {});

}  // namespace swmrs
