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

#include "swmrs/estimands.hpp"
#include "swmrs/trial_data.hpp"
#include "swmrs/working_models.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace swmrs {

/// unadj: unadjusted moment estimator. mrs: model-robust standardization.
/// coef: the working model's treatment coefficient. ancova: ANCOVA WLS
/// coefficient estimator (weights follow each estimand).
enum class MethodKind { Unadjusted, Mrs, Coef, Ancova };

struct MethodSpec {
  MethodKind kind = MethodKind::Unadjusted;
  WorkingModelSpec model;  // unused for Unadjusted
  std::string label;       // e.g. "mrs:W1"

  bool operator==(const MethodSpec&) const = default;
};

std::string_view to_string(MethodKind k);

enum class LocoPolicy { Error, DropPeriod, DropReplicate };
std::string_view to_string(LocoPolicy p);
LocoPolicy parse_loco_policy(std::string_view s);

struct PointEstimate {
  double mu1 = 0.0, mu0 = 0.0;  // NaN for coefficient methods
  double tau = 0.0;             // contrast on its natural scale
  double psi = 0.0;             // reporting scale
  double model_se = 0.0;        // psi scale; NaN unless model-based
};

using EstimateSet = std::array<PointEstimate, 4>;  // indexed like kAllEstimands

/// Point estimates of every method for all four estimands on one dataset.
/// Working models are fitted once per distinct spec (ANCOVA once per
/// scheme). `periods` restricts the pooled sums (default: rollout).
std::vector<EstimateSet> estimate_points(const TrialDataset& data, const std::vector<MethodSpec>& methods,
                                         const ContrastScale& scale, const std::vector<int>& periods = {},
                                         std::vector<FittedModel>* fits = nullptr);

struct JackknifeOptions {
  LocoPolicy policy = LocoPolicy::Error;
  int threads = 1;
  /// GLMM coefficient SEs are model-based; their LOCO refits are skipped.
  bool model_se_for_glmm_coef = true;
};

struct EstimateResult {
  Estimand estimand = Estimand::HIATE;
  Scale scale = Scale::Difference;
  double estimate = 0.0;      // natural scale
  double psi_estimate = 0.0;  // reporting scale
  double se = 0.0;            // reporting scale
  double ci_lower = 0.0, ci_upper = 0.0;  // natural scale
  double df = 0.0;
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();  // cov of (mu1, mu0)
  bool has_sigma = false;
  std::string se_method = "jackknife";
};

struct JackknifeReplicates {
  std::vector<int> left_out;               // 0-based cluster index per replicate
  std::vector<std::vector<int>> dropped;   // periods dropped per replicate
  Eigen::MatrixXd psi, mu1, mu0;           // replicates x 4
};

struct MethodAnalysis {
  MethodSpec method;
  EstimateSet full;
  JackknifeReplicates reps;
  std::array<EstimateResult, 4> results;
};

struct Analysis {
  ContrastScale scale;
  std::vector<MethodAnalysis> methods;
  /// Full-sample fits, in order of first use (diagnostics).
  std::vector<FittedModel> fits;
};

/// Full-sample estimates plus the leave-one-cluster-out jackknife.
Analysis analyze(const TrialDataset& data, const std::vector<MethodSpec>& methods, const ContrastScale& scale,
                 const JackknifeOptions& options = {});

/// ((n-1)/n) sum (r_g - rbar)^2 for scalar replicates.
double jackknife_variance(const Eigen::VectorXd& replicates);
/// ((n-1)/n) sum (r_g - rbar)(r_g - rbar)^T, replicates in rows.
Eigen::MatrixXd jackknife_covariance(const Eigen::MatrixXd& replicates);

enum class IcsTest { HPair, VPair, Global };
std::string_view to_string(IcsTest t);
IcsTest parse_ics_test(std::string_view s);

struct IcsTestResult {
  IcsTest kind = IcsTest::Global;
  double statistic = 0.0;  // t for the pairs, F for the global test
  double df1 = 1.0, df2 = 0.0;
  double p_value = 1.0;
  Eigen::Vector4d psi = Eigen::Vector4d::Zero();
  Eigen::MatrixXd covariance;  // V_D (1x1) or V (4x4)
};

/// The global test's contrast matrix.
Eigen::Matrix<double, 3, 4> ics_contrast_matrix();

/// Informative-cluster-size test from a jackknifed method.
IcsTestResult ics_test(const MethodAnalysis& analysis, IcsTest kind);

/// Global statistic from point estimates and their 4x4 covariance.
IcsTestResult global_ics_statistic(const Eigen::Vector4d& psi, const Eigen::Matrix4d& v, double df2);

}  // namespace swmrs
