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

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace swmrs {

enum class ModelEstimator { GeeIndependence, LmmReml, GlmmLaplace, AncovaWls };
enum class Family { Gaussian, Binomial };
enum class Link { Identity, Logit, Log };
/// `None` fits period effects only (no treatment column).
enum class TreatmentEffect { None, Constant, PeriodSpecific };
enum class RandomEffects { None, Cluster, ClusterPlusClusterPeriod };

std::string_view to_string(ModelEstimator v);
std::string_view to_string(Family v);
std::string_view to_string(Link v);
std::string_view to_string(TreatmentEffect v);
std::string_view to_string(RandomEffects v);
ModelEstimator parse_model_estimator(std::string_view s);
Family parse_family(std::string_view s);
Link parse_link(std::string_view s);
TreatmentEffect parse_treatment_effect(std::string_view s);
RandomEffects parse_random_effects(std::string_view s);

/// Covariate token that injects the cluster-period size N_ij.
inline constexpr std::string_view kCellSizeToken = "cell_size";

struct WorkingModelSpec {
  ModelEstimator estimator = ModelEstimator::GeeIndependence;
  Family family = Family::Gaussian;
  Link link = Link::Identity;
  TreatmentEffect treatment_effect = TreatmentEffect::Constant;
  RandomEffects random_effects = RandomEffects::None;
  std::vector<std::string> covariates;
  /// ANCOVA only: add treatment-by-covariate interactions.
  bool ancova_interactions = false;

  /// Throws InvalidModelSpec when the combination is not allowed.
  void validate() const;
  bool operator==(const WorkingModelSpec&) const = default;
};

struct FitOptions {
  /// Random-effect variance parameters held fixed instead of estimated
  /// (one per random-effect term). For LMM_REML these are the ratios
  /// tau^2 / sigma^2, for GLMM_LAPLACE the variances themselves. Exact
  /// zeros are allowed.
  std::optional<Eigen::VectorXd> fixed_variance;
};

struct VarianceComponents {
  double cluster = 0.0;          // tau_alpha^2
  double cluster_period = 0.0;   // tau_gamma^2
  double residual = 0.0;         // sigma_eps^2 (gaussian models)
  bool cluster_boundary = false;
  bool cluster_period_boundary = false;
};

struct ConvergenceInfo {
  int iterations = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
};

struct FittedModel {
  WorkingModelSpec spec;
  bool fitted = false;
  int num_periods = 0;
  std::vector<std::string> column_names;
  Eigen::VectorXd beta;
  /// Model-based covariance of beta.
  Eigen::MatrixXd vcov;
  VarianceComponents variance;
  ConvergenceInfo convergence;
  /// ANCOVA: weighted period means of the covariates (J x covariates).
  Eigen::MatrixXd centering;
  /// Column of the treatment coefficient for period j (the single tau
  /// column under a constant effect); -1 when the model has none.
  int treatment_column(int j) const;
};

FittedModel fit_gee_independence(const TrialDataset& data, const WorkingModelSpec& spec);
FittedModel fit_lmm(const TrialDataset& data, const WorkingModelSpec& spec, const FitOptions& options = {});
FittedModel fit_glmm_laplace(const TrialDataset& data, const WorkingModelSpec& spec,
                             const FitOptions& options = {});
FittedModel fit_ancova_wls(const TrialDataset& data, const WorkingModelSpec& spec,
                           const WeightScheme& scheme);

/// Dispatches on spec.estimator. `scheme` is required for ANCOVA_WLS.
FittedModel fit_working_model(const TrialDataset& data, const WorkingModelSpec& spec,
                              const WeightScheme* scheme = nullptr, const FitOptions& options = {});

/// REML profiled deviance (-2 log restricted likelihood) at the given log
/// variance ratios, the objective minimized by fit_lmm.
double lmm_reml_deviance(const TrialDataset& data, const WorkingModelSpec& spec,
                         const Eigen::VectorXd& log_ratio);

/// Cluster-period mean predictions m_zj for every cluster at rollout
/// period j, with treatment set to z. NaN for empty cells.
Eigen::VectorXd predict_m(const FittedModel& model, const TrialDataset& data, int z, int j);

/// Coefficient-based treatment effect on the link scale: tau, or the
/// omega_j-weighted average of tau_j over `periods` (default rollout).
double coef_estimate(const FittedModel& model, const WeightScheme& scheme,
                     const std::vector<int>& periods = {});
/// Model-based standard error of coef_estimate.
double coef_model_se(const FittedModel& model, const WeightScheme& scheme,
                     const std::vector<int>& periods = {});

}  // namespace swmrs
