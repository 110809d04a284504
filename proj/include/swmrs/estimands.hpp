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

#include "swmrs/trial_data.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace swmrs {

enum class Estimand { HIATE, HCATE, VIATE, VCATE };

inline constexpr std::array<Estimand, 4> kAllEstimands = {Estimand::HIATE, Estimand::HCATE,
                                                          Estimand::VIATE, Estimand::VCATE};

/// "h-iate", "h-cate", "v-iate", "v-cate".
std::string_view to_string(Estimand e);
Estimand parse_estimand(std::string_view s);

/// Resolved weights at all four aggregation levels.
struct WeightScheme {
  Estimand kind = Estimand::HIATE;
  Eigen::VectorXd individual;  // omega_ijk, aligned with dataset rows
  Eigen::ArrayXXd cell;        // omega_ij, I x J
  Eigen::VectorXd period;      // omega_j, J
  Eigen::VectorXd cluster;     // omega_i, I
};

WeightScheme resolve_weights(const TrialDataset& data, Estimand kind);

enum class Scale { Difference, RiskRatio, OddsRatio };

std::string_view to_string(Scale s);
/// "rd", "rr", "or" (also accepts "difference", "risk_ratio", "odds_ratio").
Scale parse_scale(std::string_view s);

/// A contrast f together with the reporting transform psi.
struct ContrastScale {
  Scale kind = Scale::Difference;
  /// psi = log when true; defaults to true for the ratio scales.
  bool log_report = false;

  static ContrastScale standard(Scale kind) { return {kind, kind != Scale::Difference}; }
  double psi(double tau) const;
  double psi_inverse(double v) const;
};

double apply_contrast(Scale scale, double mu1, double mu0);

/// The rollout periods 2..J-1.
std::vector<int> rollout_periods(int num_periods);

/// Unadjusted estimator restricted to period j.
double unadjusted_mu_period(const TrialDataset& data, const WeightScheme& scheme, int z, int j);

/// Unadjusted estimator pooled over `periods` (default: all rollout periods).
double unadjusted_mu(const TrialDataset& data, const WeightScheme& scheme, int z,
                     const std::vector<int>& periods = {});

/// Weighted cluster-period means under a scheme's individual weights; raises
/// EmptyCell for an empty cell the scheme gives nonzero weight.
std::vector<CellSummary> cluster_period_summary(const TrialDataset& data, const WeightScheme& scheme);

}  // namespace swmrs
