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
#include <vector>

namespace swmrs {

struct PeriodAugmentedEstimate {
  int period = 0;
  int arm = 0;
  double unadjusted = 0.0;
  double augmentation = 0.0;
  double total = 0.0;
};

/// Augmented estimate for one period and arm from a vector of predictions
/// m_zj over clusters (NaN allowed only where the cell weight is zero).
PeriodAugmentedEstimate mrs_mu_period(const TrialDataset& data, const WeightScheme& scheme,
                                      const Eigen::VectorXd& preds, int z, int j);

/// Predictions m_zj for both arms over the rollout periods, computed once
/// per fitted model: entry [z](i, j-1).
struct PredictionTable {
  std::array<Eigen::ArrayXXd, 2> m;
};

PredictionTable predict_all(const FittedModel& model, const TrialDataset& data);

/// omega_j-weighted average of per-period augmented estimates over
/// `periods` (default: every rollout period).
double mrs_mu(const TrialDataset& data, const WeightScheme& scheme, const PredictionTable& preds, int z,
              const std::vector<int>& periods = {});
double mrs_mu(const TrialDataset& data, const WeightScheme& scheme, const FittedModel& model, int z,
              const std::vector<int>& periods = {});

double mrs_tau(const TrialDataset& data, const WeightScheme& scheme, const FittedModel& model,
               Scale scale, const std::vector<int>& periods = {});

}  // namespace swmrs
