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

#include "swmrs/standardization.hpp"

#include "swmrs/error.hpp"

#include <cmath>

namespace swmrs {

namespace {

PeriodAugmentedEstimate period_estimate(const TrialDataset& data, const WeightScheme& scheme,
                                        const Eigen::ArrayXXd& ybar, const Eigen::VectorXd& preds, int z, int j) {
  if (j < 2 || j > data.num_periods() - 1)
    throw Error(ErrorKind::PeriodOutOfRange, "not a rollout period", {{"period", std::to_string(j)}});
  if (preds.size() != data.num_clusters())
    throw Error(ErrorKind::InvalidArgument, "prediction vector does not cover every cluster");
  double all_w = 0.0, all_wm = 0.0, arm_w = 0.0, arm_wy = 0.0, arm_wm = 0.0;
  for (int i = 0; i < data.num_clusters(); ++i) {
    const double w = scheme.cell(i, j - 1);
    if (w == 0.0) continue;
    const double m = preds(i);
    if (!std::isfinite(m)) {
      throw Error(ErrorKind::PredictionMissing, "no prediction for a weighted cell",
                  {{"cluster", data.cluster_labels()[static_cast<std::size_t>(i)]}, {"period", std::to_string(j)}});
    }
    all_w += w;
    all_wm += w * m;
    if (data.cell_treatment(i, j) == z) {
      arm_w += w;
      arm_wy += w * ybar(i, j - 1);
      arm_wm += w * m;
    }
  }
  if (arm_w == 0.0) {
    throw Error(ErrorKind::EmptyArmInPeriod, "arm is empty in rollout period",
                {{"period", std::to_string(j)}, {"arm", std::to_string(z)}});
  }
  PeriodAugmentedEstimate out;
  out.period = j;
  out.arm = z;
  out.unadjusted = arm_wy / arm_w;
  out.augmentation = all_wm / all_w - arm_wm / arm_w;
  out.total = all_wm / all_w + (arm_wy - arm_wm) / arm_w;
  return out;
}

}  // namespace

PeriodAugmentedEstimate mrs_mu_period(const TrialDataset& data, const WeightScheme& scheme,
                                      const Eigen::VectorXd& preds, int z, int j) {
  return period_estimate(data, scheme, cell_means(data, scheme.individual), preds, z, j);
}

PredictionTable predict_all(const FittedModel& model, const TrialDataset& data) {
  const int I = data.num_clusters(), J = data.num_periods();
  PredictionTable t;
  for (int z = 0; z <= 1; ++z) {
    t.m[static_cast<std::size_t>(z)] = Eigen::ArrayXXd::Constant(I, J, std::nan(""));
    for (int j = 2; j <= J - 1; ++j) t.m[static_cast<std::size_t>(z)].col(j - 1) = predict_m(model, data, z, j).array();
  }
  return t;
}

double mrs_mu(const TrialDataset& data, const WeightScheme& scheme, const PredictionTable& preds, int z,
              const std::vector<int>& periods) {
  const std::vector<int> use = periods.empty() ? rollout_periods(data.num_periods()) : periods;
  const Eigen::ArrayXXd ybar = cell_means(data, scheme.individual);
  double num = 0.0, den = 0.0;
  for (int j : use) {
    const Eigen::VectorXd m = preds.m[static_cast<std::size_t>(z)].col(j - 1).matrix();
    const auto est = period_estimate(data, scheme, ybar, m, z, j);
    num += scheme.period(j - 1) * est.total;
    den += scheme.period(j - 1);
  }
  return num / den;
}

double mrs_mu(const TrialDataset& data, const WeightScheme& scheme, const FittedModel& model, int z,
              const std::vector<int>& periods) {
  return mrs_mu(data, scheme, predict_all(model, data), z, periods);
}

double mrs_tau(const TrialDataset& data, const WeightScheme& scheme, const FittedModel& model, Scale scale,
               const std::vector<int>& periods) {
  const PredictionTable t = predict_all(model, data);
  return apply_contrast(scale, mrs_mu(data, scheme, t, 1, periods), mrs_mu(data, scheme, t, 0, periods));
}

}  // namespace swmrs
