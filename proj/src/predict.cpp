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

#include "design.hpp"
#include "swmrs/error.hpp"
#include "swmrs/working_models.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace swmrs {

namespace {

// Individual-level prediction on the response scale, marginalized over
// the random effects where the model has them.
double marginal_mean(const FittedModel& m, double eta) {
  const auto& s = m.spec;
  switch (s.estimator) {
    case ModelEstimator::LmmReml:
    case ModelEstimator::AncovaWls:
      return eta;
    case ModelEstimator::GeeIndependence:
      return detail::inverse_link(s.link, eta);
    case ModelEstimator::GlmmLaplace: {
      const double re = m.variance.cluster + m.variance.cluster_period;
      if (s.link == Link::Logit) {
        const double c = std::numbers::pi * std::numbers::pi / 3.0;
        return detail::inverse_link(Link::Logit, eta / std::sqrt((re + c) / c));
      }
      return std::exp(eta + re / 2.0);
    }
  }
  return eta;
}

std::vector<int> default_periods(const FittedModel& m, const std::vector<int>& periods) {
  if (!periods.empty()) return periods;
  return rollout_periods(m.num_periods);
}

Eigen::VectorXd coef_weights(const FittedModel& model, const WeightScheme& scheme, const std::vector<int>& periods) {
  if (!model.fitted) throw Error(ErrorKind::UnfittedModel, "model has not been fitted");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(model.beta.size());
  switch (model.spec.treatment_effect) {
    case TreatmentEffect::None:
      throw Error(ErrorKind::InvalidModelSpec, "model has no treatment coefficient");
    case TreatmentEffect::Constant:
      a(model.treatment_column(2)) = 1.0;
      return a;
    case TreatmentEffect::PeriodSpecific: {
      double den = 0.0;
      for (int j : default_periods(model, periods)) {
        const int c = model.treatment_column(j);
        if (c < 0) throw Error(ErrorKind::PeriodOutOfRange, "not a rollout period", {{"period", std::to_string(j)}});
        a(c) += scheme.period(j - 1);
        den += scheme.period(j - 1);
      }
      return a / den;
    }
  }
  return a;
}

}  // namespace

Eigen::VectorXd predict_m(const FittedModel& model, const TrialDataset& data, int z, int j) {
  if (!model.fitted) throw Error(ErrorKind::UnfittedModel, "model has not been fitted");
  if (j < 2 || j > data.num_periods() - 1 || data.num_periods() != model.num_periods) {
    throw Error(ErrorKind::PeriodOutOfRange, "predictions are defined for rollout periods only",
                {{"period", std::to_string(j)}});
  }
  const detail::Design design(data, model.spec, model.centering.size() > 0 ? &model.centering : nullptr);
  if (design.cols() != model.beta.size())
    throw Error(ErrorKind::InvalidArgument, "dataset does not match the fitted design");
  const int I = data.num_clusters();
  Eigen::VectorXd out(I);
  Eigen::VectorXd x(design.cols());
  for (int i = 0; i < I; ++i) {
    const auto b = data.cell_begin(i, j), e = data.cell_end(i, j);
    if (b == e) {
      out(i) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double acc = 0.0;
    for (auto r = b; r < e; ++r) {
      design.fill(data, r, z, x.data());
      acc += marginal_mean(model, x.dot(model.beta));
    }
    out(i) = acc / static_cast<double>(e - b);
  }
  return out;
}

double coef_estimate(const FittedModel& model, const WeightScheme& scheme, const std::vector<int>& periods) {
  return coef_weights(model, scheme, periods).dot(model.beta);
}

double coef_model_se(const FittedModel& model, const WeightScheme& scheme, const std::vector<int>& periods) {
  const Eigen::VectorXd a = coef_weights(model, scheme, periods);
  return std::sqrt(std::max(0.0, a.dot(model.vcov * a)));
}

}  // namespace swmrs
