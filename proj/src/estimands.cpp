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

#include "swmrs/estimands.hpp"

#include "swmrs/error.hpp"

#include <cmath>

namespace swmrs {

std::string_view to_string(Estimand e) {
  switch (e) {
    case Estimand::HIATE: return "h-iate";
    case Estimand::HCATE: return "h-cate";
    case Estimand::VIATE: return "v-iate";
    case Estimand::VCATE: return "v-cate";
  }
  return "?";
}

Estimand parse_estimand(std::string_view s) {
  for (auto e : kAllEstimands)
    if (to_string(e) == s) return e;
  throw Error(ErrorKind::InvalidArgument, "unknown estimand", {{"value", std::string(s)}});
}

std::string_view to_string(Scale s) {
  switch (s) {
    case Scale::Difference: return "rd";
    case Scale::RiskRatio: return "rr";
    case Scale::OddsRatio: return "or";
  }
  return "?";
}

Scale parse_scale(std::string_view s) {
  if (s == "rd" || s == "difference") return Scale::Difference;
  if (s == "rr" || s == "risk_ratio") return Scale::RiskRatio;
  if (s == "or" || s == "odds_ratio") return Scale::OddsRatio;
  throw Error(ErrorKind::InvalidArgument, "unknown scale", {{"value", std::string(s)}});
}

double ContrastScale::psi(double tau) const {
  if (!log_report) return tau;
  if (!(tau > 0.0)) {
    throw Error(ErrorKind::ScaleDomainError, "log transform of a nonpositive contrast",
                {{"value", std::to_string(tau)}});
  }
  return std::log(tau);
}

double ContrastScale::psi_inverse(double v) const { return log_report ? std::exp(v) : v; }

double apply_contrast(Scale scale, double mu1, double mu0) {
  switch (scale) {
    case Scale::Difference:
      return mu1 - mu0;
    case Scale::RiskRatio:
      if (!(mu0 > 0.0)) {
        throw Error(ErrorKind::ScaleDomainError, "risk ratio needs mu0 > 0", {{"mu0", std::to_string(mu0)}});
      }
      return mu1 / mu0;
    case Scale::OddsRatio:
      if (!(mu0 > 0.0 && mu0 < 1.0 && mu1 > 0.0 && mu1 < 1.0)) {
        throw Error(ErrorKind::ScaleDomainError, "odds ratio needs means in (0,1)",
                    {{"mu1", std::to_string(mu1)}, {"mu0", std::to_string(mu0)}});
      }
      return mu1 * (1.0 - mu0) / ((1.0 - mu1) * mu0);
  }
  return 0.0;
}

std::vector<int> rollout_periods(int num_periods) {
  std::vector<int> out;
  for (int j = 2; j <= num_periods - 1; ++j) out.push_back(j);
  return out;
}

WeightScheme resolve_weights(const TrialDataset& data, Estimand kind) {
  const int I = data.num_clusters(), J = data.num_periods();
  const Eigen::ArrayXXi& N = data.cell_size();
  WeightScheme w;
  w.kind = kind;
  w.individual.resize(data.num_rows());
  w.cell = Eigen::ArrayXXd::Zero(I, J);

  const Eigen::ArrayXd mu_hat = N.cast<double>().colwise().mean().transpose();
  if (kind == Estimand::VCATE || kind == Estimand::VIATE) {
    for (int j = 2; j <= J - 1; ++j)
      for (int i = 0; i < I; ++i)
        if (N(i, j - 1) == 0) {
          throw Error(ErrorKind::EmptyCell, "estimand needs every rollout cell nonempty",
                      {{"cluster", data.cluster_labels()[static_cast<std::size_t>(i)]},
                       {"period", std::to_string(j)}});
        }
  }
  for (int i = 0; i < I; ++i) {
    const int total = N.row(i).sum();
    if (kind == Estimand::HCATE && total == 0) {
      throw Error(ErrorKind::ZeroClusterTotal, "cluster has no observations",
                  {{"cluster", data.cluster_labels()[static_cast<std::size_t>(i)]}});
    }
    for (int j = 1; j <= J; ++j) {
      const int n = N(i, j - 1);
      if (n == 0) continue;
      double wk = 1.0;
      switch (kind) {
        case Estimand::HIATE: wk = 1.0; break;
        case Estimand::HCATE: wk = 1.0 / total; break;
        case Estimand::VIATE: wk = 1.0 / (I * mu_hat(j - 1)); break;
        case Estimand::VCATE: wk = 1.0 / n; break;
      }
      w.individual.segment(data.cell_begin(i, j), n).setConstant(wk);
      // the cell total is set directly so that the aggregation identities
      // hold without summation rounding
      switch (kind) {
        case Estimand::HIATE: w.cell(i, j - 1) = n; break;
        case Estimand::HCATE: w.cell(i, j - 1) = static_cast<double>(n) / total; break;
        case Estimand::VIATE: w.cell(i, j - 1) = n / (I * mu_hat(j - 1)); break;
        case Estimand::VCATE: w.cell(i, j - 1) = 1.0; break;
      }
    }
  }
  w.period = w.cell.colwise().sum().transpose().matrix();
  w.cluster = w.cell.rowwise().sum().matrix();
  return w;
}

double unadjusted_mu_period(const TrialDataset& data, const WeightScheme& scheme, int z, int j) {
  if (j < 2 || j > data.num_periods() - 1) {
    throw Error(ErrorKind::PeriodOutOfRange, "not a rollout period", {{"period", std::to_string(j)}});
  }
  const Eigen::ArrayXXd ybar = cell_means(data, scheme.individual);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < data.num_clusters(); ++i) {
    const double w = scheme.cell(i, j - 1);
    if (w == 0.0 || data.cell_treatment(i, j) != z) continue;
    num += w * ybar(i, j - 1);
    den += w;
  }
  if (den == 0.0) {
    throw Error(ErrorKind::EmptyArmInPeriod, "arm is empty in rollout period",
                {{"period", std::to_string(j)}, {"arm", std::to_string(z)}});
  }
  return num / den;
}

double unadjusted_mu(const TrialDataset& data, const WeightScheme& scheme, int z,
                     const std::vector<int>& periods) {
  const std::vector<int> use = periods.empty() ? rollout_periods(data.num_periods()) : periods;
  const Eigen::ArrayXXd ybar = cell_means(data, scheme.individual);
  double num = 0.0, den = 0.0;
  for (int j : use) {
    if (j < 2 || j > data.num_periods() - 1) {
      throw Error(ErrorKind::PeriodOutOfRange, "not a rollout period", {{"period", std::to_string(j)}});
    }
    double a = 0.0, b = 0.0;
    for (int i = 0; i < data.num_clusters(); ++i) {
      const double w = scheme.cell(i, j - 1);
      if (w == 0.0 || data.cell_treatment(i, j) != z) continue;
      a += w * ybar(i, j - 1);
      b += w;
    }
    if (b == 0.0) {
      throw Error(ErrorKind::EmptyArmInPeriod, "arm is empty in rollout period",
                  {{"period", std::to_string(j)}, {"arm", std::to_string(z)}});
    }
    num += scheme.period(j - 1) * (a / b);
    den += scheme.period(j - 1);
  }
  return num / den;
}

std::vector<CellSummary> cluster_period_summary(const TrialDataset& data, const WeightScheme& scheme) {
  for (int i = 0; i < data.num_clusters(); ++i)
    for (int j = 1; j <= data.num_periods(); ++j)
      if (data.cell_size()(i, j - 1) == 0 && scheme.cell(i, j - 1) != 0.0) {
        throw Error(ErrorKind::EmptyCell, "empty cell with nonzero weight",
                    {{"cluster", data.cluster_labels()[static_cast<std::size_t>(i)]},
                     {"period", std::to_string(j)}});
      }
  return cluster_period_summary(data, scheme.individual);
}

}  // namespace swmrs
