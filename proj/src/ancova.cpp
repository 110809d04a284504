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

namespace swmrs {

FittedModel fit_ancova_wls(const TrialDataset& data, const WorkingModelSpec& spec, const WeightScheme& scheme) {
  spec.validate();
  if (spec.estimator != ModelEstimator::AncovaWls)
    throw Error(ErrorKind::InvalidModelSpec, "spec is not an ANCOVA_WLS model");
  const int J = data.num_periods();
  const Eigen::VectorXd& w = scheme.individual;
  if (w.size() != data.num_rows()) throw Error(ErrorKind::InvalidArgument, "weights do not match dataset");

  // omega-weighted period means of the raw covariates
  const Eigen::MatrixXd raw = detail::raw_covariates(data, spec.covariates);
  Eigen::MatrixXd center = Eigen::MatrixXd::Zero(J, raw.cols());
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(J);
  for (Eigen::Index r = 0; r < data.num_rows(); ++r) {
    const int j = data.period()[static_cast<std::size_t>(r)];
    center.row(j - 1) += w(r) * raw.row(r);
    wsum(j - 1) += w(r);
  }
  for (int j = 0; j < J; ++j)
    if (wsum(j) > 0.0) center.row(j) /= wsum(j);

  const detail::Design design(data, spec, &center);
  const Eigen::MatrixXd X = design.matrix(data);
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd xtwx = Eigen::MatrixXd::Zero(p, p);
  xtwx.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose() * w.cwiseSqrt().asDiagonal());
  xtwx = xtwx.selfadjointView<Eigen::Lower>();
  detail::check_full_rank(xtwx, design.names());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);

  FittedModel fit;
  fit.spec = spec;
  fit.num_periods = J;
  fit.column_names = design.names();
  fit.centering = center;
  fit.beta = ldlt.solve(X.transpose() * w.cwiseProduct(data.outcome()));
  const Eigen::VectorXd res = data.outcome() - X * fit.beta;
  const double n = static_cast<double>(X.rows());
  const double s2 = n > static_cast<double>(p) ? res.cwiseProduct(w).dot(res) / (n - static_cast<double>(p)) : 0.0;
  fit.variance.residual = s2;
  fit.vcov = s2 * ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.convergence = {1, res.cwiseProduct(w).dot(res), 0.0, true};
  fit.fitted = true;
  return fit;
}

FittedModel fit_working_model(const TrialDataset& data, const WorkingModelSpec& spec, const WeightScheme* scheme,
                              const FitOptions& options) {
  switch (spec.estimator) {
    case ModelEstimator::GeeIndependence: return fit_gee_independence(data, spec);
    case ModelEstimator::LmmReml: return fit_lmm(data, spec, options);
    case ModelEstimator::GlmmLaplace: return fit_glmm_laplace(data, spec, options);
    case ModelEstimator::AncovaWls:
      if (!scheme) throw Error(ErrorKind::InvalidArgument, "ANCOVA_WLS needs a weight scheme");
      return fit_ancova_wls(data, spec, *scheme);
  }
  throw Error(ErrorKind::InvalidModelSpec, "unknown estimator");
}

}  // namespace swmrs
