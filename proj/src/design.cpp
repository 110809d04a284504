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

#include <cmath>
#include <limits>

namespace swmrs {

std::string_view to_string(ModelEstimator v) {
  switch (v) {
    case ModelEstimator::GeeIndependence: return "GEE_INDEPENDENCE";
    case ModelEstimator::LmmReml: return "LMM_REML";
    case ModelEstimator::GlmmLaplace: return "GLMM_LAPLACE";
    case ModelEstimator::AncovaWls: return "ANCOVA_WLS";
  }
  return "?";
}
std::string_view to_string(Family v) { return v == Family::Gaussian ? "gaussian" : "binomial"; }
std::string_view to_string(Link v) {
  switch (v) {
    case Link::Identity: return "identity";
    case Link::Logit: return "logit";
    case Link::Log: return "log";
  }
  return "?";
}
std::string_view to_string(TreatmentEffect v) {
  switch (v) {
    case TreatmentEffect::None: return "none";
    case TreatmentEffect::Constant: return "constant";
    case TreatmentEffect::PeriodSpecific: return "period_specific";
  }
  return "?";
}
std::string_view to_string(RandomEffects v) {
  switch (v) {
    case RandomEffects::None: return "none";
    case RandomEffects::Cluster: return "cluster";
    case RandomEffects::ClusterPlusClusterPeriod: return "cluster_plus_cluster_period";
  }
  return "?";
}

namespace {
template <class E, std::size_t K>
E parse_enum(std::string_view s, const E (&values)[K], const char* what) {
  for (E v : values)
    if (to_string(v) == s) return v;
  throw Error(ErrorKind::InvalidModelSpec, std::string("unknown ") + what, {{"value", std::string(s)}});
}
}  // namespace

ModelEstimator parse_model_estimator(std::string_view s) {
  static const ModelEstimator v[] = {ModelEstimator::GeeIndependence, ModelEstimator::LmmReml,
                                     ModelEstimator::GlmmLaplace, ModelEstimator::AncovaWls};
  return parse_enum(s, v, "estimator");
}
Family parse_family(std::string_view s) {
  static const Family v[] = {Family::Gaussian, Family::Binomial};
  return parse_enum(s, v, "family");
}
Link parse_link(std::string_view s) {
  static const Link v[] = {Link::Identity, Link::Logit, Link::Log};
  return parse_enum(s, v, "link");
}
TreatmentEffect parse_treatment_effect(std::string_view s) {
  static const TreatmentEffect v[] = {TreatmentEffect::None, TreatmentEffect::Constant,
                                      TreatmentEffect::PeriodSpecific};
  return parse_enum(s, v, "treatment_effect");
}
RandomEffects parse_random_effects(std::string_view s) {
  static const RandomEffects v[] = {RandomEffects::None, RandomEffects::Cluster,
                                    RandomEffects::ClusterPlusClusterPeriod};
  return parse_enum(s, v, "random_effects");
}

void WorkingModelSpec::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorKind::InvalidModelSpec, msg); };
  const bool has_re = random_effects != RandomEffects::None;
  switch (estimator) {
    case ModelEstimator::LmmReml:
      if (family != Family::Gaussian || link != Link::Identity) bad("LMM_REML needs gaussian family with identity link");
      if (!has_re) bad("LMM_REML needs random effects");
      break;
    case ModelEstimator::GlmmLaplace:
      if (family != Family::Binomial || (link != Link::Logit && link != Link::Log))
        bad("GLMM_LAPLACE needs binomial family with logit or log link");
      if (!has_re) bad("GLMM_LAPLACE needs random effects");
      break;
    case ModelEstimator::GeeIndependence:
      if (has_re) bad("GEE_INDEPENDENCE takes no random effects");
      if (family == Family::Gaussian && link == Link::Logit) bad("gaussian family with logit link is not supported");
      break;
    case ModelEstimator::AncovaWls:
      if (has_re) bad("ANCOVA_WLS takes no random effects");
      if (link != Link::Identity || family != Family::Gaussian) bad("ANCOVA_WLS needs identity link");
      if (treatment_effect != TreatmentEffect::PeriodSpecific) bad("ANCOVA_WLS needs period-specific effects");
      break;
  }
  if (ancova_interactions && estimator != ModelEstimator::AncovaWls) bad("interactions are an ANCOVA option");
}

int FittedModel::treatment_column(int j) const {
  const int J = num_periods;
  switch (spec.treatment_effect) {
    case TreatmentEffect::None: return -1;
    case TreatmentEffect::Constant: return J;
    case TreatmentEffect::PeriodSpecific:
      if (j < 2 || j > J - 1) return -1;
      return J + (j - 2);
  }
  return -1;
}

namespace detail {

Design::Design(const TrialDataset& data, const WorkingModelSpec& spec, const Eigen::MatrixXd* centering)
    : J_(data.num_periods()), te_(spec.treatment_effect), interactions_(spec.ancova_interactions) {
  for (int j = 1; j <= J_; ++j) names_.push_back("period_" + std::to_string(j));
  if (te_ == TreatmentEffect::Constant) names_.push_back("treatment");
  if (te_ == TreatmentEffect::PeriodSpecific)
    for (int j = 2; j <= J_ - 1; ++j) names_.push_back("treatment_p" + std::to_string(j));
  first_cov_ = static_cast<int>(names_.size());
  for (const auto& c : spec.covariates) {
    if (c == kCellSizeToken) {
      source_.push_back(-1);
    } else {
      const int col = data.covariate_column(c);
      if (col < 0) throw Error(ErrorKind::MissingColumn, "covariate not in dataset", {{"column", c}});
      source_.push_back(col);
    }
    names_.push_back(c);
  }
  if (interactions_)
    for (const auto& c : spec.covariates) names_.push_back("treatment:" + c);
  if (centering) centering_ = *centering;
}

int Design::treatment_column(int j) const {
  if (te_ == TreatmentEffect::Constant) return J_;
  if (te_ == TreatmentEffect::PeriodSpecific && j >= 2 && j <= J_ - 1) return J_ + j - 2;
  return -1;
}

void Design::fill(const TrialDataset& data, Eigen::Index r, int z, double* out) const {
  const auto rr = static_cast<std::size_t>(r);
  const int j = data.period()[rr];
  const int zz = z < 0 ? data.treatment()[rr] : z;
  for (int c = 0; c < cols(); ++c) out[c] = 0.0;
  out[j - 1] = 1.0;
  const int tc = treatment_column(j);
  if (tc >= 0) out[tc] = zz;
  const auto k = source_.size();
  for (std::size_t c = 0; c < k; ++c) {
    double v = source_[c] < 0 ? data.cell_size()(data.cluster_index()[rr], j - 1)
                              : data.covariates()(r, source_[c]);
    if (centering_.size() > 0) v -= centering_(j - 1, static_cast<Eigen::Index>(c));
    out[first_cov_ + static_cast<int>(c)] = v;
    if (interactions_) out[first_cov_ + static_cast<int>(k + c)] = zz * v;
  }
}

Eigen::MatrixXd Design::matrix(const TrialDataset& data) const {
  const Eigen::Index n = data.num_rows();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X(n, cols());
  for (Eigen::Index r = 0; r < n; ++r) fill(data, r, -1, X.row(r).data());
  return X;
}

void check_full_rank(const Eigen::MatrixXd& xtx, const std::vector<std::string>& names) {
  const Eigen::Index p = xtx.rows();
  Eigen::VectorXd d(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    if (!(xtx(k, k) > 0.0)) {
      throw Error(ErrorKind::RankDeficientDesign, "design column is identically zero",
                  {{"column", names[static_cast<std::size_t>(k)]}});
    }
    d(k) = 1.0 / std::sqrt(xtx(k, k));
  }
  const Eigen::MatrixXd scaled = d.asDiagonal() * xtx * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-11 * hi)) {
    throw Error(ErrorKind::RankDeficientDesign, "design matrix is not of full column rank",
                {{"min_eigenvalue", std::to_string(lo)}});
  }
}

Eigen::MatrixXd raw_covariates(const TrialDataset& data, const std::vector<std::string>& covariates) {
  Eigen::MatrixXd out(data.num_rows(), static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t c = 0; c < covariates.size(); ++c) {
    const auto cc = static_cast<Eigen::Index>(c);
    if (covariates[c] == kCellSizeToken) {
      for (Eigen::Index r = 0; r < data.num_rows(); ++r) {
        const auto rr = static_cast<std::size_t>(r);
        out(r, cc) = data.cell_size()(data.cluster_index()[rr], data.period()[rr] - 1);
      }
    } else {
      const int col = data.covariate_column(covariates[c]);
      if (col < 0) throw Error(ErrorKind::MissingColumn, "covariate not in dataset", {{"column", covariates[c]}});
      out.col(cc) = data.covariates().col(col);
    }
  }
  return out;
}

double inverse_link(Link link, double eta) {
  switch (link) {
    case Link::Identity: return eta;
    case Link::Logit: return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case Link::Log: return std::exp(eta);
  }
  return eta;
}

double link_fn(Link link, double mu) {
  switch (link) {
    case Link::Identity: return mu;
    case Link::Logit: return std::log(mu / (1.0 - mu));
    case Link::Log: return std::log(mu);
  }
  return mu;
}

double mu_eta(Link link, double eta) {
  switch (link) {
    case Link::Identity: return 1.0;
    case Link::Logit: {
      const double m = inverse_link(Link::Logit, eta);
      return m * (1.0 - m);
    }
    case Link::Log: return std::exp(eta);
  }
  return 1.0;
}

double variance_fn(Family family, double mu) { return family == Family::Gaussian ? 1.0 : mu * (1.0 - mu); }

double log_lik(Family family, double y, double mu) {
  if (family == Family::Gaussian) return -0.5 * (y - mu) * (y - mu);
  if (!(mu >= 0.0 && mu <= 1.0)) return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  if (y > 0.0) v += y * std::log(mu);
  if (y < 1.0) v += (1.0 - y) * std::log1p(-mu);
  return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
}

}  // namespace detail
}  // namespace swmrs
