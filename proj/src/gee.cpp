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

namespace swmrs {

namespace {

using detail::inverse_link;
using detail::link_fn;
using detail::log_lik;
using detail::mu_eta;
using detail::variance_fn;

bool mu_valid(Family family, Link link, double mu) {
  if (!std::isfinite(mu)) return false;
  if (family == Family::Binomial) return link == Link::Logit ? true : (mu > 0.0 && mu < 1.0);
  return link == Link::Log ? mu > 0.0 : true;
}

double deviance(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double d = 0.0;
  for (Eigen::Index r = 0; r < y.size(); ++r) d -= 2.0 * log_lik(family, y(r), mu(r));
  return d;
}

// An arm-period block whose fitted probabilities all sit on {0,1}.
void check_separation(const TrialDataset& data, const Eigen::VectorXd& mu) {
  const int J = data.num_periods();
  for (int z = 0; z <= 1; ++z) {
    for (int j = 1; j <= J; ++j) {
      bool any = false, all_edge = true;
      for (int i = 0; i < data.num_clusters() && all_edge; ++i) {
        if (data.cell_treatment(i, j) != z) continue;
        for (auto r = data.cell_begin(i, j); r < data.cell_end(i, j); ++r) {
          any = true;
          if (!(mu(r) < 1e-10 || mu(r) > 1.0 - 1e-10)) {
            all_edge = false;
            break;
          }
        }
      }
      if (any && all_edge) {
        throw Error(ErrorKind::SeparationDetected, "fitted probabilities are 0 or 1 for an entire arm-period",
                    {{"period", std::to_string(j)}, {"arm", std::to_string(z)}});
      }
    }
  }
}

}  // namespace

FittedModel fit_gee_independence(const TrialDataset& data, const WorkingModelSpec& spec) {
  spec.validate();
  if (spec.estimator != ModelEstimator::GeeIndependence)
    throw Error(ErrorKind::InvalidModelSpec, "spec is not a GEE_INDEPENDENCE model");
  const detail::Design design(data, spec);
  const Eigen::MatrixXd X = design.matrix(data);
  const Eigen::VectorXd& y = data.outcome();
  const Eigen::Index n = X.rows(), p = X.cols();

  FittedModel fit;
  fit.spec = spec;
  fit.num_periods = data.num_periods();
  fit.column_names = design.names();

  Eigen::MatrixXd xtx(p, p);
  xtx.setZero();
  xtx.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  xtx = xtx.selfadjointView<Eigen::Lower>();
  detail::check_full_rank(xtx, design.names());

  if (spec.family == Family::Gaussian && spec.link == Link::Identity) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    fit.beta = ldlt.solve(X.transpose() * y);
    const double rss = (y - X * fit.beta).squaredNorm();
    fit.variance.residual = n > p ? rss / static_cast<double>(n - p) : 0.0;
    fit.vcov = fit.variance.residual * ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    fit.convergence = {1, rss, 0.0, true};
    fit.fitted = true;
    return fit;
  }

  const Family fam = spec.family;
  const Link link = spec.link;
  if (fam == Family::Binomial && (y.minCoeff() < 0.0 || y.maxCoeff() > 1.0))
    throw Error(ErrorKind::InvalidArgument, "binomial outcomes must lie in [0,1]");

  // starting values on the response scale, pulled away from the boundary,
  // projected onto the column space of X
  Eigen::VectorXd mu(n), eta(n);
  const double ybar = y.mean();
  for (Eigen::Index r = 0; r < n; ++r) {
    double m = fam == Family::Binomial ? std::clamp((y(r) + ybar) / 2.0, 0.05, 0.9)
                                       : std::max(y(r), 0.1 * std::abs(ybar) + 1e-3);
    eta(r) = link_fn(link, m);
  }
  Eigen::VectorXd beta = xtx.ldlt().solve(X.transpose() * eta);
  bool have_beta = true;
  {
    const Eigen::VectorXd e0 = X * beta;
    for (Eigen::Index r = 0; r < n && have_beta; ++r) {
      mu(r) = inverse_link(link, e0(r));
      have_beta = mu_valid(fam, link, mu(r));
    }
    if (have_beta) {
      eta = e0;
    } else {
      for (Eigen::Index r = 0; r < n; ++r) mu(r) = inverse_link(link, eta(r));
      beta.setZero();
    }
  }
  double dev = deviance(fam, y, mu);
  Eigen::VectorXd w(n), zr(n);
  int it = 0;
  bool converged = false;
  for (; it < 100; ++it) {
    for (Eigen::Index r = 0; r < n; ++r) {
      const double d = mu_eta(link, eta(r));
      const double v = std::max(variance_fn(fam, mu(r)), 1e-300);
      w(r) = d * d / v;
      zr(r) = eta(r) + (y(r) - mu(r)) / d;
    }
    Eigen::MatrixXd xtwx(p, p);
    xtwx.setZero();
    xtwx.selfadjointView<Eigen::Lower>().rankUpdate((X.transpose() * w.cwiseSqrt().asDiagonal()));
    xtwx = xtwx.selfadjointView<Eigen::Lower>();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
    Eigen::VectorXd target = ldlt.solve(X.transpose() * w.cwiseProduct(zr));
    if (ldlt.info() != Eigen::Success || !target.allFinite()) break;

    // step-halving until the deviance does not increase and mu is valid
    Eigen::VectorXd cand = target, eta_c, mu_c(n);
    double dev_c = std::numeric_limits<double>::infinity();
    for (int h = 0; h < 30; ++h) {
      eta_c = X * cand;
      bool ok = true;
      for (Eigen::Index r = 0; r < n && ok; ++r) {
        mu_c(r) = inverse_link(link, eta_c(r));
        ok = mu_valid(fam, link, mu_c(r));
      }
      if (ok) {
        dev_c = deviance(fam, y, mu_c);
        if (std::isfinite(dev_c) && (!have_beta || dev_c <= dev * (1.0 + 1e-12) + 1e-12)) break;
      }
      if (!have_beta) {
        // first iteration has no previous beta: shrink toward zero
        cand *= 0.5;
      } else {
        cand = 0.5 * (cand + beta);
      }
      dev_c = std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(dev_c)) break;
    const double change = have_beta ? ((cand - beta).array().abs() / (beta.array().abs() + 1.0)).maxCoeff()
                                    : std::numeric_limits<double>::infinity();
    beta = cand;
    have_beta = true;
    eta = eta_c;
    mu = mu_c;
    dev = dev_c;
    if (change < 1e-8) {
      converged = true;
      ++it;
      break;
    }
  }
  if (fam == Family::Binomial) check_separation(data, mu);
  if (!converged) {
    throw Error(ErrorKind::IRLSNonConvergence, "IRLS did not converge", {{"iterations", std::to_string(it)}});
  }

  Eigen::MatrixXd xtwx = Eigen::MatrixXd::Zero(p, p);
  double pearson = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double d = mu_eta(link, eta(r));
    const double v = variance_fn(fam, mu(r));
    w(r) = d * d / v;
    pearson += (y(r) - mu(r)) * (y(r) - mu(r)) / v;
  }
  xtwx.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose() * w.cwiseSqrt().asDiagonal());
  xtwx = xtwx.selfadjointView<Eigen::Lower>();
  const double phi = fam == Family::Gaussian && n > p ? pearson / static_cast<double>(n - p) : 1.0;
  fit.beta = beta;
  fit.vcov = phi * xtwx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.variance.residual = fam == Family::Gaussian ? phi : 0.0;
  fit.convergence = {it, dev, 0.0, true};
  fit.fitted = true;
  return fit;
}

}  // namespace swmrs
