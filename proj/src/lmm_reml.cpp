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

// Linear mixed model by REML. The random-effect design of a cluster is
// [1, period indicators] (or just [1]), so everything the profiled
// deviance needs reduces to per-cluster cross products of size q x q,
// q x p and q, accumulated once from cell sums.

#include "design.hpp"
#include "swmrs/error.hpp"
#include "swmrs/optimize.hpp"
#include "swmrs/working_models.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace swmrs {

namespace {

constexpr double kLogLo = -25.0;
constexpr double kLogHi = 12.0;

struct ClusterStats {
  Eigen::MatrixXd ztz;  // q x q
  Eigen::MatrixXd ztx;  // q x p
  Eigen::VectorXd zty;  // q
};

struct RemlProblem {
  int q = 1;
  int terms = 1;  // variance ratios estimated
  Eigen::Index n = 0, p = 0;
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  double yty = 0.0;
  // the statistics are built from y - X beta0 (OLS); REML is invariant to
  // that shift and the cross products stay small
  Eigen::VectorXd beta0;
  std::vector<ClusterStats> clusters;
  std::vector<std::string> names;
};

RemlProblem build_problem(const TrialDataset& data, const WorkingModelSpec& spec) {
  spec.validate();
  if (spec.estimator != ModelEstimator::LmmReml)
    throw Error(ErrorKind::InvalidModelSpec, "spec is not an LMM_REML model");
  const detail::Design design(data, spec);
  const Eigen::MatrixXd X = design.matrix(data);
  const Eigen::VectorXd& y_raw = data.outcome();
  const int J = data.num_periods();
  RemlProblem pr;
  pr.names = design.names();
  pr.n = X.rows();
  pr.p = X.cols();
  const bool cp = spec.random_effects == RandomEffects::ClusterPlusClusterPeriod;
  pr.q = cp ? 1 + J : 1;
  pr.terms = cp ? 2 : 1;
  pr.xtx = Eigen::MatrixXd::Zero(pr.p, pr.p);
  pr.xtx.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  pr.xtx = pr.xtx.selfadjointView<Eigen::Lower>();
  detail::check_full_rank(pr.xtx, pr.names);
  pr.beta0 = pr.xtx.ldlt().solve(X.transpose() * y_raw);
  const Eigen::VectorXd y = y_raw - X * pr.beta0;
  pr.xty = X.transpose() * y;
  pr.yty = y.squaredNorm();
  for (int i = 0; i < data.num_clusters(); ++i) {
    ClusterStats cs;
    cs.ztz = Eigen::MatrixXd::Zero(pr.q, pr.q);
    cs.ztx = Eigen::MatrixXd::Zero(pr.q, pr.p);
    cs.zty = Eigen::VectorXd::Zero(pr.q);
    for (int j = 1; j <= J; ++j) {
      const auto b = data.cell_begin(i, j), e = data.cell_end(i, j);
      if (b == e) continue;
      const double nij = static_cast<double>(e - b);
      const Eigen::RowVectorXd sx = X.middleRows(b, e - b).colwise().sum();
      const double sy = y.segment(b, e - b).sum();
      cs.ztz(0, 0) += nij;
      cs.ztx.row(0) += sx;
      cs.zty(0) += sy;
      if (cp) {
        cs.ztz(0, j) = cs.ztz(j, 0) = nij;
        cs.ztz(j, j) = nij;
        cs.ztx.row(j) = sx;
        cs.zty(j) = sy;
      }
    }
    pr.clusters.push_back(std::move(cs));
  }
  return pr;
}

struct RemlEval {
  double deviance = 0.0;
  Eigen::VectorXd beta;
  double rss = 0.0;
  Eigen::MatrixXd a_inv;
};

// theta: variance ratios (cluster, cluster-period); zero allowed.
RemlEval evaluate(const RemlProblem& pr, const Eigen::VectorXd& theta, bool want_beta) {
  Eigen::VectorXd lambda(pr.q);
  lambda(0) = std::sqrt(theta(0));
  for (int k = 1; k < pr.q; ++k) lambda(k) = std::sqrt(theta(1));
  Eigen::MatrixXd A = pr.xtx;
  Eigen::VectorXd b = pr.xty;
  double c = pr.yty;
  double logdet_m = 0.0;
  Eigen::MatrixXd M(pr.q, pr.q);
  for (const auto& cs : pr.clusters) {
    M.noalias() = lambda.asDiagonal() * cs.ztz * lambda.asDiagonal();
    M.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    logdet_m += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    Eigen::MatrixXd U = lambda.asDiagonal() * cs.ztx;
    Eigen::VectorXd u = lambda.asDiagonal() * cs.zty;
    llt.matrixL().solveInPlace(U);
    llt.matrixL().solveInPlace(u);
    A.noalias() -= U.transpose() * U;
    b.noalias() -= U.transpose() * u;
    c -= u.squaredNorm();
  }
  Eigen::LLT<Eigen::MatrixXd> la(A);
  RemlEval ev;
  ev.beta = la.solve(b);
  ev.rss = std::max(c - b.dot(ev.beta), 1e-300);
  const double logdet_a = 2.0 * la.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double dof = static_cast<double>(pr.n - pr.p);
  ev.deviance = logdet_m + logdet_a + dof * (1.0 + std::log(2.0 * std::numbers::pi * ev.rss / dof));
  if (want_beta) ev.a_inv = la.solve(Eigen::MatrixXd::Identity(pr.p, pr.p));
  return ev;
}

Eigen::VectorXd clamp_log(const Eigen::VectorXd& x) { return x.cwiseMax(kLogLo).cwiseMin(kLogHi); }

// One Newton step on the coordinates with positive curvature, using a
// finite-difference Hessian. BFGS stalls once the remaining decrease is
// below the deviance's rounding level, which can leave a gradient of a
// few 1e-4 near a sharp optimum. Returns false when the step does not help.
bool newton_polish(const Objective& f, Eigen::VectorXd& x, Eigen::VectorXd& g) {
  const Eigen::Index k = x.size();
  const double h = 1e-3;
  Eigen::MatrixXd H(k, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd up = x, dn = x;
    up(c) += h;
    dn(c) -= h;
    H.col(c) = (central_gradient(f, up) - central_gradient(f, dn)) / (2.0 * h);
  }
  H = 0.5 * (H + H.transpose()).eval();
  std::vector<Eigen::Index> free;
  for (Eigen::Index c = 0; c < k; ++c)
    if (H(c, c) > 1e-6 && x(c) > kLogLo + 1.0 && x(c) < kLogHi - 1.0) free.push_back(c);
  if (free.empty()) return false;
  const auto m = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd Hs(m, m);
  Eigen::VectorXd gs(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    gs(a) = g(free[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < m; ++b) Hs(a, b) = H(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(Hs);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd step = llt.solve(gs);
  Eigen::VectorXd xn = x;
  for (Eigen::Index a = 0; a < m; ++a) xn(free[static_cast<std::size_t>(a)]) -= step(a);
  xn = clamp_log(xn);
  const Eigen::VectorXd gn = central_gradient(f, xn);
  if (!(gn.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>())) return false;
  x = xn;
  g = gn;
  return true;
}

}  // namespace

double lmm_reml_deviance(const TrialDataset& data, const WorkingModelSpec& spec, const Eigen::VectorXd& log_ratio) {
  const RemlProblem pr = build_problem(data, spec);
  if (log_ratio.size() != pr.terms)
    throw Error(ErrorKind::InvalidArgument, "wrong number of variance parameters");
  return evaluate(pr, log_ratio.array().exp().matrix(), false).deviance;
}

FittedModel fit_lmm(const TrialDataset& data, const WorkingModelSpec& spec, const FitOptions& options) {
  const RemlProblem pr = build_problem(data, spec);
  FittedModel fit;
  fit.spec = spec;
  fit.num_periods = data.num_periods();
  fit.column_names = pr.names;
  const bool cp = pr.terms == 2;

  if (pr.yty <= 1e-24 * data.outcome().squaredNorm()) {
    // outcomes lie in the column space of X (all zero, say): exact fit
    fit.beta = pr.beta0;
    fit.vcov = Eigen::MatrixXd::Zero(pr.p, pr.p);
    fit.variance.cluster_boundary = true;
    fit.variance.cluster_period_boundary = cp;
    fit.convergence = {0, 0.0, 0.0, true};
    fit.fitted = true;
    return fit;
  }

  Eigen::VectorXd theta(2);
  theta.setZero();
  if (options.fixed_variance) {
    if (options.fixed_variance->size() != pr.terms)
      throw Error(ErrorKind::InvalidArgument, "wrong number of fixed variance ratios");
    theta.head(pr.terms) = *options.fixed_variance;
    fit.convergence = {0, 0.0, 0.0, true};
  } else {
    auto f = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd th = Eigen::VectorXd::Zero(2);
      th.head(pr.terms) = clamp_log(x).array().exp().matrix();
      return evaluate(pr, th, false).deviance;
    };
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(pr.terms, std::log(0.1));
    const OptimResult nm = nelder_mead(f, x0, 1.0, 1e-10, 200);
    BfgsOptions bo;
    bo.gtol = 1e-6;
    bo.relative = false;
    bo.max_iter = 500;
    OptimResult qn = bfgs(f, nm.x, bo);
    // the objective is flat beyond the clamp, so the gradient there is zero
    qn.x = clamp_log(qn.x);
    Eigen::VectorXd g = central_gradient(f, qn.x);
    int polish = 0;
    for (; polish < 4 && g.lpNorm<Eigen::Infinity>() > 1e-6; ++polish) {
      if (!newton_polish(f, qn.x, g)) break;
    }
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    fit.convergence = {nm.iterations + qn.iterations + polish, f(qn.x), gnorm, gnorm < 1e-4 || qn.converged};
    if (!fit.convergence.converged) {
      throw Error(ErrorKind::OptimizerNonConvergence, "REML optimization did not converge",
                  {{"iterations", std::to_string(fit.convergence.iterations)},
                   {"gradient", std::to_string(gnorm)}});
    }
    theta.head(pr.terms) = clamp_log(qn.x).array().exp().matrix();
  }

  const RemlEval ev = evaluate(pr, theta, true);
  const double sigma2 = ev.rss / static_cast<double>(pr.n - pr.p);
  fit.beta = ev.beta + pr.beta0;
  fit.vcov = sigma2 * ev.a_inv;
  fit.variance.residual = sigma2;
  fit.variance.cluster = theta(0) * sigma2;
  fit.variance.cluster_period = cp ? theta(1) * sigma2 : 0.0;
  if (theta(0) < 1e-10) {
    fit.variance.cluster = 0.0;
    fit.variance.cluster_boundary = true;
  }
  if (cp && theta(1) < 1e-10) {
    fit.variance.cluster_period = 0.0;
    fit.variance.cluster_period_boundary = true;
  }
  if (options.fixed_variance) fit.convergence.objective = ev.deviance;
  fit.fitted = true;
  return fit;
}

}  // namespace swmrs
