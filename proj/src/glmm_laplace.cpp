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

// Binomial GLMM by the Laplace approximation. Random effects are written
// u_i = Lambda v_i with v_i ~ N(0, I); the cluster design is
// [1, period indicators] (cluster + cluster-period) or [1].
//
// Stage 1 maximizes the penalized likelihood jointly over (beta, v) for a
// given variance (penalized IRLS with a block-arrow Schur complement) and
// searches the variances with Nelder-Mead on the resulting deviance.
// Stage 2 polishes (beta, log variances) jointly by quasi-Newton on the
// Laplace deviance, with the modes v_i found by per-cluster Newton steps.

#include "design.hpp"
#include "swmrs/error.hpp"
#include "swmrs/optimize.hpp"
#include "swmrs/working_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace swmrs {

namespace {

using detail::inverse_link;
using detail::log_lik;
using detail::mu_eta;
using detail::variance_fn;

constexpr double kLogLo = -25.0;
constexpr double kLogHi = 8.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

class LaplaceProblem {
 public:
  LaplaceProblem(const TrialDataset& data, const WorkingModelSpec& spec)
      : link_(spec.link), J_(data.num_periods()) {
    const detail::Design design(data, spec);
    names_ = design.names();
    X_ = design.matrix(data);
    y_ = data.outcome();
    if (y_.minCoeff() < 0.0 || y_.maxCoeff() > 1.0)
      throw Error(ErrorKind::InvalidArgument, "binomial outcomes must lie in [0,1]");
    cp_ = spec.random_effects == RandomEffects::ClusterPlusClusterPeriod;
    q_ = cp_ ? 1 + J_ : 1;
    terms_ = cp_ ? 2 : 1;
    for (int i = 0; i < data.num_clusters(); ++i) {
      begin_.push_back(data.cell_begin(i, 1));
      end_.push_back(data.cell_end(i, J_));
    }
    period_.assign(data.period().begin(), data.period().end());
    labels_ = data.cluster_labels();
    Eigen::MatrixXd xtx = X_.transpose() * X_;
    detail::check_full_rank(xtx, names_);
  }

  int terms() const { return terms_; }
  int p() const { return static_cast<int>(X_.cols()); }
  int clusters() const { return static_cast<int>(begin_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  Eigen::VectorXd lambda(const Eigen::VectorXd& var) const {
    Eigen::VectorXd l(q_);
    l(0) = std::sqrt(var(0));
    for (int k = 1; k < q_; ++k) l(k) = std::sqrt(var(1));
    return l;
  }

  // Row quantities at linear predictor eta: log-lik, score and weight.
  bool row_terms(Eigen::Index r, double eta, double& ll, double& s, double& w) const {
    const double mu = inverse_link(link_, eta);
    if (!(mu > 0.0 && mu < 1.0)) {
      if (link_ == Link::Log) return false;
    }
    ll = log_lik(Family::Binomial, y_(r), mu);
    if (!std::isfinite(ll)) return false;
    const double d = mu_eta(link_, eta);
    const double v = std::max(variance_fn(Family::Binomial, mu), 1e-300);
    s = (y_(r) - mu) * d / v;
    w = d * d / v;
    return true;
  }

  // Cluster i: accumulate Z'WZ (q x q), Z's (q) and log-lik at offset eta0
  // plus Z Lambda v. Returns false when some mu leaves the domain.
  bool cluster_terms(int i, const Eigen::VectorXd& eta0, const Eigen::VectorXd& lam, const Eigen::VectorXd& v,
                     double& ll, Eigen::VectorXd& zs, Eigen::VectorXd& zw, Eigen::MatrixXd* xwz,
                     Eigen::VectorXd* xs, Eigen::MatrixXd* xwx) const {
    ll = 0.0;
    zs = Eigen::VectorXd::Zero(q_);
    zw = Eigen::VectorXd::Zero(q_);  // diagonal of Z'WZ; the first entry is the total
    if (xwz) xwz->setZero(X_.cols(), q_);
    for (Eigen::Index r = begin_[i]; r < end_[i]; ++r) {
      const int j = period_[static_cast<std::size_t>(r)];
      double eta = eta0(r) + lam(0) * v(0);
      if (cp_) eta += lam(j) * v(j);
      double l = 0, s = 0, w = 0;
      if (!row_terms(r, eta, l, s, w)) return false;
      ll += l;
      zs(0) += s;
      zw(0) += w;
      if (cp_) {
        zs(j) += s;
        zw(j) += w;
      }
      if (xwz) {
        const auto xr = X_.row(r);
        xwz->col(0) += w * xr.transpose();
        if (cp_) xwz->col(j) += w * xr.transpose();
        *xs += s * xr.transpose();
        xwx->selfadjointView<Eigen::Lower>().rankUpdate(xr.transpose(), w);
      }
    }
    return true;
  }

  // H = I + Lambda Z'WZ Lambda from the diagonal summary zw (cell
  // structure: entry (0,j) equals entry (j,j)).
  Eigen::MatrixXd penalized_hessian(const Eigen::VectorXd& zw, const Eigen::VectorXd& lam) const {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(q_, q_);
    H(0, 0) = zw(0);
    for (int j = 1; j < q_; ++j) H(0, j) = H(j, 0) = H(j, j) = zw(j);
    H = lam.asDiagonal() * H * lam.asDiagonal();
    H.diagonal().array() += 1.0;
    return H;
  }

  // Newton iterations for the mode of cluster i; returns -2 h(v) + log|H|.
  double cluster_laplace(int i, const Eigen::VectorXd& eta0, const Eigen::VectorXd& lam, Eigen::VectorXd& v) const {
    double ll = 0;
    Eigen::VectorXd zs, zw;
    if (!cluster_terms(i, eta0, lam, v, ll, zs, zw, nullptr, nullptr, nullptr)) {
      v.setZero();
      if (!cluster_terms(i, eta0, lam, v, ll, zs, zw, nullptr, nullptr, nullptr)) return kInf;
    }
    double h = ll - 0.5 * v.squaredNorm();
    for (int it = 0; it < 60; ++it) {
      const Eigen::MatrixXd H = penalized_hessian(zw, lam);
      const Eigen::VectorXd G = lam.cwiseProduct(zs) - v;
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      const Eigen::VectorXd step = llt.solve(G);
      if (step.lpNorm<Eigen::Infinity>() < 1e-10) {
        const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        return -2.0 * h + logdet;
      }
      double t = 1.0;
      bool moved = false;
      for (int k = 0; k < 40; ++k) {
        Eigen::VectorXd vn = v + t * step;
        double lln = 0;
        Eigen::VectorXd zsn, zwn;
        if (cluster_terms(i, eta0, lam, vn, lln, zsn, zwn, nullptr, nullptr, nullptr)) {
          const double hn = lln - 0.5 * vn.squaredNorm();
          if (hn >= h - 1e-12 * std::abs(h)) {
            v = vn;
            h = hn;
            zs = zsn;
            zw = zwn;
            moved = true;
            break;
          }
        }
        t *= 0.5;
      }
      if (!moved) {
        const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        if (step.lpNorm<Eigen::Infinity>() < 1e-6) return -2.0 * h + logdet;
        throw Error(ErrorKind::InnerNewtonDivergence, "random-effect mode search stalled",
                    {{"cluster", labels_[static_cast<std::size_t>(i)]}});
      }
    }
    throw Error(ErrorKind::InnerNewtonDivergence, "random-effect mode search did not converge",
                {{"cluster", labels_[static_cast<std::size_t>(i)]}});
  }

  double laplace_deviance(const Eigen::VectorXd& beta, const Eigen::VectorXd& var,
                          std::vector<Eigen::VectorXd>& modes) const {
    const Eigen::VectorXd eta0 = X_ * beta;
    const Eigen::VectorXd lam = lambda(var);
    double total = 0.0;
    for (int i = 0; i < clusters(); ++i) {
      total += cluster_laplace(i, eta0, lam, modes[static_cast<std::size_t>(i)]);
      if (!std::isfinite(total)) return kInf;
    }
    return total;
  }

  struct Joint {
    Eigen::MatrixXd schur;  // p x p
    Eigen::VectorXd rhs;    // p
    std::vector<Eigen::MatrixXd> hvv, hbv;
    std::vector<Eigen::VectorXd> gv;
    double pen_ll = 0.0;
    double logdet = 0.0;
    bool ok = true;
  };

  Joint joint_terms(const Eigen::VectorXd& beta, const Eigen::VectorXd& lam,
                    const std::vector<Eigen::VectorXd>& modes) const {
    Joint jt;
    const Eigen::Index p = X_.cols();
    const Eigen::VectorXd eta0 = X_ * beta;
    Eigen::MatrixXd xwx = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd xs = Eigen::VectorXd::Zero(p);
    jt.schur = Eigen::MatrixXd::Zero(p, p);
    jt.rhs = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < clusters(); ++i) {
      const auto& v = modes[static_cast<std::size_t>(i)];
      double ll = 0;
      Eigen::VectorXd zs, zw;
      Eigen::MatrixXd xwz;
      if (!cluster_terms(i, eta0, lam, v, ll, zs, zw, &xwz, &xs, &xwx)) {
        jt.ok = false;
        return jt;
      }
      jt.pen_ll += ll - 0.5 * v.squaredNorm();
      Eigen::MatrixXd H = penalized_hessian(zw, lam);
      Eigen::VectorXd g = lam.cwiseProduct(zs) - v;
      Eigen::MatrixXd hbv = xwz * lam.asDiagonal();
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      jt.logdet += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      const Eigen::MatrixXd hinv_hvb = llt.solve(hbv.transpose());
      jt.schur.noalias() -= hbv * hinv_hvb;
      jt.rhs.noalias() -= hbv * llt.solve(g);
      jt.hvv.push_back(std::move(H));
      jt.hbv.push_back(std::move(hbv));
      jt.gv.push_back(std::move(g));
    }
    jt.schur += Eigen::MatrixXd(xwx.selfadjointView<Eigen::Lower>());
    jt.rhs += xs;
    return jt;
  }

  // Penalized IRLS over (beta, v) at fixed variances. Returns the
  // Laplace-type deviance at the joint mode, or +inf on failure.
  double pirls(const Eigen::VectorXd& var, Eigen::VectorXd& beta, std::vector<Eigen::VectorXd>& modes) const {
    const Eigen::VectorXd lam = lambda(var);
    Joint jt = joint_terms(beta, lam, modes);
    if (!jt.ok) return kInf;
    for (int it = 0; it < 100; ++it) {
      Eigen::LDLT<Eigen::MatrixXd> ls(jt.schur);
      const Eigen::VectorXd db = ls.solve(jt.rhs);
      if (!db.allFinite()) return kInf;
      std::vector<Eigen::VectorXd> dv(modes.size());
      double dmax = db.lpNorm<Eigen::Infinity>();
      for (std::size_t i = 0; i < modes.size(); ++i) {
        dv[i] = jt.hvv[i].llt().solve(jt.gv[i] - jt.hbv[i].transpose() * db);
        dmax = std::max(dmax, dv[i].lpNorm<Eigen::Infinity>());
      }
      if (dmax < 1e-9) break;
      double t = 1.0;
      bool moved = false;
      for (int k = 0; k < 40; ++k) {
        Eigen::VectorXd bn = beta + t * db;
        std::vector<Eigen::VectorXd> vn = modes;
        for (std::size_t i = 0; i < modes.size(); ++i) vn[i] += t * dv[i];
        Joint jn = joint_terms(bn, lam, vn);
        if (jn.ok && jn.pen_ll >= jt.pen_ll - 1e-12 * std::abs(jt.pen_ll)) {
          beta = bn;
          modes = std::move(vn);
          jt = std::move(jn);
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;
    }
    return -2.0 * jt.pen_ll + jt.logdet;
  }

  Eigen::MatrixXd vcov(const Eigen::VectorXd& beta, const Eigen::VectorXd& var,
                       const std::vector<Eigen::VectorXd>& modes) const {
    const Joint jt = joint_terms(beta, lambda(var), modes);
    const Eigen::Index p = X_.cols();
    return jt.schur.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  }

 private:
  Link link_;
  int J_;
  bool cp_ = false;
  int q_ = 1, terms_ = 1;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X_;
  Eigen::VectorXd y_;
  std::vector<Eigen::Index> begin_, end_;
  std::vector<int> period_;
  std::vector<std::string> labels_;
  std::vector<std::string> names_;

 public:
  int q() const { return q_; }
};

Eigen::VectorXd clamp_log(const Eigen::VectorXd& x) { return x.cwiseMax(kLogLo).cwiseMin(kLogHi); }

}  // namespace

FittedModel fit_glmm_laplace(const TrialDataset& data, const WorkingModelSpec& spec, const FitOptions& options) {
  spec.validate();
  if (spec.estimator != ModelEstimator::GlmmLaplace)
    throw Error(ErrorKind::InvalidModelSpec, "spec is not a GLMM_LAPLACE model");
  const LaplaceProblem pr(data, spec);
  const int p = pr.p(), T = pr.terms();

  const bool fixed = options.fixed_variance.has_value();
  Eigen::VectorXd beta;
  if (fixed) {
    // cold start: period means on the link scale, everything else zero
    beta = Eigen::VectorXd::Zero(p);
    for (int j = 1; j <= data.num_periods(); ++j) {
      double s = 0.0, n = 0.0;
      for (Eigen::Index r = 0; r < data.num_rows(); ++r)
        if (data.period()[static_cast<std::size_t>(r)] == j) {
          s += data.outcome()(r);
          n += 1.0;
        }
      const double m = std::clamp((s + 0.5) / (n + 1.0), 1e-3, 1.0 - 1e-3);
      beta(j - 1) = spec.link == Link::Logit ? std::log(m / (1.0 - m)) : std::log(m);
    }
  } else {
    // fixed-effect start from the marginal GLM
    WorkingModelSpec glm = spec;
    glm.estimator = ModelEstimator::GeeIndependence;
    glm.random_effects = RandomEffects::None;
    beta = fit_gee_independence(data, glm).beta;
  }
  std::vector<Eigen::VectorXd> modes(static_cast<std::size_t>(pr.clusters()), Eigen::VectorXd::Zero(pr.q()));

  FittedModel fit;
  fit.spec = spec;
  fit.num_periods = data.num_periods();
  fit.column_names = pr.names();

  Eigen::VectorXd var(2);
  var.setZero();
  int iterations = 0;
  if (fixed) {
    if (options.fixed_variance->size() != T)
      throw Error(ErrorKind::InvalidArgument, "wrong number of fixed variances");
    var.head(T) = *options.fixed_variance;
  }

  auto as_var = [&](const Eigen::VectorXd& logv) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
    v.head(T) = clamp_log(logv).array().exp().matrix();
    return v;
  };

  // stage 1
  if (!fixed) {
    Eigen::VectorXd b_cache = beta;
    auto profiled = [&](const Eigen::VectorXd& logv) {
      Eigen::VectorXd b = b_cache;
      std::vector<Eigen::VectorXd> m = modes;
      const double d = pr.pirls(as_var(logv), b, m);
      return d;
    };
    const OptimResult nm = nelder_mead(profiled, Eigen::VectorXd::Constant(T, std::log(0.2)), 1.0, 1e-8, 200);
    iterations += nm.iterations;
    var = as_var(nm.x);
  }
  if (!std::isfinite(pr.pirls(var, beta, modes))) {
    throw Error(ErrorKind::OptimizerNonConvergence, "penalized IRLS failed at the starting variances");
  }

  // stage 2
  BfgsOptions bo;
  bo.gtol = 1e-6;
  bo.max_iter = 500;
  OptimResult qn;
  std::vector<Eigen::VectorXd> warm = modes;
  if (fixed) {
    auto f = [&](const Eigen::VectorXd& b) {
      try {
        return pr.laplace_deviance(b, var, warm);
      } catch (const Error&) {
        return kInf;
      }
    };
    qn = bfgs(f, beta, bo);
    beta = qn.x;
  } else {
    Eigen::VectorXd x0(p + T);
    x0.head(p) = beta;
    x0.tail(T) = var.head(T).array().max(std::exp(kLogLo)).log().matrix();
    auto f = [&](const Eigen::VectorXd& x) {
      try {
        return pr.laplace_deviance(x.head(p), as_var(x.tail(T)), warm);
      } catch (const Error&) {
        return kInf;
      }
    };
    qn = bfgs(f, x0, bo);
    beta = qn.x.head(p);
    var = as_var(qn.x.tail(T));
  }
  iterations += qn.iterations;
  if (!qn.converged) {
    throw Error(ErrorKind::OptimizerNonConvergence, "Laplace optimization did not converge",
                {{"iterations", std::to_string(iterations)}, {"gradient", std::to_string(qn.gradient_norm)}});
  }
  // modes at the final parameters (this call surfaces inner divergence)
  const double dev = pr.laplace_deviance(beta, var, modes);

  fit.beta = beta;
  fit.vcov = pr.vcov(beta, var, modes);
  fit.variance.cluster = var(0);
  fit.variance.cluster_period = T == 2 ? var(1) : 0.0;
  if (fit.variance.cluster < 1e-10) {
    fit.variance.cluster = 0.0;
    fit.variance.cluster_boundary = true;
  }
  if (T == 2 && fit.variance.cluster_period < 1e-10) {
    fit.variance.cluster_period = 0.0;
    fit.variance.cluster_period_boundary = true;
  }
  fit.convergence = {iterations, dev, qn.gradient_norm, true};
  fit.fitted = true;
  return fit;
}

}  // namespace swmrs
