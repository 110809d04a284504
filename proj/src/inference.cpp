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

#include "swmrs/inference.hpp"

#include "swmrs/distributions.hpp"
#include "swmrs/error.hpp"
#include "swmrs/parallel.hpp"
#include "swmrs/standardization.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace swmrs {

std::string_view to_string(MethodKind k) {
  switch (k) {
    case MethodKind::Unadjusted: return "unadj";
    case MethodKind::Mrs: return "mrs";
    case MethodKind::Coef: return "coef";
    case MethodKind::Ancova: return "ancova";
  }
  return "?";
}

std::string_view to_string(LocoPolicy p) {
  switch (p) {
    case LocoPolicy::Error: return "error";
    case LocoPolicy::DropPeriod: return "drop-period";
    case LocoPolicy::DropReplicate: return "drop-replicate";
  }
  return "?";
}

LocoPolicy parse_loco_policy(std::string_view s) {
  if (s == "error") return LocoPolicy::Error;
  if (s == "drop-period") return LocoPolicy::DropPeriod;
  if (s == "drop-replicate") return LocoPolicy::DropReplicate;
  throw Error(ErrorKind::InvalidArgument, "unknown LOCO policy", {{"value", std::string(s)}});
}

std::string_view to_string(IcsTest t) {
  switch (t) {
    case IcsTest::HPair: return "h";
    case IcsTest::VPair: return "v";
    case IcsTest::Global: return "global";
  }
  return "?";
}

IcsTest parse_ics_test(std::string_view s) {
  if (s == "h") return IcsTest::HPair;
  if (s == "v") return IcsTest::VPair;
  if (s == "global") return IcsTest::Global;
  throw Error(ErrorKind::InvalidArgument, "unknown test", {{"value", std::string(s)}});
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_coef_scale(const WorkingModelSpec& spec, const ContrastScale& scale) {
  const bool ok = (spec.link == Link::Identity && scale.kind == Scale::Difference && !scale.log_report) ||
                  (spec.link == Link::Logit && scale.kind == Scale::OddsRatio && scale.log_report) ||
                  (spec.link == Link::Log && scale.kind == Scale::RiskRatio && scale.log_report);
  if (!ok) {
    throw Error(ErrorKind::InvalidArgument, "coefficient estimator's link does not match the contrast scale",
                {{"link", std::string(to_string(spec.link))}, {"scale", std::string(to_string(scale.kind))}});
  }
}

struct CachedFit {
  WorkingModelSpec spec;
  int scheme = -1;  // ANCOVA fits depend on the weights
  FittedModel fit;
  std::unique_ptr<PredictionTable> preds;
};

std::vector<EstimateSet> estimate_impl(const TrialDataset& data, const std::vector<MethodSpec>& methods,
                                       const ContrastScale& scale, const std::vector<int>& periods,
                                       std::vector<FittedModel>* fits_out, bool skip_glmm_coef) {
  std::array<WeightScheme, 4> w;
  for (std::size_t e = 0; e < 4; ++e) w[e] = resolve_weights(data, kAllEstimands[e]);
  std::vector<CachedFit> cache;
  auto get = [&](const WorkingModelSpec& spec, int scheme) -> CachedFit& {
    const int key = spec.estimator == ModelEstimator::AncovaWls ? scheme : -1;
    for (auto& c : cache)
      if (c.spec == spec && c.scheme == key) return c;
    CachedFit c;
    c.spec = spec;
    c.scheme = key;
    c.fit = fit_working_model(data, spec, key >= 0 ? &w[static_cast<std::size_t>(key)] : nullptr);
    if (fits_out) fits_out->push_back(c.fit);
    cache.push_back(std::move(c));
    return cache.back();
  };

  std::vector<EstimateSet> out(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const MethodSpec& ms = methods[m];
    for (std::size_t e = 0; e < 4; ++e) {
      PointEstimate pe;
      pe.model_se = kNaN;
      switch (ms.kind) {
        case MethodKind::Unadjusted:
          pe.mu1 = unadjusted_mu(data, w[e], 1, periods);
          pe.mu0 = unadjusted_mu(data, w[e], 0, periods);
          pe.tau = apply_contrast(scale.kind, pe.mu1, pe.mu0);
          pe.psi = scale.psi(pe.tau);
          break;
        case MethodKind::Mrs: {
          CachedFit& c = get(ms.model, static_cast<int>(e));
          if (!c.preds) c.preds = std::make_unique<PredictionTable>(predict_all(c.fit, data));
          pe.mu1 = mrs_mu(data, w[e], *c.preds, 1, periods);
          pe.mu0 = mrs_mu(data, w[e], *c.preds, 0, periods);
          pe.tau = apply_contrast(scale.kind, pe.mu1, pe.mu0);
          pe.psi = scale.psi(pe.tau);
          break;
        }
        case MethodKind::Coef:
        case MethodKind::Ancova: {
          check_coef_scale(ms.model, scale);
          if (ms.kind == MethodKind::Ancova && ms.model.estimator != ModelEstimator::AncovaWls)
            throw Error(ErrorKind::InvalidModelSpec, "ancova method needs an ANCOVA_WLS model");
          pe.mu1 = pe.mu0 = kNaN;
          if (skip_glmm_coef && ms.model.estimator == ModelEstimator::GlmmLaplace) {
            pe.psi = pe.tau = kNaN;
            break;
          }
          CachedFit& c = get(ms.model, static_cast<int>(e));
          pe.psi = coef_estimate(c.fit, w[e], periods);
          pe.tau = scale.psi_inverse(pe.psi);
          if (ms.model.estimator == ModelEstimator::GlmmLaplace) pe.model_se = coef_model_se(c.fit, w[e], periods);
          break;
        }
      }
      out[m][e] = pe;
    }
  }
  return out;
}

// Rollout periods in `periods` where dropping cluster g leaves one arm empty.
std::vector<int> degenerate_periods(const TrialDataset& data, int g, const std::vector<int>& periods) {
  std::vector<int> bad;
  for (int j : periods) {
    int n1 = 0, n0 = 0;
    for (int i = 0; i < data.num_clusters(); ++i) {
      if (i == g) continue;
      const int z = data.cell_treatment(i, j);
      if (z == 1) ++n1;
      if (z == 0) ++n0;
    }
    if (n1 == 0 || n0 == 0) bad.push_back(j);
  }
  return bad;
}

}  // namespace

std::vector<EstimateSet> estimate_points(const TrialDataset& data, const std::vector<MethodSpec>& methods,
                                         const ContrastScale& scale, const std::vector<int>& periods,
                                         std::vector<FittedModel>* fits) {
  return estimate_impl(data, methods, scale, periods, fits, false);
}

double jackknife_variance(const Eigen::VectorXd& r) {
  const double n = static_cast<double>(r.size());
  if (r.size() < 2) return 0.0;
  return (n - 1.0) / n * (r.array() - r.mean()).square().sum();
}

Eigen::MatrixXd jackknife_covariance(const Eigen::MatrixXd& r) {
  const double n = static_cast<double>(r.rows());
  if (r.rows() < 2) return Eigen::MatrixXd::Zero(r.cols(), r.cols());
  const Eigen::MatrixXd c = r.rowwise() - r.colwise().mean();
  return (n - 1.0) / n * (c.transpose() * c);
}

Analysis analyze(const TrialDataset& data, const std::vector<MethodSpec>& methods, const ContrastScale& scale,
                 const JackknifeOptions& options) {
  const int I = data.num_clusters();
  if (I < 3) throw Error(ErrorKind::InvalidArgument, "the jackknife needs at least 3 clusters");
  derive_layout(data);
  Analysis an;
  an.scale = scale;
  const std::vector<int> rollout = rollout_periods(data.num_periods());
  const auto full = estimate_impl(data, methods, scale, rollout, &an.fits, false);

  // plan the replicates
  std::vector<int> left_out;
  std::vector<std::vector<int>> use_periods, dropped;
  for (int g = 0; g < I; ++g) {
    const auto bad = degenerate_periods(data, g, rollout);
    if (!bad.empty()) {
      if (options.policy == LocoPolicy::Error) {
        throw Error(ErrorKind::LocoDegenerate, "leaving out a cluster empties an arm in a rollout period",
                    {{"cluster", data.cluster_labels()[static_cast<std::size_t>(g)]},
                     {"period", std::to_string(bad.front())}});
      }
      if (options.policy == LocoPolicy::DropReplicate) continue;
      std::vector<int> keep;
      for (int j : rollout)
        if (std::find(bad.begin(), bad.end(), j) == bad.end()) keep.push_back(j);
      if (keep.empty()) continue;
      left_out.push_back(g);
      use_periods.push_back(keep);
      dropped.push_back(bad);
      continue;
    }
    left_out.push_back(g);
    use_periods.push_back(rollout);
    dropped.emplace_back();
  }
  const int R = static_cast<int>(left_out.size());
  if (R < 2) throw Error(ErrorKind::LocoDegenerate, "fewer than two usable jackknife replicates");

  std::vector<std::vector<EstimateSet>> reps(static_cast<std::size_t>(R));
  parallel_for(R, resolve_threads(options.threads), [&](int k) {
    const auto ks = static_cast<std::size_t>(k);
    const TrialDataset sub = data.without_cluster(left_out[ks]);
    reps[ks] = estimate_impl(sub, methods, scale, use_periods[ks], nullptr, options.model_se_for_glmm_coef);
  });

  const double df = R - 1;
  const double tq = t_quantile(0.975, df);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodAnalysis ma;
    ma.method = methods[m];
    ma.full = full[m];
    ma.reps.left_out = left_out;
    ma.reps.dropped = dropped;
    ma.reps.psi.resize(R, 4);
    ma.reps.mu1.resize(R, 4);
    ma.reps.mu0.resize(R, 4);
    for (int k = 0; k < R; ++k)
      for (int e = 0; e < 4; ++e) {
        const auto& pe = reps[static_cast<std::size_t>(k)][m][static_cast<std::size_t>(e)];
        ma.reps.psi(k, e) = pe.psi;
        ma.reps.mu1(k, e) = pe.mu1;
        ma.reps.mu0(k, e) = pe.mu0;
      }
    for (int e = 0; e < 4; ++e) {
      EstimateResult r;
      const auto& pe = full[m][static_cast<std::size_t>(e)];
      r.estimand = kAllEstimands[static_cast<std::size_t>(e)];
      r.scale = scale.kind;
      r.estimate = pe.tau;
      r.psi_estimate = pe.psi;
      r.df = df;
      if (std::isfinite(pe.model_se)) {
        r.se = pe.model_se;
        r.se_method = "model";
      } else {
        r.se = std::sqrt(jackknife_variance(ma.reps.psi.col(e)));
      }
      r.ci_lower = scale.psi_inverse(pe.psi - tq * r.se);
      r.ci_upper = scale.psi_inverse(pe.psi + tq * r.se);
      if (std::isfinite(pe.mu1) && ma.reps.mu1.col(e).allFinite()) {
        Eigen::MatrixXd pair(R, 2);
        pair.col(0) = ma.reps.mu1.col(e);
        pair.col(1) = ma.reps.mu0.col(e);
        r.sigma = jackknife_covariance(pair);
        r.has_sigma = true;
      }
      ma.results[static_cast<std::size_t>(e)] = r;
    }
    an.methods.push_back(std::move(ma));
  }
  return an;
}

Eigen::Matrix<double, 3, 4> ics_contrast_matrix() {
  Eigen::Matrix<double, 3, 4> c;
  c << 1, -1, 0, 0,
       0, 0, 1, -1,
       1, 0, -1, 0;
  return c;
}

IcsTestResult global_ics_statistic(const Eigen::Vector4d& psi, const Eigen::Matrix4d& v, double df2) {
  IcsTestResult res;
  res.kind = IcsTest::Global;
  res.psi = psi;
  res.covariance = v;
  res.df1 = 3.0;
  res.df2 = df2;
  const Eigen::Matrix<double, 3, 4> C = ics_contrast_matrix();
  const Eigen::Vector3d c = C * psi;
  if (c.norm() < 1e-12) {
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  const Eigen::Matrix3d cvc = C * v * C.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cvc, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > hi * 1e-12)) {
    throw Error(ErrorKind::SingularContrastCovariance, "contrast covariance is singular",
                {{"condition", lo > 0.0 ? std::to_string(hi / lo) : "inf"}});
  }
  res.statistic = c.dot(cvc.ldlt().solve(c)) / 3.0;
  res.p_value = f_upper_tail(res.statistic, 3.0, df2);
  return res;
}

IcsTestResult ics_test(const MethodAnalysis& a, IcsTest kind) {
  const Eigen::Index R = a.reps.psi.rows();
  if (!a.reps.psi.allFinite())
    throw Error(ErrorKind::InvalidArgument, "ICS tests need jackknife replicates for every estimand");
  Eigen::Vector4d psi;
  for (int e = 0; e < 4; ++e) psi(e) = a.full[static_cast<std::size_t>(e)].psi;
  const double df2 = static_cast<double>(R - 1);
  if (kind == IcsTest::Global) return global_ics_statistic(psi, jackknife_covariance(a.reps.psi), df2);

  const int ci = kind == IcsTest::HPair ? 0 : 2;
  IcsTestResult res;
  res.kind = kind;
  res.psi = psi;
  res.df1 = 1.0;
  res.df2 = df2;
  const double d = psi(ci) - psi(ci + 1);
  const Eigen::VectorXd dg = a.reps.psi.col(ci) - a.reps.psi.col(ci + 1);
  const double vd = jackknife_variance(dg);
  res.covariance = Eigen::MatrixXd::Constant(1, 1, vd);
  if (vd < 1e-12 && std::abs(d) < 1e-12) {
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }
  res.statistic = d / std::sqrt(vd);
  res.p_value = t_two_sided_p(res.statistic, df2);
  return res;
}

}  // namespace swmrs
