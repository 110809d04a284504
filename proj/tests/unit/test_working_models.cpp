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

#include "swmrs/config.hpp"
#include "swmrs/error.hpp"
#include "swmrs/simulation.hpp"
#include "swmrs/working_models.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace swmrs;

namespace {

WorkingModelSpec spec_of(const char* w, std::vector<std::string> covs) { return working_model_preset(w, covs); }

// H = I + t_a Z_a Z_a' + t_g Z_g Z_g', built densely.
Eigen::MatrixXd dense_h(const TrialDataset& d, double ta, double tg) {
  const Eigen::Index n = d.num_rows();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index s = 0; s < n; ++s) {
      const auto rr = static_cast<std::size_t>(r), ss = static_cast<std::size_t>(s);
      if (d.cluster_index()[rr] != d.cluster_index()[ss]) continue;
      H(r, s) += ta;
      if (d.period()[rr] == d.period()[ss]) H(r, s) += tg;
    }
  return H;
}

struct DenseReml {
  double deviance;
  Eigen::VectorXd beta;
};

DenseReml dense_reml(const TrialDataset& d, const Eigen::MatrixXd& X, double ta, double tg) {
  const Eigen::MatrixXd H = dense_h(d, ta, tg);
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  const Eigen::MatrixXd HiX = llt.solve(X);
  const Eigen::VectorXd Hiy = llt.solve(d.outcome());
  const Eigen::MatrixXd A = X.transpose() * HiX;
  const Eigen::VectorXd beta = A.ldlt().solve(X.transpose() * Hiy);
  const Eigen::VectorXd res = d.outcome() - X * beta;
  const double rss = res.dot(llt.solve(res));
  const double dof = static_cast<double>(X.rows() - X.cols());
  const double logdet_h = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const double logdet_a = std::log(A.determinant());
  return {logdet_h + logdet_a + dof * (1.0 + std::log(2.0 * std::numbers::pi * rss / dof)), beta};
}

}  // namespace

TEST_CASE("gaussian identity GEE equals closed-form OLS") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const TrialDataset d = fixtures::random_trial(rng, {.clusters = 6 + rep, .periods = 3 + rep % 4});
    const FittedModel f = fit_gee_independence(d, spec_of("W1", {"x1", "x2"}));
    const Eigen::VectorXd ref = fixtures::ols(fixtures::w1_design(d, {0, 1}), d.outcome());
    REQUIRE(f.beta.size() == ref.size());
    CHECK((f.beta - ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(f.column_names[static_cast<std::size_t>(d.num_periods())] == "treatment");
  }
}

TEST_CASE("identity-link predictions are cell means of the linear predictor") {
  std::mt19937_64 rng(22);
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 8, .periods = 5});
  const FittedModel f = fit_gee_independence(d, spec_of("W1", {"x1", "x2"}));
  for (int z = 0; z <= 1; ++z) {
    const Eigen::VectorXd lin = fixtures::w1_design(d, {0, 1}, z) * f.beta;
    for (int j = 2; j <= 4; ++j) {
      const Eigen::VectorXd m = predict_m(f, d, z, j);
      for (int i = 0; i < d.num_clusters(); ++i) {
        const auto b = d.cell_begin(i, j), e = d.cell_end(i, j);
        CHECK(m(i) == doctest::Approx(lin.segment(b, e - b).mean()).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("REML deviance matches the dense formula") {
  std::mt19937_64 rng(23);
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 6, .periods = 4, .max_size = 5});
  const Eigen::MatrixXd X = fixtures::w1_design(d, {0, 1});
  for (double ta : {0.01, 0.3, 2.0})
    for (double tg : {0.05, 0.7}) {
      Eigen::Vector2d lr(std::log(ta), std::log(tg));
      const double got = lmm_reml_deviance(d, spec_of("W5", {"x1", "x2"}), lr);
      CHECK(got == doctest::Approx(dense_reml(d, X, ta, tg).deviance).epsilon(1e-10));
    }
  Eigen::VectorXd one(1);
  one << std::log(0.4);
  CHECK(lmm_reml_deviance(d, spec_of("W3", {"x1", "x2"}), one) ==
        doctest::Approx(dense_reml(d, X, 0.4, 0.0).deviance).epsilon(1e-10));
}

TEST_CASE("REML fit is a stationary point and its beta is the GLS solution") {
  ScenarioConfig c;
  for (std::uint64_t r = 0; r < 4; ++r) {
    const TrialDataset d = generate_trial(c, r);
    const WorkingModelSpec s = spec_of("W3", {"x1", "x2", "cell_size"});
    const FittedModel f = fit_lmm(d, s);
    REQUIRE(f.convergence.converged);
    CHECK(f.variance.cluster > 0.0);
    const double ratio = f.variance.cluster / f.variance.residual;
    Eigen::VectorXd x(1);
    x << std::log(ratio);
    const double h = 1e-4;
    Eigen::VectorXd up = x, dn = x;
    up(0) += h;
    dn(0) -= h;
    const double g = (lmm_reml_deviance(d, s, up) - lmm_reml_deviance(d, s, dn)) / (2 * h);
    CHECK(std::abs(g) < 1e-4);
  }
  // small enough for the dense n x n oracle
  std::mt19937_64 rng(24);
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 8, .periods = 4, .min_size = 3, .max_size = 6});
  const FittedModel f = fit_lmm(d, spec_of("W5", {"x1", "x2"}));
  const double ta = f.variance.cluster / f.variance.residual, tg = f.variance.cluster_period / f.variance.residual;
  const DenseReml ref = dense_reml(d, fixtures::w1_design(d, {0, 1}), ta, tg);
  CHECK((f.beta - ref.beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("pinned variances reproduce GLS at those ratios") {
  std::mt19937_64 rng(25);
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 7, .periods = 4});
  FitOptions o;
  o.fixed_variance = Eigen::Vector2d(0.5, 0.2);
  const FittedModel f = fit_lmm(d, spec_of("W5", {"x1"}), o);
  const DenseReml ref = dense_reml(d, fixtures::w1_design(d, {0}), 0.5, 0.2);
  CHECK((f.beta - ref.beta).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("GLMM with variance pinned at zero matches independence GEE") {
  std::mt19937_64 rng(26);
  for (int rep = 0; rep < 5; ++rep) {
    const TrialDataset d =
        fixtures::random_trial(rng, {.clusters = 10, .periods = 4, .binary = true, .min_size = 8, .max_size = 15});
    const FittedModel gee = fit_gee_independence(d, spec_of("W7", {"x1", "x2"}));
    FitOptions o;
    o.fixed_variance = Eigen::VectorXd::Zero(1);
    const FittedModel glmm = fit_glmm_laplace(d, spec_of("W9", {"x1", "x2"}), o);
    CHECK((glmm.beta - gee.beta).cwiseAbs().maxCoeff() < 1e-4);
    o.fixed_variance = Eigen::VectorXd::Zero(2);
    const FittedModel glmm2 = fit_glmm_laplace(d, spec_of("W11", {"x1", "x2"}), o);
    CHECK((glmm2.beta - gee.beta).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("period-specific coefficient estimator averages with period weights") {
  std::mt19937_64 rng(27);
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 10, .periods = 5});
  const FittedModel f = fit_gee_independence(d, spec_of("W2", {"x1"}));
  for (Estimand e : kAllEstimands) {
    const WeightScheme w = resolve_weights(d, e);
    double num = 0.0, den = 0.0;
    for (int j = 2; j <= 4; ++j) {
      num += w.period(j - 1) * f.beta(f.treatment_column(j));
      den += w.period(j - 1);
    }
    CHECK(coef_estimate(f, w) == doctest::Approx(num / den).epsilon(1e-13));
    CHECK(coef_model_se(f, w) > 0.0);
  }
}

TEST_CASE("invalid specifications are rejected") {
  WorkingModelSpec s;
  s.estimator = ModelEstimator::LmmReml;
  CHECK_THROWS_AS(s.validate(), Error);
  s.random_effects = RandomEffects::Cluster;
  s.family = Family::Binomial;
  CHECK_THROWS_AS(s.validate(), Error);
  WorkingModelSpec g;
  g.random_effects = RandomEffects::Cluster;
  CHECK_THROWS_AS(g.validate(), Error);
  std::mt19937_64 rng(28);
  const TrialDataset d = fixtures::random_trial(rng, {});
  CHECK_THROWS_AS(fit_gee_independence(d, spec_of("W1", {"nope"})), Error);
  try {
    fit_gee_independence(d, spec_of("W1", {"x1", "x1"}));
    FAIL("collinear design accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RankDeficientDesign);
  }
}
