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
#include "swmrs/inference.hpp"
#include "swmrs/standardization.hpp"

#include "fixtures.hpp"

#include <doctest.h>

using namespace swmrs;

namespace {

MethodSpec method(const char* token, std::vector<std::string> covs = {}) { return parse_method(token, covs); }

}  // namespace

TEST_CASE("covariate-free working models reduce MRS to the unadjusted estimator") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const TrialDataset d = fixtures::random_trial(rng, {.clusters = 5 + rep, .periods = 3 + rep % 4});
    const auto est = estimate_points(d, {method("unadj"), method("mrs:W1"), method("mrs:W2"), method("mrs:W3")},
                                     ContrastScale::standard(Scale::Difference));
    for (std::size_t e = 0; e < 4; ++e) {
      const double u1 = fixtures::unadjusted_mu(d, kAllEstimands[e], 1);
      const double u0 = fixtures::unadjusted_mu(d, kAllEstimands[e], 0);
      for (std::size_t m = 0; m < est.size(); ++m) {
        CHECK(std::abs(est[m][e].mu1 - u1) < 1e-12);
        CHECK(std::abs(est[m][e].mu0 - u0) < 1e-12);
      }
    }
  }
}

TEST_CASE("MRS with a covariate GEE matches the dense oracle") {
  std::mt19937_64 rng(32);
  for (int rep = 0; rep < 5; ++rep) {
    const TrialDataset d = fixtures::random_trial(rng, {.clusters = 8 + rep, .periods = 4 + rep % 3});
    const auto est = estimate_points(d, {method("mrs:W1", {"x1", "x2"})}, ContrastScale::standard(Scale::Difference));
    for (std::size_t e = 0; e < 4; ++e) {
      CHECK(est[0][e].mu1 == doctest::Approx(fixtures::mrs_w1_mu(d, {0, 1}, kAllEstimands[e], 1)).epsilon(1e-11));
      CHECK(est[0][e].mu0 == doctest::Approx(fixtures::mrs_w1_mu(d, {0, 1}, kAllEstimands[e], 0)).epsilon(1e-11));
    }
  }
}

TEST_CASE("per-period decomposition: total is unadjusted plus augmentation") {
  std::mt19937_64 rng(33);
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 10, .periods = 5});
  const FittedModel f = fit_gee_independence(d, working_model_preset("W1", {"x1"}));
  const WeightScheme w = resolve_weights(d, Estimand::VCATE);
  const PeriodAugmentedEstimate p = mrs_mu_period(d, w, predict_m(f, d, 1, 3), 1, 3);
  CHECK(p.total == doctest::Approx(p.unadjusted + p.augmentation).epsilon(1e-13));
  CHECK(p.unadjusted == doctest::Approx(unadjusted_mu_period(d, w, 1, 3)).epsilon(1e-13));
}

TEST_CASE("MRS on an ANCOVA-I fit equals the ANCOVA estimator") {
  std::mt19937_64 rng(34);
  for (int rep = 0; rep < 5; ++rep) {
    const TrialDataset d = fixtures::random_trial(rng, {.clusters = 8 + rep, .periods = 4 + rep % 3});
    MethodSpec mrs = method("ancova1", {"x1", "x2"});
    mrs.kind = MethodKind::Mrs;
    mrs.label = "mrs:ancova1";
    const auto est = estimate_points(d, {mrs, method("ancova1", {"x1", "x2"})},
                                     ContrastScale::standard(Scale::Difference));
    for (std::size_t e = 0; e < 4; ++e) CHECK(std::abs(est[0][e].tau - est[1][e].tau) < 1e-8);
  }
}

TEST_CASE("coefficient estimators need a matching link") {
  std::mt19937_64 rng(35);
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 10, .periods = 4, .binary = true});
  CHECK_THROWS_AS(estimate_points(d, {method("coef:W1")}, ContrastScale::standard(Scale::OddsRatio)), Error);
  CHECK_NOTHROW(estimate_points(d, {method("coef:W7")}, ContrastScale::standard(Scale::OddsRatio)));
}

TEST_CASE("unknown methods are rejected") {
  CHECK_THROWS_AS(method("mrs:W13"), Error);
  CHECK_THROWS_AS(method("gee"), Error);
  CHECK(method("coef:W6").model.random_effects == RandomEffects::ClusterPlusClusterPeriod);
  CHECK(method("mrs:W9").model.estimator == ModelEstimator::GlmmLaplace);
  CHECK_FALSE(method("ancova1").model.ancova_interactions);
}
