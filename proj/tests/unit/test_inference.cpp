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
#include "swmrs/distributions.hpp"
#include "swmrs/error.hpp"
#include "swmrs/inference.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace swmrs;

TEST_CASE("t and F reference values") {
  CHECK(t_quantile(0.975, 29) == doctest::Approx(2.045229642132703).epsilon(1e-10));
  CHECK(t_quantile(0.975, 24) == doctest::Approx(2.0638985616280205).epsilon(1e-10));
  CHECK(t_two_sided_p(2.0, 24) == doctest::Approx(0.056939849936591666).epsilon(1e-10));
  CHECK(t_cdf(-1.3, 7) == doctest::Approx(0.11738391769618858).epsilon(1e-10));
  CHECK(f_upper_tail(3.0, 3, 29) == doctest::Approx(0.0466647645163283).epsilon(1e-10));
  CHECK(f_upper_tail(0.5, 3, 99) == doctest::Approx(0.6831412046712426).epsilon(1e-10));
  CHECK(incomplete_beta(2.5, 4.0, 0.3) == doctest::Approx(0.3521975859067672).epsilon(1e-10));
}

TEST_CASE("jackknife replicates and variance match a brute-force LOCO") {
  std::mt19937_64 rng(41);
  const std::vector<std::string> covs{"x1", "x2"};
  for (int rep = 0; rep < 4; ++rep) {
    const int J = 3 + rep % 3;
    const TrialDataset d = fixtures::random_trial(rng, {.clusters = 2 * (J - 1) + rep, .periods = J});
    const Analysis a = analyze(d, {parse_method("unadj", covs), parse_method("mrs:W1", covs)},
                               ContrastScale::standard(Scale::Difference));
    for (std::size_t e = 0; e < 4; ++e) {
      std::vector<double> un, mr;
      for (int g = 0; g < d.num_clusters(); ++g) {
        const TrialDataset s = fixtures::drop_cluster(d, g);
        const Estimand es = kAllEstimands[e];
        un.push_back(fixtures::unadjusted_mu(s, es, 1) - fixtures::unadjusted_mu(s, es, 0));
        mr.push_back(fixtures::mrs_w1_mu(s, {0, 1}, es, 1) - fixtures::mrs_w1_mu(s, {0, 1}, es, 0));
      }
      const auto& ru = a.methods[0].results[e];
      const auto& rm = a.methods[1].results[e];
      CHECK(std::abs(ru.se * ru.se - fixtures::brute_jackknife_variance(un)) < 1e-10);
      CHECK(std::abs(rm.se * rm.se - fixtures::brute_jackknife_variance(mr)) < 1e-10);
      CHECK(ru.df == d.num_clusters() - 1);
      const double t = t_quantile(0.975, ru.df);
      CHECK(ru.ci_lower == doctest::Approx(ru.estimate - t * ru.se).epsilon(1e-12));
    }
  }
}

TEST_CASE("jackknife helpers") {
  Eigen::VectorXd r(4);
  r << 1.0, 2.0, 4.0, 7.0;
  CHECK(jackknife_variance(r) == doctest::Approx(fixtures::brute_jackknife_variance({1, 2, 4, 7})));
  Eigen::MatrixXd m(4, 2);
  m.col(0) = r;
  m.col(1) = 2.0 * r;
  const Eigen::MatrixXd c = jackknife_covariance(m);
  CHECK(c(0, 1) == doctest::Approx(2.0 * jackknife_variance(r)));
  CHECK(c(1, 1) == doctest::Approx(4.0 * jackknife_variance(r)));
}

TEST_CASE("log scales transform the interval") {
  std::mt19937_64 rng(42);
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 12, .periods = 4, .binary = true, .min_size = 5,
                                                      .max_size = 10});
  const Analysis a = analyze(d, {parse_method("unadj", {})}, ContrastScale::standard(Scale::OddsRatio));
  for (const auto& r : a.methods[0].results) {
    CHECK(r.psi_estimate == doctest::Approx(std::log(r.estimate)));
    CHECK(r.ci_lower < r.estimate);
    CHECK(r.ci_upper > r.estimate);
    CHECK(std::log(r.ci_lower) + std::log(r.ci_upper) == doctest::Approx(2.0 * r.psi_estimate));
  }
}

TEST_CASE("degenerate leave-one-out samples follow the policy") {
  std::mt19937_64 rng(43);
  // one cluster per adoption time: dropping the first adopter empties an arm
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 4, .periods = 5});
  const std::vector<MethodSpec> m{parse_method("unadj", {})};
  const ContrastScale rd = ContrastScale::standard(Scale::Difference);
  try {
    analyze(d, m, rd);
    FAIL("degenerate jackknife accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LocoDegenerate);
  }
  JackknifeOptions drop;
  drop.policy = LocoPolicy::DropReplicate;
  const Analysis a = analyze(d, m, rd, drop);
  CHECK(a.methods[0].reps.left_out.size() == 2);
  drop.policy = LocoPolicy::DropPeriod;
  const Analysis b = analyze(d, m, rd, drop);
  CHECK(b.methods[0].reps.left_out.size() == 4);
  int with_drops = 0;
  for (const auto& dp : b.methods[0].reps.dropped) with_drops += dp.empty() ? 0 : 1;
  CHECK(with_drops == 2);
}

TEST_CASE("global test statistic matches the dense quadratic form") {
  Eigen::Vector4d psi(1.0, 1.4, 0.8, 1.9);
  Eigen::Matrix4d a = Eigen::Matrix4d::Random();
  const Eigen::Matrix4d v = 0.1 * (a * a.transpose() + Eigen::Matrix4d::Identity());
  const IcsTestResult r = global_ics_statistic(psi, v, 29.0);
  Eigen::Matrix<double, 3, 4> c;
  c << 1, -1, 0, 0, 0, 0, 1, -1, 1, 0, -1, 0;
  const Eigen::Vector3d d = c * psi;
  const double f = d.dot((c * v * c.transpose()).inverse() * d) / 3.0;
  CHECK(r.statistic == doctest::Approx(f).epsilon(1e-12));
  CHECK(r.df1 == 3.0);
  CHECK(r.p_value == doctest::Approx(f_upper_tail(f, 3.0, 29.0)).epsilon(1e-12));
  CHECK((ics_contrast_matrix() - c).norm() == 0.0);
  CHECK_THROWS_AS(global_ics_statistic(psi, Eigen::Matrix4d::Ones(), 29.0), Error);
}

TEST_CASE("pairwise tests use the jackknifed difference") {
  std::mt19937_64 rng(44);
  const TrialDataset d = fixtures::random_trial(rng, {.clusters = 12, .periods = 4});
  const Analysis a = analyze(d, {parse_method("mrs:W1", {"x1"})}, ContrastScale::standard(Scale::Difference));
  const MethodAnalysis& m = a.methods[0];
  const IcsTestResult h = ics_test(m, IcsTest::HPair);
  const Eigen::VectorXd diff = m.reps.psi.col(0) - m.reps.psi.col(1);
  const double vd = jackknife_variance(diff);
  const double t = (m.full[0].psi - m.full[1].psi) / std::sqrt(vd);
  CHECK(h.statistic == doctest::Approx(t).epsilon(1e-12));
  CHECK(h.df2 == 11.0);
  CHECK(h.p_value == doctest::Approx(t_two_sided_p(t, 11.0)).epsilon(1e-12));
  const IcsTestResult g = ics_test(m, IcsTest::Global);
  CHECK(g.df2 == 11.0);
  CHECK(g.p_value >= 0.0);
  CHECK(g.p_value <= 1.0);
}
