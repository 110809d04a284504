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

// Acceptance checks. Each criterion prints one PASS/FAIL line followed by
// indented detail lines; the exit status is nonzero if any selected
// criterion fails.
//
//   acceptance              all criteria
//   acceptance --criterion 3

#include "swmrs/config.hpp"
#include "swmrs/error.hpp"
#include "swmrs/inference.hpp"
#include "swmrs/simulation.hpp"
#include "swmrs/working_models.hpp"

#include "fixtures.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace swmrs;

namespace {

int g_threads = 1;

struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;

  void check(bool ok, const std::string& what) {
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    pass = pass && ok;
  }
  void note(const std::string& what) { lines.push_back("     " + what); }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const std::vector<std::string> kSimCovariates{"x1", "x2", std::string(kCellSizeToken)};

std::vector<MethodSpec> methods_of(const std::vector<std::string>& tokens, const std::vector<std::string>& covs) {
  std::vector<MethodSpec> out;
  for (const auto& t : tokens) out.push_back(parse_method(t, covs));
  return out;
}

std::string key(Estimand e, const std::string& m) { return std::string(to_string(e)) + " " + m; }

void runtime_check(Outcome& o, double seconds, double limit) {
  o.check(seconds < limit, "runtime " + fmt("%.1f", seconds) + " s < " + fmt("%.0f", limit) + " s");
}

// 1. covariate-free working models give the unadjusted estimator
Outcome criterion1() {
  Outcome o;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int cases = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const int J = std::uniform_int_distribution<int>(3, 6)(rng);
    // every rollout period needs both arms, so I >= J
    const int I = std::uniform_int_distribution<int>(std::max(4, J), 12)(rng);
    const TrialDataset d = fixtures::random_trial(rng, {.clusters = I, .periods = J});
    const auto est = estimate_points(d, methods_of({"unadj", "mrs:W1", "mrs:W2", "mrs:W3", "mrs:W4", "mrs:W5", "mrs:W6"}, {}),
                                     ContrastScale::standard(Scale::Difference));
    for (std::size_t e = 0; e < 4; ++e) {
      const double u1 = fixtures::unadjusted_mu(d, kAllEstimands[e], 1);
      const double u0 = fixtures::unadjusted_mu(d, kAllEstimands[e], 0);
      for (const auto& m : est) {
        worst = std::max({worst, std::abs(m[e].mu1 - u1), std::abs(m[e].mu0 - u0)});
        ++cases;
      }
    }
  }
  o.check(worst <= 1e-12, "max |MRS - unadjusted| = " + fmt("%.2e", worst) + " <= 1e-12 over " +
                              std::to_string(cases) + " (trial, method, estimand) cases, both arms");
  return o;
}

// 2. MRS on the ANCOVA-I fit equals the ANCOVA WLS estimator
Outcome criterion2() {
  Outcome o;
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int J = std::uniform_int_distribution<int>(3, 6)(rng);
    const int I = std::uniform_int_distribution<int>(std::max(6, J), 16)(rng);
    const TrialDataset d = fixtures::random_trial(rng, {.clusters = I, .periods = J, .min_size = 2, .max_size = 10});
    MethodSpec mrs = parse_method("ancova1", {"x1", "x2"});
    mrs.kind = MethodKind::Mrs;
    mrs.label = "mrs:ancova1";
    const auto est = estimate_points(d, {mrs, parse_method("ancova1", {"x1", "x2"})},
                                     ContrastScale::standard(Scale::Difference));
    for (std::size_t e = 0; e < 4; ++e) worst = std::max(worst, std::abs(est[0][e].tau - est[1][e].tau));
  }
  o.check(worst <= 1e-8, "max |MRS(ANCOVA-I) - ANCOVA| = " + fmt("%.2e", worst) + " <= 1e-8 over 20 trials x 4 estimands");
  return o;
}

MetricsTable monte_carlo(ScenarioId s, const std::vector<std::string>& tokens, bool point_only, int clusters = 30) {
  ScenarioConfig c;
  c.scenario = s;
  c.clusters = clusters;
  c.replicates = 200;
  c.super_population = 100000;
  MonteCarloOptions mo;
  mo.scale = c.default_scale();
  mo.threads = g_threads;
  mo.point_only = point_only;
  return run_monte_carlo(c, methods_of(tokens, kSimCovariates), mo);
}

void completion_check(Outcome& o, const MetricsTable& t) {
  int worst = 200;
  for (const auto& r : t.rows) worst = std::min(worst, r.completed);
  o.check(worst == 200, "every method completed " + std::to_string(worst) + "/200 replicates");
}

// 3. Scenario C1: MRS under W1-W6
Outcome criterion3() {
  Outcome o;
  const std::vector<std::string> m{"mrs:W1", "mrs:W2", "mrs:W3", "mrs:W4", "mrs:W5", "mrs:W6"};
  const MetricsTable t = monte_carlo(ScenarioId::C1, m, false);
  completion_check(o, t);
  for (const auto& r : t.rows) {
    o.check(r.rbias < 1.5, key(r.estimand, r.method) + " RBias " + fmt("%.3f", r.rbias) + "% < 1.5%");
    o.check(r.cp >= 0.90 && r.cp <= 0.99, key(r.estimand, r.method) + " CP " + fmt("%.3f", r.cp) + " in [0.90, 0.99]");
  }
  return o;
}

// 4. Scenario C3: MRS stays unbiased where the coefficient estimator does not
Outcome criterion4() {
  Outcome o;
  const MetricsTable t = monte_carlo(ScenarioId::C3, {"mrs:W1", "coef:W1", "mrs:W6", "coef:W6"}, true);
  completion_check(o, t);
  auto rb = [&](Estimand e, const char* m) { return t.row(e, m).rbias; };
  const double a = rb(Estimand::VCATE, "mrs:W1"), b = rb(Estimand::VCATE, "coef:W1");
  const double c = rb(Estimand::HIATE, "mrs:W6"), d = rb(Estimand::HIATE, "coef:W6");
  o.check(a < 3.0, "v-cate mrs:W1 RBias " + fmt("%.3f", a) + "% < 3%");
  o.check(b > 15.0, "v-cate coef:W1 RBias " + fmt("%.3f", b) + "% > 15%");
  o.check(c < 4.0, "h-iate mrs:W6 RBias " + fmt("%.3f", c) + "% < 4%");
  o.check(d > 15.0, "h-iate coef:W6 RBias " + fmt("%.3f", d) + "% > 15%");
  return o;
}

// 5. Scenario B3 on the log odds ratio scale
Outcome criterion5() {
  Outcome o;
  const MetricsTable t = monte_carlo(ScenarioId::B3, {"mrs:W7", "coef:W9"}, false);
  completion_check(o, t);
  const MetricsRow& a = t.row(Estimand::HIATE, "mrs:W7");
  const MetricsRow& b = t.row(Estimand::VCATE, "coef:W9");
  o.check(a.rbias < 5.0, "h-iate mrs:W7 RBias " + fmt("%.3f", a.rbias) + "% < 5%");
  o.check(a.cp >= 0.89 && a.cp <= 0.99, "h-iate mrs:W7 CP " + fmt("%.3f", a.cp) + " in [0.89, 0.99]");
  o.check(b.cp < 0.5, "v-cate coef:W9 CP " + fmt("%.3f", b.cp) + " < 0.5");
  return o;
}

// 6. jackknife against a brute-force leave-one-cluster-out
Outcome criterion6() {
  Outcome o;
  std::mt19937_64 rng(606);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int J = std::uniform_int_distribution<int>(3, 6)(rng);
    const int I = std::uniform_int_distribution<int>(2 * (J - 1), 14)(rng);
    const TrialDataset d = fixtures::random_trial(rng, {.clusters = I, .periods = J});
    const Analysis a = analyze(d, methods_of({"unadj", "mrs:W1"}, {"x1", "x2"}),
                               ContrastScale::standard(Scale::Difference));
    for (std::size_t e = 0; e < 4; ++e) {
      std::vector<double> un, mr;
      for (int g = 0; g < I; ++g) {
        const TrialDataset s = fixtures::drop_cluster(d, g);
        const Estimand es = kAllEstimands[e];
        un.push_back(fixtures::unadjusted_mu(s, es, 1) - fixtures::unadjusted_mu(s, es, 0));
        mr.push_back(fixtures::mrs_w1_mu(s, {0, 1}, es, 1) - fixtures::mrs_w1_mu(s, {0, 1}, es, 0));
      }
      const double su = a.methods[0].results[e].se, sm = a.methods[1].results[e].se;
      worst = std::max({worst, std::abs(su * su - fixtures::brute_jackknife_variance(un)),
                        std::abs(sm * sm - fixtures::brute_jackknife_variance(mr))});
    }
  }
  o.check(worst <= 1e-10, "max |jackknife variance - brute force| = " + fmt("%.2e", worst) +
                              " <= 1e-10 over 20 trials x 4 estimands x {unadj, mrs:W1}");
  return o;
}

// 7. informative-size tests: size under delta = 0, power under delta = 1.5
Outcome criterion7() {
  Outcome o;
  ScenarioConfig c;
  c.scenario = ScenarioId::C1;
  c.replicates = 500;
  const auto m = methods_of({"mrs:W1", "mrs:W3"}, kSimCovariates);
  const ContrastScale rd = ContrastScale::standard(Scale::Difference);
  c.delta = 0.0;
  for (const auto& r : run_ics_monte_carlo(c, m, {IcsTest::Global}, 0.05, rd, g_threads)) {
    o.check(r.completed == 500, r.method + " delta=0 completed " + std::to_string(r.completed) + "/500");
    o.check(r.rate() >= 0.02 && r.rate() <= 0.09,
            r.method + " global test size " + fmt("%.3f", r.rate()) + " in [0.02, 0.09]");
  }
  c.delta = 1.5;
  for (const auto& r : run_ics_monte_carlo(c, m, {IcsTest::VPair}, 0.05, rd, g_threads)) {
    o.check(r.completed == 500, r.method + " delta=1.5 completed " + std::to_string(r.completed) + "/500");
    o.check(r.rate() > 0.8, r.method + " vertical test power " + fmt("%.3f", r.rate()) + " > 0.8");
  }
  return o;
}

// 8. fitting engines
Outcome criterion8() {
  Outcome o;
  double worst_g = 0.0;
  ScenarioConfig c;
  for (int k = 0; k < 20; ++k) {
    c.scenario = k % 2 == 0 ? ScenarioId::C1 : ScenarioId::C2;
    const TrialDataset d = generate_trial(c, static_cast<std::uint64_t>(100 + k));
    const WorkingModelSpec s = working_model_preset(k % 4 < 2 ? "W3" : "W5", kSimCovariates);
    const FittedModel f = fit_lmm(d, s);
    Eigen::VectorXd x(s.random_effects == RandomEffects::Cluster ? 1 : 2);
    // boundary fits sit at the clamp, where the deviance is flat
    x(0) = std::log(std::max(f.variance.cluster / f.variance.residual, std::exp(-25.0)));
    if (x.size() == 2) x(1) = std::log(std::max(f.variance.cluster_period / f.variance.residual, std::exp(-25.0)));
    for (Eigen::Index t = 0; t < x.size(); ++t) {
      const double h = 1e-4 * std::max(1.0, std::abs(x(t)));
      Eigen::VectorXd up = x, dn = x;
      up(t) += h;
      dn(t) -= h;
      worst_g = std::max(worst_g, std::abs(lmm_reml_deviance(d, s, up) - lmm_reml_deviance(d, s, dn)) / (2 * h));
    }
  }
  o.check(worst_g < 1e-4, "REML max |central-difference gradient| " + fmt("%.2e", worst_g) + " < 1e-4 over 20 fits");

  std::mt19937_64 rng(808);
  double worst_ols = 0.0, worst_glmm = 0.0;
  for (int k = 0; k < 20; ++k) {
    const TrialDataset d = fixtures::random_trial(rng, {.clusters = 8 + k % 5, .periods = 3 + k % 4});
    const FittedModel f = fit_gee_independence(d, working_model_preset("W1", {"x1", "x2"}));
    worst_ols = std::max(worst_ols, (f.beta - fixtures::ols(fixtures::w1_design(d, {0, 1}), d.outcome()))
                                        .cwiseAbs()
                                        .maxCoeff());
  }
  o.check(worst_ols <= 1e-10, "GEE gaussian-identity vs closed-form OLS " + fmt("%.2e", worst_ols) + " <= 1e-10");
  for (int k = 0; k < 10; ++k) {
    const TrialDataset d = fixtures::random_trial(
        rng, {.clusters = 10 + k % 4, .periods = 3 + k % 3, .binary = true, .min_size = 8, .max_size = 15});
    const FittedModel gee = fit_gee_independence(d, working_model_preset("W7", {"x1", "x2"}));
    FitOptions opt;
    opt.fixed_variance = Eigen::VectorXd::Zero(k % 2 == 0 ? 1 : 2);
    const FittedModel glmm = fit_glmm_laplace(d, working_model_preset(k % 2 == 0 ? "W9" : "W11", {"x1", "x2"}), opt);
    worst_glmm = std::max(worst_glmm, (glmm.beta - gee.beta).cwiseAbs().maxCoeff());
  }
  o.check(worst_glmm <= 1e-4, "GLMM (variance pinned at 0) vs independence GEE " + fmt("%.2e", worst_glmm) + " <= 1e-4");
  return o;
}

// 9. bias shrinks with the number of clusters under C2. Absolute bias of a
// method is |mean - truth| averaged over the four estimands.
Outcome criterion9() {
  Outcome o;
  const std::vector<std::string> m{"unadj", "mrs:W1"};
  const MetricsTable small = monte_carlo(ScenarioId::C2, m, true, 30);
  const MetricsTable large = monte_carlo(ScenarioId::C2, m, true, 300);
  for (const auto& name : m) {
    double ba = 0.0, bb = 0.0;
    for (Estimand e : kAllEstimands) {
      const MetricsRow& a = small.row(e, name);
      const MetricsRow& b = large.row(e, name);
      const double ea = std::abs(a.mean - a.truth), eb = std::abs(b.mean - b.truth);
      o.note(key(e, name) + " |bias| I=30 " + fmt("%.4f", ea) + ", I=300 " + fmt("%.4f", eb));
      ba += ea / 4.0;
      bb += eb / 4.0;
    }
    o.check(bb * 2.0 <= ba, name + " mean |bias| I=30 " + fmt("%.4f", ba) + " -> I=300 " + fmt("%.4f", bb) +
                                " (needs a factor >= 2)");
  }
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double limit_s;  // runtime limit; 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swmrs acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "Run one criterion (1-9)");
  app.add_option("--threads", g_threads, "Worker threads (default: all cores)");
  g_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {1, "covariate-free MRS equals the unadjusted estimator", 10, criterion1},
      {2, "MRS on an ANCOVA-I fit equals ANCOVA", 30, criterion2},
      {3, "scenario C1: MRS W1-W6 bias and coverage", 1200, criterion3},
      {4, "scenario C3: MRS vs coefficient bias", 1500, criterion4},
      {5, "scenario B3: MRS W7 and the GLMM coefficient failure", 1800, criterion5},
      {6, "jackknife equals brute-force LOCO", 0, criterion6},
      {7, "informative cluster size test size and power", 2400, criterion7},
      {8, "REML, GEE and GLMM fitting checks", 0, criterion8},
      {9, "C2 bias shrinks from I=30 to I=300", 0, criterion9},
  };
  bool ok = true;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o.check(false, std::string("threw: ") + ex.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0) runtime_check(o, secs, c.limit_s);
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.title << " ("
              << fmt("%.1f", secs) << " s)\n";
    for (const auto& l : o.lines) std::cout << "    " << l << "\n";
    std::cout.flush();
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
