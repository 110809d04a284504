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

// swmrs: command-line front end.
//
//   swmrs analyze   --input trial.csv --methods unadj,mrs:W3 --out-json report.json
//   swmrs ics-test  --input trial.csv --methods mrs:W1 --tests h,v,global
//   swmrs simulate  --scenario C3 --reps 200 --methods mrs:W1,coef:W1,unadj --out metrics.csv
//   swmrs validate  --input trial.csv
//
// Settings come from CLI flags, then --config (JSON), then defaults.
// Exit codes: 0 ok, 1 unexpected failure, 2 invalid input, 3 nonconvergence.

#include "swmrs/commands.hpp"
#include "swmrs/config.hpp"
#include "swmrs/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Flags {
  std::string config_path;
  bool json = false;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_json, out_csv, out_long, out_reps;

  std::optional<std::string> input, cluster_col, period_col, treatment_col, outcome_col;
  std::optional<std::vector<std::string>> covariates;
  std::optional<std::vector<std::string>> estimands, methods, model_covariates, tests;
  std::optional<std::string> scale, loco_policy;
  bool no_log = false;
  bool no_covariates = false;

  std::optional<std::string> scenario;
  std::optional<int> clusters, periods, reps, super_pop;
  std::optional<double> delta;
  bool point_only = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "JSON config file (CLI flags take precedence)");
  sub->add_flag("--json", f.json, "Print the machine-readable report on stdout");
  sub->add_option("--threads", f.threads, "Worker threads (default: SWMRS_THREADS or all cores)");
  sub->add_option("--seed", f.seed, "Seed for stochastic steps");
  sub->add_option("--out-json", f.out_json, "Write the JSON report here");
}

void add_data(CLI::App* sub, Flags& f) {
  sub->add_option("-i,--input", f.input, "Individual-level trial CSV");
  sub->add_option("--cluster-col", f.cluster_col, "Cluster column (default: cluster)");
  sub->add_option("--period-col", f.period_col, "Period column (default: period)");
  sub->add_option("--treatment-col", f.treatment_col, "Treatment column (default: treatment)");
  sub->add_option("--outcome-col", f.outcome_col, "Outcome column (default: outcome)");
  sub->add_option("--covariates", f.covariates, "Covariate columns to read (default: all remaining)")
      ->delimiter(',');
}

void add_estimation(CLI::App* sub, Flags& f) {
  sub->add_option("--methods", f.methods, "unadj, mrs:W1..W12, coef:W1..W12, ancova, ancova1")->delimiter(',');
  sub->add_option("--estimands", f.estimands, "h-iate,h-cate,v-iate,v-cate")->delimiter(',');
  sub->add_option("--scale", f.scale, "rd, rr or or");
  sub->add_flag("--no-log", f.no_log, "Report ratio scales without the log transform");
  sub->add_option("--model-covariates", f.model_covariates,
                  "Working-model adjustment set (cell_size = cluster-period size)")
      ->delimiter(',');
  sub->add_flag("--no-covariates", f.no_covariates, "Covariate-free working models");
  sub->add_option("--loco-policy", f.loco_policy, "error, drop-period or drop-replicate");
  sub->add_option("--out-csv", f.out_csv, "Write a CSV table here");
}

swmrs::AnalysisConfig resolve(const Flags& f) {
  using namespace swmrs;
  AnalysisConfig c;
  if (!f.config_path.empty()) c = load_config_file(f.config_path, c);
  if (f.threads) c.threads = *f.threads;
  if (f.seed) c.seed = *f.seed;
  if (f.out_json) c.output_json = *f.out_json;
  if (f.out_csv) c.output_csv = *f.out_csv;
  if (f.out_long) c.output_long_csv = *f.out_long;
  if (f.out_reps) c.output_replicates = *f.out_reps;
  if (f.input) c.input = *f.input;
  if (f.cluster_col) c.schema.cluster = *f.cluster_col;
  if (f.period_col) c.schema.period = *f.period_col;
  if (f.treatment_col) c.schema.treatment = *f.treatment_col;
  if (f.outcome_col) c.schema.outcome = *f.outcome_col;
  if (f.covariates) c.schema.covariates = *f.covariates;
  if (f.estimands) {
    c.estimands.clear();
    for (const auto& s : *f.estimands) c.estimands.push_back(parse_estimand(s));
  }
  if (f.methods) c.methods = *f.methods;
  if (f.scale) c.scale = parse_scale(*f.scale);
  if (f.no_log) c.log_report = false;
  if (f.model_covariates) c.model_covariates = *f.model_covariates;
  if (f.no_covariates) c.model_covariates = std::vector<std::string>{};
  if (f.loco_policy) c.loco_policy = parse_loco_policy(*f.loco_policy);
  if (f.tests) {
    c.tests.clear();
    for (const auto& s : *f.tests) c.tests.push_back(parse_ics_test(s));
  }
  if (f.scenario) c.scenario = parse_scenario(*f.scenario);
  if (f.clusters) c.clusters = *f.clusters;
  if (f.periods) c.periods = *f.periods;
  if (f.reps) c.replicates = *f.reps;
  if (f.delta) c.delta = *f.delta;
  if (f.super_pop) c.super_population = *f.super_pop;
  if (f.point_only) c.point_only = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-robust standardization for stepped-wedge cluster-randomized trials"};
  app.require_subcommand(1);
  Flags f;

  auto* analyze = app.add_subcommand("analyze", "Estimate the four estimands with jackknife inference");
  add_common(analyze, f);
  add_data(analyze, f);
  add_estimation(analyze, f);

  auto* ics = app.add_subcommand("ics-test", "Informative cluster size tests");
  add_common(ics, f);
  add_data(ics, f);
  add_estimation(ics, f);
  ics->add_option("--tests", f.tests, "h, v, global")->delimiter(',');

  auto* sim = app.add_subcommand("simulate", "Monte Carlo evaluation under a simulation scenario");
  add_common(sim, f);
  sim->add_option("--scenario", f.scenario, "C1, C2, C3, B1, B2 or B3");
  sim->add_option("--clusters", f.clusters, "Clusters per trial (default 30)");
  sim->add_option("--periods", f.periods, "Periods (default 6 continuous, 4 binary)");
  sim->add_option("--reps", f.reps, "Monte Carlo replicates (default 200)");
  sim->add_option("--delta", f.delta, "Informative-size dial (C1, B1)");
  sim->add_option("--super-pop", f.super_pop, "Super-population size for the truth (default 1e5)");
  sim->add_option("--methods", f.methods, "unadj, mrs:W#, coef:W#, ancova, ancova1")->delimiter(',');
  sim->add_option("--scale", f.scale, "rd, rr or or");
  sim->add_flag("--no-log", f.no_log, "Report ratio scales without the log transform");
  sim->add_option("--model-covariates", f.model_covariates, "Working-model adjustment set")->delimiter(',');
  sim->add_option("--loco-policy", f.loco_policy, "error, drop-period or drop-replicate");
  sim->add_flag("--point-only", f.point_only, "Skip the jackknife");
  sim->add_option("--out", f.out_csv, "Metrics CSV (one row per estimand and method)");
  sim->add_option("--long-out", f.out_long, "Plot-ready long-format metrics CSV");
  sim->add_option("--replicates-out", f.out_reps, "Per-replicate estimates CSV");

  auto* validate = app.add_subcommand("validate", "Check a trial file and describe its design");
  add_common(validate, f);
  add_data(validate, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : swmrs::kExitValidation;
  }

  swmrs::AnalysisConfig config;
  try {
    config = resolve(f);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    if (f.json) std::cout << swmrs::error_json(ex).dump(2) << "\n";
    return swmrs::exit_code_for(ex);
  }

  if (analyze->parsed()) return swmrs::cmd_analyze(config, std::cout, std::cerr, f.json);
  if (ics->parsed()) return swmrs::cmd_ics_test(config, std::cout, std::cerr, f.json);
  if (sim->parsed()) return swmrs::cmd_simulate(config, std::cout, std::cerr, f.json);
  return swmrs::cmd_validate(config, std::cout, std::cerr, f.json);
}
