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

#include "swmrs/commands.hpp"

#include "swmrs/error.hpp"
#include "swmrs/inference.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <ostream>
#include <sstream>

namespace swmrs {

using nlohmann::json;

int exit_code_for(const std::exception& ex) {
  if (const auto* e = dynamic_cast<const Error*>(&ex))
    return is_convergence_error(e->kind()) ? kExitConvergence : kExitValidation;
  return kExitFailure;
}

json error_json(const std::exception& ex) {
  json j;
  j["status"] = "error";
  j["exit_code"] = exit_code_for(ex);
  j["message"] = ex.what();
  if (const auto* e = dynamic_cast<const Error*>(&ex)) {
    j["kind"] = std::string(to_string(e->kind()));
    j["details"] = e->details();
  } else {
    j["kind"] = "Internal";
    j["details"] = json::object();
  }
  return j;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open output file", {{"path", tmp}});
    out << contents;
    if (!out.flush()) throw Error(ErrorKind::Io, "write failed", {{"path", tmp}});
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error(ErrorKind::Io, "cannot move output into place", {{"path", path}});
  }
}

namespace {

struct LoadedData {
  TrialDataset data;
  std::string hash;
};

LoadedData load_input(const AnalysisConfig& c) {
  if (c.input.empty()) throw Error(ErrorKind::InvalidArgument, "no input file given");
  std::ifstream in(c.input, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open input file", {{"path", c.input}});
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream ss(bytes);
  return {parse_trial_csv(ss, c.schema), content_hash(bytes)};
}

std::vector<MethodSpec> resolve_methods(const AnalysisConfig& c, const std::vector<std::string>& covariates) {
  if (c.methods.empty()) throw Error(ErrorKind::InvalidArgument, "no methods selected");
  std::vector<MethodSpec> out;
  for (const auto& m : c.methods) out.push_back(parse_method(m, covariates));
  return out;
}

std::vector<std::string> model_covariates(const AnalysisConfig& c, const TrialDataset& data) {
  return c.model_covariates ? *c.model_covariates : default_model_covariates(data);
}

json fit_json(const FittedModel& f) {
  json j;
  j["estimator"] = std::string(to_string(f.spec.estimator));
  j["family"] = std::string(to_string(f.spec.family));
  j["link"] = std::string(to_string(f.spec.link));
  j["treatment_effect"] = std::string(to_string(f.spec.treatment_effect));
  j["random_effects"] = std::string(to_string(f.spec.random_effects));
  j["covariates"] = f.spec.covariates;
  json coef = json::array();
  for (std::size_t k = 0; k < f.column_names.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    coef.push_back({{"term", f.column_names[k]},
                    {"estimate", f.beta(kk)},
                    {"model_se", kk < f.vcov.rows() ? std::sqrt(std::max(0.0, f.vcov(kk, kk))) : 0.0}});
  }
  j["coefficients"] = coef;
  j["variance_components"] = {{"cluster", f.variance.cluster},
                              {"cluster_period", f.variance.cluster_period},
                              {"residual", f.variance.residual},
                              {"cluster_boundary", f.variance.cluster_boundary},
                              {"cluster_period_boundary", f.variance.cluster_period_boundary}};
  j["convergence"] = {{"converged", f.convergence.converged},
                      {"iterations", f.convergence.iterations},
                      {"objective", f.convergence.objective},
                      {"gradient_norm", f.convergence.gradient_norm}};
  return j;
}

json data_json(const TrialDataset& d, const std::string& hash) {
  return {{"content_hash", hash},
          {"clusters", d.num_clusters()},
          {"periods", d.num_periods()},
          {"rows", d.num_rows()},
          {"covariates", d.covariate_names()}};
}

bool selected(const AnalysisConfig& c, Estimand e) {
  return std::find(c.estimands.begin(), c.estimands.end(), e) != c.estimands.end();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

void print_report_summary(const json& report, std::ostream& err) {
  if (!report.contains("estimates")) return;
  for (const auto& r : report["estimates"]) {
    err << std::left << std::setw(14) << r["method"].get<std::string>() << std::setw(8)
        << r["estimand"].get<std::string>() << " estimate " << std::setw(12) << r["estimate"].dump() << " se "
        << std::setw(12) << r["se"].dump() << " 95% CI [" << r["ci_lower"].dump() << ", " << r["ci_upper"].dump()
        << "]\n";
  }
}

template <class Build>
int run_command(const AnalysisConfig& c, std::ostream& out, std::ostream& err, bool as_json, Build&& build) {
  try {
    json report = build();
    report["status"] = "ok";
    if (!c.output_json.empty()) write_file_atomic(c.output_json, report.dump(2) + "\n");
    if (as_json) out << report.dump(2) << "\n";
    return kExitOk;
  } catch (const std::exception& ex) {
    const json e = error_json(ex);
    err << "error: " << ex.what();
    if (const auto* se = dynamic_cast<const Error*>(&ex)) {
      err << " [" << to_string(se->kind()) << "]";
      for (const auto& [k, v] : se->details()) err << " " << k << "=" << v;
    }
    err << "\n";
    if (as_json) out << e.dump(2) << "\n";
    return e["exit_code"].get<int>();
  }
}

}  // namespace

json analyze_report(const AnalysisConfig& c, std::string* csv) {
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedData in = load_input(c);
  const auto methods = resolve_methods(c, model_covariates(c, in.data));
  JackknifeOptions jo;
  jo.policy = c.loco_policy;
  jo.threads = c.threads;
  const Analysis an = analyze(in.data, methods, c.contrast(), jo);

  json report;
  report["command"] = "analyze";
  report["config"] = to_json(c);
  report["data"] = data_json(in.data, in.hash);
  json rows = json::array();
  std::ostringstream cs;
  cs << "method,estimand,scale,estimate,log_estimate,se,ci_lower,ci_upper,df,se_method\n";
  for (const auto& ma : an.methods) {
    for (const auto& r : ma.results) {
      if (!selected(c, r.estimand)) continue;
      json row = {{"method", ma.method.label},     {"estimand", std::string(to_string(r.estimand))},
                  {"scale", std::string(to_string(r.scale))}, {"estimate", r.estimate},
                  {"reporting_estimate", r.psi_estimate}, {"se", r.se},
                  {"ci_lower", r.ci_lower},       {"ci_upper", r.ci_upper},
                  {"df", r.df},                   {"se_method", r.se_method}};
      if (r.has_sigma)
        row["mu_covariance"] = {{r.sigma(0, 0), r.sigma(0, 1)}, {r.sigma(1, 0), r.sigma(1, 1)}};
      rows.push_back(row);
      cs << ma.method.label << ',' << to_string(r.estimand) << ',' << to_string(r.scale) << ',' << fmt(r.estimate)
         << ',' << fmt(r.psi_estimate) << ',' << fmt(r.se) << ',' << fmt(r.ci_lower) << ',' << fmt(r.ci_upper) << ','
         << r.df << ',' << r.se_method << '\n';
    }
  }
  report["estimates"] = rows;
  json fits = json::array();
  for (const auto& f : an.fits) fits.push_back(fit_json(f));
  report["working_models"] = fits;
  json jk = json::array();
  for (const auto& ma : an.methods) {
    json dropped = json::array();
    for (std::size_t k = 0; k < ma.reps.left_out.size(); ++k)
      if (!ma.reps.dropped[k].empty())
        dropped.push_back({{"cluster", in.data.cluster_labels()[static_cast<std::size_t>(ma.reps.left_out[k])]},
                           {"periods", ma.reps.dropped[k]}});
    jk.push_back({{"method", ma.method.label},
                  {"replicates", ma.reps.left_out.size()},
                  {"dropped_periods", dropped}});
  }
  report["jackknife"] = {{"policy", std::string(to_string(c.loco_policy))}, {"methods", jk}};
  report["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (csv) *csv = cs.str();
  return report;
}

json ics_report(const AnalysisConfig& c) {
  const LoadedData in = load_input(c);
  const auto methods = resolve_methods(c, model_covariates(c, in.data));
  JackknifeOptions jo;
  jo.policy = c.loco_policy;
  jo.threads = c.threads;
  const Analysis an = analyze(in.data, methods, c.contrast(), jo);
  json report;
  report["command"] = "ics-test";
  report["config"] = to_json(c);
  report["data"] = data_json(in.data, in.hash);
  json tests = json::array();
  for (const auto& ma : an.methods) {
    for (IcsTest t : c.tests) {
      const IcsTestResult r = ics_test(ma, t);
      tests.push_back({{"method", ma.method.label},
                       {"test", std::string(to_string(t))},
                       {"statistic", r.statistic},
                       {"df1", r.df1},
                       {"df2", r.df2},
                       {"p_value", r.p_value},
                       {"estimates", {r.psi(0), r.psi(1), r.psi(2), r.psi(3)}}});
    }
  }
  report["tests"] = tests;
  return report;
}

json simulate_report(const AnalysisConfig& c, MetricsTable* out_table) {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig sc = c.scenario_config();
  std::vector<std::string> covs = c.model_covariates ? *c.model_covariates
                                                     : std::vector<std::string>{"x1", "x2", std::string(kCellSizeToken)};
  std::vector<MethodSpec> methods = resolve_methods(c, covs);
  MonteCarloOptions mo;
  mo.scale = c.contrast(sc.default_scale().kind);
  mo.threads = c.threads;
  mo.point_only = c.point_only;
  mo.policy = c.loco_policy;
  MetricsTable table = run_monte_carlo(sc, methods, mo);

  json report;
  report["command"] = "simulate";
  report["config"] = to_json(c);
  report["scale"] = std::string(to_string(mo.scale.kind));
  json truth = json::array();
  for (std::size_t e = 0; e < 4; ++e)
    truth.push_back({{"estimand", std::string(to_string(kAllEstimands[e]))},
                     {"value", table.truth.tau[e]},
                     {"reporting_value", table.truth.psi[e]},
                     {"mc_se", table.truth.se[e]}});
  report["truth"] = truth;
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"estimand", std::string(to_string(r.estimand))},
                    {"method", r.method},
                    {"truth", r.truth},
                    {"mean", r.mean},
                    {"rbias_pct", r.rbias},
                    {"mcsd", r.mcsd},
                    {"aese", r.aese},
                    {"cp", r.cp},
                    {"completed", r.completed},
                    {"attempted", r.attempted}});
  report["metrics"] = rows;
  report["failures"] = table.failures;
  report["runtime_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out_table) *out_table = std::move(table);
  return report;
}

json validate_report(const AnalysisConfig& c) {
  const LoadedData in = load_input(c);
  const DesignLayout lay = derive_layout(in.data);
  json report;
  report["command"] = "validate";
  report["config"] = to_json(c);
  report["data"] = data_json(in.data, in.hash);
  json adopt = json::object();
  for (int i = 0; i < in.data.num_clusters(); ++i)
    adopt[in.data.cluster_labels()[static_cast<std::size_t>(i)]] =
        in.data.period_labels()[static_cast<std::size_t>(lay.adoption_time[static_cast<std::size_t>(i)] - 1)];
  report["adoption_period"] = adopt;
  report["treated_per_period"] = std::vector<int>(lay.treated_count.data(), lay.treated_count.data() + lay.treated_count.size());
  report["period_labels"] = in.data.period_labels();
  int empty = 0;
  for (int i = 0; i < in.data.num_clusters(); ++i)
    for (int j = 1; j < in.data.num_periods() - 1; ++j)
      if (in.data.cell_size()(i, j) == 0) ++empty;
  report["empty_rollout_cells"] = empty;
  return report;
}

int cmd_analyze(const AnalysisConfig& c, std::ostream& out, std::ostream& err, bool as_json) {
  return run_command(c, out, err, as_json, [&] {
    std::string csv;
    json r = analyze_report(c, &csv);
    if (!c.output_csv.empty()) write_file_atomic(c.output_csv, csv);
    print_report_summary(r, err);
    return r;
  });
}

int cmd_ics_test(const AnalysisConfig& c, std::ostream& out, std::ostream& err, bool as_json) {
  return run_command(c, out, err, as_json, [&] {
    json r = ics_report(c);
    std::ostringstream cs;
    cs << "method,test,statistic,df1,df2,p_value\n";
    for (const auto& t : r["tests"]) {
      cs << t["method"].get<std::string>() << ',' << t["test"].get<std::string>() << ','
         << fmt(t["statistic"].get<double>()) << ',' << t["df1"].get<double>() << ',' << t["df2"].get<double>()
         << ',' << fmt(t["p_value"].get<double>()) << '\n';
      err << t["method"].get<std::string>() << " " << t["test"].get<std::string>() << " test: statistic "
          << fmt(t["statistic"].get<double>()) << ", p = " << fmt(t["p_value"].get<double>()) << "\n";
    }
    if (!c.output_csv.empty()) write_file_atomic(c.output_csv, cs.str());
    return r;
  });
}

int cmd_simulate(const AnalysisConfig& c, std::ostream& out, std::ostream& err, bool as_json) {
  return run_command(c, out, err, as_json, [&] {
    MetricsTable table;
    json r = simulate_report(c, &table);
    if (!c.output_csv.empty()) {
      std::ostringstream os;
      write_metrics_csv(table, os);
      write_file_atomic(c.output_csv, os.str());
    }
    if (!c.output_long_csv.empty()) {
      std::ostringstream os;
      write_metrics_long_csv(table, os);
      write_file_atomic(c.output_long_csv, os.str());
    }
    if (!c.output_replicates.empty()) {
      std::ostringstream os;
      write_replicates_csv(table, os);
      write_file_atomic(c.output_replicates, os.str());
    }
    for (const auto& row : table.rows)
      err << std::left << std::setw(14) << row.method << std::setw(8) << to_string(row.estimand) << " RBias% "
          << std::setw(10) << fmt(row.rbias) << " MCSD " << std::setw(10) << fmt(row.mcsd) << " AESE "
          << std::setw(10) << fmt(row.aese) << " CP " << fmt(row.cp) << "\n";
    if (!table.failures.empty()) err << table.failures.size() << " replicate fits failed\n";
    return r;
  });
}

int cmd_validate(const AnalysisConfig& c, std::ostream& out, std::ostream& err, bool as_json) {
  return run_command(c, out, err, as_json, [&] {
    json r = validate_report(c);
    err << "ok: " << r["data"]["clusters"] << " clusters, " << r["data"]["periods"] << " periods, "
        << r["data"]["rows"] << " rows\n";
    return r;
  });
}

}  // namespace swmrs
