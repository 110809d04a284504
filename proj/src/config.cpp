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

#include <fstream>
#include <set>

namespace swmrs {

using nlohmann::json;

ScenarioConfig AnalysisConfig::scenario_config() const {
  ScenarioConfig c;
  c.scenario = scenario;
  c.clusters = clusters;
  c.periods = periods;
  c.seed = seed;
  c.replicates = replicates;
  c.delta = delta;
  c.super_population = super_population;
  return c;
}

ContrastScale AnalysisConfig::contrast(Scale fallback) const {
  ContrastScale cs = ContrastScale::standard(scale.value_or(fallback));
  if (log_report) cs.log_report = *log_report;
  return cs;
}

json to_json(const AnalysisConfig& c) {
  json j;
  j["input"] = c.input;
  json schema = {{"cluster", c.schema.cluster},
                 {"period", c.schema.period},
                 {"treatment", c.schema.treatment},
                 {"outcome", c.schema.outcome}};
  schema["covariates"] = c.schema.covariates ? json(*c.schema.covariates) : json(nullptr);
  j["schema"] = schema;
  std::vector<std::string> est;
  for (Estimand e : c.estimands) est.emplace_back(to_string(e));
  j["estimands"] = est;
  j["scale"] = c.scale ? json(std::string(to_string(*c.scale))) : json(nullptr);
  j["log_report"] = c.log_report ? json(*c.log_report) : json(nullptr);
  j["methods"] = c.methods;
  j["model_covariates"] = c.model_covariates ? json(*c.model_covariates) : json(nullptr);
  j["loco_policy"] = std::string(to_string(c.loco_policy));
  std::vector<std::string> tests;
  for (IcsTest t : c.tests) tests.emplace_back(to_string(t));
  j["tests"] = tests;
  j["output_json"] = c.output_json;
  j["output_csv"] = c.output_csv;
  j["output_long_csv"] = c.output_long_csv;
  j["output_replicates"] = c.output_replicates;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["scenario"] = std::string(to_string(c.scenario));
  j["clusters"] = c.clusters;
  j["periods"] = c.periods;
  j["replicates"] = c.replicates;
  j["delta"] = c.delta ? json(*c.delta) : json(nullptr);
  j["super_population"] = c.super_population;
  j["point_only"] = c.point_only;
  return j;
}

namespace {

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::InvalidArgument, "bad config value", {{"key", key}, {"reason", ex.what()}});
  }
}

}  // namespace

AnalysisConfig config_from_json(const json& j, AnalysisConfig c) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "config must be a JSON object");
  static const std::set<std::string> known = {
      "input",   "schema",      "estimands",       "scale",           "log_report",        "methods",
      "model_covariates", "loco_policy", "tests", "output_json", "output_csv", "output_long_csv",
      "output_replicates", "seed", "threads", "scenario", "clusters", "periods", "replicates", "delta",
      "super_population", "point_only"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw Error(ErrorKind::InvalidArgument, "unknown config key", {{"key", k}});

  if (j.contains("input")) c.input = get<std::string>(j, "input");
  if (j.contains("schema")) {
    const json& s = j.at("schema");
    if (s.contains("cluster")) c.schema.cluster = get<std::string>(s, "cluster");
    if (s.contains("period")) c.schema.period = get<std::string>(s, "period");
    if (s.contains("treatment")) c.schema.treatment = get<std::string>(s, "treatment");
    if (s.contains("outcome")) c.schema.outcome = get<std::string>(s, "outcome");
    if (s.contains("covariates")) {
      if (s.at("covariates").is_null()) c.schema.covariates.reset();
      else c.schema.covariates = get<std::vector<std::string>>(s, "covariates");
    }
  }
  if (j.contains("estimands")) {
    c.estimands.clear();
    for (const auto& s : get<std::vector<std::string>>(j, "estimands")) c.estimands.push_back(parse_estimand(s));
  }
  if (j.contains("scale")) {
    if (j.at("scale").is_null()) c.scale.reset();
    else c.scale = parse_scale(get<std::string>(j, "scale"));
  }
  if (j.contains("log_report")) {
    if (j.at("log_report").is_null()) c.log_report.reset();
    else c.log_report = get<bool>(j, "log_report");
  }
  if (j.contains("methods")) c.methods = get<std::vector<std::string>>(j, "methods");
  if (j.contains("model_covariates")) {
    if (j.at("model_covariates").is_null()) c.model_covariates.reset();
    else c.model_covariates = get<std::vector<std::string>>(j, "model_covariates");
  }
  if (j.contains("loco_policy")) c.loco_policy = parse_loco_policy(get<std::string>(j, "loco_policy"));
  if (j.contains("tests")) {
    c.tests.clear();
    for (const auto& s : get<std::vector<std::string>>(j, "tests")) c.tests.push_back(parse_ics_test(s));
  }
  if (j.contains("output_json")) c.output_json = get<std::string>(j, "output_json");
  if (j.contains("output_csv")) c.output_csv = get<std::string>(j, "output_csv");
  if (j.contains("output_long_csv")) c.output_long_csv = get<std::string>(j, "output_long_csv");
  if (j.contains("output_replicates")) c.output_replicates = get<std::string>(j, "output_replicates");
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("threads")) c.threads = get<int>(j, "threads");
  if (j.contains("scenario")) c.scenario = parse_scenario(get<std::string>(j, "scenario"));
  if (j.contains("clusters")) c.clusters = get<int>(j, "clusters");
  if (j.contains("periods")) c.periods = get<int>(j, "periods");
  if (j.contains("replicates")) c.replicates = get<int>(j, "replicates");
  if (j.contains("delta")) {
    if (j.at("delta").is_null()) c.delta.reset();
    else c.delta = get<double>(j, "delta");
  }
  if (j.contains("super_population")) c.super_population = get<int>(j, "super_population");
  if (j.contains("point_only")) c.point_only = get<bool>(j, "point_only");
  return c;
}

AnalysisConfig load_config_file(const std::string& path, AnalysisConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config file", {{"path", path}});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::InvalidArgument, "config is not valid JSON", {{"path", path}, {"reason", ex.what()}});
  }
  return config_from_json(j, std::move(base));
}

WorkingModelSpec working_model_preset(std::string_view name, const std::vector<std::string>& covariates) {
  int k = 0;
  if (name.size() >= 2 && (name[0] == 'W' || name[0] == 'w')) {
    try {
      k = std::stoi(std::string(name.substr(1)));
    } catch (const std::exception&) {
      k = 0;
    }
  }
  if (k < 1 || k > 12) throw Error(ErrorKind::InvalidArgument, "unknown working model", {{"value", std::string(name)}});
  WorkingModelSpec s;
  s.covariates = covariates;
  s.treatment_effect = k % 2 == 1 ? TreatmentEffect::Constant : TreatmentEffect::PeriodSpecific;
  const int group = (k - 1) / 2;  // 0..5
  static constexpr ModelEstimator est[] = {ModelEstimator::GeeIndependence, ModelEstimator::LmmReml,
                                          ModelEstimator::LmmReml,         ModelEstimator::GeeIndependence,
                                          ModelEstimator::GlmmLaplace,     ModelEstimator::GlmmLaplace};
  static constexpr RandomEffects re[] = {RandomEffects::None,    RandomEffects::Cluster,
                                        RandomEffects::ClusterPlusClusterPeriod, RandomEffects::None,
                                        RandomEffects::Cluster, RandomEffects::ClusterPlusClusterPeriod};
  s.estimator = est[group];
  s.random_effects = re[group];
  if (group >= 3) {
    s.family = Family::Binomial;
    s.link = Link::Logit;
  }
  return s;
}

MethodSpec parse_method(std::string_view token, const std::vector<std::string>& covariates) {
  MethodSpec m;
  m.label = std::string(token);
  if (token == "unadj") {
    m.kind = MethodKind::Unadjusted;
    return m;
  }
  if (token == "ancova" || token == "ancova1") {
    m.kind = MethodKind::Ancova;
    m.model.estimator = ModelEstimator::AncovaWls;
    m.model.treatment_effect = TreatmentEffect::PeriodSpecific;
    m.model.covariates = covariates;
    m.model.ancova_interactions = token == "ancova";
    return m;
  }
  const auto colon = token.find(':');
  if (colon != std::string_view::npos) {
    const std::string_view kind = token.substr(0, colon);
    if (kind == "mrs" || kind == "coef") {
      m.kind = kind == "mrs" ? MethodKind::Mrs : MethodKind::Coef;
      m.model = working_model_preset(token.substr(colon + 1), covariates);
      return m;
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method", {{"value", std::string(token)}});
}

std::vector<std::string> default_model_covariates(const TrialDataset& data) {
  std::vector<std::string> out = data.covariate_names();
  out.emplace_back(kCellSizeToken);
  return out;
}

}  // namespace swmrs
