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

#pragma once

#include "swmrs/estimands.hpp"
#include "swmrs/inference.hpp"
#include "swmrs/simulation.hpp"
#include "swmrs/trial_data.hpp"
#include "swmrs/working_models.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace swmrs {

/// Everything a CLI run needs. Serializes to one JSON document that is
/// embedded verbatim in every report.
struct AnalysisConfig {
  // input
  std::string input;
  CsvSchema schema;

  // estimation
  std::vector<Estimand> estimands{kAllEstimands.begin(), kAllEstimands.end()};
  /// Absent: difference, or odds ratio for simulated binary scenarios.
  std::optional<Scale> scale;
  /// Absent: log for the ratio scales.
  std::optional<bool> log_report;
  std::vector<std::string> methods{"unadj"};
  /// Working-model adjustment set; absent means every dataset covariate
  /// plus cell_size.
  std::optional<std::vector<std::string>> model_covariates;
  LocoPolicy loco_policy = LocoPolicy::Error;
  std::vector<IcsTest> tests{IcsTest::HPair, IcsTest::VPair, IcsTest::Global};

  // outputs
  std::string output_json;
  std::string output_csv;
  std::string output_long_csv;
  std::string output_replicates;

  std::uint64_t seed = 20260101;
  int threads = 0;

  // simulation
  ScenarioId scenario = ScenarioId::C1;
  int clusters = 30;
  int periods = 0;
  int replicates = 200;
  std::optional<double> delta;
  int super_population = 100000;
  bool point_only = false;

  ContrastScale contrast(Scale fallback = Scale::Difference) const;
  ScenarioConfig scenario_config() const;
};

nlohmann::json to_json(const AnalysisConfig& config);
/// Overlays the keys present in `j` onto `base`. Unknown keys throw
/// InvalidArgument.
AnalysisConfig config_from_json(const nlohmann::json& j, AnalysisConfig base = {});
AnalysisConfig load_config_file(const std::string& path, AnalysisConfig base = {});

/// W1..W12 working models with the given adjustment set.
WorkingModelSpec working_model_preset(std::string_view name, const std::vector<std::string>& covariates);

/// "unadj", "mrs:W#", "coef:W#", "ancova" (with interactions) or
/// "ancova1" (main effects only).
MethodSpec parse_method(std::string_view token, const std::vector<std::string>& covariates);

/// Default adjustment set for a dataset: its covariates plus cell_size.
std::vector<std::string> default_model_covariates(const TrialDataset& data);

}  // namespace swmrs
