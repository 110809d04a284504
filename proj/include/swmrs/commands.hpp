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

#include "swmrs/config.hpp"
#include "swmrs/simulation.hpp"

#include <json.hpp>

#include <exception>
#include <iosfwd>
#include <string>

namespace swmrs {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,     // unexpected failure
  kExitValidation = 2,  // bad input, config or model specification
  kExitConvergence = 3  // a fit did not converge
};

int exit_code_for(const std::exception& ex);
nlohmann::json error_json(const std::exception& ex);

/// Writes to `path.tmp` and renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

// Report builders; they throw Error on failure and write no files.
nlohmann::json analyze_report(const AnalysisConfig& config, std::string* csv = nullptr);
nlohmann::json ics_report(const AnalysisConfig& config);
nlohmann::json simulate_report(const AnalysisConfig& config, MetricsTable* table = nullptr);
nlohmann::json validate_report(const AnalysisConfig& config);

// Command entry points: build the report, write the configured outputs,
// print human text on `err` and, with `json`, the report on `out`.
// Failures become an error JSON document and a nonzero exit code.
int cmd_analyze(const AnalysisConfig& config, std::ostream& out, std::ostream& err, bool json);
int cmd_ics_test(const AnalysisConfig& config, std::ostream& out, std::ostream& err, bool json);
int cmd_simulate(const AnalysisConfig& config, std::ostream& out, std::ostream& err, bool json);
int cmd_validate(const AnalysisConfig& config, std::ostream& out, std::ostream& err, bool json);

}  // namespace swmrs
