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
#include "swmrs/trial_data.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace swmrs {

enum class ScenarioId { C1, C2, C3, B1, B2, B3 };

std::string_view to_string(ScenarioId s);
ScenarioId parse_scenario(std::string_view s);

struct ScenarioConfig {
  ScenarioId scenario = ScenarioId::C1;
  int clusters = 30;
  /// 0 picks the scenario default (6 continuous, 4 binary).
  int periods = 0;
  std::uint64_t seed = 20260101;
  int replicates = 200;
  /// Informative-size dial. Only meaningful for C1 and B1; when set, B1
  /// switches to the size-test variant of the binary effect.
  std::optional<double> delta;
  int super_population = 100000;

  bool binary() const;
  int num_periods() const;
  /// Default contrast: difference for continuous, odds ratio for binary.
  ContrastScale default_scale() const;
};

/// Independent generator for (seed, stream, index).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Adoption time (2..J) per cluster: I/(J-1) clusters per step, the
/// remainder going to the earliest steps, randomly permuted.
std::vector<int> randomize_rollout(int clusters, int periods, std::mt19937_64& rng);
std::vector<int> randomize_rollout(int clusters, int periods, std::uint64_t seed);

/// E[N_ij] for period j.
double expected_cell_size(const ScenarioConfig& config, int j);
/// Support of N_ij: inclusive bounds.
std::pair<int, int> cell_size_range(const ScenarioConfig& config, int j);

/// Individual treatment effect (difference on the outcome or log-odds
/// scale). `nbar` is the average cluster-period size used by C2 and C3.
double treatment_effect(const ScenarioConfig& config, double x1, double x2, int j, int n_ij, double nbar);

/// Baseline mean (without random effects) of Y(0).
double baseline_mean(const ScenarioConfig& config, double x1, double x2, int j);

/// One simulated trial with both potential outcomes attached. Covariates
/// are named x1 and x2.
TrialDataset generate_trial(const ScenarioConfig& config, std::uint64_t replicate);
TrialDataset generate_continuous(const ScenarioConfig& config, std::uint64_t replicate = 0);
TrialDataset generate_binary(const ScenarioConfig& config, std::uint64_t replicate = 0);

struct TruthResult {
  Scale scale = Scale::Difference;
  std::array<double, 4> tau{};   // natural scale
  std::array<double, 4> psi{};   // reporting scale
  std::array<double, 4> se{};    // Monte Carlo SE on the reporting scale
  int super_population = 0;
};

/// Estimand values over a simulated super-population of clusters.
TruthResult true_estimands(const ScenarioConfig& config, const ContrastScale& scale, int threads = 1);

struct ReplicateEstimate {
  int replicate = 0;
  bool ok = false;
  double psi = 0.0, se = 0.0, lower = 0.0, upper = 0.0;  // reporting scale
};

struct MetricsRow {
  Estimand estimand = Estimand::HIATE;
  std::string method;
  double truth = 0.0;  // reporting scale
  double mean = 0.0;
  double rbias = 0.0;  // percent
  double mcsd = 0.0;
  double aese = 0.0;
  double cp = 0.0;
  int completed = 0;
  int attempted = 0;
  double completion_rate() const { return attempted > 0 ? static_cast<double>(completed) / attempted : 0.0; }
};

/// Aggregates replicate estimates for one (estimand, method). NaN SEs are
/// allowed when only point estimates were computed; AESE and CP are then
/// NaN.
MetricsRow summarize_replicates(const std::vector<ReplicateEstimate>& reps, double truth);

struct MonteCarloOptions {
  ContrastScale scale;
  int threads = 1;
  /// Skip the jackknife (point estimates only).
  bool point_only = false;
  LocoPolicy policy = LocoPolicy::Error;
  /// Truth on the reporting scale; computed when absent.
  std::optional<TruthResult> truth;
};

struct MetricsTable {
  ScenarioConfig config;
  ContrastScale scale;
  TruthResult truth;
  std::vector<MetricsRow> rows;  // estimand-major, methods in input order
  /// replicates[method][estimand][r]
  std::vector<std::array<std::vector<ReplicateEstimate>, 4>> replicates;
  std::vector<std::string> failures;  // one line per failed (replicate, method)

  const MetricsRow& row(Estimand e, const std::string& method) const;
};

MetricsTable run_monte_carlo(const ScenarioConfig& config, const std::vector<MethodSpec>& methods,
                             const MonteCarloOptions& options);

struct IcsRejection {
  IcsTest test = IcsTest::Global;
  std::string method;
  int rejections = 0;
  int completed = 0;
  int attempted = 0;
  double rate() const { return completed > 0 ? static_cast<double>(rejections) / completed : 0.0; }
};

/// Rejection rates of the size tests at level alpha over the configured
/// replicates, one entry per (method, test).
std::vector<IcsRejection> run_ics_monte_carlo(const ScenarioConfig& config, const std::vector<MethodSpec>& methods,
                                              const std::vector<IcsTest>& tests, double alpha,
                                              const ContrastScale& scale, int threads = 1);

void write_metrics_csv(const MetricsTable& table, std::ostream& out);
/// Plot-ready long format: estimand, method, metric, value.
void write_metrics_long_csv(const MetricsTable& table, std::ostream& out);
void write_replicates_csv(const MetricsTable& table, std::ostream& out);

}  // namespace swmrs
