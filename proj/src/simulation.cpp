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

#include "swmrs/simulation.hpp"

#include "swmrs/distributions.hpp"
#include "swmrs/error.hpp"
#include "swmrs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>

namespace swmrs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = 3.14159265358979323846;
// continuous truths need 0.1; the binary ones reproduce with the printed 0.01
double var_x2(const ScenarioConfig& c) { return c.binary() ? 0.01 : 0.1; }

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool is_binary(ScenarioId s) { return s == ScenarioId::B1 || s == ScenarioId::B2 || s == ScenarioId::B3; }

struct VarianceParams {
  double cluster, cluster_period, residual;
};

VarianceParams variances(const ScenarioConfig& c) {
  if (c.binary()) return {0.3, 0.3, 0.0};
  return {0.05, 0.05, 0.9};
}

double size_term(int n, double en) {
  const double nd = n;
  return std::log(nd) * nd * nd / (en * en);
}

}  // namespace

std::string_view to_string(ScenarioId s) {
  switch (s) {
    case ScenarioId::C1: return "C1";
    case ScenarioId::C2: return "C2";
    case ScenarioId::C3: return "C3";
    case ScenarioId::B1: return "B1";
    case ScenarioId::B2: return "B2";
    case ScenarioId::B3: return "B3";
  }
  return "?";
}

ScenarioId parse_scenario(std::string_view s) {
  for (ScenarioId id : {ScenarioId::C1, ScenarioId::C2, ScenarioId::C3, ScenarioId::B1, ScenarioId::B2, ScenarioId::B3})
    if (to_string(id) == s) return id;
  throw Error(ErrorKind::InvalidArgument, "unknown scenario", {{"value", std::string(s)}});
}

bool ScenarioConfig::binary() const { return is_binary(scenario); }

int ScenarioConfig::num_periods() const {
  if (periods > 0) return periods;
  return binary() ? 4 : 6;
}

ContrastScale ScenarioConfig::default_scale() const {
  return ContrastScale::standard(binary() ? Scale::OddsRatio : Scale::Difference);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::vector<int> randomize_rollout(int clusters, int periods, std::mt19937_64& rng) {
  if (periods < 3 || clusters < periods - 1)
    throw Error(ErrorKind::InvalidArgument, "rollout needs J >= 3 and at least one cluster per step",
                {{"clusters", std::to_string(clusters)}, {"periods", std::to_string(periods)}});
  const int steps = periods - 1;
  std::vector<int> a;
  a.reserve(static_cast<std::size_t>(clusters));
  for (int s = 0; s < steps; ++s) {
    const int count = clusters / steps + (s < clusters % steps ? 1 : 0);
    a.insert(a.end(), static_cast<std::size_t>(count), s + 2);
  }
  std::shuffle(a.begin(), a.end(), rng);
  return a;
}

std::vector<int> randomize_rollout(int clusters, int periods, std::uint64_t seed) {
  auto rng = substream(seed, 2, 0);
  return randomize_rollout(clusters, periods, rng);
}

std::pair<int, int> cell_size_range(const ScenarioConfig& c, int j) {
  switch (c.scenario) {
    case ScenarioId::C1:
    case ScenarioId::C2: return {20, 100};
    case ScenarioId::C3: return {10 + 10 * j, 90 + 10 * j};
    case ScenarioId::B1:
    case ScenarioId::B2: return {5, 50};
    case ScenarioId::B3: return {5 + 5 * j, 45 + 10 * j};
  }
  return {1, 1};
}

double expected_cell_size(const ScenarioConfig& c, int j) {
  const auto [lo, hi] = cell_size_range(c, j);
  return 0.5 * (lo + hi);
}

double baseline_mean(const ScenarioConfig& c, double x1, double x2, int j) {
  const int J = c.num_periods();
  const double frac = static_cast<double>(j - 1) / (J - 1);
  if (c.binary()) return 0.05 + 0.20 * frac + j * x1 + (static_cast<double>(j) / J) * x2 * x2;
  return 0.25 + 0.02 * frac + 1.5 * j * x1 + (static_cast<double>(j) / J) * x2 * x2;
}

double treatment_effect(const ScenarioConfig& c, double x1, double x2, int j, int n, double nbar) {
  const double J = c.num_periods();
  const double en = expected_cell_size(c, j);
  const double dj = j;
  switch (c.scenario) {
    case ScenarioId::C1: {
      double t = 1.0 + std::sin(x1) + std::exp(-x2);
      if (c.delta) t += *c.delta * size_term(n, en);
      return t;
    }
    case ScenarioId::C2:
      return 0.5 - std::sin(x1) - 1.5 * std::exp(-x2) + 4.0 * std::sqrt(static_cast<double>(n)) / (5.0 * nbar) +
             1.5 * size_term(n, en);
    case ScenarioId::C3:
      return 1.0 + dj * std::sin(x1) - dj * dj * std::exp(-x2) + std::sqrt(static_cast<double>(n)) / nbar +
             3.0 * size_term(n, expected_cell_size(c, 1));
    case ScenarioId::B1:
      if (c.delta)
        return 0.5 + 0.5 * std::sin(kPi * x1) + std::log(1.0 + x1 / 3.0 + x2 * x2) + *c.delta * size_term(n, en);
      return 1.0 + 0.5 * std::sin(kPi * x1) + std::log(1.0 + x1 + 2.0 * x2 * x2);
    case ScenarioId::B2:
      return 1.0 + std::sin(kPi * x1) + 0.5 * std::log(1.0 + x1 + x2 * x2) + size_term(n, en);
    case ScenarioId::B3:
      return 0.1 + dj / (2.0 * J) * std::sin(kPi * x1) + dj * dj / J * std::log(1.0 + 0.5 * x1 + 0.2 * x2 * x2) +
             0.5 * size_term(n, en);
  }
  return 0.0;
}

TrialDataset generate_trial(const ScenarioConfig& c, std::uint64_t replicate) {
  const int I = c.clusters, J = c.num_periods();
  auto rng = substream(c.seed, 0, replicate);
  const std::vector<int> adoption = randomize_rollout(I, J, rng);

  Eigen::ArrayXXi n(I, J);
  for (int i = 0; i < I; ++i)
    for (int j = 1; j <= J; ++j) {
      const auto [lo, hi] = cell_size_range(c, j);
      n(i, j - 1) = std::uniform_int_distribution<int>(lo, hi)(rng);
    }
  const double nbar = n.cast<double>().mean();
  const VarianceParams vp = variances(c);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  Eigen::VectorXd alpha(I);
  Eigen::ArrayXXd gamma(I, J);
  for (int i = 0; i < I; ++i) {
    alpha(i) = std::sqrt(vp.cluster) * stdnorm(rng);
    for (int j = 0; j < J; ++j) gamma(i, j) = std::sqrt(vp.cluster_period) * stdnorm(rng);
  }

  const Eigen::Index rows = n.sum();
  std::vector<int> cidx, per, trt;
  cidx.reserve(static_cast<std::size_t>(rows));
  per.reserve(static_cast<std::size_t>(rows));
  trt.reserve(static_cast<std::size_t>(rows));
  Eigen::VectorXd y(rows), y0(rows), y1(rows);
  Eigen::MatrixXd X(rows, 2);
  std::bernoulli_distribution x1d(c.binary() ? 0.1 : 0.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double sd_x2 = std::sqrt(var_x2(c)), sd_eps = std::sqrt(vp.residual);
  Eigen::Index r = 0;
  for (int i = 0; i < I; ++i) {
    for (int j = 1; j <= J; ++j) {
      const int z = j >= adoption[static_cast<std::size_t>(i)] ? 1 : 0;
      for (int k = 0; k < n(i, j - 1); ++k, ++r) {
        const double x1 = x1d(rng) ? 1.0 : 0.0;
        const double x2 = sd_x2 * stdnorm(rng);
        const double base = baseline_mean(c, x1, x2, j) + alpha(i) + gamma(i, j - 1);
        const double th = treatment_effect(c, x1, x2, j, n(i, j - 1), nbar);
        if (c.binary()) {
          const double u = unif(rng);
          y0(r) = u < expit(base) ? 1.0 : 0.0;
          y1(r) = u < expit(base + th) ? 1.0 : 0.0;
        } else {
          y0(r) = base + sd_eps * stdnorm(rng);
          y1(r) = y0(r) + th;
        }
        y(r) = z ? y1(r) : y0(r);
        X(r, 0) = x1;
        X(r, 1) = x2;
        cidx.push_back(i);
        per.push_back(j);
        trt.push_back(z);
      }
    }
  }
  std::vector<std::string> labels;
  const int width = static_cast<int>(std::to_string(I).size());
  for (int i = 0; i < I; ++i) {
    std::string s = std::to_string(i + 1);
    labels.push_back("c" + std::string(static_cast<std::size_t>(width) - s.size(), '0') + s);
  }
  return TrialDataset::from_columns(std::move(labels), J, std::move(cidx), std::move(per), std::move(trt),
                                    std::move(y), std::move(X), {"x1", "x2"},
                                    PotentialOutcomes{std::move(y0), std::move(y1)});
}

TrialDataset generate_continuous(const ScenarioConfig& c, std::uint64_t replicate) {
  if (c.binary()) throw Error(ErrorKind::InvalidArgument, "not a continuous scenario");
  return generate_trial(c, replicate);
}

TrialDataset generate_binary(const ScenarioConfig& c, std::uint64_t replicate) {
  if (!c.binary()) throw Error(ErrorKind::InvalidArgument, "not a binary scenario");
  return generate_trial(c, replicate);
}

namespace {

// Weighted sums over rollout cells: num[e][a] and den[e].
struct TruthSums {
  std::array<std::array<double, 2>, 4> num{};
  std::array<double, 4> den{};
  void add(const TruthSums& o) {
    for (int e = 0; e < 4; ++e) {
      num[e][0] += o.num[e][0];
      num[e][1] += o.num[e][1];
      den[e] += o.den[e];
    }
  }
};

std::array<double, 4> truth_psi(const TruthSums& s, const ContrastScale& scale, std::array<double, 4>* tau) {
  std::array<double, 4> psi{};
  for (int e = 0; e < 4; ++e) {
    const double t = apply_contrast(scale.kind, s.num[e][1] / s.den[e], s.num[e][0] / s.den[e]);
    if (tau) (*tau)[e] = t;
    psi[e] = scale.psi(t);
  }
  return psi;
}

}  // namespace

TruthResult true_estimands(const ScenarioConfig& c, const ContrastScale& scale, int threads) {
  if (c.super_population < 10000)
    throw Error(ErrorKind::InvalidArgument, "super-population needs at least 1e4 clusters",
                {{"m", std::to_string(c.super_population)}});
  const int J = c.num_periods();
  constexpr int kBatches = 100;
  const int m = c.super_population;
  std::vector<TruthSums> batch(kBatches);
  double nbar = 0.0;
  for (int j = 1; j <= J; ++j) nbar += expected_cell_size(c, j) / J;
  const VarianceParams vp = variances(c);

  parallel_for(kBatches, resolve_threads(threads), [&](int b) {
    auto rng = substream(c.seed, 1, static_cast<std::uint64_t>(b));
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    std::bernoulli_distribution x1d(c.binary() ? 0.1 : 0.5);
    const double sd_x2 = std::sqrt(var_x2(c));
    const int lo = m * b / kBatches, hi = m * (b + 1) / kBatches;
    TruthSums s;
    std::vector<int> n(static_cast<std::size_t>(J));
    for (int cl = lo; cl < hi; ++cl) {
      // h-cATE normalizes by the cluster's rollout-period total here
      int total = 0;
      for (int j = 1; j <= J; ++j) {
        const auto [a, bb] = cell_size_range(c, j);
        n[static_cast<std::size_t>(j - 1)] = std::uniform_int_distribution<int>(a, bb)(rng);
        if (j >= 2 && j <= J - 1) total += n[static_cast<std::size_t>(j - 1)];
      }
      const double alpha = std::sqrt(vp.cluster) * stdnorm(rng);
      for (int j = 2; j <= J - 1; ++j) {
        const int nij = n[static_cast<std::size_t>(j - 1)];
        const double gamma = std::sqrt(vp.cluster_period) * stdnorm(rng);
        double cell0 = 0.0, cell1 = 0.0;
        for (int k = 0; k < nij; ++k) {
          const double x1 = x1d(rng) ? 1.0 : 0.0;
          const double x2 = sd_x2 * stdnorm(rng);
          const double base = baseline_mean(c, x1, x2, j) + alpha + gamma;
          const double th = treatment_effect(c, x1, x2, j, nij, nbar);
          if (c.binary()) {
            cell0 += expit(base);
            cell1 += expit(base + th);
          } else {
            cell0 += base;
            cell1 += base + th;
          }
        }
        const double en = expected_cell_size(c, j);
        const double w[4] = {1.0, 1.0 / total, 1.0 / en, 1.0 / nij};
        for (int e = 0; e < 4; ++e) {
          s.num[e][0] += w[e] * cell0;
          s.num[e][1] += w[e] * cell1;
          s.den[e] += w[e] * nij;
        }
      }
    }
    batch[static_cast<std::size_t>(b)] = s;
  });

  TruthSums all;
  for (const auto& s : batch) all.add(s);
  TruthResult out;
  out.scale = scale.kind;
  out.super_population = m;
  out.psi = truth_psi(all, scale, &out.tau);
  std::array<double, 4> sum{}, sq{};
  for (const auto& s : batch) {
    const auto p = truth_psi(s, scale, nullptr);
    for (int e = 0; e < 4; ++e) {
      sum[e] += p[e];
      sq[e] += p[e] * p[e];
    }
  }
  for (int e = 0; e < 4; ++e) {
    const double mean = sum[e] / kBatches;
    const double var = (sq[e] - kBatches * mean * mean) / (kBatches - 1);
    out.se[e] = std::sqrt(std::max(var, 0.0) / kBatches);
  }
  return out;
}

MetricsRow summarize_replicates(const std::vector<ReplicateEstimate>& reps, double truth) {
  MetricsRow row;
  row.truth = truth;
  row.attempted = static_cast<int>(reps.size());
  double sum = 0.0, se_sum = 0.0;
  int covered = 0;
  bool have_se = true;
  for (const auto& r : reps) {
    if (!r.ok) continue;
    ++row.completed;
    sum += r.psi;
    if (std::isfinite(r.se)) {
      se_sum += r.se;
      if (r.lower <= truth && truth <= r.upper) ++covered;
    } else {
      have_se = false;
    }
  }
  if (row.completed == 0) {
    row.mean = row.rbias = row.mcsd = row.aese = row.cp = kNaN;
    return row;
  }
  row.mean = sum / row.completed;
  row.rbias = std::abs(row.mean - truth) / std::abs(truth) * 100.0;
  double ss = 0.0;
  for (const auto& r : reps)
    if (r.ok) ss += (r.psi - row.mean) * (r.psi - row.mean);
  row.mcsd = row.completed > 1 ? std::sqrt(ss / (row.completed - 1)) : 0.0;
  row.aese = have_se ? se_sum / row.completed : kNaN;
  row.cp = have_se ? static_cast<double>(covered) / row.completed : kNaN;
  return row;
}

const MetricsRow& MetricsTable::row(Estimand e, const std::string& method) const {
  for (const auto& r : rows)
    if (r.estimand == e && r.method == method) return r;
  throw Error(ErrorKind::InvalidArgument, "no metrics row", {{"method", method}});
}

namespace {

// Per-method estimates for one replicate; methods that throw are left
// !ok and reported through `failure`.
std::vector<std::array<ReplicateEstimate, 4>> run_replicate(const TrialDataset& data,
                                                            const std::vector<MethodSpec>& methods,
                                                            const MonteCarloOptions& opt, int r,
                                                            std::vector<std::string>& failure) {
  std::vector<std::array<ReplicateEstimate, 4>> out(methods.size());
  for (auto& a : out)
    for (auto& x : a) x.replicate = r;

  auto fill = [&](std::size_t m, const MethodAnalysis* ma, const EstimateSet* pts) {
    for (std::size_t e = 0; e < 4; ++e) {
      ReplicateEstimate& x = out[m][e];
      if (ma) {
        const EstimateResult& res = ma->results[e];
        const double tq = t_quantile(0.975, res.df);
        x.psi = res.psi_estimate;
        x.se = res.se;
        x.lower = res.psi_estimate - tq * res.se;
        x.upper = res.psi_estimate + tq * res.se;
      } else {
        x.psi = (*pts)[e].psi;
        x.se = x.lower = x.upper = kNaN;
      }
      x.ok = std::isfinite(x.psi);
    }
  };
  auto run = [&](const std::vector<MethodSpec>& ms, std::size_t offset) {
    if (opt.point_only) {
      const auto pts = estimate_points(data, ms, opt.scale, rollout_periods(data.num_periods()));
      for (std::size_t m = 0; m < ms.size(); ++m) fill(offset + m, nullptr, &pts[m]);
    } else {
      JackknifeOptions jo;
      jo.policy = opt.policy;
      const Analysis an = analyze(data, ms, opt.scale, jo);
      for (std::size_t m = 0; m < ms.size(); ++m) fill(offset + m, &an.methods[m], nullptr);
    }
  };
  try {
    run(methods, 0);
  } catch (const std::exception&) {
    // isolate the failing method(s)
    for (std::size_t m = 0; m < methods.size(); ++m) {
      try {
        run({methods[m]}, m);
      } catch (const std::exception& ex) {
        for (auto& x : out[m]) x.ok = false;
        failure.push_back("replicate " + std::to_string(r) + " " + methods[m].label + ": " + ex.what());
      }
    }
  }
  return out;
}

}  // namespace

MetricsTable run_monte_carlo(const ScenarioConfig& config, const std::vector<MethodSpec>& methods,
                             const MonteCarloOptions& options) {
  if (config.replicates < 1) throw Error(ErrorKind::InvalidArgument, "need at least one replicate");
  MetricsTable table;
  table.config = config;
  table.scale = options.scale;
  table.truth = options.truth ? *options.truth : true_estimands(config, options.scale, options.threads);

  const int R = config.replicates;
  std::vector<std::vector<std::array<ReplicateEstimate, 4>>> per(static_cast<std::size_t>(R));
  std::vector<std::vector<std::string>> fails(static_cast<std::size_t>(R));
  parallel_for(R, resolve_threads(options.threads), [&](int r) {
    const auto rs = static_cast<std::size_t>(r);
    try {
      const TrialDataset data = generate_trial(config, static_cast<std::uint64_t>(r));
      per[rs] = run_replicate(data, methods, options, r, fails[rs]);
    } catch (const std::exception& ex) {
      per[rs].assign(methods.size(), {});
      for (auto& a : per[rs])
        for (auto& x : a) x.replicate = r;
      fails[rs].push_back("replicate " + std::to_string(r) + ": " + ex.what());
    }
  });

  table.replicates.resize(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t e = 0; e < 4; ++e)
      for (int r = 0; r < R; ++r) table.replicates[m][e].push_back(per[static_cast<std::size_t>(r)][m][e]);
  for (const auto& f : fails) table.failures.insert(table.failures.end(), f.begin(), f.end());

  for (std::size_t e = 0; e < 4; ++e)
    for (std::size_t m = 0; m < methods.size(); ++m) {
      MetricsRow row = summarize_replicates(table.replicates[m][e], table.truth.psi[e]);
      row.estimand = kAllEstimands[e];
      row.method = methods[m].label;
      table.rows.push_back(row);
    }
  return table;
}

std::vector<IcsRejection> run_ics_monte_carlo(const ScenarioConfig& config, const std::vector<MethodSpec>& methods,
                                              const std::vector<IcsTest>& tests, double alpha,
                                              const ContrastScale& scale, int threads) {
  const int R = config.replicates;
  const std::size_t nt = tests.size();
  // outcome per (replicate, method, test): -1 failed, 0 accept, 1 reject
  std::vector<std::vector<int>> res(static_cast<std::size_t>(R), std::vector<int>(methods.size() * nt, -1));
  parallel_for(R, resolve_threads(threads), [&](int r) {
    auto& slot = res[static_cast<std::size_t>(r)];
    TrialDataset data;
    try {
      data = generate_trial(config, static_cast<std::uint64_t>(r));
    } catch (const std::exception&) {
      return;
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      try {
        const Analysis an = analyze(data, {methods[m]}, scale);
        for (std::size_t t = 0; t < nt; ++t) {
          try {
            slot[m * nt + t] = ics_test(an.methods[0], tests[t]).p_value < alpha ? 1 : 0;
          } catch (const Error&) {
          }
        }
      } catch (const std::exception&) {
      }
    }
  });
  std::vector<IcsRejection> out;
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t t = 0; t < nt; ++t) {
      IcsRejection x;
      x.test = tests[t];
      x.method = methods[m].label;
      x.attempted = R;
      for (const auto& slot : res) {
        const int v = slot[m * nt + t];
        if (v >= 0) ++x.completed;
        if (v == 1) ++x.rejections;
      }
      out.push_back(x);
    }
  return out;
}

void write_metrics_csv(const MetricsTable& t, std::ostream& out) {
  out << "estimand,method,truth,mean,rbias_pct,mcsd,aese,cp,completed,attempted,completion_rate\n";
  out << std::setprecision(10);
  for (const auto& r : t.rows) {
    out << to_string(r.estimand) << ',' << r.method << ',' << r.truth << ',' << r.mean << ',' << r.rbias << ','
        << r.mcsd << ',' << r.aese << ',' << r.cp << ',' << r.completed << ',' << r.attempted << ','
        << r.completion_rate() << '\n';
  }
}

void write_metrics_long_csv(const MetricsTable& t, std::ostream& out) {
  out << "estimand,method,metric,value\n";
  out << std::setprecision(10);
  for (const auto& r : t.rows) {
    const std::pair<const char*, double> vals[] = {{"truth", r.truth}, {"mean", r.mean}, {"rbias_pct", r.rbias},
                                                  {"mcsd", r.mcsd},   {"aese", r.aese}, {"cp", r.cp},
                                                  {"completion_rate", r.completion_rate()}};
    for (const auto& [name, v] : vals)
      out << to_string(r.estimand) << ',' << r.method << ',' << name << ',' << v << '\n';
  }
}

void write_replicates_csv(const MetricsTable& t, std::ostream& out) {
  out << "replicate,estimand,method,ok,estimate,se,lower,upper\n";
  out << std::setprecision(12);
  for (std::size_t m = 0; m < t.replicates.size(); ++m) {
    const std::string& label = t.rows.empty() ? std::string() : t.rows[m].method;
    for (std::size_t e = 0; e < 4; ++e)
      for (const auto& x : t.replicates[m][e])
        out << x.replicate << ',' << to_string(kAllEstimands[e]) << ',' << label << ',' << (x.ok ? 1 : 0) << ','
            << x.psi << ',' << x.se << ',' << x.lower << ',' << x.upper << '\n';
  }
}

}  // namespace swmrs
