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

// Test fixtures and reference computations. Everything here works from the
// raw rows with dense linear algebra and shares no code with the library
// beyond TrialDataset accessors.

#pragma once

#include "swmrs/estimands.hpp"
#include "swmrs/trial_data.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

struct TrialShape {
  int clusters = 8;
  int periods = 4;
  int covariates = 2;
  bool binary = false;
  int min_size = 1;
  int max_size = 6;
  /// Clusters per adoption time at least this many (when clusters allow).
  int per_step = 1;
};

/// Small stepped-wedge trial: adoption times cycle through 2..J so each
/// rollout period has both arms, then get shuffled.
inline swmrs::TrialDataset random_trial(std::mt19937_64& rng, const TrialShape& s) {
  const int I = s.clusters, J = s.periods;
  std::vector<int> adopt(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) adopt[static_cast<std::size_t>(i)] = 2 + i % (J - 1);
  std::shuffle(adopt.begin(), adopt.end(), rng);

  std::uniform_int_distribution<int> size(s.min_size, s.max_size);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<std::string> labels;
  std::vector<int> cl, per, trt;
  std::vector<double> y;
  std::vector<std::vector<double>> x;
  for (int i = 0; i < I; ++i) {
    labels.push_back("k" + std::to_string(i));
    const double a = 0.5 * normal(rng);
    for (int j = 1; j <= J; ++j) {
      const int n = size(rng);
      const int z = j >= adopt[static_cast<std::size_t>(i)] ? 1 : 0;
      const double g = 0.3 * normal(rng);
      for (int k = 0; k < n; ++k) {
        std::vector<double> row;
        double lin = 0.2 + 0.1 * j + 0.8 * z + a + g + 0.02 * n;
        for (int c = 0; c < s.covariates; ++c) {
          const double v = normal(rng);
          row.push_back(v);
          lin += (0.5 - 0.3 * c) * v + 0.4 * z * v * (c == 0);
        }
        double out;
        if (s.binary) {
          const double p = 1.0 / (1.0 + std::exp(-(lin - 0.8)));
          out = unif(rng) < p ? 1.0 : 0.0;
        } else {
          out = lin + normal(rng);
        }
        cl.push_back(i);
        per.push_back(j);
        trt.push_back(z);
        y.push_back(out);
        x.push_back(std::move(row));
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd X(n, s.covariates);
  for (Eigen::Index r = 0; r < n; ++r)
    for (int c = 0; c < s.covariates; ++c) X(r, c) = x[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  std::vector<std::string> names;
  for (int c = 0; c < s.covariates; ++c) names.push_back("x" + std::to_string(c + 1));
  return swmrs::TrialDataset::from_columns(labels, J, cl, per, trt, Eigen::Map<Eigen::VectorXd>(y.data(), n), X,
                                           names);
}

/// Per-row weight omega_ijk straight from the definitions.
inline Eigen::VectorXd row_weights(const swmrs::TrialDataset& d, swmrs::Estimand e) {
  const int I = d.num_clusters(), J = d.num_periods();
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(I, J);
  for (Eigen::Index r = 0; r < d.num_rows(); ++r)
    count(d.cluster_index()[static_cast<std::size_t>(r)], d.period()[static_cast<std::size_t>(r)] - 1) += 1.0;
  Eigen::VectorXd w(d.num_rows());
  for (Eigen::Index r = 0; r < d.num_rows(); ++r) {
    const int i = d.cluster_index()[static_cast<std::size_t>(r)];
    const int j = d.period()[static_cast<std::size_t>(r)];
    switch (e) {
      case swmrs::Estimand::HIATE: w(r) = 1.0; break;
      case swmrs::Estimand::HCATE: w(r) = 1.0 / count.row(i).sum(); break;
      case swmrs::Estimand::VIATE: w(r) = 1.0 / count.col(j - 1).sum(); break;
      case swmrs::Estimand::VCATE: w(r) = 1.0 / count(i, j - 1); break;
    }
  }
  return w;
}

/// Per-row model predictions under treatment z, collapsed to the estimator
/// for arm z. `pred(r, z)` gives the prediction for row r under z; a null
/// function gives the unadjusted estimator.
template <class Pred>
double augmented_mu(const swmrs::TrialDataset& d, swmrs::Estimand e, int z, Pred pred, bool augment) {
  const int I = d.num_clusters(), J = d.num_periods();
  const Eigen::VectorXd w = row_weights(d, e);
  Eigen::MatrixXd wy = Eigen::MatrixXd::Zero(I, J), wm = wy, ws = wy;
  Eigen::MatrixXi arm = Eigen::MatrixXi::Constant(I, J, -1);
  for (Eigen::Index r = 0; r < d.num_rows(); ++r) {
    const int i = d.cluster_index()[static_cast<std::size_t>(r)];
    const int j = d.period()[static_cast<std::size_t>(r)] - 1;
    wy(i, j) += w(r) * d.outcome()(r);
    wm(i, j) += augment ? w(r) * pred(r, z) : 0.0;
    ws(i, j) += w(r);
    arm(i, j) = d.treatment()[static_cast<std::size_t>(r)];
  }
  double num = 0.0, den = 0.0;
  for (int j = 2; j <= J - 1; ++j) {
    double all_w = 0.0, all_m = 0.0, arm_w = 0.0, arm_r = 0.0;
    for (int i = 0; i < I; ++i) {
      const double c = ws(i, j - 1);
      if (c == 0.0) continue;
      all_w += c;
      all_m += wm(i, j - 1);
      if (arm(i, j - 1) == z) {
        arm_w += c;
        arm_r += wy(i, j - 1) - wm(i, j - 1);
      }
    }
    num += all_w * (all_m / all_w + arm_r / arm_w);
    den += all_w;
  }
  return num / den;
}

inline double unadjusted_mu(const swmrs::TrialDataset& d, swmrs::Estimand e, int z) {
  return augmented_mu(d, e, z, [](Eigen::Index, int) { return 0.0; }, false);
}

/// Period dummies, treatment indicator, covariates (the W1 layout).
inline Eigen::MatrixXd w1_design(const swmrs::TrialDataset& d, const std::vector<int>& cov_cols, int z_override = -1) {
  const int J = d.num_periods();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(d.num_rows(), J + 1 + static_cast<Eigen::Index>(cov_cols.size()));
  for (Eigen::Index r = 0; r < d.num_rows(); ++r) {
    const auto rr = static_cast<std::size_t>(r);
    X(r, d.period()[rr] - 1) = 1.0;
    X(r, J) = z_override < 0 ? d.treatment()[rr] : z_override;
    for (std::size_t c = 0; c < cov_cols.size(); ++c)
      X(r, J + 1 + static_cast<Eigen::Index>(c)) = d.covariates()(r, cov_cols[c]);
  }
  return X;
}

inline Eigen::VectorXd ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return X.colPivHouseholderQr().solve(y);
}

/// MRS with an OLS (independence GEE, identity link) W1 working model.
inline double mrs_w1_mu(const swmrs::TrialDataset& d, const std::vector<int>& cov_cols, swmrs::Estimand e, int z) {
  const Eigen::VectorXd beta = ols(w1_design(d, cov_cols), d.outcome());
  const Eigen::VectorXd m0 = w1_design(d, cov_cols, 0) * beta;
  const Eigen::VectorXd m1 = w1_design(d, cov_cols, 1) * beta;
  return augmented_mu(d, e, z, [&](Eigen::Index r, int zz) { return zz == 1 ? m1(r) : m0(r); }, true);
}

/// Same data with cluster g removed, rebuilt row by row.
inline swmrs::TrialDataset drop_cluster(const swmrs::TrialDataset& d, int g) {
  std::vector<std::string> labels;
  std::map<int, int> remap;
  for (int i = 0; i < d.num_clusters(); ++i) {
    if (i == g) continue;
    remap[i] = static_cast<int>(labels.size());
    labels.push_back(d.cluster_labels()[static_cast<std::size_t>(i)]);
  }
  std::vector<int> cl, per, trt;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < d.num_rows(); ++r) {
    const auto rr = static_cast<std::size_t>(r);
    if (d.cluster_index()[rr] == g) continue;
    keep.push_back(r);
    cl.push_back(remap[d.cluster_index()[rr]]);
    per.push_back(d.period()[rr]);
    trt.push_back(d.treatment()[rr]);
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  Eigen::VectorXd y(n);
  Eigen::MatrixXd X(n, d.covariates().cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    y(k) = d.outcome()(keep[static_cast<std::size_t>(k)]);
    X.row(k) = d.covariates().row(keep[static_cast<std::size_t>(k)]);
  }
  return swmrs::TrialDataset::from_columns(labels, d.num_periods(), cl, per, trt, y, X, d.covariate_names());
}

inline double brute_jackknife_variance(const std::vector<double>& reps) {
  const double n = static_cast<double>(reps.size());
  double mean = 0.0;
  for (double r : reps) mean += r;
  mean /= n;
  double ss = 0.0;
  for (double r : reps) ss += (r - mean) * (r - mean);
  return (n - 1.0) / n * ss;
}

}  // namespace fixtures
