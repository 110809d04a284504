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

#include "swmrs/trial_data.hpp"
#include "swmrs/working_models.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace swmrs::detail {

// Fixed-effect layout: period indicators 1..J, treatment column(s),
// covariates, then (ANCOVA-III) treatment-by-covariate interactions.
class Design {
 public:
  Design(const TrialDataset& data, const WorkingModelSpec& spec,
         const Eigen::MatrixXd* centering = nullptr);

  int cols() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  int treatment_column(int j) const;

  /// Writes row r with treatment overridden by z (z < 0 keeps observed).
  void fill(const TrialDataset& data, Eigen::Index r, int z, double* out) const;
  Eigen::MatrixXd matrix(const TrialDataset& data) const;

 private:
  int J_ = 0;
  TreatmentEffect te_ = TreatmentEffect::Constant;
  bool interactions_ = false;
  std::vector<int> source_;  // data covariate column, or -1 for cell_size
  Eigen::MatrixXd centering_;
  int first_cov_ = 0;
  std::vector<std::string> names_;
};

/// Throws RankDeficientDesign when the (scaled) cross-product matrix is
/// numerically singular.
void check_full_rank(const Eigen::MatrixXd& xtx, const std::vector<std::string>& names);

/// Per-row covariate values (cell_size resolved), without centering.
Eigen::MatrixXd raw_covariates(const TrialDataset& data, const std::vector<std::string>& covariates);

// GLM pieces shared by IRLS, the GLMM and prediction.
double inverse_link(Link link, double eta);
double link_fn(Link link, double mu);
/// d mu / d eta.
double mu_eta(Link link, double eta);
double variance_fn(Family family, double mu);
/// Log-likelihood contribution (up to constants); -inf when mu is invalid.
double log_lik(Family family, double y, double mu);

}  // namespace swmrs::detail
