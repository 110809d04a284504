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

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace swmrs {

/// One individual observation in long format, as handed to the dataset
/// constructor. `cluster` is an arbitrary label, `period` is 1-based.
struct IndividualRecord {
  std::string cluster;
  int period = 1;
  int treatment = 0;
  double outcome = 0.0;
  std::vector<double> covariates;
};

/// Column-name schema for CSV ingestion.
struct CsvSchema {
  std::string cluster = "cluster";
  std::string period = "period";
  std::string treatment = "treatment";
  std::string outcome = "outcome";
  /// Empty means "every remaining column is a covariate".
  std::optional<std::vector<std::string>> covariates;
};

/// Both potential outcomes for every row, attached by the simulators.
struct PotentialOutcomes {
  Eigen::VectorXd y0;
  Eigen::VectorXd y1;
};

/// Immutable long-format stepped-wedge dataset.
///
/// Rows are stored sorted by (cluster index, period) so that every
/// cluster-period cell is a contiguous row range. Cluster indices follow
/// the order of first appearance in the input; period labels are remapped
/// to 1..J when the input labels are not already a contiguous 1..J range.
class TrialDataset {
 public:
  TrialDataset() = default;

  /// Builds and validates (cell-level treatment consistency, binary
  /// treatment). Throws Error on invalid input.
  TrialDataset(std::vector<IndividualRecord> records,
               std::vector<std::string> covariate_names);

  /// Low-level constructor for already-indexed data (used by the simulator
  /// and by subsetting). `cluster_index` is 0-based, `period` 1-based.
  static TrialDataset from_columns(std::vector<std::string> cluster_labels,
                                   int num_periods,
                                   std::vector<int> cluster_index,
                                   std::vector<int> period,
                                   std::vector<int> treatment,
                                   Eigen::VectorXd outcome,
                                   Eigen::MatrixXd covariates,
                                   std::vector<std::string> covariate_names,
                                   std::optional<PotentialOutcomes> potential = {});

  int num_clusters() const { return static_cast<int>(cluster_labels_.size()); }
  int num_periods() const { return num_periods_; }
  Eigen::Index num_rows() const { return outcome_.size(); }

  const std::vector<std::string>& cluster_labels() const { return cluster_labels_; }
  /// Original period labels, position j-1 holds the label of period j.
  const std::vector<std::string>& period_labels() const { return period_labels_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }

  const std::vector<int>& cluster_index() const { return cluster_index_; }
  const std::vector<int>& period() const { return period_; }
  const std::vector<int>& treatment() const { return treatment_; }
  const Eigen::VectorXd& outcome() const { return outcome_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::optional<PotentialOutcomes>& potential_outcomes() const { return potential_; }

  /// Column index of a covariate, or -1.
  int covariate_column(const std::string& name) const;

  /// N_ij, I x J.
  const Eigen::ArrayXXi& cell_size() const { return cell_size_; }
  /// First row of cell (i, j) (period 1-based).
  Eigen::Index cell_begin(int i, int j) const { return cell_offset_[cell_key(i, j)]; }
  Eigen::Index cell_end(int i, int j) const { return cell_offset_[cell_key(i, j) + 1]; }
  /// Treatment of cell (i, j); -1 for an empty cell.
  int cell_treatment(int i, int j) const { return cell_treatment_(i, j - 1); }
  const Eigen::ArrayXXi& cell_treatment_matrix() const { return cell_treatment_; }

  /// Copy of the dataset without cluster g (0-based index).
  TrialDataset without_cluster(int g) const;

  /// Copy with every outcome replaced by a*y + b (potential outcomes too).
  TrialDataset with_affine_outcome(double a, double b) const;

  /// Copy with a different outcome vector (same row order).
  TrialDataset with_outcome(Eigen::VectorXd outcome) const;

  /// Copy with replaced period labels (one per period).
  TrialDataset with_period_labels(std::vector<std::string> labels) const;

  /// Rows as records, in stored order.
  std::vector<IndividualRecord> records() const;

  bool operator==(const TrialDataset& other) const;

 private:
  std::size_t cell_key(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(num_periods_) +
           static_cast<std::size_t>(j - 1);
  }
  void build_index();

  std::vector<std::string> cluster_labels_;
  std::vector<std::string> period_labels_;
  std::vector<std::string> covariate_names_;
  int num_periods_ = 0;

  std::vector<int> cluster_index_;
  std::vector<int> period_;
  std::vector<int> treatment_;
  Eigen::VectorXd outcome_;
  Eigen::MatrixXd covariates_;
  std::optional<PotentialOutcomes> potential_;

  Eigen::ArrayXXi cell_size_;
  Eigen::ArrayXXi cell_treatment_;
  std::vector<Eigen::Index> cell_offset_;
};

/// Adoption structure recovered from observed treatment.
struct DesignLayout {
  /// A_i in 2..J, per cluster index.
  std::vector<int> adoption_time;
  /// I_j, number of treated clusters per period (index j-1).
  Eigen::VectorXi treated_count;
  /// e_j = I_j / I (index j-1).
  Eigen::VectorXd propensity;
  /// N_ij, I x J.
  Eigen::ArrayXXi cluster_period_size;
};

/// Recovers A_i and e_j and checks the stepped-wedge invariants.
DesignLayout derive_layout(const TrialDataset& data);

struct CellSummary {
  int cluster = 0;  // 0-based
  int period = 1;
  int size = 0;
  double mean = 0.0;  // NaN for an empty cell
};

/// Weighted cluster-period means with per-row weights `row_weight`
/// (aligned with dataset rows). Empty cells get a NaN mean; use
/// `cell_means` for the I x J matrix form.
std::vector<CellSummary> cluster_period_summary(const TrialDataset& data,
                                                const Eigen::VectorXd& row_weight);

/// I x J matrix of weighted cell means (NaN where empty).
Eigen::ArrayXXd cell_means(const TrialDataset& data, const Eigen::VectorXd& row_weight);

/// I x J matrix of arithmetic cell means of an arbitrary per-row vector.
Eigen::ArrayXXd cell_average(const TrialDataset& data, const Eigen::VectorXd& values);

// --- CSV ----------------------------------------------------------------

TrialDataset load_trial_csv(const std::string& path, const CsvSchema& schema = {});
TrialDataset parse_trial_csv(std::istream& in, const CsvSchema& schema = {});

/// Writes `cluster,period,treatment,outcome,<covariates...>` using the
/// original period labels and full round-trip precision.
void write_trial_csv(const TrialDataset& data, std::ostream& out);
void write_trial_csv(const TrialDataset& data, const std::string& path);

/// 64-bit FNV-1a of a byte string, hex encoded.
std::string content_hash(std::string_view bytes);

}  // namespace swmrs
