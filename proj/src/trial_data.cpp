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

#include "swmrs/trial_data.hpp"

#include "swmrs/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace swmrs {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonNumericValue: return "NonNumericValue";
    case ErrorKind::MixedTreatmentWithinCell: return "MixedTreatmentWithinCell";
    case ErrorKind::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorKind::NoRolloutPeriod: return "NoRolloutPeriod";
    case ErrorKind::BaselineTreated: return "BaselineTreated";
    case ErrorKind::FinalPeriodUntreated: return "FinalPeriodUntreated";
    case ErrorKind::EmptyCell: return "EmptyCell";
    case ErrorKind::ZeroClusterTotal: return "ZeroClusterTotal";
    case ErrorKind::EmptyArmInPeriod: return "EmptyArmInPeriod";
    case ErrorKind::ScaleDomainError: return "ScaleDomainError";
    case ErrorKind::InvalidModelSpec: return "InvalidModelSpec";
    case ErrorKind::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorKind::OptimizerNonConvergence: return "OptimizerNonConvergence";
    case ErrorKind::IRLSNonConvergence: return "IRLSNonConvergence";
    case ErrorKind::SeparationDetected: return "SeparationDetected";
    case ErrorKind::InnerNewtonDivergence: return "InnerNewtonDivergence";
    case ErrorKind::PeriodOutOfRange: return "PeriodOutOfRange";
    case ErrorKind::UnfittedModel: return "UnfittedModel";
    case ErrorKind::PredictionMissing: return "PredictionMissing";
    case ErrorKind::LocoDegenerate: return "LocoDegenerate";
    case ErrorKind::SingularContrastCovariance: return "SingularContrastCovariance";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

bool is_convergence_error(ErrorKind kind) {
  return kind == ErrorKind::OptimizerNonConvergence || kind == ErrorKind::IRLSNonConvergence ||
         kind == ErrorKind::InnerNewtonDivergence || kind == ErrorKind::SeparationDetected;
}

namespace {

std::vector<std::string> default_period_labels(int J) {
  std::vector<std::string> labels;
  for (int j = 1; j <= J; ++j) labels.push_back(std::to_string(j));
  return labels;
}

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && issp(s.back())) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && issp(s[b])) ++b;
  return s.substr(b);
}

// RFC 4180-ish: quoted fields, doubled quotes inside quotes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

// Maps raw period labels to 1..J. Integer labels sort numerically, anything
// else lexicographically.
std::vector<int> map_periods(const std::vector<std::string>& raw,
                             std::vector<std::string>& labels_out) {
  std::vector<std::string> distinct = raw;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  bool all_int = true;
  std::map<std::string, long long> as_int;
  for (const auto& s : distinct) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      all_int = false;
      break;
    }
    as_int[s] = v;
  }
  if (all_int) {
    std::sort(distinct.begin(), distinct.end(),
              [&](const std::string& a, const std::string& b) { return as_int[a] < as_int[b]; });
  }
  std::unordered_map<std::string, int> index;
  for (std::size_t j = 0; j < distinct.size(); ++j) index[distinct[j]] = static_cast<int>(j) + 1;
  labels_out = distinct;
  std::vector<int> out;
  out.reserve(raw.size());
  for (const auto& s : raw) out.push_back(index[s]);
  return out;
}

}  // namespace

TrialDataset::TrialDataset(std::vector<IndividualRecord> records,
                           std::vector<std::string> covariate_names) {
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> cluster_of;
  std::vector<int> cidx, per, trt;
  std::vector<std::string> raw_period;
  const auto p = covariate_names.size();
  Eigen::VectorXd y(static_cast<Eigen::Index>(records.size()));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto it = cluster_of.find(rec.cluster);
    if (it == cluster_of.end()) {
      it = cluster_of.emplace(rec.cluster, static_cast<int>(labels.size())).first;
      labels.push_back(rec.cluster);
    }
    if (rec.covariates.size() != p) {
      throw Error(ErrorKind::InvalidArgument, "record has wrong number of covariates",
                  {{"row", std::to_string(r)}});
    }
    cidx.push_back(it->second);
    raw_period.push_back(std::to_string(rec.period));
    trt.push_back(rec.treatment);
    y(static_cast<Eigen::Index>(r)) = rec.outcome;
    for (std::size_t c = 0; c < p; ++c)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rec.covariates[c];
  }
  std::vector<std::string> plabels;
  per = map_periods(raw_period, plabels);
  *this = from_columns(std::move(labels), static_cast<int>(plabels.size()), std::move(cidx),
                       std::move(per), std::move(trt), std::move(y), std::move(x),
                       std::move(covariate_names));
  period_labels_ = std::move(plabels);
}

TrialDataset TrialDataset::from_columns(std::vector<std::string> cluster_labels, int num_periods,
                                        std::vector<int> cluster_index, std::vector<int> period,
                                        std::vector<int> treatment, Eigen::VectorXd outcome,
                                        Eigen::MatrixXd covariates,
                                        std::vector<std::string> covariate_names,
                                        std::optional<PotentialOutcomes> potential) {
  const auto n = cluster_index.size();
  if (period.size() != n || treatment.size() != n || static_cast<std::size_t>(outcome.size()) != n ||
      static_cast<std::size_t>(covariates.rows()) != n ||
      static_cast<std::size_t>(covariates.cols()) != covariate_names.size()) {
    throw Error(ErrorKind::InvalidArgument, "column lengths disagree");
  }
  const int I = static_cast<int>(cluster_labels.size());
  for (std::size_t r = 0; r < n; ++r) {
    if (cluster_index[r] < 0 || cluster_index[r] >= I)
      throw Error(ErrorKind::InvalidArgument, "cluster index out of range", {{"row", std::to_string(r)}});
    if (period[r] < 1 || period[r] > num_periods)
      throw Error(ErrorKind::InvalidArgument, "period out of range", {{"row", std::to_string(r)}});
    if (treatment[r] != 0 && treatment[r] != 1)
      throw Error(ErrorKind::NonNumericValue, "treatment must be 0 or 1",
                  {{"row", std::to_string(r)}, {"column", "treatment"}});
  }

  // stable sort rows by (cluster, period)
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cluster_index[a] != cluster_index[b]) return cluster_index[a] < cluster_index[b];
    return period[a] < period[b];
  });

  TrialDataset d;
  d.cluster_labels_ = std::move(cluster_labels);
  d.num_periods_ = num_periods;
  d.period_labels_ = default_period_labels(num_periods);
  d.covariate_names_ = std::move(covariate_names);
  d.cluster_index_.resize(n);
  d.period_.resize(n);
  d.treatment_.resize(n);
  d.outcome_.resize(static_cast<Eigen::Index>(n));
  d.covariates_.resize(static_cast<Eigen::Index>(n), covariates.cols());
  if (potential) {
    d.potential_ = PotentialOutcomes{Eigen::VectorXd(static_cast<Eigen::Index>(n)),
                                     Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto s = order[r];
    const auto ri = static_cast<Eigen::Index>(r), si = static_cast<Eigen::Index>(s);
    d.cluster_index_[r] = cluster_index[s];
    d.period_[r] = period[s];
    d.treatment_[r] = treatment[s];
    d.outcome_(ri) = outcome(si);
    d.covariates_.row(ri) = covariates.row(si);
    if (potential) {
      d.potential_->y0(ri) = potential->y0(si);
      d.potential_->y1(ri) = potential->y1(si);
    }
  }
  d.build_index();
  return d;
}

void TrialDataset::build_index() {
  const int I = num_clusters(), J = num_periods_;
  cell_size_ = Eigen::ArrayXXi::Zero(I, J);
  cell_treatment_ = Eigen::ArrayXXi::Constant(I, J, -1);
  cell_offset_.assign(static_cast<std::size_t>(I) * J + 1, 0);
  const auto n = cluster_index_.size();
  for (std::size_t r = 0; r < n; ++r) {
    const int i = cluster_index_[r], j = period_[r];
    cell_size_(i, j - 1) += 1;
    int& t = cell_treatment_(i, j - 1);
    if (t == -1) {
      t = treatment_[r];
    } else if (t != treatment_[r]) {
      throw Error(ErrorKind::MixedTreatmentWithinCell, "treatment differs within a cluster-period cell",
                  {{"cluster", cluster_labels_[static_cast<std::size_t>(i)]}, {"period", std::to_string(j)}});
    }
  }
  for (int i = 0; i < I; ++i)
    for (int j = 1; j <= J; ++j)
      cell_offset_[cell_key(i, j) + 1] = cell_offset_[cell_key(i, j)] + cell_size_(i, j - 1);
}

int TrialDataset::covariate_column(const std::string& name) const {
  for (std::size_t c = 0; c < covariate_names_.size(); ++c)
    if (covariate_names_[c] == name) return static_cast<int>(c);
  return -1;
}

TrialDataset TrialDataset::without_cluster(int g) const {
  if (g < 0 || g >= num_clusters()) throw Error(ErrorKind::InvalidArgument, "cluster index out of range");
  const Eigen::Index b = cell_begin(g, 1), e = cell_end(g, num_periods_);
  const Eigen::Index n = num_rows(), m = n - (e - b);
  TrialDataset d;
  d.cluster_labels_ = cluster_labels_;
  d.cluster_labels_.erase(d.cluster_labels_.begin() + g);
  d.period_labels_ = period_labels_;
  d.covariate_names_ = covariate_names_;
  d.num_periods_ = num_periods_;
  d.cluster_index_.reserve(static_cast<std::size_t>(m));
  d.period_.reserve(static_cast<std::size_t>(m));
  d.treatment_.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < n; ++r) {
    if (r >= b && r < e) continue;
    const auto rr = static_cast<std::size_t>(r);
    d.cluster_index_.push_back(cluster_index_[rr] > g ? cluster_index_[rr] - 1 : cluster_index_[rr]);
    d.period_.push_back(period_[rr]);
    d.treatment_.push_back(treatment_[rr]);
  }
  auto cut = [&](const auto& v) {
    std::decay_t<decltype(v)> out(m, v.cols());
    out.topRows(b) = v.topRows(b);
    out.bottomRows(n - e) = v.bottomRows(n - e);
    return out;
  };
  d.outcome_.resize(m);
  d.outcome_.head(b) = outcome_.head(b);
  d.outcome_.tail(n - e) = outcome_.tail(n - e);
  d.covariates_ = cut(covariates_);
  if (potential_) {
    PotentialOutcomes po;
    po.y0.resize(m);
    po.y1.resize(m);
    po.y0.head(b) = potential_->y0.head(b);
    po.y0.tail(n - e) = potential_->y0.tail(n - e);
    po.y1.head(b) = potential_->y1.head(b);
    po.y1.tail(n - e) = potential_->y1.tail(n - e);
    d.potential_ = std::move(po);
  }
  d.build_index();
  return d;
}

TrialDataset TrialDataset::with_affine_outcome(double a, double b) const {
  TrialDataset d = *this;
  d.outcome_ = (a * outcome_.array() + b).matrix();
  if (d.potential_) {
    d.potential_->y0 = (a * potential_->y0.array() + b).matrix();
    d.potential_->y1 = (a * potential_->y1.array() + b).matrix();
  }
  return d;
}

TrialDataset TrialDataset::with_outcome(Eigen::VectorXd outcome) const {
  if (outcome.size() != num_rows()) throw Error(ErrorKind::InvalidArgument, "outcome length mismatch");
  TrialDataset d = *this;
  d.outcome_ = std::move(outcome);
  d.potential_.reset();
  return d;
}

std::vector<IndividualRecord> TrialDataset::records() const {
  std::vector<IndividualRecord> out;
  out.reserve(static_cast<std::size_t>(num_rows()));
  for (Eigen::Index r = 0; r < num_rows(); ++r) {
    const auto rr = static_cast<std::size_t>(r);
    IndividualRecord rec;
    rec.cluster = cluster_labels_[static_cast<std::size_t>(cluster_index_[rr])];
    rec.period = period_[rr];
    rec.treatment = treatment_[rr];
    rec.outcome = outcome_(r);
    for (Eigen::Index c = 0; c < covariates_.cols(); ++c) rec.covariates.push_back(covariates_(r, c));
    out.push_back(std::move(rec));
  }
  return out;
}

bool TrialDataset::operator==(const TrialDataset& o) const {
  return cluster_labels_ == o.cluster_labels_ && period_labels_ == o.period_labels_ &&
         covariate_names_ == o.covariate_names_ && num_periods_ == o.num_periods_ &&
         cluster_index_ == o.cluster_index_ && period_ == o.period_ && treatment_ == o.treatment_ &&
         outcome_ == o.outcome_ && covariates_ == o.covariates_;
}

DesignLayout derive_layout(const TrialDataset& data) {
  const int I = data.num_clusters(), J = data.num_periods();
  const auto& label = data.cluster_labels();
  if (J < 3) {
    throw Error(ErrorKind::NoRolloutPeriod, "a stepped-wedge design needs at least 3 periods",
                {{"periods", std::to_string(J)}});
  }
  DesignLayout out;
  out.adoption_time.assign(static_cast<std::size_t>(I), 0);
  out.cluster_period_size = data.cell_size();
  for (int i = 0; i < I; ++i) {
    int adopt = 0;
    for (int j = 1; j <= J; ++j) {
      const int z = data.cell_treatment(i, j);
      if (z < 0) continue;  // empty cell carries no information
      if (z == 1 && adopt == 0) adopt = j;
      if (z == 0 && adopt != 0) {
        throw Error(ErrorKind::MonotonicityViolation, "cluster returns to control after adoption",
                    {{"cluster", label[static_cast<std::size_t>(i)]}, {"period", std::to_string(j)}});
      }
    }
    if (adopt == 1 || (data.cell_treatment(i, 1) == 1)) {
      throw Error(ErrorKind::BaselineTreated, "cluster is treated in the baseline period",
                  {{"cluster", label[static_cast<std::size_t>(i)]}});
    }
    if (adopt == 0) {
      throw Error(ErrorKind::FinalPeriodUntreated, "cluster is never treated",
                  {{"cluster", label[static_cast<std::size_t>(i)]}});
    }
    out.adoption_time[static_cast<std::size_t>(i)] = adopt;
  }
  out.treated_count = Eigen::VectorXi::Zero(J);
  for (int a : out.adoption_time)
    for (int j = a; j <= J; ++j) out.treated_count(j - 1) += 1;
  out.propensity = out.treated_count.cast<double>() / static_cast<double>(I);
  for (int j = 2; j <= J - 1; ++j) {
    const int c = out.treated_count(j - 1);
    if (c == 0 || c == I) {
      throw Error(ErrorKind::NoRolloutPeriod, "rollout period has only one arm",
                  {{"period", std::to_string(j)}, {"treated", std::to_string(c)}});
    }
  }
  return out;
}

Eigen::ArrayXXd cell_means(const TrialDataset& data, const Eigen::VectorXd& row_weight) {
  const int I = data.num_clusters(), J = data.num_periods();
  Eigen::ArrayXXd out(I, J);
  const auto& y = data.outcome();
  for (int i = 0; i < I; ++i) {
    for (int j = 1; j <= J; ++j) {
      const auto b = data.cell_begin(i, j), e = data.cell_end(i, j);
      if (b == e) {
        out(i, j - 1) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double sw = 0.0, swy = 0.0;
      for (auto r = b; r < e; ++r) {
        sw += row_weight(r);
        swy += row_weight(r) * y(r);
      }
      out(i, j - 1) = swy / sw;
    }
  }
  return out;
}

Eigen::ArrayXXd cell_average(const TrialDataset& data, const Eigen::VectorXd& values) {
  const int I = data.num_clusters(), J = data.num_periods();
  Eigen::ArrayXXd out(I, J);
  for (int i = 0; i < I; ++i) {
    for (int j = 1; j <= J; ++j) {
      const auto b = data.cell_begin(i, j), e = data.cell_end(i, j);
      out(i, j - 1) = b == e ? std::numeric_limits<double>::quiet_NaN()
                             : values.segment(b, e - b).mean();
    }
  }
  return out;
}

std::vector<CellSummary> cluster_period_summary(const TrialDataset& data,
                                                const Eigen::VectorXd& row_weight) {
  const Eigen::ArrayXXd m = cell_means(data, row_weight);
  std::vector<CellSummary> out;
  for (int i = 0; i < data.num_clusters(); ++i)
    for (int j = 1; j <= data.num_periods(); ++j)
      out.push_back({i, j, data.cell_size()(i, j - 1), m(i, j - 1)});
  return out;
}

TrialDataset parse_trial_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty CSV input");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  auto find = [&](const std::string& name) -> int {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return static_cast<int>(c);
    return -1;
  };
  auto require = [&](const std::string& name) {
    int c = find(name);
    if (c < 0) throw Error(ErrorKind::MissingColumn, "required column not found", {{"column", name}});
    return c;
  };
  const int c_cluster = require(schema.cluster), c_period = require(schema.period),
            c_trt = require(schema.treatment), c_y = require(schema.outcome);
  std::vector<std::string> cov_names;
  std::vector<int> cov_cols;
  if (schema.covariates) {
    for (const auto& name : *schema.covariates) {
      cov_names.push_back(name);
      cov_cols.push_back(require(name));
    }
  } else {
    for (std::size_t c = 0; c < header.size(); ++c) {
      const int ci = static_cast<int>(c);
      if (ci == c_cluster || ci == c_period || ci == c_trt || ci == c_y) continue;
      cov_names.push_back(header[c]);
      cov_cols.push_back(ci);
    }
  }

  std::vector<std::string> labels, raw_period;
  std::unordered_map<std::string, int> cluster_of;
  std::vector<int> cidx, trt;
  std::vector<double> y, x;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < header.size()) {
      throw Error(ErrorKind::NonNumericValue, "row has too few fields",
                  {{"row", std::to_string(row)}, {"column", header[f.size()]}});
    }
    auto num = [&](int c) {
      double v = 0;
      if (!parse_double(f[static_cast<std::size_t>(c)], v)) {
        throw Error(ErrorKind::NonNumericValue, "value is not numeric",
                    {{"row", std::to_string(row)},
                     {"column", header[static_cast<std::size_t>(c)]},
                     {"value", f[static_cast<std::size_t>(c)]}});
      }
      return v;
    };
    const std::string& cl = f[static_cast<std::size_t>(c_cluster)];
    auto it = cluster_of.find(cl);
    if (it == cluster_of.end()) {
      it = cluster_of.emplace(cl, static_cast<int>(labels.size())).first;
      labels.push_back(cl);
    }
    cidx.push_back(it->second);
    raw_period.push_back(f[static_cast<std::size_t>(c_period)]);
    const double z = num(c_trt);
    if (z != 0.0 && z != 1.0) {
      throw Error(ErrorKind::NonNumericValue, "treatment must be 0 or 1",
                  {{"row", std::to_string(row)}, {"column", schema.treatment}});
    }
    trt.push_back(static_cast<int>(z));
    y.push_back(num(c_y));
    for (int c : cov_cols) x.push_back(num(c));
  }
  std::vector<std::string> plabels;
  auto per = map_periods(raw_period, plabels);
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto p = static_cast<Eigen::Index>(cov_cols.size());
  Eigen::MatrixXd X = p == 0 ? Eigen::MatrixXd(n, 0)
                             : Eigen::MatrixXd(Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                                        Eigen::RowMajor>>(x.data(), n, p));
  auto d = TrialDataset::from_columns(std::move(labels), static_cast<int>(plabels.size()), std::move(cidx),
                                      std::move(per), std::move(trt),
                                      Eigen::Map<Eigen::VectorXd>(y.data(), n), std::move(X),
                                      std::move(cov_names));
  return d.with_period_labels(std::move(plabels));
}

TrialDataset TrialDataset::with_period_labels(std::vector<std::string> labels) const {
  if (static_cast<int>(labels.size()) != num_periods_)
    throw Error(ErrorKind::InvalidArgument, "period label count mismatch");
  TrialDataset d = *this;
  d.period_labels_ = std::move(labels);
  return d;
}

TrialDataset load_trial_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open input file", {{"path", path}});
  return parse_trial_csv(in, schema);
}

void write_trial_csv(const TrialDataset& data, std::ostream& out) {
  out << "cluster,period,treatment,outcome";
  for (const auto& c : data.covariate_names()) out << ',' << csv_quote(c);
  out << '\n';
  const auto& X = data.covariates();
  for (Eigen::Index r = 0; r < data.num_rows(); ++r) {
    const auto rr = static_cast<std::size_t>(r);
    out << csv_quote(data.cluster_labels()[static_cast<std::size_t>(data.cluster_index()[rr])]) << ','
        << csv_quote(data.period_labels()[static_cast<std::size_t>(data.period()[rr] - 1)]) << ','
        << data.treatment()[rr] << ',' << format_double(data.outcome()(r));
    for (Eigen::Index c = 0; c < X.cols(); ++c) out << ',' << format_double(X(r, c));
    out << '\n';
  }
}

void write_trial_csv(const TrialDataset& data, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorKind::Io, "cannot open output file", {{"path", path}});
    write_trial_csv(data, out);
    if (!out) throw Error(ErrorKind::Io, "write failed", {{"path", path}});
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error(ErrorKind::Io, "cannot move output into place", {{"path", path}});
}

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace swmrs
