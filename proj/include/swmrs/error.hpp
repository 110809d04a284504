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

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace swmrs {

enum class ErrorKind {
  // data ingestion / layout
  MissingColumn,
  NonNumericValue,
  MixedTreatmentWithinCell,
  MonotonicityViolation,
  NoRolloutPeriod,
  BaselineTreated,
  FinalPeriodUntreated,
  EmptyCell,
  // estimands
  ZeroClusterTotal,
  EmptyArmInPeriod,
  ScaleDomainError,
  // working models
  InvalidModelSpec,
  RankDeficientDesign,
  OptimizerNonConvergence,
  IRLSNonConvergence,
  SeparationDetected,
  InnerNewtonDivergence,
  PeriodOutOfRange,
  UnfittedModel,
  PredictionMissing,
  // inference
  LocoDegenerate,
  SingularContrastCovariance,
  // plumbing
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Nonconvergence kinds map to CLI exit code 3, everything else to 2.
bool is_convergence_error(ErrorKind kind);

/// Every failure in the library is reported as an Error carrying a kind
/// and a flat set of structured details (cluster, period, column, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::map<std::string, std::string> details = {})
      : std::runtime_error(message), kind_(kind), details_(std::move(details)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::map<std::string, std::string>& details() const noexcept {
    return details_;
  }

 private:
  ErrorKind kind_;
  std::map<std::string, std::string> details_;
};

}  // namespace swmrs
