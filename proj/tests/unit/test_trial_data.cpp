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

#include "swmrs/error.hpp"
#include "swmrs/trial_data.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <sstream>

using namespace swmrs;

namespace {

ErrorKind kind_of(const std::string& csv, const CsvSchema& schema = {}) {
  std::istringstream in(csv);
  try {
    derive_layout(parse_trial_csv(in, schema));
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

const char* kGood =
    "cluster,period,treatment,outcome,age\n"
    "a,1,0,1.0,30\n"
    "a,2,1,2.0,31\n"
    "a,3,1,2.5,32\n"
    "b,1,0,0.5,40\n"
    "b,2,0,0.7,41\n"
    "b,3,1,1.9,42\n"
    "b,3,1,2.1,43\n";

}  // namespace

TEST_CASE("csv round trip keeps rows and layout") {
  std::istringstream in(kGood);
  const TrialDataset d = parse_trial_csv(in);
  CHECK(d.num_clusters() == 2);
  CHECK(d.num_periods() == 3);
  CHECK(d.num_rows() == 7);
  CHECK(d.covariate_names() == std::vector<std::string>{"age"});
  CHECK(d.cell_size()(1, 2) == 2);

  const DesignLayout lay = derive_layout(d);
  CHECK(lay.adoption_time == std::vector<int>{2, 3});
  CHECK(lay.treated_count(1) == 1);
  CHECK(lay.propensity(1) == doctest::Approx(0.5));

  std::ostringstream out;
  write_trial_csv(d, out);
  std::istringstream back(out.str());
  CHECK(parse_trial_csv(back) == d);
}

TEST_CASE("explicit covariate list restricts columns") {
  CsvSchema s;
  s.covariates = std::vector<std::string>{};
  std::istringstream in(kGood);
  CHECK(parse_trial_csv(in, s).covariates().cols() == 0);
}

TEST_CASE("period labels are ordered numerically") {
  std::istringstream in(
      "cluster,period,treatment,outcome\n"
      "a,10,0,1\na,2,0,1\na,30,1,1\nb,2,0,1\nb,10,1,1\nb,30,1,1\n");
  const TrialDataset d = parse_trial_csv(in);
  CHECK(d.period_labels() == std::vector<std::string>{"2", "10", "30"});
  CHECK(derive_layout(d).adoption_time == std::vector<int>{3, 2});
}

TEST_CASE("ingestion errors carry their kind") {
  CHECK(kind_of("cluster,period,treatment\na,1,0\n") == ErrorKind::MissingColumn);
  CHECK(kind_of("cluster,period,treatment,outcome\na,1,0,abc\n") == ErrorKind::NonNumericValue);
  CHECK(kind_of("cluster,period,treatment,outcome\na,1,2,1\n") == ErrorKind::NonNumericValue);
  CHECK(kind_of("cluster,period,treatment,outcome\n"
                "a,1,0,1\na,2,0,1\na,2,1,1\na,3,1,1\nb,1,0,1\nb,2,0,1\nb,3,1,1\n") ==
        ErrorKind::MixedTreatmentWithinCell);
  CHECK(kind_of("cluster,period,treatment,outcome\n"
                "a,1,0,1\na,2,1,1\na,3,0,1\nb,1,0,1\nb,2,0,1\nb,3,1,1\n") == ErrorKind::MonotonicityViolation);
  CHECK(kind_of("cluster,period,treatment,outcome\n"
                "a,1,1,1\na,2,1,1\na,3,1,1\nb,1,0,1\nb,2,0,1\nb,3,1,1\n") == ErrorKind::BaselineTreated);
  CHECK(kind_of("cluster,period,treatment,outcome\n"
                "a,1,0,1\na,2,1,1\na,3,1,1\nb,1,0,1\nb,2,0,1\nb,3,0,1\n") == ErrorKind::FinalPeriodUntreated);
  CHECK(kind_of("cluster,period,treatment,outcome\na,1,0,1\na,2,1,1\nb,1,0,1\nb,2,1,1\n") ==
        ErrorKind::NoRolloutPeriod);
  CsvSchema s;
  s.outcome = "y";
  CHECK(kind_of(kGood, s) == ErrorKind::MissingColumn);
}

TEST_CASE("without_cluster matches a row-by-row rebuild") {
  std::mt19937_64 rng(7);
  const TrialDataset d = fixtures::random_trial(rng, {});
  for (int g = 0; g < d.num_clusters(); ++g) {
    const TrialDataset a = d.without_cluster(g), b = fixtures::drop_cluster(d, g);
    CHECK(a.num_rows() == b.num_rows());
    CHECK((a.outcome() - b.outcome()).norm() == 0.0);
    CHECK((a.cell_size() == b.cell_size()).all());
  }
}

TEST_CASE("content hash is stable and sensitive") {
  CHECK(content_hash("abc") == content_hash("abc"));
  CHECK(content_hash("abc") != content_hash("abd"));
}
