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

namespace swmrs {

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Two-sided P(|T| >= |t|) for Student t with df degrees of freedom.
double t_two_sided_p(double t, double df);
/// P(T <= t).
double t_cdf(double t, double df);
/// Quantile of Student t.
double t_quantile(double p, double df);

/// Upper tail P(F >= f) for F(d1, d2).
double f_upper_tail(double f, double d1, double d2);

}  // namespace swmrs
