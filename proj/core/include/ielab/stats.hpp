// Copyright 2026 The ielab Authors.
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

#ifndef IELAB_STATS_HPP_
#define IELAB_STATS_HPP_

#include <span>

namespace ielab {

double mean(std::span<const double> xs);
// Population standard deviation (divides by n).
double population_std(std::span<const double> xs);
// Sample standard deviation (divides by n - 1).
double sample_std(std::span<const double> xs);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  int df = 0;
};

// Paired t-test on d = a - b with k - 1 degrees of freedom. A constant d gives
// t = 0, p = 1 when it is zero and p = 0 otherwise (t = +-inf).
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees.
double student_t_two_sided(double t, double df);

}  // namespace ielab

#endif  // IELAB_STATS_HPP_
