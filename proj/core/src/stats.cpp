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

#include "ielab/stats.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ielab/error.hpp"

namespace ielab {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw DimensionError("mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

namespace {

double sum_sq_dev(std::span<const double> xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s;
}

}  // namespace

double population_std(std::span<const double> xs) {
  return std::sqrt(sum_sq_dev(xs) / static_cast<double>(xs.size()));
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) throw DimensionError("sample std needs at least two values");
  return std::sqrt(sum_sq_dev(xs) / static_cast<double>(xs.size() - 1));
}

double student_t_two_sided(double t, double df) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("paired_t_test: samples of length " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  if (a.size() < 2) throw DimensionError("paired_t_test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  TTestResult r;
  r.df = static_cast<int>(d.size()) - 1;
  const double m = mean(d);
  const double sd = sample_std(d);
  if (sd == 0.0) {
    if (m == 0.0) return r;
    r.t = std::copysign(std::numeric_limits<double>::infinity(), m);
    r.p = 0.0;
    return r;
  }
  r.t = m / (sd / std::sqrt(static_cast<double>(d.size())));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

}  // namespace ielab
