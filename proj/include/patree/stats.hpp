// Copyright 2026 The patree Authors
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

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace patree {

// Standard normal upper quantiles used by the tests.
inline constexpr double kZ005 = 1.644854;   // z_{0.05}
inline constexpr double kZ0025 = 1.959964;  // z_{0.025}

double normal_cdf(double x);
// Phi^{-1}(p). Sizes 0.05 and 0.025 return the named constants exactly.
double normal_quantile(double p);

// Counts x in [lo, hi] form the central acceptance region of a
// Binomial(trials, p) count at the given level: P(X < lo) <= (1-level)/2 and
// P(X > hi) <= (1-level)/2, with lo and hi as tight as possible.
struct CountInterval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  bool contains(std::int64_t x) const { return x >= lo && x <= hi; }
};
CountInterval binomial_acceptance(std::int64_t trials, double p,
                                  double level = 0.95);

// One-sample Kolmogorov-Smirnov distance to the standard normal.
double ks_normal_statistic(std::vector<double> sample);
// Two-sample Kolmogorov-Smirnov distance.
double ks_two_sample_statistic(std::vector<double> a, std::vector<double> b);
// Asymptotic Kolmogorov p-value with Stephens' small-sample correction;
// n_eff = n for one sample, n m / (n + m) for two.
double ks_pvalue(double statistic, double n_eff);

double correlation(const std::vector<double>& a, const std::vector<double>& b);

// Symmetric M^{-1/2} from an eigen-decomposition, eigenvalues floored.
Eigen::MatrixXd inverse_sqrt_psd(const Eigen::MatrixXd& m, double floor = 1e-12);

// Smallest eigenvalue of the symmetric part.
double min_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace patree
