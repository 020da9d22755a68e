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
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "patree/estimators.hpp"
#include "patree/inference.hpp"
#include "patree/pa_model.hpp"
#include "patree/stats.hpp"

namespace patree {

enum class Estimator { kMle, kPmle, kEe };
std::string_view estimator_name(Estimator e);
Estimator parse_estimator(std::string_view name);

// Simulates one tree of n nodes under the family's reference parameter from
// rng and fits it with the chosen estimator. Fit failures propagate.
FitResult simulate_and_fit(const PAFamily& family, const Eigen::VectorXd& theta0,
                           std::int64_t n, Estimator estimator, Rng& rng);

struct MCConfig {
  PAFamily family = PAFamily::power_offset(0.0, 2.0 / 3.0);
  Eigen::VectorXd theta0;  // empty: family reference
  std::int64_t n = 10000;
  std::int64_t reps = 200;
  Estimator estimator = Estimator::kMle;
  std::uint64_t seed = 1;
  int workers = 0;
  bool reference = true;  // attach V0^{-1} when it can be computed
};

struct MCStatistics {
  Eigen::VectorXd sample_mean_diff;  // (1/N) sum (theta_i - theta0)
  Eigen::MatrixXd rescaled_cov;      // (n/N) sum (theta_i - theta0)(...)^T
};
MCStatistics mc_statistics(const std::vector<Eigen::VectorXd>& estimates,
                           const Eigen::VectorXd& theta0, std::int64_t n);

struct MCReport {
  std::string family;
  std::vector<std::string> names;
  Eigen::VectorXd theta0;
  std::int64_t n = 0;
  std::int64_t reps = 0;
  Estimator estimator = Estimator::kMle;
  Eigen::VectorXd sample_mean_diff;
  Eigen::MatrixXd rescaled_cov;
  std::optional<Eigen::MatrixXd> reference;
  // Converged replicates in replicate order, with their indices.
  std::vector<Eigen::VectorXd> estimates;
  std::vector<std::int64_t> replicate;
  std::int64_t failures = 0;
  std::int64_t boundary = 0;
  bool failed = false;  // more than 5% of fits failed
  std::string report() const;
  // Per-replicate estimates.
  std::string csv() const;
};

// Replicate i uses Rng::stream(seed, i), so results do not depend on the
// worker count.
MCReport run_mc(const MCConfig& config);

struct QQPoint {
  double normal = 0.0;  // Phi^{-1}((i - 0.5) / N)
  double value = 0.0;   // (x_(i) - center) / reference_sd
};
std::vector<QQPoint> emit_qq(const std::vector<double>& estimates,
                             double reference_sd, double center = 0.0);
void write_qq(std::ostream& out, const std::vector<QQPoint>& points);
// Correlation of the two columns.
double qq_correlation(const std::vector<QQPoint>& points);

struct WaldMCConfig {
  PAFamily family = PAFamily::power_offset(2.0, 1.0);
  Eigen::VectorXd theta0;
  std::int64_t n = 100000;
  std::int64_t reps = 200;
  double size = 0.05;
  WaldPlugin plugin = WaldPlugin::kConstrained;
  std::uint64_t seed = 1;
  int workers = 0;
};

struct WaldMCResult {
  std::vector<double> statistics;  // converged replicates, replicate order
  std::int64_t reps = 0;
  std::int64_t rejections = 0;
  std::int64_t failures = 0;
  double size = 0.05;
  double proportion() const;
  // 95% acceptance region of the rejection count under rate `size`.
  CountInterval acceptance() const;
  std::string report() const;
};

// Affinity test on MLE fits of (alpha, beta) over simulated trees.
WaldMCResult run_wald_mc(const WaldMCConfig& config);

struct BootstrapMCConfig {
  PAFamily family = PAFamily::power_offset(0.0, 2.0 / 3.0);
  Eigen::VectorXd theta0;
  std::int64_t n = 10000;
  std::int64_t m = 10000;
  std::int64_t s = 200;
  std::int64_t reps = 200;
  double size = 0.05;
  std::uint64_t seed = 1;
  int workers = 0;
  // Projected experiment: centre theta_tilde at theta0 (true) or use it as is.
  bool center = true;
};

// Bootstrap Wald tests of theta_c = theta0_c for every coordinate c. The
// bootstrap family has coordinate c set to its null value and the others at
// the pseudo-MLE.
struct BootstrapWaldResult {
  std::vector<std::string> names;
  std::vector<std::vector<double>> statistics;  // per coordinate
  std::vector<std::int64_t> rejections;
  std::int64_t reps = 0;
  std::int64_t used = 0;
  double size = 0.05;
  double rate(int coordinate) const;
  std::string report() const;
};
BootstrapWaldResult run_bootstrap_wald_mc(const BootstrapMCConfig& config);

// d = r^T sqrt(n) Sigma^{-1/2} (theta_tilde - theta0) with r uniform on the
// unit circle (unit sphere in d dimensions) and Sigma bootstrapped at
// theta_tilde. Replicates with a non-positive-definite Sigma are dropped.
struct ProjectedBootstrapResult {
  std::vector<double> d;
  std::int64_t dropped = 0;
  std::vector<QQPoint> qq;
  double ks = 0.0;
};
ProjectedBootstrapResult run_projected_bootstrap_qq(const BootstrapMCConfig& config);

}  // namespace patree
