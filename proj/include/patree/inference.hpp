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
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "patree/branching_limits.hpp"
#include "patree/estimators.hpp"
#include "patree/pa_model.hpp"
#include "patree/rng.hpp"
#include "patree/tree_io.hpp"

namespace patree {

// The six weighted moments of the limit law that make up the Hessian of the
// limit log-likelihood for f(k) = (k + alpha)^beta at the true parameter:
//   a = sum p f,  b = sum p f beta^2/x^2,  c = sum p f beta/x,
//   d = sum p f beta log(x)/x,  e = sum p f log x,  f = sum p f log^2 x,
// with x = k + alpha.
struct PowerOffsetMoments {
  double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;
  // -(1/a^2) [[ab - c^2, ad - ce], [ad - ce, af - e^2]]
  Eigen::Matrix2d hessian() const;
};

struct AsymptoticInfo {
  Eigen::MatrixXd V0;
  Eigen::MatrixXd V0_inv;
  Eigen::MatrixXd hessian_limit;  // general limit Hessian at theta0
  std::optional<PowerOffsetMoments> moments;
  std::int64_t truncation_K = 0;
  double truncation_error_bound = 0.0;
};

// Limit score at theta under the law of theta0:
//   sum (grad f/f)(k) p0_{>k} - sum p0_k grad f(k) / sum p0_k f(k).
// Throws TruncationError when the estimated tail contribution exceeds 1e-6.
Eigen::VectorXd limit_score(const PAFamily& family, const Eigen::VectorXd& theta,
                            const LimitLaw& law0);
// Derivative of limit_score in theta.
Eigen::MatrixXd limit_hessian(const PAFamily& family,
                              const Eigen::VectorXd& theta,
                              const LimitLaw& law0);

AsymptoticInfo fisher_V0(const PAFamily& family, const Eigen::VectorXd& theta0,
                         const LimitLaw& law0);
AsymptoticInfo fisher_V0(const PAFamily& family, const Eigen::VectorXd& theta0);

struct WaldReport {
  double statistic = 0.0;
  double critical_value = 0.0;
  double size = 0.05;
  bool two_sided = false;
  bool reject = false;
  double variance_entry = 0.0;

  std::string report() const;
  static std::string csv_header();
  std::string csv_row() const;
};

// Affinity test for f(k) = (k + alpha)^beta: T = sqrt(n)(beta_hat - 1) /
// sqrt((V^{-1})_{22}) with V evaluated at (alpha_hat, 1). Left-tailed:
// rejects when T < Phi^{-1}(size).
WaldReport wald_affinity(double alpha_hat, double beta_hat, std::int64_t n,
                         double size = 0.05);
WaldReport wald_affinity(const FitResult& fit, std::int64_t n,
                         double size = 0.05);

// Where alpha is taken for the variance plug-in. kConstrained refits alpha
// with beta fixed at 1 on the same history; it is asymptotically independent
// of beta_hat, which keeps the finite-n size closer to nominal.
enum class WaldPlugin { kConstrained, kUnconstrained };

// Full test from a history: MLE of (alpha, beta) for f(k) = (k + alpha)^beta,
// then T with V at (alpha_plugin, 1).
WaldReport wald_affinity(const HistorySource& source, WaldPlugin plugin,
                         double size = 0.05);
WaldReport wald_affinity(const GrowthHistory& history, WaldPlugin plugin,
                         double size = 0.05);

// Draw of W 1{W <= 0}, W ~ N(0, a^T V0^{-1} V V0^{-1} a).
double boundary_limit_sample(const Eigen::VectorXd& a, const Eigen::MatrixXd& V,
                             const Eigen::MatrixXd& V0, Rng& rng);
double boundary_limit_sample(const Eigen::VectorXd& a, const Eigen::MatrixXd& V,
                             const Eigen::MatrixXd& V0, std::uint64_t seed);

struct BootstrapVariance {
  Eigen::MatrixXd sigma_tilde;
  std::int64_t m = 0;
  std::int64_t s = 0;       // replicates requested
  std::int64_t used = 0;    // replicates whose fit converged
  std::uint64_t seeds_digest = 0;
  std::vector<Eigen::VectorXd> estimates;

  std::string report(const std::vector<std::string>& names) const;
};

// m * (mean of theta theta^T - mean theta mean theta^T).
Eigen::MatrixXd bootstrap_covariance(const std::vector<Eigen::VectorXd>& estimates,
                                     double m);

// Simulates s trees of m nodes under f at theta_tilde, fits the pseudo-MLE to
// each and returns the scaled scatter. Replicates whose fit fails are
// dropped; more than 10% dropped raises ConvergenceError.
BootstrapVariance bootstrap_variance(const PAFamily& family,
                                     const Eigen::VectorXd& theta_tilde,
                                     std::int64_t m, std::int64_t s,
                                     std::uint64_t seed, int workers = 1);

// Two-sided test of theta_c = null_value: |T| > z_{size/2} with
// T = sqrt(n)(theta_c - null_value) / sqrt(sigma_cc).
WaldReport bootstrap_wald(const Eigen::VectorXd& theta_tilde,
                          const Eigen::MatrixXd& sigma_tilde, int coordinate,
                          double null_value, std::int64_t n, double size = 0.05);

}  // namespace patree
