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

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "patree/error.hpp"
#include "patree/optimizer.hpp"
#include "patree/pa_model.hpp"
#include "patree/tree_io.hpp"
#include "patree/tree_sim.hpp"

namespace patree {

struct FitResult {
  std::string method;
  Eigen::VectorXd theta_hat;
  double objective = 0.0;
  double score_norm = 0.0;  // max |score| over coordinates not pinned at a bound
  int iterations = 0;
  bool converged = false;
  std::vector<bool> at_boundary;

  bool any_boundary() const;
  std::string report(const std::vector<std::string>& names) const;
  static std::string csv_header(const std::vector<std::string>& names);
  std::string csv_row() const;
};

// Thrown when a fit does not converge; carries the best iterate.
class FitFailure : public ConvergenceError {
 public:
  FitFailure(const std::string& what, FitResult best)
      : ConvergenceError(what), best_(std::move(best)) {}
  const FitResult& best() const { return best_; }

 private:
  FitResult best_;
};

// Normalized log-likelihood of a history with the theta-free term dropped,
// with score (order >= 1) and Hessian (order >= 2). One pass over the source.
Evaluation history_likelihood(const PAFamily& family,
                              const Eigen::VectorXd& theta,
                              const HistorySource& source, int order);

double loglik(const PAFamily& family, const Eigen::VectorXd& theta,
              const GrowthHistory& history);
Eigen::VectorXd score(const PAFamily& family, const Eigen::VectorXd& theta,
                      const GrowthHistory& history);
Eigen::MatrixXd hessian(const PAFamily& family, const Eigen::VectorXd& theta,
                        const GrowthHistory& history);

// Snapshot pseudo-likelihood, with derivatives up to `order`.
Evaluation snapshot_likelihood(const PAFamily& family,
                               const Eigen::VectorXd& theta,
                               const DegreeSnapshot& snapshot, int order);

double pseudo_loglik(const PAFamily& family, const Eigen::VectorXd& theta,
                     const DegreeSnapshot& snapshot);
Eigen::VectorXd pseudo_score(const PAFamily& family,
                             const Eigen::VectorXd& theta,
                             const DegreeSnapshot& snapshot);
Eigen::MatrixXd pseudo_hessian(const PAFamily& family,
                               const Eigen::VectorXd& theta,
                               const DegreeSnapshot& snapshot);

// N_{>k}(n) / N_k(n). Throws InsufficientDataError when N_k(n) = 0.
double empirical_rk(const DegreeSnapshot& snapshot, std::int64_t k);

struct EmpiricalFit {
  Eigen::VectorXd theta;
  // Max |log f(k)/f(1) - log(r_k/r_1)| over the matched degrees.
  double residual = 0.0;
  std::vector<bool> at_boundary;
};

// Solves f(k)/f(1) = r_k/r_1 for k = 2..d+1 by damped Gauss-Newton on the
// log-ratio residual, restricted to the box. A point where no descent
// direction stays in the box is accepted and flagged.
EmpiricalFit empirical_fit_detail(const PAFamily& family,
                                  const DegreeSnapshot& snapshot);
Eigen::VectorXd empirical_fit(const PAFamily& family,
                              const DegreeSnapshot& snapshot);

// Same system with the ratios r_k/r_1 supplied directly (ratios[k] for
// k = 2..d+1; other entries unused).
EmpiricalFit solve_ratio_system(const PAFamily& family,
                                const std::vector<double>& ratios);

// sum_{k=2..d+1} |f(k)/f(1) - r_k/r_1|.
double ratio_discrepancy(const PAFamily& family, const Eigen::VectorXd& theta,
                         const DegreeSnapshot& snapshot);

// The candidate with the smallest ratio discrepancy; ties keep the earlier.
Eigen::VectorXd hybrid_select(const PAFamily& family,
                              const std::vector<Eigen::VectorXd>& candidates,
                              const DegreeSnapshot& snapshot);

struct FitOptions {
  OptimizerOptions optimizer;
  // Extra starting points tried when the first run does not converge.
  bool restart = true;
};

FitResult fit_mle(const PAFamily& family, const HistorySource& source,
                  const std::optional<Eigen::VectorXd>& init = std::nullopt,
                  const FitOptions& options = {});
FitResult fit_mle(const PAFamily& family, const GrowthHistory& history,
                  const std::optional<Eigen::VectorXd>& init = std::nullopt,
                  const FitOptions& options = {});
FitResult fit_pmle(const PAFamily& family, const DegreeSnapshot& snapshot,
                   const std::optional<Eigen::VectorXd>& init = std::nullopt,
                   const FitOptions& options = {});
// Empirical estimator packaged as a FitResult (objective = residual).
FitResult fit_ee(const PAFamily& family, const DegreeSnapshot& snapshot);

}  // namespace patree
