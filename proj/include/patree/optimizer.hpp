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

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace patree {

// Objective value with derivatives up to the requested order.
struct Evaluation {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

using Objective = std::function<Evaluation(const Eigen::VectorXd&, int order)>;

struct OptimizerOptions {
  double score_tol = 1e-8;
  int max_iter = 200;
  double armijo_c = 1e-4;
  int max_halvings = 60;
  double boundary_eps = 1e-10;
};

struct OptimizerResult {
  Eigen::VectorXd theta;
  Evaluation eval;
  // Largest gradient entry over coordinates not pinned at a bound.
  double projected_score = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<bool> at_boundary;
  std::string message;
};

// Projected Newton ascent on a box. The free set excludes coordinates sitting
// on a bound with the gradient pointing outward; on it we take a Newton step
// when -H is positive definite and a scaled gradient step otherwise, followed
// by Armijo backtracking along the projected path.
OptimizerResult maximize_in_box(const Objective& objective,
                                const Eigen::VectorXd& lower,
                                const Eigen::VectorXd& upper,
                                const Eigen::VectorXd& init,
                                const OptimizerOptions& options = {});

}  // namespace patree
