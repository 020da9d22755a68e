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


#include "patree/optimizer.hpp"

#include <cmath>
#include <limits>

#include "patree/error.hpp"

namespace patree {
namespace {

std::vector<bool> pinned(const Eigen::VectorXd& theta, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, double eps) {
  std::vector<bool> out(theta.size(), false);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    out[i] = (theta[i] - lower[i] <= eps && g[i] < 0.0) ||
             (upper[i] - theta[i] <= eps && g[i] > 0.0);
  }
  return out;
}

}  // namespace

OptimizerResult maximize_in_box(const Objective& objective,
                                const Eigen::VectorXd& lower,
                                const Eigen::VectorXd& upper,
                                const Eigen::VectorXd& init,
                                const OptimizerOptions& options) {
  const Eigen::Index d = init.size();
  auto project = [&](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(x.cwiseMax(lower).cwiseMin(upper));
  };

  OptimizerResult res;
  res.theta = project(init);
  res.eval = objective(res.theta, 2);
  if (!std::isfinite(res.eval.value)) {
    throw DomainError("objective is not finite at the starting point");
  }

  for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
    const Eigen::VectorXd& g = res.eval.grad;
    const std::vector<bool> active =
        pinned(res.theta, g, lower, upper, options.boundary_eps);
    std::vector<Eigen::Index> free;
    double proj = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!active[i]) {
        free.push_back(i);
        proj = std::max(proj, std::abs(g[i]));
      }
    }
    res.projected_score = proj;
    if (proj <= options.score_tol) {
      res.converged = true;
      break;
    }

    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd gf(m);
    Eigen::MatrixXd hf(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      gf[a] = g[free[a]];
      for (Eigen::Index b = 0; b < m; ++b) hf(a, b) = res.eval.hess(free[a], free[b]);
    }
    Eigen::VectorXd pf;
    Eigen::LLT<Eigen::MatrixXd> llt(-hf);
    if (llt.info() == Eigen::Success) pf = llt.solve(gf);
    if (pf.size() == 0 || !pf.allFinite() || pf.dot(gf) <= 0.0) {
      const double scale = std::max(hf.cwiseAbs().maxCoeff(), 1e-8);
      pf = gf / scale;
    }
    Eigen::VectorXd p = Eigen::VectorXd::Zero(d);
    for (Eigen::Index a = 0; a < m; ++a) p[free[a]] = pf[a];

    // Objective values carry round-off of a few ulps; near the optimum the
    // true ascent is below that, so allow a matching slack.
    const double slack =
        64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(res.eval.value));
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd trial = project(res.theta + t * p);
      const Eigen::VectorXd step = trial - res.theta;
      if (step.cwiseAbs().maxCoeff() == 0.0) break;
      Evaluation ev = objective(trial, 2);
      if (std::isfinite(ev.value) &&
          ev.value >= res.eval.value + options.armijo_c * g.dot(step) - slack) {
        res.theta = trial;
        res.eval = std::move(ev);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.message = "line search stagnated";
      break;
    }
  }
  if (!res.converged && res.message.empty()) res.message = "iteration cap reached";

  const std::vector<bool> active =
      pinned(res.theta, res.eval.grad, lower, upper, options.boundary_eps);
  res.at_boundary = active;
  double proj = 0.0;
  for (Eigen::Index i = 0; i < d; ++i)
    if (!active[i]) proj = std::max(proj, std::abs(res.eval.grad[i]));
  res.projected_score = proj;
  if (proj <= options.score_tol) res.converged = true;
  return res;
}

}  // namespace patree
