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
#include <vector>

#include <Eigen/Dense>

#include "patree/pa_model.hpp"

namespace patree {

// Limiting degree law truncated at K = probs.size().
struct LimitLaw {
  double lambda_star = 0.0;
  std::vector<double> probs;       // probs[k - 1] = p_k
  std::vector<double> tail_probs;  // tail_probs[k - 1] = p_{>k}
  double tail_mass = 0.0;          // p_{>K}
  // sum_{l > K} f(l) p_l, exact for affine and eventually constant f.
  double tail_moment = 0.0;
  double mean_preference = 0.0;    // sum_k f(k) p_k, tail included
  // False when the term cap stopped the recursion before tail_tol was met.
  bool tail_tol_met = true;
  // Set when f is affine, for closed-form tail sums.
  bool affine = false;
  double affine_alpha = 0.0;

  std::int64_t truncation() const {
    return static_cast<std::int64_t>(probs.size());
  }
  double p(std::int64_t k) const {
    return k >= 1 && k <= truncation() ? probs[k - 1] : 0.0;
  }
  double p_above(std::int64_t k) const;
};

inline constexpr double kAnalyticTailTol = 1e-12;
inline constexpr double kOptimizerTailTol = 1e-9;
inline constexpr std::int64_t kMaxLawTerms = std::int64_t{1} << 22;

// rho(lambda) = sum_{l >= 1} prod_{k <= l} f(k) / (lambda + f(k)), with
// absolute truncation error at most tol. Affine f uses the closed form and
// requires lambda > 1.
double rho(const PAFamily& family, const Eigen::VectorXd& theta, double lambda,
           double tol = 1e-14);

// Root of rho(lambda) = 1.
double malthusian(const PAFamily& family, const Eigen::VectorXd& theta,
                  double tol = 1e-14);

LimitLaw limit_law(const PAFamily& family, const Eigen::VectorXd& theta,
                   double tail_tol = kAnalyticTailTol);

// "k,p_k" CSV with lambda_star and tail_mass in '#' header lines.
void write_limit_law(std::ostream& out, const LimitLaw& law);

}  // namespace patree
