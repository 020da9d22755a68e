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

#include <Eigen/Dense>

#include "patree/pa_model.hpp"
#include "patree/rng.hpp"

namespace patree {

// Generalized Polya urn with deterministic replacements. Drawing urn i (with
// probability proportional to a_i X_i) adds column i of `xi` to the contents.
struct UrnSystem {
  int q = 0;
  Eigen::VectorXd activities;  // a
  Eigen::MatrixXd xi;          // column i is xi_i
  Eigen::MatrixXd A;           // A_ij = a_j xi_{j,i}
  double lambda1 = 0.0;
  Eigen::VectorXd v1;  // right Perron vector, a^T v1 = 1
  Eigen::VectorXd u1;  // left Perron vector, u1^T v1 = 1
  double lambda2_real = 0.0;
  Eigen::VectorXcd eigenvalues;
  Eigen::VectorXd initial;  // X_0
  std::optional<Eigen::MatrixXd> sigma;
};

// Validates irreducibility, non-decreasing content and the Perron pair.
UrnSystem make_urn(const Eigen::VectorXd& activities, const Eigen::MatrixXd& xi,
                   const Eigen::VectorXd& initial);

// Degree urn for f(k) = k + alpha: urns 1..kappa count nodes of that degree,
// urn kappa+1 holds the total weight of nodes with larger degree.
UrnSystem build_affine_urn(double alpha, int kappa);

// Degree urn for an eventually constant family with cut-off at most kappa:
// urn kappa+1 counts nodes of degree above kappa.
UrnSystem build_cutoff_urn(const PAFamily& family, const Eigen::VectorXd& theta,
                           int kappa);

struct EigenCondition {
  double lambda1 = 0.0;
  double lambda2_real = 0.0;
  bool satisfied = false;  // Re lambda_2 < lambda_1 / 2
};
EigenCondition eigen_condition(const UrnSystem& system);

// Limit covariance of n^{-1/2}(X_n - n lambda1 v1), entrywise absolute
// quadrature error at most tol.
Eigen::MatrixXd limit_covariance(const UrnSystem& system, double tol = 1e-12);

// Urn contents after n draws from system.initial.
Eigen::VectorXd urn_simulate(const UrnSystem& system, std::int64_t n, Rng& rng);
Eigen::VectorXd urn_simulate(const UrnSystem& system, std::int64_t n,
                             std::uint64_t seed);

// Perron vector from the first column of adj(lambda1 I - A), scaled to
// a^T v = 1. Independent of the eigen-solver; used as a cross-check.
Eigen::VectorXd perron_adjugate(const UrnSystem& system);

// Limiting degree law of the affine tree by its one-step recursion.
double affine_pk(double alpha, std::int64_t k);

struct LemmaCheck {
  double lhs = 0.0;  // sum_{l > k} p_l (l + alpha)
  double rhs = 0.0;  // (k + alpha)(k + 1 + alpha) p_k / (1 + alpha)
};
LemmaCheck lemma_B3_check(double alpha, std::int64_t k);

// kappa x q map from urn fractions to P_{>k} = 1 - sum_{j <= k} P_j,
// linearized: row k has -1 in columns 1..k.
Eigen::MatrixXd tail_map(int kappa, int q);

// kappa x kappa multinomial-type matrix diag(p) - p p^T of affine p_k.
Eigen::MatrixXd mori_R(double alpha, int kappa);

// CSV blocks a, xi, A, v1, initial and (when present) Sigma under a
// '#' manifest.
void write_urn_bundle(std::ostream& out, const UrnSystem& system);
UrnSystem read_urn_bundle(std::istream& in);

}  // namespace patree
