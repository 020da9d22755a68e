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
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace patree {

// The four parametric preferential-attachment families. Each maps a degree
// k >= 1 to a positive, non-decreasing preference f_theta(k).
//
//   kPowerOffset         f(k) = (k + alpha)^beta,    alpha > -1, beta in [0, 1]
//   kAffine              f(k) = k + alpha,           alpha > -1
//   kLogPower            f(k) = log(max(k, 2))^beta, beta > 0
//   kEventuallyConstant  f(k) = v_{min(k, K)},       v_i > 0
//
// LogPower flattens the first degree onto the second because log(1) = 0 would
// make a lone root unable to receive any attachment.
enum class FamilyKind { kPowerOffset, kAffine, kLogPower, kEventuallyConstant };

std::string_view kind_name(FamilyKind kind);
FamilyKind parse_kind(std::string_view name);

enum class GrowthClass { kStrictlySublinear, kAffine };

struct ParameterBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Index of (j, l), j <= l, in a packed upper triangle of a d x d matrix.
constexpr int packed_index(int j, int l, int d) {
  return j * d - j * (j - 1) / 2 + (l - j);
}
constexpr int packed_size(int d) { return d * (d + 1) / 2; }

// f, grad f and hess f tabulated over degrees 1..kmax, structure-of-arrays so
// that likelihood scans read one contiguous column per quantity. Index 0 is
// unused. Derivatives are with respect to the free coordinates only.
struct DegreeTable {
  int dim = 0;
  int order = 0;
  std::int64_t kmax = 0;
  std::vector<double> value;
  std::vector<std::vector<double>> grad;  // grad[j][k]
  std::vector<std::vector<double>> hess;  // hess[packed_index(j, l)][k]
};

// A parametric family together with its closed parameter box. Parameters can
// be fixed at a value, which removes them from theta; every theta-taking
// method works on the free coordinates in declaration order.
class PAFamily {
 public:
  // Default boxes: alpha in [-1 + eps, 1/eps] with eps = 0.05, beta in [0, 1].
  static PAFamily power_offset(double alpha, double beta);
  static PAFamily affine(double alpha);
  static PAFamily log_power(double beta);
  // The first value is fixed by default because the likelihood is invariant
  // under rescaling f; use release("v1") to free it.
  static PAFamily eventually_constant(std::vector<double> values);

  FamilyKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(free_.size()); }
  int full_dim() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& parameter_names() const { return names_; }
  std::vector<std::string> free_names() const;
  const std::vector<int>& free_indices() const { return free_; }
  const Eigen::VectorXd& reference() const { return reference_; }
  const std::vector<ParameterBounds>& bounds() const { return bounds_; }
  // Cut-off K of an eventually constant family, 0 otherwise.
  int cutoff() const;

  // Free part of the reference parameter vector.
  Eigen::VectorXd theta() const;
  Eigen::VectorXd lower() const;
  Eigen::VectorXd upper() const;
  Eigen::VectorXd center() const;

  PAFamily& fix(std::string_view name, double value);
  PAFamily& fix(std::string_view name);
  PAFamily& release(std::string_view name);
  PAFamily& set_bounds(std::string_view name, double lower, double upper);
  // Copy whose reference has its free coordinates replaced by theta.
  PAFamily at(const Eigen::VectorXd& theta) const;

  bool in_box(const Eigen::VectorXd& theta) const;
  void check_theta(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd expand(const Eigen::VectorXd& theta) const;

  double eval(const Eigen::VectorXd& theta, std::int64_t k) const;
  Eigen::VectorXd grad(const Eigen::VectorXd& theta, std::int64_t k) const;
  Eigen::MatrixXd hess(const Eigen::VectorXd& theta, std::int64_t k) const;

  // order 0: values, 1: + gradients, 2: + Hessians.
  DegreeTable tabulate(const Eigen::VectorXd& theta, std::int64_t kmax,
                       int order) const;
  // Appends degrees table.kmax + 1 .. kmax to an existing table.
  void extend(DegreeTable& table, const Eigen::VectorXd& theta,
              std::int64_t kmax) const;

  // Unchecked evaluation at a full parameter vector; the simulator's hot path.
  double value_at(const Eigen::VectorXd& full, std::int64_t k) const;

  GrowthClass growth_class(const Eigen::VectorXd& theta) const;
  // Offset alpha when f_theta(k) = k + alpha exactly.
  bool is_affine(const Eigen::VectorXd& theta) const;
  double affine_offset(const Eigen::VectorXd& theta) const;
  // Throws DomainError unless f_theta is positive and non-decreasing on
  // 1..kmax (and, for eventually constant families, on the whole range).
  void check_monotone(const Eigen::VectorXd& theta, std::int64_t kmax) const;

  // Human-readable JSON with keys kind, parameters, bounds, fixed.
  std::string to_config() const;
  static PAFamily from_config(std::string_view text);

  // Short label such as "power_offset(alpha=0,beta=0.666667)".
  std::string label(const Eigen::VectorXd& theta) const;

 private:
  PAFamily(FamilyKind kind, std::vector<std::string> names,
           Eigen::VectorXd reference, std::vector<ParameterBounds> bounds);
  int index_of(std::string_view name) const;
  void fill_degree(const Eigen::VectorXd& full, std::int64_t k, int order,
                   double* value, Eigen::VectorXd* grad_full,
                   Eigen::MatrixXd* hess_full) const;

  FamilyKind kind_;
  std::vector<std::string> names_;
  Eigen::VectorXd reference_;
  std::vector<ParameterBounds> bounds_;
  std::vector<int> free_;
};

}  // namespace patree
