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

#include "patree/pa_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "patree/error.hpp"

namespace patree {
namespace {

constexpr double kEps = 0.05;
constexpr double kAlphaLower = -1.0 + kEps;
constexpr double kAlphaUpper = 1.0 / kEps;

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

std::string_view kind_name(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::kPowerOffset:
      return "power_offset";
    case FamilyKind::kAffine:
      return "affine";
    case FamilyKind::kLogPower:
      return "log_power";
    case FamilyKind::kEventuallyConstant:
      return "eventually_constant";
  }
  return "unknown";
}

FamilyKind parse_kind(std::string_view name) {
  if (name == "power_offset") return FamilyKind::kPowerOffset;
  if (name == "affine") return FamilyKind::kAffine;
  if (name == "log_power") return FamilyKind::kLogPower;
  if (name == "eventually_constant") return FamilyKind::kEventuallyConstant;
  throw DomainError("unknown family kind '" + std::string(name) + "'");
}

PAFamily::PAFamily(FamilyKind kind, std::vector<std::string> names,
                   Eigen::VectorXd reference,
                   std::vector<ParameterBounds> bounds)
    : kind_(kind),
      names_(std::move(names)),
      reference_(std::move(reference)),
      bounds_(std::move(bounds)) {
  free_.resize(names_.size());
  for (int i = 0; i < full_dim(); ++i) free_[i] = i;
}

PAFamily PAFamily::power_offset(double alpha, double beta) {
  Eigen::VectorXd ref(2);
  ref << alpha, beta;
  PAFamily family(FamilyKind::kPowerOffset, {"alpha", "beta"}, ref,
                  {{kAlphaLower, kAlphaUpper}, {0.0, 1.0}});
  family.check_theta(family.theta());
  return family;
}

PAFamily PAFamily::affine(double alpha) {
  Eigen::VectorXd ref(1);
  ref << alpha;
  PAFamily family(FamilyKind::kAffine, {"alpha"}, ref,
                  {{kAlphaLower, kAlphaUpper}});
  family.check_theta(family.theta());
  return family;
}

PAFamily PAFamily::log_power(double beta) {
  Eigen::VectorXd ref(1);
  ref << beta;
  PAFamily family(FamilyKind::kLogPower, {"beta"}, ref, {{0.01, 3.0}});
  family.check_theta(family.theta());
  return family;
}

PAFamily PAFamily::eventually_constant(std::vector<double> values) {
  if (values.empty()) {
    throw DomainError("eventually constant family needs at least one value");
  }
  const int K = static_cast<int>(values.size());
  std::vector<std::string> names;
  std::vector<ParameterBounds> bounds;
  Eigen::VectorXd ref(K);
  for (int i = 0; i < K; ++i) {
    names.push_back("v" + std::to_string(i + 1));
    bounds.push_back({1e-8, 1e8});
    ref[i] = values[i];
  }
  PAFamily family(FamilyKind::kEventuallyConstant, std::move(names), ref,
                  std::move(bounds));
  if (K > 1) family.fix("v1");
  family.check_theta(family.theta());
  return family;
}

int PAFamily::cutoff() const {
  return kind_ == FamilyKind::kEventuallyConstant ? full_dim() : 0;
}

std::vector<std::string> PAFamily::free_names() const {
  std::vector<std::string> out;
  for (int i : free_) out.push_back(names_[i]);
  return out;
}

Eigen::VectorXd PAFamily::theta() const {
  Eigen::VectorXd t(dim());
  for (int j = 0; j < dim(); ++j) t[j] = reference_[free_[j]];
  return t;
}

Eigen::VectorXd PAFamily::lower() const {
  Eigen::VectorXd t(dim());
  for (int j = 0; j < dim(); ++j) t[j] = bounds_[free_[j]].lower;
  return t;
}

Eigen::VectorXd PAFamily::upper() const {
  Eigen::VectorXd t(dim());
  for (int j = 0; j < dim(); ++j) t[j] = bounds_[free_[j]].upper;
  return t;
}

Eigen::VectorXd PAFamily::center() const { return 0.5 * (lower() + upper()); }

int PAFamily::index_of(std::string_view name) const {
  for (int i = 0; i < full_dim(); ++i) {
    if (names_[i] == name) return i;
  }
  throw DomainError("family " + std::string(kind_name(kind_)) +
                    " has no parameter '" + std::string(name) + "'");
}

PAFamily& PAFamily::fix(std::string_view name, double value) {
  const int i = index_of(name);
  reference_[i] = value;
  std::erase(free_, i);
  return *this;
}

PAFamily& PAFamily::fix(std::string_view name) {
  return fix(name, reference_[index_of(name)]);
}

PAFamily& PAFamily::release(std::string_view name) {
  const int i = index_of(name);
  if (std::find(free_.begin(), free_.end(), i) == free_.end()) {
    free_.push_back(i);
    std::sort(free_.begin(), free_.end());
  }
  return *this;
}

PAFamily& PAFamily::set_bounds(std::string_view name, double lower,
                               double upper) {
  if (!(lower <= upper)) throw DomainError("empty parameter interval");
  if ((kind_ == FamilyKind::kPowerOffset || kind_ == FamilyKind::kAffine) &&
      name == "alpha" && lower <= -1.0) {
    throw DomainError("alpha must stay above -1");
  }
  if (kind_ == FamilyKind::kPowerOffset && name == "beta" &&
      (lower < 0.0 || upper > 1.0)) {
    throw DomainError("beta must stay within [0, 1]");
  }
  if ((kind_ == FamilyKind::kLogPower ||
       kind_ == FamilyKind::kEventuallyConstant) &&
      lower <= 0.0) {
    throw DomainError("parameter must stay positive");
  }
  bounds_[index_of(name)] = {lower, upper};
  return *this;
}

PAFamily PAFamily::at(const Eigen::VectorXd& theta) const {
  check_theta(theta);
  PAFamily copy = *this;
  copy.reference_ = expand(theta);
  return copy;
}

bool PAFamily::in_box(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim()) return false;
  for (int j = 0; j < dim(); ++j) {
    const auto& b = bounds_[free_[j]];
    if (!(theta[j] >= b.lower && theta[j] <= b.upper)) return false;
  }
  return true;
}

void PAFamily::check_theta(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim()) {
    throw DomainError("theta has dimension " + std::to_string(theta.size()) +
                      ", family expects " + std::to_string(dim()));
  }
  for (int j = 0; j < dim(); ++j) {
    const auto& b = bounds_[free_[j]];
    if (!(theta[j] >= b.lower && theta[j] <= b.upper)) {
      throw DomainError(names_[free_[j]] + " = " + fmt_double(theta[j]) +
                        " outside [" + fmt_double(b.lower) + ", " +
                        fmt_double(b.upper) + "]");
    }
  }
}

Eigen::VectorXd PAFamily::project(const Eigen::VectorXd& theta) const {
  return theta.cwiseMax(lower()).cwiseMin(upper());
}

Eigen::VectorXd PAFamily::expand(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd full = reference_;
  for (int j = 0; j < dim(); ++j) full[free_[j]] = theta[j];
  return full;
}

double PAFamily::value_at(const Eigen::VectorXd& full, std::int64_t k) const {
  switch (kind_) {
    case FamilyKind::kPowerOffset:
      return std::pow(static_cast<double>(k) + full[0], full[1]);
    case FamilyKind::kAffine:
      return static_cast<double>(k) + full[0];
    case FamilyKind::kLogPower:
      return std::pow(std::log(static_cast<double>(std::max<std::int64_t>(k, 2))),
                      full[0]);
    case FamilyKind::kEventuallyConstant: {
      const std::int64_t K = full.size();
      return full[std::min(k, K) - 1];
    }
  }
  return 0.0;
}

void PAFamily::fill_degree(const Eigen::VectorXd& full, std::int64_t k,
                           int order, double* value, Eigen::VectorXd* g,
                           Eigen::MatrixXd* h) const {
  const double kd = static_cast<double>(k);
  switch (kind_) {
    case FamilyKind::kPowerOffset: {
      const double alpha = full[0], beta = full[1];
      const double x = kd + alpha;
      const double lx = std::log(x);
      const double f = std::exp(beta * lx);
      *value = f;
      if (order >= 1) {
        (*g)[0] = beta * f / x;
        (*g)[1] = f * lx;
      }
      if (order >= 2) {
        (*h)(0, 0) = beta * (beta - 1.0) * f / (x * x);
        (*h)(0, 1) = (*h)(1, 0) = f / x * (1.0 + beta * lx);
        (*h)(1, 1) = f * lx * lx;
      }
      break;
    }
    case FamilyKind::kAffine:
      *value = kd + full[0];
      if (order >= 1) (*g)[0] = 1.0;
      if (order >= 2) (*h)(0, 0) = 0.0;
      break;
    case FamilyKind::kLogPower: {
      const double L = std::log(std::max(kd, 2.0));
      const double ll = std::log(L);
      const double f = std::exp(full[0] * ll);
      *value = f;
      if (order >= 1) (*g)[0] = f * ll;
      if (order >= 2) (*h)(0, 0) = f * ll * ll;
      break;
    }
    case FamilyKind::kEventuallyConstant: {
      const std::int64_t K = full.size();
      const std::int64_t idx = std::min(k, K) - 1;
      *value = full[idx];
      if (order >= 1) {
        g->setZero();
        (*g)[idx] = 1.0;
      }
      if (order >= 2) h->setZero();
      break;
    }
  }
}

double PAFamily::eval(const Eigen::VectorXd& theta, std::int64_t k) const {
  check_theta(theta);
  if (k < 1) throw DomainError("degree must be at least 1");
  return value_at(expand(theta), k);
}

Eigen::VectorXd PAFamily::grad(const Eigen::VectorXd& theta,
                               std::int64_t k) const {
  check_theta(theta);
  if (k < 1) throw DomainError("degree must be at least 1");
  double value = 0.0;
  Eigen::VectorXd g(full_dim());
  fill_degree(expand(theta), k, 1, &value, &g, nullptr);
  Eigen::VectorXd out(dim());
  for (int j = 0; j < dim(); ++j) out[j] = g[free_[j]];
  return out;
}

Eigen::MatrixXd PAFamily::hess(const Eigen::VectorXd& theta,
                               std::int64_t k) const {
  check_theta(theta);
  if (k < 1) throw DomainError("degree must be at least 1");
  double value = 0.0;
  Eigen::VectorXd g(full_dim());
  Eigen::MatrixXd h(full_dim(), full_dim());
  fill_degree(expand(theta), k, 2, &value, &g, &h);
  Eigen::MatrixXd out(dim(), dim());
  for (int j = 0; j < dim(); ++j)
    for (int l = 0; l < dim(); ++l) out(j, l) = h(free_[j], free_[l]);
  return out;
}

DegreeTable PAFamily::tabulate(const Eigen::VectorXd& theta, std::int64_t kmax,
                               int order) const {
  check_theta(theta);
  DegreeTable table;
  table.dim = dim();
  table.order = order;
  table.kmax = 0;
  table.value.assign(1, 0.0);
  if (order >= 1) table.grad.assign(dim(), std::vector<double>(1, 0.0));
  if (order >= 2)
    table.hess.assign(packed_size(dim()), std::vector<double>(1, 0.0));
  extend(table, theta, kmax);
  return table;
}

void PAFamily::extend(DegreeTable& table, const Eigen::VectorXd& theta,
                      std::int64_t kmax) const {
  if (kmax <= table.kmax) return;
  const Eigen::VectorXd full = expand(theta);
  const int d = dim();
  const int order = table.order;
  table.value.resize(kmax + 1);
  for (auto& col : table.grad) col.resize(kmax + 1);
  for (auto& col : table.hess) col.resize(kmax + 1);
  Eigen::VectorXd g(full_dim());
  Eigen::MatrixXd h(full_dim(), full_dim());
  for (std::int64_t k = table.kmax + 1; k <= kmax; ++k) {
    double value = 0.0;
    fill_degree(full, k, order, &value, &g, &h);
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw DomainError("non-positive preference f(" + std::to_string(k) +
                        ") = " + fmt_double(value));
    }
    table.value[k] = value;
    for (int j = 0; j < d && order >= 1; ++j) table.grad[j][k] = g[free_[j]];
    if (order >= 2) {
      for (int j = 0; j < d; ++j)
        for (int l = j; l < d; ++l)
          table.hess[packed_index(j, l, d)][k] = h(free_[j], free_[l]);
    }
  }
  table.kmax = kmax;
}

GrowthClass PAFamily::growth_class(const Eigen::VectorXd& theta) const {
  return is_affine(theta) ? GrowthClass::kAffine
                          : GrowthClass::kStrictlySublinear;
}

bool PAFamily::is_affine(const Eigen::VectorXd& theta) const {
  if (kind_ == FamilyKind::kAffine) return true;
  if (kind_ == FamilyKind::kPowerOffset) return expand(theta)[1] == 1.0;
  return false;
}

double PAFamily::affine_offset(const Eigen::VectorXd& theta) const {
  if (!is_affine(theta)) throw DomainError("family is not affine at theta");
  return expand(theta)[0];
}

void PAFamily::check_monotone(const Eigen::VectorXd& theta,
                              std::int64_t kmax) const {
  check_theta(theta);
  const Eigen::VectorXd full = expand(theta);
  if (kind_ == FamilyKind::kEventuallyConstant) kmax = full.size();
  double prev = value_at(full, 1);
  if (!(prev > 0.0)) throw DomainError("f(1) must be positive");
  for (std::int64_t k = 2; k <= kmax; ++k) {
    const double cur = value_at(full, k);
    if (cur < prev) {
      throw DomainError("preference function decreases at degree " +
                        std::to_string(k));
    }
    prev = cur;
  }
}

std::string PAFamily::to_config() const {
  nlohmann::ordered_json j;
  j["kind"] = kind_name(kind_);
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  nlohmann::ordered_json bounds = nlohmann::ordered_json::object();
  nlohmann::ordered_json fixed = nlohmann::ordered_json::array();
  for (int i = 0; i < full_dim(); ++i) {
    params[names_[i]] = reference_[i];
    bounds[names_[i]] = {bounds_[i].lower, bounds_[i].upper};
    if (std::find(free_.begin(), free_.end(), i) == free_.end())
      fixed.push_back(names_[i]);
  }
  j["parameters"] = params;
  j["bounds"] = bounds;
  j["fixed"] = fixed;
  return j.dump(2);
}

PAFamily PAFamily::from_config(std::string_view text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed family config: ") + e.what());
  }
  try {
    const FamilyKind kind = parse_kind(j.at("kind").get<std::string>());
    const auto& params = j.at("parameters");
    auto param = [&](const char* name) { return params.at(name).get<double>(); };
    PAFamily family = [&] {
      switch (kind) {
        case FamilyKind::kPowerOffset:
          return power_offset(param("alpha"), param("beta"));
        case FamilyKind::kAffine:
          return affine(param("alpha"));
        case FamilyKind::kLogPower:
          return log_power(param("beta"));
        case FamilyKind::kEventuallyConstant: {
          std::vector<double> values(params.size());
          for (std::size_t i = 0; i < values.size(); ++i)
            values[i] = params.at("v" + std::to_string(i + 1)).get<double>();
          return eventually_constant(std::move(values));
        }
      }
      throw DomainError("unreachable family kind");
    }();
    for (int i = 0; i < family.full_dim(); ++i) family.release(family.names_[i]);
    if (j.contains("bounds")) {
      for (const auto& [name, range] : j.at("bounds").items()) {
        family.set_bounds(name, range.at(0).get<double>(),
                          range.at(1).get<double>());
      }
    }
    if (j.contains("fixed")) {
      for (const auto& name : j.at("fixed")) family.fix(name.get<std::string>());
    }
    family.check_theta(family.theta());
    return family;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed family config: ") + e.what());
  }
}

std::string PAFamily::label(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd full = expand(theta);
  std::string out(kind_name(kind_));
  out += "(";
  for (int i = 0; i < full_dim(); ++i) {
    if (i) out += ",";
    out += names_[i] + "=" + fmt_double(full[i]);
  }
  return out + ")";
}

}  // namespace patree
