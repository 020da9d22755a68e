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


#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "patree/error.hpp"
#include "patree/pa_model.hpp"

using namespace patree;
using Eigen::VectorXd;

namespace {

VectorXd v(std::initializer_list<double> xs) {
  VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

std::vector<PAFamily> sample_families() {
  return {PAFamily::power_offset(0.0, 2.0 / 3.0), PAFamily::power_offset(4.0, 0.8),
          PAFamily::affine(2.0), PAFamily::log_power(1.5),
          PAFamily::eventually_constant({1.0, 1.5, 2.5, 3.0})};
}

}  // namespace

TEST_CASE("eval examples") {
  const auto po = PAFamily::power_offset(0.0, 2.0 / 3.0);
  CHECK(po.eval(po.theta(), 8) == doctest::Approx(4.0).epsilon(1e-15));
  const auto af = PAFamily::affine(2.0);
  CHECK(af.eval(af.theta(), 3) == 5.0);
  const auto f4 = PAFamily::power_offset(4.0, 0.8);
  // 5^0.8
  CHECK(f4.eval(f4.theta(), 1) == doctest::Approx(3.6238983183884783).epsilon(1e-15));
}

TEST_CASE("eval rejects k = 0 and theta outside the box") {
  const auto po = PAFamily::power_offset(0.0, 0.5);
  CHECK_THROWS_AS(po.eval(po.theta(), 0), DomainError);
  CHECK_THROWS_AS(po.eval(v({0.0, 1.5}), 3), DomainError);
  CHECK_THROWS_AS(po.eval(v({-0.99, 0.5}), 3), DomainError);
  CHECK_THROWS_AS(PAFamily::eventually_constant({1.0, -2.0}), DomainError);
}

TEST_CASE("grad examples") {
  const auto af = PAFamily::affine(0.7);
  CHECK(af.grad(af.theta(), 5)[0] == 1.0);
  const auto po = PAFamily::power_offset(0.0, 1.0);
  const VectorXd g = po.grad(po.theta(), 3);
  CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(3 * std::log(3.0)).epsilon(1e-15));

  const auto f4 = PAFamily::power_offset(4.0, 0.8);
  const VectorXd fd = oracle::fd_gradient(
      [&](const VectorXd& t) { return f4.eval(t, 7); }, f4.theta(), 1e-6);
  CHECK(oracle::close_rel(f4.grad(f4.theta(), 7), fd, 1e-6));
}

TEST_CASE("hess examples") {
  const auto af = PAFamily::affine(1.3);
  CHECK(af.hess(af.theta(), 9)(0, 0) == 0.0);
  const double beta = 1.7;
  const auto lp = PAFamily::log_power(beta);
  const double l3 = std::log(3.0);
  CHECK(lp.hess(lp.theta(), 3)(0, 0) ==
        doctest::Approx(std::pow(l3, beta) * std::pow(std::log(l3), 2)).epsilon(1e-14));
}

TEST_CASE("derivatives match finite differences over a theta grid") {
  const auto po = PAFamily::power_offset(0.0, 0.5);
  for (double a : {-0.5, 0.0, 1.0, 5.0}) {
    for (double b : {0.2, 0.5, 0.9}) {
      const VectorXd th = v({a, b});
      for (std::int64_t k : {1, 2, 7, 40, 1000}) {
        const VectorXd fg = oracle::fd_gradient(
            [&](const VectorXd& t) { return po.eval(t, k); }, th, 1e-6);
        CHECK(oracle::close_rel(po.grad(th, k), fg, 1e-6));
        const Eigen::MatrixXd fh = oracle::fd_jacobian(
            [&](const VectorXd& t) { return po.grad(t, k); }, th, 1e-5);
        CHECK(oracle::close_rel(po.hess(th, k), fh, 1e-5));
      }
    }
  }
  const auto lp = PAFamily::log_power(1.0);
  for (double b : {0.3, 1.0, 2.5}) {
    const VectorXd th = v({b});
    for (std::int64_t k : {1, 2, 3, 50}) {
      const VectorXd fg = oracle::fd_gradient(
          [&](const VectorXd& t) { return lp.eval(t, k); }, th, 1e-6);
      CHECK(oracle::close_rel(lp.grad(th, k), fg, 1e-6));
    }
  }
}

TEST_CASE("every kind is positive and non-decreasing in k") {
  for (const auto& fam : sample_families()) {
    const VectorXd th = fam.theta();
    double prev = 0.0;
    for (std::int64_t k = 1; k <= 10000; ++k) {
      const double f = fam.eval(th, k);
      REQUIRE(f > 0.0);
      REQUIRE(f >= prev);
      prev = f;
    }
    CHECK_NOTHROW(fam.check_monotone(th, 10000));
  }
}

TEST_CASE("power offset with beta < 1 stays below C k^beta") {
  const auto po = PAFamily::power_offset(3.0, 0.6);
  double worst = 0.0;
  for (std::int64_t k = 1; k <= 1000000; k += 997) {
    worst = std::max(worst, po.eval(po.theta(), k) / std::pow(static_cast<double>(k), 0.6));
  }
  CHECK(worst < std::pow(4.0, 0.6) + 1e-12);
}

TEST_CASE("eventually constant families are flat past the cut-off") {
  const auto ec = PAFamily::eventually_constant({1.0, 2.0, 2.5});
  CHECK(ec.cutoff() == 3);
  CHECK(ec.dim() == 2);  // v1 is fixed by default
  for (std::int64_t k = 3; k < 50; ++k) CHECK(ec.eval(ec.theta(), k) == 2.5);
  const VectorXd g = ec.grad(ec.theta(), 10);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
}

TEST_CASE("growth class and affinity") {
  const auto po = PAFamily::power_offset(2.0, 1.0);
  CHECK(po.is_affine(po.theta()));
  CHECK(po.growth_class(po.theta()) == GrowthClass::kAffine);
  CHECK(po.affine_offset(po.theta()) == 2.0);
  const auto f2 = PAFamily::power_offset(0.0, 2.0 / 3.0);
  CHECK_FALSE(f2.is_affine(f2.theta()));
  CHECK(f2.growth_class(f2.theta()) == GrowthClass::kStrictlySublinear);
}

TEST_CASE("config round trip keeps kind, parameters, bounds and fixed set") {
  auto fam = PAFamily::power_offset(1.25, 0.75);
  fam.set_bounds("alpha", -0.5, 7.0).fix("beta");
  const PAFamily back = PAFamily::from_config(fam.to_config());
  CHECK(back.to_config() == fam.to_config());
  CHECK(back.dim() == 1);
  CHECK(back.lower()[0] == -0.5);
  CHECK_THROWS_AS(PAFamily::from_config("{\"kind\":\"nope\"}"), DomainError);
  CHECK_THROWS_AS(PAFamily::from_config("not json"), DomainError);
}
