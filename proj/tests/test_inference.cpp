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
#include "patree/branching_limits.hpp"
#include "patree/error.hpp"
#include "patree/inference.hpp"
#include "patree/rng.hpp"
#include "patree/stats.hpp"
#include "patree/tree_sim.hpp"

using namespace patree;
using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd v(std::initializer_list<double> xs) {
  VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

bool within_rel(const MatrixXd& got, const Matrix2d& want, double tol) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (std::abs(got(i, j) - want(i, j)) > tol * std::abs(want(i, j))) return false;
  return true;
}

}  // namespace

TEST_CASE("limit score vanishes at the true parameter") {
  const std::vector<PAFamily> fams{
      PAFamily::power_offset(0.0, 2.0 / 3.0), PAFamily::power_offset(4.0, 0.8),
      PAFamily::affine(2.0), PAFamily::log_power(1.0),
      PAFamily::eventually_constant({1.0, 2.0, 2.5, 4.0})};
  for (const auto& fam : fams) {
    const LimitLaw law = limit_law(fam, fam.theta());
    CHECK(limit_score(fam, fam.theta(), law).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("limit score signs and monotonicity") {
  PAFamily shift = PAFamily::power_offset(1.0, 0.6);
  shift.fix("beta");
  const LimitLaw law = limit_law(shift, shift.theta());
  for (double a : {1.2, 2.0, 5.0}) CHECK(limit_score(shift, v({a}), law)[0] < 0.0);
  for (double a : {-0.5, 0.0, 0.9}) CHECK(limit_score(shift, v({a}), law)[0] > 0.0);

  const auto lp = PAFamily::log_power(1.0);
  const LimitLaw lpl = limit_law(lp, lp.theta());
  double prev = std::numeric_limits<double>::infinity();
  for (double b = 0.3; b <= 2.0; b += 0.1) {
    const double s = limit_score(lp, v({b}), lpl)[0];
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("limit hessian is the derivative of the limit score") {
  const auto fam = PAFamily::power_offset(0.0, 2.0 / 3.0);
  const LimitLaw law = limit_law(fam, fam.theta());
  for (const VectorXd& th : {fam.theta(), v({0.3, 0.6}), v({-0.2, 0.75})}) {
    const MatrixXd fd = oracle::fd_jacobian(
        [&](const VectorXd& t) { return limit_score(fam, t, law); }, th, 1e-5);
    CHECK(oracle::close_rel(limit_hessian(fam, th, law), fd, 1e-5));
  }
}

TEST_CASE("V0 for f(k) = k^(2/3)") {
  const auto fam = PAFamily::power_offset(0.0, 2.0 / 3.0);
  const AsymptoticInfo info = fisher_V0(fam, fam.theta());
  Matrix2d want;
  want << 169.30, 47.56, 47.56, 14.94;
  CHECK(within_rel(info.V0_inv, want, 0.005));
}

TEST_CASE("V0 for f(k) = k + 2 as a power-offset family") {
  const auto fam = PAFamily::power_offset(2.0, 1.0);
  const AsymptoticInfo info = fisher_V0(fam, fam.theta());
  Matrix2d want;
  want << 1762.05, 316.58, 316.58, 61.64;
  CHECK(within_rel(info.V0_inv, want, 0.005));
}

TEST_CASE("V0 for f(k) = (k + 4)^(4/5) against the published limit variance") {
  const auto fam = PAFamily::power_offset(4.0, 0.8);
  const AsymptoticInfo info = fisher_V0(fam, fam.theta());
  Matrix2d want;
  want << 42429.33, 4716.76, 4716.76, 539.75;
  CHECK(within_rel(info.V0_inv, want, 0.005));
}

TEST_CASE("V0 structure: symmetry, definiteness and the Hessian identities") {
  for (const VectorXd& th : {v({0.0, 2.0 / 3.0}), v({4.0, 0.8}), v({2.0, 1.0}), v({-0.5, 0.4}),
                             v({1.0, 0.2})}) {
    const auto fam = PAFamily::power_offset(th[0], th[1]);
    const AsymptoticInfo info = fisher_V0(fam, th);
    CHECK((info.V0 - info.V0.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(min_eigenvalue(info.V0) > 0.0);
    CHECK(oracle::close_rel(info.hessian_limit, -info.V0, 1e-8));
    REQUIRE(info.moments.has_value());
    const PowerOffsetMoments& m = *info.moments;
    CHECK(oracle::close_rel(m.hessian(), -info.V0, 1e-8));
    CHECK(m.a * m.b - m.c * m.c > 0.0);
    CHECK(m.a * m.f - m.e * m.e > 0.0);
    CHECK(m.b * m.f - m.d * m.d > 0.0);
    CHECK(m.hessian().determinant() > 0.0);
  }
  const auto ec = PAFamily::eventually_constant({1.0, 2.0, 2.5});
  const AsymptoticInfo e = fisher_V0(ec, ec.theta());
  CHECK(oracle::close_rel(e.hessian_limit, -e.V0, 1e-8));
  CHECK_FALSE(e.moments.has_value());
}

TEST_CASE("Wald affinity statistic") {
  const WaldReport zero = wald_affinity(1.5, 1.0, 1000);
  CHECK(zero.statistic == 0.0);
  CHECK_FALSE(zero.reject);
  CHECK(zero.critical_value == -kZ005);

  const double var = zero.variance_entry;
  const std::int64_t n = 10000;
  const WaldReport two = wald_affinity(1.5, 1.0 - 2.0 * std::sqrt(var / n), n);
  CHECK(two.statistic == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(two.reject);
  CHECK(two.reject == (two.statistic < two.critical_value));
  CHECK(wald_affinity(1.5, 0.999, n, 0.01).critical_value == doctest::Approx(-2.326348).epsilon(1e-6));
  CHECK_THROWS_AS(wald_affinity(1.5, 0.9, 1), DomainError);
  CHECK(two.report().find("statistic") != std::string::npos);
  CHECK(!two.csv_row().empty());
}

TEST_CASE("V0 under heavy-tailed affine laws agrees with a direct sum") {
  // Direct recursion for the affine law, summed far past the library's
  // truncation point. The remainder beyond L = 4e7 terms is about
  // log^2(L) L^{-(1 + a)}, under 1e-7 for these offsets.
  for (double a : {0.25, 0.5, 1.5}) {
    const auto fam = PAFamily::power_offset(a, 1.0);
    const AsymptoticInfo info = fisher_V0(fam, fam.theta());
    const double lam = 2 + a;
    double p = lam / (lam + 1 + a);
    long double s1[2] = {0, 0}, s2[3] = {0, 0, 0};
    for (long k = 1; k <= 40000000; ++k) {
      const double fk = k + a;
      if (k > 1) p *= (fk - 1) / (lam + fk);
      const double pa = fk * p / lam, u0 = 1 / fk, u1 = std::log(fk);
      s1[0] += pa * u0;
      s1[1] += pa * u1;
      s2[0] += pa * u0 * u0;
      s2[1] += pa * u0 * u1;
      s2[2] += pa * u1 * u1;
    }
    const double tol = a < 0.5 ? 5e-7 : 1e-7;
    CHECK(std::abs(info.V0(0, 0) - double(s2[0] - s1[0] * s1[0])) < tol);
    CHECK(std::abs(info.V0(0, 1) - double(s2[1] - s1[0] * s1[1])) < tol);
    CHECK(std::abs(info.V0(1, 1) - double(s2[2] - s1[1] * s1[1])) < tol);
    CHECK(info.truncation_error_bound < 1e-9);
  }
}

TEST_CASE("Wald test from a history") {
  const auto fam = PAFamily::power_offset(1.0, 1.0);
  const GrowthHistory h = grow(fam, fam.theta(), 20000, 12).history;
  const WaldReport c = wald_affinity(h, WaldPlugin::kConstrained);
  const WaldReport u = wald_affinity(h, WaldPlugin::kUnconstrained);
  // Same beta_hat, different alpha plug-ins.
  CHECK(c.statistic <= 0.0);
  CHECK(u.statistic <= 0.0);
  CHECK((c.statistic == 0.0) == (u.statistic == 0.0));
  CHECK(c.variance_entry != u.variance_entry);
  CHECK(std::isfinite(c.variance_entry));
}

TEST_CASE("boundary limit draws") {
  const auto fam = PAFamily::power_offset(2.0, 1.0);
  const MatrixXd V0 = fisher_V0(fam, fam.theta()).V0;
  const VectorXd e2 = v({0.0, 1.0});
  const double sigma2 = V0.inverse()(1, 1);
  Rng rng(99);
  const int N = 100000;
  double sum = 0.0, sq = 0.0;
  int nonzero = 0;
  for (int i = 0; i < N; ++i) {
    const double w = boundary_limit_sample(e2, V0, V0, rng);
    CHECK(w <= 0.0);
    sum += w;
    if (w < 0.0) {
      sq += w * w;
      ++nonzero;
    }
  }
  const double sigma = std::sqrt(sigma2);
  const double mean = -sigma / std::sqrt(2 * M_PI);
  const double sd = sigma * std::sqrt(0.5 - 1.0 / (2 * M_PI));
  CHECK(std::abs(sum / N - mean) < 3 * sd / std::sqrt(N));
  CHECK(std::abs(sq / nonzero - sigma2) < 0.02 * sigma2);
  CHECK(boundary_limit_sample(v({0.0, 0.0}), V0, V0, 1) == 0.0);
  MatrixXd bad = V0;
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(boundary_limit_sample(e2, bad, V0, 1), DomainError);
}

TEST_CASE("bootstrap covariance formula") {
  const std::vector<VectorXd> same(5, v({0.3, 0.7}));
  CHECK(bootstrap_covariance(same, 1000).cwiseAbs().maxCoeff() == 0.0);
  const VectorXd x1 = v({1.0, 2.0}), x2 = v({3.0, -1.0});
  const MatrixXd got = bootstrap_covariance({x1, x2}, 1.0);
  const MatrixXd want = (x1 - x2) * (x1 - x2).transpose() / 4.0;
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("bootstrap variance is deterministic and worker-independent") {
  const auto fam = PAFamily::power_offset(0.0, 2.0 / 3.0);
  const BootstrapVariance a = bootstrap_variance(fam, fam.theta(), 3000, 24, 7, 1);
  const BootstrapVariance b = bootstrap_variance(fam, fam.theta(), 3000, 24, 7, 3);
  CHECK(a.sigma_tilde == b.sigma_tilde);
  CHECK(a.seeds_digest == b.seeds_digest);
  CHECK(a.used >= 22);
  CHECK(min_eigenvalue(a.sigma_tilde) >= 0.0);
  CHECK((a.sigma_tilde - a.sigma_tilde.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(bootstrap_variance(fam, fam.theta(), 5, 24, 7, 1), DomainError);
  CHECK_THROWS_AS(bootstrap_variance(fam, fam.theta(), 100, 1, 7, 1), DomainError);
}

TEST_CASE("bootstrap Wald test") {
  MatrixXd sigma = MatrixXd::Identity(2, 2);
  const WaldReport z = bootstrap_wald(v({0.0, 0.5}), sigma, 0, 0.0, 100);
  CHECK(z.statistic == 0.0);
  CHECK_FALSE(z.reject);
  CHECK(z.two_sided);
  const WaldReport r = bootstrap_wald(v({2.5, 0.5}), sigma, 0, 0.0, 1);
  CHECK(r.statistic == doctest::Approx(2.5));
  CHECK(r.critical_value == kZ0025);
  CHECK(r.reject);
  CHECK(bootstrap_wald(v({-2.5, 0.5}), sigma, 0, 0.0, 1).reject);
  sigma(0, 0) = 0.0;
  CHECK_THROWS_AS(bootstrap_wald(v({2.5, 0.5}), sigma, 0, 0.0, 1), DegeneracyError);
}
