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


#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "patree/error.hpp"
#include "patree/experiments.hpp"
#include "patree/stats.hpp"

using namespace patree;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MCConfig f2_config(Estimator e, std::int64_t n, std::int64_t reps) {
  MCConfig c;
  c.family = PAFamily::power_offset(0.0, 2.0 / 3.0);
  c.n = n;
  c.reps = reps;
  c.estimator = e;
  c.seed = 2718;
  c.workers = 2;
  return c;
}

}  // namespace

TEST_CASE("one replicate gives n times the outer product") {
  VectorXd th0(2), th(2);
  th0 << 0.0, 0.5;
  th << 0.1, 0.45;
  const MCStatistics s = mc_statistics({th}, th0, 1000);
  const VectorXd e = th - th0;
  const MatrixXd want = 1000.0 * MatrixXd(e * e.transpose());
  CHECK((s.rescaled_cov - want).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s.sample_mean_diff - (th - th0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Monte Carlo MLE study under f(k) = k^(2/3)") {
  const MCReport r = run_mc(f2_config(Estimator::kMle, 10000, 200));
  REQUIRE_FALSE(r.failed);
  REQUIRE(r.reference.has_value());
  const MatrixXd& ref = *r.reference;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(r.rescaled_cov(i, j) - ref(i, j)) <= 0.25 * std::abs(ref(i, j)));

  // Independent single-threaded recomputation of the reported statistics.
  VectorXd mean = VectorXd::Zero(2);
  MatrixXd cov = MatrixXd::Zero(2, 2);
  for (const auto& t : r.estimates) {
    mean += (t - r.theta0);
    cov += (t - r.theta0) * (t - r.theta0).transpose();
  }
  mean /= double(r.estimates.size());
  cov *= double(r.n) / double(r.estimates.size());
  CHECK((mean - r.sample_mean_diff).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((cov - r.rescaled_cov).cwiseAbs().maxCoeff() <= 1e-12 * cov.cwiseAbs().maxCoeff());
  CHECK(min_eigenvalue(r.rescaled_cov) >= 0.0);

  // Straight-line QQ check of the standardised estimates.
  for (int c = 0; c < 2; ++c) {
    std::vector<double> x;
    for (const auto& t : r.estimates) x.push_back(t[c]);
    const auto qq = emit_qq(x, std::sqrt(ref(c, c) / r.n), r.theta0[c]);
    CHECK(qq_correlation(qq) > 0.99);
  }
}

TEST_CASE("reports do not depend on the worker count") {
  MCConfig a = f2_config(Estimator::kPmle, 3000, 24);
  MCConfig b = a;
  a.workers = 1;
  b.workers = 4;
  const MCReport ra = run_mc(a), rb = run_mc(b);
  CHECK(ra.report() == rb.report());
  CHECK(ra.csv() == rb.csv());
}

TEST_CASE("snapshot estimators are less efficient than the MLE") {
  const std::int64_t n = 10000, N = 200;
  const MCReport mle = run_mc(f2_config(Estimator::kMle, n, N));
  const MCReport pmle = run_mc(f2_config(Estimator::kPmle, n, N));
  const MCReport ee = run_mc(f2_config(Estimator::kEe, n, N));
  for (int i = 0; i < 2; ++i) {
    CHECK(pmle.rescaled_cov(i, i) > mle.rescaled_cov(i, i));
    CHECK(ee.rescaled_cov(i, i) > pmle.rescaled_cov(i, i));
  }
  CHECK(ee.failures <= N / 20);
}

TEST_CASE("QQ table") {
  std::vector<double> x;
  const int N = 50;
  for (int i = 0; i < N; ++i) x.push_back(normal_quantile((i + 0.5) / N));
  std::reverse(x.begin(), x.end());
  const auto qq = emit_qq(x, 1.0);
  double worst = 0.0;
  for (const auto& p : qq) worst = std::max(worst, std::abs(p.value - p.normal));
  CHECK(worst == 0.0);
  std::ostringstream os;
  write_qq(os, qq);
  CHECK(os.str().rfind("normal_quantile,standardized\n", 0) == 0);
  CHECK_THROWS_AS(emit_qq(std::vector<double>(20, 1.5), 1.0), DegeneracyError);
  CHECK_THROWS_AS(emit_qq(std::vector<double>(5, 1.5), 1.0), DomainError);
}

TEST_CASE("projected bootstrap: minimal configuration and determinism") {
  BootstrapMCConfig c;
  c.n = 2000;
  c.m = 500;
  c.s = 2;
  c.reps = 12;
  c.seed = 5;
  c.workers = 2;
  const ProjectedBootstrapResult a = run_projected_bootstrap_qq(c);
  CHECK(a.d.size() + a.dropped == 12);
  for (double d : a.d) CHECK(std::isfinite(d));
  c.workers = 1;
  const ProjectedBootstrapResult b = run_projected_bootstrap_qq(c);
  std::ostringstream oa, ob;
  write_qq(oa, a.qq);
  write_qq(ob, b.qq);
  CHECK(oa.str() == ob.str());
  CHECK(a.d == b.d);
}

TEST_CASE("projected bootstrap statistics are standard normal") {
  BootstrapMCConfig c;
  c.n = 10000;
  c.m = 10000;
  c.s = 200;
  c.reps = 200;
  c.seed = 314;
  const ProjectedBootstrapResult r = run_projected_bootstrap_qq(c);
  REQUIRE(r.d.size() >= 190);
  // 1% critical value of the one-sample KS distance.
  const double crit = 1.628 / (std::sqrt(double(r.d.size())) + 0.12 + 0.11 / std::sqrt(double(r.d.size())));
  CHECK(r.ks < crit);
}
