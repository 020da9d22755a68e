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
#include <limits>
#include <cstdio>

#include "doctest.h"
#include "oracles.hpp"
#include "patree/error.hpp"
#include "patree/estimators.hpp"
#include "patree/kernels.hpp"
#include "patree/optimizer.hpp"
#include "patree/rng.hpp"
#include "patree/tree_io.hpp"
#include "patree/tree_sim.hpp"

using namespace patree;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GrowthHistory hist(std::vector<std::int32_t> d) {
  GrowthHistory h;
  h.n = static_cast<std::int64_t>(d.size()) + 1;
  h.degrees = std::move(d);
  return h;
}

DegreeSnapshot snap(std::int64_t n, std::vector<std::int64_t> counts) {
  DegreeSnapshot s;
  s.n = n;
  s.counts = std::move(counts);
  return s;
}

VectorXd v(std::initializer_list<double> xs) {
  VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

// f(k) = k^beta with alpha pinned at zero.
PAFamily pure_power() {
  PAFamily f = PAFamily::power_offset(0.0, 0.5);
  f.fix("alpha");
  return f;
}

}  // namespace

TEST_CASE("loglik hand examples") {
  const auto lin = PAFamily::affine(0.0);
  CHECK(loglik(lin, lin.theta(), hist({1})) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(loglik(lin, lin.theta(), hist({1, 2})) ==
        doctest::Approx(std::log(2.0 / 3.0) / 3.0).epsilon(1e-14));
  CHECK(score(lin, lin.theta(), hist({1}))[0] == doctest::Approx(0.0));
}

TEST_CASE("loglik equals the naive per-step computation") {
  const std::vector<PAFamily> fams{PAFamily::power_offset(0.0, 2.0 / 3.0), PAFamily::affine(1.5),
                                   PAFamily::log_power(0.8),
                                   PAFamily::eventually_constant({1.0, 1.5, 2.2})};
  for (const auto& fam : fams) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto h = grow(fam, fam.theta(), 1000, seed).history;
      // Evaluate away from the generating parameter as well.
      const VectorXd th = fam.project(fam.theta() * 0.9 + VectorXd::Constant(fam.dim(), 0.05));
      for (const VectorXd& t : {fam.theta(), th}) {
        const double want = oracle::naive_loglik(fam, t, h);
        CHECK(std::abs(loglik(fam, t, h) - want) <= 1e-12 * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST_CASE("score and hessian match finite differences") {
  const auto fam = PAFamily::power_offset(0.0, 2.0 / 3.0);
  const auto h = grow(fam, fam.theta(), 1000, 21).history;
  for (double a : {-0.3, 0.0, 0.8}) {
    for (double b : {0.4, 0.66, 0.9}) {
      const VectorXd th = v({a, b});
      const VectorXd fd = oracle::fd_gradient(
          [&](const VectorXd& t) { return loglik(fam, t, h); }, th, 1e-5);
      CHECK(oracle::close_rel(score(fam, th, h), fd, 1e-6));
      const MatrixXd fh = oracle::fd_jacobian(
          [&](const VectorXd& t) { return score(fam, t, h); }, th, 1e-5);
      CHECK(oracle::close_rel(hessian(fam, th, h), fh, 1e-5));
    }
  }
}

TEST_CASE("affine hessian has only the outer-product terms") {
  const double alpha = 0.7;
  const auto fam = PAFamily::affine(alpha);
  const auto r = grow(fam, fam.theta(), 800, 5);
  // For f = k + alpha: grad f = 1, so S_grad(t) = t and S_f(t) = (2t - 1) + alpha t.
  const auto tail = r.snapshot.tail_counts();
  const double n = 800;
  double want = 0.0;
  for (std::int64_t k = 1; k < static_cast<std::int64_t>(tail.size()); ++k)
    want -= tail[k] / n / ((k + alpha) * (k + alpha));
  for (std::int64_t t = 1; t < 800; ++t) {
    const double q = t / (2.0 * t - 1.0 + alpha * t);
    want += q * q / n;
  }
  CHECK(hessian(fam, fam.theta(), r.history)(0, 0) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("log-power score and hessian signs") {
  const auto fam = PAFamily::log_power(1.0);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto h = grow(fam, fam.theta(), 1000, seed).history;
    for (double b = 0.2; b <= 3.0; b += 0.2) CHECK(hessian(fam, v({b}), h)(0, 0) < 0.0);
    const FitResult fit = fit_mle(fam, h);
    REQUIRE(fit.converged);
    const double bh = fit.theta_hat[0];
    CHECK(score(fam, v({bh - 0.05}), h)[0] > 0.0);
    CHECK(score(fam, v({bh + 0.05}), h)[0] < 0.0);
  }
}

TEST_CASE("pseudo-likelihood hand examples and derivatives") {
  const auto fam = PAFamily::power_offset(0.5, 0.7);
  CHECK(pseudo_loglik(fam, fam.theta(), snap(1, {0, 1})) ==
        doctest::Approx(-std::log(std::pow(1.5, 0.7))).epsilon(1e-15));
  const auto lin = PAFamily::affine(0.0);
  CHECK(pseudo_loglik(lin, lin.theta(), snap(3, {0, 1, 2})) ==
        doctest::Approx(-std::log(5.0)).epsilon(1e-15));
  const auto s = grow(fam, fam.theta(), 2000, 8).snapshot;
  for (const VectorXd& th : {fam.theta(), v({0.1, 0.5}), v({2.0, 0.95})}) {
    const VectorXd fd = oracle::fd_gradient(
        [&](const VectorXd& t) { return pseudo_loglik(fam, t, s); }, th, 1e-5);
    CHECK(oracle::close_rel(pseudo_score(fam, th, s), fd, 1e-6));
    const MatrixXd fh = oracle::fd_jacobian(
        [&](const VectorXd& t) { return pseudo_score(fam, t, s); }, th, 1e-5);
    CHECK(oracle::close_rel(pseudo_hessian(fam, th, s), fh, 1e-5));
  }
}

TEST_CASE("empirical ratios") {
  CHECK(empirical_rk(snap(3, {0, 2, 1}), 1) == 0.5);
  CHECK(empirical_rk(snap(1, {0, 1}), 1) == 0.0);
  CHECK_THROWS_AS(empirical_rk(snap(3, {0, 2, 0, 1}), 2), InsufficientDataError);

  // Affine alpha = 0: r_k -> f(k) / lambda* = k / 2.
  const auto fam = PAFamily::affine(0.0);
  const int trees = 20;
  std::vector<std::vector<double>> r(6);
  for (int t = 0; t < trees; ++t) {
    const auto s = grow(fam, fam.theta(), 100000, Rng::stream(3, t)()).snapshot;
    for (int k = 1; k <= 5; ++k) r[k].push_back(empirical_rk(s, k));
  }
  for (int k = 1; k <= 5; ++k) {
    double mean = 0, var = 0;
    for (double x : r[k]) mean += x / trees;
    for (double x : r[k]) var += (x - mean) * (x - mean) / (trees - 1);
    CHECK(std::abs(mean - k / 2.0) < 5 * std::sqrt(var / trees));
  }
}

TEST_CASE("empirical estimator inverts exact ratios") {
  const auto fam = PAFamily::power_offset(1.5, 0.6);
  std::vector<double> ratios(4, 0.0);
  for (int k = 2; k <= 3; ++k) ratios[k] = fam.eval(fam.theta(), k) / fam.eval(fam.theta(), 1);
  const auto fit = solve_ratio_system(PAFamily::power_offset(0.0, 0.5), ratios);
  CHECK((fit.theta - fam.theta()).cwiseAbs().maxCoeff() < 1e-8);

  // Affine: (2 + alpha) / (1 + alpha) = rho gives alpha = (2 - rho) / (rho - 1).
  const double rho = 1.6;
  std::vector<double> one{0, 0, rho};
  const auto af = solve_ratio_system(PAFamily::affine(0.0), one);
  CHECK(std::abs(af.theta[0] - (2 - rho) / (rho - 1)) < 1e-10);

  CHECK_THROWS_AS(empirical_fit(PAFamily::affine(0.0), snap(1, {0, 1})), InsufficientDataError);
}

TEST_CASE("boundary maximisers in the pure power model") {
  const auto fam = pure_power();
  // D_3 = 2: likelihood proportional to 2^b / (1 + 2^b), increasing.
  const FitResult up = fit_mle(fam, hist({1, 2}));
  CHECK(up.theta_hat[0] == doctest::Approx(1.0));
  CHECK(up.at_boundary[0]);
  CHECK(up.converged);
  const FitResult down = fit_mle(fam, hist({1, 1}));
  CHECK(down.theta_hat[0] == doctest::Approx(0.0));
  CHECK(down.at_boundary[0]);
}

TEST_CASE("MLE, PMLE and EE recover the parameter on a large tree") {
  const auto fam = PAFamily::power_offset(0.0, 2.0 / 3.0);
  const auto r = grow(fam, fam.theta(), 100000, 1234);
  const FitResult mle = fit_mle(fam, r.history);
  const FitResult pmle = fit_pmle(fam, r.snapshot);
  const FitResult ee = fit_ee(fam, r.snapshot);
  CHECK(mle.converged);
  CHECK(mle.score_norm <= 1e-8);
  CHECK(pmle.converged);
  // sd of alpha-hat is about sqrt(169 / 1e5) = 0.04.
  CHECK(std::abs(mle.theta_hat[0]) < 0.2);
  CHECK(std::abs(mle.theta_hat[1] - 2.0 / 3.0) < 0.06);
  CHECK(std::abs(pmle.theta_hat[1] - 2.0 / 3.0) < 0.1);
  CHECK(std::abs(ee.theta_hat[1] - 2.0 / 3.0) < 0.5);
  CHECK(ee.objective < 1e-10);  // exact solve of the ratio system
  CHECK(fam.in_box(mle.theta_hat));
}

TEST_CASE("fits from a file history match the in-memory fit") {
  const auto fam = PAFamily::power_offset(1.0, 0.8);
  const auto r = grow(fam, fam.theta(), 20000, 55);
  const std::string path = "patree_test_fit_history.txt";
  save_history(path, r.history, {r.history.n, fam.to_config(), fam.theta(), 55});
  const FitResult a = fit_mle(fam, r.history);
  const FitResult b = fit_mle(fam, FileHistory(path, 1000));
  CHECK((a.theta_hat - b.theta_hat).cwiseAbs().maxCoeff() < 1e-12);
  std::remove(path.c_str());
}

TEST_CASE("the empirical estimator is the saturated pseudo-MLE") {
  const auto fam = PAFamily::eventually_constant({1.0, 1.4, 1.9, 2.3});
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto s = grow(fam, fam.theta(), 10000, seed).snapshot;
    const FitResult fit = fit_pmle(fam, s);
    REQUIRE(fit.converged);
    const VectorXd full = fam.expand(fit.theta_hat);
    double mean_f = 0.0;
    for (std::int64_t k = 1; k <= s.max_degree(); ++k)
      mean_f += full[std::min<std::int64_t>(k, 4) - 1] * s.count(k) / double(s.n);
    // Free coordinates hit the ratios exactly. The pinned v1 absorbs the
    // 1/n defect of sum_k P_{>k} = (n - 1)/n: v1 / mean_f = (N_{>1} + 1)/N_1.
    for (int k = 2; k <= 3; ++k) {
      CHECK(std::abs(full[k - 1] / mean_f - empirical_rk(s, k)) < 1e-6);
    }
    const double r1 = (s.tail_counts()[1] + 1.0) / double(s.count(1));
    CHECK(std::abs(full[0] / mean_f - r1) < 1e-6);
  }
}

TEST_CASE("hybrid selection") {
  const auto fam = PAFamily::power_offset(0.0, 2.0 / 3.0);
  const auto s = grow(fam, fam.theta(), 2000, 4).snapshot;
  CHECK(hybrid_select(fam, {v({3.0, 0.2})}, s) == v({3.0, 0.2}));
  const EmpiricalFit ee = empirical_fit_detail(fam, s);
  REQUIRE_FALSE(ee.at_boundary[0]);
  REQUIRE_FALSE(ee.at_boundary[1]);
  const VectorXd root = ee.theta;
  CHECK(hybrid_select(fam, {v({5.0, 0.1}), root}, s) == root);
  CHECK(ratio_discrepancy(fam, root, s) < 1e-10);
  int hits = 0;
  for (int seed = 0; seed < 20; ++seed) {
    const auto big = grow(fam, fam.theta(), 100000, Rng::stream(19, seed)()).snapshot;
    if (hybrid_select(fam, {fam.theta(), v({3.0, 0.95})}, big) == fam.theta()) ++hits;
  }
  CHECK(hits >= 19);
  CHECK_THROWS_AS(hybrid_select(fam, {}, s), DomainError);
}

TEST_CASE("fit result serialisation") {
  const auto fam = PAFamily::power_offset(0.0, 2.0 / 3.0);
  const FitResult fit = fit_pmle(fam, grow(fam, fam.theta(), 3000, 2).snapshot);
  const std::string report = fit.report(fam.free_names());
  CHECK(report.find("alpha") != std::string::npos);
  CHECK(report.find("converged") != std::string::npos);
  const std::string header = FitResult::csv_header(fam.free_names());
  const std::string row = fit.csv_row();
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
}

TEST_CASE("box-constrained Newton on a concave quadratic") {
  // max -(x - 2)^2 - (y + 1)^2 - x y / 2 over [0, 1] x [0, 5].
  const Objective obj = [](const VectorXd& t, int order) {
    Evaluation e;
    e.value = -std::pow(t[0] - 2, 2) - std::pow(t[1] + 1, 2) - 0.5 * t[0] * t[1];
    if (order >= 1) e.grad = v({-2 * (t[0] - 2) - 0.5 * t[1], -2 * (t[1] + 1) - 0.5 * t[0]});
    if (order >= 2) {
      e.hess.resize(2, 2);
      e.hess << -2, -0.5, -0.5, -2;
    }
    return e;
  };
  const auto res = maximize_in_box(obj, v({0, 0}), v({1, 5}), v({0.5, 2.0}));
  CHECK(res.converged);
  CHECK(res.theta[0] == doctest::Approx(1.0));
  CHECK(res.theta[1] == doctest::Approx(0.0));
  CHECK(res.at_boundary[0]);
  CHECK(res.at_boundary[1]);
}

TEST_CASE("SIMD kernels agree with the scalar reference") {
  if (!kernels::avx2_available()) {
    MESSAGE("AVX2 not available; skipping equivalence");
    return;
  }
  Rng rng(17);
  for (int dim : {1, 2, 3, 5, 8}) {
    for (std::size_t len : {1u, 3u, 4u, 7u, 64u, 1023u}) {
      const int rows = kernels::cesaro_rows(dim);
      std::vector<double> data(rows * len);
      for (std::size_t i = 0; i < len; ++i) {
        data[i] = 1.0 + 1e3 * rng.uniform();
        for (int r = 1; r < rows; ++r) data[r * len + i] = (rng.uniform() - 0.3) * data[i];
      }
      for (int order = 0; order <= 2; ++order) {
        const kernels::CesaroBlock b{data.data(), len, len, dim, order};
        std::vector<double> a(rows, 0.0), c(rows, 0.0);
        kernels::cesaro_accumulate_scalar(b, a.data());
        kernels::cesaro_accumulate_avx2(b, c.data());
        for (int r = 0; r < rows; ++r) {
          REQUIRE(std::abs(a[r] - c[r]) <= 1e-12 * std::max(1.0, std::abs(a[r])));
        }
      }
    }
  }
  std::vector<double> x, ls(5000), lv(5000);
  for (int i = 0; i < 5000; ++i) x.push_back(std::exp(80.0 * (rng.uniform() - 0.5)));
  x[0] = 1.0;
  x[1] = std::nextafter(1.0, 2.0);
  x[2] = 1e-300;
  x[3] = 1e300;
  kernels::log_array_scalar(x.data(), ls.data(), x.size());
  kernels::log_array_avx2(x.data(), lv.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    REQUIRE(std::abs(ls[i] - lv[i]) <= 2 * std::numeric_limits<double>::epsilon() *
                                           std::max(1e-300, std::abs(ls[i])));
    REQUIRE(std::abs(ls[i] - std::log(x[i])) <= 2 * std::numeric_limits<double>::epsilon() *
                                                     std::max(1e-300, std::abs(ls[i])));
  }
}

TEST_CASE("likelihood is backend-independent") {
  const auto fam = PAFamily::power_offset(0.3, 0.7);
  const auto h = grow(fam, fam.theta(), 5000, 6).history;
  const MemoryHistory src(h);
  const auto before = kernels::active_backend();
  kernels::set_backend(kernels::Backend::kScalar);
  const Evaluation a = history_likelihood(fam, fam.theta(), src, 2);
  if (kernels::avx2_available()) {
    kernels::set_backend(kernels::Backend::kAvx2);
    const Evaluation b = history_likelihood(fam, fam.theta(), src, 2);
    CHECK(std::abs(a.value - b.value) <= 1e-12 * std::abs(a.value));
    CHECK(oracle::close_rel(b.grad, a.grad, 1e-12));
    CHECK(oracle::close_rel(b.hess, a.hess, 1e-12));
  }
  kernels::set_backend(before);
}
