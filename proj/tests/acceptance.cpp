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


// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Sizes are the desk-scale ones; expect a few minutes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "patree/branching_limits.hpp"
#include "patree/estimators.hpp"
#include "patree/experiments.hpp"
#include "patree/inference.hpp"
#include "patree/stats.hpp"
#include "patree/tree_sim.hpp"
#include "patree/urn.hpp"

using namespace patree;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double max_rel(const MatrixXd& got, const MatrixXd& want) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < want.rows(); ++i)
    for (Eigen::Index j = 0; j < want.cols(); ++j)
      worst = std::max(worst, std::abs(got(i, j) - want(i, j)) / std::abs(want(i, j)));
  return worst;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

MatrixXd sym2(double a, double b, double c) {
  MatrixXd m(2, 2);
  m << a, b, b, c;
  return m;
}

Outcome covariance_reproduction() {
  struct Case {
    const char* name;
    PAFamily fam;
    MatrixXd want;
  };
  const std::vector<Case> cases{
      {"f2", PAFamily::power_offset(0.0, 2.0 / 3.0), sym2(169.30, 47.56, 14.94)},
      {"f4", PAFamily::power_offset(4.0, 0.8), sym2(42429.33, 4716.76, 539.75)},
      {"f5", PAFamily::power_offset(2.0, 1.0), sym2(1762.05, 316.58, 61.64)}};
  Outcome o{true, ""};
  for (const auto& c : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    const AsymptoticInfo info = fisher_V0(c.fam, c.fam.theta());
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double err = max_rel(info.V0_inv, c.want);
    const bool ok = err <= 0.005 && secs < 1.0;
    o.pass = o.pass && ok;
    o.detail += std::string(c.name) + (ok ? " ok" : " FAIL") +
                fmt(" [%.2f %.2f %.2f] rel %.2e; ", info.V0_inv(0, 0), info.V0_inv(0, 1),
                    info.V0_inv(1, 1), err);
  }
  return o;
}

Outcome malthusian_exactness() {
  double worst = 0.0;
  for (double a : {-0.5, 0.0, 2.0}) {
    const auto fam = PAFamily::affine(a);
    worst = std::max(worst, std::abs(malthusian(fam, fam.theta()) - (2 + a)));
  }
  const auto lin = PAFamily::affine(0.0);
  const LimitLaw law = limit_law(lin, lin.theta());
  double pw = 0.0;
  for (int k = 1; k <= 20; ++k)
    pw = std::max(pw, std::abs(law.p(k) - 4.0 / (k * (k + 1.0) * (k + 2.0))));
  return {worst <= 1e-10 && pw <= 1e-10,
          fmt("max |lambda* - (2+alpha)| %.1e, max |p_k - closed form| %.1e", worst, pw)};
}

Outcome identity_suite() {
  const std::vector<PAFamily> fams{
      PAFamily::power_offset(0.0, 2.0 / 3.0), PAFamily::affine(0.5), PAFamily::log_power(1.2),
      PAFamily::eventually_constant({1.0, 1.8, 2.4}), PAFamily::power_offset(3.0, 0.9)};
  std::int64_t mismatches = 0;
  double s_err = 0.0, l_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    const PAFamily& fam = fams[i % fams.size()];
    const VectorXd th = fam.theta();
    const GrowthResult r = grow(fam, th, 1000, 1000 + i);
    const auto counts = attachment_counts(r.history);
    const auto tail = r.snapshot.tail_counts();
    for (std::int64_t k = 1; k < std::int64_t(std::max(counts.size(), tail.size())); ++k) {
      const std::int64_t a = k < std::int64_t(counts.size()) ? counts[k] : 0;
      const std::int64_t b = k < std::int64_t(tail.size()) ? tail[k] : 0;
      mismatches += a != b;
    }
    const auto trace = total_preference_trace(fam, th, r.history);
    std::map<std::int64_t, std::int64_t> N{{1, 1}};
    for (std::size_t t = 0; t < trace.size(); ++t) {
      double S = 0.0;
      for (auto [k, c] : N) S += c * fam.eval(th, k);
      s_err = std::max(s_err, std::abs(trace[t] - S) / S);
      if (t < r.history.degrees.size()) {
        const std::int64_t d = r.history.degrees[t];
        if (--N[d] == 0) N.erase(d);
        ++N[d + 1];
        ++N[1];
      }
    }
    const double naive = oracle::naive_loglik(fam, th, r.history);
    l_err = std::max(l_err, std::abs(loglik(fam, th, r.history) - naive) / std::max(1.0, std::abs(naive)));
  }
  return {mismatches == 0 && s_err <= 1e-12 && l_err <= 1e-12,
          fmt("count mismatches %.0f, S rel err %.1e, loglik rel err %.1e", double(mismatches), s_err,
              l_err)};
}

Outcome derivative_checks() {
  const auto fam = PAFamily::power_offset(1.0, 0.7);
  std::vector<VectorXd> grid;
  for (auto [a, b] : std::vector<std::pair<double, double>>{
           {1.0, 0.7}, {0.0, 0.5}, {2.5, 0.9}, {-0.5, 0.3}, {5.0, 0.95}}) {
    VectorXd t(2);
    t << a, b;
    grid.push_back(t);
  }
  double gerr = 0.0, herr = 0.0;
  for (int s = 0; s < 10; ++s) {
    const GrowthResult r = grow(fam, fam.theta(), 1000, 77 + s);
    for (const VectorXd& th : grid) {
      const VectorXd g = score(fam, th, r.history);
      const VectorXd gfd = oracle::fd_gradient(
          [&](const VectorXd& x) { return loglik(fam, x, r.history); }, th, 1e-5);
      const MatrixXd H = hessian(fam, th, r.history);
      const MatrixXd Hfd = oracle::fd_jacobian(
          [&](const VectorXd& x) { return score(fam, x, r.history); }, th, 1e-5);
      for (int j = 0; j < 2; ++j)
        gerr = std::max(gerr, std::abs(g[j] - gfd[j]) / std::max(1.0, std::abs(g[j])));
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          herr = std::max(herr, std::abs(H(i, j) - Hfd(i, j)) / std::max(1.0, std::abs(H(i, j))));
    }
  }
  return {gerr <= 1e-6 && herr <= 1e-5, fmt("score rel err %.1e, hessian rel err %.1e", gerr, herr)};
}

Outcome limit_score_zero() {
  const std::vector<PAFamily> fams{
      PAFamily::power_offset(0.0, 2.0 / 3.0), PAFamily::affine(2.0), PAFamily::log_power(1.0),
      PAFamily::eventually_constant({1.0, 2.0, 2.5, 4.0})};
  double worst = 0.0;
  for (const auto& fam : fams) {
    const LimitLaw law = limit_law(fam, fam.theta());
    worst = std::max(worst, limit_score(fam, fam.theta(), law).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-9, fmt("max |limit score| %.1e over four kinds", worst)};
}

Outcome mc_normality() {
  MCConfig c;
  c.n = 10000;
  c.reps = 200;
  c.seed = 606;
  const MCReport r = run_mc(c);
  if (r.failed || !r.reference) return {false, "run failed"};
  const MatrixXd& ref = *r.reference;
  const double N = double(r.estimates.size());
  double worst_se = 0.0;
  for (int i = 0; i < 2; ++i)
    worst_se = std::max(worst_se, std::abs(r.sample_mean_diff[i]) / std::sqrt(ref(i, i) / (c.n * N)));
  const double err = max_rel(r.rescaled_cov, ref);
  return {worst_se <= 4.0 && err <= 0.25,
          fmt("mean diff %.1f SE, n*cov [%.2f %.2f %.2f]", worst_se, r.rescaled_cov(0, 0),
              r.rescaled_cov(0, 1), r.rescaled_cov(1, 1)) +
              fmt(" max rel dev %.3f", err)};
}

Outcome wald_size_power() {
  WaldMCConfig size;
  size.family = PAFamily::power_offset(2.0, 1.0);
  size.n = 100000;
  size.reps = 200;
  size.seed = 707;
  const WaldMCResult s = run_wald_mc(size);
  const CountInterval ci = binomial_acceptance(s.reps - s.failures, 0.05);
  const bool size_ok = ci.contains(s.rejections);

  WaldMCConfig power = size;
  power.family = PAFamily::power_offset(4.0, 0.8);
  power.reps = 50;
  power.seed = 708;
  const WaldMCResult p = run_wald_mc(power);
  const bool power_ok = p.failures == 0 && p.rejections == p.reps;
  return {size_ok && power_ok,
          fmt("f5 rejections %.0f/%.0f (accept %.0f..", double(s.rejections),
              double(s.reps - s.failures), double(ci.lo)) +
              fmt("%.0f), f4 rejections %.0f/%.0f", double(ci.hi), double(p.rejections),
                  double(p.reps))};
}

Outcome urn_closed_form() {
  const auto one = PAFamily::eventually_constant({1.0});
  const MatrixXd S1 = limit_covariance(build_cutoff_urn(one, one.theta(), 1));
  const double e1 = (S1 - sym2(1.0, -1.0, 1.0) / 12.0).cwiseAbs().maxCoeff();

  const int kappa = 4;
  const UrnSystem u = build_affine_urn(0.0, kappa);
  const MatrixXd L = tail_map(kappa, kappa + 1);
  const MatrixXd mapped = L * limit_covariance(u) * L.transpose();
  const MatrixXd R = mori_R(0.0, kappa);
  const double e2 = (mapped - R).cwiseAbs().maxCoeff();
  return {e1 <= 1e-10 && e2 <= 1e-8,
          fmt("f=1 err %.1e; affine L-mapped (1,1) %.6f vs R %.6f, max err %.1e", e1,
              mapped(0, 0), R(0, 0), e2)};
}

Outcome affine_spectrum() {
  double worst = 0.0;
  for (double alpha : {0.0, 2.0}) {
    for (int kappa = 2; kappa <= 8; ++kappa) {
      const UrnSystem u = build_affine_urn(alpha, kappa);
      std::vector<double> want{2 + alpha}, got;
      for (int l = 1; l <= kappa; ++l) want.push_back(-(l + alpha));
      for (Eigen::Index i = 0; i < u.eigenvalues.size(); ++i) {
        got.push_back(u.eigenvalues[i].real());
        worst = std::max(worst, std::abs(u.eigenvalues[i].imag()));
      }
      std::sort(want.begin(), want.end());
      std::sort(got.begin(), got.end());
      if (got.size() != want.size()) return {false, "dimension mismatch"};
      for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    }
  }
  return {worst <= 1e-8, fmt("max eigenvalue deviation %.1e", worst)};
}

Outcome bootstrap_coverage() {
  BootstrapMCConfig c;
  c.n = 10000;
  c.m = 10000;
  c.s = 200;
  c.reps = 200;
  c.seed = 1010;
  const BootstrapWaldResult r = run_bootstrap_wald_mc(c);
  const double a = r.rate(0), b = r.rate(1);
  const bool ok = a >= 0.02 && a <= 0.10 && b >= 0.02 && b <= 0.10 && r.used >= 190;
  return {ok, fmt("alpha=0 rate %.3f, beta=2/3 rate %.3f, %.0f replicates used", a, b, double(r.used))};
}

Outcome estimator_ordering() {
  double tr[3];
  const Estimator es[3] = {Estimator::kMle, Estimator::kPmle, Estimator::kEe};
  for (int i = 0; i < 3; ++i) {
    MCConfig c;
    c.n = 100000;
    c.reps = 200;
    c.seed = 1111;
    c.estimator = es[i];
    c.reference = false;
    const MCReport r = run_mc(c);
    if (r.failed) return {false, std::string(estimator_name(es[i])) + " run failed"};
    tr[i] = r.rescaled_cov.trace();
  }
  return {tr[0] < tr[1] && tr[1] < tr[2] && tr[2] / tr[0] > 5,
          fmt("trace MLE %.1f, PMLE %.1f, EE %.1f, EE/MLE %.1f", tr[0], tr[1], tr[2], tr[2] / tr[0])};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 deterministic V0 inverse", covariance_reproduction},
      {"2 Malthusian parameter and affine law", malthusian_exactness},
      {"3 identity suite", identity_suite},
      {"4 derivative checks", derivative_checks},
      {"5 limit score zero", limit_score_zero},
      {"6 Monte Carlo MLE normality", mc_normality},
      {"7 Wald size and power", wald_size_power},
      {"8 urn covariance closed forms", urn_closed_form},
      {"9 affine urn spectrum", affine_spectrum},
      {"10 bootstrap coverage", bootstrap_coverage},
      {"11 estimator ordering", estimator_ordering}};
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  criterion %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
