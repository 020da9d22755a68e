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


#include "patree/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "patree/error.hpp"
#include "patree/inference.hpp"
#include "patree/parallel.hpp"
#include "patree/rng.hpp"
#include "patree/tree_sim.hpp"

namespace patree {
namespace {

std::string num(double x, const char* spec = "%.6g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

Eigen::VectorXd resolve_theta(const PAFamily& family, const Eigen::VectorXd& theta) {
  Eigen::VectorXd t = theta.size() ? theta : family.theta();
  family.check_theta(t);
  return t;
}

// Failures that exclude a replicate rather than abort the study.
template <class F>
bool tolerate(F&& body) {
  try {
    body();
    return true;
  } catch (const ConvergenceError&) {
  } catch (const InsufficientDataError&) {
  } catch (const DegeneracyError&) {
  }
  return false;
}

void print_matrix(std::ostringstream& os, const std::vector<std::string>& names,
                  const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << "  " << (i < static_cast<Eigen::Index>(names.size()) ? names[i] : "");
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ' ' << num(m(i, j));
    os << '\n';
  }
}

}  // namespace

std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::kMle: return "mle";
    case Estimator::kPmle: return "pmle";
    case Estimator::kEe: return "ee";
  }
  return "?";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "mle") return Estimator::kMle;
  if (name == "pmle") return Estimator::kPmle;
  if (name == "ee") return Estimator::kEe;
  throw DomainError("unknown estimator '" + std::string(name) + "'");
}

FitResult simulate_and_fit(const PAFamily& family, const Eigen::VectorXd& theta0,
                           std::int64_t n, Estimator estimator, Rng& rng) {
  GrowOptions opts;
  opts.record_history = estimator == Estimator::kMle;
  const GrowthResult tree = grow(family, theta0, n, rng, opts);
  switch (estimator) {
    case Estimator::kMle: return fit_mle(family, tree.history);
    case Estimator::kPmle: return fit_pmle(family, tree.snapshot);
    case Estimator::kEe: return fit_ee(family, tree.snapshot);
  }
  throw DomainError("unknown estimator");
}

MCStatistics mc_statistics(const std::vector<Eigen::VectorXd>& estimates,
                           const Eigen::VectorXd& theta0, std::int64_t n) {
  const Eigen::Index d = theta0.size();
  MCStatistics s;
  s.sample_mean_diff = Eigen::VectorXd::Zero(d);
  s.rescaled_cov = Eigen::MatrixXd::Zero(d, d);
  if (estimates.empty()) return s;
  for (const Eigen::VectorXd& t : estimates) {
    const Eigen::VectorXd e = t - theta0;
    s.sample_mean_diff += e;
    s.rescaled_cov += e * e.transpose();
  }
  const double N = static_cast<double>(estimates.size());
  s.sample_mean_diff /= N;
  s.rescaled_cov *= static_cast<double>(n) / N;
  return s;
}

std::string MCReport::report() const {
  std::ostringstream os;
  os << "family: " << family << "\nestimator: " << estimator_name(estimator)
     << "\nn: " << n << "\nreplicates: " << reps << "\nused: " << estimates.size()
     << "\nboundary: " << boundary << '\n';
  if (failures > 0) {
    os << "warning: " << failures << " of " << reps << " fits failed and were excluded\n";
  }
  if (failed) os << "status: FAILED (more than 5% of fits failed)\n";
  os << "sample_mean_diff:";
  for (Eigen::Index i = 0; i < sample_mean_diff.size(); ++i) {
    os << ' ' << num(sample_mean_diff[i], "%.3e");
  }
  os << "\nrescaled_cov:\n";
  print_matrix(os, names, rescaled_cov);
  if (reference) {
    os << "reference V0^-1:\n";
    print_matrix(os, names, *reference);
  }
  return os.str();
}

std::string MCReport::csv() const {
  std::ostringstream os;
  os << "replicate";
  for (const auto& name : names) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    os << replicate[i];
    for (Eigen::Index j = 0; j < estimates[i].size(); ++j) {
      os << ',' << num(estimates[i][j], "%.17g");
    }
    os << '\n';
  }
  return os.str();
}

MCReport run_mc(const MCConfig& config) {
  if (config.n < 2 || config.reps < 1) throw DomainError("run_mc: need n >= 2 and reps >= 1");
  const PAFamily& family = config.family;
  const Eigen::VectorXd theta0 = resolve_theta(family, config.theta0);
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<std::optional<FitResult>> fits(reps);
  parallel_for(reps, config.workers, [&](std::size_t i) {
    Rng rng = Rng::stream(config.seed, i);
    tolerate([&] {
      fits[i] = simulate_and_fit(family, theta0, config.n, config.estimator, rng);
    });
  });

  MCReport r;
  r.family = family.label(theta0);
  r.names = family.free_names();
  r.theta0 = theta0;
  r.n = config.n;
  r.reps = config.reps;
  r.estimator = config.estimator;
  for (std::size_t i = 0; i < reps; ++i) {
    if (!fits[i]) {
      ++r.failures;
      continue;
    }
    r.estimates.push_back(fits[i]->theta_hat);
    r.replicate.push_back(static_cast<std::int64_t>(i));
    if (fits[i]->any_boundary()) ++r.boundary;
  }
  r.failed = static_cast<double>(r.failures) > 0.05 * static_cast<double>(config.reps);
  const MCStatistics s = mc_statistics(r.estimates, theta0, config.n);
  r.sample_mean_diff = s.sample_mean_diff;
  r.rescaled_cov = s.rescaled_cov;
  if (config.reference) {
    try {
      r.reference = fisher_V0(family, theta0).V0_inv;
    } catch (const Error&) {
      r.reference.reset();
    }
  }
  return r;
}

std::vector<QQPoint> emit_qq(const std::vector<double>& estimates,
                             double reference_sd, double center) {
  if (estimates.size() < 10) throw DomainError("emit_qq: need at least 10 estimates");
  if (!(reference_sd > 0.0)) throw DomainError("emit_qq: reference_sd must be positive");
  std::vector<double> x = estimates;
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) throw DegeneracyError("emit_qq: estimates have zero variance");
  const double N = static_cast<double>(x.size());
  std::vector<QQPoint> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i].normal = normal_quantile((static_cast<double>(i) + 0.5) / N);
    out[i].value = (x[i] - center) / reference_sd;
  }
  return out;
}

void write_qq(std::ostream& out, const std::vector<QQPoint>& points) {
  out << "normal_quantile,standardized\n";
  for (const QQPoint& p : points) {
    out << num(p.normal, "%.17g") << ',' << num(p.value, "%.17g") << '\n';
  }
}

double qq_correlation(const std::vector<QQPoint>& points) {
  std::vector<double> a, b;
  for (const QQPoint& p : points) {
    a.push_back(p.normal);
    b.push_back(p.value);
  }
  return correlation(a, b);
}

double WaldMCResult::proportion() const {
  return statistics.empty() ? 0.0
                            : static_cast<double>(rejections) /
                                  static_cast<double>(statistics.size());
}

CountInterval WaldMCResult::acceptance() const {
  return binomial_acceptance(static_cast<std::int64_t>(statistics.size()), size);
}

std::string WaldMCResult::report() const {
  std::ostringstream os;
  const CountInterval ci = acceptance();
  os << "replicates: " << reps << "\nused: " << statistics.size()
     << "\nrejections: " << rejections << "\nproportion: " << num(proportion())
     << "\nsize: " << size << "\nacceptance_95: [" << ci.lo << ", " << ci.hi << "]\n";
  if (failures > 0) os << "warning: " << failures << " fits failed and were excluded\n";
  return os.str();
}

WaldMCResult run_wald_mc(const WaldMCConfig& config) {
  if (config.family.kind() != FamilyKind::kPowerOffset || config.family.dim() != 2) {
    throw DomainError("run_wald_mc: needs a power-offset family with free alpha and beta");
  }
  const Eigen::VectorXd theta0 = resolve_theta(config.family, config.theta0);
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<std::optional<WaldReport>> tests(reps);
  parallel_for(reps, config.workers, [&](std::size_t i) {
    Rng rng = Rng::stream(config.seed, i);
    tolerate([&] {
      const GrowthResult tree = grow(config.family, theta0, config.n, rng);
      tests[i] = wald_affinity(tree.history, config.plugin, config.size);
    });
  });
  WaldMCResult r;
  r.reps = config.reps;
  r.size = config.size;
  for (const auto& t : tests) {
    if (!t) {
      ++r.failures;
      continue;
    }
    r.statistics.push_back(t->statistic);
    if (t->reject) ++r.rejections;
  }
  return r;
}

double BootstrapWaldResult::rate(int coordinate) const {
  return used == 0 ? 0.0
                   : static_cast<double>(rejections.at(coordinate)) /
                         static_cast<double>(used);
}

std::string BootstrapWaldResult::report() const {
  std::ostringstream os;
  os << "replicates: " << reps << "\nused: " << used << "\nsize: " << size << '\n';
  for (std::size_t c = 0; c < names.size(); ++c) {
    os << "H0 " << names[c] << ": rejections " << rejections[c] << " rate "
       << num(rate(static_cast<int>(c))) << '\n';
  }
  return os.str();
}

BootstrapWaldResult run_bootstrap_wald_mc(const BootstrapMCConfig& config) {
  const PAFamily& family = config.family;
  const Eigen::VectorXd theta0 = resolve_theta(family, config.theta0);
  const int d = family.dim();
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<std::optional<std::vector<WaldReport>>> tests(reps);
  parallel_for(reps, config.workers, [&](std::size_t i) {
    Rng rng = Rng::stream(config.seed, i);
    tolerate([&] {
      const FitResult fit =
          simulate_and_fit(family, theta0, config.n, Estimator::kPmle, rng);
      std::vector<WaldReport> row;
      for (int c = 0; c < d; ++c) {
        Eigen::VectorXd null_theta = fit.theta_hat;
        null_theta[c] = theta0[c];
        const BootstrapVariance bv = bootstrap_variance(
            family, null_theta, config.m, config.s, rng(), 1);
        row.push_back(bootstrap_wald(fit.theta_hat, bv.sigma_tilde, c, theta0[c],
                                     config.n, config.size));
      }
      tests[i] = std::move(row);
    });
  });
  BootstrapWaldResult r;
  r.names = family.free_names();
  r.statistics.assign(d, {});
  r.rejections.assign(d, 0);
  r.reps = config.reps;
  r.size = config.size;
  for (const auto& t : tests) {
    if (!t) continue;
    ++r.used;
    for (int c = 0; c < d; ++c) {
      r.statistics[c].push_back((*t)[c].statistic);
      if ((*t)[c].reject) ++r.rejections[c];
    }
  }
  return r;
}

ProjectedBootstrapResult run_projected_bootstrap_qq(const BootstrapMCConfig& config) {
  const PAFamily& family = config.family;
  const Eigen::VectorXd theta0 = resolve_theta(family, config.theta0);
  const int d = family.dim();
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<std::optional<double>> values(reps);
  parallel_for(reps, config.workers, [&](std::size_t i) {
    Rng rng = Rng::stream(config.seed, i);
    tolerate([&] {
      const FitResult fit =
          simulate_and_fit(family, theta0, config.n, Estimator::kPmle, rng);
      const BootstrapVariance bv =
          bootstrap_variance(family, fit.theta_hat, config.m, config.s, rng(), 1);
      if (Eigen::LLT<Eigen::MatrixXd>(bv.sigma_tilde).info() != Eigen::Success ||
          min_eigenvalue(bv.sigma_tilde) <= 0.0) {
        return;
      }
      Eigen::VectorXd r(d);
      for (int j = 0; j < d; ++j) r[j] = rng.normal();
      r.normalize();
      const Eigen::VectorXd x =
          config.center ? Eigen::VectorXd(fit.theta_hat - theta0) : fit.theta_hat;
      values[i] = std::sqrt(static_cast<double>(config.n)) *
                  r.dot(inverse_sqrt_psd(bv.sigma_tilde) * x);
    });
  });
  ProjectedBootstrapResult out;
  for (const auto& v : values) {
    if (v) {
      out.d.push_back(*v);
    } else {
      ++out.dropped;
    }
  }
  if (out.d.size() >= 10) {
    out.qq = emit_qq(out.d, 1.0);
    out.ks = ks_normal_statistic(out.d);
  }
  return out;
}

}  // namespace patree
