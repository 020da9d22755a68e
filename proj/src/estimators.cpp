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


#include "patree/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>

#include "patree/kernels.hpp"

namespace patree {
namespace {

constexpr std::size_t kCesaroStride = 1024;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Pointers to the table columns in cesaro row order.
std::vector<const double*> table_columns(const DegreeTable& table, int rows) {
  std::vector<const double*> cols(rows);
  cols[0] = table.value.data();
  const int d = table.dim;
  for (int r = 1; r < rows; ++r) {
    cols[r] = r <= d ? table.grad[r - 1].data() : table.hess[r - 1 - d].data();
  }
  return cols;
}

int rows_for(int d, int order) {
  return order >= 2 ? kernels::cesaro_rows(d) : (order == 1 ? 1 + d : 1);
}

// Adds count * (log f, g/f, H/f - g g^T/f^2) at degree k into out.
void add_degree_terms(const DegreeTable& t, std::int64_t k, double weight,
                      int order, Evaluation& out) {
  const int d = t.dim;
  const double f = t.value[k];
  out.value += weight * std::log(f);
  if (order < 1) return;
  for (int j = 0; j < d; ++j) out.grad[j] += weight * t.grad[j][k] / f;
  if (order < 2) return;
  for (int j = 0; j < d; ++j) {
    for (int l = j; l < d; ++l) {
      const double h = t.hess[packed_index(j, l, d)][k] / f -
                       (t.grad[j][k] / f) * (t.grad[l][k] / f);
      out.hess(j, l) += weight * h;
      if (l != j) out.hess(l, j) += weight * h;
    }
  }
}

Evaluation zero_evaluation(int d, int order) {
  Evaluation e;
  if (order >= 1) e.grad = Eigen::VectorXd::Zero(d);
  if (order >= 2) e.hess = Eigen::MatrixXd::Zero(d, d);
  return e;
}

std::vector<double> ratio_targets(const DegreeSnapshot& snapshot, int d) {
  for (std::int64_t k = 1; k <= d + 1; ++k) {
    if (snapshot.count(k) == 0) {
      throw InsufficientDataError("empirical estimator needs N_" +
                                  std::to_string(k) + "(n) > 0");
    }
  }
  const double r1 = empirical_rk(snapshot, 1);
  if (!(r1 > 0.0)) {
    throw InsufficientDataError("no node above degree one; ratios undefined");
  }
  std::vector<double> ratios(d + 2, 0.0);
  for (int k = 2; k <= d + 1; ++k) ratios[k] = empirical_rk(snapshot, k) / r1;
  return ratios;
}

}  // namespace

bool FitResult::any_boundary() const {
  return std::any_of(at_boundary.begin(), at_boundary.end(),
                     [](bool b) { return b; });
}

std::string FitResult::report(const std::vector<std::string>& names) const {
  std::ostringstream os;
  os << "method: " << method << '\n';
  for (Eigen::Index i = 0; i < theta_hat.size(); ++i) {
    const std::string name =
        i < static_cast<Eigen::Index>(names.size()) ? names[i] : "theta" + std::to_string(i);
    os << name << ": " << fmt(theta_hat[i]);
    if (i < static_cast<Eigen::Index>(at_boundary.size()) && at_boundary[i])
      os << " (at bound)";
    os << '\n';
  }
  os << "objective: " << fmt(objective) << '\n';
  os << "score_norm: " << fmt(score_norm) << '\n';
  os << "iterations: " << iterations << '\n';
  os << "converged: " << (converged ? "yes" : "no") << '\n';
  return os.str();
}

std::string FitResult::csv_header(const std::vector<std::string>& names) {
  std::string out = "method";
  for (const auto& n : names) out += "," + n;
  out += ",objective,score_norm,iterations,converged";
  for (const auto& n : names) out += "," + n + "_at_bound";
  return out;
}

std::string FitResult::csv_row() const {
  std::string out = method;
  for (Eigen::Index i = 0; i < theta_hat.size(); ++i) out += "," + fmt(theta_hat[i]);
  out += "," + fmt(objective) + "," + fmt(score_norm) + "," +
         std::to_string(iterations) + "," + (converged ? "1" : "0");
  for (bool b : at_boundary) out += b ? ",1" : ",0";
  return out;
}

Evaluation history_likelihood(const PAFamily& family,
                              const Eigen::VectorXd& theta,
                              const HistorySource& source, int order) {
  family.check_theta(theta);
  const int d = family.dim();
  const int rows = rows_for(d, order);
  DegreeTable table = family.tabulate(theta, 64, order);
  std::vector<const double*> cols = table_columns(table, rows);

  std::vector<double> run(rows);
  for (int r = 0; r < rows; ++r) run[r] = cols[r][1];
  std::vector<double> buf(static_cast<std::size_t>(rows) * kCesaroStride);
  std::vector<double> acc(rows, 0.0);
  std::vector<std::int64_t> counts(table.kmax + 1, 0);
  std::size_t fill = 0;

  auto flush = [&] {
    kernels::CesaroBlock block{buf.data(), kCesaroStride, fill, d, order};
    kernels::cesaro_accumulate(block, acc.data());
    fill = 0;
  };

  source.for_each_block([&](std::span<const std::int32_t> degrees) {
    std::int32_t top = 0;
    for (std::int32_t D : degrees) {
      if (D < 1) throw IntegrityError("attachment degree must be positive");
      top = std::max(top, D);
    }
    if (top + 1 > table.kmax) {
      family.extend(table, theta, std::max<std::int64_t>(top + 1, 2 * table.kmax));
      cols = table_columns(table, rows);
      counts.resize(table.kmax + 1, 0);
    }
    for (std::int32_t D : degrees) {
      for (int r = 0; r < rows; ++r) buf[r * kCesaroStride + fill] = run[r];
      for (int r = 0; r < rows; ++r) {
        const double* c = cols[r];
        run[r] += c[D + 1] - c[D] + c[1];
      }
      ++counts[D];
      if (++fill == kCesaroStride) flush();
    }
  });
  if (fill > 0) flush();

  const double n = static_cast<double>(source.n());
  Evaluation out = zero_evaluation(d, order);
  for (std::int64_t k = 1; k < static_cast<std::int64_t>(counts.size()); ++k) {
    if (counts[k] > 0) add_degree_terms(table, k, static_cast<double>(counts[k]), order, out);
  }
  out.value = (out.value - acc[0]) / n;
  if (order >= 1) {
    for (int j = 0; j < d; ++j) out.grad[j] = (out.grad[j] - acc[1 + j]) / n;
  }
  if (order >= 2) {
    for (int j = 0; j < d; ++j) {
      for (int l = j; l < d; ++l) {
        const double v = (out.hess(j, l) - acc[1 + d + packed_index(j, l, d)]) / n;
        out.hess(j, l) = v;
        out.hess(l, j) = v;
      }
    }
  }
  return out;
}

double loglik(const PAFamily& family, const Eigen::VectorXd& theta,
              const GrowthHistory& history) {
  return history_likelihood(family, theta, MemoryHistory(history), 0).value;
}

Eigen::VectorXd score(const PAFamily& family, const Eigen::VectorXd& theta,
                      const GrowthHistory& history) {
  return history_likelihood(family, theta, MemoryHistory(history), 1).grad;
}

Eigen::MatrixXd hessian(const PAFamily& family, const Eigen::VectorXd& theta,
                        const GrowthHistory& history) {
  return history_likelihood(family, theta, MemoryHistory(history), 2).hess;
}

Evaluation snapshot_likelihood(const PAFamily& family,
                               const Eigen::VectorXd& theta,
                               const DegreeSnapshot& snapshot, int order) {
  family.check_theta(theta);
  snapshot.validate();
  const int d = family.dim();
  const std::int64_t K = snapshot.max_degree();
  const DegreeTable table = family.tabulate(theta, K, order);
  const std::vector<std::int64_t> tail = snapshot.tail_counts();
  const double n = static_cast<double>(snapshot.n);

  Evaluation out = zero_evaluation(d, order);
  double sf = 0.0;
  Eigen::VectorXd sg = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd sh = Eigen::MatrixXd::Zero(d, d);
  for (std::int64_t k = 1; k <= K; ++k) {
    if (tail[k] > 0) add_degree_terms(table, k, static_cast<double>(tail[k]) / n, order, out);
    const double c = static_cast<double>(snapshot.counts[k]);
    if (c == 0.0) continue;
    sf += c * table.value[k];
    if (order >= 1)
      for (int j = 0; j < d; ++j) sg[j] += c * table.grad[j][k];
    if (order >= 2)
      for (int j = 0; j < d; ++j)
        for (int l = j; l < d; ++l) sh(j, l) += c * table.hess[packed_index(j, l, d)][k];
  }
  out.value -= std::log(sf);
  if (order >= 1) out.grad -= sg / sf;
  if (order >= 2) {
    sh.triangularView<Eigen::StrictlyLower>() = sh.transpose();
    out.hess -= sh / sf - (sg / sf) * (sg / sf).transpose();
  }
  return out;
}

double pseudo_loglik(const PAFamily& family, const Eigen::VectorXd& theta,
                     const DegreeSnapshot& snapshot) {
  return snapshot_likelihood(family, theta, snapshot, 0).value;
}

Eigen::VectorXd pseudo_score(const PAFamily& family,
                             const Eigen::VectorXd& theta,
                             const DegreeSnapshot& snapshot) {
  return snapshot_likelihood(family, theta, snapshot, 1).grad;
}

Eigen::MatrixXd pseudo_hessian(const PAFamily& family,
                               const Eigen::VectorXd& theta,
                               const DegreeSnapshot& snapshot) {
  return snapshot_likelihood(family, theta, snapshot, 2).hess;
}

double empirical_rk(const DegreeSnapshot& snapshot, std::int64_t k) {
  const std::int64_t nk = snapshot.count(k);
  if (nk == 0) {
    throw InsufficientDataError("r_" + std::to_string(k) +
                                " undefined: no node of that degree");
  }
  std::int64_t above = 0;
  for (std::int64_t j = k + 1; j <= snapshot.max_degree(); ++j) above += snapshot.counts[j];
  return static_cast<double>(above) / static_cast<double>(nk);
}

EmpiricalFit solve_ratio_system(const PAFamily& family,
                                const std::vector<double>& ratios) {
  const int d = family.dim();
  if (static_cast<int>(ratios.size()) < d + 2) {
    throw DomainError("ratio vector too short for the family dimension");
  }
  Eigen::VectorXd target(d);
  for (int i = 0; i < d; ++i) {
    const double r = ratios[i + 2];
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw InsufficientDataError("ratio r_" + std::to_string(i + 2) +
                                  "/r_1 is zero or undefined");
    }
    target[i] = std::log(r);
  }
  const Eigen::VectorXd lo = family.lower(), hi = family.upper();

  auto residual = [&](const Eigen::VectorXd& th, Eigen::MatrixXd* jac) {
    const DegreeTable t = family.tabulate(th, d + 1, jac ? 1 : 0);
    Eigen::VectorXd res(d);
    for (int i = 0; i < d; ++i) {
      const int k = i + 2;
      res[i] = std::log(t.value[k]) - std::log(t.value[1]) - target[i];
      if (jac) {
        for (int j = 0; j < d; ++j)
          (*jac)(i, j) = t.grad[j][k] / t.value[k] - t.grad[j][1] / t.value[1];
      }
    }
    return res;
  };

  auto run = [&](Eigen::VectorXd th, bool* ok) {
    th = th.cwiseMax(lo).cwiseMin(hi);
    Eigen::MatrixXd J(d, d);
    Eigen::VectorXd res = residual(th, &J);
    double phi = 0.5 * res.squaredNorm();
    double mu = 1e-3;
    *ok = false;
    for (int it = 0; it < 500; ++it) {
      const Eigen::VectorXd b = J.transpose() * res;
      double proj = 0.0;
      std::vector<int> free_set;
      for (int j = 0; j < d; ++j) {
        const bool blocked = (th[j] - lo[j] <= 1e-12 && b[j] > 0.0) ||
                             (hi[j] - th[j] <= 1e-12 && b[j] < 0.0);
        if (!blocked) {
          proj = std::max(proj, std::abs(b[j]));
          free_set.push_back(j);
        }
      }
      if (res.cwiseAbs().maxCoeff() <= 1e-13 || proj <= 1e-13) {
        *ok = true;
        break;
      }
      // Damped Gauss-Newton on the coordinates not held by a bound.
      const int nf = static_cast<int>(free_set.size());
      Eigen::MatrixXd Jf(d, nf);
      for (int j = 0; j < nf; ++j) Jf.col(j) = J.col(free_set[j]);
      const Eigen::MatrixXd A = Jf.transpose() * Jf;
      Eigen::MatrixXd M = A;
      M.diagonal() += mu * (A.diagonal().array() + 1e-12).matrix();
      const Eigen::VectorXd sf = M.ldlt().solve(-(Jf.transpose() * res));
      Eigen::VectorXd step = Eigen::VectorXd::Zero(d);
      for (int j = 0; j < nf; ++j) step[free_set[j]] = sf[j];
      const Eigen::VectorXd cand = (th + step).cwiseMax(lo).cwiseMin(hi);
      Eigen::MatrixXd Jc(d, d);
      const Eigen::VectorXd rc = residual(cand, &Jc);
      const double pc = 0.5 * rc.squaredNorm();
      if (std::isfinite(pc) && pc < phi) {
        th = cand;
        res = rc;
        J = Jc;
        phi = pc;
        mu = std::max(mu * 0.1, 1e-15);
      } else {
        mu *= 10.0;
        if (mu > 1e12) {
          *ok = proj <= 1e-8;
          break;
        }
      }
    }
    return std::make_pair(th, phi);
  };

  std::vector<Eigen::VectorXd> starts{family.theta(), family.center()};
  if (d <= 3) {
    for (int mask = 0; mask < (1 << d); ++mask) {
      Eigen::VectorXd s(d);
      for (int j = 0; j < d; ++j)
        s[j] = lo[j] + (mask >> j & 1 ? 0.75 : 0.25) * (hi[j] - lo[j]);
      starts.push_back(s);
    }
  }
  bool found = false;
  Eigen::VectorXd best;
  double best_phi = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    bool ok = false;
    auto [th, phi] = run(s, &ok);
    if (ok && phi < best_phi) {
      best = th;
      best_phi = phi;
      found = true;
      if (phi <= 1e-26) break;
    }
  }
  if (!found) {
    throw ConvergenceError("empirical estimator did not converge from any start");
  }
  EmpiricalFit out;
  out.theta = best;
  out.residual = residual(best, nullptr).cwiseAbs().maxCoeff();
  out.at_boundary.resize(d);
  for (int j = 0; j < d; ++j)
    out.at_boundary[j] = best[j] - lo[j] <= 1e-10 || hi[j] - best[j] <= 1e-10;
  return out;
}

EmpiricalFit empirical_fit_detail(const PAFamily& family,
                                  const DegreeSnapshot& snapshot) {
  return solve_ratio_system(family, ratio_targets(snapshot, family.dim()));
}

Eigen::VectorXd empirical_fit(const PAFamily& family,
                              const DegreeSnapshot& snapshot) {
  return empirical_fit_detail(family, snapshot).theta;
}

double ratio_discrepancy(const PAFamily& family, const Eigen::VectorXd& theta,
                         const DegreeSnapshot& snapshot) {
  const int d = family.dim();
  const std::vector<double> ratios = ratio_targets(snapshot, d);
  const DegreeTable t = family.tabulate(theta, d + 1, 0);
  double sum = 0.0;
  for (int k = 2; k <= d + 1; ++k) sum += std::abs(t.value[k] / t.value[1] - ratios[k]);
  return sum;
}

Eigen::VectorXd hybrid_select(const PAFamily& family,
                              const std::vector<Eigen::VectorXd>& candidates,
                              const DegreeSnapshot& snapshot) {
  if (candidates.empty()) throw DomainError("no candidate roots");
  if (candidates.size() == 1) return candidates.front();
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double v = ratio_discrepancy(family, candidates[i], snapshot);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  return candidates[best];
}

namespace {

using Start = std::function<Eigen::VectorXd()>;

FitResult run_fit(const std::string& method, const Objective& objective,
                  const PAFamily& family, const std::vector<Start>& starts,
                  const FitOptions& options) {
  FitResult best;
  best.method = method;
  bool have = false;
  std::string last_message = "no usable starting point";
  for (const auto& start : starts) {
    OptimizerResult r;
    try {
      r = maximize_in_box(objective, family.lower(), family.upper(), start(),
                          options.optimizer);
    } catch (const Error& e) {
      // Starting points that cannot be computed or evaluated are skipped.
      last_message = e.what();
      continue;
    }
    FitResult fit;
    fit.method = method;
    fit.theta_hat = r.theta;
    fit.objective = r.eval.value;
    fit.score_norm = r.projected_score;
    fit.iterations = r.iterations;
    fit.converged = r.converged;
    fit.at_boundary = r.at_boundary;
    if (fit.converged) return fit;
    last_message = r.message;
    if (!have || fit.objective > best.objective) {
      best = fit;
      have = true;
    }
  }
  throw FitFailure(method + " fit did not converge: " + last_message, best);
}

// init if given, else the empirical estimator, then the box center and the
// family's reference point as restarts. Evaluated lazily.
std::vector<Start> default_starts(const PAFamily& family,
                                  const std::optional<Eigen::VectorXd>& init,
                                  std::function<DegreeSnapshot()> snapshot,
                                  const FitOptions& options) {
  std::vector<Start> starts;
  if (init) {
    const Eigen::VectorXd x = family.project(*init);
    starts.push_back([x] { return x; });
  }
  if (!init || options.restart) {
    starts.push_back([&family, snapshot] { return empirical_fit(family, snapshot()); });
    starts.push_back([&family] { return family.center(); });
  }
  if (options.restart) {
    starts.push_back([&family] { return family.project(family.theta()); });
  }
  return starts;
}

}  // namespace

FitResult fit_mle(const PAFamily& family, const HistorySource& source,
                  const std::optional<Eigen::VectorXd>& init,
                  const FitOptions& options) {
  if (source.n() < 2) throw InsufficientDataError("history has no attachments");
  Objective obj = [&](const Eigen::VectorXd& th, int order) {
    return history_likelihood(family, th, source, order);
  };
  return run_fit("mle", obj, family,
                 default_starts(family, init, [&] { return snapshot_of(source); },
                                options),
                 options);
}

FitResult fit_mle(const PAFamily& family, const GrowthHistory& history,
                  const std::optional<Eigen::VectorXd>& init,
                  const FitOptions& options) {
  return fit_mle(family, MemoryHistory(history), init, options);
}

FitResult fit_pmle(const PAFamily& family, const DegreeSnapshot& snapshot,
                   const std::optional<Eigen::VectorXd>& init,
                   const FitOptions& options) {
  snapshot.validate();
  if (snapshot.n < 2) throw InsufficientDataError("snapshot has a single node");
  Objective obj = [&](const Eigen::VectorXd& th, int order) {
    return snapshot_likelihood(family, th, snapshot, order);
  };
  return run_fit("pmle", obj, family,
                 default_starts(family, init, [&] { return snapshot; }, options),
                 options);
}

FitResult fit_ee(const PAFamily& family, const DegreeSnapshot& snapshot) {
  const EmpiricalFit ee = empirical_fit_detail(family, snapshot);
  FitResult fit;
  fit.method = "ee";
  fit.theta_hat = ee.theta;
  fit.objective = ee.residual;
  fit.score_norm = ee.residual;
  fit.converged = true;
  fit.at_boundary = ee.at_boundary;
  return fit;
}

}  // namespace patree
