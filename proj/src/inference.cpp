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


#include "patree/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "patree/error.hpp"
#include "patree/parallel.hpp"
#include "patree/stats.hpp"
#include "patree/tree_sim.hpp"

namespace patree {
namespace {

constexpr double kTailLimit = 1e-6;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

// f, grad f and the packed Hessian of f at one degree, in free coordinates.
struct Point {
  double x = 0.0;  // degree
  double f = 0.0;
  Eigen::VectorXd g;
  Eigen::VectorXd h;
};

Point table_point(const DegreeTable& t, std::int64_t k) {
  Point pt;
  pt.x = static_cast<double>(k);
  pt.f = t.value[k];
  pt.g.resize(t.dim);
  for (int j = 0; j < t.dim; ++j) pt.g[j] = t.order >= 1 ? t.grad[j][k] : 0.0;
  pt.h = Eigen::VectorXd::Zero(packed_size(t.dim));
  if (t.order >= 2) {
    for (int i = 0; i < packed_size(t.dim); ++i) pt.h[i] = t.hess[i][k];
  }
  return pt;
}

// The same at a real degree x; only power-offset and affine preferences,
// the families whose limit law can be affine.
std::optional<Point> real_point(const PAFamily& family, const Eigen::VectorXd& full,
                                double x) {
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  double f = 0.0;
  if (family.kind() == FamilyKind::kPowerOffset) {
    const double alpha = full[0], beta = full[1], y = x + alpha, ly = std::log(y);
    f = std::pow(y, beta);
    g.resize(2);
    g << beta * f / y, f * ly;
    h.resize(2, 2);
    h(0, 0) = beta * (beta - 1.0) * f / (y * y);
    h(0, 1) = h(1, 0) = f / y * (1.0 + beta * ly);
    h(1, 1) = f * ly * ly;
  } else if (family.kind() == FamilyKind::kAffine) {
    f = x + full[0];
    g = Eigen::VectorXd::Ones(1);
    h = Eigen::MatrixXd::Zero(1, 1);
  } else {
    return std::nullopt;
  }
  const std::vector<int>& free = family.free_indices();
  const int d = static_cast<int>(free.size());
  Point pt;
  pt.x = x;
  pt.f = f;
  pt.g.resize(d);
  pt.h.resize(packed_size(d));
  for (int j = 0; j < d; ++j) {
    pt.g[j] = g[free[j]];
    for (int l = j; l < d; ++l) pt.h[packed_index(j, l, d)] = h(free[j], free[l]);
  }
  return pt;
}

// Visits k = 1..K with weights (p_{>k}, p_k).
template <class Visit>
void visit_body(const DegreeTable& t, const LimitLaw& law, Visit&& visit) {
  for (std::int64_t k = 1; k <= law.truncation(); ++k) {
    visit(table_point(t, k), law.tail_probs[k - 1], law.probs[k - 1]);
  }
}

// Visits a quadrature of the degrees beyond K and returns a relative error
// estimate for what it visited.
//
// Affine laws have power tails, and the log-weights of beta make freezing the
// summand at K too crude, so the sum is replaced by the midpoint integral
// over [K + 1/2, inf) of the closed-form law, in t = log x on Gauss-Legendre
// panels. Other laws decay faster than any power; there the summand ratio to
// f0 is frozen at K, with M = sum_{l>K} f0(l) p_l and f0(l) p_l = lambda p_{>l}:
//   sum_{l>K} p_l h(l) ~ h(K) / f0(K) * M,  sum_{l>K} p_{>l} h(l) ~ h(K) M / lambda.
template <class Visit>
double visit_tail(const PAFamily& family, const Eigen::VectorXd& theta,
                  const DegreeTable& t, const LimitLaw& law, Visit&& visit) {
  const std::int64_t K = law.truncation();
  const Eigen::VectorXd full = family.expand(theta);
  if (law.affine && real_point(family, full, K + 1.0)) {
    using Gauss = boost::math::quadrature::gauss<double, 10>;
    const double a = law.affine_alpha, lambda = law.lambda_star;
    const double x0 = K + 0.5;
    // p_x = C Gamma(x + a) / Gamma(x + 3 + 2a), anchored at p_K.
    auto ratio = [&](double x) { return boost::math::tgamma_delta_ratio(x + a, 3.0 + a); };
    const double scale = law.p(K) / ratio(static_cast<double>(K));
    auto p_at = [&](double x) { return scale * ratio(x); };
    const double width = 0.5;
    const double t_max = std::log(1e300 / x0);
    double start_mass = -1.0;
    for (double lo = 0.0; lo < t_max; lo += width) {
      double panel_mass = 0.0;
      for (std::size_t i = 0; i < Gauss::abscissa().size(); ++i) {
        for (double sign : {-1.0, 1.0}) {
          const double node = Gauss::abscissa()[i];
          if (node == 0.0 && sign > 0) continue;
          const double tt = lo + width * 0.5 * (1.0 + sign * node);
          const double x = x0 * std::exp(tt);
          const double w = Gauss::weights()[i] * width * 0.5 * x;
          const double p = p_at(x);
          const double pa = (x + a) * p / lambda;
          visit(*real_point(family, full, x), w * pa, w * p);
          panel_mass += w * pa * (1.0 + std::log(x) * std::log(x));
        }
      }
      if (start_mass < 0.0) start_mass = panel_mass;
      if (panel_mass < 1e-17 * start_mass) break;
    }
    // Midpoint-rule error of a summand decaying like x^{-(2 + a)} log^2 x.
    return (3.0 + std::abs(a)) / (24.0 * x0 * x0) * (1.0 + std::log(x0));
  }
  const double f0K = law.lambda_star * law.tail_mass / law.p(K);
  visit(table_point(t, K), law.tail_moment / law.lambda_star, law.tail_moment / f0K);
  return 1.0;
}

void check_law(const LimitLaw& law) {
  if (law.truncation() < 1 || !(law.lambda_star > 0.0)) {
    throw DomainError("limit law is empty");
  }
}

}  // namespace

Eigen::Matrix2d PowerOffsetMoments::hessian() const {
  Eigen::Matrix2d h;
  h << a * b - c * c, a * d - c * e, a * d - c * e, a * f - e * e;
  return -h / (a * a);
}

Eigen::VectorXd limit_score(const PAFamily& family, const Eigen::VectorXd& theta,
                            const LimitLaw& law0) {
  check_law(law0);
  const int d = family.dim();
  const DegreeTable t = family.tabulate(theta, law0.truncation(), 1);

  struct Sums {
    Eigen::VectorXd first, num;
    double den = 0.0;
  };
  auto zero = [d] { return Sums{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d), 0.0}; };
  auto into = [](Sums& s) {
    return [&s](const Point& pt, double pa, double p) {
      s.first += pt.g / pt.f * pa;
      s.num += p * pt.g;
      s.den += p * pt.f;
    };
  };
  Sums body = zero(), tail = zero();
  visit_body(t, law0, into(body));
  const double rel = visit_tail(family, theta, t, law0, into(tail));
  const double den = body.den + tail.den;
  const double tail_size =
      rel * std::max({tail.first.cwiseAbs().maxCoeff(), tail.num.cwiseAbs().maxCoeff(),
                      tail.den / den});
  if (tail_size > kTailLimit) {
    throw TruncationError("limit score tail contribution " + fmt(tail_size) +
                          " exceeds " + fmt(kTailLimit));
  }
  return body.first + tail.first - (body.num + tail.num) / den;
}

Eigen::MatrixXd limit_hessian(const PAFamily& family,
                              const Eigen::VectorXd& theta,
                              const LimitLaw& law0) {
  check_law(law0);
  const int d = family.dim();
  const DegreeTable t = family.tabulate(theta, law0.truncation(), 2);

  Eigen::MatrixXd first = Eigen::MatrixXd::Zero(d, d), sh = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd sg = Eigen::VectorXd::Zero(d);
  double sf = 0.0;
  auto add = [&](const Point& pt, double pa, double p) {
    const double f = pt.f;
    sg += p * pt.g;
    for (int j = 0; j < d; ++j) {
      for (int l = j; l < d; ++l) {
        const double h = pt.h[packed_index(j, l, d)];
        first(j, l) += (h / f - pt.g[j] * pt.g[l] / (f * f)) * pa;
        sh(j, l) += p * h;
      }
    }
    sf += p * f;
  };
  visit_body(t, law0, add);
  visit_tail(family, theta, t, law0, add);
  first.triangularView<Eigen::StrictlyLower>() = first.transpose();
  sh.triangularView<Eigen::StrictlyLower>() = sh.transpose();
  return first - (sh / sf - (sg / sf) * (sg / sf).transpose());
}

AsymptoticInfo fisher_V0(const PAFamily& family, const Eigen::VectorXd& theta0,
                         const LimitLaw& law0) {
  check_law(law0);
  const int d = family.dim();
  const std::int64_t K = law0.truncation();
  const DegreeTable t = family.tabulate(theta0, K, 1);

  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d), t1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(d, d), t2 = Eigen::MatrixXd::Zero(d, d);
  visit_body(t, law0, [&](const Point& pt, double pa, double) {
    const Eigen::VectorXd u = pt.g / pt.f;
    s1 += pa * u;
    s2.noalias() += pa * u * u.transpose();
  });
  const double rel = visit_tail(family, theta0, t, law0, [&](const Point& pt, double pa, double) {
    const Eigen::VectorXd u = pt.g / pt.f;
    t1 += pa * u;
    t2.noalias() += pa * u * u.transpose();
  });
  s1 += t1;
  s2 += t2;

  AsymptoticInfo info;
  info.truncation_K = K;
  info.truncation_error_bound =
      rel * (t2.cwiseAbs().maxCoeff() + 2.0 * t1.cwiseAbs().maxCoeff() * s1.cwiseAbs().maxCoeff());
  if (info.truncation_error_bound > kTailLimit) {
    throw TruncationError("V0 tail contribution " + fmt(info.truncation_error_bound) +
                          " exceeds " + fmt(kTailLimit));
  }
  info.V0 = s2 - s1 * s1.transpose();
  info.V0 = 0.5 * (info.V0 + info.V0.transpose());
  if (!(min_eigenvalue(info.V0) > 0.0)) {
    throw DegeneracyError("V0 is not positive definite");
  }
  info.V0_inv = info.V0.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
  info.V0_inv = 0.5 * (info.V0_inv + info.V0_inv.transpose());
  info.hessian_limit = limit_hessian(family, theta0, law0);

  if (family.kind() == FamilyKind::kPowerOffset && d == 2) {
    const Eigen::VectorXd full = family.expand(theta0);
    const double alpha = full[0], beta = full[1];
    PowerOffsetMoments m;
    auto add = [&](const Point& pt, double, double p) {
      const double x = pt.x + alpha;
      const double lx = std::log(x), pf = p * pt.f;
      m.a += pf;
      m.b += pf * beta * beta / (x * x);
      m.c += pf * beta / x;
      m.d += pf * beta * lx / x;
      m.e += pf * lx;
      m.f += pf * lx * lx;
    };
    visit_body(t, law0, add);
    visit_tail(family, theta0, t, law0, add);
    info.moments = m;
  }
  return info;
}

AsymptoticInfo fisher_V0(const PAFamily& family, const Eigen::VectorXd& theta0) {
  return fisher_V0(family, theta0, limit_law(family, theta0, kAnalyticTailTol));
}

std::string WaldReport::report() const {
  std::ostringstream os;
  os << "statistic: " << fmt(statistic) << '\n'
     << "critical_value: " << fmt(critical_value) << '\n'
     << "size: " << fmt(size) << '\n'
     << "sides: " << (two_sided ? "two" : "left") << '\n'
     << "variance_entry: " << fmt(variance_entry) << '\n'
     << "reject: " << (reject ? "yes" : "no") << '\n';
  return os.str();
}

std::string WaldReport::csv_header() {
  return "statistic,critical_value,size,two_sided,variance_entry,reject";
}

std::string WaldReport::csv_row() const {
  return fmt(statistic) + "," + fmt(critical_value) + "," + fmt(size) + "," +
         (two_sided ? "1" : "0") + "," + fmt(variance_entry) + "," + (reject ? "1" : "0");
}

WaldReport wald_affinity(double alpha_hat, double beta_hat, std::int64_t n,
                         double size) {
  if (n < 2) throw DomainError("Wald test needs n >= 2");
  const PAFamily affine = PAFamily::power_offset(alpha_hat, 1.0);
  const AsymptoticInfo info = fisher_V0(affine, affine.theta());
  WaldReport r;
  r.size = size;
  r.variance_entry = info.V0_inv(1, 1);
  if (!std::isfinite(r.variance_entry) || !(r.variance_entry > 0.0)) {
    throw DegeneracyError("Wald variance entry is not a positive finite number");
  }
  r.statistic = std::sqrt(static_cast<double>(n)) * (beta_hat - 1.0) /
                std::sqrt(r.variance_entry);
  r.critical_value = normal_quantile(size);
  r.reject = r.statistic < r.critical_value;
  return r;
}

WaldReport wald_affinity(const FitResult& fit, std::int64_t n, double size) {
  if (fit.theta_hat.size() != 2) {
    throw DomainError("affinity test needs a fit of (alpha, beta)");
  }
  return wald_affinity(fit.theta_hat[0], fit.theta_hat[1], n, size);
}

WaldReport wald_affinity(const HistorySource& source, WaldPlugin plugin,
                         double size) {
  const PAFamily full = PAFamily::power_offset(0.0, 1.0);
  const FitResult fit = fit_mle(full, source);
  double alpha = fit.theta_hat[0];
  if (plugin == WaldPlugin::kConstrained) {
    PAFamily null = PAFamily::power_offset(0.0, 1.0);
    null.fix("beta", 1.0);
    alpha = fit_mle(null, source, Eigen::VectorXd::Constant(1, alpha)).theta_hat[0];
  }
  return wald_affinity(alpha, fit.theta_hat[1], source.n(), size);
}

WaldReport wald_affinity(const GrowthHistory& history, WaldPlugin plugin,
                         double size) {
  return wald_affinity(MemoryHistory(history), plugin, size);
}

double boundary_limit_sample(const Eigen::VectorXd& a, const Eigen::MatrixXd& V,
                             const Eigen::MatrixXd& V0, Rng& rng) {
  if (V.rows() != V0.rows() || a.size() != V0.rows()) {
    throw DomainError("dimension mismatch in boundary limit sample");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(V).info() != Eigen::Success ||
      Eigen::LLT<Eigen::MatrixXd>(V0).info() != Eigen::Success) {
    throw DomainError("V and V0 must be positive definite");
  }
  const double z = rng.normal();
  if (a.isZero(0.0)) return 0.0;
  const Eigen::VectorXd h = V0.ldlt().solve(a);
  const double sigma = std::sqrt(h.dot(V * h));
  const double w = sigma * z;
  return w <= 0.0 ? w : 0.0;
}

double boundary_limit_sample(const Eigen::VectorXd& a, const Eigen::MatrixXd& V,
                             const Eigen::MatrixXd& V0, std::uint64_t seed) {
  Rng rng(seed);
  return boundary_limit_sample(a, V, V0, rng);
}

std::string BootstrapVariance::report(const std::vector<std::string>& names) const {
  std::ostringstream os;
  os << "m: " << m << "\ns: " << s << "\nused: " << used
     << "\nseeds_digest: " << seeds_digest << "\nsigma_tilde:\n";
  for (Eigen::Index i = 0; i < sigma_tilde.rows(); ++i) {
    os << "  " << (i < static_cast<Eigen::Index>(names.size()) ? names[i] : "");
    for (Eigen::Index j = 0; j < sigma_tilde.cols(); ++j) os << ' ' << fmt(sigma_tilde(i, j));
    os << '\n';
  }
  return os.str();
}

Eigen::MatrixXd bootstrap_covariance(const std::vector<Eigen::VectorXd>& estimates,
                                     double m) {
  if (estimates.empty()) throw DomainError("no bootstrap estimates");
  // Two passes around the first estimate: the same scatter without the
  // cancellation of the raw second-moment form.
  const Eigen::Index d = estimates.front().size();
  const Eigen::VectorXd& shift = estimates.front();
  const double s = static_cast<double>(estimates.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& th : estimates) mean += th - shift;
  mean /= s;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (const auto& th : estimates) {
    const Eigen::VectorXd c = (th - shift) - mean;
    out.noalias() += c * c.transpose();
  }
  out *= m / s;
  return 0.5 * (out + out.transpose());
}

BootstrapVariance bootstrap_variance(const PAFamily& family,
                                     const Eigen::VectorXd& theta_tilde,
                                     std::int64_t m, std::int64_t s,
                                     std::uint64_t seed, int workers) {
  if (m < 10) throw DomainError("bootstrap tree size must be at least 10");
  if (s < 2) throw DomainError("bootstrap needs at least two replicates");
  family.check_theta(theta_tilde);
  std::vector<std::optional<Eigen::VectorXd>> slots(s);
  GrowOptions opts;
  opts.record_history = false;
  parallel_for(static_cast<std::size_t>(s), workers, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    const GrowthResult tree = grow(family, theta_tilde, m, rng, opts);
    try {
      slots[i] = fit_pmle(family, tree.snapshot, theta_tilde).theta_hat;
    } catch (const FitFailure&) {
      // Dropped; counted below.
    }
  });
  BootstrapVariance out;
  out.m = m;
  out.s = s;
  for (auto& slot : slots) {
    if (slot) out.estimates.push_back(std::move(*slot));
  }
  out.used = static_cast<std::int64_t>(out.estimates.size());
  if (10 * (s - out.used) > s) {
    throw ConvergenceError("bootstrap dropped " + std::to_string(s - out.used) +
                           " of " + std::to_string(s) + " replicates");
  }
  out.sigma_tilde = bootstrap_covariance(out.estimates, static_cast<double>(m));
  SplitMix64 digest(seed ^ (static_cast<std::uint64_t>(s) << 32) ^ static_cast<std::uint64_t>(m));
  out.seeds_digest = digest.next();
  return out;
}

WaldReport bootstrap_wald(const Eigen::VectorXd& theta_tilde,
                          const Eigen::MatrixXd& sigma_tilde, int coordinate,
                          double null_value, std::int64_t n, double size) {
  if (coordinate < 0 || coordinate >= theta_tilde.size()) {
    throw DomainError("coordinate out of range");
  }
  WaldReport r;
  r.size = size;
  r.two_sided = true;
  r.variance_entry = sigma_tilde(coordinate, coordinate);
  if (!std::isfinite(r.variance_entry) || !(r.variance_entry > 0.0)) {
    throw DegeneracyError("bootstrap variance entry is not positive");
  }
  r.statistic = std::sqrt(static_cast<double>(n)) *
                (theta_tilde[coordinate] - null_value) / std::sqrt(r.variance_entry);
  r.critical_value = normal_quantile(1.0 - size / 2.0);
  r.reject = std::abs(r.statistic) > r.critical_value;
  return r;
}

}  // namespace patree
