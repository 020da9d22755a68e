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


#include "patree/branching_limits.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "patree/error.hpp"

namespace patree {
namespace {

struct RhoSum {
  double value = 0.0;
  double bound = 0.0;  // upper bound on the omitted tail
  bool above = false;  // stopped early because the partial sum passed a cap
};

// Upper bound on sum_{l > L} t_l where t_l = t_{l-1} r(l) and
// r(l) = f(l) / (lambda + f(l)) is non-decreasing. On the block
// (L_b, 2 L_b] every ratio is at most r(2 L_b), which gives a geometric bound
// per block and a bound on the term that starts the next block.
double chain_tail(const PAFamily& family, const Eigen::VectorXd& full,
                  double lambda, std::int64_t L, double t_L) {
  double total = 0.0;
  double t = t_L;
  double Lb = static_cast<double>(L);
  for (int b = 0; b < 64 && t > 0.0; ++b) {
    const auto edge = static_cast<std::int64_t>(std::min(2.0 * Lb, 4e18));
    const double fv = family.value_at(full, edge);
    const double r = fv / (lambda + fv);
    if (!(r < 1.0)) return std::numeric_limits<double>::infinity();
    // sum_{i=1..Lb} t r^i <= t r / (1 - r)
    total += t * r / (1.0 - r);
    t *= std::exp(Lb * std::log(r));
    Lb *= 2.0;
    if (t <= total * 1e-18) break;
  }
  if (t > 0.0 && t > total * 1e-18) {
    return std::numeric_limits<double>::infinity();
  }
  return total;
}

RhoSum rho_series(const PAFamily& family, const Eigen::VectorXd& full,
                  double lambda, double tol, double cap) {
  RhoSum out;
  const int K = family.cutoff();
  double t = 1.0;
  double sum = 0.0;
  double comp = 0.0;  // Neumaier compensation
  auto add = [&](double x) {
    const double s = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - s) + x : (x - s) + sum;
    sum = s;
  };
  for (std::int64_t l = 1; l <= kMaxLawTerms; ++l) {
    const double fv = family.value_at(full, l);
    const double r = fv / (lambda + fv);
    t *= r;
    add(t);
    if (sum + comp > cap) {
      out.value = sum + comp;
      out.above = true;
      return out;
    }
    if (K > 0 && l >= K) {
      // Constant ratio from here on: exact geometric tail.
      add(t * r / (1.0 - r));
      out.value = sum + comp;
      return out;
    }
    if (l >= 16 && (l & (l - 1)) == 0) {
      const double bound = chain_tail(family, full, lambda, l, t);
      if (bound <= tol) {
        out.value = sum + comp;
        out.bound = bound;
        return out;
      }
    }
  }
  throw TruncationError("rho series did not reach tolerance within " +
                        std::to_string(kMaxLawTerms) + " terms at lambda = " +
                        std::to_string(lambda));
}

double affine_rho(double alpha, double lambda) {
  if (!(lambda > 1.0)) {
    throw DomainError("rho diverges for affine preference at lambda <= 1");
  }
  return (1.0 + alpha) / (lambda - 1.0);
}

}  // namespace

double LimitLaw::p_above(std::int64_t k) const {
  if (k < 1) return 1.0;
  if (k > truncation()) return tail_mass;
  return tail_probs[k - 1];
}

double rho(const PAFamily& family, const Eigen::VectorXd& theta, double lambda,
           double tol) {
  family.check_theta(theta);
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  if (family.is_affine(theta)) {
    return affine_rho(family.affine_offset(theta), lambda);
  }
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  return rho_series(family, family.expand(theta), lambda, tol,
                    std::numeric_limits<double>::infinity())
      .value;
}

double malthusian(const PAFamily& family, const Eigen::VectorXd& theta,
                  double tol) {
  family.check_theta(theta);
  if (family.is_affine(theta)) return 2.0 + family.affine_offset(theta);
  const Eigen::VectorXd full = family.expand(theta);
  const double series_tol = std::min(tol * 1e-3, 1e-15);

  // rho is decreasing; find lambda_hi with rho < 1 and lambda_lo with rho > 1.
  auto below_one = [&](double lambda) {
    return rho_series(family, full, lambda, series_tol, 1.0).value < 1.0;
  };
  double hi = 1.0;
  int iter = 0;
  while (!below_one(hi)) {
    hi *= 2.0;
    if (++iter > 200) throw ConvergenceError("no upper bracket for lambda*");
  }
  double lo = hi / 2.0;
  iter = 0;
  while (below_one(lo)) {
    hi = lo;
    lo /= 2.0;
    if (++iter > 200) throw ConvergenceError("no lower bracket for lambda*");
  }

  auto g = [&](double lambda) {
    return rho_series(family, full, lambda, series_tol,
                      std::numeric_limits<double>::infinity())
               .value -
           1.0;
  };
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      g, lo, hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  if (max_iter >= 200) throw ConvergenceError("lambda* root search did not converge");
  const double root = 0.5 * (a + b);
  if (std::abs(g(root)) > tol) {
    throw ConvergenceError("|rho(lambda*) - 1| exceeds tolerance");
  }
  return root;
}

LimitLaw limit_law(const PAFamily& family, const Eigen::VectorXd& theta,
                   double tail_tol) {
  if (!(tail_tol > 0.0)) throw DomainError("tail tolerance must be positive");
  LimitLaw law;
  const double lambda = malthusian(family, theta);
  law.lambda_star = lambda;
  law.affine = family.is_affine(theta);
  if (law.affine) law.affine_alpha = family.affine_offset(theta);
  const Eigen::VectorXd full = family.expand(theta);

  double p = 1.0;
  double f_prev = 1.0;
  double mean = 0.0;
  std::int64_t k = 1;
  for (;; ++k) {
    const double fv = family.value_at(full, k);
    p *= (k == 1 ? lambda : f_prev) / (lambda + fv);
    law.probs.push_back(p);
    mean += fv * p;
    f_prev = fv;
    if (fv * p / lambda <= tail_tol) break;
    if (k >= kMaxLawTerms) {
      law.tail_tol_met = false;
      break;
    }
  }
  const std::int64_t K = k;
  const double fK = f_prev;
  const double pK = law.probs.back();
  law.tail_mass = fK * pK / lambda;

  if (law.affine) {
    const double a = law.affine_alpha;
    law.tail_moment = (K + a) * (K + 1 + a) * pK / (1.0 + a);
  } else if (family.cutoff() > 0 && K >= family.cutoff()) {
    law.tail_moment = fK * law.tail_mass;
  } else {
    // f(l) p_l = f(l-1) p_{l-1} r(l): the same chain as the rho terms.
    double term = fK * pK;
    double sum = 0.0;
    std::int64_t l = K;
    for (int i = 0; i < (1 << 20); ++i) {
      ++l;
      const double fv = family.value_at(full, l);
      term *= fv / (lambda + fv);
      sum += term;
      if ((l & 63) == 0 &&
          chain_tail(family, full, lambda, l, term) <= 1e-6 * sum + 1e-300)
        break;
    }
    law.tail_moment = sum;
  }
  law.mean_preference = mean + law.tail_moment;

  law.tail_probs.resize(K);
  double above = law.tail_mass;
  for (std::int64_t j = K; j >= 1; --j) {
    law.tail_probs[j - 1] = above;
    above += law.probs[j - 1];
  }
  return law;
}

void write_limit_law(std::ostream& out, const LimitLaw& law) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", law.lambda_star);
  out << "# lambda_star=" << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", law.tail_mass);
  out << "# tail_mass=" << buf << '\n';
  out << "k,p_k\n";
  for (std::int64_t k = 1; k <= law.truncation(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", law.probs[k - 1]);
    out << k << ',' << buf << '\n';
  }
}

}  // namespace patree
