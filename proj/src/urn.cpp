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


#include "patree/urn.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "patree/error.hpp"

namespace patree {
namespace {

bool reaches_all(const Eigen::MatrixXd& A, bool transpose) {
  const int q = static_cast<int>(A.rows());
  std::vector<char> seen(q, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    for (int i = 0; i < q; ++i) {
      const double w = transpose ? A(j, i) : A(i, j);
      if (i != j && w != 0.0 && !seen[i]) {
        seen[i] = 1;
        stack.push_back(i);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

// Index of the eigenvalue with the largest real part.
int top_index(const Eigen::VectorXcd& ev) {
  int best = 0;
  for (int i = 1; i < ev.size(); ++i) {
    if (ev[i].real() > ev[best].real()) best = i;
  }
  return best;
}

Eigen::VectorXd unit(int q, int i) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(q);
  e[i] = 1.0;
  return e;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// psi(s) B psi(s)^T lambda1 e^{-lambda1 s}, with psi evaluated through the
// Perron splitting so that nothing grows like e^{lambda1 s}:
//   psi(s) = P + e^{s At} Q - lambda1 v1 a^T phit(s) Q,
// P = v1 u1^T, Q = I - P, At = A - lambda1 P, phit(s) = int_0^s e^{t At} dt.
class CovarianceIntegrand {
 public:
  explicit CovarianceIntegrand(const UrnSystem& u) : q_(u.q), lambda1_(u.lambda1) {
    P_ = u.v1 * u.u1.transpose();
    Q_ = Eigen::MatrixXd::Identity(q_, q_) - P_;
    const Eigen::MatrixXd At = u.A - u.lambda1 * P_;
    M_ = Eigen::MatrixXd::Zero(2 * q_, 2 * q_);
    M_.topLeftCorner(q_, q_) = At;
    M_.topRightCorner(q_, q_) = Eigen::MatrixXd::Identity(q_, q_);
    B_ = Eigen::MatrixXd::Zero(q_, q_);
    for (int i = 0; i < q_; ++i) {
      const Eigen::VectorXd x = u.xi.col(i);
      B_ += u.v1[i] * u.activities[i] * x * x.transpose();
    }
    va_ = u.lambda1 * u.v1 * u.activities.transpose();
  }

  Eigen::MatrixXd operator()(double s) const {
    const Eigen::MatrixXd E = (M_ * s).exp();
    const Eigen::MatrixXd psi =
        P_ + (E.topLeftCorner(q_, q_) - va_ * E.topRightCorner(q_, q_)) * Q_;
    Eigen::MatrixXd out = psi * B_ * psi.transpose();
    out *= lambda1_ * std::exp(-lambda1_ * s);
    return 0.5 * (out + out.transpose());
  }

 private:
  int q_;
  double lambda1_;
  Eigen::MatrixXd P_, Q_, M_, B_, va_;
};

struct Panel {
  double a = 0.0;
  double b = 0.0;
  Eigen::MatrixXd value;
  double err = 0.0;
};

template <class F>
Panel gk15(const F& f, double a, double b) {
  using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
  using Gauss = boost::math::quadrature::gauss<double, 7>;
  const auto& x = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const Eigen::MatrixXd f0 = f(mid);
  Eigen::MatrixXd kron = wk[0] * f0;
  Eigen::MatrixXd gauss = wg[0] * f0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const Eigen::MatrixXd fs = f(mid - half * x[i]) + f(mid + half * x[i]);
    kron += wk[i] * fs;
    // Gauss nodes are the even-indexed Kronrod nodes.
    if (i % 2 == 0) gauss += wg[i / 2] * fs;
  }
  Panel p;
  p.a = a;
  p.b = b;
  p.value = half * kron;
  p.err = max_abs(half * (kron - gauss));
  return p;
}

// Globally adaptive: bisect the worst panel until the summed error estimate
// is below tol.
template <class F>
Eigen::MatrixXd integrate(const F& f, double a, double b, double tol) {
  constexpr int kMaxPanels = 4000;
  std::vector<Panel> panels{gk15(f, a, b)};
  for (;;) {
    double total = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      total += panels[i].err;
      if (panels[i].err > panels[worst].err) worst = i;
    }
    if (total <= tol) break;
    if (static_cast<int>(panels.size()) >= kMaxPanels) {
      throw ConvergenceError("limit_covariance: quadrature error " +
                             std::to_string(total) + " above tolerance");
    }
    const Panel w = panels[worst];
    const double m = 0.5 * (w.a + w.b);
    panels[worst] = gk15(f, w.a, m);
    panels.push_back(gk15(f, m, w.b));
  }
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(panels[0].value.rows(),
                                              panels[0].value.cols());
  for (const Panel& p : panels) sum += p.value;
  return sum;
}

std::string format_row(const double* data, int count, int stride) {
  std::string row;
  char buf[40];
  for (int i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", data[i * stride]);
    if (i) row += ',';
    row += buf;
  }
  return row;
}

void write_block(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << '[' << name << "]\n";
  for (int i = 0; i < m.rows(); ++i) {
    const Eigen::RowVectorXd r = m.row(i);
    out << format_row(r.data(), static_cast<int>(r.size()), 1) << '\n';
  }
}

std::vector<double> parse_row(const std::string& line) {
  std::vector<double> row;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0') {
      throw IntegrityError("urn bundle: bad number '" + cell + "'");
    }
    row.push_back(v);
  }
  return row;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows,
                          const std::string& name, int r, int c) {
  if (static_cast<int>(rows.size()) != r) {
    throw IntegrityError("urn bundle: block " + name + " has wrong row count");
  }
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows[i].size()) != c) {
      throw IntegrityError("urn bundle: block " + name + " has wrong width");
    }
    for (int j = 0; j < c; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace

UrnSystem make_urn(const Eigen::VectorXd& activities, const Eigen::MatrixXd& xi,
                   const Eigen::VectorXd& initial) {
  const int q = static_cast<int>(activities.size());
  if (q < 1 || xi.rows() != q || xi.cols() != q || initial.size() != q) {
    throw DomainError("make_urn: inconsistent dimensions");
  }
  if ((activities.array() < 0.0).any()) {
    throw DomainError("make_urn: negative activity");
  }
  UrnSystem u;
  u.q = q;
  u.activities = activities;
  u.xi = xi;
  u.initial = initial;
  u.A = xi * activities.asDiagonal();
  if (q > 1 && !(reaches_all(u.A, false) && reaches_all(u.A, true))) {
    throw DomainError("make_urn: transfer matrix is reducible");
  }
  const Eigen::RowVectorXd content = xi.colwise().sum();
  if ((content.array() < 0.0).any() || !(content.array() > 0.0).any()) {
    throw DomainError("make_urn: total content must be non-decreasing");
  }

  Eigen::EigenSolver<Eigen::MatrixXd> right(u.A);
  Eigen::EigenSolver<Eigen::MatrixXd> left(u.A.transpose());
  if (right.info() != Eigen::Success || left.info() != Eigen::Success) {
    throw ConvergenceError("make_urn: eigen-decomposition failed");
  }
  u.eigenvalues = right.eigenvalues();
  const int top = top_index(u.eigenvalues);
  const std::complex<double> l1 = u.eigenvalues[top];
  const double scale = 1.0 + u.A.cwiseAbs().maxCoeff();
  if (std::abs(l1.imag()) > 1e-10 * scale || l1.real() <= 0.0) {
    throw DegeneracyError("make_urn: leading eigenvalue is not real positive");
  }
  u.lambda1 = l1.real();
  u.lambda2_real = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < q; ++i) {
    if (i != top) u.lambda2_real = std::max(u.lambda2_real, u.eigenvalues[i].real());
  }
  if (q > 1 && u.lambda2_real > u.lambda1 - 1e-9 * scale) {
    throw DegeneracyError("make_urn: leading eigenvalue is not simple");
  }

  Eigen::VectorXd v = right.eigenvectors().col(top).real();
  if (v.sum() < 0.0) v = -v;
  if ((v.array() <= 0.0).any()) {
    throw DegeneracyError("make_urn: Perron vector not strictly positive");
  }
  u.v1 = v / activities.dot(v);

  const Eigen::VectorXcd lev = left.eigenvalues();
  Eigen::VectorXd w = left.eigenvectors().col(top_index(lev)).real();
  u.u1 = w / w.dot(u.v1);
  return u;
}

UrnSystem build_affine_urn(double alpha, int kappa) {
  if (!(alpha > -1.0)) throw DomainError("build_affine_urn: alpha must exceed -1");
  if (kappa < 2) throw DomainError("build_affine_urn: kappa must be at least 2");
  const int q = kappa + 1;
  Eigen::VectorXd a(q);
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < kappa; ++i) {
    a[i] = i + 1 + alpha;
    xi(i, i) -= 1.0;
    xi(0, i) += 1.0;
  }
  for (int i = 0; i + 1 < kappa; ++i) xi(i + 1, i) += 1.0;
  xi(kappa, kappa - 1) += kappa + 1 + alpha;
  a[kappa] = 1.0;
  xi(kappa, kappa) = 1.0;
  xi(0, kappa) = 1.0;
  return make_urn(a, xi, unit(q, 0));
}

UrnSystem build_cutoff_urn(const PAFamily& family, const Eigen::VectorXd& theta,
                           int kappa) {
  if (family.kind() != FamilyKind::kEventuallyConstant) {
    throw DomainError("build_cutoff_urn: family is not eventually constant");
  }
  if (kappa < 1 || family.cutoff() > kappa) {
    throw DomainError("build_cutoff_urn: f is not constant beyond kappa");
  }
  family.check_theta(theta);
  const int q = kappa + 1;
  Eigen::VectorXd a(q);
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < kappa; ++i) {
    a[i] = family.eval(theta, i + 1);
    xi(i, i) -= 1.0;
    xi(i + 1, i) += 1.0;
    xi(0, i) += 1.0;
  }
  a[kappa] = family.eval(theta, kappa);
  xi(0, kappa) = 1.0;
  return make_urn(a, xi, unit(q, 0));
}

EigenCondition eigen_condition(const UrnSystem& system) {
  EigenCondition c;
  c.lambda1 = system.lambda1;
  c.lambda2_real = system.lambda2_real;
  c.satisfied = system.lambda2_real < 0.5 * system.lambda1;
  return c;
}

Eigen::MatrixXd limit_covariance(const UrnSystem& system, double tol) {
  const EigenCondition cond = eigen_condition(system);
  if (!cond.satisfied) {
    throw DomainError("limit_covariance: requires Re lambda2 < lambda1 / 2");
  }
  const CovarianceIntegrand f(system);
  // The integrand decays like exp(-rate s) up to polynomial factors.
  const double rate = system.lambda1 - std::max(0.0, 2.0 * system.lambda2_real);
  double S = 40.0 / rate;
  Eigen::MatrixXd sigma = integrate(f, 0.0, S, 0.5 * tol);
  double budget = 0.25 * tol;
  for (int doubling = 0;; ++doubling) {
    if (doubling == 40) {
      throw ConvergenceError("limit_covariance: integrand does not decay");
    }
    const Eigen::MatrixXd piece = integrate(f, S, 2.0 * S, 0.5 * budget);
    sigma += piece;
    if (max_abs(piece) < 0.1 * tol) break;
    S *= 2.0;
    budget *= 0.5;
  }
  sigma -= system.lambda1 * system.lambda1 * system.v1 * system.v1.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::VectorXd urn_simulate(const UrnSystem& system, std::int64_t n, Rng& rng) {
  if (n < 0) throw DomainError("urn_simulate: negative step count");
  const int q = system.q;
  std::vector<double> x(system.initial.data(), system.initial.data() + q);
  std::vector<double> a(system.activities.data(), system.activities.data() + q);
  std::vector<double> xi(system.xi.data(), system.xi.data() + q * q);  // column-major
  std::vector<double> w(q);
  for (std::int64_t step = 0; step < n; ++step) {
    double total = 0.0;
    for (int i = 0; i < q; ++i) {
      w[i] = a[i] * x[i];
      total += w[i];
    }
    if (!(total > 0.0)) throw IntegrityError("urn_simulate: all weights are zero");
    double u = rng.uniform() * total;
    int pick = -1;
    for (int i = 0; i < q; ++i) {
      if (w[i] <= 0.0) continue;
      pick = i;
      if (u < w[i]) break;
      u -= w[i];
    }
    const double* col = xi.data() + static_cast<std::ptrdiff_t>(pick) * q;
    for (int i = 0; i < q; ++i) x[i] += col[i];
  }
  return Eigen::Map<Eigen::VectorXd>(x.data(), q);
}

Eigen::VectorXd urn_simulate(const UrnSystem& system, std::int64_t n,
                             std::uint64_t seed) {
  Rng rng(seed);
  return urn_simulate(system, n, rng);
}

Eigen::VectorXd perron_adjugate(const UrnSystem& system) {
  const int q = system.q;
  const Eigen::MatrixXd C =
      system.lambda1 * Eigen::MatrixXd::Identity(q, q) - system.A;
  Eigen::VectorXd v(q);
  if (q == 1) {
    v[0] = 1.0;
  } else {
    for (int i = 0; i < q; ++i) {
      // adj(C)_{i,0} = (-1)^i det(C with row 0 and column i removed)
      Eigen::MatrixXd minor(q - 1, q - 1);
      for (int r = 1; r < q; ++r) {
        for (int c = 0, cc = 0; c < q; ++c) {
          if (c != i) minor(r - 1, cc++) = C(r, c);
        }
      }
      v[i] = (i % 2 == 0 ? 1.0 : -1.0) * minor.determinant();
    }
  }
  return v / system.activities.dot(v);
}

double affine_pk(double alpha, std::int64_t k) {
  if (!(alpha > -1.0)) throw DomainError("affine_pk: alpha must exceed -1");
  if (k < 1) throw DomainError("affine_pk: k must be positive");
  double p = (2.0 + alpha) / (3.0 + 2.0 * alpha);
  for (std::int64_t j = 2; j <= k; ++j) {
    p *= (j - 1 + alpha) / (j + 2 + 2 * alpha);
  }
  return p;
}

LemmaCheck lemma_B3_check(double alpha, std::int64_t k) {
  const double pk = affine_pk(alpha, k);
  LemmaCheck out;
  out.rhs = (k + alpha) * (k + 1 + alpha) * pk / (1.0 + alpha);
  // Direct sum over a long window, then the remainder from the Gamma-ratio
  // telescoping sum_{l >= L} G(l+a)/G(l+b) = G(L+a) / ((b-a-1) G(L+b-1)).
  constexpr std::int64_t kWindow = 4096;
  double p = pk;
  double sum = 0.0;
  std::int64_t l = k + 1;
  for (; l < k + 1 + kWindow; ++l) {
    p *= (l - 1 + alpha) / (l + 2 + 2 * alpha);
    sum += p * (l + alpha);
  }
  p *= (l - 1 + alpha) / (l + 2 + 2 * alpha);  // p_L
  sum += p * (l + alpha) * (l + 2 + 2 * alpha) / (1.0 + alpha);
  out.lhs = sum;
  return out;
}

Eigen::MatrixXd tail_map(int kappa, int q) {
  if (kappa < 1 || kappa > q) throw DomainError("tail_map: need 1 <= kappa <= q");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(kappa, q);
  for (int k = 0; k < kappa; ++k) {
    for (int j = 0; j <= k; ++j) L(k, j) = -1.0;
  }
  return L;
}

Eigen::MatrixXd mori_R(double alpha, int kappa) {
  if (kappa < 1) throw DomainError("mori_R: kappa must be positive");
  Eigen::VectorXd p(kappa);
  for (int k = 0; k < kappa; ++k) p[k] = affine_pk(alpha, k + 1);
  Eigen::MatrixXd R = -p * p.transpose();
  R.diagonal() += p;
  return R;
}

void write_urn_bundle(std::ostream& out, const UrnSystem& system) {
  char buf[64];
  out << "# patree-urn v1\n";
  out << "# q=" << system.q << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", system.lambda1);
  out << "# lambda1=" << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", system.lambda2_real);
  out << "# lambda2_real=" << buf << '\n';
  out << "# blocks=a,initial,xi,A,v1" << (system.sigma ? ",Sigma" : "") << '\n';
  write_block(out, "a", system.activities.transpose());
  write_block(out, "initial", system.initial.transpose());
  write_block(out, "xi", system.xi);
  write_block(out, "A", system.A);
  write_block(out, "v1", system.v1.transpose());
  if (system.sigma) write_block(out, "Sigma", *system.sigma);
}

UrnSystem read_urn_bundle(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "# patree-urn v1") {
    throw IntegrityError("urn bundle: missing header");
  }
  int q = -1;
  std::map<std::string, std::vector<std::vector<double>>> blocks;
  std::string current;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# q=", 0) == 0) q = std::stoi(line.substr(4));
      continue;
    }
    if (line.front() == '[' && line.back() == ']') {
      current = line.substr(1, line.size() - 2);
      blocks[current];
      continue;
    }
    if (current.empty()) throw IntegrityError("urn bundle: data outside a block");
    blocks[current].push_back(parse_row(line));
  }
  if (q < 1) throw IntegrityError("urn bundle: missing q");
  for (const char* name : {"a", "initial", "xi", "A", "v1"}) {
    if (!blocks.count(name)) {
      throw IntegrityError(std::string("urn bundle: missing block ") + name);
    }
  }
  const Eigen::VectorXd a = to_matrix(blocks["a"], "a", 1, q).transpose();
  const Eigen::VectorXd x0 = to_matrix(blocks["initial"], "initial", 1, q).transpose();
  UrnSystem u = make_urn(a, to_matrix(blocks["xi"], "xi", q, q), x0);
  if (to_matrix(blocks["A"], "A", q, q) != u.A) {
    throw IntegrityError("urn bundle: A inconsistent with a and xi");
  }
  const Eigen::VectorXd v1 = to_matrix(blocks["v1"], "v1", 1, q).transpose();
  if ((v1 - u.v1).cwiseAbs().maxCoeff() > 1e-12) {
    throw IntegrityError("urn bundle: v1 inconsistent with A");
  }
  if (blocks.count("Sigma")) u.sigma = to_matrix(blocks["Sigma"], "Sigma", q, q);
  return u;
}

}  // namespace patree
