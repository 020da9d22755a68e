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


// patree command-line tool. Run `patree --help` for the subcommands.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "patree/branching_limits.hpp"
#include "patree/error.hpp"
#include "patree/estimators.hpp"
#include "patree/experiments.hpp"
#include "patree/inference.hpp"
#include "patree/pa_model.hpp"
#include "patree/tree_io.hpp"
#include "patree/tree_sim.hpp"
#include "patree/urn.hpp"

namespace {

using namespace patree;

constexpr int kExitConvergence = 2;
constexpr int kExitConfig = 3;

struct Common {
  std::string family = "f2";
  std::vector<double> theta;
  std::string family_config;
  std::int64_t n = 10000;
  std::int64_t reps = 200;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "report";
  int workers = 0;
};

// Named presets and bare kinds. Parameters given with --theta replace the
// preset's.
PAFamily make_family(const Common& c) {
  if (!c.family_config.empty()) {
    std::ifstream in(c.family_config);
    if (!in) throw DomainError("cannot open family config " + c.family_config);
    std::stringstream ss;
    ss << in.rdbuf();
    PAFamily f = PAFamily::from_config(ss.str());
    if (!c.theta.empty()) {
      f = f.at(Eigen::Map<const Eigen::VectorXd>(c.theta.data(), c.theta.size()));
    }
    return f;
  }
  auto need = [&](std::size_t k) {
    if (c.theta.size() != k) {
      throw DomainError("--theta needs " + std::to_string(k) + " value(s) for " + c.family);
    }
  };
  const std::string& name = c.family;
  if (name == "f2" || name == "f4" || name == "f5") {
    if (!c.theta.empty()) need(2);
    if (c.theta.size() == 2) return PAFamily::power_offset(c.theta[0], c.theta[1]);
    if (name == "f2") return PAFamily::power_offset(0.0, 2.0 / 3.0);
    if (name == "f4") return PAFamily::power_offset(4.0, 0.8);
    return PAFamily::power_offset(2.0, 1.0);
  }
  switch (parse_kind(name)) {
    case FamilyKind::kPowerOffset:
      need(2);
      return PAFamily::power_offset(c.theta[0], c.theta[1]);
    case FamilyKind::kAffine:
      need(1);
      return PAFamily::affine(c.theta[0]);
    case FamilyKind::kLogPower:
      need(1);
      return PAFamily::log_power(c.theta[0]);
    case FamilyKind::kEventuallyConstant:
      if (c.theta.empty()) throw DomainError("--theta needs the values v1..vK");
      return PAFamily::eventually_constant(c.theta);
  }
  throw DomainError("unknown family " + name);
}

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw DomainError("cannot write " + path);
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

bool csv(const Common& c) {
  if (c.format != "csv" && c.format != "report") {
    throw DomainError("--format must be csv or report");
  }
  return c.format == "csv";
}

std::string matrix_text(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.10g", m(i, j));
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
  return os.str();
}

void add_common(CLI::App* app, Common& c, bool reps) {
  app->add_option("--family", c.family,
                  "preset f2|f4|f5 or kind power_offset|affine|log_power|eventually_constant")
      ->capture_default_str();
  app->add_option("--theta", c.theta, "parameter values, comma separated")->delimiter(',');
  app->add_option("--family-config", c.family_config, "family JSON file");
  app->add_option("--n", c.n, "tree size")->capture_default_str();
  if (reps) app->add_option("--reps", c.reps, "Monte Carlo replicates")->capture_default_str();
  app->add_option("--seed", c.seed, "master seed")->capture_default_str();
  app->add_option("--out", c.out, "output file (default stdout)");
  app->add_option("--format", c.format, "csv|report")->capture_default_str();
  app->add_option("--workers", c.workers, "worker threads (0: all cores)")->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"Preferential-attachment tree simulation and inference"};
  app.set_config("--config", "", "TOML/INI file whose keys mirror the flags");
  app.require_subcommand(1);
  Common c;

  // simulate
  auto* sim = app.add_subcommand("simulate", "grow a tree and write its history");
  add_common(sim, c, false);
  std::string snapshot_out;
  sim->add_option("--snapshot", snapshot_out, "also write the final degree snapshot");

  // estimate
  auto* est = app.add_subcommand("estimate", "fit a history or snapshot file");
  add_common(est, c, false);
  std::string method = "mle", history_path, snapshot_path;
  est->add_option("--method", method, "mle|pmle|ee")->capture_default_str();
  est->add_option("--history", history_path, "history file");
  est->add_option("--snapshot", snapshot_path, "snapshot file (pmle, ee)");

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo study of an estimator");
  add_common(mc, c, true);
  mc->add_option("--method", method, "mle|pmle|ee")->capture_default_str();
  std::string estimates_out;
  mc->add_option("--estimates", estimates_out, "per-replicate estimates CSV");

  // wald
  auto* wald = app.add_subcommand("wald", "affinity test: one history or a Monte Carlo study");
  add_common(wald, c, true);
  double size = 0.05;
  wald->add_option("--size", size, "nominal size")->capture_default_str();
  wald->add_option("--history", history_path, "test this history instead of simulating");
  std::string plugin_name = "constrained";
  wald->add_option("--plugin", plugin_name, "alpha for the variance plug-in")
      ->check(CLI::IsMember({"constrained", "unconstrained"}))
      ->capture_default_str();

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "bootstrap variance and Wald tests");
  add_common(boot, c, true);
  std::int64_t m = 10000, s = 200;
  boot->add_option("--m", m, "bootstrap tree size")->capture_default_str();
  boot->add_option("--s", s, "bootstrap replicates")->capture_default_str();
  boot->add_option("--size", size, "nominal size")->capture_default_str();
  boot->add_option("--snapshot", snapshot_path, "bootstrap this snapshot instead of a study");

  // urn
  auto* urn = app.add_subcommand("urn", "degree urn, Perron pair and limit covariance");
  add_common(urn, c, false);
  std::string urn_kind = "affine";
  double alpha = 0.0;
  int kappa = 2;
  bool covariance = false;
  urn->add_option("--kind", urn_kind, "affine|cutoff")->capture_default_str();
  urn->add_option("--alpha", alpha, "affine offset")->capture_default_str();
  urn->add_option("--kappa", kappa, "number of explicit degree urns")->capture_default_str();
  urn->add_flag("--covariance", covariance, "compute the limit covariance");

  // limits
  auto* lim = app.add_subcommand("limits", "Malthusian parameter, degree law and V0");
  add_common(lim, c, false);
  bool fisher = false;
  lim->add_flag("--fisher", fisher, "also print V0 and its inverse");

  // qq
  auto* qq = app.add_subcommand("qq", "QQ data for estimators or the projected bootstrap");
  add_common(qq, c, true);
  qq->add_option("--method", method, "mle|pmle|ee")->capture_default_str();
  int coordinate = 0;
  qq->add_option("--coordinate", coordinate, "parameter index")->capture_default_str();
  bool projected = false, literal = false;
  qq->add_flag("--projected", projected, "randomly projected bootstrap-normalized PMLE");
  qq->add_flag("--literal", literal, "projected form without centring at theta0");
  qq->add_option("--m", m, "bootstrap tree size")->capture_default_str();
  qq->add_option("--s", s, "bootstrap replicates")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const bool as_csv = csv(c);

  if (sim->parsed()) {
    const PAFamily family = make_family(c);
    const GrowthResult tree = grow(family, family.theta(), c.n, c.seed);
    Output out(c.out);
    write_history(out.get(), tree.history, {c.n, family.to_config(), family.theta(), c.seed});
    if (!snapshot_out.empty()) save_snapshot(snapshot_out, tree.snapshot);
    return 0;
  }

  if (est->parsed()) {
    const Estimator e = parse_estimator(method);
    std::optional<PAFamily> family;
    FitResult fit;
    if (e == Estimator::kMle) {
      if (history_path.empty()) throw DomainError("mle needs --history");
      FileHistory source(history_path);
      family = (source.header().family_config.empty() || est->count("--family"))
                   ? make_family(c)
                   : PAFamily::from_config(source.header().family_config);
      fit = fit_mle(*family, source);
    } else {
      DegreeSnapshot snap;
      if (!snapshot_path.empty()) {
        snap = load_snapshot(snapshot_path);
      } else if (!history_path.empty()) {
        snap = snapshot_of(FileHistory(history_path));
      } else {
        throw DomainError("pmle/ee need --snapshot or --history");
      }
      family = make_family(c);
      fit = e == Estimator::kPmle ? fit_pmle(*family, snap) : fit_ee(*family, snap);
    }
    Output out(c.out);
    if (as_csv) {
      out.get() << FitResult::csv_header(family->free_names()) << '\n' << fit.csv_row() << '\n';
    } else {
      out.get() << fit.report(family->free_names());
    }
    return 0;
  }

  if (mc->parsed()) {
    MCConfig cfg;
    cfg.family = make_family(c);
    cfg.n = c.n;
    cfg.reps = c.reps;
    cfg.estimator = parse_estimator(method);
    cfg.seed = c.seed;
    cfg.workers = c.workers;
    const MCReport r = run_mc(cfg);
    Output out(c.out);
    out.get() << (as_csv ? r.csv() : r.report());
    if (!estimates_out.empty()) {
      std::ofstream f(estimates_out);
      f << r.csv();
    }
    if (r.failures > 0) std::cerr << "warning: " << r.failures << " fits failed\n";
    return r.failed ? kExitConvergence : 0;
  }

  if (wald->parsed()) {
    Output out(c.out);
    const WaldPlugin plugin =
        plugin_name == "constrained" ? WaldPlugin::kConstrained : WaldPlugin::kUnconstrained;
    if (!history_path.empty()) {
      FileHistory source(history_path);
      const WaldReport w = wald_affinity(source, plugin, size);
      out.get() << (as_csv ? WaldReport::csv_header() + "\n" + w.csv_row() + "\n" : w.report());
      return 0;
    }
    WaldMCConfig cfg;
    cfg.family = make_family(c);
    cfg.n = c.n;
    cfg.reps = c.reps;
    cfg.size = size;
    cfg.plugin = plugin;
    cfg.seed = c.seed;
    cfg.workers = c.workers;
    const WaldMCResult r = run_wald_mc(cfg);
    if (as_csv) {
      out.get() << "statistic\n";
      for (double t : r.statistics) out.get() << t << '\n';
    } else {
      out.get() << r.report();
    }
    return 0;
  }

  if (boot->parsed()) {
    const PAFamily family = make_family(c);
    Output out(c.out);
    if (!snapshot_path.empty()) {
      const DegreeSnapshot snap = load_snapshot(snapshot_path);
      const FitResult fit = fit_pmle(family, snap);
      const BootstrapVariance bv = bootstrap_variance(family, fit.theta_hat, m, s, c.seed, c.workers);
      if (as_csv) {
        out.get() << matrix_text(bv.sigma_tilde);
      } else {
        out.get() << fit.report(family.free_names()) << bv.report(family.free_names());
      }
      return 0;
    }
    BootstrapMCConfig cfg;
    cfg.family = family;
    cfg.n = c.n;
    cfg.m = m;
    cfg.s = s;
    cfg.reps = c.reps;
    cfg.size = size;
    cfg.seed = c.seed;
    cfg.workers = c.workers;
    const BootstrapWaldResult r = run_bootstrap_wald_mc(cfg);
    if (as_csv) {
      out.get() << "coordinate,statistic\n";
      for (std::size_t j = 0; j < r.names.size(); ++j) {
        for (double t : r.statistics[j]) out.get() << r.names[j] << ',' << t << '\n';
      }
    } else {
      out.get() << r.report();
    }
    return 0;
  }

  if (urn->parsed()) {
    UrnSystem u;
    if (urn_kind == "affine") {
      u = build_affine_urn(alpha, kappa);
    } else if (urn_kind == "cutoff") {
      const PAFamily family = make_family(c);
      u = build_cutoff_urn(family, family.theta(), kappa);
    } else {
      throw DomainError("--kind must be affine or cutoff");
    }
    if (covariance) u.sigma = limit_covariance(u);
    Output out(c.out);
    if (as_csv) {
      write_urn_bundle(out.get(), u);
    } else {
      const EigenCondition ec = eigen_condition(u);
      out.get() << "q: " << u.q << "\nlambda1: " << ec.lambda1
                << "\nlambda2_real: " << ec.lambda2_real
                << "\neigen_condition: " << (ec.satisfied ? "satisfied" : "violated")
                << "\nlambda1*v1:\n" << matrix_text((u.lambda1 * u.v1).transpose());
      if (u.sigma) out.get() << "Sigma:\n" << matrix_text(*u.sigma);
    }
    return 0;
  }

  if (lim->parsed()) {
    const PAFamily family = make_family(c);
    const LimitLaw law = limit_law(family, family.theta());
    Output out(c.out);
    write_limit_law(out.get(), law);
    if (fisher) {
      const AsymptoticInfo info = fisher_V0(family, family.theta(), law);
      out.get() << "# V0\n" << matrix_text(info.V0) << "# V0_inv\n" << matrix_text(info.V0_inv);
    }
    return 0;
  }

  if (qq->parsed()) {
    const PAFamily family = make_family(c);
    Output out(c.out);
    if (projected) {
      BootstrapMCConfig cfg;
      cfg.family = family;
      cfg.n = c.n;
      cfg.m = m;
      cfg.s = s;
      cfg.reps = c.reps;
      cfg.seed = c.seed;
      cfg.workers = c.workers;
      cfg.center = !literal;
      const ProjectedBootstrapResult r = run_projected_bootstrap_qq(cfg);
      if (r.dropped > 0) std::cerr << "warning: " << r.dropped << " replicates dropped\n";
      write_qq(out.get(), r.qq);
      return 0;
    }
    MCConfig cfg;
    cfg.family = family;
    cfg.n = c.n;
    cfg.reps = c.reps;
    cfg.estimator = parse_estimator(method);
    cfg.seed = c.seed;
    cfg.workers = c.workers;
    const MCReport r = run_mc(cfg);
    if (coordinate < 0 || coordinate >= family.dim()) throw DomainError("--coordinate out of range");
    if (!r.reference) throw DomainError("no reference variance for this family");
    std::vector<double> x;
    for (const auto& t : r.estimates) x.push_back(t[coordinate]);
    const double sd = std::sqrt((*r.reference)(coordinate, coordinate) / static_cast<double>(c.n));
    write_qq(out.get(), emit_qq(x, sd, r.theta0[coordinate]));
    return r.failed ? kExitConvergence : 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const patree::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const patree::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const patree::IntegrityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
