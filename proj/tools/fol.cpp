// Command-line front end for the thin-obstacle toolkit.
//
// Exit codes: 0 success, 1 a check or criterion failed, 2-11 library errors
// (see fol/errors.hpp), 12 command-line usage errors.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fol/epiperimetric.hpp"
#include "fol/frequency_gap.hpp"
#include "fol/obstacle_solver.hpp"
#include "fol/spectrum.hpp"
#include "fol/verify.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 12;

struct ParamFlags {
  int n = 1;
  std::optional<double> a, s;

  void add(CLI::App* app) {
    app->add_option("--n", n, "dimension of the thin space")->capture_default_str();
    auto* oa = app->add_option("--a", a, "weight exponent in (-1,1)");
    auto* os = app->add_option("--s", s, "fractional order in (0,1), a = 1-2s");
    oa->excludes(os);
  }

  fol::Params params() const {
    if (s) return fol::Params::from_s(n, *s);
    return fol::Params::from_a(n, a.value_or(0.0));
  }
};

/// Writes text to a file, or to stdout when the path is empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw fol::IoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw fol::IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// config file: flat key=value lines become --key value flags unless given

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream f(path);
  if (!f) throw fol::IoError("cannot read config " + path);
  auto given = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw fol::InvalidInput(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw fol::InvalidInput(path + ":" + std::to_string(lineno) + ": empty key");
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value == "true") {
      args.push_back(flag);
    } else if (value != "false") {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumCmd {
  ParamFlags pf;
  int K = -1;
  std::string out;

  int run() const {
    const fol::Params p = pf.params();
    p.require_desk_scale();
    const int deg = K >= 0 ? K : fol::default_max_degree(p.n);
    const fol::EigenBasis b = fol::build_basis(p, deg);
    char buf[128];
    std::snprintf(buf, sizeof buf, "n = %d, a = %.17g, s = %.17g, modes = %zu\n", p.n, p.a, p.s, b.size());
    std::string text = buf;
    text += "degree  multiplicity  eigenvalue\n";
    for (int d = 0; d <= deg; ++d) {
      std::snprintf(buf, sizeof buf, "%6d  %12zu  %.17g\n", d, b.indices_of_degree(d).size(), fol::eigenvalue_of_degree(p, d) + 0.0);
      text += buf;
    }
    std::cout << text << std::flush;
    if (!out.empty()) emit(out, fol::basis_to_json(b).dump() + "\n");
    return 0;
  }
};

// ---------------------------------------------------------------------------
// epi check / calibrate

int basis_degree(const fol::Params& p, int m) { return std::max(fol::default_max_degree(p.n), 2 * m + 2); }

struct EpiCheckCmd {
  ParamFlags pf;
  std::string theorem = "regular";
  int m = 1;
  std::size_t corpus = 100;
  std::uint64_t seed = 1;
  std::optional<double> eps;
  std::string out;

  int run() const {
    const fol::Params p = pf.params();
    p.require_desk_scale();
    const fol::Theorem th = fol::theorem_from_name(theorem);
    if (m < 1) throw fol::ParameterError("m must be >= 1");
    const bool at_2m = th == fol::Theorem::Log || th == fol::Theorem::Negative2m;
    const fol::EigenBasis b = fol::build_basis(p, at_2m ? basis_degree(p, m) : fol::default_max_degree(p.n));
    double e = 0.0;
    if (at_2m) {
      if (eps) {
        e = *eps;
      } else {
        // calibrate on an independent seed so the checked corpus is a holdout
        const auto cal = fol::calibrate_epsilons(p, m, std::max<std::size_t>(corpus, 100), seed + 1, b.max_degree);
        e = th == fol::Theorem::Log ? cal.eps_log : cal.eps_neg2m;
      }
    }
    const auto traces = fol::random_admissible_corpus(b, corpus, seed);
    std::vector<fol::CompetitorReport> reps(traces.size());
    fol::parallel_for(traces.size(), [&](std::size_t i) {
      const auto& c = traces[i];
      switch (th) {
        case fol::Theorem::Regular:
          reps[i] = fol::check_epi_regular(b, fol::TraceVec::from_modes(c));
          break;
        case fol::Theorem::NegativeRegular:
          reps[i] = fol::check_epi_negative_regular(b, fol::TraceVec::from_modes(c));
          break;
        case fol::Theorem::Log:
          reps[i] = fol::competitor_log(b, c, m, fol::minimal_theta(b, c, m), e).report;
          break;
        case fol::Theorem::Negative2m:
          reps[i] = fol::check_epi_negative_2m(b, c, m, e);
          break;
      }
    });
    std::string text;
    bool all = true;
    for (const auto& r : reps) {
      all = all && r.pass;
      text += r.to_json().dump() + "\n";
    }
    emit(out, text);
    return all ? 0 : kExitFailure;
  }
};

struct EpiCalibrateCmd {
  ParamFlags pf;
  int m = 1;
  std::size_t corpus = 500;
  std::uint64_t seed = 1;
  std::string out;

  int run() const {
    const fol::Params p = pf.params();
    const auto cal = fol::calibrate_epsilons(p, m, corpus, seed, basis_degree(p, m));
    emit(out, cal.to_json().dump() + "\n");
    return 0;
  }
};

// ---------------------------------------------------------------------------
// gap

struct GapCmd {
  ParamFlags pf;
  std::optional<int> m;
  std::optional<double> eps_pos, eps_neg, beta;
  std::string out;

  int run() const {
    const fol::Params p = pf.params();
    fol::GapResult g;
    if (m) {
      if (!eps_pos || !eps_neg) throw fol::ParameterError("the gap at 2m needs --eps-pos and --eps-neg");
      g = fol::gap_2m(p, *m, *eps_pos, *eps_neg, beta.value_or(fol::log_beta(p.n)));
    } else {
      g = fol::gap_regular(p);
    }
    emit(out, g.to_json().dump() + "\n");
    return 0;
  }
};

// ---------------------------------------------------------------------------
// solve / classify

struct ProblemFlags {
  ParamFlags pf;
  std::string datum = "profile";
  std::string obstacle = "zero";
  std::vector<double> direction;
  double C = 1.0;
  int m = 1;
  int nx = 0, ny = 0;
  double tol = 1e-10;
  int max_iters = 200000;
  double omega = 0.0;
  bool allow_n2 = false;

  void add(CLI::App* app) {
    pf.add(app);
    app->add_option("--datum", datum, "boundary datum: profile, h2m or perturbed")
        ->check(CLI::IsMember({"profile", "h2m", "perturbed"}))
        ->capture_default_str();
    app->add_option("--obstacle", obstacle, "obstacle: zero or quadratic (0.2 - |x|^2)")
        ->check(CLI::IsMember({"zero", "quadratic"}))
        ->capture_default_str();
    app->add_option("--direction", direction, "free boundary normal of the profile datum");
    app->add_option("--C", C, "amplitude of the profile datum")->capture_default_str();
    app->add_option("--m", m, "degree 2m of the h2m datum")->capture_default_str();
    app->add_option("--nx", nx, "cells along each thin axis (default 128, or 64 for n=2)");
    app->add_option("--ny", ny, "cells in the extension direction (default nx)");
    app->add_option("--tol", tol, "sweep tolerance")->capture_default_str();
    app->add_option("--max-iters", max_iters, "sweep limit per level")->capture_default_str();
    app->add_option("--omega", omega, "relaxation factor in (0,2); 0 picks it from the grid")->capture_default_str();
    app->add_flag("--allow-n2", allow_n2, "permit the three-dimensional solve (n=2)");
  }

  fol::ObstacleProblem problem(const fol::Params& p) const {
    fol::ObstacleProblem pr;
    if (datum == "profile") {
      std::vector<double> e = direction;
      if (e.empty()) {
        e.assign(static_cast<std::size_t>(p.n), 0.0);
        e[0] = 1.0;
      }
      pr = fol::profile_problem(p, e, C);
    } else if (datum == "h2m") {
      pr = fol::polynomial_problem(p, fol::build_h_2m<double>(p.n, p.a, m));
    } else {
      if (p.n != 1) throw fol::ParameterError("the perturbed datum is defined for n=1");
      pr = fol::perturbed_profile_problem(p);
    }
    if (obstacle == "quadratic") {
      pr.obstacle = [](const double* x) {
        return 0.2 - x[0] * x[0];
      };
      if (p.n == 2)
        pr.obstacle = [](const double* x) {
          return 0.2 - x[0] * x[0] - x[1] * x[1];
        };
    }
    return pr;
  }

  /// Exact solution when the datum itself solves the problem.
  bool datum_is_exact() const { return obstacle == "zero" && datum != "perturbed"; }

  fol::GridSolution solve(const fol::Params& p) const {
    if (p.n == 2 && !allow_n2) throw fol::ParameterError("n=2 solves are slow; pass --allow-n2 to run them");
    fol::MeshSpec spec;
    spec.n = p.n;
    spec.nx = nx > 0 ? nx : (p.n == 1 ? 128 : 64);
    spec.ny = ny > 0 ? ny : spec.nx;
    fol::SolverOptions opt;
    opt.tol = tol;
    opt.max_iters = max_iters;
    opt.omega = omega;
    return fol::solve_psor(problem(p), spec, opt);
  }
};

nlohmann::json solution_summary(const fol::GridSolution& sol) {
  const auto k = sol.kkt();
  const auto fb = fol::extract_free_boundary(sol);
  std::size_t contact = 0;
  for (char c : sol.contact()) contact += c != 0;
  return {{"n", sol.params().n},
          {"a", sol.params().a},
          {"s", sol.params().s},
          {"nx", sol.mesh->spec.nx},
          {"ny", sol.mesh->spec.ny},
          {"converged", sol.converged},
          {"iterations", sol.iterations},
          {"last_change", sol.last_change},
          {"contact_nodes", contact},
          {"free_boundary_points", fb.size()},
          {"kkt_ok", k.ok},
          {"kkt_min_gap", k.min_gap},
          {"kkt_max_complementarity", k.max_complementarity},
          {"kkt_interior_residual", k.interior_residual}};
}

struct SolveCmd {
  ProblemFlags prob;
  std::string checkpoint, csv, out;

  int run() const {
    const fol::Params p = prob.pf.params();
    const auto sol = prob.solve(p);
    nlohmann::json j = solution_summary(sol);
    if (prob.datum_is_exact()) j["sup_error"] = sol.sup_error(prob.problem(p).datum);
    if (!checkpoint.empty()) fol::write_checkpoint(sol, checkpoint);
    if (!csv.empty()) fol::write_slice_csv(sol, csv);
    emit(out, j.dump() + "\n");
    return sol.converged ? 0 : kExitFailure;
  }
};

struct ClassifyCmd {
  ProblemFlags prob;
  std::string checkpoint, out;
  std::vector<double> x0;
  int K = 4;

  int run() const {
    fol::GridSolution sol = checkpoint.empty() ? prob.solve(prob.pf.params()) : fol::read_checkpoint(checkpoint);
    const fol::Params p = sol.params();
    const fol::EigenBasis b = fol::build_basis(p, K);
    std::vector<std::vector<double>> points;
    if (!x0.empty()) {
      if (x0.size() != static_cast<std::size_t>(p.n)) throw fol::InvalidInput("--x0 needs n coordinates");
      points.push_back(x0);
    } else {
      points = fol::extract_free_boundary(sol);
    }
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& pt : points) arr.push_back(fol::classify_point(sol, pt, b).to_json());
    emit(out, arr.dump() + "\n");
    return 0;
  }
};

// ---------------------------------------------------------------------------
// verify-all

struct VerifyCmd {
  bool quick = false;
  std::uint64_t seed = 1;
  std::string out;

  int run() const {
    fol::VerifyOptions opt;
    opt.quick = quick;
    opt.seed = seed;
    const auto rep = fol::verify_all(opt, [](const fol::CriterionResult& r) {
      std::cerr << "criterion " << r.id << " (" << r.name << "): " << (r.pass ? "PASS" : "FAIL") << std::endl;
    });
    emit(out, rep.to_json().dump(2) + "\n");
    return rep.pass() ? 0 : kExitFailure;
  }
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args;
  try {
    args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const fol::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  }

  CLI::App app{"Thin obstacle problem toolkit: spectra, epiperimetric corpora, frequency gaps, solves and blow-ups"};
  app.name("fol");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");
  std::string config_note;
  app.add_option("--config", config_note, "file of key=value lines used as defaults for the flags");

  SpectrumCmd spectrum;
  auto* c_spec = app.add_subcommand("spectrum", "eigenvalues and basis of the weighted sphere operator");
  spectrum.pf.add(c_spec);
  c_spec->add_option("--K", spectrum.K, "maximal degree");
  c_spec->add_option("--out", spectrum.out, "write the basis as JSON");

  auto* c_epi = app.add_subcommand("epi", "epiperimetric inequalities");
  c_epi->require_subcommand(1);
  EpiCheckCmd check;
  auto* c_check = c_epi->add_subcommand("check", "run a random admissible corpus, one JSON record per trace");
  check.pf.add(c_check);
  c_check->add_option("--theorem", check.theorem, "regular, log, negative_regular or negative_2m")
      ->check(CLI::IsMember({"regular", "log", "negative_regular", "negative_2m"}))
      ->capture_default_str();
  c_check->add_option("--m", check.m, "homogeneity 2m of the log and negative_2m inequalities")->capture_default_str();
  c_check->add_option("--corpus", check.corpus, "number of traces")->capture_default_str();
  c_check->add_option("--seed", check.seed, "corpus seed")->capture_default_str();
  c_check->add_option("--eps", check.eps, "ε of the inequalities at 2m (calibrated when omitted)");
  c_check->add_option("--out", check.out, "output path (default stdout)");
  EpiCalibrateCmd calib;
  auto* c_cal = c_epi->add_subcommand("calibrate", "largest dyadic ε passing a corpus at 2m");
  calib.pf.add(c_cal);
  c_cal->add_option("--m", calib.m)->capture_default_str();
  c_cal->add_option("--corpus", calib.corpus, "number of random traces (>= 100)")->capture_default_str();
  c_cal->add_option("--seed", calib.seed)->capture_default_str();
  c_cal->add_option("--out", calib.out, "output path (default stdout)");

  GapCmd gap;
  auto* c_gap = app.add_subcommand("gap", "forbidden homogeneities around 1+s, or around 2m with --m");
  gap.pf.add(c_gap);
  c_gap->add_option("--m", gap.m, "gap around 2m instead of 1+s");
  c_gap->add_option("--eps-pos", gap.eps_pos, "ε of the log inequality");
  c_gap->add_option("--eps-neg", gap.eps_neg, "ε of the negative inequality at 2m");
  c_gap->add_option("--beta", gap.beta, "exponent of the log inequality (default (n-1)/(n+1))");
  c_gap->add_option("--out", gap.out, "output path (default stdout)");

  SolveCmd solve;
  auto* c_solve = app.add_subcommand("solve", "projected SOR solve on a graded grid");
  solve.prob.add(c_solve);
  c_solve->add_option("--checkpoint", solve.checkpoint, "write the solution to this file");
  c_solve->add_option("--csv", solve.csv, "write the thin-space slice as CSV");
  c_solve->add_option("--out", solve.out, "summary output path (default stdout)");

  ClassifyCmd classify;
  auto* c_cls = app.add_subcommand("classify", "blow-up type at free boundary points");
  classify.prob.add(c_cls);
  c_cls->add_option("--checkpoint", classify.checkpoint, "read the solution from this file instead of solving");
  c_cls->add_option("--x0", classify.x0, "classify this point only (default: every free boundary point)");
  c_cls->add_option("--K", classify.K, "degree of the spectral basis")->capture_default_str();
  c_cls->add_option("--out", classify.out, "output path (default stdout)");

  VerifyCmd verify;
  auto* c_ver = app.add_subcommand("verify-all", "run every acceptance criterion");
  c_ver->add_flag("--quick", verify.quick, "smaller corpora and grids");
  c_ver->add_option("--seed", verify.seed)->capture_default_str();
  c_ver->add_option("--out", verify.out, "report path (default stdout)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (c_spec->parsed()) return spectrum.run();
    if (c_check->parsed()) return check.run();
    if (c_cal->parsed()) return calib.run();
    if (c_gap->parsed()) return gap.run();
    if (c_solve->parsed()) return solve.run();
    if (c_cls->parsed()) return classify.run();
    if (c_ver->parsed()) return verify.run();
  } catch (const fol::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fol::Error("").exit_code();
  }
  return kExitUsage;
}
