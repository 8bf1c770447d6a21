#pragma once

/**
 * @file verify.hpp
 * @brief Reproduction suite: one check per acceptance criterion, shared by the
 * CLI `verify-all` command and the acceptance binary.
 *
 * Every check is deterministic for a given seed: corpora come from seeded
 * generators, parallel work writes into index-ordered slots and reports carry
 * no timings.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fol/corpus.hpp"
#include "fol/epiperimetric.hpp"
#include "fol/frequency_gap.hpp"
#include "fol/harmonic.hpp"
#include "fol/obstacle_solver.hpp"
#include "fol/parallel.hpp"
#include "fol/rational.hpp"
#include "fol/special_solutions.hpp"
#include "fol/weiss.hpp"

namespace fol {

struct VerifyOptions {
  bool quick = false;
  std::uint64_t seed = 1;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  nlohmann::json detail = nlohmann::json::object();

  nlohmann::json to_json() const { return {{"id", id}, {"name", name}, {"pass", pass}, {"detail", detail}}; }
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  // splitmix64 step, so nearby tags give unrelated streams
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<Params> corpus_configs() {
  std::vector<Params> out;
  for (int n : {1, 2})
    for (double a : {-0.5, 0.0, 0.5}) out.push_back(Params::from_a(n, a));
  return out;
}

inline std::string config_key(const Params& p) { return "n=" + std::to_string(p.n) + ",a=" + detail::fmt(p.a); }

inline double rel_scale(double ref, double norm2) { return std::max({1.0, std::fabs(ref), norm2}); }

/// Tracks the worst value of a quantity and whether every sample met its bound.
struct Worst {
  double value = 0.0;
  bool ok = true;
  void bad_if(bool bad) { ok = ok && !bad; }
  void max_with(double v) { value = std::max(value, v); }
  void min_with(double v) { value = std::min(value, v); }
};

}  // namespace detail

/// Corpora and calibrations reused across criteria.
class VerifyContext {
 public:
  explicit VerifyContext(VerifyOptions opt) : opt_(opt) {}

  const VerifyOptions& options() const { return opt_; }

  const EigenBasis& basis(const Params& p) {
    auto key = std::make_pair(p.n, p.a);
    auto it = bases_.find(key);
    if (it == bases_.end())
      it = bases_.emplace(key, build_basis(p, std::max(default_max_degree(p.n), 4))).first;
    return it->second;
  }

  std::size_t corpus_size(const Params& p) const {
    if (!opt_.quick) return 1000;
    return p.n == 1 ? 200 : 40;
  }

  /// Corpus for the inequalities at 1+s.
  const std::vector<Eigen::VectorXd>& corpus(const Params& p) {
    auto key = std::make_pair(p.n, p.a);
    auto it = corpora_.find(key);
    if (it == corpora_.end()) {
      const std::uint64_t tag = 100 + static_cast<std::uint64_t>(p.n) * 10 + static_cast<std::uint64_t>((p.a + 1.0) * 4.0);
      it = corpora_.emplace(key, random_admissible_corpus(basis(p), corpus_size(p), detail::derive_seed(opt_.seed, tag)))
               .first;
    }
    return it->second;
  }

  std::size_t calibration_size(const Params& p) const {
    if (!opt_.quick) return 500;
    return p.n == 1 ? 200 : 100;
  }

  std::uint64_t calibration_seed(const Params& p) const {
    return detail::derive_seed(opt_.seed, 200 + static_cast<std::uint64_t>(p.n) * 10 + static_cast<std::uint64_t>((p.a + 1.0) * 4.0));
  }

  const EpsilonCalibration& calibration(const Params& p) {
    auto key = std::make_pair(p.n, p.a);
    auto it = calibrations_.find(key);
    if (it == calibrations_.end())
      it = calibrations_.emplace(key, calibrate_epsilons(p, 1, calibration_size(p), calibration_seed(p), basis(p).max_degree))
               .first;
    return it->second;
  }

  /// Independent corpus (second seed) on which calibrated constants are verified.
  const std::vector<Eigen::VectorXd>& holdout(const Params& p) {
    auto key = std::make_pair(p.n, p.a);
    auto it = holdouts_.find(key);
    if (it == holdouts_.end()) {
      const std::uint64_t tag = 300 + static_cast<std::uint64_t>(p.n) * 10 + static_cast<std::uint64_t>((p.a + 1.0) * 4.0);
      it = holdouts_.emplace(key, random_admissible_corpus(basis(p), calibration_size(p), detail::derive_seed(opt_.seed, tag)))
               .first;
    }
    return it->second;
  }

 private:
  VerifyOptions opt_;
  std::map<std::pair<int, double>, EigenBasis> bases_;
  std::map<std::pair<int, double>, std::vector<Eigen::VectorXd>> corpora_;
  std::map<std::pair<int, double>, EpsilonCalibration> calibrations_;
  std::map<std::pair<int, double>, std::vector<Eigen::VectorXd>> holdouts_;
};

// ---------------------------------------------------------------------------
// 1. spectral identities

inline CriterionResult verify_spectral_identities(VerifyContext& ctx) {
  CriterionResult res{1, "spectral identities", true, nlohmann::json::object()};
  const std::size_t traces = ctx.options().quick ? 40 : 200;
  for (const Params& p : detail::corpus_configs()) {
    const EigenBasis b = build_basis(p, p.n == 1 ? 8 : 5);
    // polynomially exact sphere rule; 16 dyadic radial levels leave errors near 1e-12
    const WeissRules rules = make_weiss_rules(p, 2 * b.max_degree + 4, false, 16, 6);
    const std::vector<double> mus{1.0 + p.s, 2.0, 3.0};
    struct Row {
      double prima = 0, seconda = 0, terza = 0, quarta = 0, quad = 0;
    };
    std::vector<Row> rows(traces);
    std::vector<Eigen::VectorXd> general(traces), single(traces);
    std::vector<int> degree(traces);
    Rng rng(detail::derive_seed(ctx.options().seed, 10 + static_cast<std::uint64_t>(p.n) * 10 +
                                                        static_cast<std::uint64_t>((p.a + 1.0) * 4.0)));
    const auto K = static_cast<Eigen::Index>(b.size());
    for (std::size_t t = 0; t < traces; ++t) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(K);
      const int active = 1 + static_cast<int>(rng.uniform() * 12.0);
      for (int i = 0; i < active; ++i) c(static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(K))) = rng.normal();
      general[t] = c;
      const int d = 1 + static_cast<int>(rng.uniform() * b.max_degree);
      Eigen::VectorXd e = Eigen::VectorXd::Zero(K);
      for (std::size_t k : b.indices_of_degree(d)) e(static_cast<Eigen::Index>(k)) = rng.normal();
      single[t] = e;
      degree[t] = d;
    }
    parallel_for(traces, [&](std::size_t t) {
      Row& r = rows[t];
      const Eigen::VectorXd& c = general[t];
      SpectralTrace st{c, 0.0};
      const double n2 = c.squaredNorm();
      for (double mu : mus) {
        const double ws = weiss_spectral(b, st, mu);
        r.prima = std::max(r.prima, std::fabs(ws - weiss_homogeneous(b, c, mu, mu)) / detail::rel_scale(ws, n2));
        for (double alpha : {mu + 0.7, mu - 0.3, 2.5}) {
          const auto id = weiss_cross(b, st, alpha, mu);
          r.seconda = std::max(r.seconda, std::fabs(id.lhs - id.rhs) / detail::rel_scale(id.lhs, n2));
        }
        const double wq = weiss_quadrature(field_from_spectral(b, c, mu), mu, {}, 1.0, rules);
        r.quad = std::max(r.quad, std::fabs(wq - ws) / detail::rel_scale(ws, 1.0));
        // single-degree trace: r^d e is a solution with homogeneity μ + t
        const Eigen::VectorXd& e = single[t];
        const double d = degree[t], e2 = e.squaredNorm();
        const auto sh = weiss_shift(p, SpectralTrace{e, 0.0}, mu, d - mu);
        const double wd = weiss_homogeneous(b, e, d, mu);
        r.terza = std::max(r.terza, std::fabs(wd - sh.at_shifted) / detail::rel_scale(wd, e2));
        const double wm = weiss_spectral(b, SpectralTrace{e, 0.0}, mu);
        r.quarta = std::max(r.quarta, std::fabs(wm - sh.at_mu) / detail::rel_scale(wm, e2));
      }
    });
    Row worst;
    for (const Row& r : rows) {
      worst.prima = std::max(worst.prima, r.prima);
      worst.seconda = std::max(worst.seconda, r.seconda);
      worst.terza = std::max(worst.terza, r.terza);
      worst.quarta = std::max(worst.quarta, r.quarta);
      worst.quad = std::max(worst.quad, r.quad);
    }
    const bool ok = worst.prima <= 1e-12 && worst.seconda <= 1e-12 && worst.terza <= 1e-12 && worst.quarta <= 1e-12 &&
                    worst.quad <= 1e-8;
    res.pass = res.pass && ok;
    res.detail[detail::config_key(p)] = {{"traces", traces},      {"prima", worst.prima},   {"seconda", worst.seconda},
                                         {"terza", worst.terza},  {"quarta", worst.quarta}, {"quadrature", worst.quad},
                                         {"pass", ok}};
  }
  return res;
}

// ---------------------------------------------------------------------------
// 2. regular inequality at 1+s

inline CriterionResult verify_regular_corpus(VerifyContext& ctx) {
  CriterionResult res{2, "regular inequality corpus", true, nlohmann::json::object()};
  for (const Params& p : detail::corpus_configs()) {
    const EigenBasis& b = ctx.basis(p);
    const auto& corpus = ctx.corpus(p);
    std::vector<CompetitorReport> reps(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) { reps[i] = check_epi_regular(b, TraceVec::from_modes(corpus[i])); });
    std::size_t failures = 0, strict = 0;
    double min_margin = std::numeric_limits<double>::infinity(), kappa_err = 0.0;
    for (const auto& r : reps) {
      if (!r.pass || !r.admissible) ++failures;
      if (r.margin > 0.0) ++strict;
      min_margin = std::min(min_margin, r.margin);
      kappa_err = std::max(kappa_err, std::fabs(r.constant - (1.0 + p.a) / (2.0 * p.n + p.a + 5.0)));
    }
    // equality case: the profile trace, and its rigidity under the negative inequality
    std::vector<double> e(static_cast<std::size_t>(p.n), 0.0);
    e.back() = 1.0;
    TraceVec h = TraceVec::zeros(b.size());
    h.h = 1.0;
    const auto rh = check_epi_regular(b, h, e);
    const bool ok = failures == 0 && strict == corpus.size() && kappa_err == 0.0 && rh.pass &&
                    std::fabs(rh.margin) <= 1e-8;
    res.pass = res.pass && ok;
    res.detail[detail::config_key(p)] = {{"traces", corpus.size()},       {"failures", failures},
                                         {"strict", strict},              {"min_margin", min_margin},
                                         {"kappa", rh.constant},          {"kappa_error", kappa_err},
                                         {"profile_margin", rh.margin},   {"profile_W_z", rh.W_z},
                                         {"pass", ok}};
  }
  return res;
}

// ---------------------------------------------------------------------------
// 3. negative inequality at 1+s

inline CriterionResult verify_negative_regular(VerifyContext& ctx) {
  CriterionResult res{3, "negative inequality corpus", true, nlohmann::json::object()};
  const std::size_t targeted = ctx.options().quick ? 10 : 50;
  for (const Params& p : detail::corpus_configs()) {
    const EigenBasis& b = ctx.basis(p);
    const auto& corpus = ctx.corpus(p);
    std::vector<CompetitorReport> reps(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) { reps[i] = check_epi_negative_regular(b, TraceVec::from_modes(corpus[i])); });
    std::size_t failures = 0;
    double min_margin = std::numeric_limits<double>::infinity(), eps_err = 0.0;
    for (const auto& r : reps) {
      if (!r.pass || !r.admissible) ++failures;
      min_margin = std::min(min_margin, r.margin);
      eps_err = std::max(eps_err, std::fabs(r.constant - (1.0 + p.a) / (2.0 * p.n - p.a + 3.0)));
    }
    // targeted traces with a flat-profile component, where I and K must cancel
    const std::size_t nt = std::min(targeted, corpus.size());
    std::vector<NegativeTerms> terms(nt);
    parallel_for(nt, [&](std::size_t i) {
      TraceVec t = TraceVec::from_modes(corpus[i]);
      t.u0_flat = 0.3;
      terms[i] = negative_regular_terms(decompose_regular(b, t, U0Kind::Flat));
    });
    double worst_I = 0.0, worst_K = 0.0, worst_split = 0.0;
    for (const auto& t : terms) {
      worst_I = std::max(worst_I, std::fabs(t.I));
      worst_K = std::max(worst_K, std::fabs(t.K));
      worst_split = std::max(worst_split, std::fabs(t.I + t.J + t.K + t.L - t.difference));
    }
    const bool ok = failures == 0 && eps_err == 0.0 && worst_I <= 1e-9 && worst_K <= 1e-9 && worst_split <= 1e-9;
    res.pass = res.pass && ok;
    res.detail[detail::config_key(p)] = {{"traces", corpus.size()}, {"failures", failures},
                                         {"min_margin", min_margin}, {"epsilon_error", eps_err},
                                         {"targeted", nt},           {"max_abs_I", worst_I},
                                         {"max_abs_K", worst_K},     {"split_residual", worst_split},
                                         {"pass", ok}};
  }
  return res;
}

// ---------------------------------------------------------------------------
// 4. logarithmic inequality at 2m

inline CriterionResult verify_log(VerifyContext& ctx) {
  CriterionResult res{4, "logarithmic inequality", true, nlohmann::json::object()};
  const int m = 1;
  const double eps_floor = std::ldexp(1.0, -12);
  for (const Params& p : detail::corpus_configs()) {
    const EigenBasis& b = ctx.basis(p);
    const EpsilonCalibration& cal = ctx.calibration(p);
    const auto& holdout = ctx.holdout(p);
    const auto calib_corpus = random_admissible_corpus(b, ctx.calibration_size(p), ctx.calibration_seed(p));
    std::size_t log1_fail = 0, log1_applicable = 0, head_fail = 0, strong_fail = 0;
    double worst_log1 = -std::numeric_limits<double>::infinity();
    auto run = [&](const std::vector<Eigen::VectorXd>& corpus, bool count_headline) {
      std::vector<CompetitorReport> reps(corpus.size());
      std::vector<Log1Check> l1(corpus.size());
      parallel_for(corpus.size(), [&](std::size_t i) {
        const auto comp = competitor_log(b, corpus[i], m, minimal_theta(b, corpus[i], m), cal.eps_log, false);
        reps[i] = comp.report;
        l1[i] = log1_check(b, comp);
      });
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (l1[i].applicable) {
          ++log1_applicable;
          const double excess = l1[i].lhs - l1[i].rhs;
          worst_log1 = std::max(worst_log1, excess);
          if (excess > 1e-10 * (1.0 + std::fabs(l1[i].rhs))) ++log1_fail;
        }
        if (!count_headline) continue;
        if (!reps[i].pass) ++head_fail;
        if (reps[i].strong_margin && *reps[i].strong_margin < -reps[i].truncation_budget) ++strong_fail;
      }
    };
    run(calib_corpus, false);
    run(holdout, true);
    const bool ok = log1_fail == 0 && head_fail == 0 && strong_fail == 0 && cal.eps_log >= eps_floor &&
                    log_beta(p.n) == (p.n == 1 ? 0.0 : 1.0 / 3.0);
    res.pass = res.pass && ok;
    res.detail[detail::config_key(p)] = {{"beta", log_beta(p.n)},
                                         {"eps_log", cal.eps_log},
                                         {"calibration_traces", cal.corpus_size},
                                         {"stress_traces", cal.stress_size},
                                         {"holdout_traces", holdout.size()},
                                         {"log1_applicable", log1_applicable},
                                         {"log1_failures", log1_fail},
                                         {"log1_worst_excess", log1_applicable ? worst_log1 : 0.0},
                                         {"headline_failures", head_fail},
                                         {"strong_failures", strong_fail},
                                         {"pass", ok}};
  }
  return res;
}

// ---------------------------------------------------------------------------
// 5. negative inequality at 2m

inline CriterionResult verify_negative_2m(VerifyContext& ctx) {
  CriterionResult res{5, "negative inequality at 2m", true, nlohmann::json::object()};
  const int m = 1;
  for (const Params& p : detail::corpus_configs()) {
    const EigenBasis& b = ctx.basis(p);
    const EpsilonCalibration& cal = ctx.calibration(p);
    const auto& holdout = ctx.holdout(p);
    std::vector<CompetitorReport> reps(holdout.size());
    parallel_for(holdout.size(),
                 [&](std::size_t i) { reps[i] = check_epi_negative_2m(b, holdout[i], m, cal.eps_neg2m); });
    std::size_t failures = 0, nontrivial = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (const auto& r : reps) {
      if (!r.pass) ++failures;
      if (!r.trivial_branch) ++nontrivial;
      min_margin = std::min(min_margin, r.margin);
    }
    double h2m_margin = 0.0, h2m_W = 0.0;
    for (int mm : {1, 2}) {
      const Eigen::VectorXd c = h2m_coefficients(b, mm).normalized();
      // the calibrated ε belongs to m = 1; higher m needs ε inside its own range
      const double eps = std::min(cal.eps_neg2m, 0.5 * negative_2m_constants(b, mm).eps_max);
      const auto r = check_epi_negative_2m(b, c, mm, eps);
      h2m_margin = std::max(h2m_margin, std::fabs(r.margin));
      h2m_W = std::max(h2m_W, std::fabs(r.W_z));
    }
    const bool ok = failures == 0 && h2m_margin <= 1e-10 && h2m_W <= 1e-10;
    res.pass = res.pass && ok;
    res.detail[detail::config_key(p)] = {{"eps_neg2m", cal.eps_neg2m}, {"traces", holdout.size()},
                                         {"failures", failures},       {"nontrivial", nontrivial},
                                         {"min_margin", min_margin},   {"h2m_max_abs_margin", h2m_margin},
                                         {"h2m_max_abs_W", h2m_W},     {"pass", ok}};
  }
  return res;
}

// ---------------------------------------------------------------------------
// 6. constructions

/// Richardson limit of f(y) as y → 0 for f(y) = L + Σ_j c_j y^{q_j}, sampled at y0·2^{-i}.
inline double richardson_limit(const std::function<double(double)>& f, double y0, const std::vector<double>& powers) {
  std::vector<double> vals;
  for (std::size_t i = 0; i <= powers.size(); ++i) vals.push_back(f(y0 * std::ldexp(1.0, -static_cast<int>(i))));
  for (double q : powers) {
    const double r = std::pow(2.0, q);
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) vals[i] = (r * vals[i + 1] - vals[i]) / (r - 1.0);
    vals.pop_back();
  }
  return vals.front();
}

inline CriterionResult verify_constructions(VerifyContext&) {
  CriterionResult res{6, "constructions", true, nlohmann::json::object()};
  const std::vector<Rational> as{Rational(-1, 2), Rational(-1, 5), Rational(0), Rational(1, 3), Rational(3, 5)};
  std::size_t cases = 0, residual_fail = 0, trace_fail = 0, extension_fail = 0;
  for (int n : {1, 2})
    for (const Rational& a : as)
      for (int m = 1; m <= 4; ++m) {
        ++cases;
        const auto h = build_h_2m<Rational>(n, a, m);
        if (!h.apply_La(a).is_zero()) ++residual_fail;
        const auto tr = h.restrict_last_zero();
        if (!(tr - squared_norm_x<Rational>(n).pow(m)).is_zero()) ++trace_fail;
        if (!(extend_La_harmonic(tr, a) - h).is_zero()) ++extension_fail;
      }
  // Neumann trace of the regular profile as the y → 0 limit of y^a ∂_y h
  double neumann_err = 0.0;
  for (double s : {0.25, 0.5, 0.75}) {
    const double a = 1.0 - 2.0 * s;
    RegularProfile prof({1.0}, s);
    for (double x : {-1.5, -0.7, -0.2}) {
      auto flux = [&](double y) {
        const double dy = 1e-4 * y;
        double P[2] = {x, y + dy}, M[2] = {x, y - dy}, P2[2] = {x, y + 2 * dy}, M2[2] = {x, y - 2 * dy};
        const double d = (8.0 * (eval_h_e_s(prof, P) - eval_h_e_s(prof, M)) - (eval_h_e_s(prof, P2) - eval_h_e_s(prof, M2))) /
                         (12.0 * dy);
        return std::pow(y, a) * d;
      };
      // the flux expands in powers y^{1+a}, y^2, y^{3+a}, y^4
      const double lim = richardson_limit(flux, 0.05, {1.0 + a, 2.0, 3.0 + a, 4.0});
      double xx[1] = {x};
      const double exact = -neumann_constant(s) * std::pow(std::fabs(x), 1.0 - s);
      neumann_err = std::max(neumann_err, std::fabs(lim - exact));
      if (std::fabs(neumann_trace_h_e_s(prof, xx) - exact) > 1e-14 * std::fabs(exact)) neumann_err = 1.0;
    }
  }
  res.pass = residual_fail == 0 && trace_fail == 0 && extension_fail == 0 && neumann_err <= 1e-6;
  res.detail = {{"h2m_cases", cases},
                {"residual_failures", residual_fail},
                {"trace_failures", trace_fail},
                {"extension_failures", extension_fail},
                {"neumann_max_error", neumann_err}};
  return res;
}

// ---------------------------------------------------------------------------
// 7. frequency gap

inline CriterionResult verify_gap(VerifyContext& ctx) {
  CriterionResult res{7, "frequency gap", true, nlohmann::json::object()};
  Rng rng(detail::derive_seed(ctx.options().seed, 700));
  double width_err = 0.0, left2m_err = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform() * 4.0);
    const double a = -0.99 + 1.98 * rng.uniform();
    const auto g = gap_regular(Params::from_a(n, a));
    width_err = std::max({width_err, std::fabs(g.left_width() - (1.0 + a) / 2.0), std::fabs(g.right_width() - (1.0 + a) / 2.0)});
    const int m = 1 + static_cast<int>(rng.uniform() * 3.0);
    const double e = 1e-4 + 0.3 * rng.uniform();
    const auto g2 = gap_2m(Params::from_a(n, a), m, 0.1, e, log_beta(n));
    left2m_err = std::max(left2m_err, std::fabs(g2.left_width() - (n + a + 4.0 * m - 1.0) * e / (1.0 + e)));
  }
  const auto half = gap_regular(Params::from_s(1, 0.5));
  const double lo = half.center - half.left_width(), hi = half.center + half.right_width();
  const bool half_ok = std::fabs(lo - 1.0) <= 1e-12 && std::fabs(hi - 2.0) <= 1e-12 && half.center == 1.5;
  res.pass = width_err <= 1e-12 && left2m_err <= 1e-12 && half_ok;
  res.detail = {{"regular_width_max_error", width_err},
                {"left_2m_max_error", left2m_err},
                {"half_laplacian_excluded", {{lo, half.center}, {half.center, hi}}}};
  return res;
}

// ---------------------------------------------------------------------------
// 8. solver against closed forms

namespace detail {

inline MeshSpec square_grid(int n, int N) {
  MeshSpec m;
  m.n = n;
  m.nx = N;
  m.ny = N;
  return m;
}

inline double max_abs(const std::vector<double>& v) {
  double out = 0.0;
  for (double x : v)
    if (std::isfinite(x)) out = std::max(out, std::fabs(x));
  return out;
}

}  // namespace detail

inline CriterionResult verify_solver(VerifyContext&) {
  CriterionResult res{8, "solver convergence", true, nlohmann::json::object()};
  const Params p = Params::from_a(1, 0.0);
  const int N = 256;
  const EigenBasis b = build_basis(p, 4);
  {
    const auto pr = profile_problem(p, {1.0});
    const auto sol = solve_psor(pr, detail::square_grid(1, N));
    const double scale = std::pow(2.0, p.s) / p.s;
    const double err = sol.sup_error(pr.datum);
    const double err_coarse = sol.coarse ? sol.coarse->sup_error(pr.datum) : std::numeric_limits<double>::quiet_NaN();
    const auto blow = classify_point(sol, {0.0}, b);
    const auto mon = decay_monitors(sol, {0.0}, 1.0 + p.s);
    const double wmax = detail::max_abs(mon.W);
    const bool ok = sol.converged && err <= 0.02 * scale && blow.N0 >= 1.45 && blow.N0 <= 1.55 && wmax <= 0.02 &&
                    err / err_coarse <= 0.7;
    res.pass = res.pass && ok;
    res.detail["profile"] = {{"grid", N},
                             {"converged", sol.converged},
                             {"relative_sup_error", err / scale},
                             {"refinement_ratio", err / err_coarse},
                             {"N0", blow.N0},
                             {"max_abs_W", wmax},
                             {"type", blowup_type_name(blow.type)},
                             {"pass", ok}};
  }
  {
    const auto h2 = build_h_2m<double>(1, 0.0, 1);
    const auto sol = solve_psor(polynomial_problem(p, h2), detail::square_grid(1, N));
    const auto blow = classify_point(sol, {0.0}, b);
    double coef_err = 0.0;
    const bool singular = blow.type == BlowupType::Singular && blow.m == 1;
    if (singular) {
      Exponents xx{2, 0}, yy{0, 2};
      const double ref = h2.coefficient(xx);
      coef_err = std::max(std::fabs(blow.p2m.coefficient(xx) - ref), std::fabs(blow.p2m.coefficient(yy) - h2.coefficient(yy))) /
                 std::fabs(ref);
    }
    const bool ok = sol.converged && blow.lambda_hat >= 1.9 && blow.lambda_hat <= 2.1 && singular && coef_err <= 0.05 &&
                    blow.d2m == 0;
    res.pass = res.pass && ok;
    res.detail["degree_two"] = {{"grid", N},
                                {"converged", sol.converged},
                                {"lambda_hat", blow.lambda_hat},
                                {"type", blowup_type_name(blow.type)},
                                {"m", blow.m},
                                {"coefficient_error", singular ? coef_err : 1.0},
                                {"d2m", blow.d2m},
                                {"pass", ok}};
  }
  return res;
}

// ---------------------------------------------------------------------------
// 9. monotonicity monitors on solver instances

inline CriterionResult verify_monitors(VerifyContext& ctx) {
  CriterionResult res{9, "monotonicity monitors", true, nlohmann::json::array()};
  const bool quick = ctx.options().quick;
  const int N1 = quick ? 64 : 128;
  struct Instance {
    std::string name;
    ObstacleProblem prob;
    MeshSpec spec;
    std::vector<double> x0;  ///< empty: nearest free boundary point to the origin
    double lambda = 0.0;     ///< 0: from the classification
  };
  std::vector<Instance> inst;
  for (double a : {-0.5, 0.0, 0.5}) {
    const Params p = Params::from_a(1, a);
    inst.push_back({"profile a=" + detail::fmt(a), profile_problem(p, {1.0}), detail::square_grid(1, N1), {0.0}, 1.0 + p.s});
    inst.push_back({"degree_two a=" + detail::fmt(a), polynomial_problem(p, build_h_2m<double>(1, a, 1)),
                    detail::square_grid(1, N1), {0.0}, 2.0});
  }
  inst.push_back({"perturbed_profile", perturbed_profile_problem(Params::from_a(1, 0.0)), detail::square_grid(1, N1), {0.0}, 1.5});
  {
    // quadratic obstacle reduced to a zero obstacle
    const Params p = Params::from_a(1, 0.0);
    Polynomial<double> q(1);
    q.add_term({0}, 0.2);
    q.add_term({2}, -1.0);
    const ReducedProblem red = reduce_obstacle(p, polynomial_obstacle(q), {0.0}, 2);
    ObstacleProblem zero;
    zero.params = p;
    zero.datum = [red](const double* X) { return red.to_reduced(X[0] * X[0] - X[1] * X[1] - 0.5, X); };
    zero.obstacle = [](const double*) { return 0.0; };
    inst.push_back({"reduced_quadratic_obstacle", zero, detail::square_grid(1, N1), {}, 0.0});
  }
  {
    const Params p = Params::from_a(2, 0.0);
    inst.push_back({"planar_profile", profile_problem(p, {0.6, 0.8}), detail::square_grid(2, 64), {0.0, 0.0}, 1.5});
  }
  for (const auto& in : inst) {
    nlohmann::json row{{"instance", in.name}, {"grid", in.spec.nx}};
    bool ok = false;
    try {
      const auto sol = solve_psor(in.prob, in.spec);
      std::vector<double> x0 = in.x0;
      double lambda = in.lambda;
      if (x0.empty()) {
        const auto fb = nearest_free_boundary_point(sol, std::vector<double>(static_cast<std::size_t>(in.prob.params.n), 0.0));
        if (!fb) throw InvalidInput("no free boundary point");
        x0 = *fb;
      }
      if (lambda == 0.0) {
        const auto blow = classify_point(sol, x0, build_basis(in.prob.params, 4));
        lambda = blow.type == BlowupType::Regular    ? 1.0 + in.prob.params.s
                 : blow.type == BlowupType::Singular ? 2.0 * blow.m
                                                     : blow.lambda_hat;
        row["type"] = blowup_type_name(blow.type);
      }
      const auto mon = decay_monitors(sol, x0, lambda);
      ok = sol.converged && mon.H_monotone.ok && mon.Phi_monotone.ok && mon.Wmod_monotone.ok;
      row["x0"] = x0;
      row["lambda"] = lambda;
      row["radii"] = mon.radii.size();
      row["H_worst_excess"] = mon.H_monotone.worst_excess;
      row["Phi_worst_excess"] = mon.Phi_monotone.worst_excess;
      row["Wmod_worst_excess"] = mon.Wmod_monotone.worst_excess;
    } catch (const Error& e) {
      row["error"] = e.what();
    }
    row["pass"] = ok;
    res.pass = res.pass && ok;
    res.detail.push_back(row);
  }
  return res;
}

// ---------------------------------------------------------------------------
// driver

using CriterionFn = CriterionResult (*)(VerifyContext&);

inline const std::vector<std::pair<int, CriterionFn>>& criteria() {
  static const std::vector<std::pair<int, CriterionFn>> table{
      {1, verify_spectral_identities}, {2, verify_regular_corpus}, {3, verify_negative_regular},
      {4, verify_log},                 {5, verify_negative_2m},    {6, verify_constructions},
      {7, verify_gap},                 {8, verify_solver},         {9, verify_monitors}};
  return table;
}

/// Runs one criterion; library errors become a failed result carrying the message.
inline CriterionResult run_criterion(int id, VerifyContext& ctx) {
  for (const auto& [cid, fn] : criteria()) {
    if (cid != id) continue;
    try {
      return fn(ctx);
    } catch (const Error& e) {
      CriterionResult r{id, "criterion " + std::to_string(id), false, nlohmann::json::object()};
      r.detail["error"] = e.what();
      return r;
    }
  }
  throw ParameterError("unknown criterion " + std::to_string(id));
}

struct VerifyReport {
  VerifyOptions options;
  std::vector<CriterionResult> results;

  bool pass() const {
    return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.pass; });
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : results) arr.push_back(r.to_json());
    return {{"quick", options.quick}, {"seed", options.seed}, {"pass", pass()}, {"criteria", arr}};
  }
};

inline VerifyReport verify_all(const VerifyOptions& opt, const std::function<void(const CriterionResult&)>& on_result = {}) {
  VerifyContext ctx(opt);
  VerifyReport rep;
  rep.options = opt;
  for (const auto& entry : criteria()) {
    rep.results.push_back(run_criterion(entry.first, ctx));
    if (on_result) on_result(rep.results.back());
  }
  return rep;
}

}  // namespace fol
