#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <nlohmann/json.hpp>

#include "mapfluct/errors.hpp"
#include "mapfluct/fluctuation.hpp"
#include "mapfluct/model.hpp"
#include "mapfluct/montecarlo.hpp"
#include "mapfluct/rng.hpp"
#include "mapfluct/simulate.hpp"
#include "mapfluct/spectral.hpp"

namespace mapfluct {

/// One verification record: a residual against a tolerance, or a z-score
/// between an expected value and an estimate.
struct Check {
  std::string name;
  bool statistical = false;
  double expected = 0.0;
  double observed = 0.0;
  double se = 0.0;
  double score = 0.0;  // |z| or residual
  double tol = 0.0;
  bool gating = true;
  bool pass = true;
};

struct CheckReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::uint64_t n = 0;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  bool pass = true;
  double runtime_s = -1.0;  // reported only when requested

  void add(Check c) {
    if (c.gating && !c.pass) pass = false;
    checks.push_back(std::move(c));
  }

  void merge(const CheckReport& o) {
    for (const auto& c : o.checks) add(c);
    notes.insert(notes.end(), o.notes.begin(), o.notes.end());
  }

  double max_z() const {
    double z = 0.0;
    for (const auto& c : checks)
      if (c.statistical && c.gating) z = std::max(z, c.score);
    return z;
  }
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  std::uint64_t n = 1'000'000;  // paths per start phase
  int threads = 1;
  double z_max = 4.0;
  double tol = 1e-8;
  bool runtime = false;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline std::string fmt(cplx v) {
  if (v.imag() == 0.0) return fmt(v.real());
  std::ostringstream os;
  os << std::setprecision(6) << v.real() << (v.imag() < 0 ? "-" : "+") << std::abs(v.imag()) << "i";
  return os.str();
}

inline std::string fmt(const RVector& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v(i));
  return s + ")";
}

inline void add_residual(CheckReport& r, std::string name, double value, double tol, bool gating = true) {
  Check c;
  c.name = std::move(name);
  c.observed = value;
  c.score = value;
  c.tol = tol;
  c.gating = gating;
  c.pass = std::isfinite(value) && value <= tol;
  r.add(std::move(c));
}

inline void add_flag(CheckReport& r, std::string name, bool ok) {
  Check c;
  c.name = std::move(name);
  c.observed = ok ? 1.0 : 0.0;
  c.expected = 1.0;
  c.pass = ok;
  r.add(std::move(c));
}

/// z-score of observed against expected; a zero standard error passes only
/// on agreement to 1e-12.
inline void add_z(CheckReport& r, std::string name, double expected, double observed, double se, double z_max,
                  bool gating = true) {
  Check c;
  c.name = std::move(name);
  c.statistical = true;
  c.expected = expected;
  c.observed = observed;
  c.se = se;
  c.tol = z_max;
  c.gating = gating;
  const double diff = std::abs(observed - expected);
  if (se > 0.0) {
    c.score = diff / se;
    c.pass = c.score <= z_max;
  } else {
    c.score = 0.0;
    c.pass = diff <= 1e-12;
  }
  r.add(std::move(c));
}

inline void add_z(CheckReport& r, const std::string& name, cplx expected, cplx observed, double se_re, double se_im,
                  double z_max, bool imag_part) {
  add_z(r, name + " re", expected.real(), observed.real(), se_re, z_max);
  if (imag_part) add_z(r, name + " im", expected.imag(), observed.imag(), se_im, z_max);
}

inline void finish(CheckReport& r, const VerifyOptions& opt, std::chrono::steady_clock::time_point t0) {
  r.seed = opt.seed;
  r.n = opt.n;
  std::size_t stat = 0;
  for (const auto& c : r.checks) stat += c.statistical;
  if (stat > 50)
    r.notes.push_back(std::to_string(stat) + " statistical checks at |z| <= " + fmt(opt.z_max) +
                      "; no multiple-comparison correction applied");
  if (opt.runtime) r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Entrywise estimate matrices read from an accumulator laid out as
/// slot = (probe * n + row) * n + col, grouped by row.
struct EstMatrix {
  CMatrix mean;
  RMatrix se_re;
  RMatrix se_im;
};

inline EstMatrix read_matrix(const McAccumulator& acc, std::size_t probe, int n, bool group_by_row = true,
                             std::size_t fixed_group = 0) {
  EstMatrix e{CMatrix::Zero(n, n), RMatrix::Zero(n, n), RMatrix::Zero(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t slot = (probe * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)) * static_cast<std::size_t>(n) +
                               static_cast<std::size_t>(j);
      const McValue v = mc_value(acc, slot, group_by_row ? static_cast<std::size_t>(i) : fixed_group);
      e.mean(i, j) = v.mean;
      e.se_re(i, j) = v.se_re;
      e.se_im(i, j) = v.se_im;
    }
  return e;
}

inline std::size_t mslot(std::size_t probe, int n, int i, int j) {
  return (probe * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)) * static_cast<std::size_t>(n) +
         static_cast<std::size_t>(j);
}

/// Runs `fn(path, summary, start, index, acc)` over n paths per start phase.
template <typename Fn>
McAccumulator sample_paths(const MapModel& m, std::uint64_t n, std::uint64_t domain, std::size_t slots,
                           std::size_t groups, const VerifyOptions& opt, double a, double x, Fn fn) {
  const Simulator sim(m);
  const int np = m.size();
  McOptions mo{opt.seed, opt.threads, 4096};
  auto make = [&] {
    return [&, f = fn, path = Path{}, s = PathSummary{}](std::uint64_t idx, McAccumulator& acc) mutable {
      const int start = static_cast<int>(idx / n);
      PhiloxStream rng(opt.seed, stream_id(domain, idx));
      sim.run(rng, 0.0, start, path);
      path_summary(path, np, a, x, s);
      f(path, s, start, idx, acc);
    };
  };
  return run_paths(n * static_cast<std::uint64_t>(np), slots, groups, mo, make);
}

inline void require_count(const McAccumulator& acc, std::size_t group, const std::string& what) {
  if (acc.count[group] < 1000)
    throw InsufficientSamples(what + ": only " + std::to_string(acc.count[group]) + " conditioning events");
}

}  // namespace detail

/// Test functional F = exp(alpha X_{zeta-} + gamma sup X - <beta, occupation>);
/// the dead path evaluates to 1. Imaginary alpha and gamma keep |F| <= 1.
struct PathFunctional {
  cplx alpha{0.0, 0.5};
  cplx gamma{0.0, 0.3};
  RVector beta;

  cplx operator()(const Path& p, int n) const {
    if (p.dead()) return 1.0;
    static thread_local PathSummary s;
    path_summary(p, n, 0.0, std::numeric_limits<double>::infinity(), s);
    return std::exp(alpha * s.x_end + gamma * s.x_sup - beta.dot(s.occ_zeta));
  }
};

inline RVector default_beta(int n) {
  RVector b(n);
  for (int i = 0; i < n; ++i) b(i) = 0.2 / (i + 1);
  return b;
}

/// Fundamental-matrix identities on a beta grid.
inline CheckReport verify_identities(const MapModel& m, const std::vector<RVector>& betas, const VerifyOptions& opt = {}) {
  using detail::fmt;
  const auto t0 = std::chrono::steady_clock::now();
  CheckReport r;
  r.suite = "identities";
  const PhasePartition part = phase_partition(m);
  for (const RVector& beta : betas) {
    const std::string tag = " beta=" + fmt(beta);
    const FundamentalPair p = fundamental_pair(m, beta);
    detail::add_residual(r, "null vectors" + tag, null_residual(p.primal), opt.tol);
    detail::add_residual(r, "dual null vectors" + tag, null_residual(p.dual), opt.tol);
    detail::add_residual(r, "HR = GH" + tag, hr_gh_residual(p.primal), opt.tol);
    detail::add_residual(r, "dual G" + tag, p.rel_hat.G, opt.tol);
    detail::add_residual(r, "dual R" + tag, p.rel_hat.R, opt.tol);
    detail::add_residual(r, "dual H" + tag, p.rel_hat.H, opt.tol);
    detail::add_residual(r, "imaginary residue" + tag, p.primal.imag_residual, 1e-10);
    const bool kills = !killing_is_zero(m) || (beta.array() > 0.0).any();
    if (kills) {
      const double ga = Eigen::EigenSolver<RMatrix>(p.primal.G).eigenvalues().real().maxCoeff();
      const double ra = Eigen::EigenSolver<RMatrix>(p.primal.R).eigenvalues().real().maxCoeff();
      detail::add_flag(r, "spectral abscissa of G < 0" + tag, ga < 0.0);
      detail::add_flag(r, "spectral abscissa of R < 0" + tag, ra < 0.0);
    }
    for (int i = 0; i < m.size(); ++i)
      if (part[static_cast<std::size_t>(i)] == PhaseClass::up)
        detail::add_residual(r, "G integral equation row " + std::to_string(i) + tag, fg_residual(p.primal, i), opt.tol);
  }
  detail::finish(r, opt, t0);
  return r;
}

/// Wiener-Hopf factorization identities and the necessity of the diag(c_bar)
/// correction.
inline CheckReport verify_factorization(const MapModel& m, const std::vector<cplx>& alphas,
                                        const std::vector<RVector>& betas, const VerifyOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckReport r;
  r.suite = "factorization";
  const FundamentalPair base = fundamental_pair(m, RVector::Zero(m.size()));
  const WhResiduals w = wh_residuals(base, alphas, betas);
  detail::add_residual(r, "killing = inf * cond_up", w.inf_cond_up, opt.tol);
  detail::add_residual(r, "killing = sup * cond_down", w.sup_cond_down, opt.tol);
  detail::add_residual(r, "killing = inf * diag(c_bar)^-1 * dual sup^T pi q", w.full, opt.tol);
  detail::add_residual(r, "diag(c_bar) cond_up = dual sup^T pi q", w.wh_up, opt.tol);
  detail::add_residual(r, "diag(c_under) cond_down = dual inf^T pi q", w.wh_down, opt.tol);
  detail::add_residual(r, "sum c = sum c_bar = sum c_under = pi.q", w.c_sums, 1e-12);
  detail::add_residual(r, "naive correction (pi q)^-1 (informational)", w.naive, opt.tol, false);
  const ReversalConstants rc = reversal_constants(base);
  const double neg = std::min({rc.c.minCoeff(), rc.c_bar.minCoeff(), rc.c_under.minCoeff(), rc.u.minCoeff(),
                               rc.u_hat.minCoeff()});
  detail::add_flag(r, "reversal constants nonnegative", neg >= -1e-12);
  r.notes.push_back("naive correction residual " + detail::fmt(w.naive));
  detail::finish(r, opt, t0);
  return r;
}

enum class McTarget { killing, sup, inf, sigma, cond_up, cond_down };

inline const char* to_string(McTarget t) {
  switch (t) {
    case McTarget::killing: return "killing";
    case McTarget::sup: return "sup";
    case McTarget::inf: return "inf";
    case McTarget::sigma: return "sigma";
    case McTarget::cond_up: return "cond_up";
    case McTarget::cond_down: return "cond_down";
  }
  return "?";
}

/// Monte Carlo estimates of a transform against its closed form, entrywise.
/// The sigma target ignores alphas (the exit level is 0).
inline CheckReport verify_mc(const MapModel& m, McTarget target, const std::vector<cplx>& alphas,
                             const std::vector<RVector>& betas, const VerifyOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = m.size();
  CheckReport r;
  r.suite = std::string("mc-") + to_string(target);
  McRequest req;
  req.n = opt.n;
  req.domain = 100 + static_cast<std::uint64_t>(target);
  switch (target) {
    case McTarget::killing: req.functional = Functional::zeta_minus; break;
    case McTarget::sup: req.functional = Functional::supremum; break;
    case McTarget::inf: req.functional = Functional::infimum; break;
    case McTarget::sigma: req.functional = Functional::last_exit; break;
    case McTarget::cond_up: req.functional = Functional::post_infimum; break;
    case McTarget::cond_down: req.functional = Functional::post_supremum; break;
  }
  const FundamentalSet base = fundamental(m);
  std::vector<CMatrix> analytic;
  for (const RVector& beta : betas) {
    const FundamentalSet at = (beta.array() == 0.0).all() ? base : fundamental(m, beta);
    if (target == McTarget::sigma) {
      req.probes.push_back({0.0, beta});
      analytic.push_back(last_exit_transform(base, at).cast<cplx>());
      continue;
    }
    for (cplx a : alphas) {
      WhKind kind = WhKind::killing;
      if (target == McTarget::sup) kind = WhKind::sup;
      if (target == McTarget::inf) kind = WhKind::inf;
      if (target == McTarget::cond_up) kind = WhKind::cond_up;
      if (target == McTarget::cond_down) kind = WhKind::cond_down;
      req.probes.push_back({a, beta});
      analytic.push_back(wh_factor(base, at, kind, a).value);
    }
  }
  const std::vector<McEstimate> est = mc_transform(m, req, {opt.seed, opt.threads, 4096});
  const bool conditional = target == McTarget::cond_up || target == McTarget::cond_down;
  if (conditional)
    for (int i = 0; i < n; ++i)
      if (est.front().count[static_cast<std::size_t>(i)] < 1000)
        throw InsufficientSamples(std::string(to_string(target)) + ": too few conditioning events in phase " +
                                  std::to_string(i));
  for (std::size_t k = 0; k < req.probes.size(); ++k) {
    const std::string tag = " alpha=" + detail::fmt(req.probes[k].alpha) + " beta=" + detail::fmt(req.probes[k].beta);
    const bool imag = req.probes[k].alpha.imag() != 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        detail::add_z(r, "(" + std::to_string(i) + "," + std::to_string(j) + ")" + tag, analytic[k](i, j),
                      est[k].mean(i, j), est[k].se_re(i, j), est[k].se_im(i, j), opt.z_max, imag);
  }
  detail::finish(r, opt, t0);
  return r;
}

namespace detail {

/// Streaming moments of a pair (A, B) for the covariance test.
enum Moment : std::size_t { kA, kB, kAB, kAA, kBB, kAAB, kABB, kAABB, kMoments };

inline void add_pair(McAccumulator& acc, std::size_t base, double a, double b) {
  const double v[kMoments] = {a, b, a * b, a * a, b * b, a * a * b, a * b * b, a * a * b * b};
  for (std::size_t k = 0; k < kMoments; ++k) acc.sum_re[base + k] += v[k];
}

/// Sample covariance and its standard error from the streaming moments.
inline std::pair<double, double> covariance(const McAccumulator& acc, std::size_t base, std::uint64_t count) {
  const double n = static_cast<double>(count);
  double e[kMoments];
  for (std::size_t k = 0; k < kMoments; ++k) e[k] = acc.sum_re[base + k] / n;
  const double a = e[kA], b = e[kB];
  const double cov = e[kAB] - a * b;
  const double m4 = e[kAABB] - 2.0 * b * e[kAAB] - 2.0 * a * e[kABB] + b * b * e[kAA] + a * a * e[kBB] +
                    4.0 * a * b * e[kAB] - 3.0 * a * a * b * b;
  const double var = std::max(0.0, m4 - cov * cov);
  return {cov, std::sqrt(var / n)};
}

}  // namespace detail

/// Splitting at the infimum: independence of pre- and post-infimum parts
/// given J_inf, and equality of the post-infimum and post-last-exit laws.
inline CheckReport verify_splitting(const MapModel& m, const VerifyOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = m.size();
  const auto un = static_cast<std::size_t>(n);
  const PhasePartition part = phase_partition(m);
  CheckReport r;
  r.suite = "splitting";
  const Simulator sim(m);
  constexpr double kPostAlpha = -0.5;
  // pairs: 4 pre x post, 4 pre x independent control
  constexpr std::size_t kPairs = 8;
  const std::size_t cov_slots = un * kPairs * detail::kMoments;
  const std::vector<Probe> probes = {{cplx(kPostAlpha, 0.0), default_beta(n)}, {cplx(0.0, 0.5), RVector::Zero(n)}};
  const std::size_t np = probes.size();
  const std::size_t law_slots = np * un * un;

  const McAccumulator split = detail::sample_paths(
      m, opt.n, 200, cov_slots + law_slots, un, opt, 0.0, 1.0,
      [&, seg = Path{}, ctl = Path{}, s2 = PathSummary{}, s3 = PathSummary{}](
          const Path& p, const PathSummary& s, int, std::uint64_t idx, McAccumulator& acc) mutable {
        const int j = s.j_inf;
        acc.count[static_cast<std::size_t>(j)] += 1;
        seg = extract_segment(p, s, Segment::post_infimum);
        double zeta_post = 0.0, x_post = 0.0;
        int j_post = j;
        const RVector* occ_post = nullptr;
        if (!seg.dead()) {
          path_summary(seg, n, 0.0, 1.0, s2);
          zeta_post = s2.zeta;
          x_post = s2.x_end;
          j_post = s2.j_end;
          occ_post = &s2.occ_zeta;
        }
        PhiloxStream rng(opt.seed, stream_id(201, idx));
        sim.run(rng, 0.0, j, ctl);
        path_summary(ctl, n, 0.0, 1.0, s3);
        const double pre[2] = {std::exp(-s.g_inf), std::exp(s.x_inf)};
        const double post[2] = {std::exp(-zeta_post), std::exp(kPostAlpha * x_post)};
        const double control[2] = {std::exp(-s3.zeta), std::exp(s3.x_inf)};
        const std::size_t base = static_cast<std::size_t>(j) * kPairs * detail::kMoments;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            detail::add_pair(acc, base + static_cast<std::size_t>(a * 2 + b) * detail::kMoments, pre[a], post[b]);
            detail::add_pair(acc, base + static_cast<std::size_t>(4 + a * 2 + b) * detail::kMoments, pre[a], control[b]);
          }
        for (std::size_t k = 0; k < np; ++k) {
          const double dot = occ_post ? probes[k].beta.dot(*occ_post) : 0.0;
          acc.add(cov_slots + detail::mslot(k, n, j, j_post), std::exp(probes[k].alpha * x_post - dot));
        }
      });

  const McAccumulator last = detail::sample_paths(
      m, opt.n, 202, law_slots, un, opt, 0.0, 1.0,
      [&, seg = Path{}, s2 = PathSummary{}](const Path& p, const PathSummary& s, int, std::uint64_t,
                                            McAccumulator& acc) mutable {
        if (!s.sigma_continuous || s.j_sigma == kCemetery) return;
        const int j = s.j_sigma;
        acc.count[static_cast<std::size_t>(j)] += 1;
        seg = extract_segment(p, s, Segment::post_sigma);
        path_summary(seg, n, 0.0, 1.0, s2);
        for (std::size_t k = 0; k < np; ++k)
          acc.add(detail::mslot(k, n, j, s2.j_end), std::exp(probes[k].alpha * s2.x_end - probes[k].beta.dot(s2.occ_zeta)));
      });

  const char* pre_names[2] = {"exp(-G_inf)", "exp(X_inf)"};
  const char* post_names[2] = {"exp(-zeta_post)", "exp(-0.5 X_post)"};
  const char* ctl_names[2] = {"exp(-zeta_ctl)", "exp(X_inf_ctl)"};
  for (int j = 0; j < n; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    if (split.count[uj] == 0) {
      r.notes.push_back("phase " + std::to_string(j) + " never carries the infimum");
      continue;
    }
    detail::require_count(split, uj, "splitting at the infimum, phase " + std::to_string(j));
    const std::size_t base = uj * kPairs * detail::kMoments;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        auto [cov, se] = detail::covariance(split, base + static_cast<std::size_t>(a * 2 + b) * detail::kMoments, split.count[uj]);
        detail::add_z(r, std::string("cov ") + pre_names[a] + " x " + post_names[b] + " | J_inf=" + std::to_string(j), 0.0,
                      cov, se, opt.z_max);
        auto [cc, cse] = detail::covariance(split, base + static_cast<std::size_t>(4 + a * 2 + b) * detail::kMoments, split.count[uj]);
        detail::add_z(r, std::string("control cov ") + pre_names[a] + " x " + ctl_names[b] + " | J_inf=" + std::to_string(j),
                      0.0, cc, cse, opt.z_max);
      }
  }

  McAccumulator law = split;
  law.sum_re.erase(law.sum_re.begin(), law.sum_re.begin() + static_cast<std::ptrdiff_t>(cov_slots));
  law.sum_im.erase(law.sum_im.begin(), law.sum_im.begin() + static_cast<std::ptrdiff_t>(cov_slots));
  law.sq_re.erase(law.sq_re.begin(), law.sq_re.begin() + static_cast<std::ptrdiff_t>(cov_slots));
  law.sq_im.erase(law.sq_im.begin(), law.sq_im.begin() + static_cast<std::ptrdiff_t>(cov_slots));
  for (int j = 0; j < n; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    if (part[uj] == PhaseClass::down) continue;
    if (last.count[uj] == 0 && law.count[uj] == 0) continue;
    detail::require_count(law, uj, "post-infimum law, phase " + std::to_string(j));
    detail::require_count(last, uj, "post-last-exit law, phase " + std::to_string(j));
    for (std::size_t k = 0; k < np; ++k) {
      const detail::EstMatrix a = detail::read_matrix(law, k, n);
      const detail::EstMatrix b = detail::read_matrix(last, k, n);
      const std::string tag = " alpha=" + detail::fmt(probes[k].alpha) + " beta=" + detail::fmt(probes[k].beta);
      for (int l = 0; l < n; ++l) {
        const std::string name = "post-inf vs post-sigma (" + std::to_string(j) + "," + std::to_string(l) + ")" + tag;
        detail::add_z(r, name + " re", a.mean(j, l).real(), b.mean(j, l).real(), std::hypot(a.se_re(j, l), b.se_re(j, l)),
                      opt.z_max);
        if (probes[k].alpha.imag() != 0.0)
          detail::add_z(r, name + " im", a.mean(j, l).imag(), b.mean(j, l).imag(),
                        std::hypot(a.se_im(j, l), b.se_im(j, l)), opt.z_max);
      }
    }
  }
  detail::finish(r, opt, t0);
  return r;
}

namespace detail {

/// Adds entrywise z checks of lhs(i,j) = scale_l(i,j) * A(i,j) against
/// rhs(i,j) = scale_r(i,j) * B(j,i).
template <typename ScaleL, typename ScaleR>
void compare_transposed(CheckReport& r, const std::string& label, const EstMatrix& a, const EstMatrix& b, ScaleL sl,
                        ScaleR sr, double z_max, bool imag) {
  const auto n = static_cast<int>(a.mean.rows());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = sl(i, j), y = sr(i, j);
      const std::string name = label + " (" + std::to_string(i) + "," + std::to_string(j) + ")";
      add_z(r, name + " re", x * a.mean(i, j).real(), y * b.mean(j, i).real(),
            std::hypot(x * a.se_re(i, j), y * b.se_re(j, i)), z_max);
      if (imag)
        add_z(r, name + " im", x * a.mean(i, j).imag(), y * b.mean(j, i).imag(),
              std::hypot(x * a.se_im(i, j), y * b.se_im(j, i)), z_max);
    }
}

}  // namespace detail

struct TimerevParams {
  double t = 1.0;
  PathFunctional f;
};

/// Time reversal at a fixed time and at the killing time, both sides by
/// simulation of the model and of its dual.
inline CheckReport verify_timerev(const MapModel& m, const TimerevParams& prm, const VerifyOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = m.size();
  const auto un = static_cast<std::size_t>(n);
  CheckReport r;
  r.suite = "timerev";
  PathFunctional f = prm.f;
  if (f.beta.size() != n) f.beta = default_beta(n);
  const RVector pi = stationary(m);
  const MapModel md = dual(m);
  const std::size_t slots = 2 * un * un;

  const McAccumulator lhs = detail::sample_paths(
      m, opt.n, 300, slots, un, opt, 0.0, 1.0,
      [&, occ = RVector(RVector::Zero(n))](const Path& p, const PathSummary& s, int i, std::uint64_t,
                                           McAccumulator& acc) mutable {
        acc.count[static_cast<std::size_t>(i)] += 1;
        const PointState ps = state_at(p, prm.t, occ);
        if (ps.alive) acc.add(detail::mslot(0, n, i, ps.phase), f(reverse_path_at(p, prm.t), n));
        acc.add(detail::mslot(1, n, i, s.j_end), f(reverse_path(p, s, ReverseAt::zeta_minus), n));
      });
  const McAccumulator rhs = detail::sample_paths(
      md, opt.n, 301, slots, un, opt, 0.0, 1.0,
      [&, occ = RVector(RVector::Zero(n))](const Path& p, const PathSummary& s, int j, std::uint64_t,
                                           McAccumulator& acc) mutable {
        acc.count[static_cast<std::size_t>(j)] += 1;
        const PointState ps = state_at(p, prm.t, occ);
        if (ps.alive) acc.add(detail::mslot(0, n, j, ps.phase), f(kill_path_at(p, prm.t), n));
        acc.add(detail::mslot(1, n, j, s.j_end), f(p, n));
      });

  const bool imag = f.alpha.imag() != 0.0 || f.gamma.imag() != 0.0;
  const std::string ftag = " alpha=" + detail::fmt(f.alpha) + " gamma=" + detail::fmt(f.gamma) + " beta=" + detail::fmt(f.beta);
  detail::compare_transposed(
      r, "fixed time t=" + detail::fmt(prm.t) + ftag, detail::read_matrix(lhs, 0, n), detail::read_matrix(rhs, 0, n),
      [&](int i, int) { return pi(i); }, [&](int, int j) { return pi(j); }, opt.z_max, imag);
  detail::compare_transposed(
      r, "killing time" + ftag, detail::read_matrix(lhs, 1, n), detail::read_matrix(rhs, 1, n),
      [&](int i, int) { return pi(i) * m.kill(i); }, [&](int, int j) { return pi(j) * m.kill(j); }, opt.z_max, imag);
  detail::finish(r, opt, t0);
  return r;
}

enum class ReversalKind { inf, last, first };

inline const char* to_string(ReversalKind k) {
  switch (k) {
    case ReversalKind::inf: return "inf";
    case ReversalKind::last: return "last";
    case ReversalKind::first: return "first";
  }
  return "?";
}

struct ReversalParams {
  double a = 0.0;  // last exit level
  double x = 1.0;  // first passage level
  PathFunctional f;
};

namespace detail {

/// Length of the new-maximum ascent made in each phase (the running
/// supremum grows only by drift on a spectrally negative path).
inline void ascent(const Path& p, RVector& out) {
  out.setZero();
  double y = p.x0, top = p.x0;
  for (const Event& e : p.events) {
    const double z = y + e.slope * e.dt;
    if (z > top) {
      out(e.from) += z - std::max(y, top);
      top = z;
    }
    if (e.to == kCemetery) break;
    y = z + e.jump;
    top = std::max(top, y);
  }
}

}  // namespace detail

/// Time reversal at the infimum, at the last exit and at the first passage,
/// scaled by the closed-form constants c, u and u_hat.
inline CheckReport verify_reversal(const MapModel& m, ReversalKind kind, const ReversalParams& prm,
                                   const VerifyOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = m.size();
  const auto un = static_cast<std::size_t>(n);
  CheckReport r;
  r.suite = std::string("reversal-") + to_string(kind);
  if (!is_spectrally_negative(m)) throw UnsupportedError("verify_reversal: needs a spectrally negative model");
  PathFunctional f = prm.f;
  if (f.beta.size() != n) f.beta = default_beta(n);
  const FundamentalPair base = fundamental_pair(m, RVector::Zero(n));
  const ReversalConstants rc = reversal_constants(base);
  const RVector& pi = base.primal.pi;
  const MapModel md = dual(m);
  const bool imag = f.alpha.imag() != 0.0 || f.gamma.imag() != 0.0;
  const std::string ftag = " alpha=" + detail::fmt(f.alpha) + " gamma=" + detail::fmt(f.gamma) + " beta=" + detail::fmt(f.beta);
  const std::size_t mat = un * un;

  switch (kind) {
    case ReversalKind::inf: {
      const McAccumulator lhs = detail::sample_paths(
          m, opt.n, 400, 2 * mat, un, opt, 0.0, 1.0,
          [&](const Path& p, const PathSummary& s, int i, std::uint64_t, McAccumulator& acc) {
            acc.count[static_cast<std::size_t>(i)] += 1;
            acc.add(detail::mslot(0, n, i, s.j_inf), f(reverse_path(p, s, ReverseAt::infimum), n));
            acc.add(detail::mslot(1, n, i, s.j_inf), 1.0);
          });
      const McAccumulator rhs = detail::sample_paths(
          md, opt.n, 401, mat, un, opt, 0.0, 1.0,
          [&, seg = Path{}, s2 = PathSummary{}](const Path& p, const PathSummary& s, int, std::uint64_t,
                                                McAccumulator& acc) mutable {
            const int j = s.j_sup;
            acc.count[static_cast<std::size_t>(j)] += 1;
            seg = extract_segment(p, s, Segment::post_supremum);
            int end = j;
            if (!seg.dead()) {
              path_summary(seg, n, 0.0, 1.0, s2);
              end = s2.j_end;
            }
            acc.add(detail::mslot(0, n, j, end), f(seg, n));
          });
      for (int j = 0; j < n; ++j) detail::require_count(rhs, static_cast<std::size_t>(j), "dual post-supremum");
      detail::compare_transposed(
          r, "infimum" + ftag, detail::read_matrix(lhs, 0, n), detail::read_matrix(rhs, 0, n),
          [&](int i, int) { return pi(i) * m.kill(i); }, [&](int, int j) { return rc.c(j); }, opt.z_max, imag);
      const detail::EstMatrix pj = detail::read_matrix(lhs, 1, n);
      for (int j = 0; j < n; ++j) {
        double c = 0.0, var = 0.0;
        for (int i = 0; i < n; ++i) {
          const double w = pi(i) * m.kill(i);
          c += w * pj.mean(i, j).real();
          var += w * w * pj.se_re(i, j) * pj.se_re(i, j);
        }
        detail::add_z(r, "c(" + std::to_string(j) + ")", rc.c(j), c, std::sqrt(var), opt.z_max);
      }
      break;
    }
    case ReversalKind::last: {
      // slots: functional matrix, ascent per (start, phase), never below start
      auto run = [&](const MapModel& model, std::uint64_t domain, bool reverse) {
        return detail::sample_paths(
            model, opt.n, domain, 2 * mat + un, un, opt, prm.a, 1.0,
            [&, asc = RVector(RVector::Zero(n))](const Path& p, const PathSummary& s, int i, std::uint64_t,
                                                 McAccumulator& acc) mutable {
              acc.count[static_cast<std::size_t>(i)] += 1;
              detail::ascent(p, asc);
              for (int j = 0; j < n; ++j) acc.add(mat + detail::mslot(0, n, i, j), asc(j));
              acc.add(2 * mat + static_cast<std::size_t>(i), s.inf_event < 0 ? 1.0 : 0.0);
              if (!s.sigma_continuous || s.j_sigma == kCemetery) return;
              const Path q = reverse ? reverse_path(p, s, ReverseAt::sigma) : kill_path(p, s, ReverseAt::sigma);
              acc.add(detail::mslot(0, n, i, s.j_sigma), f(q, n));
            });
      };
      const McAccumulator lhs = run(m, 410, true);
      const McAccumulator rhs = run(md, 411, false);
      detail::compare_transposed(
          r, "last exit a=" + detail::fmt(prm.a) + ftag, detail::read_matrix(lhs, 0, n), detail::read_matrix(rhs, 0, n),
          [&](int i, int) { return rc.u(i); }, [&](int, int j) { return rc.u_hat(j); }, opt.z_max, imag);
      for (int pass = 0; pass < 2; ++pass) {
        const McAccumulator& acc = pass == 0 ? lhs : rhs;
        const RVector& target = pass == 0 ? rc.u : rc.u_hat;
        const RVector& w = pi;
        for (int j = 0; j < n; ++j) {
          double est = 0.0, var = 0.0;
          for (int k = 0; k < n; ++k) {
            const McValue v = mc_value(acc, mat + detail::mslot(0, n, k, j), static_cast<std::size_t>(k));
            const double s = w(k) * m.kill(k);
            est += s * v.mean.real();
            var += s * s * v.se_re * v.se_re;
          }
          detail::add_z(r, std::string(pass == 0 ? "u(" : "u_hat(") + std::to_string(j) + ") by ascent", target(j), est,
                        std::sqrt(var), opt.z_max);
        }
      }
      // informational: P_j(never below the start) against u_hat_j / (pi_j d_j)
      for (int j = 0; j < n; ++j) {
        const double d = m.levy[static_cast<std::size_t>(j)].drift;
        if (d <= 0.0) continue;
        const McValue v = mc_value(lhs, 2 * mat + static_cast<std::size_t>(j), static_cast<std::size_t>(j));
        detail::add_z(r, "P(never below start) in phase " + std::to_string(j) + " vs u_hat/(pi d) (informational)",
                      rc.u_hat(j) / (pi(j) * d), v.mean.real(), v.se_re, opt.z_max, false);
      }
      break;
    }
    case ReversalKind::first: {
      const McAccumulator lhs = detail::sample_paths(
          m, opt.n, 420, mat, un, opt, 0.0, prm.x,
          [&](const Path& p, const PathSummary& s, int i, std::uint64_t, McAccumulator& acc) {
            acc.count[static_cast<std::size_t>(i)] += 1;
            if (!s.tau_reached || !s.creep) return;
            acc.add(detail::mslot(0, n, i, s.j_tau), f(reverse_path(p, s, ReverseAt::tau), n));
          });
      const McAccumulator rhs = detail::sample_paths(
          md, opt.n, 421, mat, un, opt, 0.0, 1.0,
          [&, seg = Path{}, s2 = PathSummary{}](const Path& p, const PathSummary& s, int, std::uint64_t,
                                                McAccumulator& acc) mutable {
            const int j = s.j_inf;
            acc.count[static_cast<std::size_t>(j)] += 1;
            seg = extract_segment(p, s, Segment::post_infimum);
            if (seg.dead()) return;
            path_summary(seg, n, prm.x, std::numeric_limits<double>::infinity(), s2);
            if (!s2.sigma_continuous || s2.j_sigma == kCemetery) return;
            acc.add(detail::mslot(0, n, j, s2.j_sigma), f(kill_path(seg, s2, ReverseAt::sigma), n));
          });
      for (int j = 0; j < n; ++j) detail::require_count(rhs, static_cast<std::size_t>(j), "dual post-infimum");
      detail::compare_transposed(
          r, "first passage x=" + detail::fmt(prm.x) + ftag, detail::read_matrix(lhs, 0, n), detail::read_matrix(rhs, 0, n),
          [&](int i, int) { return rc.u(i); }, [&](int, int j) { return rc.u(j); }, opt.z_max, imag);
      break;
    }
  }
  detail::finish(r, opt, t0);
  return r;
}

namespace detail {

/// Mass that a jump law puts on (lo, hi] with 0 <= lo < hi <= inf.
inline double upper_mass(const JumpLaw& law, double lo, double hi) {
  double s = 0.0;
  law.for_each_atom([&](double w, const JumpAtom& a) {
    if (const auto* e = std::get_if<ExpPos>(&a)) {
      const double top = std::isinf(hi) ? 0.0 : std::exp(-e->rate * hi);
      s += w * (std::exp(-e->rate * lo) - top);
    } else if (const auto* p = std::get_if<PointMass>(&a)) {
      if (p->value > lo && p->value <= hi) s += w;
    }
  });
  return s;
}

/// Upward part of the jump measure U_ij on (lo, hi].
inline double jump_measure_up(const MapModel& m, int i, int j, double lo, double hi) {
  if (i == j) {
    const auto& c = m.levy[static_cast<std::size_t>(i)];
    return c.jump_rate > 0.0 ? c.jump_rate * upper_mass(*c.jump_law, lo, hi) : 0.0;
  }
  const double q = m.switch_rate(i, j);
  return q > 0.0 ? q * upper_mass(m.switch_law(i, j), lo, hi) : 0.0;
}

inline double chi2_pvalue(double stat, double dof) {
  if (dof < 1.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

}  // namespace detail

/// Initial law of the post-infimum process for DOWN phases with upward jumps,
/// and for spectrally negative models the closed-form initial law of the
/// post-supremum process from UP phases.
inline CheckReport verify_init_law(const MapModel& m, const VerifyOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = m.size();
  const auto un = static_cast<std::size_t>(n);
  const PhasePartition part = phase_partition(m);
  CheckReport r;
  r.suite = "init-law";
  const std::vector<double> up_edges = {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, std::numeric_limits<double>::infinity()};
  const std::size_t nb = up_edges.size() - 1;
  const auto bin_of = [](const std::vector<double>& edges, double x) {
    const auto it = std::lower_bound(edges.begin(), edges.end(), x);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - edges.begin() - 1));
  };

  bool any = false;
  for (int i = 0; i < n; ++i) {
    if (part[static_cast<std::size_t>(i)] != PhaseClass::down) continue;
    std::vector<int> targets;
    for (int j = 0; j < n; ++j)
      if (detail::jump_measure_up(m, i, j, 0.0, std::numeric_limits<double>::infinity()) > 0.0) targets.push_back(j);
    const std::string tag = " phase " + std::to_string(i);
    if (targets.empty()) {
      r.notes.push_back("phase " + std::to_string(i) + " has no upward jumps: c = 0, post-infimum law is the killing atom");
      detail::add_flag(r, "vacuous initial law" + tag, true);
      continue;
    }
    any = true;
    // observed: cells (target, bin) then the killing atom
    const std::size_t cells = targets.size() * nb + 1;
    const McAccumulator obs = detail::sample_paths(
        m, opt.n, 500 + static_cast<std::uint64_t>(i), cells, 1, opt, 0.0, 1.0,
        [&, seg = Path{}](const Path& p, const PathSummary& s, int, std::uint64_t, McAccumulator& acc) mutable {
          if (s.j_inf != i || s.inf_attained) return;
          acc.count[0] += 1;
          seg = extract_segment(p, s, Segment::post_infimum);
          if (seg.dead()) {
            acc.add(cells - 1, 1.0);
            return;
          }
          const auto t = std::find(targets.begin(), targets.end(), seg.j0);
          if (t == targets.end() || !(seg.x0 > 0.0)) return;
          acc.add(static_cast<std::size_t>(t - targets.begin()) * nb + bin_of(up_edges, seg.x0), 1.0);
        });
    detail::require_count(obs, 0, "post-infimum initial law" + tag);
    const double n_cond = static_cast<double>(obs.count[0]);

    // expected: g_b = mean over M = -inf X (from the target phase) of U_ij(bin and (M, inf)).
    // Means and their covariance feed a delta-method covariance of the cell probabilities.
    const std::size_t k = targets.size() * nb;
    Eigen::VectorXd gbar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    RMatrix gcov = RMatrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const int j = targets[t];
      const Simulator sim(m);
      const McAccumulator g = run_paths(
          opt.n, nb + nb * nb, 1, {opt.seed, opt.threads, 4096}, [&] {
            return [&, path = Path{}, s = PathSummary{}, v = std::vector<double>(nb)](std::uint64_t idx,
                                                                                      McAccumulator& acc) mutable {
              PhiloxStream rng(opt.seed, stream_id(600 + static_cast<std::uint64_t>(i), idx * un + static_cast<std::size_t>(j)));
              sim.run(rng, 0.0, j, path);
              path_summary(path, n, 0.0, 1.0, s);
              const double depth = -s.x_inf;
              acc.count[0] += 1;
              for (std::size_t b = 0; b < nb; ++b) {
                const double lo = std::max(up_edges[b], depth);
                v[b] = lo < up_edges[b + 1] ? detail::jump_measure_up(m, i, j, lo, up_edges[b + 1]) : 0.0;
                acc.sum_re[b] += v[b];
              }
              for (std::size_t b = 0; b < nb; ++b)
                for (std::size_t c = 0; c < nb; ++c) acc.sum_re[nb + b * nb + c] += v[b] * v[c];
            };
          });
      const double cnt = static_cast<double>(g.count[0]);
      for (std::size_t b = 0; b < nb; ++b) gbar(static_cast<Eigen::Index>(t * nb + b)) = g.sum_re[b] / cnt;
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t c = 0; c < nb; ++c) {
          const double mb = g.sum_re[b] / cnt, mc = g.sum_re[c] / cnt;
          gcov(static_cast<Eigen::Index>(t * nb + b), static_cast<Eigen::Index>(t * nb + c)) =
              (g.sum_re[nb + b * nb + c] / cnt - mb * mc) / cnt;
        }
    }
    const double q = m.kill(i);
    const double c_i = gbar.sum();
    const double z = c_i + q;
    // cell probabilities p_b = g_b / z and atom q / z, with Jacobian J
    Eigen::VectorXd p(static_cast<Eigen::Index>(cells));
    p.head(static_cast<Eigen::Index>(k)) = gbar / z;
    p(static_cast<Eigen::Index>(k)) = q / z;
    RMatrix jac(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(k));
    for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(k); ++a)
      for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(k); ++b) jac(a, b) = (a == b ? 1.0 / z : 0.0) - gbar(a) / (z * z);
    jac.row(static_cast<Eigen::Index>(k)).setConstant(-q / (z * z));
    const RMatrix pcov = jac * gcov * jac.transpose();

    Eigen::VectorXd o(static_cast<Eigen::Index>(cells));
    for (std::size_t c = 0; c < cells; ++c) o(static_cast<Eigen::Index>(c)) = obs.sum_re[c];
    const Eigen::VectorXd d = o - n_cond * p;
    RMatrix cov = n_cond * (RMatrix(p.asDiagonal()) - p * p.transpose()) + n_cond * n_cond * pcov;
    // drop the atom cell: the counts sum to n_cond
    const Eigen::Index kk = static_cast<Eigen::Index>(k);
    const double stat = d.head(kk).dot(cov.topLeftCorner(kk, kk).ldlt().solve(d.head(kk)));
    const double pval = detail::chi2_pvalue(stat, static_cast<double>(k));
    Check chi;
    chi.name = "chi-squared goodness of fit, post-infimum start" + tag;
    chi.statistical = false;
    chi.observed = pval;
    chi.score = stat;
    chi.tol = 1e-3;
    chi.pass = pval > 1e-3;
    r.add(chi);
    const double atom_hat = o(kk) / n_cond;
    detail::add_z(r, "killing atom q/(c+q)" + tag, p(kk), atom_hat,
                  std::sqrt(p(kk) * (1.0 - p(kk)) / n_cond + pcov(kk, kk)), opt.z_max);
    r.notes.push_back("phase " + std::to_string(i) + ": c = " + detail::fmt(c_i) + " (simulated), chi2 = " +
                      detail::fmt(stat) + " on " + std::to_string(k) + " dof");
  }

  const bool has_down = std::find(part.begin(), part.end(), PhaseClass::down) != part.end();
  if (is_spectrally_negative(m) && has_down)
    r.notes.push_back("spectrally negative with a non-increasing phase: post-supremum law not checked");
  if (is_spectrally_negative(m) && !has_down) {
    const FundamentalSet base = fundamental(m);
    const std::vector<double> down_edges = {-std::numeric_limits<double>::infinity(), -3.0, -2.0, -1.5, -1.0, -0.75,
                                            -0.5, -0.25, 0.0};
    const std::size_t nd = down_edges.size() - 1;
    const std::size_t cells = un * nd + 1;
    const McAccumulator obs = detail::sample_paths(
        m, opt.n, 520, un * cells, un, opt, 0.0, 1.0,
        [&, seg = Path{}](const Path& p, const PathSummary& s, int, std::uint64_t, McAccumulator& acc) mutable {
          const int i = s.j_sup;
          if (part[static_cast<std::size_t>(i)] != PhaseClass::up) return;
          acc.count[static_cast<std::size_t>(i)] += 1;
          seg = extract_segment(p, s, Segment::post_supremum);
          const std::size_t base_slot = static_cast<std::size_t>(i) * cells;
          if (seg.dead()) {
            acc.add(base_slot + cells - 1, 1.0);
            return;
          }
          if (!(seg.x0 < 0.0)) return;
          const auto it = std::lower_bound(down_edges.begin(), down_edges.end(), seg.x0);
          const auto b = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - down_edges.begin() - 1));
          acc.add(base_slot + static_cast<std::size_t>(seg.j0) * nd + b, 1.0);
        });
    for (int i = 0; i < n; ++i) {
      if (part[static_cast<std::size_t>(i)] != PhaseClass::up) continue;
      any = true;
      const auto ui = static_cast<std::size_t>(i);
      detail::require_count(obs, ui, "post-supremum initial law, phase " + std::to_string(i));
      const double cnt = static_cast<double>(obs.count[ui]);
      const std::string tag = " | J_sup=" + std::to_string(i);
      double stat = 0.0;
      int dof = 0;
      for (int j = 0; j < n; ++j)
        for (std::size_t b = 0; b < nd; ++b) {
          const double lo = std::max(down_edges[b], -60.0), hi = down_edges[b + 1];
          const double pr = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
              [&](double x) { return x < 0.0 ? cond_down_initial_law(base, i, x).density(j) : 0.0; }, lo, hi, 10, 1e-12);
          const double o = obs.sum_re[ui * cells + static_cast<std::size_t>(j) * nd + b];
          if (pr <= 0.0 && o == 0.0) continue;
          detail::add_z(r, "start bin (" + detail::fmt(down_edges[b]) + "," + detail::fmt(hi) + "] phase " + std::to_string(j) + tag,
                        pr, o / cnt, std::sqrt(std::max(pr * (1.0 - pr), 0.0) / cnt), opt.z_max);
          if (pr > 0.0) {
            stat += (o - cnt * pr) * (o - cnt * pr) / (cnt * pr);
            ++dof;
          }
        }
      const double atom = cond_down_initial_law(base, i, -1.0).atom;
      const double o = obs.sum_re[ui * cells + cells - 1];
      detail::add_z(r, "killing atom" + tag, atom, o / cnt, std::sqrt(atom * (1.0 - atom) / cnt), opt.z_max);
      stat += (o - cnt * atom) * (o - cnt * atom) / (cnt * atom);
      Check chi;
      chi.name = "chi-squared goodness of fit, post-supremum start" + tag;
      chi.observed = detail::chi2_pvalue(stat, dof);
      chi.score = stat;
      chi.tol = 1e-3;
      chi.pass = chi.observed > 1e-3;
      r.add(chi);
    }
  }
  if (!any) detail::add_flag(r, "no phase with a nontrivial initial law", true);
  detail::finish(r, opt, t0);
  return r;
}

/// JSON form of a report; runtime appears only when it was measured.
inline nlohmann::json to_json(const CheckReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    nlohmann::json j = {{"name", c.name},       {"kind", c.statistical ? "z" : "residual"},
                        {"expected", c.expected}, {"observed", c.observed},
                        {"score", c.score},     {"tol", c.tol},
                        {"gating", c.gating},   {"pass", c.pass}};
    if (c.statistical) j["se"] = c.se;
    checks.push_back(std::move(j));
  }
  nlohmann::json out = {{"suite", r.suite}, {"seed", r.seed}, {"n", r.n}, {"checks", checks}, {"notes", r.notes},
                        {"pass", r.pass}};
  if (r.runtime_s >= 0.0) out["runtime_s"] = r.runtime_s;
  return out;
}

/// Human-readable table of a report.
inline std::string to_table(const CheckReport& r) {
  std::ostringstream os;
  os << "suite " << r.suite << "  seed " << r.seed << "  n " << r.n << "\n";
  for (const auto& c : r.checks) {
    os << (c.pass ? "  ok   " : (c.gating ? "  FAIL " : "  info ")) << std::left << std::setw(72) << c.name << std::right;
    if (c.statistical)
      os << " z=" << std::setprecision(3) << std::fixed << c.score << std::defaultfloat << "  (" << std::setprecision(6)
         << c.expected << " vs " << c.observed << ")";
    else
      os << " " << std::setprecision(3) << std::scientific << c.score << std::defaultfloat;
    os << "\n";
  }
  for (const auto& note : r.notes) os << "  note: " << note << "\n";
  os << (r.pass ? "PASS" : "FAIL") << "\n";
  return os.str();
}

}  // namespace mapfluct
