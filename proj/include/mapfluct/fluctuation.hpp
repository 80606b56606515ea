#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "mapfluct/errors.hpp"
#include "mapfluct/model.hpp"
#include "mapfluct/spectral.hpp"

namespace mapfluct {

enum class WhKind { killing, sup, inf, cond_up, cond_down };

inline const char* to_string(WhKind k) {
  switch (k) {
    case WhKind::killing: return "killing";
    case WhKind::sup: return "sup";
    case WhKind::inf: return "inf";
    case WhKind::cond_up: return "cond_up";
    case WhKind::cond_down: return "cond_down";
  }
  return "?";
}

/// Joint transform of (X, occupation, phase) at the random time of `kind`.
/// `left_half` marks factors defined for Re(alpha) <= 0.
struct WhFactor {
  WhKind kind = WhKind::killing;
  CMatrix value;
  cplx alpha;
  RVector beta;
  bool left_half = false;
};

struct ReversalConstants {
  RVector c;
  RVector c_bar;
  RVector c_under;
  RVector u;
  RVector u_hat;
};

namespace detail {

inline constexpr double kRootExclusion = 1e-6;

inline CMatrix cdiag(const RVector& v) { return v.cast<cplx>().asDiagonal(); }

inline void require_base(const FundamentalSet& base) {
  if ((base.beta.array() != 0.0).any()) throw DomainError("expected a fundamental set computed at beta = 0");
}

inline void require_positive_kill(const MapModel& m, const char* what) {
  if ((m.kill.array() <= 0.0).any()) throw DomainError(std::string(what) + ": needs q > 0 in every phase");
}

inline void reject_near_roots(const FundamentalSet& f, cplx alpha) {
  for (Eigen::Index k = 0; k < f.root_data.roots.size(); ++k)
    if (std::abs(alpha - f.root_data.roots(k)) < kRootExclusion)
      throw NearSingularError("alpha lies within 1e-6 of a determinant root");
}

}  // namespace detail

/// Wiener-Hopf factor. `base` is the fundamental set at beta = 0 (it fixes
/// G1 and R^{-1}q); `at_beta` the one at the requested beta.
inline WhFactor wh_factor(const FundamentalSet& base, const FundamentalSet& at_beta, WhKind kind, cplx alpha) {
  detail::require_base(base);
  const MapModel& m = base.model;
  const int n = m.size();
  const RVector& beta = at_beta.beta;
  const CMatrix eye = CMatrix::Identity(n, n);
  const CMatrix dq = detail::cdiag(m.kill);
  WhFactor out;
  out.kind = kind;
  out.alpha = alpha;
  out.beta = beta;
  out.left_half = kind == WhKind::sup || kind == WhKind::cond_up;
  if (out.left_half && alpha.real() > 0.0) throw DomainError(std::string(to_string(kind)) + ": needs Re(alpha) <= 0");
  if (!out.left_half && alpha.real() < 0.0) throw DomainError(std::string(to_string(kind)) + ": needs Re(alpha) >= 0");
  detail::reject_near_roots(at_beta, alpha);

  const CMatrix gb = at_beta.G.cast<cplx>();
  const CMatrix rb = at_beta.R.cast<cplx>();
  switch (kind) {
    case WhKind::killing:
      out.value = -psi(m, alpha, beta).partialPivLu().solve(dq);
      break;
    case WhKind::sup: {
      // proof form -(aI + G^b)^{-1} diag(g), g = -G1
      const RVector g = -base.G.rowwise().sum();
      out.value = -(alpha * eye + gb).partialPivLu().solve(detail::cdiag(g));
      break;
    }
    case WhKind::cond_down: {
      const RVector g1 = base.G.rowwise().sum();
      const CMatrix inner = (alpha * eye + gb) * psi(m, alpha, beta).partialPivLu().solve(dq);
      out.value = -detail::cdiag(g1.cwiseInverse()) * inner;
      break;
    }
    case WhKind::inf: {
      if (killing_is_zero(m)) {
        const double mu = stationary_drift(m);
        if (mu <= 0.0) throw DriftError("inf factor without killing needs positive drift");
        const RVector r = r_vector(m);
        out.value = psi(m, alpha, beta).partialPivLu().solve((alpha * eye + rb) * (mu * detail::cdiag(r)));
        break;
      }
      detail::require_positive_kill(m, "inf factor");
      const RVector rq = base.R.partialPivLu().solve(m.kill);
      out.value = -psi(m, alpha, beta).partialPivLu().solve((alpha * eye + rb) * detail::cdiag(rq));
      break;
    }
    case WhKind::cond_up: {
      detail::require_positive_kill(m, "cond_up factor");
      const RVector rq = base.R.partialPivLu().solve(m.kill);
      out.value = detail::cdiag(rq.cwiseInverse()) * (alpha * eye + rb).partialPivLu().solve(dq);
      break;
    }
  }
  return out;
}

inline WhFactor wh_factor(const FundamentalSet& base, WhKind kind, cplx alpha, const RVector& beta) {
  if ((beta.array() == base.beta.array()).all()) return wh_factor(base, base, kind, alpha);
  return wh_factor(base, fundamental(base.model, beta), kind, alpha);
}

/// P[J_bar] = -G^{-1} diag(g) of a fundamental set at beta = 0.
inline RMatrix sup_phase_law(const FundamentalSet& base) {
  const RVector g = -base.G.rowwise().sum();
  return -base.G.partialPivLu().solve(RMatrix(g.asDiagonal()));
}

/// Reversal constants from the model and dual fundamental sets at beta = 0.
inline ReversalConstants reversal_constants(const FundamentalPair& p) {
  const FundamentalSet& f = p.primal;
  const FundamentalSet& fd = p.dual;
  detail::require_base(f);
  detail::require_positive_kill(f.model, "reversal_constants");
  const RVector piq = f.pi.cwiseProduct(f.model.kill);
  ReversalConstants out;
  const RMatrix inf0 = wh_factor(f, f, WhKind::inf, 0.0).value.real();
  out.c = inf0.transpose() * piq;
  out.c_bar = sup_phase_law(fd).transpose() * piq;
  const RMatrix dual_inf0 = wh_factor(fd, fd, WhKind::inf, 0.0).value.real();
  out.c_under = dual_inf0.transpose() * piq;
  out.u = -f.G.transpose().partialPivLu().solve(piq);
  out.u_hat = -f.pi.cwiseProduct(f.R.partialPivLu().solve(f.model.kill));
  return out;
}

/// Relative residuals of the factorization identities over an (alpha, beta)
/// grid; alpha must lie on the imaginary axis.
struct WhResiduals {
  double inf_cond_up = 0.0;    // killing = inf * cond_up
  double sup_cond_down = 0.0;  // killing = sup * cond_down
  double full = 0.0;           // killing = inf * diag(c_bar)^{-1} * dual_sup^T pi q
  double naive = 0.0;          // same with (pi q)^{-1} in place of diag(c_bar)^{-1}
  double wh_up = 0.0;          // diag(c_bar) cond_up = dual_sup^T pi q
  double wh_down = 0.0;        // diag(c_under) cond_down = dual_inf^T pi q
  double c_sums = 0.0;         // |sum c - pi.q| over c, c_bar, c_under
  double max() const { return std::max({inf_cond_up, sup_cond_down, full, wh_up, wh_down, c_sums}); }
};

inline WhResiduals wh_residuals(const FundamentalPair& base, const std::vector<cplx>& alphas,
                                const std::vector<RVector>& betas) {
  using detail::max_abs;
  const MapModel& m = base.primal.model;
  const ReversalConstants rc = reversal_constants(base);
  const RVector piq = base.primal.pi.cwiseProduct(m.kill);
  const CMatrix dpq = detail::cdiag(piq);
  const CMatrix cbar_inv = detail::cdiag(rc.c_bar.cwiseInverse());
  const CMatrix naive_inv = detail::cdiag(piq.cwiseInverse());
  WhResiduals out;
  const double total = piq.sum();
  out.c_sums = std::max({std::abs(rc.c.sum() - total), std::abs(rc.c_bar.sum() - total), std::abs(rc.c_under.sum() - total)});
  auto rel = [](const CMatrix& a, const CMatrix& b) { return max_abs(a - b) / std::max(max_abs(b), 1e-300); };
  for (const RVector& beta : betas) {
    const FundamentalPair at = fundamental_pair(m, beta);
    for (cplx a : alphas) {
      const CMatrix kill = wh_factor(base.primal, at.primal, WhKind::killing, a).value;
      const CMatrix inf = wh_factor(base.primal, at.primal, WhKind::inf, a).value;
      const CMatrix up = wh_factor(base.primal, at.primal, WhKind::cond_up, a).value;
      const CMatrix sup = wh_factor(base.primal, at.primal, WhKind::sup, a).value;
      const CMatrix down = wh_factor(base.primal, at.primal, WhKind::cond_down, a).value;
      const CMatrix dsup = wh_factor(base.dual, at.dual, WhKind::sup, a).value;
      const CMatrix dinf = wh_factor(base.dual, at.dual, WhKind::inf, a).value;
      out.inf_cond_up = std::max(out.inf_cond_up, rel(inf * up, kill));
      out.sup_cond_down = std::max(out.sup_cond_down, rel(sup * down, kill));
      out.full = std::max(out.full, rel(inf * cbar_inv * dsup.transpose() * dpq, kill));
      out.naive = std::max(out.naive, rel(inf * naive_inv * dsup.transpose() * dpq, kill));
      out.wh_up = std::max(out.wh_up, rel(detail::cdiag(rc.c_bar) * up, dsup.transpose() * dpq));
      out.wh_down = std::max(out.wh_down, rel(detail::cdiag(rc.c_under) * down, dinf.transpose() * dpq));
    }
  }
  return out;
}

/// E[exp(-<beta, occupation at sigma_0>); J_sigma]: H^beta diag(-R^{-1}q), or
/// mu H^beta diag(r) without killing.
inline RMatrix last_exit_transform(const FundamentalSet& base, const FundamentalSet& at_beta) {
  detail::require_base(base);
  const MapModel& m = base.model;
  if (killing_is_zero(m)) {
    const double mu = stationary_drift(m);
    if (mu <= 0.0) throw DriftError("last_exit_transform: needs positive drift when q = 0");
    return mu * at_beta.H * r_vector(m).asDiagonal();
  }
  detail::require_positive_kill(m, "last_exit_transform");
  const RVector rq = base.R.partialPivLu().solve(m.kill);
  return at_beta.H * RMatrix((-rq).asDiagonal());
}

inline RMatrix last_exit_transform(const MapModel& m, const RVector& beta) {
  const FundamentalSet base = fundamental(m);
  if ((beta.array() == 0.0).all()) return last_exit_transform(base, base);
  return last_exit_transform(base, fundamental(m, beta));
}

/// The last-exit transform by the three independent routes.
struct LastExitRoutes {
  RMatrix splitting;
  RMatrix reversal;
  RMatrix infimum;
};

inline LastExitRoutes last_exit_routes(const MapModel& m, const RVector& beta) {
  detail::require_positive_kill(m, "last_exit_routes");
  const int n = m.size();
  const FundamentalPair base = fundamental_pair(m, RVector::Zero(n));
  const FundamentalPair at = fundamental_pair(m, beta);
  const RMatrix dq = m.kill.asDiagonal();
  const RVector rq = base.primal.R.partialPivLu().solve(m.kill);
  LastExitRoutes out;

  // splitting at sigma: E[...; X_zeta- > 0] = E[...; J_sigma] * E^up[...]
  const RMatrix positive_part = -at.primal.H * at.primal.R.partialPivLu().solve(dq);
  const RMatrix up = rq.cwiseInverse().asDiagonal() * at.primal.R.partialPivLu().solve(dq);
  out.splitting = up.transpose().partialPivLu().solve(positive_part.transpose()).transpose();

  // reversal at sigma: pi_i E_ij = u_hat_j H_hat_ji
  const RVector u_hat = -base.primal.pi.cwiseProduct(rq);
  out.reversal.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.reversal(i, j) = u_hat(j) * at.dual.H(j, i) / base.primal.pi(i);

  // splitting at the infimum: H^beta v = residue of Psi^beta(z)^{-1} v at the
  // root lambda with R^beta v = -lambda v
  Eigen::ComplexEigenSolver<CMatrix> es(at.primal.R.cast<cplx>());
  const CVector lam = -es.eigenvalues();
  const CMatrix v = es.eigenvectors();
  std::vector<cplx> singular = poly::roots(det_polynomial(m, beta));
  CMatrix y(n, n);
  for (int k = 0; k < n; ++k) {
    double gap = std::numeric_limits<double>::infinity();
    for (cplx s : singular)
      if (std::abs(s - lam(k)) > 1e-6) gap = std::min(gap, std::abs(s - lam(k)));
    for (int l = 0; l < n; ++l)
      if (l != k) gap = std::min(gap, std::abs(lam(l) - lam(k)));
    const double radius = 0.25 * std::min(gap, 1.0);
    constexpr int kNodes = 64;
    CVector acc = CVector::Zero(n);
    for (int s = 0; s < kNodes; ++s) {
      const cplx offset = std::polar(radius, 2.0 * std::numbers::pi * s / kNodes);
      acc += offset * psi(m, lam(k) + offset, beta).partialPivLu().solve(v.col(k));
    }
    y.col(k) = acc / static_cast<double>(kNodes);
  }
  const RMatrix h = (y * v.inverse()).real();
  out.infimum = h * RMatrix((-rq).asDiagonal());
  return out;
}

/// Law of (X_0, J_0) under the process conditioned to stay non-positive,
/// started from an UP phase i, evaluated at a level x < 0.
struct InitialLaw {
  RVector factor;   // (1 - e_j^T e^{-Gx} 1) / (-d_i e_i^T G 1), against U_ij(dx)
  RVector density;  // factor times the Lebesgue density of U_ij at x
  double c = 0.0;   // -d_i e_i^T G 1 - q_i
  double atom = 0.0;  // q_i / (c_i + q_i), mass of immediate killing
};

namespace detail {

/// Lebesgue density of the jump measure U_ij at x.
inline double jump_measure_density(const MapModel& m, int i, int j, double x) {
  double mass = 0.0;
  const JumpLaw* law = nullptr;
  if (i == j) {
    const auto& c = m.levy[static_cast<std::size_t>(i)];
    if (c.jump_rate <= 0.0) return 0.0;
    mass = c.jump_rate;
    law = &*c.jump_law;
  } else {
    mass = m.switch_rate(i, j);
    if (mass <= 0.0) return 0.0;
    law = &m.switch_law(i, j);
  }
  double d = 0.0;
  law->for_each_atom([&](double w, const JumpAtom& a) {
    if (const auto* e = std::get_if<ExpNeg>(&a); e && x < 0.0) d += w * e->rate * std::exp(e->rate * x);
    if (const auto* e = std::get_if<ExpPos>(&a); e && x > 0.0) d += w * e->rate * std::exp(-e->rate * x);
  });
  return mass * d;
}

}  // namespace detail

inline InitialLaw cond_down_initial_law(const FundamentalSet& base, int i, double x) {
  detail::require_base(base);
  const MapModel& m = base.model;
  const int n = m.size();
  if (i < 0 || i >= n) throw DomainError("cond_down_initial_law: phase out of range");
  if (classify(m.levy[static_cast<std::size_t>(i)]) != PhaseClass::up)
    throw ClassError("cond_down_initial_law: phase must be UP");
  if (!(x < 0.0)) throw DomainError("cond_down_initial_law: level must be negative");
  const double d = m.levy[static_cast<std::size_t>(i)].drift;
  const double norm = -d * base.G.row(i).sum();
  const RMatrix e = (-base.G * x).exp();
  InitialLaw out;
  out.factor = (RVector::Ones(n) - e.rowwise().sum()) / norm;
  out.density.resize(n);
  for (int j = 0; j < n; ++j) out.density(j) = out.factor(j) * detail::jump_measure_density(m, i, j, x);
  out.c = norm - m.kill(i);
  out.atom = m.kill(i) / norm;
  return out;
}

/// Max-entry residual of the matrix integral equation for G, row i:
/// int U_i.(dx)(e^{-Gx} - I) + Psi^beta_i.(0) - d_i e_i^T G^beta.
inline double fg_residual(const FundamentalSet& f, int i) {
  const MapModel& m = f.model;
  const int n = m.size();
  const RMatrix eye = RMatrix::Identity(n, n);
  Eigen::RowVectorXd row = psi(m, 0.0, f.beta).real().row(i) - m.levy[static_cast<std::size_t>(i)].drift * f.G.row(i);
  auto add_law = [&](int j, double mass, const JumpLaw& law) {
    law.for_each_atom([&](double w, const JumpAtom& a) {
      RMatrix t;
      if (const auto* p = std::get_if<PointMass>(&a)) t = (-f.G * p->value).exp() - eye;
      else if (const auto* e = std::get_if<ExpNeg>(&a)) t = e->rate * (e->rate * eye - f.G).inverse() - eye;
      else throw UnsupportedError("fg_residual: upward jumps");
      row += mass * w * t.row(j);
    });
  };
  const auto& c = m.levy[static_cast<std::size_t>(i)];
  if (c.jump_rate > 0.0) add_law(i, c.jump_rate, *c.jump_law);
  for (int j = 0; j < n; ++j)
    if (j != i && m.switch_rate(i, j) > 0.0) add_law(j, m.switch_rate(i, j), m.switch_law(i, j));
  return row.cwiseAbs().maxCoeff();
}

}  // namespace mapfluct
