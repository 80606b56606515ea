#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <set>
#include <vector>

#include "mapfluct/errors.hpp"
#include "mapfluct/model.hpp"
#include "mapfluct/polynomial.hpp"

namespace mapfluct {

/// Roots of det Psi^beta in the closed right half-plane with their null vectors.
struct RootData {
  CVector roots;
  CMatrix right;  // column k: u_k with Psi(lambda_k) u_k = 0
  CMatrix left;   // row k: w_k^T with w_k^T Psi(lambda_k) = 0
  bool semi_simple = true;
  bool zero_pinned = false;
};

/// G, R, H and their ingredients for one (model, beta).
struct FundamentalSet {
  MapModel model;
  RVector beta;
  RVector pi;
  RootData root_data;
  RMatrix G;
  RMatrix R;
  RMatrix H;
  double imag_residual = 0.0;
};

struct PhiResult {
  double phi = 0.0;
  double dphi = 0.0;  // Phi'(q + beta) = 1 / psi'(Phi)
};

namespace detail {

inline constexpr double kRootCollision = 1e-6;
inline constexpr double kMaxCondition = 1e10;

inline bool has_extra_killing(const MapModel& m, const RVector& beta) {
  return ((m.kill + beta).array() > 0.0).any();
}

/// Analytic operations need every jump law rational and downward, and no
/// non-increasing component.
inline void require_analytic(const MapModel& m) {
  if (!is_spectrally_negative(m)) throw UnsupportedError("model is not spectrally negative");
  for (int i = 0; i < m.size(); ++i) {
    const auto& c = m.levy[static_cast<std::size_t>(i)];
    if (c.non_increasing()) throw UnsupportedError("phase " + c.name + " is non-increasing");
    if (c.jump_rate > 0.0 && !is_rational(*c.jump_law))
      throw UnsupportedError("phase " + c.name + ": point masses away from 0 make the exponent non-rational");
    for (int j = 0; j < m.size(); ++j)
      if (i != j && m.switch_rate(i, j) > 0.0 && !is_rational(m.switch_law(i, j)))
        throw UnsupportedError("switch jumps: point masses away from 0 make the exponent non-rational");
  }
}

inline void collect_poles(const JumpLaw& law, std::set<double>& poles) {
  law.for_each_atom([&](double w, const JumpAtom& a) {
    if (const auto* e = std::get_if<ExpNeg>(&a); e && w > 0.0) poles.insert(e->rate);
  });
}

/// p(x) * E e^{x U} expressed over the common row denominator prod (x + rho).
inline poly::Poly law_numerator(const JumpLaw& law, const std::vector<double>& poles) {
  poly::Poly out{0.0};
  law.for_each_atom([&](double w, const JumpAtom& a) {
    if (w == 0.0) return;
    if (std::holds_alternative<PointMass>(a)) {
      out = poly::add(out, poly::scale(poly::from_shifts(poles), w));
    } else {
      const double rho = std::get<ExpNeg>(a).rate;
      std::vector<double> rest;
      bool skipped = false;
      for (double p : poles) {
        if (!skipped && p == rho) skipped = true;
        else rest.push_back(p);
      }
      out = poly::add(out, poly::scale(poly::from_shifts(rest), w * rho));
    }
  });
  return out;
}

/// Row i of Psi^beta multiplied by its denominator; returns the polynomial
/// entries and the poles of that row.
inline std::vector<poly::Poly> polynomial_row(const MapModel& m, const RVector& beta, int i, std::vector<double>& poles) {
  const int n = m.size();
  const auto& c = m.levy[static_cast<std::size_t>(i)];
  std::set<double> pole_set;
  if (c.jump_rate > 0.0) collect_poles(*c.jump_law, pole_set);
  for (int j = 0; j < n; ++j)
    if (j != i && m.switch_rate(i, j) > 0.0) collect_poles(m.switch_law(i, j), pole_set);
  poles.assign(pole_set.begin(), pole_set.end());
  const poly::Poly denom = poly::from_shifts(poles);
  std::vector<poly::Poly> row(static_cast<std::size_t>(n), poly::Poly{0.0});
  double diag_const = -m.switch_rate.row(i).sum() - m.kill(i) - beta(i) - c.jump_rate;
  poly::Poly diag = poly::mul(poly::Poly{diag_const, c.drift, 0.5 * c.sigma2}, denom);
  if (c.jump_rate > 0.0) diag = poly::add(diag, poly::scale(law_numerator(*c.jump_law, poles), c.jump_rate));
  row[static_cast<std::size_t>(i)] = diag;
  for (int j = 0; j < n; ++j)
    if (j != i && m.switch_rate(i, j) > 0.0)
      row[static_cast<std::size_t>(j)] = poly::scale(law_numerator(m.switch_law(i, j), poles), m.switch_rate(i, j));
  return row;
}

/// Newton iteration on det Psi^beta using d/da log det = tr(Psi^{-1} Psi').
inline cplx polish_root(const MapModel& m, const RVector& beta, cplx z) {
  for (int it = 0; it < 60; ++it) {
    const CMatrix a = psi(m, z, beta);
    Eigen::PartialPivLU<CMatrix> lu(a);
    const cplx det = lu.determinant();
    if (det == 0.0) break;
    const cplx tr = lu.solve(psi(m, z, beta, true)).trace();
    if (tr == 0.0) break;
    const cplx step = 1.0 / tr;
    if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
    z -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
  }
  return z;
}

/// Unit null direction with the first non-negligible entry positive real.
inline CVector normalize_direction(CVector v) {
  v /= v.norm();
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (std::abs(v(k)) > 1e-12) {
      v *= std::conj(v(k)) / std::abs(v(k));
      v(k) = std::abs(v(k));
      break;
    }
  return v;
}

inline double condition_number(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& a) {
  return a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
}

inline double rel_diff(const RMatrix& a, const RMatrix& b) {
  return max_abs(a - b) / std::max(max_abs(b), 1e-300);
}

}  // namespace detail

/// Polynomial whose roots contain those of det Psi^beta (plus spurious roots
/// at the jump-law poles, all in the left half-plane).
inline poly::Poly det_polynomial(const MapModel& m, const RVector& beta) {
  const int n = m.size();
  std::vector<std::vector<poly::Poly>> rows;
  std::vector<double> poles;
  for (int i = 0; i < n; ++i) rows.push_back(detail::polynomial_row(m, beta, i, poles));
  return poly::trim(poly::det(rows));
}

inline RootData det_roots(const MapModel& m, const RVector& beta) {
  detail::require_analytic(m);
  const int n = m.size();
  if (beta.size() != n) throw DomainError("det_roots: beta has wrong length");
  const bool boundary = !detail::has_extra_killing(m, beta);
  double mu = 0.0;
  if (boundary) {
    mu = stationary_drift(m);
    if (std::abs(mu) < 1e-12) throw UnsupportedError("det_roots: zero stationary drift without killing");
  }
  std::set<double> all_poles;
  for (int i = 0; i < n; ++i) {
    std::vector<double> p;
    detail::polynomial_row(m, beta, i, p);
    all_poles.insert(p.begin(), p.end());
  }

  std::vector<cplx> raw = poly::roots(det_polynomial(m, beta));
  // Keep candidates in the open right half-plane; conjugate pairs are
  // polished once through their upper member.
  std::vector<cplx> kept;
  for (cplx z : raw) {
    const double mag = std::max(1.0, std::abs(z));
    if (std::abs(z.imag()) < 1e-7 * mag) z = z.real();
    if (z.imag() < 0.0) continue;
    if (boundary && std::abs(z) < 1e-7) continue;
    bool near_pole = false;
    for (double rho : all_poles) near_pole = near_pole || std::abs(z + rho) < 1e-9 * mag;
    if (near_pole || z.real() < -1e-6 * mag) continue;
    z = detail::polish_root(m, beta, z);
    if (std::abs(z.imag()) < 1e-12 * std::max(1.0, std::abs(z))) z = z.real();
    if (z.real() <= 1e-10) continue;
    if (boundary && std::abs(z) < 1e-7) continue;
    kept.push_back(z);
    if (z.imag() > 0.0) kept.push_back(std::conj(z));
  }
  std::sort(kept.begin(), kept.end(), [](cplx a, cplx b) {
    const bool ra = a.imag() == 0.0, rb = b.imag() == 0.0;
    if (ra != rb) return ra;
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() > b.imag();
  });
  for (std::size_t a = 0; a < kept.size(); ++a)
    for (std::size_t b = a + 1; b < kept.size(); ++b)
      if (std::abs(kept[a] - kept[b]) < detail::kRootCollision)
        throw MultiplicityError("det_roots: roots closer than 1e-6; spectrum is not semi-simple");

  const bool pin_zero = boundary && mu > 0.0;
  const std::size_t want = pin_zero ? static_cast<std::size_t>(n - 1) : static_cast<std::size_t>(n);
  if (kept.size() != want)
    throw CountError("det_roots: found " + std::to_string(kept.size()) + " roots in the right half-plane, expected " +
                     std::to_string(want));

  RootData out;
  out.zero_pinned = pin_zero;
  out.roots.resize(n);
  out.right.resize(n, n);
  out.left.resize(n, n);
  int k = 0;
  if (pin_zero) {
    out.roots(0) = 0.0;
    out.right.col(0) = detail::normalize_direction(CVector::Ones(n));
    out.left.row(0) = detail::normalize_direction(stationary(m).cast<cplx>()).transpose();
    k = 1;
  }
  for (std::size_t r = 0; r < kept.size(); ++r, ++k) {
    const cplx z = kept[r];
    out.roots(k) = z;
    if (z.imag() < 0.0) {
      // lower member of a pair: conjugate the vectors of its partner
      out.right.col(k) = out.right.col(k - 1).conjugate();
      out.left.row(k) = out.left.row(k - 1).conjugate();
      continue;
    }
    Eigen::JacobiSVD<CMatrix> svd(psi(m, z, beta), Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.right.col(k) = detail::normalize_direction(svd.matrixV().col(n - 1));
    out.left.row(k) = detail::normalize_direction(svd.matrixU().col(n - 1).conjugate()).transpose();
  }
  return out;
}

namespace detail {

inline FundamentalSet assemble(const MapModel& m, const RVector& beta, RootData rd) {
  const int n = m.size();
  FundamentalSet f;
  f.model = m;
  f.beta = beta;
  f.pi = stationary(m);
  if (condition_number(rd.right) > kMaxCondition) throw IllConditionedError("fundamental: right null vectors are ill-conditioned");
  if (condition_number(rd.left) > kMaxCondition) throw IllConditionedError("fundamental: left null vectors are ill-conditioned");
  const CMatrix lam = rd.roots.asDiagonal();
  const CMatrix g = -rd.right * lam * rd.right.inverse();
  const CMatrix r = rd.left.inverse() * (-lam) * rd.left;
  CMatrix h = CMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const CVector u = rd.right.col(k);
    const Eigen::RowVectorXcd w = rd.left.row(k);
    const cplx denom = (w * psi(m, rd.roots(k), beta, true) * u)(0);
    h += u * w / denom;
  }
  f.imag_residual = std::max({max_abs(g.imag()), max_abs(r.imag()), max_abs(h.imag())});
  f.G = g.real();
  f.R = r.real();
  f.H = h.real();
  f.root_data = std::move(rd);
  return f;
}

}  // namespace detail

/// Fundamental matrices of a spectrally negative MAP with extra killing beta.
inline FundamentalSet fundamental(const MapModel& m, const RVector& beta) {
  return detail::assemble(m, beta, det_roots(m, beta));
}

inline FundamentalSet fundamental(const MapModel& m) { return fundamental(m, RVector::Zero(m.size())); }

struct RelHatResiduals {
  double G = 0.0;  // G_hat vs pi^-1 R^T pi
  double R = 0.0;
  double H = 0.0;
  double max() const { return std::max({G, R, H}); }
};

/// Residuals of the dual relations between a fundamental set and the one of
/// the dual model at the same beta.
inline RelHatResiduals rel_hat_residuals(const FundamentalSet& f, const FundamentalSet& dual_f) {
  const RMatrix dp = f.pi.asDiagonal();
  const RMatrix dpi = f.pi.cwiseInverse().asDiagonal();
  RelHatResiduals out;
  out.G = detail::rel_diff(dual_f.G, dpi * f.R.transpose() * dp);
  out.R = detail::rel_diff(dual_f.R, dpi * f.G.transpose() * dp);
  out.H = detail::rel_diff(dual_f.H, dpi * f.H.transpose() * dp);
  return out;
}

/// Model and dual fundamental sets at beta, with the dual relations checked.
struct FundamentalPair {
  FundamentalSet primal;
  FundamentalSet dual;
  RelHatResiduals rel_hat;
};

inline FundamentalPair fundamental_pair(const MapModel& m, const RVector& beta) {
  FundamentalPair p{fundamental(m, beta), fundamental(dual(m), beta), {}};
  p.rel_hat = rel_hat_residuals(p.primal, p.dual);
  return p;
}

/// Max over roots of ||Psi(lambda_k) u_k|| / ||u_k|| and the left analogue.
inline double null_residual(const FundamentalSet& f) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < f.root_data.roots.size(); ++k) {
    const CMatrix a = psi(f.model, f.root_data.roots(k), f.beta);
    const CVector u = f.root_data.right.col(k);
    const Eigen::RowVectorXcd w = f.root_data.left.row(k);
    worst = std::max(worst, (a * u).norm() / u.norm());
    worst = std::max(worst, (w * a).norm() / w.norm());
  }
  return worst;
}

/// max |HR - GH| relative to max |GH|.
inline double hr_gh_residual(const FundamentalSet& f) {
  return detail::rel_diff(f.H * f.R, f.G * f.H);
}

/// Laplace exponent of a single Levy component (no killing).
inline cplx levy_exponent(const LevyComponent& c, cplx alpha, bool derivative = false) {
  if (derivative) {
    cplx d = c.drift + c.sigma2 * alpha;
    if (c.jump_rate > 0.0) d += c.jump_rate * jump_mgf_derivative(*c.jump_law, alpha);
    return d;
  }
  cplx v = c.drift * alpha + 0.5 * c.sigma2 * alpha * alpha;
  if (c.jump_rate > 0.0) v += c.jump_rate * (jump_mgf(*c.jump_law, alpha) - 1.0);
  return v;
}

/// Right inverse Phi(q + beta) of a spectrally negative Levy exponent.
inline PhiResult phi_scalar(const LevyComponent& c, double q, double beta) {
  const double s = q + beta;
  if (s < 0.0) throw DomainError("phi_scalar: q + beta must be nonnegative");
  auto f = [&](double x) { return levy_exponent(c, x).real() - s; };
  auto df = [&](double x) { return levy_exponent(c, x, true).real(); };
  const double mean = df(0.0);
  if (s == 0.0) {
    if (mean < 0.0) throw DomainError("phi_scalar: boundary case needs a nonnegative mean");
    return {0.0, mean > 0.0 ? 1.0 / mean : std::numeric_limits<double>::infinity()};
  }
  double hi = 1.0;
  int guard = 0;
  while (f(hi) <= 0.0) {
    hi *= 2.0;
    if (++guard > 200) throw ConvergenceError("phi_scalar: no upper bracket");
  }
  double lo = 0.0;
  double x = hi;
  for (int it = 0; it < 100; ++it) {
    const double fx = f(x);
    if (fx > 0.0) hi = x;
    else lo = x;
    double next = x - fx / df(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, x)) return {next, 1.0 / df(next)};
    x = next;
  }
  throw ConvergenceError("phi_scalar: Newton did not converge in 100 iterations");
}

/// The vector r with R r = 0 and pi r = 1 for a non-defective model with
/// positive drift.
inline RVector r_vector(const MapModel& m) {
  if (!killing_is_zero(m)) throw DomainError("r_vector: needs q = 0");
  const double mu = stationary_drift(m);
  if (mu <= 0.0) throw DriftError("r_vector: needs positive stationary drift");
  const FundamentalSet f = fundamental(m);
  // the pinned zero root sits in slot 0, so the null vector of R is column 0 of W^{-1}
  const CMatrix winv = f.root_data.left.inverse();
  RVector r = winv.col(0).real();
  r /= f.pi.dot(r);
  return r;
}

}  // namespace mapfluct
