#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's numerics; models are only read for their raw parameters.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mapfluct/model.hpp"

namespace oracle {

using cplx = std::complex<double>;
using mapfluct::CMatrix;
using mapfluct::MapModel;
using mapfluct::RMatrix;
using mapfluct::RVector;

/// Larger root of a x^2 + b x + c with a > 0 and real roots.
inline double quadratic_root(double a, double b, double c) {
  const double disc = b * b - 4.0 * a * c;
  return (-b + std::sqrt(disc)) / (2.0 * a);
}

/// Phi(s) for drift d > 0 and Exp(mu) downward jumps at rate lam:
/// d t - lam t / (mu + t) = s.
inline double phi_exp(double d, double lam, double mu, double s) {
  return quadratic_root(d, d * mu - lam - s, -s * mu);
}

inline double newton(const std::function<double(double)>& f, double x, double h = 1e-6) {
  for (int it = 0; it < 200; ++it) {
    const double fx = f(x);
    const double dfx = (f(x + h) - f(x - h)) / (2.0 * h);
    const double step = fx / dfx;
    x -= step;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

inline cplx central_difference(const std::function<cplx(cplx)>& f, cplx z, double h = 1e-5) {
  return (f(z + h) - f(z - h)) / (2.0 * h);
}

/// E[e^{z U}] for the law types used in test models.
inline cplx law_mgf(const mapfluct::JumpLaw& law, cplx z) {
  const auto& v = law.get();
  if (const auto* p = std::get_if<mapfluct::PointMass>(&v)) return std::exp(z * p->value);
  if (const auto* e = std::get_if<mapfluct::ExpNeg>(&v)) return e->rate / (e->rate + z);
  if (const auto* e = std::get_if<mapfluct::ExpPos>(&v)) return e->rate / (e->rate - z);
  throw std::logic_error("oracle: unsupported law");
}

/// Matrix exponent written out entry by entry.
inline CMatrix psi_matrix(const MapModel& m, cplx z, const RVector& beta) {
  const int n = m.size();
  CMatrix a = CMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& c = m.levy[static_cast<std::size_t>(i)];
    cplx d = c.drift * z + 0.5 * c.sigma2 * z * z - m.kill(i) - beta(i);
    if (c.jump_rate > 0.0) d += c.jump_rate * (law_mgf(*c.jump_law, z) - 1.0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double rate = m.switch_rate(i, j);
      d -= rate;
      if (rate > 0.0) a(i, j) = rate * law_mgf(m.switch_law(i, j), z);
    }
    a(i, i) = d;
  }
  return a;
}

inline cplx det_psi(const MapModel& m, cplx z, const RVector& beta) { return psi_matrix(m, z, beta).determinant(); }

/// Zeros of det psi in Re z > 0, found by damped complex Newton from a grid
/// of starting points and deduplicated.
inline std::vector<cplx> right_roots(const MapModel& m, const RVector& beta, double radius = 12.0) {
  auto f = [&](cplx z) { return det_psi(m, z, beta); };
  std::vector<cplx> found;
  for (double re = 0.05; re < radius; re += radius / 24.0)
    for (double im = -radius / 2; im <= radius / 2; im += radius / 12.0) {
      cplx z(re, im);
      bool ok = false;
      for (int it = 0; it < 200; ++it) {
        const cplx fz = f(z);
        const cplx step = fz / central_difference(f, z, 1e-6);
        z -= step;
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) break;
        if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(z))) {
          ok = true;
          break;
        }
      }
      if (!ok || z.real() <= 1e-8) continue;
      if (std::abs(z.imag()) < 1e-9) z = z.real();
      bool dup = false;
      for (cplx w : found) dup = dup || std::abs(w - z) < 1e-7;
      if (!dup) found.push_back(z);
    }
  std::sort(found.begin(), found.end(), [](cplx a, cplx b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  return found;
}

/// Unit null vector of a singular complex matrix (smallest singular value).
inline Eigen::VectorXcd right_null(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullV);
  return svd.matrixV().col(a.cols() - 1);
}

inline Eigen::RowVectorXcd left_null(const CMatrix& a) { return right_null(a.transpose()).transpose(); }

struct Fundamental {
  RMatrix G, R, H;
  std::vector<cplx> roots;
};

/// G = -U L U^{-1}, R = -W^{-1} L W and H = sum u w / (w psi' u) from the
/// Newton roots; psi' by central differences.
inline Fundamental fundamental(const MapModel& m, const RVector& beta) {
  const int n = m.size();
  Fundamental out;
  out.roots = right_roots(m, beta);
  if (static_cast<int>(out.roots.size()) != n) throw std::runtime_error("oracle: wrong root count");
  CMatrix u(n, n), w(n, n), lam = CMatrix::Zero(n, n), h = CMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const cplx z = out.roots[static_cast<std::size_t>(k)];
    const CMatrix a = psi_matrix(m, z, beta);
    u.col(k) = right_null(a);
    w.row(k) = left_null(a);
    lam(k, k) = z;
    const CMatrix da = (psi_matrix(m, z + 1e-5, beta) - psi_matrix(m, z - 1e-5, beta)) / 2e-5;
    h += u.col(k) * w.row(k) / (w.row(k) * da * u.col(k))(0);
  }
  out.G = (-u * lam * u.inverse()).real();
  out.R = (-w.inverse() * lam * w).real();
  out.H = h.real();
  return out;
}

/// Stationary law of the switching chain by solving pi Q = 0, pi 1 = 1.
inline RVector stationary(const MapModel& m) {
  const int n = m.size();
  RMatrix a = m.switch_rate.transpose();
  for (int i = 0; i < n; ++i) a(i, i) = -m.switch_rate.row(i).sum();
  a.row(n - 1).setOnes();
  RVector b = RVector::Zero(n);
  b(n - 1) = 1.0;
  return a.fullPivLu().solve(b);
}

/// E_i[zeta] for the killed chain: phase-type mean (-(Q - diag q))^{-1} 1.
inline RVector phase_type_mean(const MapModel& m) {
  const int n = m.size();
  RMatrix t = m.switch_rate;
  for (int i = 0; i < n; ++i) t(i, i) = -m.switch_rate.row(i).sum() - m.kill(i);
  return (-t).fullPivLu().solve(RVector::Ones(n));
}

/// Two-sided Kolmogorov-Smirnov p-value of a sample against a continuous cdf
/// (asymptotic series with the small-sample correction of Stephens).
inline double ks_pvalue(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double f = cdf(x[k]);
    d = std::max({d, (static_cast<double>(k) + 1.0) / n - f, f - static_cast<double>(k) / n});
  }
  const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  if (lam < 0.2) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(p, 0.0, 1.0);
}

/// Random spectrally negative model: positive drifts, exp-neg or point(0)
/// jumps, full switching and positive killing. Phase 0 always jumps down.
inline MapModel random_sn_model(std::mt19937_64& gen, int n, bool brownian = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MapModel m = mapfluct::make_model(n);
  for (int i = 0; i < n; ++i) {
    auto& c = m.levy[static_cast<std::size_t>(i)];
    c.name = "p" + std::to_string(i);
    c.drift = 0.5 + 2.0 * u(gen);
    if (brownian && u(gen) < 0.5) c.sigma2 = 0.2 + u(gen);
    if (u(gen) < 0.7 || i == 0) {
      c.jump_rate = 0.3 + 1.5 * u(gen);
      c.jump_law = mapfluct::JumpLaw::exp_neg(0.5 + 2.5 * u(gen));
    }
    m.kill(i) = 0.1 + 0.6 * u(gen);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      m.switch_rate(i, j) = 0.2 + 1.5 * u(gen);
      if (u(gen) < 0.5) m.switch_jump[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = mapfluct::JumpLaw::exp_neg(0.5 + 3.0 * u(gen));
    }
  }
  return m;
}

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& a) {
  return a.cwiseAbs().maxCoeff();
}

}  // namespace oracle
