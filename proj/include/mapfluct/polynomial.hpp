#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <unsupported/Eigen/Polynomials>

namespace mapfluct::poly {

// Real polynomials stored with ascending coefficients: p[k] multiplies x^k.
using Poly = std::vector<double>;

inline Poly constant(double c) { return Poly{c}; }

inline Poly add(const Poly& a, const Poly& b) {
  Poly out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) out[k] += a[k];
  for (std::size_t k = 0; k < b.size(); ++k) out[k] += b[k];
  return out;
}

inline Poly scale(const Poly& a, double s) {
  Poly out = a;
  for (double& c : out) c *= s;
  return out;
}

inline Poly mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

/// Product of linear factors (x + r_k).
inline Poly from_shifts(const std::vector<double>& r) {
  Poly out{1.0};
  for (double s : r) out = mul(out, Poly{s, 1.0});
  return out;
}

template <typename T>
T eval(const Poly& p, T x) {
  T acc = T(0);
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + T(*it);
  return acc;
}

/// Drops leading coefficients that are negligible relative to the largest one.
inline Poly trim(Poly p, double rel = 1e-14) {
  double big = 0.0;
  for (double c : p) big = std::max(big, std::abs(c));
  while (p.size() > 1 && std::abs(p.back()) <= rel * big) p.pop_back();
  return p;
}

/// Determinant of a square matrix of polynomials by Laplace expansion over
/// column subsets; exact in the coefficient arithmetic.
inline Poly det(const std::vector<std::vector<Poly>>& m) {
  const std::size_t n = m.size();
  std::vector<Poly> f(std::size_t{1} << n);
  f[0] = Poly{1.0};
  for (std::size_t mask = 0; mask < f.size(); ++mask) {
    if (f[mask].empty()) continue;
    const auto row = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (row == n) continue;
    for (std::size_t c = 0; c < n; ++c) {
      if (mask & (std::size_t{1} << c)) continue;
      // sign of moving column c into place among the selected columns
      const int above = __builtin_popcountll(mask >> c);
      Poly term = mul(m[row][c], f[mask]);
      if (above % 2) term = scale(term, -1.0);
      auto& dst = f[mask | (std::size_t{1} << c)];
      dst = dst.empty() ? term : add(dst, term);
    }
  }
  Poly out = f.back();
  return out.empty() ? Poly{0.0} : out;
}

/// All complex roots (companion-matrix eigenvalues).
inline std::vector<std::complex<double>> roots(const Poly& p_in) {
  Poly p = trim(p_in);
  if (p.size() < 2) return {};
  Eigen::VectorXd c(static_cast<Eigen::Index>(p.size()));
  for (std::size_t k = 0; k < p.size(); ++k) c(static_cast<Eigen::Index>(k)) = p[k];
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(c);
  const auto& r = solver.roots();
  return {r.data(), r.data() + r.size()};
}

}  // namespace mapfluct::poly
