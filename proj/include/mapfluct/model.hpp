#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "mapfluct/errors.hpp"
#include "mapfluct/jump_law.hpp"

namespace mapfluct {

using RMatrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;

/// Per-phase Levy dynamics: linear drift, Brownian variance and compound
/// Poisson jumps at rate `jump_rate` with law `jump_law`.
struct LevyComponent {
  std::string name;
  double drift = 0.0;
  double sigma2 = 0.0;
  double jump_rate = 0.0;
  std::optional<JumpLaw> jump_law;

  bool operator==(const LevyComponent&) const = default;

  /// Non-increasing components have no way of moving up.
  bool non_increasing() const {
    if (sigma2 > 0.0 || drift > 0.0) return false;
    return !(jump_rate > 0.0 && jump_law && positive_mass(*jump_law) > 0.0);
  }
};

/// Markov-modulated Levy process with switch jumps and phase killing.
struct MapModel {
  std::vector<LevyComponent> levy;
  RMatrix switch_rate;                                  // Q_ij, zero diagonal
  std::vector<std::vector<std::optional<JumpLaw>>> switch_jump;  // U_ij; nullopt means point(0)
  RVector kill;                                         // q_i

  int size() const { return static_cast<int>(levy.size()); }

  const JumpLaw& switch_law(int i, int j) const {
    static const JumpLaw zero = JumpLaw::point(0.0);
    const auto& u = switch_jump[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return u ? *u : zero;
  }

  bool operator==(const MapModel& o) const {
    return levy == o.levy && switch_rate == o.switch_rate && switch_jump == o.switch_jump && kill == o.kill;
  }
};

/// Builds an n-phase model with zero rates, unit drifts and no killing.
inline MapModel make_model(int n) {
  MapModel m;
  m.levy.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) m.levy[static_cast<std::size_t>(i)].name = "p" + std::to_string(i + 1);
  m.switch_rate = RMatrix::Zero(n, n);
  m.switch_jump.assign(static_cast<std::size_t>(n), std::vector<std::optional<JumpLaw>>(static_cast<std::size_t>(n)));
  m.kill = RVector::Zero(n);
  return m;
}

inline bool killing_is_zero(const MapModel& m) { return (m.kill.array() == 0.0).all(); }

/// Every within-phase and switch jump law lives on (-inf, 0].
inline bool is_spectrally_negative(const MapModel& m) {
  const int n = m.size();
  for (int i = 0; i < n; ++i) {
    const auto& c = m.levy[static_cast<std::size_t>(i)];
    if (c.jump_rate > 0.0 && c.jump_law && positive_mass(*c.jump_law) > 0.0) return false;
    for (int j = 0; j < n; ++j)
      if (i != j && m.switch_rate(i, j) > 0.0 && positive_mass(m.switch_law(i, j)) > 0.0) return false;
  }
  return true;
}

namespace detail {

inline bool strongly_connected(const RMatrix& q) {
  const auto n = q.rows();
  auto reach = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      auto i = stack.back();
      stack.pop_back();
      for (Eigen::Index j = 0; j < n; ++j) {
        double r = transpose ? q(j, i) : q(i, j);
        if (j != i && r > 0.0 && !seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          stack.push_back(j);
        }
      }
    }
    for (char s : seen)
      if (!s) return false;
    return true;
  };
  return reach(false) && reach(true);
}

}  // namespace detail

/// Structural validation. Killing may be identically zero here; operations
/// that need a defective process check that themselves.
inline void validate(const MapModel& m) {
  const int n = m.size();
  if (n < 1) throw ValidationError("model needs at least one phase");
  if (m.switch_rate.rows() != n || m.switch_rate.cols() != n) throw ValidationError("switch rate matrix has wrong shape");
  if (m.kill.size() != n) throw ValidationError("kill vector has wrong length");
  if (m.switch_jump.size() != static_cast<std::size_t>(n)) throw ValidationError("switch jump table has wrong shape");
  for (const auto& row : m.switch_jump)
    if (row.size() != static_cast<std::size_t>(n)) throw ValidationError("switch jump table has wrong shape");
  for (int i = 0; i < n; ++i) {
    const auto& c = m.levy[static_cast<std::size_t>(i)];
    if (!std::isfinite(c.drift)) throw ValidationError("phase " + c.name + ": drift must be finite");
    if (!(c.sigma2 >= 0.0) || !std::isfinite(c.sigma2)) throw ValidationError("phase " + c.name + ": sigma2 must be >= 0");
    if (!(c.jump_rate >= 0.0) || !std::isfinite(c.jump_rate))
      throw ValidationError("phase " + c.name + ": jump rate must be >= 0");
    if (c.jump_rate > 0.0 && !c.jump_law) throw ValidationError("phase " + c.name + ": positive jump rate needs a law");
    if (c.jump_law) validate(*c.jump_law);
    if (!(m.kill(i) >= 0.0) || !std::isfinite(m.kill(i))) throw ValidationError("kill rates must be >= 0");
    if (m.switch_rate(i, i) != 0.0) throw ValidationError("switch rate diagonal must be zero");
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!(m.switch_rate(i, j) >= 0.0) || !std::isfinite(m.switch_rate(i, j)))
        throw ValidationError("switch rates must be >= 0");
      if (const auto& u = m.switch_jump[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) validate(*u);
    }
  }
  if (n > 1 && !detail::strongly_connected(m.switch_rate)) throw ValidationError("phase chain is not irreducible");
  bool can_rise = false;
  bool can_fall = false;
  for (int i = 0; i < n; ++i) {
    const auto& c = m.levy[static_cast<std::size_t>(i)];
    if (c.sigma2 > 0.0) can_rise = can_fall = true;
    if (c.drift > 0.0) can_rise = true;
    if (c.drift < 0.0) can_fall = true;
    if (c.jump_rate > 0.0 && c.jump_law) {
      if (positive_mass(*c.jump_law) > 0.0) can_rise = true;
      if (negative_mass(*c.jump_law) > 0.0) can_fall = true;
    }
    for (int j = 0; j < n; ++j) {
      if (i == j || m.switch_rate(i, j) <= 0.0) continue;
      if (positive_mass(m.switch_law(i, j)) > 0.0) can_rise = true;
      if (negative_mass(m.switch_law(i, j)) > 0.0) can_fall = true;
    }
  }
  if (!can_rise || !can_fall) throw ValidationError("additive component is monotone");
}

enum class PhaseClass { up, down, osc };

inline const char* to_string(PhaseClass c) {
  switch (c) {
    case PhaseClass::up: return "UP";
    case PhaseClass::down: return "DOWN";
    case PhaseClass::osc: return "OSC";
  }
  return "?";
}

using PhasePartition = std::vector<PhaseClass>;

inline PhaseClass classify(const LevyComponent& c) {
  if (c.sigma2 > 0.0) return PhaseClass::osc;
  if (c.drift > 0.0) return PhaseClass::up;
  if (c.drift < 0.0) return PhaseClass::down;
  if (c.jump_rate > 0.0) return PhaseClass::down;  // compound Poisson
  throw DegenerateError("phase " + c.name + " is a constant process");
}

inline PhasePartition phase_partition(const MapModel& m) {
  PhasePartition out;
  out.reserve(m.levy.size());
  for (const auto& c : m.levy) out.push_back(classify(c));
  return out;
}

/// Matrix exponent Psi^beta(alpha) = Psi(alpha) - diag(beta), or its
/// entrywise alpha-derivative when `derivative` is set.
inline CMatrix psi(const MapModel& m, cplx alpha, const RVector& beta, bool derivative = false) {
  const int n = m.size();
  if (beta.size() != n) throw DomainError("psi: beta has wrong length");
  if ((beta.array() < 0.0).any()) throw DomainError("psi: beta must be nonnegative");
  CMatrix out = CMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& c = m.levy[static_cast<std::size_t>(i)];
    cplx d;
    if (derivative) {
      d = c.drift + c.sigma2 * alpha;
      if (c.jump_rate > 0.0) d += c.jump_rate * jump_mgf_derivative(*c.jump_law, alpha);
    } else {
      d = c.drift * alpha + 0.5 * c.sigma2 * alpha * alpha;
      if (c.jump_rate > 0.0) d += c.jump_rate * (jump_mgf(*c.jump_law, alpha) - 1.0);
      d -= m.kill(i) + beta(i);
    }
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double rate = m.switch_rate(i, j);
      if (rate <= 0.0) continue;
      if (derivative) {
        out(i, j) = rate * jump_mgf_derivative(m.switch_law(i, j), alpha);
      } else {
        out(i, j) = rate * jump_mgf(m.switch_law(i, j), alpha);
        d -= rate;
      }
    }
    out(i, i) = d;
  }
  return out;
}

inline CMatrix psi(const MapModel& m, cplx alpha) { return psi(m, alpha, RVector::Zero(m.size())); }

/// Conservative generator of the phase chain (killing removed).
inline RMatrix conservative_generator(const MapModel& m) {
  RMatrix g = m.switch_rate;
  for (int i = 0; i < m.size(); ++i) g(i, i) = -m.switch_rate.row(i).sum();
  return g;
}

/// Stationary row vector pi of the killing-free chain, pi (Psi(0) + diag q) = 0.
/// Both flag values solve the same equation; the flag is kept for callers
/// that want to state intent explicitly.
inline RVector stationary(const MapModel& m, bool strip_killing = true) {
  (void)strip_killing;
  const int n = m.size();
  if (n == 1) return RVector::Ones(1);
  RMatrix a = conservative_generator(m).transpose();
  a.row(n - 1).setOnes();
  RVector rhs = RVector::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::FullPivLU<RMatrix> lu(a);
  if (lu.rank() < n) throw SingularError("stationary: generator system is rank deficient");
  RVector pi = lu.solve(rhs);
  if ((pi.array() <= 0.0).any()) throw SingularError("stationary: non-positive stationary mass");
  return pi;
}

/// Time-reversed model: same Levy parts and killing, switch rates
/// pi_j Q_ji / pi_i and switch jumps U_ji.
inline MapModel dual(const MapModel& m) {
  const RVector pi = stationary(m);
  MapModel d = m;
  const int n = m.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      d.switch_rate(i, j) = pi(j) * m.switch_rate(j, i) / pi(i);
      d.switch_jump[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          m.switch_jump[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      if (d.switch_rate(i, j) == 0.0) d.switch_jump[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].reset();
    }
  return d;
}

/// mu = E_pi X_1 of the killing-free process.
inline double stationary_drift(const MapModel& m) {
  const RVector pi = stationary(m);
  const CMatrix dpsi = psi(m, 0.0, RVector::Zero(m.size()), true);
  return (pi.transpose().cast<cplx>() * dpsi * CVector::Ones(m.size()))(0).real();
}

}  // namespace mapfluct
