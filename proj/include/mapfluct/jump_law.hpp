#pragma once

#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "mapfluct/errors.hpp"

namespace mapfluct {

using cplx = std::complex<double>;

/// Point mass at `value`.
struct PointMass {
  double value = 0.0;
  bool operator==(const PointMass&) const = default;
};

/// Y = -E with E ~ Exp(rate); support (-inf, 0).
struct ExpNeg {
  double rate = 1.0;
  bool operator==(const ExpNeg&) const = default;
};

/// Y = E with E ~ Exp(rate); support (0, inf).
struct ExpPos {
  double rate = 1.0;
  bool operator==(const ExpPos&) const = default;
};

using JumpAtom = std::variant<PointMass, ExpNeg, ExpPos>;

/// Finite mixture of non-mixture laws.
struct Mixture {
  std::vector<double> weights;
  std::vector<JumpAtom> components;
  bool operator==(const Mixture&) const = default;
};

/// Parametric jump distribution with a closed-form moment transform.
class JumpLaw {
 public:
  using Variant = std::variant<PointMass, ExpNeg, ExpPos, Mixture>;

  JumpLaw() : law_(PointMass{0.0}) {}
  JumpLaw(PointMass p) : law_(p) {}
  JumpLaw(ExpNeg e) : law_(e) {}
  JumpLaw(ExpPos e) : law_(e) {}
  JumpLaw(Mixture m) : law_(std::move(m)) {}

  static JumpLaw point(double v) { return PointMass{v}; }
  static JumpLaw exp_neg(double rate) { return ExpNeg{rate}; }
  static JumpLaw exp_pos(double rate) { return ExpPos{rate}; }
  static JumpLaw mixture(std::vector<double> w, std::vector<JumpAtom> c) {
    return Mixture{std::move(w), std::move(c)};
  }

  const Variant& get() const { return law_; }
  bool is_mixture() const { return std::holds_alternative<Mixture>(law_); }

  /// Calls fn(weight, atom) for every component; non-mixtures have weight 1.
  template <typename Fn>
  void for_each_atom(Fn&& fn) const {
    if (const auto* m = std::get_if<Mixture>(&law_)) {
      for (std::size_t k = 0; k < m->components.size(); ++k) fn(m->weights[k], m->components[k]);
      return;
    }
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (!std::is_same_v<T, Mixture>) fn(1.0, JumpAtom{a});
        },
        law_);
  }

  friend bool operator==(const JumpLaw& a, const JumpLaw& b) { return a.law_ == b.law_; }

 private:
  Variant law_;
};

namespace detail {

inline constexpr double kPoleRadius = 1e-12;

inline cplx atom_mgf(const JumpAtom& atom, cplx alpha) {
  return std::visit(
      [&](const auto& a) -> cplx {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, PointMass>) {
          return std::exp(alpha * a.value);
        } else if constexpr (std::is_same_v<T, ExpNeg>) {
          if (std::abs(alpha + a.rate) < kPoleRadius)
            throw PoleError("jump_mgf: alpha at the pole of exp-neg(" + std::to_string(a.rate) + ")");
          return a.rate / (a.rate + alpha);
        } else {
          if (std::abs(alpha - a.rate) < kPoleRadius)
            throw PoleError("jump_mgf: alpha at the pole of exp-pos(" + std::to_string(a.rate) + ")");
          if (alpha.real() >= a.rate)
            throw DomainError("jump_mgf: Re(alpha) >= rate for exp-pos(" + std::to_string(a.rate) + ")");
          return a.rate / (a.rate - alpha);
        }
      },
      atom);
}

inline cplx atom_mgf_derivative(const JumpAtom& atom, cplx alpha) {
  return std::visit(
      [&](const auto& a) -> cplx {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, PointMass>) {
          return a.value * std::exp(alpha * a.value);
        } else if constexpr (std::is_same_v<T, ExpNeg>) {
          if (std::abs(alpha + a.rate) < kPoleRadius) throw PoleError("jump_mgf': alpha at an exp-neg pole");
          return -a.rate / ((a.rate + alpha) * (a.rate + alpha));
        } else {
          if (std::abs(alpha - a.rate) < kPoleRadius) throw PoleError("jump_mgf': alpha at an exp-pos pole");
          if (alpha.real() >= a.rate) throw DomainError("jump_mgf': Re(alpha) >= rate for exp-pos");
          return a.rate / ((a.rate - alpha) * (a.rate - alpha));
        }
      },
      atom);
}

}  // namespace detail

/// E e^{alpha U}.
inline cplx jump_mgf(const JumpLaw& law, cplx alpha) {
  cplx s = 0.0;
  law.for_each_atom([&](double w, const JumpAtom& a) { s += w * detail::atom_mgf(a, alpha); });
  return s;
}

/// d/dalpha E e^{alpha U}.
inline cplx jump_mgf_derivative(const JumpLaw& law, cplx alpha) {
  cplx s = 0.0;
  law.for_each_atom([&](double w, const JumpAtom& a) { s += w * detail::atom_mgf_derivative(a, alpha); });
  return s;
}

inline double jump_mean(const JumpLaw& law) {
  double s = 0.0;
  law.for_each_atom([&](double w, const JumpAtom& a) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, PointMass>) s += w * x.value;
          else if constexpr (std::is_same_v<T, ExpNeg>) s -= w / x.rate;
          else s += w / x.rate;
        },
        a);
  });
  return s;
}

/// Probability mass on (0, inf).
inline double positive_mass(const JumpLaw& law) {
  double s = 0.0;
  law.for_each_atom([&](double w, const JumpAtom& a) {
    if (std::holds_alternative<ExpPos>(a)) s += w;
    else if (const auto* p = std::get_if<PointMass>(&a); p && p->value > 0) s += w;
  });
  return s;
}

/// Probability mass on (-inf, 0).
inline double negative_mass(const JumpLaw& law) {
  double s = 0.0;
  law.for_each_atom([&](double w, const JumpAtom& a) {
    if (std::holds_alternative<ExpNeg>(a)) s += w;
    else if (const auto* p = std::get_if<PointMass>(&a); p && p->value < 0) s += w;
  });
  return s;
}

/// True when every atom is an exponential or a point mass at zero, so the
/// transform is a rational function of alpha.
inline bool is_rational(const JumpLaw& law) {
  bool ok = true;
  law.for_each_atom([&](double, const JumpAtom& a) {
    if (const auto* p = std::get_if<PointMass>(&a); p && p->value != 0.0) ok = false;
  });
  return ok;
}

/// Throws ValidationError on malformed parameters.
inline void validate(const JumpLaw& law) {
  auto check_atom = [](const JumpAtom& a) {
    std::visit(
        [](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, PointMass>) {
            if (!std::isfinite(x.value)) throw ValidationError("point mass value must be finite");
          } else {
            if (!(x.rate > 0.0) || !std::isfinite(x.rate))
              throw ValidationError("exponential jump rate must be strictly positive");
          }
        },
        a);
  };
  if (const auto* m = std::get_if<Mixture>(&law.get())) {
    if (m->weights.empty() || m->weights.size() != m->components.size())
      throw ValidationError("mixture needs one weight per component");
    double total = 0.0;
    for (double w : m->weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("mixture weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("mixture weights must sum to 1");
    for (const auto& c : m->components) check_atom(c);
    return;
  }
  law.for_each_atom([&](double, const JumpAtom& a) { check_atom(a); });
}

/// Draws one variate; `uniform` returns doubles in (0,1).
template <typename Uniform>
double sample_jump(const JumpLaw& law, Uniform&& uniform) {
  const JumpAtom* atom = nullptr;
  if (const auto* m = std::get_if<Mixture>(&law.get())) {
    double u = uniform();
    std::size_t k = 0;
    for (; k + 1 < m->weights.size(); ++k) {
      if (u < m->weights[k]) break;
      u -= m->weights[k];
    }
    atom = &m->components[k];
  }
  JumpAtom single;
  if (!atom) {
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (!std::is_same_v<T, Mixture>) single = a;
        },
        law.get());
    atom = &single;
  }
  return std::visit(
      [&](const auto& a) -> double {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, PointMass>) return a.value;
        else if constexpr (std::is_same_v<T, ExpNeg>) return std::log(uniform()) / a.rate;
        else return -std::log(uniform()) / a.rate;
      },
      *atom);
}

}  // namespace mapfluct
