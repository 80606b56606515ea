#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "mapfluct/errors.hpp"
#include "mapfluct/model.hpp"
#include "mapfluct/rng.hpp"

namespace mapfluct {

inline constexpr int kCemetery = -1;

/// A linear stretch of length dt with the given slope in phase `from`,
/// followed by a transition to `to` (kCemetery for killing) with a jump.
struct Event {
  double dt = 0.0;
  double slope = 0.0;
  int from = 0;
  int to = 0;
  double jump = 0.0;
  bool operator==(const Event&) const = default;
};

/// Exact piecewise-linear path. The last event is the killing; a path with
/// j0 == kCemetery is dead from the start.
struct Path {
  double x0 = 0.0;
  int j0 = kCemetery;
  std::vector<Event> events;

  bool dead() const { return j0 == kCemetery; }
  bool operator==(const Path&) const = default;
};

/// Competing-clock tables derived once per model.
class Simulator {
 public:
  explicit Simulator(const MapModel& m) : model_(m) {
    validate(m);
    const int n = m.size();
    for (const auto& c : m.levy)
      if (c.sigma2 > 0.0) throw UnsupportedError("simulation needs bounded-variation phases (sigma2 = 0)");
    if (killing_is_zero(m)) throw DomainError("simulation needs positive killing in some phase");
    phases_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto& p = phases_[static_cast<std::size_t>(i)];
      const auto& c = m.levy[static_cast<std::size_t>(i)];
      p.slope = c.drift;
      if (c.jump_rate > 0.0) p.outcomes.push_back({c.jump_rate, i, c.jump_law});
      for (int j = 0; j < n; ++j)
        if (j != i && m.switch_rate(i, j) > 0.0) p.outcomes.push_back({m.switch_rate(i, j), j, m.switch_law(i, j)});
      if (m.kill(i) > 0.0) p.outcomes.push_back({m.kill(i), kCemetery, std::nullopt});
      for (const auto& o : p.outcomes) p.total += o.rate;
    }
  }

  const MapModel& model() const { return model_; }
  int size() const { return model_.size(); }

  /// Samples a path from (x0, j0) until killing into `out` (buffer reused).
  void run(PhiloxStream& rng, double x0, int j0, Path& out) const {
    out.x0 = x0;
    out.j0 = j0;
    out.events.clear();
    int phase = j0;
    while (phase != kCemetery) {
      const auto& p = phases_[static_cast<std::size_t>(phase)];
      if (p.total <= 0.0) throw DomainError("phase without any event can never be killed");
      Event e;
      e.dt = -std::log(rng.uniform()) / p.total;
      e.slope = p.slope;
      e.from = phase;
      double u = rng.uniform() * p.total;
      std::size_t k = 0;
      for (; k + 1 < p.outcomes.size(); ++k) {
        if (u < p.outcomes[k].rate) break;
        u -= p.outcomes[k].rate;
      }
      const auto& o = p.outcomes[k];
      e.to = o.to;
      if (o.law) e.jump = sample_jump(*o.law, rng);
      out.events.push_back(e);
      phase = o.to;
      if (out.events.size() > kMaxEvents) throw ConvergenceError("path exceeded the event budget");
    }
  }

  Path run(PhiloxStream& rng, double x0, int j0) const {
    Path p;
    run(rng, x0, j0, p);
    return p;
  }

 private:
  static constexpr std::size_t kMaxEvents = 50'000'000;
  struct Outcome {
    double rate;
    int to;
    std::optional<JumpLaw> law;
  };
  struct PhaseTable {
    double slope = 0.0;
    double total = 0.0;
    std::vector<Outcome> outcomes;
  };
  MapModel model_;
  std::vector<PhaseTable> phases_;
};

inline Path simulate_path(const MapModel& m, PhiloxStream& rng, double x0, int j0) {
  return Simulator(m).run(rng, x0, j0);
}

/// Path functionals at the lifetime, the extrema, the last exit sigma_a from
/// (-inf, a] and the first passage tau_x above x.
struct PathSummary {
  int n = 0;
  double zeta = 0.0;
  double x_end = 0.0;  // X at zeta-
  int j_end = kCemetery;
  RVector occ_zeta;

  double x_inf = 0.0;
  double g_inf = 0.0;
  RVector occ_inf;
  int j_inf = kCemetery;
  bool inf_attained = true;
  int inf_event = -1;  // event index at G_inf, -1 for time 0

  double x_sup = 0.0;
  double g_sup = 0.0;
  RVector occ_sup;
  int j_sup = kCemetery;
  int sup_event = -1;
  bool sup_by_jump = false;  // supremum reached by an upward jump

  double a = 0.0;
  double sigma = 0.0;
  RVector occ_sigma;
  int j_sigma = kCemetery;
  double x_sigma = 0.0;
  bool sigma_continuous = false;
  int sigma_segment = -1;  // segment of a continuous crossing, or event index of a jump
  bool sigma_at_event = false;
  double sigma_offset = 0.0;  // time into sigma_segment of a continuous crossing

  double x = 0.0;
  bool tau_reached = false;
  double tau = std::numeric_limits<double>::infinity();
  RVector occ_tau;
  int j_tau = kCemetery;
  double x_tau = 0.0;
  bool creep = false;
  int tau_segment = -1;
  bool tau_at_event = false;
  double tau_offset = 0.0;
};

namespace detail {

/// Sum of the segment lengths spent in each phase, added in sorted order so
/// that the result does not depend on the order of the segments.
inline void occupation_sorted(const Path& p, RVector& occ, std::vector<double>& scratch) {
  occ.setZero();
  for (Eigen::Index i = 0; i < occ.size(); ++i) {
    scratch.clear();
    for (const auto& e : p.events)
      if (e.from == i) scratch.push_back(e.dt);
    std::sort(scratch.begin(), scratch.end());
    double s = 0.0;
    for (double v : scratch) s += v;
    occ(i) = s;
  }
}

}  // namespace detail

/// Single forward pass over the events. Conventions: last infimum, first
/// supremum; J_inf is the phase after G_inf when the infimum is attained and
/// before it otherwise; J_sup is the phase before G_sup unless the supremum is
/// reached by an upward jump.
inline void path_summary(const Path& p, int n, double a, double x, PathSummary& s) {
  s.n = n;
  s.a = a;
  s.x = x;
  for (RVector* v : {&s.occ_zeta, &s.occ_inf, &s.occ_sup, &s.occ_sigma, &s.occ_tau}) {
    v->resize(n);
    v->setZero();
  }
  s.zeta = 0.0;
  s.x_end = s.x_inf = s.x_sup = s.x_sigma = s.x_tau = p.x0;
  s.g_inf = s.g_sup = s.sigma = 0.0;
  s.j_end = s.j_inf = s.j_sup = s.j_sigma = s.j_tau = kCemetery;
  s.inf_attained = true;
  s.inf_event = s.sup_event = -1;
  s.sup_by_jump = false;
  s.sigma_continuous = false;
  s.sigma_segment = -1;
  s.sigma_at_event = false;
  s.tau_reached = false;
  s.tau = std::numeric_limits<double>::infinity();
  s.creep = false;
  s.tau_segment = -1;
  s.tau_at_event = false;
  s.sigma_offset = s.tau_offset = 0.0;
  if (p.dead()) return;

  s.j_inf = s.j_sup = p.j0;
  if (p.x0 > x) {
    s.tau_reached = true;
    s.tau = 0.0;
    s.j_tau = p.j0;
    s.x_tau = p.x0;
  }
  RVector occ = RVector::Zero(n);
  double t = 0.0;
  double y = p.x0;
  for (std::size_t k = 0; k < p.events.size(); ++k) {
    const Event& e = p.events[k];
    const double z = y + e.slope * e.dt;  // left limit at the event
    const double t_next = t + e.dt;

    // last exit from (-inf, a]: latest segment that meets it
    if (e.slope > 0.0 && y <= a && a < z) {
      const double h = (a - y) / e.slope;
      s.sigma = t + h;
      s.occ_sigma = occ;
      s.occ_sigma(e.from) += h;
      s.j_sigma = e.from;
      s.x_sigma = a;
      s.sigma_continuous = true;
      s.sigma_segment = static_cast<int>(k);
      s.sigma_at_event = false;
      s.sigma_offset = h;
    } else if (y <= a || z < a) {
      s.sigma = t_next;
      s.occ_sigma = occ;
      s.occ_sigma(e.from) += e.dt;
      s.j_sigma = e.to;
      s.x_sigma = e.to == kCemetery ? z : z + e.jump;
      s.sigma_continuous = e.to != kCemetery && s.x_sigma == a;
      s.sigma_segment = static_cast<int>(k);
      s.sigma_at_event = true;
    }

    // first passage above x
    if (!s.tau_reached && e.slope > 0.0 && y <= x && x < z) {
      const double h = (x - y) / e.slope;
      s.tau_reached = true;
      s.tau = t + h;
      s.occ_tau = occ;
      s.occ_tau(e.from) += h;
      s.j_tau = e.from;
      s.x_tau = x;
      s.creep = true;
      s.tau_segment = static_cast<int>(k);
      s.tau_offset = h;
    }

    occ(e.from) += e.dt;
    t = t_next;

    if (e.to == kCemetery) {
      if (z <= s.x_inf) {
        s.x_inf = z;
        s.g_inf = t;
        s.occ_inf = occ;
        s.j_inf = e.from;
        s.inf_attained = false;
        s.inf_event = static_cast<int>(k);
      }
      if (z > s.x_sup) {
        s.x_sup = z;
        s.g_sup = t;
        s.occ_sup = occ;
        s.j_sup = e.from;
        s.sup_event = static_cast<int>(k);
        s.sup_by_jump = false;
      }
      s.zeta = t;
      s.x_end = z;
      s.j_end = e.from;
      break;
    }

    const double y_new = z + e.jump;
    const double v = std::min(z, y_new);
    if (v <= s.x_inf) {
      s.x_inf = v;
      s.g_inf = t;
      s.occ_inf = occ;
      s.inf_attained = y_new <= z;
      s.j_inf = s.inf_attained ? e.to : e.from;
      s.inf_event = static_cast<int>(k);
    }
    const double w = std::max(z, y_new);
    if (w > s.x_sup) {
      s.x_sup = w;
      s.g_sup = t;
      s.occ_sup = occ;
      s.sup_by_jump = z != w;
      s.j_sup = s.sup_by_jump ? e.to : e.from;
      s.sup_event = static_cast<int>(k);
    }
    if (!s.tau_reached && y_new > x) {
      s.tau_reached = true;
      s.tau = t;
      s.occ_tau = occ;
      s.j_tau = e.to;
      s.x_tau = y_new;
      s.creep = false;
      s.tau_segment = static_cast<int>(k);
      s.tau_at_event = true;
    }
    y = y_new;
  }
  static thread_local std::vector<double> scratch;
  detail::occupation_sorted(p, s.occ_zeta, scratch);
}

inline PathSummary path_summary(const Path& p, int n, double a, double x) {
  PathSummary s;
  path_summary(p, n, a, x, s);
  return s;
}

enum class ReverseAt { zeta_minus, infimum, sigma, tau };

namespace detail {

/// Reverses the path restricted to [0, T): the first `full` events are kept
/// whole, followed by a stretch of length `tail` of segment `full`.
/// The reversed path starts at `offset` in the phase at T-.
inline Path reverse_prefix(const Path& p, std::size_t full, double tail, double offset) {
  const Event& last = p.events[full];
  Path r;
  r.x0 = offset;
  r.j0 = last.from;
  r.events.reserve(full + 1);
  double dt = tail;
  double slope = last.slope;
  for (std::size_t m = full; m-- > 0;) {
    const Event& e = p.events[m];
    r.events.push_back({dt, slope, e.to, e.from, e.jump});
    dt = e.dt;
    slope = e.slope;
  }
  r.events.push_back({dt, slope, p.events[0].from, kCemetery, 0.0});
  return r;
}

/// Reversal at the time of event k; `right` takes X_T (after the jump) as
/// reference, otherwise X_T-.
inline Path reverse_at_event(const Path& p, std::size_t k, bool right) {
  const Event& e = p.events[k];
  return reverse_prefix(p, k, e.dt, right ? e.jump : 0.0);
}

}  // namespace detail

/// Reversal at a deterministic time t; t >= zeta gives the dead path.
inline Path reverse_path_at(const Path& p, double t) {
  if (p.dead() || !(t > 0.0)) return Path{};
  double start = 0.0;
  for (std::size_t k = 0; k < p.events.size(); ++k) {
    const Event& e = p.events[k];
    if (t < start + e.dt) return detail::reverse_prefix(p, k, t - start, 0.0);
    start += e.dt;
  }
  return Path{};
}

/// The path t -> (X_T - X_(T-t)-, J_(T-t)-) on [0, T), killed at T, for the
/// random times of the summary. Times at 0 or at zeta (other than zeta-)
/// give the dead path.
inline Path reverse_path(const Path& p, const PathSummary& s, ReverseAt at) {
  if (p.dead()) return Path{};
  switch (at) {
    case ReverseAt::zeta_minus:
      return detail::reverse_at_event(p, p.events.size() - 1, false);
    case ReverseAt::infimum:
      // at G_inf when the infimum is attained, at G_inf- otherwise
      if (s.inf_event < 0) return Path{};
      return detail::reverse_at_event(p, static_cast<std::size_t>(s.inf_event), s.inf_attained);
    case ReverseAt::sigma:
      if (s.j_sigma == kCemetery || s.sigma_segment < 0) return Path{};
      if (s.sigma_at_event) return detail::reverse_at_event(p, static_cast<std::size_t>(s.sigma_segment), true);
      if (s.sigma_offset <= 0.0 && s.sigma_segment == 0) return Path{};
      return detail::reverse_prefix(p, static_cast<std::size_t>(s.sigma_segment), s.sigma_offset, 0.0);
    case ReverseAt::tau:
      if (!s.tau_reached || s.tau_segment < 0) return Path{};
      if (s.tau_at_event) return detail::reverse_at_event(p, static_cast<std::size_t>(s.tau_segment), true);
      if (s.tau_offset <= 0.0 && s.tau_segment == 0) return Path{};
      return detail::reverse_prefix(p, static_cast<std::size_t>(s.tau_segment), s.tau_offset, 0.0);
  }
  return Path{};
}

/// The killing operator: the path on [0, T) killed at T, where T lies h into
/// segment k. T = 0 gives the dead path.
inline Path kill_prefix(const Path& p, std::size_t k, double h) {
  if (p.dead() || (k == 0 && !(h > 0.0))) return Path{};
  Path r;
  r.x0 = p.x0;
  r.j0 = p.j0;
  r.events.assign(p.events.begin(), p.events.begin() + static_cast<std::ptrdiff_t>(k));
  const Event& e = p.events[k];
  r.events.push_back({h, e.slope, e.from, kCemetery, 0.0});
  return r;
}

/// Killing at a deterministic time t; t >= zeta returns the path itself.
inline Path kill_path_at(const Path& p, double t) {
  if (p.dead()) return Path{};
  double start = 0.0;
  for (std::size_t k = 0; k < p.events.size(); ++k) {
    const Event& e = p.events[k];
    if (t < start + e.dt) return kill_prefix(p, k, t - start);
    start += e.dt;
  }
  return p;
}

/// Killing at sigma_a or tau_x of the summary; the path itself when the time
/// is not reached before zeta.
inline Path kill_path(const Path& p, const PathSummary& s, ReverseAt at) {
  if (p.dead()) return Path{};
  switch (at) {
    case ReverseAt::zeta_minus: return p;
    case ReverseAt::infimum:
      if (s.inf_event < 0) return Path{};
      return kill_prefix(p, static_cast<std::size_t>(s.inf_event), p.events[static_cast<std::size_t>(s.inf_event)].dt);
    case ReverseAt::sigma:
      if (s.j_sigma == kCemetery || s.sigma_segment < 0) return p;
      if (s.sigma_at_event)
        return kill_prefix(p, static_cast<std::size_t>(s.sigma_segment), p.events[static_cast<std::size_t>(s.sigma_segment)].dt);
      return kill_prefix(p, static_cast<std::size_t>(s.sigma_segment), s.sigma_offset);
    case ReverseAt::tau:
      if (!s.tau_reached || s.tau_segment < 0) return p;
      if (s.tau_at_event)
        return kill_prefix(p, static_cast<std::size_t>(s.tau_segment), p.events[static_cast<std::size_t>(s.tau_segment)].dt);
      return kill_prefix(p, static_cast<std::size_t>(s.tau_segment), s.tau_offset);
  }
  return p;
}

enum class Segment { post_infimum, post_sigma, post_supremum };

namespace detail {

/// The part of the path after event k, started at `level` in the phase
/// entered at event k; dead when event k is the killing.
inline Path suffix_after_event(const Path& p, int k, double level) {
  if (k < 0) {
    Path r = p;
    r.x0 = level;
    return r;
  }
  const Event& e = p.events[static_cast<std::size_t>(k)];
  if (e.to == kCemetery) return Path{};
  Path r;
  r.x0 = level;
  r.j0 = e.to;
  r.events.assign(p.events.begin() + k + 1, p.events.end());
  return r;
}

}  // namespace detail

/// Post-extremum or post-last-exit piece of the path, shifted to start at
/// time 0 and at level X - reference.
inline Path extract_segment(const Path& p, const PathSummary& s, Segment which) {
  if (p.dead()) return Path{};
  switch (which) {
    case Segment::post_infimum: {
      if (s.inf_event < 0) return detail::suffix_after_event(p, -1, p.x0 - s.x_inf);
      const Event& e = p.events[static_cast<std::size_t>(s.inf_event)];
      const double y_after = s.inf_attained ? s.x_inf : s.x_inf + e.jump;
      return detail::suffix_after_event(p, s.inf_event, y_after - s.x_inf);
    }
    case Segment::post_supremum: {
      if (s.sup_event < 0) return detail::suffix_after_event(p, -1, p.x0 - s.x_sup);
      const Event& e = p.events[static_cast<std::size_t>(s.sup_event)];
      // X at G_sup is the post-jump value
      return detail::suffix_after_event(p, s.sup_event, s.sup_by_jump ? 0.0 : e.jump);
    }
    case Segment::post_sigma: {
      if (s.j_sigma == kCemetery) return Path{};
      if (s.sigma_segment < 0) return detail::suffix_after_event(p, -1, p.x0 - s.a);
      if (s.sigma_at_event) return detail::suffix_after_event(p, s.sigma_segment, s.x_sigma - s.a);
      Path r;
      r.x0 = 0.0;
      const auto k = static_cast<std::size_t>(s.sigma_segment);
      r.j0 = p.events[k].from;
      r.events.assign(p.events.begin() + static_cast<std::ptrdiff_t>(k), p.events.end());
      r.events.front().dt -= s.sigma_offset;
      return r;
    }
  }
  return Path{};
}

/// Writes rows (path_id, time, phase, value, event_kind) for one path.
inline void dump_path_csv(std::ostream& os, std::size_t id, const Path& p) {
  if (p.dead()) {
    os << id << ",0,-1," << p.x0 << ",dead\n";
    return;
  }
  os << id << ",0," << p.j0 << ',' << p.x0 << ",start\n";
  double t = 0.0;
  double y = p.x0;
  for (const Event& e : p.events) {
    t += e.dt;
    y += e.slope * e.dt;
    if (e.to == kCemetery) {
      os << id << ',' << t << ",-1," << y << ",kill\n";
      break;
    }
    y += e.jump;
    os << id << ',' << t << ',' << e.to << ',' << y << ',' << (e.to == e.from ? "jump" : "switch") << "\n";
  }
}

}  // namespace mapfluct
