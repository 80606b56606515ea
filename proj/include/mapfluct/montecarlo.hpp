#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <thread>
#include <vector>

#include "mapfluct/errors.hpp"
#include "mapfluct/model.hpp"
#include "mapfluct/rng.hpp"
#include "mapfluct/simulate.hpp"

namespace mapfluct {

/// Running sums of complex samples per slot plus per-group sample counts.
/// Merging is plain addition, done in a fixed order by the driver.
struct McAccumulator {
  std::vector<double> sum_re, sum_im, sq_re, sq_im;
  std::vector<std::uint64_t> count;

  McAccumulator() = default;
  McAccumulator(std::size_t slots, std::size_t groups)
      : sum_re(slots), sum_im(slots), sq_re(slots), sq_im(slots), count(groups) {}

  void add(std::size_t slot, cplx v) {
    sum_re[slot] += v.real();
    sum_im[slot] += v.imag();
    sq_re[slot] += v.real() * v.real();
    sq_im[slot] += v.imag() * v.imag();
  }

  void merge(const McAccumulator& o) {
    for (std::size_t k = 0; k < sum_re.size(); ++k) {
      sum_re[k] += o.sum_re[k];
      sum_im[k] += o.sum_im[k];
      sq_re[k] += o.sq_re[k];
      sq_im[k] += o.sq_im[k];
    }
    for (std::size_t g = 0; g < count.size(); ++g) count[g] += o.count[g];
  }
};

struct McOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  std::uint64_t chunk = 4096;
};

/// Runs worker(path_index, acc) for path_index in [0, n_paths). Each chunk
/// of indices is reduced on its own and chunks are merged in index order, so
/// the result is identical for every thread count. `make_worker` is called
/// once per thread.
template <typename MakeWorker>
McAccumulator run_paths(std::uint64_t n_paths, std::size_t slots, std::size_t groups, const McOptions& opt,
                        MakeWorker&& make_worker) {
  const std::uint64_t chunk = std::max<std::uint64_t>(1, opt.chunk);
  const std::uint64_t n_chunks = (n_paths + chunk - 1) / chunk;
  std::vector<McAccumulator> parts(n_chunks, McAccumulator(slots, groups));
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto body = [&] {
    try {
      auto worker = make_worker();
      for (std::uint64_t c = next++; c < n_chunks && !failed; c = next++) {
        const std::uint64_t end = std::min(n_paths, (c + 1) * chunk);
        for (std::uint64_t i = c * chunk; i < end; ++i) worker(i, parts[c]);
      }
    } catch (...) {
      if (!failed.exchange(true)) failure = std::current_exception();
    }
  };
  const int threads = std::max(1, opt.threads);
  if (threads == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  McAccumulator total(slots, groups);
  for (const auto& p : parts) total.merge(p);
  return total;
}

/// Mean and standard error of a sample average.
struct McValue {
  cplx mean;
  double se_re = 0.0;
  double se_im = 0.0;
  std::uint64_t n = 0;
};

inline McValue mc_value(const McAccumulator& acc, std::size_t slot, std::size_t group) {
  McValue v;
  v.n = acc.count[group];
  if (v.n == 0) return v;
  const double n = static_cast<double>(v.n);
  const double mr = acc.sum_re[slot] / n;
  const double mi = acc.sum_im[slot] / n;
  v.mean = {mr, mi};
  if (v.n > 1) {
    v.se_re = std::sqrt(std::max(0.0, (acc.sq_re[slot] - n * mr * mr) / (n - 1.0)) / n);
    v.se_im = std::sqrt(std::max(0.0, (acc.sq_im[slot] - n * mi * mi) / (n - 1.0)) / n);
  }
  return v;
}

/// Matrix estimate with entrywise standard errors (real and imaginary parts).
struct McEstimate {
  CMatrix mean;
  RMatrix se_re;
  RMatrix se_im;
  std::vector<std::uint64_t> count;  // samples behind each row
};

enum class Functional {
  zeta_minus,
  supremum,
  infimum,
  last_exit,
  first_passage,
  fixed_time,
  post_infimum,
  post_sigma,
  post_supremum
};

inline const char* to_string(Functional f) {
  switch (f) {
    case Functional::zeta_minus: return "zeta-";
    case Functional::supremum: return "supremum";
    case Functional::infimum: return "infimum";
    case Functional::last_exit: return "last-exit";
    case Functional::first_passage: return "first-passage";
    case Functional::fixed_time: return "fixed-time";
    case Functional::post_infimum: return "post-infimum";
    case Functional::post_sigma: return "post-sigma";
    case Functional::post_supremum: return "post-supremum";
  }
  return "?";
}

/// One transform argument: exp(alpha X - <beta, occupation>).
struct Probe {
  cplx alpha;
  RVector beta;
};

struct McRequest {
  Functional functional = Functional::zeta_minus;
  std::vector<Probe> probes;
  std::uint64_t n = 10000;  // paths per start phase
  double a = 0.0;           // level for last exit
  double x = 1.0;           // level for first passage
  double t = 1.0;           // time for fixed_time
  std::uint64_t domain = 1;  // stream domain tag
};

/// State at a deterministic time t < zeta.
struct PointState {
  bool alive = false;
  double x = 0.0;
  int phase = kCemetery;
};

inline PointState state_at(const Path& p, double t, RVector& occ) {
  occ.setZero();
  PointState s;
  if (p.dead()) return s;
  double start = 0.0;
  double y = p.x0;
  for (const Event& e : p.events) {
    if (t < start + e.dt) {
      const double h = t - start;
      occ(e.from) += h;
      return {true, y + e.slope * h, e.from};
    }
    occ(e.from) += e.dt;
    start += e.dt;
    if (e.to == kCemetery) break;
    y += e.slope * e.dt + e.jump;
  }
  return s;
}

/// Transform value exp(alpha x - <beta, occ>).
inline cplx transform_value(cplx alpha, const RVector& beta, double x, const RVector& occ) {
  return std::exp(alpha * x - beta.dot(occ));
}

namespace detail {

struct McTarget {
  double x = 0.0;
  const RVector* occ = nullptr;
  int phase = kCemetery;
};

}  // namespace detail

/// Empirical E[exp(alpha X* - <beta, occ*>); J* = j] for every probe. Rows
/// are start phases (N paths each, started at level 0); for post-segment
/// functionals rows are the conditioning phase (J_inf, J_sigma or J_sup)
/// pooled over start phases, and estimates are conditional means.
inline std::vector<McEstimate> mc_transform(const MapModel& m, const McRequest& req, const McOptions& opt) {
  if (req.n < 1000) throw InsufficientSamples("mc_transform: needs at least 1000 paths");
  const Simulator sim(m);
  const int n = m.size();
  const std::size_t np = req.probes.size();
  const std::size_t slots = np * static_cast<std::size_t>(n * n);
  const auto slot = [&](std::size_t k, int row, int col) {
    return k * static_cast<std::size_t>(n * n) + static_cast<std::size_t>(row * n + col);
  };
  auto make = [&] {
    return [&, path = Path{}, seg = Path{}, s = PathSummary{}, s2 = PathSummary{}, occ = RVector(RVector::Zero(n)), zero = RVector(RVector::Zero(n))](
               std::uint64_t idx, McAccumulator& acc) mutable {
      const int start = static_cast<int>(idx / req.n);
      PhiloxStream rng(opt.seed, stream_id(req.domain, idx));
      sim.run(rng, 0.0, start, path);
      path_summary(path, n, req.a, req.x, s);
      int row = start;
      detail::McTarget tg;
      switch (req.functional) {
        case Functional::zeta_minus: tg = {s.x_end, &s.occ_zeta, s.j_end}; break;
        case Functional::supremum: tg = {s.x_sup, &s.occ_sup, s.j_sup}; break;
        case Functional::infimum: tg = {s.x_inf, &s.occ_inf, s.j_inf}; break;
        case Functional::last_exit: tg = {s.x_sigma, &s.occ_sigma, s.j_sigma}; break;
        case Functional::first_passage:
          if (s.tau_reached) tg = {s.x_tau, &s.occ_tau, s.j_tau};
          break;
        case Functional::fixed_time: {
          const PointState ps = state_at(path, req.t, occ);
          if (ps.alive) tg = {ps.x, &occ, ps.phase};
          break;
        }
        case Functional::post_infimum:
        case Functional::post_sigma:
        case Functional::post_supremum: {
          const Segment which = req.functional == Functional::post_infimum ? Segment::post_infimum
                                : req.functional == Functional::post_sigma ? Segment::post_sigma
                                                                           : Segment::post_supremum;
          row = which == Segment::post_infimum ? s.j_inf : which == Segment::post_sigma ? s.j_sigma : s.j_sup;
          if (row == kCemetery) return;
          seg = extract_segment(path, s, which);
          path_summary(seg, n, 0.0, 0.0, s2);
          // a segment killed at once ends at level 0 in the conditioning phase
          tg = seg.dead() ? detail::McTarget{0.0, &zero, row} : detail::McTarget{s2.x_end, &s2.occ_zeta, s2.j_end};
          break;
        }
      }
      acc.count[static_cast<std::size_t>(row)] += 1;
      if (tg.phase == kCemetery) return;
      for (std::size_t k = 0; k < np; ++k)
        acc.add(slot(k, row, tg.phase), transform_value(req.probes[k].alpha, req.probes[k].beta, tg.x, *tg.occ));
    };
  };
  const McAccumulator acc = run_paths(req.n * static_cast<std::uint64_t>(n), slots, static_cast<std::size_t>(n), opt, make);
  std::vector<McEstimate> out(np);
  for (std::size_t k = 0; k < np; ++k) {
    auto& e = out[k];
    e.mean = CMatrix::Zero(n, n);
    e.se_re = RMatrix::Zero(n, n);
    e.se_im = RMatrix::Zero(n, n);
    e.count.assign(acc.count.begin(), acc.count.end());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const McValue v = mc_value(acc, slot(k, i, j), static_cast<std::size_t>(i));
        e.mean(i, j) = v.mean;
        e.se_re(i, j) = v.se_re;
        e.se_im(i, j) = v.se_im;
      }
  }
  return out;
}

}  // namespace mapfluct
