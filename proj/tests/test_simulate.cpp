#include <gtest/gtest.h>

#include <sstream>

#include "mapfluct/fluctuation.hpp"
#include "mapfluct/montecarlo.hpp"
#include "mapfluct/simulate.hpp"
#include "oracles.hpp"
#include "test_models.hpp"

using namespace mapfluct;

namespace {

// 0 -> 1 in phase 0, jump -3 into phase 1, then up to 0.5 and killed.
Path hand_path() {
  Path p;
  p.x0 = 0.0;
  p.j0 = 0;
  p.events = {{1.0, 1.0, 0, 1, -3.0}, {2.5, 1.0, 1, kCemetery, 0.0}};
  return p;
}

void expect_z(const McEstimate& e, const CMatrix& ref, double z_max, const char* what) {
  for (Eigen::Index i = 0; i < ref.rows(); ++i)
    for (Eigen::Index j = 0; j < ref.cols(); ++j) {
      const cplx d = e.mean(i, j) - ref(i, j);
      if (e.se_re(i, j) > 0) EXPECT_LT(std::abs(d.real()) / e.se_re(i, j), z_max) << what << " re " << i << j;
      else EXPECT_NEAR(d.real(), 0.0, 1e-12) << what << " re " << i << j;
      if (e.se_im(i, j) > 0) EXPECT_LT(std::abs(d.imag()) / e.se_im(i, j), z_max) << what << " im " << i << j;
      else EXPECT_NEAR(d.imag(), 0.0, 1e-12) << what << " im " << i << j;
    }
}

}  // namespace

TEST(Simulate, SamePathForSameStream) {
  const Simulator sim(testmodels::m2());
  PhiloxStream a(5, stream_id(3, 11)), b(5, stream_id(3, 11)), c(5, stream_id(3, 12));
  const Path pa = sim.run(a, 0.0, 0), pb = sim.run(b, 0.0, 0), pc = sim.run(c, 0.0, 0);
  EXPECT_EQ(pa, pb);
  EXPECT_NE(pa, pc);
  EXPECT_EQ(pa.events.back().to, kCemetery);
}

TEST(Simulate, RejectsUnsupportedModels) {
  MapModel m = testmodels::m1();
  m.levy[0].sigma2 = 1.0;
  EXPECT_THROW(Simulator{m}, UnsupportedError);
  m = testmodels::m2(0.0, 0.0);
  EXPECT_THROW(Simulator{m}, DomainError);
}

TEST(Simulate, SummaryOfHandBuiltPath) {
  const PathSummary s = path_summary(hand_path(), 2, 0.0, 0.75);
  EXPECT_DOUBLE_EQ(s.zeta, 3.5);
  EXPECT_DOUBLE_EQ(s.x_end, 0.5);
  EXPECT_EQ(s.j_end, 1);
  EXPECT_EQ(s.occ_zeta, (RVector(2) << 1.0, 2.5).finished());
  EXPECT_DOUBLE_EQ(s.x_inf, -2.0);
  EXPECT_DOUBLE_EQ(s.g_inf, 1.0);
  EXPECT_EQ(s.j_inf, 1);
  EXPECT_TRUE(s.inf_attained);
  EXPECT_DOUBLE_EQ(s.x_sup, 1.0);
  EXPECT_EQ(s.j_sup, 0);
  EXPECT_FALSE(s.sup_by_jump);
  EXPECT_DOUBLE_EQ(s.sigma, 3.0);
  EXPECT_EQ(s.j_sigma, 1);
  EXPECT_TRUE(s.sigma_continuous);
  EXPECT_EQ(s.occ_sigma, (RVector(2) << 1.0, 2.0).finished());
  EXPECT_TRUE(s.tau_reached);
  EXPECT_TRUE(s.creep);
  EXPECT_DOUBLE_EQ(s.tau, 0.75);
  EXPECT_EQ(s.j_tau, 0);
}

TEST(Simulate, ReversalAtLifetime) {
  const Path p = hand_path();
  const Path r = reverse_path(p, path_summary(p, 2, 0.0, 1.0), ReverseAt::zeta_minus);
  EXPECT_EQ(r.j0, 1);
  const PathSummary s = path_summary(r, 2, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(s.x_end, 0.5);
  EXPECT_EQ(s.j_end, 0);
  EXPECT_EQ(s.occ_zeta, (RVector(2) << 1.0, 2.5).finished());
  // reversed post-jump level: 2.5 - 3
  EXPECT_DOUBLE_EQ(s.x_inf, -0.5);
  EXPECT_EQ(reverse_path(r, s, ReverseAt::zeta_minus), p);
}

TEST(Simulate, ReversalIsAnInvolutionOnSimulatedPaths) {
  const Simulator sim(testmodels::m3());
  for (std::uint64_t k = 0; k < 200; ++k) {
    PhiloxStream rng(1, k);
    const Path p = sim.run(rng, 0.0, static_cast<int>(k % 2));
    const Path r = reverse_path(p, path_summary(p, 2, 0.0, 1.0), ReverseAt::zeta_minus);
    const Path rr = reverse_path(r, path_summary(r, 2, 0.0, 1.0), ReverseAt::zeta_minus);
    ASSERT_EQ(rr, p);
  }
}

TEST(Simulate, KillingAndSegments) {
  const Path p = hand_path();
  const PathSummary s = path_summary(p, 2, 0.0, 0.75);
  const Path k = kill_path_at(p, 2.0);
  ASSERT_EQ(k.events.size(), 2u);
  EXPECT_DOUBLE_EQ(k.events[1].dt, 1.0);
  EXPECT_EQ(k.events[1].to, kCemetery);
  EXPECT_EQ(kill_path_at(p, 10.0), p);
  EXPECT_TRUE(kill_path_at(p, 0.0).dead());
  const Path tau = kill_path(p, s, ReverseAt::tau);
  ASSERT_EQ(tau.events.size(), 1u);
  EXPECT_DOUBLE_EQ(tau.events[0].dt, 0.75);

  const Path post_inf = extract_segment(p, s, Segment::post_infimum);
  EXPECT_EQ(post_inf.j0, 1);
  EXPECT_DOUBLE_EQ(post_inf.x0, 0.0);
  ASSERT_EQ(post_inf.events.size(), 1u);
  EXPECT_DOUBLE_EQ(post_inf.events[0].dt, 2.5);

  const Path post_sigma = extract_segment(p, s, Segment::post_sigma);
  EXPECT_EQ(post_sigma.j0, 1);
  ASSERT_EQ(post_sigma.events.size(), 1u);
  EXPECT_DOUBLE_EQ(post_sigma.events[0].dt, 0.5);

  const Path post_sup = extract_segment(p, s, Segment::post_supremum);
  EXPECT_EQ(post_sup.j0, 1);
  EXPECT_DOUBLE_EQ(post_sup.x0, -3.0);
}

TEST(Simulate, DumpRows) {
  std::ostringstream os;
  dump_path_csv(os, 4, hand_path());
  EXPECT_EQ(os.str(), "4,0,0,0,start\n4,1,1,-2,switch\n4,3.5,-1,0.5,kill\n");
}

TEST(Simulate, LifetimeMeanIsPhaseType) {
  for (const MapModel& m : {testmodels::m2(0.3, 0.7), testmodels::m3()}) {
    const Simulator sim(m);
    const RVector ref = oracle::phase_type_mean(m);
    for (int i = 0; i < m.size(); ++i) {
      double s1 = 0.0, s2 = 0.0;
      const int n = 20000;
      for (int k = 0; k < n; ++k) {
        PhiloxStream rng(8, stream_id(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k)));
        const PathSummary s = path_summary(sim.run(rng, 0.0, i), m.size(), 0.0, 1.0);
        s1 += s.zeta;
        s2 += s.zeta * s.zeta;
      }
      const double mean = s1 / n, se = std::sqrt((s2 / n - mean * mean) / n);
      EXPECT_LT(std::abs(mean - ref(i)) / se, 4.0) << i;
    }
  }
}

TEST(Simulate, SinglePhaseLifetimeIsExponential) {
  const Simulator sim(testmodels::m1());
  std::vector<double> z;
  for (std::uint64_t k = 0; k < 20000; ++k) {
    PhiloxStream rng(2, k);
    z.push_back(path_summary(sim.run(rng, 0.0, 0), 1, 0.0, 1.0).zeta);
  }
  EXPECT_GT(oracle::ks_pvalue(z, [](double t) { return 1.0 - std::exp(-0.5 * t); }), 1e-3);
}

TEST(MonteCarlo, KillingTransformMatchesMatrixInverse) {
  const MapModel m = testmodels::m2();
  McRequest req;
  req.n = 20000;
  const RVector beta = (RVector(2) << 0.2, 0.1).finished();
  req.probes = {{cplx(0.0, 0.5), beta}, {cplx(-0.4, 0.0), RVector::Zero(2)}};
  const std::vector<McEstimate> e = mc_transform(m, req, {11, 1});
  for (std::size_t k = 0; k < req.probes.size(); ++k) {
    const CMatrix ref = -oracle::psi_matrix(m, req.probes[k].alpha, req.probes[k].beta).inverse() *
                        CMatrix(m.kill.cast<cplx>().asDiagonal());
    expect_z(e[k], ref, 4.0, "killing");
  }
}

TEST(MonteCarlo, SupremumOfSinglePhase) {
  // E[e^{a sup}] = Phi / (Phi - a) for the one-phase model
  McRequest req;
  req.functional = Functional::supremum;
  req.n = 20000;
  req.probes = {{cplx(-1.0, 0.0), RVector::Zero(1)}};
  const McEstimate e = mc_transform(testmodels::m1(), req, {3, 1})[0];
  const double phi = oracle::phi_exp(2.0, 1.0, 1.0, 0.5);
  expect_z(e, CMatrix::Constant(1, 1, phi / (phi + 1.0)), 4.0, "sup");
}

TEST(MonteCarlo, LastExitTransform) {
  const MapModel m = testmodels::m2(0.3, 0.7);
  const RVector beta = (RVector(2) << 0.3, 0.7).finished();
  McRequest req;
  req.functional = Functional::last_exit;
  req.n = 20000;
  req.probes = {{0.0, beta}};
  const McEstimate e = mc_transform(m, req, {4, 1})[0];
  expect_z(e, last_exit_transform(m, beta).cast<cplx>(), 4.0, "last exit");
}

TEST(MonteCarlo, ThreadCountDoesNotChangeResults) {
  McRequest req;
  req.functional = Functional::post_infimum;
  req.n = 3000;
  req.probes = {{cplx(0.3, 0.2), (RVector(2) << 0.1, 0.2).finished()}};
  const McOptions one{21, 1, 512}, four{21, 4, 512};
  const McEstimate a = mc_transform(testmodels::m3(), req, one)[0];
  const McEstimate b = mc_transform(testmodels::m3(), req, four)[0];
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.se_re, b.se_re);
  EXPECT_EQ(a.count, b.count);
}

TEST(MonteCarlo, TooFewPaths) {
  McRequest req;
  req.n = 999;
  req.probes = {{0.0, RVector::Zero(2)}};
  EXPECT_THROW(mc_transform(testmodels::m2(), req, {}), InsufficientSamples);
}

TEST(Simulate, EventDrivenFunctionalsAgainstFineGrid) {
  const double h = 1e-6;
  int compared = 0;
  for (const MapModel& m : {testmodels::m2(), testmodels::m3()}) {
    const Simulator sim(m);
    double max_slope = 0.0;
    for (const auto& c : m.levy) max_slope = std::max(max_slope, std::abs(c.drift));
    for (std::uint64_t k = 0; k < 50; ++k) {
      PhiloxStream rng(17, k);
      const Path p = sim.run(rng, 0.0, static_cast<int>(k % 2));
      const PathSummary s = path_summary(p, m.size(), 0.0, 1.0);
      double g_sup = 0.0, g_inf = 0.0, g_sigma = 0.0, g_tau = std::numeric_limits<double>::infinity();
      double start = 0.0, x = p.x0, shortest = std::numeric_limits<double>::infinity();
      std::uint64_t step = 0;
      for (const Event& e : p.events) {
        shortest = std::min(shortest, e.dt);
        for (; step * h < start + e.dt; ++step) {
          const double t = step * h;
          const double v = x + e.slope * (t - start);
          g_sup = std::max(g_sup, v);
          g_inf = std::min(g_inf, v);
          if (v <= 0.0) g_sigma = t;
          if (v > 1.0 && t < g_tau) g_tau = t;
        }
        x += e.slope * e.dt + e.jump;
        start += e.dt;
      }
      const double res = max_slope * h + 1e-12;
      EXPECT_LE(g_sup, s.x_sup + 1e-12) << k;
      EXPECT_GE(g_inf, s.x_inf - 1e-12) << k;
      EXPECT_LE(g_sigma, s.sigma + 1e-12) << k;
      if (s.tau_reached) EXPECT_GE(g_tau, s.tau - 1e-12) << k;
      if (shortest > 2.0 * h) {
        ++compared;
        EXPECT_LE(s.x_sup - g_sup, res) << k;
        EXPECT_LE(g_inf - s.x_inf, res) << k;
        if (s.sigma_continuous) EXPECT_LE(s.sigma - g_sigma, h + 1e-12) << k;
        if (s.creep) EXPECT_LE(g_tau - s.tau, h + 1e-12) << k;
      }
    }
  }
  EXPECT_GT(compared, 90);
}
