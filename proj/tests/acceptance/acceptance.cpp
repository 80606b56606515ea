#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "mapfluct/mapfluct.hpp"
#include "../oracles.hpp"
#include "../test_models.hpp"

using namespace mapfluct;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fix(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

RVector vec2(double a, double b) { return (RVector(2) << a, b).finished(); }

VerifyOptions full_run(int threads = 1, std::uint64_t n = 1'000'000) {
  VerifyOptions o;
  o.seed = kSeed;
  o.n = n;
  o.threads = threads;
  return o;
}

std::string summary(const CheckReport& r) {
  return r.suite + " " + (r.pass ? "ok" : "FAILED") + " max|z|=" + fix(r.max_z()) + " (" + std::to_string(r.checks.size()) +
         " checks)";
}

double max_rel(const RMatrix& a, const RMatrix& b) { return oracle::max_abs(a - b) / std::max(1.0, oracle::max_abs(b)); }

// 1. null vectors, HR = GH and the dual relations on a beta grid
Outcome fundamental_residuals() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<MapModel> models = {testmodels::m1(), testmodels::m2()};
  std::mt19937_64 gen(kSeed);
  for (int k = 0; k < 20; ++k) models.push_back(oracle::random_sn_model(gen, 2 + k % 3, k % 4 == 3));
  double worst = 0.0;
  for (const MapModel& m : models)
    for (double b : {0.0, 0.25, 1.0}) {
      const FundamentalPair p = fundamental_pair(m, RVector::Constant(m.size(), b));
      worst = std::max({worst, null_residual(p.primal), hr_gh_residual(p.primal), p.rel_hat.max()});
    }
  const double secs = seconds_since(t0);
  return {worst < 1e-8 && secs < 5.0, std::to_string(models.size()) + " models x 3 beta, max residual " + sci(worst) + ", " +
                                          fix(secs, 3) + " s"};
}

// 2. single-phase models against the scalar Newton oracle
Outcome levy_reduction() {
  struct Case {
    double drift, sigma2, rate, mu, q;
  };
  const std::vector<Case> cases = {{2.0, 0.0, 1.0, 1.0, 0.5}, {0.7, 0.8, 1.5, 2.0, 0.3}, {1.2, 0.0, 3.0, 4.0, 1.0}, {0.5, 0.4, 0.0, 1.0, 0.2}};
  double worst_g = 0.0, worst_h = 0.0, worst_wh = 0.0;
  for (const Case& c : cases) {
    MapModel m = mapfluct::make_model(1);
    m.levy[0] = {"a", c.drift, c.sigma2, c.rate, std::nullopt};
    if (c.rate > 0.0) m.levy[0].jump_law = JumpLaw::exp_neg(c.mu);
    m.kill << c.q;
    auto psi = [&](double t) { return c.drift * t + 0.5 * c.sigma2 * t * t + c.rate * (c.mu / (c.mu + t) - 1.0); };
    auto dpsi = [&](double t) { return c.drift + c.sigma2 * t - c.rate * c.mu / ((c.mu + t) * (c.mu + t)); };
    const FundamentalSet base = fundamental(m);
    for (double beta : {0.0, 0.3, 2.0}) {
      const double s = c.q + beta;
      const double phi = oracle::newton([&](double t) { return psi(t) - s; }, 3.0 + s);
      const FundamentalSet f = fundamental(m, RVector::Constant(1, beta));
      worst_g = std::max({worst_g, std::abs(f.G(0, 0) + phi) / phi, std::abs(f.R(0, 0) + phi) / phi});
      worst_h = std::max(worst_h, std::abs(f.H(0, 0) - 1.0 / dpsi(phi)) * dpsi(phi));
      const double phi_q = oracle::newton([&](double t) { return psi(t) - c.q; }, 3.0 + c.q);
      for (int k = 0; k < 25; ++k) {
        const cplx a(0.0, -3.0 + 0.25 * k);
        const cplx ps = c.drift * a + 0.5 * c.sigma2 * a * a + c.rate * (c.mu / (c.mu + a) - 1.0);
        const cplx kill = c.q / (s - ps);
        const cplx sup = phi_q / (phi - a);
        const cplx inf = c.q * (phi - a) / (phi_q * (s - ps));
        auto val = [&](WhKind kind) { return wh_factor(base, f, kind, a).value(0, 0); };
        worst_wh = std::max({worst_wh, std::abs(val(WhKind::killing) - kill), std::abs(val(WhKind::sup) - sup),
                             std::abs(val(WhKind::inf) - inf), std::abs(val(WhKind::cond_down) - kill / sup),
                             std::abs(val(WhKind::cond_up) - kill / inf)});
      }
    }
  }
  return {worst_g < 1e-8 && worst_h < 1e-8 && worst_wh < 1e-10,
          "G,R vs -Phi " + sci(worst_g) + ", H vs Phi' " + sci(worst_h) + ", scalar factors on 25 points " + sci(worst_wh)};
}

// 3. factorization identities and necessity of the correction
Outcome factorization() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<cplx> alphas = {cplx(0.0, 0.1), cplx(0.0, 0.5), cplx(0.0, 1.0), cplx(0.0, 2.0), cplx(0.0, 3.0)};
  VerifyOptions o;
  const CheckReport r1 = verify_factorization(testmodels::m1(), alphas, {RVector::Zero(1), RVector::Constant(1, 0.2)}, o);
  const CheckReport r2 = verify_factorization(testmodels::m2(), alphas, {RVector::Zero(2), vec2(0.2, 0.2), vec2(0.3, 0.7)}, o);
  const FundamentalPair base = fundamental_pair(testmodels::m2(0.3, 0.7), RVector::Zero(2));
  const WhResiduals w = wh_residuals(base, alphas, {RVector::Zero(2), vec2(0.2, 0.2)});
  const double secs = seconds_since(t0);
  double worst = 0.0;
  for (const CheckReport* r : {&r1, &r2})
    for (const Check& c : r->checks)
      if (c.gating) worst = std::max(worst, c.score);
  const bool pass = r1.pass && r2.pass && w.max() < 1e-8 && w.naive > 1e-3 && secs < 5.0;
  return {pass, "M1/M2 max residual " + sci(worst) + "; variant q=(0.3,0.7): corrected " + sci(w.max()) + ", naive " +
                    sci(w.naive) + "; " + fix(secs, 3) + " s"};
}

// 4. three routes to the last-exit transform
Outcome sigma_routes() {
  double worst = 0.0;
  const std::vector<std::pair<MapModel, std::vector<RVector>>> cases = {
      {testmodels::m1(), {RVector::Constant(1, 0.0), RVector::Constant(1, 0.3), RVector::Constant(1, 2.0)}},
      {testmodels::m2(), {vec2(0.0, 0.0), vec2(0.3, 0.7), vec2(1.0, 0.1)}}};
  for (const auto& [m, betas] : cases)
    for (const RVector& beta : betas) {
      const LastExitRoutes r = last_exit_routes(m, beta);
      worst = std::max({worst, max_rel(r.splitting, r.reversal), max_rel(r.splitting, r.infimum), max_rel(r.reversal, r.infimum)});
    }
  return {worst < 1e-8, "max entrywise disagreement " + sci(worst)};
}

// 5. Monte Carlo concordance of the joint transforms
Outcome monte_carlo() {
  const auto t0 = std::chrono::steady_clock::now();
  const MapModel m = testmodels::m2();
  const std::vector<RVector> betas = {vec2(0.0, 0.0), vec2(0.3, 0.7)};
  const VerifyOptions o = full_run();
  const std::vector<CheckReport> reports = {
      verify_mc(m, McTarget::killing, {cplx(0.0, 0.5), cplx(0.0, 1.5)}, betas, o),
      verify_mc(m, McTarget::sup, {-1.0, cplx(0.0, 1.0)}, betas, o),
      verify_mc(m, McTarget::inf, {0.5, cplx(0.0, 1.0)}, betas, o),
      verify_mc(m, McTarget::sigma, {0.0}, {vec2(0.3, 0.7)}, o)};
  bool pass = true;
  std::size_t checks = 0;
  double worst = 0.0;
  std::string parts;
  for (const CheckReport& r : reports) {
    pass = pass && r.pass;
    checks += r.checks.size();
    worst = std::max(worst, r.max_z());
    parts += " " + r.suite + "=" + fix(r.max_z());
  }
  const double secs = seconds_since(t0);
  return {pass && secs < 180.0, std::to_string(checks) + " checks, max|z| " + fix(worst) + " (" + parts.substr(1) + "), " +
                                    fix(secs, 1) + " s"};
}

// 6. splitting at the infimum and at the last exit
Outcome splitting() {
  const CheckReport a = verify_splitting(testmodels::m2(), full_run());
  const CheckReport b = verify_splitting(testmodels::m3(), full_run());
  const Simulator sim(testmodels::m3());
  std::uint64_t jumped = 0, total = 0;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    PhiloxStream rng(kSeed, stream_id(200, k));
    jumped += !path_summary(sim.run(rng, 0.0, 0), 2, 0.0, 1.0).inf_attained;
    ++total;
  }
  return {a.pass && b.pass && jumped > 0, "M2 " + summary(a) + "; M3 " + summary(b) + "; infimum left by a jump on " +
                                              fix(100.0 * static_cast<double>(jumped) / static_cast<double>(total), 1) +
                                              "% of M3 paths"};
}

// 7. time reversal identities
Outcome reversal() {
  const MapModel m2 = testmodels::m2();
  TimerevParams tp;
  tp.t = 1.0;
  ReversalParams rp;
  rp.a = 0.0;
  rp.x = 1.0;
  const std::vector<CheckReport> reports = {verify_timerev(m2, tp, full_run()), verify_timerev(testmodels::m3(), tp, full_run()),
                                            verify_reversal(m2, ReversalKind::inf, rp, full_run()),
                                            verify_reversal(m2, ReversalKind::last, rp, full_run()),
                                            verify_reversal(m2, ReversalKind::first, rp, full_run())};
  const char* labels[] = {"timerev M2", "timerev M3", "inf M2", "last M2", "first M2"};
  bool pass = true;
  std::string parts;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    pass = pass && reports[k].pass;
    parts += std::string(k ? ", " : "") + labels[k] + (reports[k].pass ? " ok" : " FAILED") + " max|z|=" + fix(reports[k].max_z());
  }
  return {pass, parts};
}

// 8. initial law of the conditioned process
Outcome initial_law() {
  const CheckReport a = verify_init_law(testmodels::m3(), full_run());
  const CheckReport b = verify_init_law(testmodels::m2(), full_run());
  double p = -1.0;
  for (const Check& c : a.checks)
    if (c.name.rfind("chi-squared", 0) == 0) p = c.observed;
  return {a.pass && b.pass && p > 1e-3, "M3 chi-squared p=" + fix(p, 4) + ", " + summary(a) + "; M2 binned post-supremum " + summary(b)};
}

// 9. reports do not depend on the thread count
Outcome determinism() {
  const std::uint64_t n = 40000;
  const MapModel m2 = testmodels::m2(), m3 = testmodels::m3();
  const std::vector<std::pair<std::string, std::function<CheckReport(const VerifyOptions&)>>> suites = {
      {"identities", [&](const VerifyOptions& o) { return verify_identities(m2, {vec2(0.0, 0.0), vec2(0.3, 0.7)}, o); }},
      {"factorization", [&](const VerifyOptions& o) { return verify_factorization(m2, {cplx(0.0, 1.0)}, {vec2(0.0, 0.0)}, o); }},
      {"mc-killing", [&](const VerifyOptions& o) { return verify_mc(m2, McTarget::killing, {cplx(0.0, 0.5)}, {vec2(0.0, 0.0)}, o); }},
      {"mc-sup", [&](const VerifyOptions& o) { return verify_mc(m2, McTarget::sup, {-1.0}, {vec2(0.3, 0.7)}, o); }},
      {"mc-inf", [&](const VerifyOptions& o) { return verify_mc(m2, McTarget::inf, {0.5}, {vec2(0.3, 0.7)}, o); }},
      {"mc-sigma", [&](const VerifyOptions& o) { return verify_mc(m2, McTarget::sigma, {0.0}, {vec2(0.3, 0.7)}, o); }},
      {"mc-cond-up", [&](const VerifyOptions& o) { return verify_mc(m2, McTarget::cond_up, {-0.5}, {vec2(0.0, 0.0)}, o); }},
      {"mc-cond-down", [&](const VerifyOptions& o) { return verify_mc(m2, McTarget::cond_down, {0.5}, {vec2(0.0, 0.0)}, o); }},
      {"splitting", [&](const VerifyOptions& o) { return verify_splitting(m3, o); }},
      {"timerev", [&](const VerifyOptions& o) { return verify_timerev(m3, {}, o); }},
      {"reversal-inf", [&](const VerifyOptions& o) { return verify_reversal(m2, ReversalKind::inf, {}, o); }},
      {"reversal-last", [&](const VerifyOptions& o) { return verify_reversal(m2, ReversalKind::last, {}, o); }},
      {"reversal-first", [&](const VerifyOptions& o) { return verify_reversal(m2, ReversalKind::first, {}, o); }},
      {"init-law", [&](const VerifyOptions& o) { return verify_init_law(m3, o); }}};
  std::string differing;
  for (const auto& [name, run] : suites) {
    const std::string one = to_json(run(full_run(1, n))).dump();
    for (int t : {4, 8})
      if (to_json(run(full_run(t, n))).dump() != one) differing += " " + name + "@" + std::to_string(t);
  }
  return {differing.empty(), std::to_string(suites.size()) + " suites at N=" + std::to_string(n) + " with 1, 4, 8 threads: " +
                                 (differing.empty() ? std::string("identical") : "differ:" + differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"fundamental residuals", fundamental_residuals},
      {"Levy reduction", levy_reduction},
      {"factorization", factorization},
      {"last-exit routes", sigma_routes},
      {"Monte Carlo concordance", monte_carlo},
      {"splitting", splitting},
      {"time reversal", reversal},
      {"initial law", initial_law},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    failed += !o.pass;
    std::printf("%s  %zu. %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
