#include <gtest/gtest.h>

#include "mapfluct/verify.hpp"
#include "oracles.hpp"
#include "test_models.hpp"

using namespace mapfluct;

namespace {

VerifyOptions small(std::uint64_t seed = 5, std::uint64_t n = 20000) {
  VerifyOptions o;
  o.seed = seed;
  o.n = n;
  return o;
}

RVector vec2(double a, double b) { return (RVector(2) << a, b).finished(); }

const Check* find(const CheckReport& r, const std::string& prefix) {
  for (const auto& c : r.checks)
    if (c.name.rfind(prefix, 0) == 0) return &c;
  return nullptr;
}

}  // namespace

TEST(Identities, SinglePhaseResidualsVanish) {
  const CheckReport r = verify_identities(testmodels::m1(), {RVector::Zero(1), RVector::Constant(1, 0.3)});
  EXPECT_TRUE(r.pass);
  for (const auto& c : r.checks)
    if (!c.statistical && c.tol > 0.0 && c.expected == 0.0) EXPECT_LT(c.score, 1e-10) << c.name;
}

TEST(Identities, TwoPhaseModelIncludingIntegralEquation) {
  const CheckReport r = verify_identities(testmodels::m2(), {RVector::Zero(2), vec2(0.3, 0.7)});
  EXPECT_TRUE(r.pass);
  const Check* fg = find(r, "G integral equation row 1");
  ASSERT_NE(fg, nullptr);
  EXPECT_LT(fg->score, 1e-8);
}

TEST(Factorization, CorrectionIsNecessary) {
  const std::vector<cplx> alphas = {cplx(0, 0.5), cplx(0, 1.5)};
  const CheckReport r = verify_factorization(testmodels::m2(0.3, 0.7), alphas, {RVector::Zero(2), vec2(0.2, 0.2)});
  EXPECT_TRUE(r.pass);
  const Check* naive = find(r, "naive correction");
  ASSERT_NE(naive, nullptr);
  EXPECT_FALSE(naive->gating);
  EXPECT_GT(naive->score, 1e-3);
  const CheckReport one = verify_factorization(testmodels::m1(), alphas, {RVector::Zero(1)});
  EXPECT_TRUE(find(one, "naive correction")->pass);
}

TEST(MonteCarloSuite, AllTargetsOnTwoPhaseModel) {
  const MapModel m = testmodels::m2();
  const std::vector<RVector> betas = {RVector::Zero(2), vec2(0.2, 0.1)};
  EXPECT_TRUE(verify_mc(m, McTarget::killing, {cplx(0, 0.5), cplx(0, 1.5)}, betas, small()).pass);
  EXPECT_TRUE(verify_mc(m, McTarget::sup, {-1.0, cplx(0, 1.0)}, betas, small()).pass);
  EXPECT_TRUE(verify_mc(m, McTarget::inf, {0.5, cplx(0, 1.0)}, betas, small()).pass);
  EXPECT_TRUE(verify_mc(m, McTarget::sigma, {}, {vec2(0.3, 0.7)}, small()).pass);
  EXPECT_TRUE(verify_mc(m, McTarget::cond_up, {-0.5}, {RVector::Zero(2)}, small()).pass);
  EXPECT_TRUE(verify_mc(m, McTarget::cond_down, {0.5}, {RVector::Zero(2)}, small()).pass);
}

TEST(MonteCarloSuite, ScalarSupremumForm) {
  const CheckReport r = verify_mc(testmodels::m1(), McTarget::sup, {-1.0}, {RVector::Zero(1)}, small());
  ASSERT_EQ(r.checks.size(), 1u);
  const double phi = oracle::phi_exp(2.0, 1.0, 1.0, 0.5);
  EXPECT_NEAR(r.checks[0].expected, phi / (phi + 1.0), 1e-12);
  EXPECT_LT(r.checks[0].score, 3.0);
}

TEST(MonteCarloSuite, ConditionalTargetsNeedEnoughEvents) {
  EXPECT_THROW(verify_mc(testmodels::m2(), McTarget::cond_up, {-0.5}, {RVector::Zero(2)}, small(5, 1000)),
               InsufficientSamples);
}

TEST(MonteCarloSuite, BrownianModelsCannotBeSimulated) {
  MapModel m = testmodels::m1();
  m.levy[0].sigma2 = 0.5;
  EXPECT_THROW(verify_mc(m, McTarget::killing, {cplx(0, 1)}, {RVector::Zero(1)}, small()), UnsupportedError);
}

TEST(Splitting, TwoPhaseModels) {
  const CheckReport a = verify_splitting(testmodels::m2(), small());
  EXPECT_TRUE(a.pass);
  const CheckReport b = verify_splitting(testmodels::m3(), small());
  EXPECT_TRUE(b.pass);
  EXPECT_NE(find(a, "control"), nullptr);
}

TEST(Splitting, TooFewConditioningEvents) { EXPECT_THROW(verify_splitting(testmodels::m2(), small(5, 300)), InsufficientSamples); }

TEST(TimeReversal, FixedAndKillingTime) {
  EXPECT_TRUE(verify_timerev(testmodels::m2(), {}, small()).pass);
  EXPECT_TRUE(verify_timerev(testmodels::m3(), {}, small()).pass);
}

TEST(TimeReversal, EqualKillingMakesBothIdentitiesAgree) {
  // with q_i = q the two identities coincide up to the factor q
  const CheckReport r = verify_timerev(testmodels::m2(), {}, small());
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_z(), 4.0);
}

TEST(Reversal, InfimumLastExitFirstPassage) {
  const MapModel m = testmodels::m2();
  EXPECT_TRUE(verify_reversal(m, ReversalKind::inf, {}, small()).pass);
  EXPECT_TRUE(verify_reversal(m, ReversalKind::last, {}, small()).pass);
  EXPECT_TRUE(verify_reversal(m, ReversalKind::first, {}, small()).pass);
  EXPECT_TRUE(verify_reversal(testmodels::m1(), ReversalKind::first, {}, small()).pass);
}

TEST(Reversal, NeedsSpectrallyNegativeModel) {
  EXPECT_THROW(verify_reversal(testmodels::m3(), ReversalKind::last, {}, small()), UnsupportedError);
}

TEST(InitialLaw, DownPhaseWithUpJumps) {
  const CheckReport r = verify_init_law(testmodels::m3(), small());
  EXPECT_TRUE(r.pass);
}

TEST(InitialLaw, SpectrallyNegativeClosedForm) { EXPECT_TRUE(verify_init_law(testmodels::m2(), small()).pass); }

TEST(InitialLaw, NoUpJumpsGivesVacuousPass) {
  MapModel m = testmodels::m3();
  m.switch_jump[0][1] = JumpLaw::point(0.0);
  m.levy[0].drift = -0.5;
  const CheckReport r = verify_init_law(m, small());
  EXPECT_TRUE(r.pass);
  bool noted = false;
  for (const auto& note : r.notes) noted = noted || note.find("c = 0") != std::string::npos;
  EXPECT_TRUE(noted);
}

TEST(Reports, DeterministicAcrossThreadCounts) {
  VerifyOptions a = small(9, 6000), b = a;
  b.threads = 3;
  const MapModel m = testmodels::m3();
  EXPECT_EQ(to_json(verify_splitting(m, a)).dump(), to_json(verify_splitting(m, b)).dump());
  EXPECT_EQ(to_json(verify_timerev(m, {}, a)).dump(), to_json(verify_timerev(m, {}, b)).dump());
}

TEST(Reports, JsonAndTableLayout) {
  VerifyOptions o = small(3, 2000);
  const CheckReport r = verify_mc(testmodels::m1(), McTarget::killing, {cplx(0, 1)}, {RVector::Zero(1)}, o);
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j.at("suite"), "mc-killing");
  EXPECT_EQ(j.at("seed"), 3);
  EXPECT_EQ(j.at("n"), 2000);
  EXPECT_FALSE(j.contains("runtime_s"));
  EXPECT_EQ(j.at("checks").size(), 2u);
  EXPECT_NE(to_table(r).find("PASS"), std::string::npos);
  o.runtime = true;
  EXPECT_TRUE(to_json(verify_identities(testmodels::m1(), {RVector::Zero(1)}, o)).contains("runtime_s"));
}

TEST(Reports, FailingGatingCheckFailsTheReport) {
  CheckReport r;
  detail::add_z(r, "informational", 0.0, 10.0, 1.0, 4.0, false);
  EXPECT_TRUE(r.pass);
  detail::add_z(r, "gating", 0.0, 10.0, 1.0, 4.0);
  EXPECT_FALSE(r.pass);
  EXPECT_DOUBLE_EQ(r.max_z(), 10.0);
}

TEST(Reports, ManyChecksGetMultipleComparisonNote) {
  const CheckReport r = verify_mc(testmodels::m2(), McTarget::killing, {cplx(0, 0.5), cplx(0, 1), cplx(0, 2), cplx(0, 3)},
                                  {RVector::Zero(2), vec2(0.1, 0.1)}, small(2, 2000));
  ASSERT_GT(r.checks.size(), 50u);
  bool noted = false;
  for (const auto& note : r.notes) noted = noted || note.find("multiple-comparison") != std::string::npos;
  EXPECT_TRUE(noted);
}

TEST(Calibration, FalseAlarmRateOnRandomModels) {
  std::mt19937_64 gen(31);
  std::size_t total = 0, alarms = 0;
  for (int k = 0; k < 20; ++k) {
    const MapModel m = oracle::random_sn_model(gen, 2);
    const VerifyOptions o = small(100 + static_cast<std::uint64_t>(k), 4000);
    for (const CheckReport& r :
         {verify_mc(m, McTarget::killing, {cplx(0, 0.5), cplx(0, 2.0)}, {RVector::Zero(2), vec2(0.2, 0.4)}, o),
          verify_mc(m, McTarget::sup, {-0.5, cplx(0, 1.0)}, {RVector::Zero(2)}, o),
          verify_mc(m, McTarget::inf, {0.5, cplx(0, 1.0)}, {RVector::Zero(2)}, o)})
      for (const auto& c : r.checks)
        if (c.statistical && c.gating && c.se > 0.0) {
          ++total;
          alarms += c.score > 4.0;
        }
  }
  ASSERT_GT(total, 500u);
  EXPECT_LT(static_cast<double>(alarms) / static_cast<double>(total), 0.01) << alarms << " of " << total;
}
