#include <gtest/gtest.h>

#include "nogap/finance.hpp"
#include "nogap/integrand.hpp"
#include "oracles.hpp"

using namespace nogap;

namespace {

constexpr int kN = 50;

AlmIntegrand counterexample(LeafField u = {0, 0}) {
  auto m = remark3_model(kN);
  return AlmIntegrand(m.tree, m.V, u);
}

AdaptedProcess hold(const ScenarioTree& t, double a) {
  auto x = AdaptedProcess::strategy(t);
  x.values[0] = {a};
  return x;
}

ScenarioTree one_period(double pu, double up, double down) {
  return ScenarioTree::checked(1, 1, {{std::nullopt, 1.0, {0.0}}, {0, pu, {up}}, {0, 1 - pu, {down}}});
}

PlqFunction slopes_1_3() { return PlqFunction::piecewise_linear({0.0}, {1.0, 3.0}); }

// Conjugate of the counterexample disutility by grid supremum.
double vstar_oracle(double y) {
  return oracle::conjugate_at([](double u) { return oracle::remark3_V(kN, u); }, y, -3 * kN, 3 * kN);
}

}  // namespace

TEST(UtilityViolations, Conditions) {
  EXPECT_TRUE(utility_violations(slopes_1_3()).empty());
  EXPECT_FALSE(utility_violations(PlqFunction::zero()).empty());
  EXPECT_FALSE(utility_violations(PlqFunction::affine(1.0, 1.0)).empty());
  EXPECT_FALSE(utility_violations(PlqFunction::affine(-1.0, 0.0)).empty());
  EXPECT_FALSE(utility_violations(PlqFunction::indicator(0, kInf)).empty());
  EXPECT_THROW(AlmIntegrand(one_period(0.5, 1, -1), PlqFunction::zero(), {}), DomainError);
  EXPECT_THROW(AlmIntegrand(one_period(0.5, 1, -1), slopes_1_3(), {1, 2, 3}), DomainError);
}

TEST(AlmValue, ZeroStrategyZeroLiability) {
  auto I = counterexample();
  EXPECT_EQ(alm_value(I, AdaptedProcess::strategy(I.tree())), 0.0);
}

TEST(AlmValue, CounterexampleTelescopes) {
  auto I = counterexample();
  for (int m = 1; m <= kN; ++m) {
    double ref = 0.75 * oracle::remark3_V(kN, -m) + 0.25 * oracle::remark3_V(kN, m);
    EXPECT_NEAR(alm_value(I, hold(I.tree(), m)), ref, 1e-11) << m;
    EXPECT_NEAR(ref, -(1.0 + oracle::partial_sum(m - 1)), 1e-11) << m;
  }
}

TEST(AlmValue, TerminalPositionIsInfeasible) {
  auto I = counterexample();
  auto x = AdaptedProcess::strategy(I.tree());
  x.dims[0] = 2;
  EXPECT_THROW(alm_value(I, x), DomainError);
  auto y = AdaptedProcess::strategy(I.tree());
  y.values[1] = {1.0};
  EXPECT_EQ(alm_value(I, y), kInf);
}

TEST(AlmRecession, Examples) {
  auto I = counterexample();
  EXPECT_EQ(alm_recession(I, AdaptedProcess::strategy(I.tree())), 0.0);
  EXPECT_NEAR(alm_recession(I, hold(I.tree(), 1.0)), 0.75 * -1.0 + 0.25 * 3.0, 1e-15);
  // An arbitrage: nonnegative gains, positive on one leaf.
  AlmIntegrand A(one_period(0.5, 1.0, 0.0), slopes_1_3(), {});
  EXPECT_LT(alm_recession(A, hold(A.tree(), 1.0)), 0.0);
}

TEST(AlmConjugate, DensityMultiples) {
  auto I = counterexample();
  LeafField q = {2.0 / 3.0, 2.0};
  EXPECT_EQ(alm_conjugate(I, density_annihilator(I.tree(), q), q), kInf);  // 2/3 lies left of dom V*
  LeafField y = {1.0, 3.0};
  double ref = 0.75 * vstar_oracle(1.0) + 0.25 * vstar_oracle(3.0);
  EXPECT_NEAR(alm_conjugate(I, density_annihilator(I.tree(), y), y), ref, 1e-8);
  EXPECT_NEAR(ref, 1.0 + oracle::partial_sum(kN - 1), 1e-8);
  auto bad = density_annihilator(I.tree(), y);
  bad.values[0][0][0] += 0.5;
  EXPECT_EQ(alm_conjugate(I, bad, y), kInf);
}

TEST(Gamma, ZeroOnTradelessTree) {
  // gamma(0) = inf_y E V*(y) = 0 needs y free; with trading, v = 0 pins y = 0.
  auto flat = ScenarioTree::checked(1, 1, {{std::nullopt, 1.0, {1.0}}, {0, 0.5, {1.0}}, {0, 0.5, {1.0}}});
  AlmIntegrand I(flat, slopes_1_3(), {});
  EXPECT_NEAR(gamma(I, ScenarioProcess::strategy_dual(flat)), 0.0, 1e-15);
  AlmIntegrand J(one_period(0.5, 1, -1), slopes_1_3(), {});
  EXPECT_EQ(gamma(J, ScenarioProcess::strategy_dual(J.tree())), kInf);
}

TEST(Gamma, CounterexampleAtThreeHalves) {
  auto I = counterexample();
  auto v = density_annihilator(I.tree(), {1.0, 3.0});
  double ref = 0.75 * vstar_oracle(1.0) + 0.25 * vstar_oracle(3.0);
  EXPECT_NEAR(gamma(I, v), ref, 1e-8);
  auto y = gamma_minimizer(I, v);
  ASSERT_TRUE(y);
  EXPECT_NEAR((*y)[0], 1.0, 1e-14);
  EXPECT_NEAR((*y)[1], 3.0, 1e-14);
}

TEST(Gamma, InconsistentDirectionIsInfinite) {
  // Two stages: v at stage 0 and 1 must be proportional to the path increments.
  auto t = ScenarioTree::checked(2, 1,
                                 {{std::nullopt, 1.0, {0.0}},
                                  {0, 0.5, {1.0}},
                                  {0, 0.5, {-1.0}},
                                  {1, 0.5, {2.0}},
                                  {1, 0.5, {0.0}},
                                  {2, 0.5, {0.0}},
                                  {2, 0.5, {-2.0}}});
  AlmIntegrand I(t, slopes_1_3(), {});
  auto v = density_annihilator(t, {1, 1, 1, 1});
  EXPECT_LT(gamma(I, v), kInf);
  v.values[1][0][0] = 5.0;
  EXPECT_EQ(gamma(I, v), kInf);
}

TEST(Certificate, LemmaConstructionIsValid) {
  AlmIntegrand I(one_period(0.5, 1, -1), slopes_1_3(), {});
  auto v = density_annihilator(I.tree(), {1.0, 1.0});
  auto cert = lemma_certificate(I, v, 1.0);
  ASSERT_TRUE(cert);
  auto chk = check_certificate(I, *cert);
  EXPECT_TRUE(chk.valid);
  EXPECT_TRUE(chk.annihilator);
  EXPECT_TRUE(chk.lambda_positive);
  EXPECT_GE(chk.worst_margin, -1e-12);
}

TEST(Certificate, ZeroLambdaPassesWithoutAttainmentFlag) {
  AlmIntegrand I(one_period(0.5, 1, -1), slopes_1_3(), {});
  auto cert = *lemma_certificate(I, density_annihilator(I.tree(), {1.0, 1.0}), 1.0);
  cert.lambda = 0.0;
  auto chk = check_certificate(I, cert);
  EXPECT_TRUE(chk.valid);
  EXPECT_FALSE(chk.lambda_positive);
}

TEST(Certificate, InflatedBetaYieldsWitness) {
  AlmIntegrand I(one_period(0.5, 1, -1), slopes_1_3(), {});
  auto cert = *lemma_certificate(I, density_annihilator(I.tree(), {1.0, 1.0}), 1.0);
  cert.beta[1] += 1.0;
  auto chk = check_certificate(I, cert);
  EXPECT_FALSE(chk.valid);
  ASSERT_TRUE(chk.witness);
  EXPECT_EQ(chk.witness->leaf, 2);
  EXPECT_LT(chk.witness->lhs, chk.witness->rhs);
}

TEST(Certificate, OffSpanDirectionYieldsWitness) {
  AlmIntegrand I(one_period(0.5, 1, 0), slopes_1_3(), {});
  auto v = ScenarioProcess::strategy_dual(I.tree());
  v.values[0][1] = {1.0};  // the down leaf has a zero increment
  LowerBoundCertificate cert{v, 1.0, {0.0, 0.0}, std::nullopt};
  auto chk = check_certificate(I, cert);
  EXPECT_FALSE(chk.valid);
  ASSERT_TRUE(chk.witness);
  EXPECT_LT(chk.witness->lhs, chk.witness->rhs);
}

TEST(Lineality, Examples) {
  EXPECT_TRUE(lineality_check(counterexample()).is_linear);
  AlmIntegrand A(one_period(0.5, 1.0, 0.0), slopes_1_3(), {});
  auto r = lineality_check(A);
  EXPECT_FALSE(r.is_linear);
  ASSERT_TRUE(r.violating_direction);
  EXPECT_GT(r.violating_direction->values[0][0], 0.0);
  auto flat = ScenarioTree::checked(1, 1, {{std::nullopt, 1.0, {1.0}}, {0, 0.5, {1.0}}, {0, 0.5, {1.0}}});
  EXPECT_TRUE(lineality_check(AlmIntegrand(flat, slopes_1_3(), {})).is_linear);
}
