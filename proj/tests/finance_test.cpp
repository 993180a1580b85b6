#include <gtest/gtest.h>

#include "nogap/finance.hpp"
#include "nogap/random_instances.hpp"
#include "oracles.hpp"

using namespace nogap;

namespace {

ScenarioTree one_period(double pu, double up, double down) {
  return ScenarioTree::checked(1, 1, {{std::nullopt, 1.0, {0.0}}, {0, pu, {up}}, {0, 1 - pu, {down}}});
}

ScenarioTree two_period_binomial(double pu, double up, double down) {
  return ScenarioTree::checked(2, 1,
                               {{std::nullopt, 1.0, {0.0}},
                                {0, pu, {up}},
                                {0, 1 - pu, {down}},
                                {1, pu, {2 * up}},
                                {1, 1 - pu, {up + down}},
                                {2, pu, {up + down}},
                                {2, 1 - pu, {2 * down}}});
}

}  // namespace

TEST(CounterexampleModel, Structure) {
  auto m = remark3_model(50);
  EXPECT_EQ(m.tree.size(), 3);
  EXPECT_DOUBLE_EQ(m.tree.probability(1), 0.75);
  EXPECT_DOUBLE_EQ(m.tree.probability(2), 0.25);
  EXPECT_DOUBLE_EQ(m.tree.increment(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.tree.increment(2, 0), -1.0);
  EXPECT_DOUBLE_EQ(m.tail_bound, 1.0 / 49);
  EXPECT_THROW(remark3_model(1), DomainError);
  auto Vs = conjugate(m.V);
  EXPECT_EQ(Vs.lo(), 1.0);
  EXPECT_EQ(Vs.hi(), 3.0);
}

TEST(NaCheck, Examples) {
  EXPECT_TRUE(na_check(remark3_model(10).tree).no_arbitrage);
  auto arb = na_check(one_period(0.5, 1.0, 0.0));
  EXPECT_FALSE(arb.no_arbitrage);
  ASSERT_TRUE(arb.arbitrage);
  auto t = one_period(0.5, 1.0, 0.0);
  auto g = terminal_gains(t, *arb.arbitrage);
  EXPECT_GE(g[0], -1e-12);
  EXPECT_GE(g[1], -1e-12);
  EXPECT_GT(std::max(g[0], g[1]), 1e-9);
  auto flat = ScenarioTree::checked(1, 1, {{std::nullopt, 1.0, {1.0}}, {0, 0.5, {1.0}}, {0, 0.5, {1.0}}});
  EXPECT_TRUE(na_check(flat).no_arbitrage);
}

TEST(MartingaleMeasure, Examples) {
  auto y = find_martingale_measure(remark3_model(10).tree, true);
  ASSERT_TRUE(y);
  EXPECT_NEAR((*y)[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR((*y)[1], 2.0, 1e-12);
  auto flat = ScenarioTree::checked(1, 1, {{std::nullopt, 1.0, {1.0}}, {0, 0.3, {1.0}}, {0, 0.7, {1.0}}});
  auto one = find_martingale_measure(flat, true);
  ASSERT_TRUE(one);
  EXPECT_TRUE(is_martingale_density(flat, *one));
  EXPECT_FALSE(find_martingale_measure(one_period(0.5, 1.0, 0.0), true));
  // Mass on the flat leaf is still a martingale measure, just not an equivalent one.
  auto weak = find_martingale_measure(one_period(0.5, 1.0, 0.0), false);
  ASSERT_TRUE(weak);
  EXPECT_NEAR((*weak)[0], 0.0, 1e-12);
}

TEST(MartingaleMeasure, BinomialClosedForm) {
  for (double pu : {0.2, 0.5, 0.9}) {
    auto t = one_period(pu, 2.0, -0.5);
    double q = oracle::binomial_q(2.0, -0.5);
    auto y = find_martingale_measure(t, true);
    ASSERT_TRUE(y);
    EXPECT_NEAR((*y)[0], q / pu, 1e-12);
    EXPECT_NEAR((*y)[1], (1 - q) / (1 - pu), 1e-12);
  }
}

TEST(MartingaleMeasure, ExistsExactlyWithoutArbitrage) {
  random::Rng rng(61);
  int na = 0, arb = 0;
  for (int rep = 0; rep < 200; ++rep) {
    auto tree = random::tree(rng, {3, 3, 1, 1 + rep % 2, random::coin(rng, 0.5)});
    bool free = na_check(tree).no_arbitrage;
    auto y = find_martingale_measure(tree, true);
    EXPECT_EQ(free, y.has_value()) << rep;
    if (y) { EXPECT_TRUE(is_martingale_density(tree, *y)) << rep; }
    (free ? na : arb)++;
  }
  EXPECT_GT(na, 20);
  EXPECT_GT(arb, 20);
}

TEST(TwoLambda, CounterexampleFiniteOnlyAtThreeHalves) {
  auto m = remark3_model(50);
  auto tl = two_lambda_check(m.tree, m.V, {2.0 / 3.0, 2.0});
  ASSERT_EQ(tl.lambdas_finite.size(), 1u);
  EXPECT_NEAR(tl.lambdas_finite[0], 1.5, 1e-12);
  EXPECT_FALSE(tl.satisfied);
}

TEST(TwoLambda, IndicatorDomainFromZero) {
  // V = u^+ has V* = indicator of [0, 1]; y = 1 keeps lambda y in it for lambda <= 1.
  auto V = PlqFunction::piecewise_linear({0.0}, {0.0, 1.0});
  auto tl = two_lambda_check(one_period(0.5, 1, -1), V, {1.0, 1.0});
  EXPECT_TRUE(tl.satisfied);
  for (auto [lam, val] : tl.evaluated) EXPECT_EQ(val < kInf, lam <= 1.0 + 1e-12) << lam;
}

TEST(TwoLambda, PinsSitOnDomainEdges) {
  auto V = PlqFunction::piecewise_linear({0.0}, {1.0, 3.0});
  auto tl = two_lambda_check(one_period(0.75, 1, -1), V, {2.0 / 3.0, 2.0});
  // lambda y meets 1 or 3 at lambda in {3/2, 9/2, 1/2, 3/2}.
  std::vector<double> want = {0.5, 1.5, 4.5};
  ASSERT_EQ(tl.pins.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(tl.pins[i], want[i], 1e-12);
}

TEST(Elasticity, ReadsTheConjugateDomain) {
  // max(u, 2u): V* = indicator of [1, 2]; 0 lies outside and the domain is bounded.
  auto r = asymptotic_elasticity(PlqFunction::piecewise_linear({0.0}, {1.0, 2.0}));
  EXPECT_FALSE(r.rae1);
  EXPECT_FALSE(r.rae2);
  // u^+: V* = indicator of [0, 1].
  r = asymptotic_elasticity(PlqFunction::piecewise_linear({0.0}, {0.0, 1.0}));
  EXPECT_TRUE(r.rae1);
  EXPECT_FALSE(r.rae2);
  // A quadratic right branch gives V* a quadratic tail.
  PlqFunction q(-kInf, kInf, {0.0}, {{0, 0, 0}, {0.5, 0, 0}});
  r = asymptotic_elasticity(q);
  EXPECT_TRUE(r.rae1);
  EXPECT_TRUE(r.rae2);
  EXPECT_THROW(asymptotic_elasticity(PlqFunction::zero()), DomainError);
}

TEST(Growth, LinearLeftTailFails) {
  // V(lambda u) = lambda u < lambda^gamma u for u < 0 and lambda > 1.
  auto r = growth_condition_check(PlqFunction::affine(1.0, 0.0), 0.5, -1.0);
  EXPECT_FALSE(r.holds);
  ASSERT_TRUE(r.counterexample);
  auto [u, lam] = *r.counterexample;
  EXPECT_LT(lam * u, std::pow(lam, 0.5) * u);
  auto m = remark3_model(50);
  auto c = growth_condition_check(m.V, 0.5, -2.0);
  EXPECT_FALSE(c.holds);
  ASSERT_TRUE(c.counterexample);
  auto [u2, lam2] = *c.counterexample;
  EXPECT_LT(oracle::remark3_V(50, lam2 * u2), std::pow(lam2, 0.5) * oracle::remark3_V(50, u2));
}

TEST(Growth, BoundedBelowHolds) {
  auto V = PlqFunction::piecewise_linear({-1.0, 0.0}, {0.0, 0.5, 2.0}, 0.0, 0.0);
  auto r = growth_condition_check(V, 0.5, -2.0);
  EXPECT_TRUE(r.holds);
  for (double u = -2.0; u > -100; u *= 1.5)
    for (double lam : {1.0, 2.0, 10.0}) EXPECT_GE(V(lam * u), std::pow(lam, 0.5) * V(u));
  EXPECT_THROW(growth_condition_check(V, 1.5, -2.0), DomainError);
  EXPECT_THROW(growth_condition_check(V, 0.5, 1.0), DomainError);
}

TEST(Dp, CounterexampleRoot) {
  const int N = 50;
  auto m = remark3_model(N);
  auto dp = dp_backward(m.tree, m.V);
  EXPECT_NEAR(dp.root_value(0.0), -(1.0 + oracle::partial_sum(N - 1)), 1e-9);
  AlmIntegrand I(m.tree, m.V, {0, 0});
  SolveOptions opt;
  opt.radii = {10, 100};
  EXPECT_NEAR(dp.root_value(0.0), solve_primal(I, opt).primal_value, 1e-9);
}

TEST(Dp, NoTradingKeepsV) {
  auto flat = ScenarioTree::checked(1, 1, {{std::nullopt, 1.0, {1.0}}, {0, 0.5, {1.0}}, {0, 0.5, {1.0}}});
  auto V = PlqFunction::piecewise_linear({-1.0, 2.0}, {0.5, 1.0, 2.0});
  auto dp = dp_backward(flat, V);
  ASSERT_TRUE(dp.value[0]);
  for (double u : {-3.0, 0.0, 1.5, 4.0}) EXPECT_NEAR((*dp.value[0])(u), V(u), 1e-12);
}

TEST(Dp, TwoPeriodBinomialMatchesNestedSearch) {
  auto t = two_period_binomial(0.6, 1.0, -1.0);
  auto V = PlqFunction::piecewise_linear({0.0}, {1.0, 3.0});
  auto dp = dp_backward(t, V);
  ASSERT_TRUE(dp.value[0]);
  auto Vf = [](double w) { return std::max(w, 3 * w); };
  auto stage1 = [&](double w, double up, double down) {
    return oracle::partial_min({{0.6, Vf, up}, {0.4, Vf, down}}, w, 20.0);
  };
  for (double c : {-1.0, 0.0, 0.5, 2.0}) {
    double ref = oracle::partial_min({{0.6, [&](double w) { return stage1(w, 1.0, -1.0); }, 1.0},
                                      {0.4, [&](double w) { return stage1(w, 1.0, -1.0); }, -1.0}},
                                     c, 20.0);
    EXPECT_NEAR(dp.root_value(c), ref, 1e-6) << c;
  }
}

TEST(Dp, GridPathAgreesWithExactOnGrid) {
  random::Rng rng(62);
  for (int rep = 0; rep < 10; ++rep) {
    auto tree = random::tree(rng, {2, 3, 2, 1, true});
    auto V = random::utility(rng, random::UtilityKind::kBoundedBelow);
    auto exact = dp_backward(tree, V);
    std::vector<double> grid;
    for (int k = -8; k <= 8; ++k) grid.push_back(0.5 * k);
    auto approx = dp_backward_grid(tree, V, grid);
    if (!exact.value[0] || !approx.value[0]) continue;
    // Interpolation is exact at the grid only for the last step; compare at stage T-1 nodes.
    for (int n : tree.nodes_at(tree.horizon() - 1))
      for (double u : grid) EXPECT_NEAR((*approx.value[n])(u), (*exact.value[n])(u), 1e-8) << rep;
  }
}
