#include <gtest/gtest.h>

#include "nogap/finance.hpp"
#include "nogap/partial_min.hpp"
#include "nogap/random_instances.hpp"
#include "oracles.hpp"

using namespace nogap;

namespace {

PlqFunction abs_fn() { return PlqFunction::piecewise_linear({0.0}, {-1.0, 1.0}); }

PartialMinResult run(std::vector<ShiftedTerm> terms) { return partial_min(std::span<const ShiftedTerm>(terms)); }

}  // namespace

TEST(PartialMin, ExactCancellation) {
  auto r = run({{1.0, PlqFunction::quadratic(0.5, 0, 0), -1.0}});
  ASSERT_TRUE(r.h);
  for (double u : {-4.0, 0.0, 2.5}) EXPECT_NEAR((*r.h)(u), 0.0, 1e-14);
}

TEST(PartialMin, SumOfAbsolutes) {
  auto r = run({{1.0, abs_fn(), -1.0}, {1.0, abs_fn(), 1.0}});
  ASSERT_TRUE(r.h);
  for (double u : {-3.0, -0.5, 0.0, 1.0, 4.0}) {
    EXPECT_NEAR((*r.h)(u), 2 * std::abs(u), 1e-12);
    EXPECT_NEAR((*r.h)(u), oracle::partial_min({{1, [](double w) { return std::abs(w); }, -1}, {1, [](double w) { return std::abs(w); }, 1}}, u),
                1e-9);
  }
}

TEST(PartialMin, CounterexampleObjectiveAtZero) {
  const int N = 50;
  auto V = remark3_utility(N);
  auto r = run({{0.75, V, -1.0}, {0.25, V, 1.0}});
  ASSERT_TRUE(r.h);
  auto f = [&](double x) { return 0.75 * oracle::remark3_V(N, -x) + 0.25 * oracle::remark3_V(N, x); };
  double ref = oracle::grid_min(f, 0.0, 60.0, 600);
  EXPECT_NEAR((*r.h)(0.0), ref, 1e-9);
  EXPECT_NEAR((*r.h)(0.0), -(1.0 + oracle::partial_sum(N - 1)), 1e-9);
}

TEST(PartialMin, FixedTermsPassThrough) {
  auto r = run({{2.0, PlqFunction::quadratic(1, 0, 0), 0.0}});
  ASSERT_TRUE(r.h);
  EXPECT_DOUBLE_EQ((*r.h)(3.0), 18.0);
}

TEST(PartialMin, DetectsMinusInfinity) {
  // x -> u + x has slope 1 on the left forever.
  auto r = run({{1.0, PlqFunction::affine(1.0, 0.0), 1.0}});
  EXPECT_TRUE(r.minus_infinity);
  EXPECT_FALSE(r.h);
}

TEST(PartialMin, EmptyDomain) {
  auto r = run({{1.0, PlqFunction::indicator(0, 1), 0.0}, {1.0, PlqFunction::indicator(2, 3), 0.0}});
  EXPECT_FALSE(r.h);
  EXPECT_FALSE(r.minus_infinity);
}

TEST(PartialMin, RejectsNonpositiveWeights) {
  EXPECT_THROW(run({{0.0, abs_fn(), 1.0}}), DomainError);
}

TEST(PartialMin, AgreesWithBruteForceOnRandomTerms) {
  random::Rng rng(17);
  int compared = 0;
  for (int rep = 0; rep < 120; ++rep) {
    int k = random::uniform_int(rng, 1, 3);
    std::vector<ShiftedTerm> terms;
    std::vector<oracle::Term> ref;
    for (int i = 0; i < k; ++i) {
      auto f = random::plq(rng, 4);
      double d = std::round(random::uniform(rng, -2.0, 2.0) * 4.0) / 4.0;
      double w = random::uniform(rng, 0.2, 1.0);
      terms.push_back({w, f, d});
      ref.push_back({w, f, d});
    }
    PartialMinResult r;
    ASSERT_NO_THROW(r = run(terms)) << rep;
    if (r.minus_infinity || !r.h) continue;
    for (int s = 0; s < 4; ++s) {
      double u = random::uniform(rng, -6.0, 6.0);
      double h = (*r.h)(u);
      // Minimizers can sit hundreds of units out when a quadratic term is flat.
      double o = oracle::partial_min(ref, u, 5000.0);
      if (h == kInf) {
        EXPECT_EQ(o, kInf) << rep;
        continue;
      }
      EXPECT_NEAR(h, o, 1e-7 * std::max(1.0, std::abs(o))) << "rep " << rep << " u " << u;
      ++compared;
    }
  }
  EXPECT_GT(compared, 100);
}

TEST(PartialArgmin, AttainsTheValue) {
  auto V = remark3_utility(10);
  std::vector<ShiftedTerm> terms = {{0.5, PlqFunction::quadratic(1, 0, 0), 1.0}, {0.5, V, -1.0}};
  auto r = run(terms);
  ASSERT_TRUE(r.h);
  for (double u : {-2.0, 0.0, 3.0}) {
    auto x = partial_argmin(terms, u);
    ASSERT_TRUE(x);
    double val = 0.5 * (u + *x) * (u + *x) + 0.5 * V(u - *x);
    EXPECT_NEAR(val, (*r.h)(u), 1e-10);
  }
}
