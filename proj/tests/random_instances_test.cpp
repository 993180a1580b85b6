#include <gtest/gtest.h>

#include "nogap/finance.hpp"
#include "nogap/random_instances.hpp"

using namespace nogap;

TEST(RandomTree, ValidAndShaped) {
  random::Rng rng(71);
  for (int rep = 0; rep < 200; ++rep) {
    random::TreeSpec spec{1 + rep % 4, 3, 1, 1 + rep % 3, rep % 2 == 0};
    auto t = random::tree(rng, spec);
    EXPECT_TRUE(validate_tree(t).empty()) << rep;
    EXPECT_LE(t.horizon(), spec.max_stages);
    EXPECT_EQ(t.assets(), spec.assets);
    for (int n = 0; n < t.size(); ++n) {
      if (t.is_leaf(n)) continue;
      EXPECT_GE(static_cast<int>(t.children(n).size()), spec.min_children);
      EXPECT_LE(static_cast<int>(t.children(n).size()), spec.max_children);
    }
    if (spec.no_arbitrage) { EXPECT_TRUE(na_check(t).no_arbitrage) << rep; }
  }
}

TEST(RandomTree, DeterministicBySeed) {
  random::Rng a(5), b(5), c(6);
  random::TreeSpec spec{3, 3, 2, 2, true};
  auto ta = random::tree(a, spec), tb = random::tree(b, spec), tc = random::tree(c, spec);
  ASSERT_EQ(ta.size(), tb.size());
  for (int n = 0; n < ta.size(); ++n) {
    EXPECT_EQ(ta.node(n).prob, tb.node(n).prob);
    EXPECT_EQ(ta.node(n).price, tb.node(n).price);
  }
  bool differs = ta.size() != tc.size();
  for (int n = 0; !differs && n < ta.size(); ++n) differs = ta.node(n).price != tc.node(n).price;
  EXPECT_TRUE(differs);
}

TEST(RandomUtility, SatisfiesStandingConditions) {
  random::Rng rng(72);
  for (int rep = 0; rep < 300; ++rep) {
    auto kind = static_cast<random::UtilityKind>(rep % 3);
    auto V = random::utility(rng, kind);
    EXPECT_TRUE(utility_violations(V).empty()) << rep;
    EXPECT_NEAR(V(0.0), 0.0, 1e-12);
    if (kind == random::UtilityKind::kBoundedBelow) { EXPECT_EQ(V.left_tail_slope(), 0.0); }
    if (kind == random::UtilityKind::kLinearTails) { EXPECT_TRUE(std::isfinite(V.right_tail_slope())); }
    if (kind == random::UtilityKind::kQuadraticRight) { EXPECT_EQ(V.right_tail_slope(), kInf); }
  }
}

TEST(RandomPlq, ConvexAndWellFormed) {
  random::Rng rng(73);
  for (int rep = 0; rep < 300; ++rep) {
    auto f = random::plq(rng, 6);
    ASSERT_GE(f.piece_count(), 1);
    for (std::size_t i = 0; i < f.breaks().size(); ++i) {
      double x = f.breaks()[i];
      auto g = subgradient(f, x);
      EXPECT_LE(g.lo, g.hi + 1e-12) << rep;
    }
  }
}

TEST(RandomLiability, MatchesLeafCount) {
  random::Rng rng(74);
  auto t = random::tree(rng, {3, 3, 2, 1, true});
  auto u = random::liability(rng, t);
  EXPECT_EQ(static_cast<int>(u.size()), t.leaf_count());
  for (double v : u) EXPECT_TRUE(std::isfinite(v));
}
