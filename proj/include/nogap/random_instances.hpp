#pragma once

// Seeded generators of trees, PLQ functions and disutilities for the
// randomized suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nogap/finance.hpp"
#include "nogap/plq.hpp"
#include "nogap/tree.hpp"

namespace nogap::random {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

struct TreeSpec {
  int max_stages = 3;
  int max_children = 3;
  int min_children = 2;
  int assets = 1;
  /// Shift increments so that an equivalent martingale measure exists.
  bool no_arbitrage = true;
};

/// Random positive weights summing to one, kept away from zero.
inline std::vector<double> simplex_point(Rng& rng, int n) {
  std::vector<double> w(n);
  double s = 0;
  for (double& x : w) s += (x = uniform(rng, 0.2, 1.0));
  for (double& x : w) x /= s;
  return w;
}

inline ScenarioTree tree(Rng& rng, const TreeSpec& spec) {
  int T = uniform_int(rng, 1, spec.max_stages);
  std::vector<TreeNode> nodes;
  std::vector<double> s0(spec.assets);
  for (double& s : s0) s = uniform(rng, 5.0, 15.0);
  nodes.push_back({std::nullopt, 1.0, s0});
  std::vector<int> frontier = {0};
  for (int t = 0; t < T; ++t) {
    std::vector<int> next;
    for (int n : frontier) {
      int k = uniform_int(rng, spec.min_children, spec.max_children);
      auto prob = simplex_point(rng, k);
      auto q = simplex_point(rng, k);
      std::vector<std::vector<double>> d(k, std::vector<double>(spec.assets));
      for (int j = 0; j < spec.assets; ++j) {
        double drift = 0;
        for (int c = 0; c < k; ++c) {
          // Round increments to a coarse grid so that degenerate ties occur.
          d[c][j] = std::round(uniform(rng, -2.0, 2.0) * 8.0) / 8.0;
          drift += q[c] * d[c][j];
        }
        if (spec.no_arbitrage)
          for (int c = 0; c < k; ++c) d[c][j] -= drift;
      }
      for (int c = 0; c < k; ++c) {
        std::vector<double> price(spec.assets);
        for (int j = 0; j < spec.assets; ++j) price[j] = nodes[n].price[j] + d[c][j];
        nodes.push_back({n, prob[c], price});
        next.push_back(static_cast<int>(nodes.size()) - 1);
      }
    }
    frontier = std::move(next);
  }
  // Renormalize probabilities so that children sum to one in floating point.
  ScenarioTree raw(T, spec.assets, nodes);
  for (int n = 0; n < raw.size(); ++n) {
    const auto& ch = raw.children(n);
    if (ch.empty()) continue;
    double s = 0;
    for (int c : ch) s += nodes[c].prob;
    for (int c : ch) nodes[c].prob /= s;
  }
  return ScenarioTree::checked(T, spec.assets, nodes);
}

/// Random proper closed convex PLQ function with at most max_pieces pieces.
inline PlqFunction plq(Rng& rng, int max_pieces = 6) {
  int n = uniform_int(rng, 1, max_pieces);
  bool lo_finite = coin(rng, 0.3), hi_finite = coin(rng, 0.3);
  std::vector<double> pts;  // breaks plus finite ends, sorted
  int need = n - 1 + (lo_finite ? 1 : 0) + (hi_finite ? 1 : 0);
  for (int i = 0; i < need; ++i) pts.push_back(std::round(uniform(rng, -5.0, 5.0) * 16.0) / 16.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  double lo = -kInf, hi = kInf;
  if (lo_finite && !pts.empty()) {
    lo = pts.front();
    pts.erase(pts.begin());
  }
  if (hi_finite && !pts.empty()) {
    hi = pts.back();
    pts.pop_back();
  }
  std::vector<double> breaks = pts;
  std::vector<Quadratic> pieces;
  double slope = uniform(rng, -3.0, 3.0);
  for (std::size_t i = 0; i <= breaks.size(); ++i) {
    double a = coin(rng, 0.4) ? uniform(rng, 0.1, 2.0) : 0.0;
    Quadratic q;
    if (i == 0) {
      q = {a, slope, uniform(rng, -2.0, 2.0)};
    } else {
      double x = breaks[i - 1];
      double prev_slope = pieces.back().slope(x);
      double s = prev_slope + (coin(rng, 0.2) ? 0.0 : uniform(rng, 0.0, 2.0));
      double v = pieces.back()(x);
      q = {a, s - 2 * a * x, 0};
      q.c = v - q(x);
    }
    pieces.push_back(q);
  }
  return PlqFunction(lo, hi, breaks, pieces);
}

enum class UtilityKind { kBoundedBelow, kLinearTails, kQuadraticRight };

/// Nondecreasing nonconstant convex V with V(0) = 0. For kLinearTails the tail
/// slopes have ratio above `ratio`, which makes E V*(lambda y) finite on an
/// interval of lambda for any density y with max y / min y < ratio.
inline PlqFunction utility(Rng& rng, UtilityKind kind, double ratio = 2.0, int max_pieces = 5) {
  int inner = uniform_int(rng, 1, std::max(1, max_pieces - 1));
  std::vector<double> breaks;
  for (int i = 0; i < inner; ++i) breaks.push_back(std::round(uniform(rng, -4.0, 4.0) * 8.0) / 8.0);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> slopes;
  double first = kind == UtilityKind::kBoundedBelow ? 0.0 : uniform(rng, 0.3, 1.0);
  double last = kind == UtilityKind::kLinearTails ? first * ratio * uniform(rng, 1.2, 2.0) : first + uniform(rng, 1.0, 3.0);
  slopes.push_back(first);
  for (std::size_t i = 1; i < breaks.size(); ++i) slopes.push_back(first + (last - first) * double(i) / breaks.size());
  slopes.push_back(last);
  std::sort(slopes.begin(), slopes.end());
  PlqFunction pl = PlqFunction::piecewise_linear(breaks, slopes, 0.0, 0.0);
  if (kind != UtilityKind::kQuadraticRight) return pl;
  // Replace the right tail by a quadratic with matching slope at the last break.
  auto br = pl.breaks();
  auto pieces = pl.pieces();
  if (br.empty()) {
    br.push_back(0.0);
    pieces = {Quadratic{0, pieces.front().b, 0}, pieces.front()};
  }
  double x = br.back();
  double a = uniform(rng, 0.05, 0.5);
  Quadratic q{a, pieces.back().slope(x) - 2 * a * x, 0};
  q.c = pieces.back()(x) - q(x);
  pieces.back() = q;
  double shift = PlqFunction(-kInf, kInf, br, pieces)(0.0);
  for (auto& p : pieces) p.c -= shift;
  return PlqFunction(-kInf, kInf, br, pieces);
}

/// Random liability on the leaves.
inline LeafField liability(Rng& rng, const ScenarioTree& tree, double scale = 2.0) {
  LeafField u(tree.leaf_count());
  for (double& a : u) a = std::round(uniform(rng, -scale, scale) * 16.0) / 16.0;
  return u;
}

}  // namespace nogap::random
