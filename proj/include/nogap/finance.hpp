#pragma once

// Market-side tools: no-arbitrage, martingale measures, the two-lambda
// integrability condition, elasticity and growth tests on V, backward
// induction, and the one-period counterexample model.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nogap/integrand.hpp"
#include "nogap/lp.hpp"
#include "nogap/partial_min.hpp"
#include "nogap/solver.hpp"
#include "nogap/tree.hpp"

namespace nogap {

struct NaReport {
  bool no_arbitrage = true;
  std::optional<AdaptedProcess> arbitrage;
  double objective = 0;  // max E min(gain, 1) over nonnegative gains
};

namespace detail {

/// Rows sum_{leaves under n} q_l ds^j(l) = 0 on leaf masses q, one per node and asset.
inline void add_martingale_rows(lp::Builder& b, const ScenarioTree& tree, const std::vector<int>& leaf_var,
                                const std::vector<double>& leaf_scale) {
  for (int n = 0; n < tree.size(); ++n) {
    if (tree.is_leaf(n)) continue;
    int t = tree.stage(n);
    for (int j = 0; j < tree.assets(); ++j) {
      LinearExpr row;
      bool any = false;
      for (int l : tree.leaves_under(n)) {
        int k = tree.leaf_index(l);
        double d = tree.increment(tree.ancestor(l, t + 1), j);
        if (d != 0.0) any = true;
        row.push_back({leaf_var[k], leaf_scale[k] * d});
      }
      if (any) b.add_row(row, lp::Builder::Sense::kEq, 0.0);
    }
  }
}

}  // namespace detail

/// maximize E tau subject to tau <= gains(x), tau in [0, 1], gains(x) >= 0.
inline NaReport na_check(const ScenarioTree& tree) {
  StrategyLayout lay(tree);
  lp::Builder b;
  for (int k = 0; k < lay.size(); ++k) b.add_var(-kInf, kInf, 0.0);
  for (int l : tree.leaves()) {
    int tau = b.add_var(0.0, 1.0, -tree.probability(l));
    LinearExpr g = lay.gain(l);
    b.add_row(g, lp::Builder::Sense::kGe, 0.0);
    g.push_back({tau, -1.0});
    b.add_row(g, lp::Builder::Sense::kGe, 0.0);
  }
  auto sol = lp::solve(b.build());
  if (sol.status != lp::Status::kOptimal) throw std::runtime_error("na_check: LP did not converge");
  NaReport rep;
  rep.objective = -sol.objective;
  if (rep.objective > 1e-9) {
    rep.no_arbitrage = false;
    rep.arbitrage = lay.unflatten(std::vector<double>(sol.z.data(), sol.z.data() + lay.size()));
  }
  return rep;
}

/// A martingale density y (E y = 1, zero conditional drift), preferring points
/// with all weights positive: the max-min weight solution when its minimum is
/// positive, otherwise the average of the leafwise maximizers.
inline std::optional<LeafField> find_martingale_measure(const ScenarioTree& tree, bool require_equivalent) {
  const int L = tree.leaf_count();
  std::vector<double> P(L);
  for (int l : tree.leaves()) P[tree.leaf_index(l)] = tree.probability(l);
  auto base = [&](lp::Builder& b, std::vector<int>& yv) {
    yv.resize(L);
    for (int k = 0; k < L; ++k) yv[k] = b.add_var(0.0, kInf, 0.0);
    LinearExpr mass;
    for (int k = 0; k < L; ++k) mass.push_back({yv[k], P[k]});
    b.add_row(mass, lp::Builder::Sense::kEq, 1.0);
    detail::add_martingale_rows(b, tree, yv, P);
  };
  auto extract = [&](const lp::Solution& s, const std::vector<int>& yv) {
    LeafField y(L);
    for (int k = 0; k < L; ++k) y[k] = std::max(0.0, s.z[yv[k]]);
    return y;
  };
  {
    lp::Builder b;
    std::vector<int> yv;
    base(b, yv);
    int t = b.add_var(-kInf, kInf, -1.0);
    for (int k = 0; k < L; ++k) b.add_row({{yv[k], 1.0}, {t, -1.0}}, lp::Builder::Sense::kGe, 0.0);
    auto s = lp::solve(b.build());
    if (s.status == lp::Status::kInfeasible) return std::nullopt;
    if (s.status != lp::Status::kOptimal) throw std::runtime_error("find_martingale_measure: LP did not converge");
    if (-s.objective > 1e-12) return extract(s, yv);
    if (require_equivalent) return std::nullopt;
  }
  LeafField avg(L, 0.0);
  for (int target = 0; target < L; ++target) {
    lp::Builder b;
    std::vector<int> yv;
    base(b, yv);
    b.set_cost(yv[target], -1.0);
    auto s = lp::solve(b.build());
    if (s.status != lp::Status::kOptimal) throw std::runtime_error("find_martingale_measure: LP did not converge");
    auto y = extract(s, yv);
    for (int k = 0; k < L; ++k) avg[k] += y[k] / L;
  }
  return avg;
}

struct ElasticityReport {
  bool rae1 = false;
  bool rae2 = false;
  std::string method;  // "closed_form" or "empirical"
};

/// The elasticity conditions read non-vacuously: V*(lambda y) <= C V*(y) must
/// hold at points where V* is finite. For PLQ V this means 0 in dom V* for the
/// small-y condition and dom V* unbounded above for the large-y one, with the
/// constant C read off the extreme pieces.
inline ElasticityReport asymptotic_elasticity(const PlqFunction& V) {
  auto bad = utility_violations(V);
  if (!bad.empty()) throw DomainError("asymptotic_elasticity: " + bad.front());
  auto Vs = conjugate(V);
  ElasticityReport rep{false, false, "closed_form"};
  // V* >= 0 near 0 when finite there: V*(0) = -inf V >= -V(0) = 0, and convexity
  // gives V*(lambda y) <= lambda V*(y) + (1 - lambda) V*(0).
  rep.rae1 = Vs.lo() <= 0.0 && Vs.in_domain(0.0);
  if (Vs.hi() == kInf) {
    const auto& tail = Vs.pieces().back();
    if (tail.a > 0 || tail.b > 0) {
      rep.rae2 = true;  // quadratic or increasing linear tail: ratio tends to lambda^2 or lambda
    } else {
      // Flat or decreasing tail: test the ratio on a geometric grid.
      rep.method = "empirical";
      double ybar = std::max(1.0, Vs.breaks().empty() ? 1.0 : Vs.breaks().back() + 1.0);
      bool ok = true;
      for (double y = ybar; y < 1e8 && ok; y *= 2) {
        double a = Vs(2 * y), c = Vs(y);
        if (!(c > 0) || a / c > 1e6) ok = false;
      }
      rep.rae2 = ok;
    }
  }
  return rep;
}

struct TwoLambdaReport {
  std::vector<std::pair<double, double>> evaluated;  // (lambda, E V*(lambda y))
  std::vector<double> pins;                          // lambdas where lambda y hits the edge of dom V*
  std::vector<double> lambdas_finite;
  bool satisfied = false;
  bool via_elasticity = false;  // a single finite lambda extended through an elasticity condition
};

inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int k = -10; k <= 10; ++k) g.push_back(std::ldexp(1.0, k));
  return g;
}

/// E V*(lambda y) over the grid plus the pins; satisfied iff two distinct lambda > 0 are finite.
inline TwoLambdaReport two_lambda_check(const ScenarioTree& tree, const PlqFunction& V, const LeafField& y,
                                        std::vector<double> grid = default_lambda_grid()) {
  if (static_cast<int>(y.size()) != tree.leaf_count()) throw DomainError("two_lambda_check: y needs one value per leaf");
  auto Vs = conjugate(V);
  TwoLambdaReport rep;
  for (double w : y)
    for (double e : {Vs.lo(), Vs.hi()})
      if (w > 0 && std::isfinite(e) && e / w > 0) rep.pins.push_back(e / w);
  std::sort(rep.pins.begin(), rep.pins.end());
  rep.pins.erase(std::unique(rep.pins.begin(), rep.pins.end(), [](double a, double b) { return near(a, b, 1e-12); }),
                 rep.pins.end());
  std::vector<double> all = grid;
  all.insert(all.end(), rep.pins.begin(), rep.pins.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end(), [](double a, double b) { return near(a, b, 1e-12); }), all.end());
  auto value_at = [&](double lam) {
    double total = 0.0;
    for (int l : tree.leaves()) {
      total = ext_add(total, tree.probability(l) * eval_snapped(Vs, lam * y[tree.leaf_index(l)], 1e-12));
      if (total == kInf) break;
    }
    return total;
  };
  for (double lam : all) {
    if (!(lam > 0)) continue;
    double v = value_at(lam);
    rep.evaluated.push_back({lam, v});
    if (v < kInf) rep.lambdas_finite.push_back(lam);
  }
  rep.satisfied = rep.lambdas_finite.size() >= 2;
  if (rep.lambdas_finite.size() == 1 && utility_violations(V).empty()) {
    auto rae = asymptotic_elasticity(V);
    double lam = rep.lambdas_finite.front();
    for (double cand : {rae.rae1 ? 0.5 * lam : 0.0, rae.rae2 ? 2.0 * lam : 0.0}) {
      if (cand > 0 && value_at(cand) < kInf) {
        rep.lambdas_finite.push_back(cand);
        rep.evaluated.push_back({cand, value_at(cand)});
        rep.satisfied = rep.via_elasticity = true;
        break;
      }
    }
  }
  return rep;
}

struct GrowthReport {
  bool holds = false;
  std::string method;
  std::optional<std::pair<double, double>> counterexample;  // (u, lambda)
};

/// V(lambda u) >= lambda^gamma V(u) for all u <= ubar and lambda >= 1. A positive
/// left tail slope s fails for large |u| since s (lambda - lambda^gamma) u -> -inf;
/// a flat tail satisfies it there, and the finite region is sampled.
inline GrowthReport growth_condition_check(const PlqFunction& V, double gamma, double ubar) {
  if (!(gamma > 0 && gamma < 1)) throw DomainError("growth_condition_check: gamma must lie in (0, 1)");
  if (!(ubar < 0)) throw DomainError("growth_condition_check: reference point must be negative");
  auto bad = utility_violations(V);
  if (!bad.empty()) throw DomainError("growth_condition_check: " + bad.front());
  GrowthReport rep;
  const std::vector<double> lambdas = {1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0, 16.0, 64.0, 1024.0};
  auto violated = [&](double u, double lam) {
    double lhs = V(lam * u), rhs = std::pow(lam, gamma) * V(u);
    return lhs < rhs - 1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
  };
  double s = V.left_tail_slope();
  double first = V.breaks().empty() ? ubar : std::min(ubar, V.breaks().front());
  if (s > 0) {
    rep.method = "closed_form";
    // Walk out until the linear tail dominates.
    for (double u = std::min(ubar, first) - 1.0; u > -1e300; u *= 2)
      for (double lam : lambdas)
        if (violated(u, lam)) {
          rep.counterexample = std::make_pair(u, lam);
          return rep;
        }
    return rep;
  }
  rep.method = "sampled";
  for (double u = ubar; u >= 8 * std::min(first, ubar) - 1.0; u = u * 1.1 - 0.01)
    for (double lam : lambdas)
      if (violated(u, lam)) {
        rep.counterexample = std::make_pair(u, lam);
        return rep;
      }
  rep.holds = true;
  return rep;
}

struct DpResult {
  std::vector<std::optional<PlqFunction>> value;  // per node; absent where +inf or -inf
  std::vector<bool> minus_infinity;               // per node
  bool exact = true;
  std::vector<double> grid;  // for the grid path

  /// E V_0(c) at the root.
  double root_value(double c) const {
    if (minus_infinity[0]) return -kInf;
    if (!value[0]) return kInf;
    return (*value[0])(c);
  }
};

/// V_T = V at the leaves and V_t(u) = inf_x sum_c p_c V_{t+1}^c(u + x ds_c) at
/// inner nodes, by exact partial minimization (single asset).
inline DpResult dp_backward(const ScenarioTree& tree, const PlqFunction& V) {
  if (tree.assets() != 1) throw DomainError("dp_backward: the exact path needs a single asset; use the grid path");
  DpResult r;
  r.value.assign(tree.size(), std::nullopt);
  r.minus_infinity.assign(tree.size(), false);
  for (int n = tree.size() - 1; n >= 0; --n) {
    if (tree.is_leaf(n)) {
      r.value[n] = V;
      continue;
    }
    std::vector<ShiftedTerm> terms;
    bool down = false, empty = false;
    for (int c : tree.children(n)) {
      if (r.minus_infinity[c]) down = true;
      else if (!r.value[c]) empty = true;
      else terms.push_back({tree.node(c).prob, *r.value[c], tree.increment(c, 0)});
    }
    if (empty) continue;
    if (down) {
      r.minus_infinity[n] = true;
      continue;
    }
    auto pm = partial_min(terms);
    r.minus_infinity[n] = pm.minus_infinity;
    r.value[n] = pm.h;
  }
  return r;
}

/// Grid path for any number of assets: V_t on the grid by one LP per grid
/// point, interpolated piecewise linearly on [grid.front(), grid.back()].
inline DpResult dp_backward_grid(const ScenarioTree& tree, const PlqFunction& V, std::vector<double> grid) {
  std::sort(grid.begin(), grid.end());
  if (grid.size() < 2) throw DomainError("dp_backward_grid: need at least two grid points");
  DpResult r;
  r.exact = false;
  r.grid = grid;
  r.value.assign(tree.size(), std::nullopt);
  r.minus_infinity.assign(tree.size(), false);
  for (int n = tree.size() - 1; n >= 0; --n) {
    if (tree.is_leaf(n)) {
      r.value[n] = V;
      continue;
    }
    bool skip = false;
    for (int c : tree.children(n)) {
      if (r.minus_infinity[c]) r.minus_infinity[n] = true;
      if (!r.value[c]) skip = true;
    }
    if (skip || r.minus_infinity[n]) continue;
    std::vector<double> vals;
    for (double u : grid) {
      SeparableProgram prog;
      for (int j = 0; j < tree.assets(); ++j) prog.add_var(-kInf, kInf, 0.0);
      for (int c : tree.children(n)) {
        LinearExpr e;
        for (int j = 0; j < tree.assets(); ++j) e.push_back({j, tree.increment(c, j)});
        prog.add_term(tree.node(c).prob, *r.value[c], u, e);
      }
      auto res = prog.solve();
      if (res.status == lp::Status::kUnbounded) {
        r.minus_infinity[n] = true;
        break;
      }
      vals.push_back(res.status == lp::Status::kOptimal ? res.value : kInf);
    }
    if (r.minus_infinity[n]) continue;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (vals[i] < kInf) {
        xs.push_back(grid[i]);
        ys.push_back(vals[i]);
      }
    if (xs.empty()) continue;
    if (xs.size() == 1) {
      r.value[n] = PlqFunction(xs[0], xs[0], {}, {{0, 0, ys[0]}});
      continue;
    }
    std::vector<double> br(xs.begin() + 1, xs.end() - 1);
    std::vector<Quadratic> pieces;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      double s = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
      pieces.push_back({0, s, ys[i] - s * xs[i]});
    }
    // Enforce nondecreasing slopes against round-off from the LPs.
    for (std::size_t i = 1; i < pieces.size(); ++i)
      if (pieces[i].b < pieces[i - 1].b) {
        pieces[i].b = pieces[i - 1].b;
        pieces[i].c = pieces[i - 1](xs[i]) - pieces[i].b * xs[i];
      }
    r.value[n] = PlqFunction(xs.front(), xs.back(), br, pieces);
  }
  return r;
}

/// Disutility with V' = 1 + 1/n^2 on (-n-1, -n], 2 on (-1, 1] and 3 - 1/n^2 on
/// (n, n+1] for n < N, and slopes 1 / 3 beyond -N / N; V(0) = 0. The slope 2
/// on (-1, 1] makes V convex. V* is finite exactly on [1, 3].
inline PlqFunction remark3_utility(int n_pieces) {
  if (n_pieces < 2) throw DomainError("remark3 model: need at least 2 pieces");
  const int N = n_pieces;
  std::vector<double> breaks, slopes;
  slopes.push_back(1.0);
  for (int n = N - 1; n >= 1; --n) {
    breaks.push_back(-(n + 1.0));
    slopes.push_back(1.0 + 1.0 / (double(n) * n));
  }
  breaks.push_back(-1.0);
  slopes.push_back(2.0);
  breaks.push_back(1.0);
  for (int n = 1; n <= N - 1; ++n) {
    slopes.push_back(3.0 - 1.0 / (double(n) * n));
    breaks.push_back(n + 1.0);
  }
  slopes.push_back(3.0);
  return PlqFunction::piecewise_linear(breaks, slopes, 0.0, 0.0);
}

struct Remark3Model {
  ScenarioTree tree;
  PlqFunction V;
  int n_pieces;
  double tail_bound;  // sum_{n >= N} 1/n^2 <= 1/(N-1), bounding the truncation error
};

/// One period, P(ds = 1) = 3/4, P(ds = -1) = 1/4, with the truncated disutility.
inline Remark3Model remark3_model(int n_pieces = 50) {
  std::vector<TreeNode> nodes = {{std::nullopt, 1.0, {1.0}}, {0, 0.75, {2.0}}, {0, 0.25, {0.0}}};
  return {ScenarioTree::checked(1, 1, nodes), remark3_utility(n_pieces), n_pieces, 1.0 / (n_pieces - 1)};
}

}  // namespace nogap
