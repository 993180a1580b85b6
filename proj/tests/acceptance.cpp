// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "nogap/duality.hpp"
#include "nogap/finance.hpp"
#include "nogap/random_instances.hpp"
#include "oracles.hpp"

using namespace nogap;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body) {
  Outcome o;
  auto t0 = Clock::now();
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s %2d %-28s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool close_rel(double a, double b, double tol) {
  if (a == b) return true;
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Density of the one-period binomial measure from the closed form q = -d/(u-d).
std::pair<double, double> binomial_density(const ScenarioTree& t) {
  double up = t.increment(1, 0), down = t.increment(2, 0);
  double q = oracle::binomial_q(up, down);
  return {q / t.probability(1), (1 - q) / t.probability(2)};
}

Outcome c1() {
  auto m = remark3_model(50);
  auto y = find_martingale_measure(m.tree, true);
  if (!y) return {false, "no measure found"};
  auto [a, b] = binomial_density(m.tree);
  double err = std::max(std::abs((*y)[0] - a), std::abs((*y)[1] - b));
  bool ok = err <= 1e-12 && std::abs(a - 2.0 / 3.0) <= 1e-15 && std::abs(b - 2.0) <= 1e-15;
  return {ok, fmt("density (%.15g, %.15g), err %.2e", (*y)[0], (*y)[1], err)};
}

Outcome c2() {
  auto m = remark3_model(50);
  auto [a, b] = binomial_density(m.tree);
  // dom V* is the closed slope range [V'(-inf), V'(+inf)]; lambda y must sit inside at both leaves.
  double lo = m.V.left_tail_slope(), hi = m.V.right_tail_slope();
  double lam_lo = std::max(lo / a, lo / b), lam_hi = std::min(hi / a, hi / b);
  auto tl = two_lambda_check(m.tree, m.V, {a, b});
  bool ok = !tl.satisfied && tl.lambdas_finite.size() == 1 && std::abs(lam_lo - lam_hi) <= 1e-15;
  for (double l : tl.lambdas_finite) ok = ok && std::abs(l - lam_lo) <= 1e-12;
  bool pinned = false;
  for (double p : tl.pins) pinned = pinned || std::abs(p - 1.5) <= 1e-12;
  ok = ok && pinned;
  return {ok, fmt("finite lambdas %.0f, first %.15g, oracle %.15g", tl.lambdas_finite.size(),
                  tl.lambdas_finite.empty() ? -1.0 : tl.lambdas_finite[0], lam_lo)};
}

Outcome c3() {
  const int N = 200;
  auto t0 = Clock::now();
  auto m = remark3_model(N);
  AlmIntegrand I(m.tree, m.V, {0.0, 0.0});
  SolveOptions opt;
  opt.radii.clear();
  for (double r = 1; r < N - 1; r *= 2) opt.radii.push_back(r);
  opt.radii.push_back(N - 1);
  auto sol = solve_primal(I, opt);
  auto dual = dual_value(I);
  double secs = seconds_since(t0);
  // Box value 0.75 V(-M) + 0.25 V(M) from the slope integral; limit at M = N.
  auto box = [&](double M) { return 0.75 * oracle::remark3_V(N, -M) + 0.25 * oracle::remark3_V(N, M); };
  double limit = box(N);
  bool ok = sol.status == SolveStatus::kNonAttainedSuspect;
  for (std::size_t i = 0; i < sol.radius_trace.size(); ++i) {
    const auto& e = sol.radius_trace[i];
    ok = ok && e.status == SolveStatus::kNonAttainedSuspect && std::abs(e.value - box(e.radius)) <= 1e-9;
    if (i > 0) ok = ok && e.value < sol.radius_trace[i - 1].value;
  }
  double tol = 1.0 / N;
  ok = ok && std::abs(sol.primal_value - limit) <= tol;
  ok = ok && std::abs(dual.dual_value - limit) <= tol;
  ok = ok && std::abs(-phi_conjugate(I, {1.0, 3.0}) - limit) <= tol;
  ok = ok && secs < 1.0;
  return {ok, fmt("primal %.8f dual %.8f limit %.8f", sol.primal_value, dual.dual_value, limit) + fmt(" in %.3fs", secs)};
}

bool same_plq(const PlqFunction& f, const PlqFunction& g, double tol) {
  if (!close_rel(f.lo(), g.lo(), tol) || !close_rel(f.hi(), g.hi(), tol)) return false;
  if (f.breaks().size() != g.breaks().size()) return false;
  for (std::size_t k = 0; k < f.breaks().size(); ++k)
    if (!close_rel(f.breaks()[k], g.breaks()[k], tol)) return false;
  for (std::size_t k = 0; k < f.pieces().size(); ++k) {
    const auto &a = f.pieces()[k], &b = g.pieces()[k];
    double s = std::max({1.0, std::abs(a.a), std::abs(a.b), std::abs(a.c)});
    if (std::max({std::abs(a.a - b.a), std::abs(a.b - b.b), std::abs(a.c - b.c)}) > tol * s) return false;
  }
  return true;
}

Outcome c4() {
  auto t0 = Clock::now();
  random::Rng rng(2024);
  int bad = 0;
  std::vector<PlqFunction> fs, conj;
  for (int i = 0; i < 1000; ++i) {
    auto f = random::plq(rng, 6);
    if (!same_plq(f, conjugate(conjugate(f)), 1e-12)) ++bad;
    if (i < 100) {
      fs.push_back(f);
      conj.push_back(conjugate(f));
    }
  }
  int fenchel_bad = 0;
  double worst = 0;
  for (int k = 0; k < 100000; ++k) {
    const auto& f = fs[k % fs.size()];
    const auto& fs_conj = conj[k % fs.size()];
    double lo = std::isfinite(f.lo()) ? f.lo() : -20, hi = std::isfinite(f.hi()) ? f.hi() : 20;
    double x = random::uniform(rng, lo, hi), y = random::uniform(rng, -10, 10);
    double fx = f(x), fy = fs_conj(y);
    if (!std::isfinite(fx) || !std::isfinite(fy)) continue;
    double slack = fx + fy - x * y;
    double scale = 1e-10 * std::max({1.0, std::abs(fx), std::abs(fy), std::abs(x * y)});
    worst = std::min(worst, slack);
    if (slack < -scale) ++fenchel_bad;
  }
  double secs = seconds_since(t0);
  return {bad == 0 && fenchel_bad == 0 && secs < 10.0,
          fmt("involution misses %.0f, Fenchel misses %.0f, worst slack %.1e", bad, fenchel_bad, worst)};
}

Outcome c5() {
  auto t0 = Clock::now();
  random::Rng rng(55);
  int bad = 0;
  double worst = 0;
  for (int rep = 0; rep < 500; ++rep) {
    auto tree = random::tree(rng, {4, 3, 1, 1 + rep % 2, rep % 2 == 0});
    std::vector<int> dims(tree.horizon() + 1);
    for (int& d : dims) d = random::uniform_int(rng, 0, 3);
    auto v = oracle::random_annihilator(tree, dims, rng);
    auto x = AdaptedProcess::zeros(tree, dims);
    for (auto& node : x.values)
      for (double& a : node) a = random::uniform(rng, -5, 5);
    double p = pairing(tree, x, v);
    auto [direct, abs_sum] = oracle::direct_pairing(tree, x, v);
    // v vanishes at stage T, so the absolute sum alone can be pure roundoff; entries are O(1).
    double scale = std::max(1.0, abs_sum);
    double ratio = std::abs(p) / scale;
    worst = std::max(worst, ratio);
    if (std::abs(p) > 1e-9 * scale || std::abs(direct) > 1e-9 * scale || !is_annihilator(tree, v)) ++bad;
  }
  double secs = seconds_since(t0);
  return {bad == 0 && secs < 5.0, fmt("violations %.0f, worst |E(x.v)|/scale %.1e", bad, worst)};
}

Outcome c6() {
  auto t0 = Clock::now();
  random::Rng rng(66);
  int done = 0, tries = 0, bad = 0;
  double maxgap = 0;
  while (done < 100 && tries < 2000) {
    ++tries;
    auto tree = random::tree(rng, {});
    auto V = random::utility(rng, static_cast<random::UtilityKind>(tries % 3));
    auto u = random::liability(rng, tree);
    AlmIntegrand I(tree, V, u);
    auto g = gap_suite(I, {u}, 1e-6);
    if (!g.asserted) continue;
    ++done;
    maxgap = std::max(maxgap, g.max_gap);
    if (!g.passed || g.max_gap > 1e-6 || g.rows.front().status != SolveStatus::kOptimal) ++bad;
  }
  double secs = seconds_since(t0);
  return {done == 100 && bad == 0 && secs < 60.0,
          fmt("verified %.0f of %.0f drawn, failures %.0f", done, tries, bad) + fmt(", max gap %.1e", maxgap)};
}

Outcome c7() {
  random::Rng rng(77);
  int done = 0, tries = 0, bad = 0;
  double worst_tail = 0, worst_hom = 0;
  std::vector<double> alphas;
  for (int k = 0; k <= 10; ++k) alphas.push_back(std::ldexp(1.0, k));
  while (done < 50 && tries < 500) {
    ++tries;
    auto tree = random::tree(rng, {});
    AlmIntegrand I(tree, random::utility(rng, random::UtilityKind::kLinearTails), {});
    if (!std::isfinite(solve_primal(I, LeafField(tree.leaf_count(), 0.0)).primal_value)) continue;
    auto u = random::liability(rng, tree);
    auto rc = verify_recession_formula(I, u, alphas);
    LeafField su = u;
    for (double& a : su) a *= 2.5;
    double hom = std::abs(recession_value(I, su) - 2.5 * rc.recession) / std::max(1.0, std::abs(rc.recession));
    double tail = std::abs(rc.tail_slope - rc.recession);
    worst_tail = std::max(worst_tail, tail);
    worst_hom = std::max(worst_hom, hom);
    if (!rc.nondecreasing || !rc.bounded_by_recession || tail > 1e-6 || hom > 1e-10) ++bad;
    ++done;
  }
  return {done == 50 && bad == 0, fmt("instances %.0f, failures %.0f, worst tail %.1e", done, bad, worst_tail) +
                                      fmt(", worst homogeneity %.1e", worst_hom)};
}

Outcome c8() {
  random::Rng rng(88);
  int bad = 0;
  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto tree = random::tree(rng, {3, 3, 2, 1 + rep % 2, true});
    auto u = random::liability(rng, tree);
    auto r = superhedge(tree, u);
    LeafField su = u;
    for (double& a : su) a *= 3.0;
    auto s = superhedge(tree, su);
    double scale = std::max(1.0, std::abs(r.price));
    double gap = std::abs(r.price - r.dual_price) / scale;
    double hom = std::abs(s.price - 3.0 * r.price) / (3 * scale);
    worst = std::max({worst, gap, hom});
    if (!std::isfinite(r.price) || gap > 1e-8 || hom > 1e-8) ++bad;
  }
  return {bad == 0, fmt("failures %.0f, worst relative error %.1e", bad, worst)};
}

Outcome c9() {
  random::Rng rng(99);
  int disagree = 0, na = 0;
  auto V = PlqFunction::piecewise_linear({0.0}, {1.0, 3.0});
  for (int rep = 0; rep < 200; ++rep) {
    auto tree = random::tree(rng, {3, 3, 1, 1 + rep % 3, random::coin(rng, 0.5)});
    bool free = na_check(tree).no_arbitrage;
    na += free;
    if (lineality_check(AlmIntegrand(tree, V, {})).is_linear != free) ++disagree;
  }
  return {disagree == 0, fmt("disagreements %.0f (%.0f arbitrage-free of 200)", disagree, na)};
}

Outcome c10() {
  random::Rng rng(1010);
  int done = 0, tries = 0, bad = 0;
  double worst = 0;
  while (done < 50 && tries < 500) {
    ++tries;
    auto tree = random::tree(rng, {});
    auto V = random::utility(rng, static_cast<random::UtilityKind>(tries % 3));
    double c = std::round(random::uniform(rng, -2, 2) * 8) / 8;
    auto s = solve_primal(AlmIntegrand(tree, V, LeafField(tree.leaf_count(), c)));
    if (s.status != SolveStatus::kOptimal) continue;
    double d = std::abs(dp_backward(tree, V).root_value(c) - s.primal_value);
    worst = std::max(worst, d);
    if (d > 1e-6) ++bad;
    ++done;
  }
  return {done == 50 && bad == 0, fmt("instances %.0f, failures %.0f, worst %.1e", done, bad, worst)};
}

}  // namespace

int main() {
  report(1, "martingale-measure", c1);
  report(2, "two-lambda-failure", c2);
  report(3, "non-attainment", c3);
  report(4, "conjugate-calculus", c4);
  report(5, "annihilator-pairing", c5);
  report(6, "zero-gap-suite", c6);
  report(7, "recession-formula", c7);
  report(8, "superhedging-duality", c8);
  report(9, "lineality-vs-na", c9);
  report(10, "dp-consistency", c10);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
