#pragma once

// Dual side: phi*, the dual problem over density multiples, superhedging,
// and the gap suite that ties the certificates to measured gaps.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nogap/finance.hpp"
#include "nogap/integrand.hpp"
#include "nogap/program.hpp"
#include "nogap/solver.hpp"

namespace nogap {

/// Zero conditional drift of y ds at every inner node (y need not be normalized).
inline bool is_martingale_multiple(const ScenarioTree& tree, const LeafField& y) {
  double mass = expectation(tree, y);
  for (double w : y)
    if (w < 0) return false;
  if (mass == 0.0) return true;
  LeafField q = y;
  for (double& w : q) w /= mass;
  return is_martingale_density(tree, q);
}

/// phi*(y) = E V*(y) when y is a nonnegative multiple of a martingale density, else +inf.
inline double phi_conjugate(const AlmIntegrand& I, const LeafField& y) {
  if (static_cast<int>(y.size()) != I.tree().leaf_count()) throw DomainError("phi_conjugate: y needs one value per leaf");
  if (!is_martingale_multiple(I.tree(), y)) return kInf;
  double total = 0.0;
  for (int l : I.tree().leaves()) {
    total = ext_add(total, I.tree().probability(l) * eval_snapped(I.V_conjugate(), y[I.tree().leaf_index(l)], 1e-12));
    if (total == kInf) break;
  }
  return total;
}

struct DualReport {
  double dual_value = -kInf;
  double upper_bound = kInf;  // certified bound on the dual supremum
  std::optional<LeafField> y_star;
  double gap = kInf;          // primal - dual, when the primal was solved
  std::string status;
};

/// sup_y E(u y) - E V*(y) over nonnegative y with zero conditional drift.
inline DualReport dual_value(const AlmIntegrand& I, const LeafField& u) {
  const auto& tree = I.tree();
  const int L = tree.leaf_count();
  SeparableProgram prog;
  std::vector<int> yv(L);
  for (int l : tree.leaves()) {
    int k = tree.leaf_index(l);
    yv[k] = prog.add_var(0.0, kInf, -tree.probability(l) * u[k]);
    prog.add_term(tree.probability(l), I.V_conjugate(), 0.0, {{yv[k], 1.0}});
  }
  for (int n = 0; n < tree.size(); ++n) {
    if (tree.is_leaf(n)) continue;
    for (int j = 0; j < tree.assets(); ++j) {
      LinearExpr row;
      bool any = false;
      for (int l : tree.leaves_under(n)) {
        double d = tree.increment(tree.ancestor(l, tree.stage(n) + 1), j);
        if (d != 0.0) any = true;
        row.push_back({yv[tree.leaf_index(l)], tree.probability(l) * d});
      }
      if (any) prog.add_row(row, SeparableProgram::Sense::kEq, 0.0);
    }
  }
  auto r = prog.solve();
  DualReport rep;
  rep.status = lp::to_string(r.status);
  if (r.status == lp::Status::kInfeasible) return rep;
  if (r.status == lp::Status::kUnbounded) {
    rep.dual_value = rep.upper_bound = kInf;
    return rep;
  }
  if (r.status != lp::Status::kOptimal) throw std::runtime_error("dual_value: program did not converge");
  rep.dual_value = -r.value;
  rep.upper_bound = -r.lower_bound;
  LeafField y(L);
  for (int k = 0; k < L; ++k) y[k] = std::max(0.0, r.vars[yv[k]]);
  rep.y_star = y;
  return rep;
}

inline DualReport dual_value(const AlmIntegrand& I) { return dual_value(I, I.liability()); }

struct SuperhedgeReport {
  std::string status;      // "optimal", or "unbounded" when (NA) fails
  double price = kInf;     // min c with c + gains(x) >= u
  double dual_price = -kInf;  // sup_Q E_Q u over martingale measures Q << P
  std::optional<AdaptedProcess> strategy;
  std::optional<LeafField> q_density;  // dQ/dP at the dual optimum
};

/// The superhedging primal/dual LP pair, solved independently.
inline SuperhedgeReport superhedge(const ScenarioTree& tree, const LeafField& u) {
  if (static_cast<int>(u.size()) != tree.leaf_count()) throw DomainError("superhedge: claim needs one value per leaf");
  StrategyLayout lay(tree);
  SuperhedgeReport rep;
  {
    lp::Builder b;
    for (int k = 0; k < lay.size(); ++k) b.add_var(-kInf, kInf, 0.0);
    int c = b.add_var(-kInf, kInf, 1.0);
    for (int l : tree.leaves()) {
      LinearExpr g = lay.gain(l);
      g.push_back({c, 1.0});
      b.add_row(g, lp::Builder::Sense::kGe, u[tree.leaf_index(l)]);
    }
    auto s = lp::solve(b.build());
    rep.status = lp::to_string(s.status);
    if (s.status == lp::Status::kUnbounded) rep.price = -kInf;
    if (s.status == lp::Status::kOptimal) {
      rep.price = s.objective;
      rep.strategy = lay.unflatten(std::vector<double>(s.z.data(), s.z.data() + lay.size()));
    }
  }
  {
    const int L = tree.leaf_count();
    lp::Builder b;
    std::vector<int> qv(L);
    std::vector<double> ones(L, 1.0);
    LinearExpr mass;
    for (int l : tree.leaves()) {
      int k = tree.leaf_index(l);
      qv[k] = b.add_var(0.0, kInf, -u[k]);
      mass.push_back({qv[k], 1.0});
    }
    b.add_row(mass, lp::Builder::Sense::kEq, 1.0);
    detail::add_martingale_rows(b, tree, qv, ones);
    auto s = lp::solve(b.build());
    if (s.status == lp::Status::kOptimal) {
      rep.dual_price = -s.objective;
      LeafField y(L);
      for (int l : tree.leaves()) {
        int k = tree.leaf_index(l);
        y[k] = std::max(0.0, s.z[qv[k]]) / tree.probability(l);
      }
      rep.q_density = y;
    }
  }
  return rep;
}

struct Hypotheses {
  bool lineality = false;
  bool two_lambda = false;
  bool certificate_valid = false;
  std::optional<LeafField> density;
  std::vector<double> lambdas;  // the two finite lambdas used
  bool verified() const { return lineality && two_lambda && certificate_valid; }
};

/// Checks the closedness hypotheses through executable certificates: the
/// lineality LP, a martingale density with two finite lambdas, and the
/// lower bound assembled from gamma at those lambdas and checked exactly.
inline Hypotheses check_hypotheses(const AlmIntegrand& I) {
  Hypotheses h;
  h.lineality = lineality_check(I).is_linear;
  h.density = find_martingale_measure(I.tree(), false);
  if (!h.density) return h;
  auto tl = two_lambda_check(I.tree(), I.V(), *h.density);
  h.two_lambda = tl.satisfied;
  if (!tl.satisfied) return h;
  double a = tl.lambdas_finite[0], b = tl.lambdas_finite[1];
  if (a > b) std::swap(a, b);
  h.lambdas = {a, b};
  LeafField ya = *h.density;
  for (double& w : ya) w *= a;
  auto cert = lemma_certificate(I, density_annihilator(I.tree(), ya), b / a - 1.0);
  if (cert) {
    auto chk = check_certificate(I, *cert);
    h.certificate_valid = chk.valid && chk.annihilator && chk.lambda_positive;
  }
  return h;
}

struct GapRow {
  double primal = kInf;
  double dual = -kInf;
  double gap = kInf;
  SolveStatus status = SolveStatus::kInfeasible;
};

struct GapSuiteReport {
  Hypotheses hypotheses;
  std::vector<GapRow> rows;
  double max_gap = 0;
  bool asserted = false;  // hypotheses verified, so gaps were held to tol
  bool passed = true;
};

inline GapSuiteReport gap_suite(const AlmIntegrand& I, const std::vector<LeafField>& probes, double tol,
                                const SolveOptions& opt = {}) {
  GapSuiteReport rep;
  rep.hypotheses = check_hypotheses(I);
  rep.asserted = rep.hypotheses.verified();
  for (const auto& u : probes) {
    GapRow row;
    auto p = solve_primal(I, u, opt);
    auto d = dual_value(I, u);
    row.primal = p.primal_value;
    row.dual = d.dual_value;
    row.status = p.status;
    row.gap = (std::isfinite(row.primal) && std::isfinite(row.dual)) ? row.primal - row.dual
              : row.primal == row.dual                                ? 0.0
                                                                      : kInf;
    rep.max_gap = std::max(rep.max_gap, std::abs(row.gap));
    if (rep.asserted && !(std::abs(row.gap) <= tol)) rep.passed = false;
    rep.rows.push_back(row);
  }
  return rep;
}

inline const char* csv_header() { return "instance,primal,dual,gap,na,two_lambda,attained"; }

}  // namespace nogap
