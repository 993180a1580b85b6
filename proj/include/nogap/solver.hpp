#pragma once

// Primal side of the parametric problem: phi(u) = inf_x E V(u - gains(x)) on a tree.

#include <optional>
#include <string>
#include <vector>

#include "nogap/integrand.hpp"
#include "nogap/program.hpp"

namespace nogap {

enum class SolveStatus { kOptimal, kUnboundedBelow, kInfeasible, kNonAttainedSuspect };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kUnboundedBelow: return "unbounded_below";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kNonAttainedSuspect: return "non_attained_suspect";
  }
  return "?";
}

struct SolveOptions {
  double tol = 1e-8;
  std::vector<double> radii = {1, 10, 100, 1e3, 1e4};
};

struct TraceEntry {
  double radius = 0;
  double value = kInf;
  /// Forward difference of the box value in the radius: negative means the
  /// optimum still improves when the box grows.
  double boundary_slope = 0;
  bool interior = false;  // the box constraint is inactive at the solution
  /// kNonAttainedSuspect while the box value still improves, else kOptimal.
  SolveStatus status = SolveStatus::kOptimal;
};

struct SolveReport {
  SolveStatus status = SolveStatus::kInfeasible;
  double primal_value = kInf;
  double lower_bound = -kInf;  // Lagrangian bound from the final solve
  double certified_gap = kInf; // primal_value - lower_bound
  std::optional<AdaptedProcess> x_star;
  std::optional<AdaptedProcess> recession_direction;  // when unbounded below
  LeafField leaf_multipliers;  // duals of the scenario rows, divided by P
  std::vector<TraceEntry> radius_trace;
  int pivots = 0;
};

namespace detail {

/// min E h(u - gains(x)) over the box |x|_inf <= radius (radius may be inf).
inline ProgramResult solve_box(const AlmIntegrand& I, const PlqFunction& h, const LeafField& u, double radius) {
  const auto& tree = I.tree();
  StrategyLayout lay(tree);
  SeparableProgram prog;
  for (int k = 0; k < lay.size(); ++k) prog.add_var(-radius, radius, 0.0);
  for (int l : tree.leaves()) {
    LinearExpr e = lay.gain(l);
    for (auto& [v, a] : e) a = -a;
    prog.add_term(tree.probability(l), h, u[tree.leaf_index(l)], e);
  }
  return prog.solve();
}

inline bool interior(const ProgramResult& r, double radius) {
  for (double x : r.vars)
    if (std::abs(x) >= radius * (1 - 1e-9)) return false;
  return true;
}

}  // namespace detail

/// Solves (P_u) for the liability u over expanding boxes, each solve certified
/// by a Lagrangian bound; unboundedness is detected by the recession program.
inline SolveReport solve_primal(const AlmIntegrand& I, const LeafField& u, const SolveOptions& opt = {}) {
  const auto& tree = I.tree();
  SolveReport rep;
  if (static_cast<int>(u.size()) != tree.leaf_count()) throw DomainError("solve_primal: liability needs one value per leaf");
  for (double a : u)
    if (!std::isfinite(a)) return rep;  // infeasible
  StrategyLayout lay(tree);

  auto feas = detail::solve_box(I, PlqFunction::indicator(I.V().lo(), I.V().hi()), u, kInf);
  if (feas.status == lp::Status::kInfeasible) return rep;

  auto rec = detail::solve_box(I, I.V_recession(), LeafField(tree.leaf_count(), 0.0), 1.0);
  rep.pivots += rec.pivots;
  if (rec.status == lp::Status::kOptimal && rec.value < -opt.tol) {
    rep.status = SolveStatus::kUnboundedBelow;
    rep.primal_value = -kInf;
    rep.recession_direction = lay.unflatten(rec.vars);
    return rep;
  }

  ProgramResult last;
  bool settled = false;
  for (double M : opt.radii) {
    TraceEntry e{M};
    if (settled) {
      e.value = last.value;
      e.interior = true;
      rep.radius_trace.push_back(e);
      continue;
    }
    last = detail::solve_box(I, I.V(), u, M);
    rep.pivots += last.pivots;
    if (last.status != lp::Status::kOptimal) throw std::runtime_error(std::string("solve_primal: box program ") + lp::to_string(last.status));
    e.value = last.value;
    e.interior = detail::interior(last, M);
    if (e.interior) {
      settled = true;
    } else {
      double dM = 1e-3 * M;
      auto wider = detail::solve_box(I, I.V(), u, M + dM);
      rep.pivots += wider.pivots;
      e.boundary_slope = (wider.value - last.value) / dM;
      if (e.boundary_slope < -opt.tol * (1 + std::abs(e.value))) e.status = SolveStatus::kNonAttainedSuspect;
    }
    rep.radius_trace.push_back(e);
  }
  rep.primal_value = last.value;
  rep.lower_bound = last.lower_bound;
  rep.certified_gap = last.value - last.lower_bound;
  rep.x_star = lay.unflatten(last.vars);
  rep.leaf_multipliers.assign(tree.leaf_count(), 0.0);
  for (int l : tree.leaves()) {
    int k = tree.leaf_index(l);
    rep.leaf_multipliers[k] = last.term_duals[k] / tree.probability(l);
  }
  rep.status = rep.radius_trace.back().status;
  return rep;
}

inline SolveReport solve_primal(const AlmIntegrand& I, const SolveOptions& opt = {}) {
  return solve_primal(I, I.liability(), opt);
}

/// phi at each liability in the batch.
inline std::vector<double> value_function(const AlmIntegrand& I, const std::vector<LeafField>& us,
                                          const SolveOptions& opt = {}) {
  std::vector<double> out;
  for (const auto& u : us) out.push_back(solve_primal(I, u, opt).primal_value);
  return out;
}

/// inf_x E Vinf(u - gains(x)), an LP; -inf when the recession program is unbounded.
inline double recession_value(const AlmIntegrand& I, const LeafField& u) {
  auto r = detail::solve_box(I, I.V_recession(), u, kInf);
  if (r.status == lp::Status::kUnbounded) return -kInf;
  if (r.status == lp::Status::kInfeasible) return kInf;
  if (r.status != lp::Status::kOptimal) throw std::runtime_error("recession_value: LP did not converge");
  return r.value;
}

struct RecessionCheck {
  std::vector<double> alphas;
  std::vector<double> quotients;  // (phi(ubar + a u) - phi(ubar)) / a
  double recession = kInf;        // recession_value(u)
  double tail_slope = kInf;       // slope of phi(ubar + a u) between the last two alphas
  bool nondecreasing = true;
  bool bounded_by_recession = true;
};

/// Difference quotients of phi along u from a reference ubar.
inline RecessionCheck verify_recession_formula(const AlmIntegrand& I, const LeafField& u, const std::vector<double>& alphas,
                                               const LeafField* ubar = nullptr, const SolveOptions& opt = {}) {
  const auto& tree = I.tree();
  LeafField base = ubar ? *ubar : LeafField(tree.leaf_count(), 0.0);
  double phi0 = solve_primal(I, base, opt).primal_value;
  if (!std::isfinite(phi0)) throw DomainError("verify_recession_formula: phi is not finite at the reference point");
  RecessionCheck rc;
  rc.alphas = alphas;
  rc.recession = recession_value(I, u);
  std::vector<double> values;
  for (double a : alphas) {
    LeafField w = base;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += a * u[k];
    // Minimizers drift linearly in alpha along the direction, so the boxes follow.
    SolveOptions scaled = opt;
    for (double& r : scaled.radii) r *= std::max(1.0, a);
    double v = solve_primal(I, w, scaled).primal_value;
    values.push_back(v);
    rc.quotients.push_back((v - phi0) / a);
  }
  double slack = 1e-9;
  for (std::size_t i = 0; i < rc.quotients.size(); ++i) {
    double q = rc.quotients[i];
    if (i > 0 && q < rc.quotients[i - 1] - slack * std::max(1.0, std::abs(q))) rc.nondecreasing = false;
    if (q > rc.recession + slack * std::max(1.0, std::abs(q))) rc.bounded_by_recession = false;
  }
  if (alphas.size() >= 2) {
    std::size_t n = alphas.size();
    rc.tail_slope = (values[n - 1] - values[n - 2]) / (alphas[n - 1] - alphas[n - 2]);
  }
  return rc;
}

}  // namespace nogap
