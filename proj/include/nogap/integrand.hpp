#pragma once

// The asset-liability integrand f(x, u, w) = V(u - sum_t x_t . ds_{t+1}) + indicator(x_T = 0)
// on a scenario tree, with its recession function, its conjugate, and the
// lower-bound certificates that make the value function closed.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nogap/plq.hpp"
#include "nogap/program.hpp"
#include "nogap/tree.hpp"

namespace nogap {

/// Reasons V fails to be a nondecreasing nonconstant convex function with V(0) = 0.
inline std::vector<std::string> utility_violations(const PlqFunction& V) {
  std::vector<std::string> out;
  if (V.lo() > -kInf) out.push_back("disutility must be finite on (-inf, 0]: domain starts at a finite point");
  if (!(V.left_tail_slope() >= -1e-12)) out.push_back("disutility decreases somewhere (negative left slope)");
  if (V.right_tail_slope() <= 1e-15 && V.hi() == kInf && V.pieces().back().a == 0 && V.pieces().back().b <= 0)
    out.push_back("disutility is constant");
  if (!V.in_domain(0.0) || std::abs(V(0.0)) > 1e-9) out.push_back("disutility must satisfy V(0) = 0");
  return out;
}

/// Flattened strategy coordinates: one block of J variables per non-terminal node.
class StrategyLayout {
 public:
  explicit StrategyLayout(const ScenarioTree& tree) : tree_(&tree), first_(tree.size(), -1) {
    for (int n = 0; n < tree.size(); ++n)
      if (tree.stage(n) < tree.horizon()) {
        first_[n] = count_;
        count_ += tree.assets();
      }
  }
  int size() const { return count_; }
  int var(int node, int asset) const { return first_[node] + asset; }

  /// Coefficients of the terminal gain at a leaf: gain = sum coeff * var.
  LinearExpr gain(int leaf) const {
    LinearExpr e;
    for (int t = 0; t < tree_->horizon(); ++t) {
      int n = tree_->ancestor(leaf, t), c = tree_->ancestor(leaf, t + 1);
      for (int j = 0; j < tree_->assets(); ++j) {
        double d = tree_->increment(c, j);
        if (d != 0.0) e.push_back({var(n, j), d});
      }
    }
    return e;
  }

  /// Stacked increments along the path to a leaf (length T*J).
  std::vector<double> path_increments(int leaf) const {
    std::vector<double> g;
    for (int t = 0; t < tree_->horizon(); ++t)
      for (int j = 0; j < tree_->assets(); ++j) g.push_back(tree_->increment(tree_->ancestor(leaf, t + 1), j));
    return g;
  }

  AdaptedProcess unflatten(const std::vector<double>& z) const {
    AdaptedProcess x = AdaptedProcess::strategy(*tree_);
    for (int n = 0; n < tree_->size(); ++n)
      if (first_[n] >= 0)
        for (int j = 0; j < tree_->assets(); ++j) x.values[n][j] = z[var(n, j)];
    return x;
  }

 private:
  const ScenarioTree* tree_;
  std::vector<int> first_;
  int count_ = 0;
};

class AlmIntegrand {
 public:
  /// Throws DomainError if the tree, V or u is invalid.
  AlmIntegrand(ScenarioTree tree, PlqFunction V, LeafField u)
      : tree_(std::move(tree)), V_(std::move(V)), u_(std::move(u)), Vstar_(conjugate(V_)), Vinf_(recession(V_)) {
    auto tv = validate_tree(tree_);
    if (!tv.empty()) throw DomainError("invalid scenario tree: " + tv.front());
    auto uv = utility_violations(V_);
    if (!uv.empty()) throw DomainError(uv.front());
    if (u_.empty()) u_.assign(tree_.leaf_count(), 0.0);
    if (static_cast<int>(u_.size()) != tree_.leaf_count()) throw DomainError("liability must have one value per leaf");
  }

  const ScenarioTree& tree() const { return tree_; }
  const PlqFunction& V() const { return V_; }
  const PlqFunction& V_conjugate() const { return Vstar_; }
  const PlqFunction& V_recession() const { return Vinf_; }
  const LeafField& liability() const { return u_; }
  StrategyLayout layout() const { return StrategyLayout(tree_); }

  AlmIntegrand with_liability(LeafField u) const { return AlmIntegrand(tree_, V_, std::move(u)); }

 private:
  ScenarioTree tree_;
  PlqFunction V_;
  LeafField u_;
  PlqFunction Vstar_;
  PlqFunction Vinf_;
};

namespace detail {

/// Throws on a profile other than (J, ..., J, n_T); reports whether x_T vanishes.
inline bool strategy_terminal_zero(const AlmIntegrand& I, const AdaptedProcess& x) {
  const auto& tree = I.tree();
  if (static_cast<int>(x.dims.size()) != tree.horizon() + 1 || static_cast<int>(x.values.size()) != tree.size())
    throw DomainError("strategy profile does not match the tree");
  for (int t = 0; t < tree.horizon(); ++t)
    if (x.dims[t] != tree.assets()) throw DomainError("strategy profile must be (J, ..., J, 0)");
  for (int l : tree.leaves())
    for (double a : x.values[l])
      if (a != 0.0) return false;
  return true;
}

template <class Fn>
double expected_over_leaves(const AlmIntegrand& I, const AdaptedProcess& x, Fn&& fn) {
  if (!strategy_terminal_zero(I, x)) return kInf;
  auto gains = terminal_gains(I.tree(), x);
  double total = 0.0;
  for (int l : I.tree().leaves()) {
    int k = I.tree().leaf_index(l);
    total = ext_add(total, I.tree().probability(l) * fn(k, gains[k]));
    if (total == kInf) return kInf;
  }
  return total;
}

}  // namespace detail

/// E V(u - gains(x)), +inf when x_T != 0 or some scenario leaves dom V.
inline double alm_value(const AlmIntegrand& I, const AdaptedProcess& x) {
  return detail::expected_over_leaves(I, x, [&](int k, double g) { return I.V()(I.liability()[k] - g); });
}

/// E V(u - gains(x)) for an explicit liability.
inline double alm_value(const AlmIntegrand& I, const AdaptedProcess& x, const LeafField& u) {
  return detail::expected_over_leaves(I, x, [&](int k, double g) { return I.V()(u[k] - g); });
}

/// E f_inf(x, u) = E Vinf(u - gains(x)); u defaults to 0.
inline double alm_recession(const AlmIntegrand& I, const AdaptedProcess& x, const LeafField* u = nullptr) {
  return detail::expected_over_leaves(I, x, [&](int k, double g) { return I.V_recession()((u ? (*u)[k] : 0.0) - g); });
}

namespace detail {

/// Stacked v components along the path of a leaf (length T*J).
inline std::vector<double> path_v(const AlmIntegrand& I, const ScenarioProcess& v, int leaf) {
  const auto& tree = I.tree();
  std::vector<double> a;
  int k = tree.leaf_index(leaf);
  for (int t = 0; t < tree.horizon(); ++t)
    for (int j = 0; j < tree.assets(); ++j) a.push_back(v.values[t][k][j]);
  return a;
}

inline void check_v_profile(const AlmIntegrand& I, const ScenarioProcess& v) {
  const auto& tree = I.tree();
  if (static_cast<int>(v.dims.size()) != tree.horizon() + 1) throw DomainError("v: stage profile does not match horizon");
  for (int t = 0; t < tree.horizon(); ++t) {
    if (v.dims[t] != tree.assets() || static_cast<int>(v.values[t].size()) != tree.leaf_count())
      throw DomainError("v: profile must be (J, ..., J, *) with one vector per leaf");
    for (const auto& leaf : v.values[t])
      if (static_cast<int>(leaf.size()) != tree.assets()) throw DomainError("v: dimension mismatch");
  }
}

/// Per-leaf reduction a = kappa * G of the stacked v against the stacked increments.
struct LeafPin {
  bool consistent = true;   // a lies in span(G)
  bool pinned = false;      // G != 0, so kappa is determined
  double kappa = 0.0;
  std::vector<double> residual;  // component of a orthogonal to G
};

inline LeafPin pin_leaf(const std::vector<double>& G, const std::vector<double>& a) {
  LeafPin p;
  double gg = 0, ga = 0, scale = 0;
  for (std::size_t i = 0; i < G.size(); ++i) {
    gg += G[i] * G[i];
    ga += G[i] * a[i];
    scale = std::max({scale, std::abs(a[i])});
  }
  p.pinned = gg > 0;
  p.kappa = p.pinned ? ga / gg : 0.0;
  p.residual.resize(a.size());
  double res = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    p.residual[i] = a[i] - p.kappa * G[i];
    res = std::max(res, std::abs(p.residual[i]));
  }
  p.consistent = res <= scaled(tol::kAnnihilator, scale);
  return p;
}

}  // namespace detail

/// E f*(v, y): E V*(y) when y ds_{t+1} + v_t = 0 on every scenario and stage, else +inf.
inline double alm_conjugate(const AlmIntegrand& I, const ScenarioProcess& v, const LeafField& y) {
  detail::check_v_profile(I, v);
  const auto& tree = I.tree();
  StrategyLayout lay(tree);
  double total = 0.0;
  for (int l : tree.leaves()) {
    int k = tree.leaf_index(l);
    auto G = lay.path_increments(l);
    auto a = detail::path_v(I, v, l);
    double scale = std::abs(y[k]);
    for (std::size_t i = 0; i < G.size(); ++i) {
      scale = std::max(scale, std::abs(a[i]));
      if (std::abs(y[k] * G[i] + a[i]) > scaled(tol::kAnnihilator, scale * std::max(1.0, std::abs(G[i])))) return kInf;
    }
    total = ext_add(total, tree.probability(l) * eval_snapped(I.V_conjugate(), y[k]));
    if (total == kInf) return kInf;
  }
  return total;
}

/// The y attaining gamma(v) leaf by leaf, or nothing when gamma(v) = +inf.
inline std::optional<LeafField> gamma_minimizer(const AlmIntegrand& I, const ScenarioProcess& v) {
  detail::check_v_profile(I, v);
  const auto& tree = I.tree();
  StrategyLayout lay(tree);
  const auto& Vs = I.V_conjugate();
  auto free_min = minimize(Vs);
  LeafField y(tree.leaf_count(), 0.0);
  for (int l : tree.leaves()) {
    auto pin = detail::pin_leaf(lay.path_increments(l), detail::path_v(I, v, l));
    if (!pin.consistent) return std::nullopt;
    double yk;
    if (pin.pinned) {
      yk = -pin.kappa;
    } else {
      if (!free_min.argmin) return std::nullopt;  // V* unbounded below cannot happen for proper V
      yk = *free_min.argmin;
    }
    if (eval_snapped(Vs, yk) == kInf) return std::nullopt;
    y[tree.leaf_index(l)] = yk;
  }
  return y;
}

/// gamma(v) = inf_y E f*(v, y).
inline double gamma(const AlmIntegrand& I, const ScenarioProcess& v) {
  auto y = gamma_minimizer(I, v);
  if (!y) return kInf;
  return expectation(I.tree(), [&] {
    LeafField vals(y->size());
    for (std::size_t k = 0; k < y->size(); ++k) vals[k] = eval_snapped(I.V_conjugate(), (*y)[k]);
    return vals;
  }());
}

/// Pointwise lower bound f(x, u, w) >= x.v + lambda [x.v]^+ + beta(w) - g(u, w).
struct LowerBoundCertificate {
  ScenarioProcess v;
  double lambda = 0.0;
  LeafField beta;
  std::optional<std::vector<PlqFunction>> g;  // one per leaf; absent means g = 0
};

/// A point at which the lower bound fails.
struct CertificateWitness {
  int leaf = -1;
  std::vector<double> x;  // stacked (x_0, ..., x_{T-1}) at the scenario
  double u = 0.0;
  double lhs = 0.0;       // f(x, u, w)
  double rhs = 0.0;       // bound at (x, u, w)
};

struct CertificateCheck {
  bool valid = false;
  bool annihilator = false;     // v in the annihilator
  bool lambda_positive = false; // lambda > 0, as needed for attainment
  double worst_margin = kInf;   // min over leaves of the slack in the bound
  std::optional<CertificateWitness> witness;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Some w with V(w) + c w close to its infimum (or below `target` when unattained).
inline double near_argmin_shifted(const PlqFunction& V, double c, double target, double beta_side) {
  auto shifted = add(V, PlqFunction::affine(c, 0.0));
  auto m = minimize(*shifted);
  if (m.argmin) return *m.argmin;
  for (double w = 1.0; w < 1e300; w *= 2) {
    for (double s : {w, -w})
      if ((*shifted)(s) < target - beta_side) return s;
  }
  return 0.0;
}

}  // namespace detail

/// Decides the certificate inequality exactly, leaf by leaf, through conjugates:
/// with a = kappa G, the bound holds for all (x, u) iff a in span(G) and
/// V*(-c) + g*(c) + beta <= 0 for c in {kappa, (1 + lambda) kappa}.
inline CertificateCheck check_certificate(const AlmIntegrand& I, const LowerBoundCertificate& cert) {
  detail::check_v_profile(I, cert.v);
  const auto& tree = I.tree();
  if (static_cast<int>(cert.beta.size()) != tree.leaf_count()) throw DomainError("certificate: beta needs one value per leaf");
  if (cert.g && static_cast<int>(cert.g->size()) != tree.leaf_count())
    throw DomainError("certificate: g needs one function per leaf");
  if (cert.lambda < 0) throw DomainError("certificate: lambda must be nonnegative");
  StrategyLayout lay(tree);
  CertificateCheck out;
  out.annihilator = is_annihilator(tree, cert.v);
  out.lambda_positive = cert.lambda > 0;
  out.valid = true;
  const auto& V = I.V();
  const auto& Vs = I.V_conjugate();
  for (int l : tree.leaves()) {
    int k = tree.leaf_index(l);
    auto G = lay.path_increments(l);
    auto a = detail::path_v(I, cert.v, l);
    auto pin = detail::pin_leaf(G, a);
    double beta = cert.beta[k];
    auto bound_at = [&](const std::vector<double>& x, double u) {
      double xv = detail::dot(x, a);
      double gu = cert.g ? (*cert.g)[k](u) : 0.0;
      return xv + cert.lambda * std::max(0.0, xv) + beta - gu;
    };
    auto lhs_at = [&](const std::vector<double>& x, double u) { return V(u - detail::dot(x, G)); };
    if (!pin.consistent) {
      // Move along the part of a orthogonal to the increments: f stays put, the bound grows.
      double rr = detail::dot(pin.residual, pin.residual);
      double u0 = 0.0;
      double base = lhs_at(std::vector<double>(G.size(), 0.0), u0) - bound_at(std::vector<double>(G.size(), 0.0), u0);
      double scale = (std::max(0.0, base) + 1.0) / rr;
      std::vector<double> x(G.size());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = scale * pin.residual[i];
      out.valid = false;
      out.worst_margin = -kInf;
      if (!out.witness) out.witness = CertificateWitness{l, x, u0, lhs_at(x, u0), bound_at(x, u0)};
      continue;
    }
    for (double c : {pin.kappa, (1.0 + cert.lambda) * pin.kappa}) {
      double vs = eval_snapped(Vs, -c, 1e-12);
      double gs;
      PlqFunction gfun = cert.g ? (*cert.g)[k] : PlqFunction::zero();
      PlqFunction gstar = conjugate(gfun);
      gs = eval_snapped(gstar, c, 1e-12);
      double margin = -(ext_add(ext_add(vs, gs), beta) == kInf ? kInf : vs + gs + beta);
      out.worst_margin = std::min(out.worst_margin, margin);
      double scale = std::max({1.0, std::abs(beta), is_finite(vs) ? std::abs(vs) : 0.0});
      if (margin >= -1e-9 * scale) continue;
      out.valid = false;
      if (out.witness) continue;
      // Build (x, u): w = u - s with s = G.x, u minimizing g(u) - c u, w minimizing V(w) + c w.
      double u = 0.0;
      if (cert.g) {
        auto gm = minimize(*add(gfun, PlqFunction::affine(-c, 0.0)));
        if (gm.argmin) u = *gm.argmin;
      }
      double gpart = gfun(u) - c * u;
      double w = detail::near_argmin_shifted(V, c, -beta, gpart);
      double s = u - w;
      std::vector<double> x(G.size(), 0.0);
      if (pin.pinned) {
        double gg = detail::dot(G, G);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = s * G[i] / gg;
      }
      out.witness = CertificateWitness{l, x, u, lhs_at(x, u), bound_at(x, u)};
    }
  }
  return out;
}

/// The certificate built from gamma finite at v and (1 + lambda) v:
/// beta = -max_i beta^i and g(u) = max_i(-u y^i) with beta^i = V*(y^i) leafwise.
inline std::optional<LowerBoundCertificate> lemma_certificate(const AlmIntegrand& I, const ScenarioProcess& v,
                                                              double lambda) {
  if (!(lambda > 0)) throw DomainError("lemma_certificate: lambda must be positive");
  ScenarioProcess v2 = v;
  for (auto& stage : v2.values)
    for (auto& leaf : stage)
      for (double& a : leaf) a *= 1.0 + lambda;
  auto y1 = gamma_minimizer(I, v);
  auto y2 = gamma_minimizer(I, v2);
  if (!y1 || !y2) return std::nullopt;
  const auto& tree = I.tree();
  LowerBoundCertificate cert{v, lambda, LeafField(tree.leaf_count()), std::vector<PlqFunction>{}};
  for (int k = 0; k < tree.leaf_count(); ++k) {
    double b1 = eval_snapped(I.V_conjugate(), (*y1)[k]), b2 = eval_snapped(I.V_conjugate(), (*y2)[k]);
    cert.beta[k] = -std::max(b1, b2);
    double lo = std::min(-(*y1)[k], -(*y2)[k]), hi = std::max(-(*y1)[k], -(*y2)[k]);
    cert.g->push_back(lo == hi ? PlqFunction::affine(lo, 0.0)
                               : PlqFunction(-kInf, kInf, {0.0}, {{0, lo, 0}, {0, hi, 0}}));
  }
  return cert;
}

/// v_t = -y ds_{t+1}, the annihilator element attached to a density multiple y.
inline ScenarioProcess density_annihilator(const ScenarioTree& tree, const LeafField& y) {
  ScenarioProcess v = ScenarioProcess::strategy_dual(tree);
  for (int l : tree.leaves()) {
    int k = tree.leaf_index(l);
    for (int t = 0; t < tree.horizon(); ++t)
      for (int j = 0; j < tree.assets(); ++j) v.values[t][k][j] = -y[k] * tree.increment(tree.ancestor(l, t + 1), j);
  }
  return v;
}

struct LinealityReport {
  bool is_linear = true;
  std::optional<AdaptedProcess> violating_direction;  // in L while its negative is not
  int lps_solved = 0;
};

/// Whether L = {x : f_inf(x, 0) <= 0 on every scenario, x_T = 0} is a linear space.
/// Per scenario, {w : Vinf(w) <= 0} is one of {0}, (-inf, 0], [0, inf), R, so L is
/// cut out by sign constraints on the gains; L is linear iff every one of them is
/// an implicit equality, decided by one LP per constraint over L within a unit box.
inline LinealityReport lineality_check(const AlmIntegrand& I) {
  const auto& tree = I.tree();
  StrategyLayout lay(tree);
  const auto& Vinf = I.V_recession();
  bool left_ok = Vinf(-1.0) <= 0, right_ok = Vinf(1.0) <= 0;
  // Rows r . x >= 0 where w = -gain.
  std::vector<LinearExpr> rows;
  for (int l : tree.leaves()) {
    LinearExpr gain = lay.gain(l);
    if (gain.empty()) continue;
    if (!right_ok) rows.push_back(gain);  // w <= 0  <=>  gain >= 0
    if (!left_ok) {
      LinearExpr neg = gain;
      for (auto& [v, a] : neg) a = -a;
      rows.push_back(neg);
    }
  }
  LinealityReport rep;
  for (const auto& target : rows) {
    lp::Builder b;
    for (int k = 0; k < lay.size(); ++k) b.add_var(-1.0, 1.0, 0.0);
    for (auto [v, a] : target) b.set_cost(v, -a);  // maximize target . x
    for (const auto& r : rows) b.add_row(r, lp::Builder::Sense::kGe, 0.0);
    auto sol = lp::solve(b.build());
    ++rep.lps_solved;
    if (sol.status != lp::Status::kOptimal || -sol.objective <= 1e-9) continue;
    rep.is_linear = false;
    rep.violating_direction = lay.unflatten(std::vector<double>(sol.z.data(), sol.z.data() + lay.size()));
    break;
  }
  return rep;
}

}  // namespace nogap
