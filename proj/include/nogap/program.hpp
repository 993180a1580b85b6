#pragma once

// Separable convex programs
//   minimize  sum_i cost_i * var_i + sum_k w_k f_k(const_k + a_k . var)
// with PLQ f_k, linear rows and variable bounds. Each f_k is unfolded into
// one bounded increment variable per piece, anchored at a reference point
// of its domain; convexity makes the increments fill in order, so the
// reformulation is exact. The result carries a Lagrangian lower bound.

#include <optional>
#include <utility>
#include <vector>

#include "nogap/lp.hpp"
#include "nogap/plq.hpp"

namespace nogap {

using LinearExpr = std::vector<std::pair<int, double>>;

struct ProgramResult {
  lp::Status status = lp::Status::kIterationLimit;
  double value = kInf;          // objective re-evaluated exactly at the point
  double lower_bound = -kInf;   // certified by the Lagrangian at the duals
  std::vector<double> vars;
  std::vector<double> term_args;
  std::vector<double> row_duals;  // one per user row
  std::vector<double> term_duals; // one per term (multiplier of its argument)
  int pivots = 0;
};

class SeparableProgram {
 public:
  using Sense = lp::Builder::Sense;

  int add_var(double lo, double hi, double cost = 0.0) {
    int id = b_.add_var(lo, hi, cost);
    user_.push_back(id);
    costs_.push_back(cost);
    return static_cast<int>(user_.size()) - 1;
  }

  void add_row(const LinearExpr& coeffs, Sense sense, double rhs) {
    user_rows_.push_back(b_.add_row(mapped(coeffs), sense, rhs));
  }

  /// Term weight * f(constant + coeffs . var).
  void add_term(double weight, const PlqFunction& f, double constant, const LinearExpr& coeffs) {
    if (!(weight > 0)) throw DomainError("add_term: weight must be positive");
    Term t{weight, f, constant, coeffs};
    LinearExpr row;
    for (auto [v, a] : coeffs) row.push_back({user_[v], -a});
    if (f.is_point_domain()) {
      t.ref = f.lo();
      offset_ += weight * f(f.lo());
      t.row = b_.add_row(row, Sense::kEq, constant - f.lo());
      terms_.push_back(std::move(t));
      return;
    }
    double r = reference(f);
    t.ref = r;
    offset_ += weight * f(r);
    for (std::size_t i = 0; i < f.piece_count(); ++i) {
      const auto& p = f.pieces()[i];
      double l = f.piece_lo(i), h = f.piece_hi(i);
      if (l < r) {  // part left of r: z in [-(e - l), 0]
        double e = std::min(h, r);
        row.push_back({b_.add_var(-(e - l), 0.0, weight * p.slope(e), 2 * weight * p.a), 1.0});
      }
      if (h > r) {
        double s = std::max(l, r);
        row.push_back({b_.add_var(0.0, h - s, weight * p.slope(s), 2 * weight * p.a), 1.0});
      }
    }
    t.row = b_.add_row(row, Sense::kEq, constant - r);
    terms_.push_back(std::move(t));
  }

  int vars() const { return static_cast<int>(user_.size()); }

  ProgramResult solve(int max_iter = 200000) const {
    lp::Problem p = b_.build();
    lp::Solution s = lp::solve(p, max_iter);
    ProgramResult out;
    out.status = s.status;
    out.pivots = s.iterations;
    if (s.status == lp::Status::kUnbounded) {
      out.value = out.lower_bound = -kInf;
      return out;
    }
    if (s.status != lp::Status::kOptimal) return out;
    out.vars.resize(user_.size());
    double value = 0.0;
    for (std::size_t i = 0; i < user_.size(); ++i) {
      out.vars[i] = s.z[user_[i]];
      value += costs_[i] * out.vars[i];
    }
    for (const auto& t : terms_) {
      double arg = t.constant;
      for (auto [v, a] : t.coeffs) arg += a * out.vars[v];
      out.term_args.push_back(arg);
      value = ext_add(value, t.weight * eval_snapped(t.f, arg, 1e-9));
      out.term_duals.push_back(s.duals[t.row]);
    }
    for (int r : user_rows_) out.row_duals.push_back(s.duals[r]);
    out.value = value;
    out.lower_bound = lp::lagrangian_bound(p, s.duals) + offset_;
    return out;
  }

 private:
  struct Term {
    double weight;
    PlqFunction f;
    double constant;
    LinearExpr coeffs;
    double ref = 0.0;
    int row = -1;
  };

  /// A finite domain point at a piece boundary, preferring the one nearest 0.
  static double reference(const PlqFunction& f) {
    std::vector<double> cands;
    if (f.lo() > -kInf) cands.push_back(f.lo());
    if (f.hi() < kInf) cands.push_back(f.hi());
    for (double b : f.breaks()) cands.push_back(b);
    if (cands.empty()) return 0.0;
    double best = cands.front();
    for (double c : cands)
      if (std::abs(c) < std::abs(best)) best = c;
    return best;
  }

  LinearExpr mapped(const LinearExpr& e) const {
    LinearExpr out;
    for (auto [v, a] : e) out.push_back({user_[v], a});
    return out;
  }

  lp::Builder b_;
  std::vector<int> user_;
  std::vector<double> costs_;
  std::vector<int> user_rows_;
  std::vector<Term> terms_;
  double offset_ = 0.0;
};

}  // namespace nogap
