#pragma once

// Infimal projection h(u) = inf_x sum_k w_k f_k(u + x d_k) for scalar x.
//
// In the (x, u) plane the lines u + x d_k = c, one per breakpoint or finite
// domain end c of f_k, cut the plane into cells on which the objective is a
// single bivariate quadratic. Between consecutive "events" in u the optimal x
// follows one affine law: pinned to a line, or the stationary point of one
// cell. Events are line crossings and the u at which a cell's stationary
// line meets the cell boundary. Each inter-event interval yields one exact
// quadratic piece of h.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "nogap/plq.hpp"

namespace nogap {

struct PartialMinResult {
  /// Present when h is proper.
  std::optional<PlqFunction> h;
  /// The inner minimization is unbounded below wherever it is feasible.
  bool minus_infinity = false;
};

namespace detail {

struct KinkLine {
  std::size_t term;
  double c;  // u + x*d = c
  double d;
  double x_at(double u) const { return (c - u) / d; }
};

/// x -> sum_k w_k f_k(u + x d_k) over the moving terms.
inline std::optional<PlqFunction> slice_in_x(std::span<const ShiftedTerm> terms, double u) {
  std::optional<PlqFunction> acc = PlqFunction::zero();
  for (const auto& t : terms) {
    auto g = affine_precompose(t.f, t.direction, u);
    if (!g) return std::nullopt;
    acc = add(*acc, scale(*g, t.weight));
    if (!acc) return std::nullopt;
  }
  return acc;
}

inline double rel(double x) { return 1e-9 * std::max(1.0, std::abs(x)); }

}  // namespace detail

/// A minimizer x of sum_k w_k f_k(u + x d_k), if the infimum is attained.
inline std::optional<double> partial_argmin(std::span<const ShiftedTerm> terms, double u) {
  std::vector<ShiftedTerm> moving;
  for (const auto& t : terms)
    if (t.direction != 0.0) moving.push_back(t);
  if (moving.empty()) return 0.0;
  auto slice = detail::slice_in_x(moving, u);
  if (!slice) return std::nullopt;
  return minimize(*slice).argmin;
}

inline PartialMinResult partial_min(std::span<const ShiftedTerm> terms) {
  using detail::KinkLine;
  std::optional<PlqFunction> fixed = PlqFunction::zero();
  std::vector<ShiftedTerm> moving;
  for (const auto& t : terms) {
    if (!(t.weight > 0)) throw DomainError("partial_min: weights must be positive");
    if (t.direction == 0.0) {
      if (fixed) fixed = add(*fixed, scale(t.f, t.weight));
    } else {
      moving.push_back(t);
    }
  }
  PartialMinResult out;
  if (!fixed) return out;  // +inf everywhere
  if (moving.empty()) {
    out.h = fixed;
    return out;
  }

  // Unboundedness in x does not depend on u.
  for (double sigma : {1.0, -1.0}) {
    double r = 0.0;
    for (const auto& t : moving) r = ext_add(r, t.weight * recession(t.f)(sigma * t.direction));
    if (r < 0) {
      out.minus_infinity = true;
      return out;
    }
  }

  std::vector<KinkLine> lines;
  for (std::size_t k = 0; k < moving.size(); ++k) {
    const auto& f = moving[k].f;
    double d = moving[k].direction;
    if (f.lo() > -kInf) lines.push_back({k, f.lo(), d});
    for (double c : f.breaks()) lines.push_back({k, c, d});
    if (f.hi() < kInf && f.hi() != f.lo()) lines.push_back({k, f.hi(), d});
  }

  std::vector<double> events;
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const auto &p = lines[i], &q = lines[j];
      // Parallel up to rounding: the lines never cross at a finite u of interest.
      if (std::abs(p.d - q.d) <= 1e-12 * std::max(std::abs(p.d), std::abs(q.d))) continue;
      double x = (p.c - q.c) / (p.d - q.d);
      events.push_back(p.c - x * p.d);
    }
  if (fixed->lo() > -kInf) events.push_back(fixed->lo());
  if (fixed->hi() < kInf) events.push_back(fixed->hi());
  for (double c : fixed->breaks()) events.push_back(c);

  auto dedupe = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    std::vector<double> o;
    for (double x : v)
      if (std::isfinite(x) && (o.empty() || x - o.back() > tol::kCoalesce * std::max(1.0, std::abs(x)))) o.push_back(x);
    v = std::move(o);
  };
  dedupe(events);

  // Active piece of each moving term at (x, u); nullopt if infeasible.
  auto cell_quadratic = [&](double x, double u) -> std::optional<std::vector<Quadratic>> {
    std::vector<Quadratic> qs;
    for (const auto& t : moving) {
      double w = u + x * t.direction;
      if (!t.f.in_domain(w)) return std::nullopt;
      qs.push_back(t.f.pieces()[t.f.piece_index(w)] * t.weight);
    }
    return qs;
  };

  // Stationary law x = alpha*u + gamma of a cell with positive x-curvature.
  auto stationary = [&](const std::vector<Quadratic>& qs) -> std::optional<std::pair<double, double>> {
    double curv = 0, su = 0, s0 = 0, size = 0;
    for (std::size_t k = 0; k < moving.size(); ++k) {
      double d = moving[k].direction;
      curv += qs[k].a * d * d;
      su += 2 * qs[k].a * d;
      s0 += qs[k].b * d;
      size = std::max(size, std::abs(qs[k].b * d));
    }
    // Curvature left over from rounding is treated as none.
    if (!(curv > 1e-14 * std::max(1.0, size))) return std::nullopt;
    return std::make_pair(-su / (2 * curv), -s0 / (2 * curv));
  };

  {
    std::vector<double> extra;
    std::size_t n = events.size();
    for (std::size_t i = 0; i <= n; ++i) {
      double l = i == 0 ? -kInf : events[i - 1], r = i == n ? kInf : events[i];
      double u = detail::interior_point(l, r);
      std::vector<std::pair<double, const KinkLine*>> pos;
      for (const auto& ln : lines) pos.push_back({ln.x_at(u), &ln});
      std::sort(pos.begin(), pos.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (std::size_t g = 0; g <= pos.size(); ++g) {
        double xl = g == 0 ? -kInf : pos[g - 1].first, xr = g == pos.size() ? kInf : pos[g].first;
        if (xr - xl <= 0) continue;
        auto qs = cell_quadratic(detail::interior_point(xl, xr), u);
        if (!qs) continue;
        auto law = stationary(*qs);
        if (!law) continue;
        for (const KinkLine* ln : {g == 0 ? nullptr : pos[g - 1].second, g == pos.size() ? nullptr : pos[g].second}) {
          if (!ln) continue;
          // alpha*u + gamma = (c - u)/d
          double den = law->first + 1.0 / ln->d;
          // Parallel up to rounding: no crossing.
          if (std::abs(den) <= 1e-12 * std::max(std::abs(law->first), std::abs(1.0 / ln->d))) continue;
          double ue = (ln->c / ln->d - law->second) / den;
          if (ue > l && ue < r) extra.push_back(ue);
        }
      }
    }
    events.insert(events.end(), extra.begin(), extra.end());
    dedupe(events);
  }

  // Exact quadratic piece of h on an event interval with representative u.
  auto piece_at = [&](double u) -> std::optional<Quadratic> {
    auto fixed_val = (*fixed)(u);
    if (fixed_val == kInf) return std::nullopt;
    auto slice = detail::slice_in_x(moving, u);
    if (!slice) return std::nullopt;
    auto m = minimize(*slice);
    if (!m.argmin) return std::nullopt;
    double xs = *m.argmin;
    // Affine law x(u) = s*u + t valid on the whole interval.
    double s = 0.0, t = xs;
    const KinkLine* pinned = nullptr;
    for (const auto& ln : lines)
      if (std::abs(ln.x_at(u) - xs) <= detail::rel(xs)) {
        pinned = &ln;
        break;
      }
    std::vector<Quadratic> qs;
    if (pinned) {
      s = -1.0 / pinned->d;
      t = pinned->c / pinned->d;
      // Pieces active just off the pinned line on the optimal side are
      // irrelevant: the value is continuous, so sample exactly on it.
      for (const auto& tm : moving) {
        double w = u + xs * tm.direction;
        qs.push_back(tm.f.pieces()[tm.f.piece_index(std::clamp(w, tm.f.lo(), tm.f.hi()))] * tm.weight);
      }
    } else {
      auto cq = cell_quadratic(xs, u);
      if (!cq) return std::nullopt;
      qs = *cq;
      if (auto law = stationary(qs)) {
        s = law->first;
        t = law->second;
      } else {
        s = 0.0;  // objective independent of x in this cell
        t = xs;
      }
    }
    Quadratic total = fixed->pieces()[fixed->piece_index(u)];
    for (std::size_t k = 0; k < moving.size(); ++k) {
      double d = moving[k].direction;
      // w = u + (s*u + t) * d = (1 + s d) u + t d; a pinned argument is constant
      double slope = 1.0 + s * d;
      if (std::abs(slope) <= 1e-12) slope = 0.0;
      total = total + qs[k].compose(slope, t * d);
    }
    return total;
  };

  auto feasible_at = [&](double u) {
    if ((*fixed)(u) == kInf) return false;
    return detail::slice_in_x(moving, u).has_value();
  };

  std::size_t n = events.size();
  std::vector<double> breaks;
  std::vector<Quadratic> pieces;
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 0; i <= n; ++i) {
    double l = i == 0 ? -kInf : events[i - 1], r = i == n ? kInf : events[i];
    double u = detail::interior_point(l, r);
    if (!feasible_at(u)) continue;
    auto q = piece_at(u);
    if (!q) continue;
    if (pieces.empty()) {
      lo = l;
    } else if (l != hi) {
      break;  // the domain of a convex function is an interval
    } else {
      breaks.push_back(l);
    }
    pieces.push_back(*q);
    hi = r;
  }
  if (pieces.empty()) {
    for (double e : events)
      if (feasible_at(e)) {
        auto slice = detail::slice_in_x(moving, e);
        out.h = PlqFunction(e, e, {}, {{0, 0, (*fixed)(e) + minimize(*slice).value}});
        return out;
      }
    return out;
  }
  // Closed domain: the interval ends are included when feasible.
  if (lo > -kInf && !feasible_at(lo)) lo = std::nextafter(lo, kInf);
  if (hi < kInf && !feasible_at(hi)) hi = std::nextafter(hi, -kInf);
  // Re-anchor constants so that pieces meet exactly at the breakpoints.
  for (std::size_t i = 0; i < breaks.size(); ++i) {
    double x = breaks[i];
    double jump = pieces[i](x) - pieces[i + 1](x);
    if (std::abs(jump) <= 1e-9 * std::max(1.0, std::abs(pieces[i](x)))) pieces[i + 1].c += jump;
  }
  out.h = PlqFunction(lo, hi, breaks, pieces);
  return out;
}

}  // namespace nogap
