#pragma once

// Proper closed convex piecewise linear-quadratic functions of one variable.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nogap/common.hpp"

namespace nogap {

/// a*u^2 + b*u + c
struct Quadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double operator()(double u) const { return (a * u + b) * u + c; }
  double slope(double u) const { return 2.0 * a * u + b; }

  /// u -> q(s*u + t)
  Quadratic compose(double s, double t) const {
    return {a * s * s, (2.0 * a * t + b) * s, (a * t + b) * t + c};
  }
  Quadratic operator+(const Quadratic& o) const { return {a + o.a, b + o.b, c + o.c}; }
  bool operator==(const Quadratic&) const = default;
  Quadratic operator*(double k) const { return {a * k, b * k, c * k}; }
};

struct Interval {
  double lo = -kInf;
  double hi = kInf;
};

class PlqFunction {
 public:
  /// Validates and canonicalizes. Throws DomainError when the data does not
  /// describe a proper closed convex PLQ function.
  PlqFunction(double lo, double hi, std::vector<double> breaks, std::vector<Quadratic> pieces)
      : lo_(lo), hi_(hi), breaks_(std::move(breaks)), pieces_(std::move(pieces)) {
    auto problems = violations(lo_, hi_, breaks_, pieces_);
    if (!problems.empty()) throw DomainError("invalid PLQ function: " + problems.front());
    canonicalize();
  }

  static PlqFunction indicator(double lo, double hi) { return {lo, hi, {}, {{0, 0, 0}}}; }
  static PlqFunction quadratic(double a, double b, double c) { return {-kInf, kInf, {}, {{a, b, c}}}; }
  static PlqFunction affine(double slope, double intercept) { return quadratic(0, slope, intercept); }
  static PlqFunction zero() { return affine(0, 0); }

  /// Continuous piecewise-linear function on R with the given slopes between
  /// breaks, normalized so that f(anchor) = value.
  static PlqFunction piecewise_linear(const std::vector<double>& breaks, const std::vector<double>& slopes,
                                      double anchor = 0.0, double value = 0.0) {
    if (slopes.size() != breaks.size() + 1) throw DomainError("piecewise_linear: need breaks+1 slopes");
    std::vector<Quadratic> pieces(slopes.size());
    // Integrate slopes left to right with an arbitrary constant, then shift.
    double c = 0.0;
    pieces[0] = {0, slopes[0], c};
    for (std::size_t i = 0; i < breaks.size(); ++i) {
      double v = pieces[i](breaks[i]);
      pieces[i + 1] = {0, slopes[i + 1], v - slopes[i + 1] * breaks[i]};
    }
    PlqFunction raw(-kInf, kInf, breaks, pieces);
    double shift = value - raw(anchor);
    for (auto& p : pieces) p.c += shift;
    return {-kInf, kInf, breaks, pieces};
  }

  /// Reasons the raw data fails to be a proper closed convex PLQ function.
  static std::vector<std::string> violations(double lo, double hi, const std::vector<double>& breaks,
                                             const std::vector<Quadratic>& pieces) {
    std::vector<std::string> out;
    auto say = [&out](auto&&... parts) {
      std::ostringstream os;
      (os << ... << parts);
      out.push_back(os.str());
    };
    if (std::isnan(lo) || std::isnan(hi) || lo > hi || lo == kInf || hi == -kInf) {
      say("empty or malformed domain [", lo, ", ", hi, "]");
      return out;
    }
    if (pieces.size() != breaks.size() + 1) {
      say("expected ", breaks.size() + 1, " pieces, got ", pieces.size());
      return out;
    }
    for (std::size_t i = 0; i < breaks.size(); ++i) {
      if (!(breaks[i] > lo && breaks[i] < hi)) say("breakpoint ", breaks[i], " outside open domain");
      if (i > 0 && !(breaks[i] > breaks[i - 1])) say("breakpoints not strictly increasing at ", i);
    }
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const auto& p = pieces[i];
      if (!std::isfinite(p.a) || !std::isfinite(p.b) || !std::isfinite(p.c)) say("piece ", i, " not finite");
      if (p.a < 0) say("piece ", i, " has negative curvature");
    }
    if (!out.empty()) return out;
    for (std::size_t i = 0; i < breaks.size(); ++i) {
      double x = breaks[i];
      double vl = pieces[i](x), vr = pieces[i + 1](x);
      double scale = std::max({1.0, std::abs(vl), std::abs(x)});
      if (std::abs(vl - vr) > 1e-8 * scale) say("discontinuous at ", x, ": ", vl, " vs ", vr);
      double sl = pieces[i].slope(x), sr = pieces[i + 1].slope(x);
      if (sl > sr + 1e-8 * std::max({1.0, std::abs(sl), std::abs(sr)}))
        say("slope decreases at ", x, ": ", sl, " > ", sr);
    }
    return out;
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<Quadratic>& pieces() const { return pieces_; }
  std::size_t piece_count() const { return pieces_.size(); }
  double piece_lo(std::size_t i) const { return i == 0 ? lo_ : breaks_[i - 1]; }
  double piece_hi(std::size_t i) const { return i + 1 == pieces_.size() ? hi_ : breaks_[i]; }
  bool is_point_domain() const { return lo_ == hi_; }
  bool in_domain(double u) const { return u >= lo_ && u <= hi_; }

  /// Index of the piece containing u (right piece at a breakpoint). Requires u in domain.
  std::size_t piece_index(double u) const {
    return static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), u) - breaks_.begin());
  }

  double operator()(double u) const {
    if (!in_domain(u)) return kInf;
    return pieces_[piece_index(u)](u);
  }

  bool is_piecewise_linear() const {
    return std::all_of(pieces_.begin(), pieces_.end(), [](const Quadratic& q) { return q.a == 0.0; });
  }

  /// Slope of the first / last piece at the unbounded end (+-inf if curved or absent).
  double left_tail_slope() const {
    if (lo_ > -kInf || pieces_.front().a > 0) return -kInf;
    return pieces_.front().b;
  }
  double right_tail_slope() const {
    if (hi_ < kInf || pieces_.back().a > 0) return kInf;
    return pieces_.back().b;
  }

  bool operator==(const PlqFunction& o) const = default;

 private:
  void canonicalize() {
    if (lo_ == hi_) {
      double v = pieces_[piece_index(lo_)](lo_);
      breaks_.clear();
      pieces_ = {{0, 0, v}};
      return;
    }
    auto same = [](const Quadratic& p, const Quadratic& q) {
      auto eq = [](double x, double y) { return std::abs(x - y) <= tol::kCoalesce * std::max({1.0, std::abs(x), std::abs(y)}); };
      return eq(p.a, q.a) && eq(p.b, q.b) && eq(p.c, q.c);
    };
    std::vector<double> nb;
    std::vector<Quadratic> np{pieces_.front()};
    for (std::size_t i = 0; i < breaks_.size(); ++i) {
      const auto& next = pieces_[i + 1];
      bool tiny = !nb.empty() && breaks_[i] - nb.back() <= tol::kCoalesce * std::max(1.0, std::abs(breaks_[i]));
      if (tiny) {
        // Drop the sliver piece between two nearly equal breakpoints.
        np.back() = next;
        if (np.size() >= 2 && same(np[np.size() - 2], np.back())) {
          np.pop_back();
          nb.pop_back();
        }
        continue;
      }
      if (same(np.back(), next)) continue;
      nb.push_back(breaks_[i]);
      np.push_back(next);
    }
    breaks_ = std::move(nb);
    pieces_ = std::move(np);
  }

  double lo_;
  double hi_;
  std::vector<double> breaks_;
  std::vector<Quadratic> pieces_;
};

inline double eval(const PlqFunction& f, double u) { return f(u); }

/// Evaluation that snaps points within `rel_tol` of a finite domain endpoint onto it.
inline double eval_snapped(const PlqFunction& f, double u, double rel_tol = 1e-12) {
  if (u < f.lo() && f.lo() - u <= rel_tol * std::max(1.0, std::abs(f.lo()))) u = f.lo();
  if (u > f.hi() && u - f.hi() <= rel_tol * std::max(1.0, std::abs(f.hi()))) u = f.hi();
  return f(u);
}

/// [left derivative, right derivative] at u. Throws outside the domain.
inline Interval subgradient(const PlqFunction& f, double u) {
  if (!f.in_domain(u)) throw DomainError("subgradient: point outside domain");
  if (f.is_point_domain()) return {-kInf, kInf};
  std::size_t i = f.piece_index(u);
  const auto& br = f.breaks();
  Interval g;
  bool at_break = i > 0 && br[i - 1] == u;
  g.lo = at_break ? f.pieces()[i - 1].slope(u) : f.pieces()[i].slope(u);
  g.hi = f.pieces()[i].slope(u);
  if (u == f.lo()) g.lo = -kInf;
  if (u == f.hi()) {
    g.lo = f.pieces().back().slope(u);
    g.hi = kInf;
  }
  return g;
}

/// Legendre-Fenchel conjugate, built from the graph of the subdifferential.
inline PlqFunction conjugate(const PlqFunction& f) {
  if (f.is_point_domain()) {
    double p = f.lo();
    return PlqFunction::affine(p, -f(p));
  }
  struct Segment {
    double ylo, yhi;
    Quadratic q;
  };
  std::vector<Segment> segs;
  const auto& pieces = f.pieces();
  auto vertex = [&](double u, double ylo, double yhi) {
    if (yhi > ylo) segs.push_back({ylo, yhi, {0, u, -f(u)}});
  };
  if (f.lo() > -kInf) vertex(f.lo(), -kInf, pieces.front().slope(f.lo()));
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& p = pieces[i];
    double plo = f.piece_lo(i), phi = f.piece_hi(i);
    if (p.a > 0) {
      double ylo = plo == -kInf ? -kInf : p.slope(plo);
      double yhi = phi == kInf ? kInf : p.slope(phi);
      if (yhi > ylo) segs.push_back({ylo, yhi, {1.0 / (4 * p.a), -p.b / (2 * p.a), p.b * p.b / (4 * p.a) - p.c}});
    }
    if (i + 1 < pieces.size()) {
      double x = f.breaks()[i];
      vertex(x, p.slope(x), pieces[i + 1].slope(x));
    }
  }
  if (f.hi() < kInf) vertex(f.hi(), pieces.back().slope(f.hi()), kInf);
  if (segs.empty()) {
    // f is affine on R.
    const auto& p = pieces.front();
    return PlqFunction(p.b, p.b, {}, {{0, 0, -p.c}});
  }
  // Neighbouring segment ends can disagree in the last bits, and a sliver
  // piece of f can map to a segment of no width; such segments are dropped.
  std::vector<double> breaks;
  std::vector<Quadratic> qs{segs.front().q};
  double lo = segs.front().ylo, hi = segs.back().yhi;
  auto near = [](double a, double b) { return std::isfinite(a) && b - a <= tol::kCoalesce * std::max({1.0, std::abs(a), std::abs(b)}); };
  for (std::size_t i = 1; i < segs.size(); ++i) {
    double y = segs[i].ylo;
    double prev = breaks.empty() ? lo : breaks.back();
    if (near(prev, y)) {
      qs.back() = segs[i].q;
      continue;
    }
    breaks.push_back(y);
    qs.push_back(segs[i].q);
  }
  if (!breaks.empty() && hi < kInf && near(breaks.back(), hi)) {
    breaks.pop_back();
    qs.pop_back();
  }
  return PlqFunction(lo, hi, breaks, qs);
}

/// Recession function: positively homogeneous, from the tail slopes.
inline PlqFunction recession(const PlqFunction& f) {
  double sl = f.left_tail_slope();   // -inf when the left direction is blocked
  double sr = f.right_tail_slope();  // +inf when the right direction is blocked
  bool left = sl > -kInf, right = sr < kInf;
  if (left && right) return PlqFunction(-kInf, kInf, {0.0}, {{0, sl, 0}, {0, sr, 0}});
  if (left) return PlqFunction(-kInf, 0.0, {}, {{0, sl, 0}});
  if (right) return PlqFunction(0.0, kInf, {}, {{0, sr, 0}});
  return PlqFunction::indicator(0.0, 0.0);
}

namespace detail {

/// Representative interior point of (l, r).
inline double interior_point(double l, double r) {
  if (l == -kInf && r == kInf) return 0.0;
  if (l == -kInf) return r - 1.0;
  if (r == kInf) return l + 1.0;
  return 0.5 * (l + r);
}

inline std::vector<double> merged_breaks(const std::vector<double>& a, const std::vector<double>& b, double lo,
                                         double hi) {
  std::vector<double> all;
  for (double x : a)
    if (x > lo && x < hi) all.push_back(x);
  for (double x : b)
    if (x > lo && x < hi) all.push_back(x);
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double x : all)
    if (out.empty() || x - out.back() > tol::kCoalesce * std::max(1.0, std::abs(x))) out.push_back(x);
  return out;
}

}  // namespace detail

/// f + g; nullopt when the domains do not intersect (improper sum).
inline std::optional<PlqFunction> add(const PlqFunction& f, const PlqFunction& g) {
  double lo = std::max(f.lo(), g.lo()), hi = std::min(f.hi(), g.hi());
  if (lo > hi) return std::nullopt;
  if (lo == hi) return PlqFunction(lo, hi, {}, {{0, 0, f(lo) + g(lo)}});
  auto br = detail::merged_breaks(f.breaks(), g.breaks(), lo, hi);
  std::vector<Quadratic> pieces;
  for (std::size_t i = 0; i <= br.size(); ++i) {
    double l = i == 0 ? lo : br[i - 1], r = i == br.size() ? hi : br[i];
    double x = detail::interior_point(l, r);
    pieces.push_back(f.pieces()[f.piece_index(x)] + g.pieces()[g.piece_index(x)]);
  }
  return PlqFunction(lo, hi, br, pieces);
}

inline PlqFunction scale(const PlqFunction& f, double lambda) {
  if (!(lambda > 0)) throw DomainError("scale: factor must be positive");
  std::vector<Quadratic> pieces;
  for (const auto& p : f.pieces()) pieces.push_back(p * lambda);
  return PlqFunction(f.lo(), f.hi(), f.breaks(), pieces);
}

/// u -> f(a*u + b). For a == 0 the result is constant f(b), or nullopt if b is outside dom f.
inline std::optional<PlqFunction> affine_precompose(const PlqFunction& f, double a, double b) {
  if (a == 0.0) {
    double v = f(b);
    if (v == kInf) return std::nullopt;
    return PlqFunction::affine(0.0, v);
  }
  auto map = [&](double x) { return (x - b) / a; };
  double lo = map(f.lo()), hi = map(f.hi());
  std::vector<double> br;
  std::vector<Quadratic> pieces;
  for (double x : f.breaks()) br.push_back(map(x));
  for (const auto& p : f.pieces()) pieces.push_back(p.compose(a, b));
  if (a < 0) {
    std::swap(lo, hi);
    std::reverse(br.begin(), br.end());
    std::reverse(pieces.begin(), pieces.end());
  }
  if (f.is_point_domain()) hi = lo;
  return PlqFunction(lo, hi, br, pieces);
}

/// Exact minimization of a PLQ function of one variable.
struct Minimum {
  double value = kInf;            // -inf when unbounded below
  std::optional<double> argmin;   // some minimizer when attained
};

inline Minimum minimize(const PlqFunction& f) {
  Minimum best;
  for (std::size_t i = 0; i < f.piece_count(); ++i) {
    const auto& p = f.pieces()[i];
    double l = f.piece_lo(i), r = f.piece_hi(i);
    double x;
    if (p.a > 0) {
      x = std::clamp(-p.b / (2 * p.a), l, r);
    } else if (p.b > 0) {
      if (l == -kInf) return {-kInf, std::nullopt};
      x = l;
    } else if (p.b < 0) {
      if (r == kInf) return {-kInf, std::nullopt};
      x = r;
    } else {
      x = l > -kInf ? l : (r < kInf ? r : 0.0);
    }
    double v = p(x);
    if (v < best.value) best = {v, x};
  }
  return best;
}

/// One-term argument of a partial minimization: weight * f(u + x * direction).
struct ShiftedTerm {
  double weight = 1.0;
  PlqFunction f;
  double direction = 0.0;
};

}  // namespace nogap
