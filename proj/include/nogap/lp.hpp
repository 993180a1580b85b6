#pragma once

// Dense solvers for the small convex programs arising on scenario trees:
//   minimize  c'z + 1/2 sum_j q_j z_j^2   s.t.  A z = b,  lo <= z <= hi.
// Pure LPs (q = 0) go through a bounded-variable revised simplex; programs
// with curvature through Lemke's complementary pivoting on the KKT system.
// Both are deterministic and return multipliers, so every optimum comes
// with a Lagrangian lower bound.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "nogap/common.hpp"

namespace nogap::lp {

enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kIterationLimit: return "iteration_limit";
  }
  return "?";
}

struct Problem {
  Eigen::MatrixXd A;               // m x n
  Eigen::VectorXd b;               // m
  Eigen::VectorXd c;               // n
  Eigen::VectorXd q;               // n, diagonal curvature (empty = LP)
  std::vector<double> lo, hi;      // n

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
  bool has_curvature() const { return q.size() > 0 && (q.array() > 0).any(); }
};

struct Solution {
  Status status = Status::kIterationLimit;
  Eigen::VectorXd z;          // primal point
  Eigen::VectorXd duals;      // row multipliers pi (Lagrangian c'z - pi'(Az - b))
  Eigen::VectorXd reduced;    // gradient minus A'pi, per column
  Eigen::VectorXd ray;        // improving direction when unbounded (LP only)
  double objective = kInf;
  int iterations = 0;
};

inline double objective(const Problem& p, const Eigen::VectorXd& z) {
  double v = p.c.dot(z);
  if (p.q.size() > 0) v += 0.5 * (p.q.array() * z.array().square()).sum();
  return v;
}

/// inf over the box of the Lagrangian at multipliers pi: a valid lower bound
/// on the optimal value for any pi. Reduced costs below `zero_tol` against
/// an infinite bound count as zero.
inline double lagrangian_bound(const Problem& p, const Eigen::VectorXd& pi, double zero_tol = 1e-9) {
  Eigen::VectorXd d = p.c - p.A.transpose() * pi;
  double total = pi.dot(p.b);
  double scale = std::max(1.0, p.c.lpNorm<Eigen::Infinity>());
  for (int j = 0; j < p.cols(); ++j) {
    double qj = p.q.size() > 0 ? p.q[j] : 0.0;
    double l = p.lo[j], h = p.hi[j];
    if (qj > 0) {
      double z = std::clamp(-d[j] / qj, l, h);
      total += 0.5 * qj * z * z + d[j] * z;
      continue;
    }
    double dj = std::abs(d[j]) <= zero_tol * scale ? 0.0 : d[j];
    if (dj > 0) {
      if (l == -kInf) return -kInf;
      total += dj * l;
    } else if (dj < 0) {
      if (h == kInf) return -kInf;
      total += dj * h;
    }
  }
  return total;
}

/// Incremental construction with inequality rows turned into slack columns.
class Builder {
 public:
  enum class Sense { kEq, kLe, kGe };

  int add_var(double lo, double hi, double cost = 0.0, double curvature = 0.0) {
    lo_.push_back(lo);
    hi_.push_back(hi);
    c_.push_back(cost);
    q_.push_back(curvature);
    return static_cast<int>(lo_.size()) - 1;
  }

  int add_row(std::vector<std::pair<int, double>> coeffs, Sense sense, double rhs) {
    if (sense == Sense::kLe) coeffs.push_back({add_var(0.0, kInf), 1.0});
    if (sense == Sense::kGe) coeffs.push_back({add_var(0.0, kInf), -1.0});
    rows_.push_back(std::move(coeffs));
    rhs_.push_back(rhs);
    return static_cast<int>(rows_.size()) - 1;
  }

  void set_cost(int var, double cost) { c_[var] = cost; }
  int vars() const { return static_cast<int>(lo_.size()); }

  Problem build() const {
    Problem p;
    int m = static_cast<int>(rows_.size()), n = vars();
    p.A = Eigen::MatrixXd::Zero(m, n);
    for (int i = 0; i < m; ++i)
      for (auto [j, a] : rows_[i]) p.A(i, j) += a;
    p.b = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), m);
    p.c = Eigen::Map<const Eigen::VectorXd>(c_.data(), n);
    bool curved = std::any_of(q_.begin(), q_.end(), [](double v) { return v > 0; });
    if (curved) p.q = Eigen::Map<const Eigen::VectorXd>(q_.data(), n);
    p.lo = lo_;
    p.hi = hi_;
    return p;
  }

 private:
  std::vector<double> lo_, hi_, c_, q_;
  std::vector<std::vector<std::pair<int, double>>> rows_;
  std::vector<double> rhs_;
};

namespace detail {

enum class Place { kBasic, kLower, kUpper, kFree };

class Simplex {
 public:
  explicit Simplex(const Problem& p) : p_(p), m_(p.rows()), n_(p.cols()) {
    ntot_ = n_ + m_;
    lo_.assign(ntot_, 0.0);
    hi_.assign(ntot_, 0.0);
    for (int j = 0; j < n_; ++j) {
      lo_[j] = p.lo[j];
      hi_[j] = p.hi[j];
    }
    x_.assign(ntot_, 0.0);
    place_.assign(ntot_, Place::kLower);
    for (int j = 0; j < n_; ++j) {
      if (lo_[j] > -kInf) {
        x_[j] = lo_[j];
        place_[j] = Place::kLower;
      } else if (hi_[j] < kInf) {
        x_[j] = hi_[j];
        place_[j] = Place::kUpper;
      } else {
        x_[j] = 0.0;
        place_[j] = Place::kFree;
      }
    }
    Eigen::VectorXd r = p.b;
    for (int j = 0; j < n_; ++j)
      if (x_[j] != 0.0) r -= p.A.col(j) * x_[j];
    art_sign_.assign(m_, 1.0);
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      art_sign_[i] = r[i] >= 0 ? 1.0 : -1.0;
      int a = n_ + i;
      basis_[i] = a;
      place_[a] = Place::kBasic;
      x_[a] = std::abs(r[i]);
      lo_[a] = 0.0;
      hi_[a] = kInf;
    }
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
    for (int i = 0; i < m_; ++i) binv_(i, i) = art_sign_[i];
    scale_ = std::max(1.0, p.b.size() ? p.b.lpNorm<Eigen::Infinity>() : 0.0);
  }

  Solution run(int max_iter) {
    Solution sol;
    // Phase 1: minimize the sum of artificials.
    cost_.assign(ntot_, 0.0);
    for (int i = 0; i < m_; ++i) cost_[n_ + i] = 1.0;
    Status s = iterate(max_iter, sol.iterations, true);
    double infeas = 0;
    for (int i = 0; i < m_; ++i) infeas += x_[n_ + i];
    if (s == Status::kIterationLimit) {
      sol.status = s;
      return sol;
    }
    if (infeas > tol::kFeasibility * scale_) {
      sol.status = Status::kInfeasible;
      return sol;
    }
    for (int i = 0; i < m_; ++i) {
      hi_[n_ + i] = 0.0;
      x_[n_ + i] = std::max(0.0, std::min(x_[n_ + i], 0.0));
    }
    // Phase 2.
    cost_.assign(ntot_, 0.0);
    for (int j = 0; j < n_; ++j) cost_[j] = p_.c[j];
    cost_scale_ = std::max(1.0, p_.c.size() ? p_.c.lpNorm<Eigen::Infinity>() : 0.0);
    refactor();
    s = iterate(max_iter, sol.iterations, false);
    sol.status = s;
    sol.z = Eigen::VectorXd::Zero(n_);
    for (int j = 0; j < n_; ++j) sol.z[j] = x_[j];
    Eigen::VectorXd pi = duals();
    sol.duals = pi;
    sol.reduced = p_.c - p_.A.transpose() * pi;
    if (s == Status::kUnbounded) sol.ray = ray_;
    if (s == Status::kOptimal) sol.objective = p_.c.dot(sol.z);
    if (s == Status::kUnbounded) sol.objective = -kInf;
    return sol;
  }

 private:
  Eigen::VectorXd column(int j) const {
    if (j < n_) return p_.A.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j - n_] = art_sign_[j - n_];
    return e;
  }

  Eigen::VectorXd duals() const {
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
    return binv_.transpose() * cb;
  }

  void refactor() {
    if (m_ == 0) return;
    Eigen::MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = column(basis_[i]);
    binv_ = B.partialPivLu().inverse();
    Eigen::VectorXd r = p_.b;
    for (int j = 0; j < ntot_; ++j)
      if (place_[j] != Place::kBasic && x_[j] != 0.0) r -= column(j) * x_[j];
    Eigen::VectorXd xb = binv_ * r;
    for (int i = 0; i < m_; ++i) x_[basis_[i]] = xb[i];
  }

  Status iterate(int max_iter, int& count, bool phase1) {
    int degenerate_run = 0;
    int since_refactor = 0;
    const double opt_tol = 1e-10 * (phase1 ? 1.0 : cost_scale_);
    while (true) {
      if (count >= max_iter) return Status::kIterationLimit;
      bool bland = degenerate_run > 30;
      Eigen::VectorXd pi = duals();
      int enter = -1;
      double best = 0.0, dir = 0.0;
      for (int j = 0; j < ntot_; ++j) {
        if (place_[j] == Place::kBasic) continue;
        if (!phase1 && j >= n_) continue;
        if (lo_[j] == hi_[j]) continue;
        double d = cost_[j] - (j < n_ ? p_.A.col(j).dot(pi) : art_sign_[j - n_] * pi[j - n_]);
        double cand_dir = 0.0;
        if ((place_[j] == Place::kLower || place_[j] == Place::kFree) && d < -opt_tol) cand_dir = 1.0;
        if ((place_[j] == Place::kUpper || place_[j] == Place::kFree) && d > opt_tol) cand_dir = -1.0;
        if (cand_dir == 0.0) continue;
        double score = std::abs(d);
        if (bland) {
          enter = j;
          dir = cand_dir;
          break;
        }
        if (score > best) {
          best = score;
          enter = j;
          dir = cand_dir;
        }
      }
      if (enter < 0) return Status::kOptimal;
      ++count;

      Eigen::VectorXd alpha = binv_ * column(enter);
      double theta = hi_[enter] - lo_[enter];  // bound flip
      int leave = -1;
      double leave_piv = 0.0;
      for (int i = 0; i < m_; ++i) {
        double rate = -dir * alpha[i];
        if (std::abs(alpha[i]) <= tol::kPivot) continue;
        int bj = basis_[i];
        double lim;
        if (rate < 0) {
          if (lo_[bj] == -kInf) continue;
          lim = std::max(0.0, x_[bj] - lo_[bj]) / -rate;
        } else {
          if (hi_[bj] == kInf) continue;
          lim = std::max(0.0, hi_[bj] - x_[bj]) / rate;
        }
        // theta may still be the infinite bound flip, so keep the slack finite.
        double slack = theta == kInf ? 0.0 : 1e-12 * std::max(1.0, theta);
        bool better = lim < theta - slack;
        bool tie = !better && lim <= theta + slack && leave >= 0;
        if (better || (tie && (bland ? basis_[i] < basis_[leave] : std::abs(alpha[i]) > leave_piv))) {
          theta = lim;
          leave = i;
          leave_piv = std::abs(alpha[i]);
        }
      }
      if (theta == kInf) {
        ray_ = Eigen::VectorXd::Zero(n_);
        if (enter < n_) ray_[enter] = dir;
        for (int i = 0; i < m_; ++i)
          if (basis_[i] < n_) ray_[basis_[i]] = -dir * alpha[i];
        return Status::kUnbounded;
      }
      degenerate_run = theta <= 1e-12 ? degenerate_run + 1 : 0;
      x_[enter] += dir * theta;
      for (int i = 0; i < m_; ++i) x_[basis_[i]] -= dir * theta * alpha[i];
      if (leave < 0) {
        place_[enter] = dir > 0 ? Place::kUpper : Place::kLower;
        x_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
        continue;
      }
      int out = basis_[leave];
      double rate = -dir * alpha[leave];
      place_[out] = rate < 0 ? Place::kLower : Place::kUpper;
      x_[out] = rate < 0 ? lo_[out] : hi_[out];
      basis_[leave] = enter;
      place_[enter] = Place::kBasic;
      // Product-form update of the inverse.
      double piv = alpha[leave];
      Eigen::RowVectorXd row = binv_.row(leave) / piv;
      for (int i = 0; i < m_; ++i)
        if (i != leave) binv_.row(i) -= alpha[i] * row;
      binv_.row(leave) = row;
      if (++since_refactor >= 40) {
        refactor();
        since_refactor = 0;
      }
    }
  }

  const Problem& p_;
  int m_, n_, ntot_;
  std::vector<double> lo_, hi_, x_, cost_, art_sign_;
  std::vector<Place> place_;
  std::vector<int> basis_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd ray_;
  double scale_ = 1.0;
  double cost_scale_ = 1.0;
};

/// Lemke's method with lexicographic ratio test on w = M zeta + q.
template <class S>
bool lemke_run(const Eigen::MatrixXd& M, const Eigen::VectorXd& q, Eigen::VectorXd& zeta, int max_iter,
               int& iterations, S tie) {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  const int N = static_cast<int>(q.size());
  zeta = Eigen::VectorXd::Zero(N);
  if ((q.array() >= 0).all()) return true;
  // Columns: w (0..N-1), zeta (N..2N-1), z0 (2N), rhs (2N+1).
  Mat T = Mat::Zero(N, 2 * N + 2);
  T.leftCols(N).setIdentity();
  T.block(0, N, N, N) = -M.cast<S>();
  T.col(2 * N).setConstant(-1.0);
  T.col(2 * N + 1) = q.cast<S>();
  std::vector<int> basis(N);
  for (int i = 0; i < N; ++i) basis[i] = i;

  const Mat T0 = T;
  const S qscale = std::max(S(1), static_cast<S>(q.template lpNorm<Eigen::Infinity>()));
  const S zero_snap = tie * qscale;
  int since_refactor = 0;
  // Rebuilding the tableau from the original data bounds the drift of long
  // degenerate pivot sequences.
  auto refactor = [&]() {
    Mat B(N, N);
    for (int i = 0; i < N; ++i) B.col(i) = T0.col(basis[i]);
    T = B.partialPivLu().solve(T0);
    since_refactor = 0;
  };
  auto pivot = [&](int r, int col) {
    T.row(r) /= T(r, col);
    for (int i = 0; i < N; ++i)
      if (i != r && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(r);
    basis[r] = col;
    if (++since_refactor >= 25) refactor();
    for (int i = 0; i < N; ++i)
      if (std::abs(T(i, 2 * N + 1)) <= zero_snap) T(i, 2 * N + 1) = 0;
  };
  int r0 = 0;
  for (int i = 1; i < N; ++i)
    if (q[i] < q[r0]) r0 = i;
  int leaving = basis[r0];
  pivot(r0, 2 * N);
  for (iterations = 1; iterations < max_iter; ++iterations) {
    int enter = leaving < N ? leaving + N : leaving - N;
    // Lexicographic minimum ratio over rows with positive pivot entries,
    // using the columns of the initial identity as tie breakers.
    int r = -1;
    for (int i = 0; i < N; ++i) {
      if (T(i, enter) <= 1e-12) continue;
      if (r < 0) {
        r = i;
        continue;
      }
      // Roundoff in the rhs scales with max |q| (box bounds), not with the
      // entry itself, so ties are judged in absolute rhs units.
      S a = T(i, 2 * N + 1) / T(i, enter), b = T(r, 2 * N + 1) / T(r, enter);
      S slack = tie * qscale * (1 / T(i, enter) + 1 / T(r, enter));
      if (a < b - slack) {
        r = i;
      } else if (a <= b + slack) {
        // z0 leaving wins ties.
        if (basis[i] == 2 * N) {
          r = i;
          continue;
        }
        if (basis[r] == 2 * N) continue;
        for (int k = 0; k < N; ++k) {
          S ai = T(i, k) / T(i, enter), br = T(r, k) / T(r, enter);
          if (std::abs(ai - br) <= tie * std::max({S(1), std::abs(ai), std::abs(br)})) continue;
          if (ai < br) r = i;
          break;
        }
      }
    }
    if (std::getenv("LKPATH")) std::fprintf(stderr,"%d %d %d\n",iterations-1,enter,r); //DBG
    if (r < 0) return false;  // secondary ray
    leaving = basis[r];
    pivot(r, enter);
    if (leaving == 2 * N) {
      for (int i = 0; i < N; ++i)
        if (basis[i] >= N && basis[i] < 2 * N) zeta[basis[i] - N] = std::max(0.0, static_cast<double>(T(i, 2 * N + 1)));
      return true;
    }
  }
  return false;
}

/// Lemke in double, retried in long double when roundoff ends it on a ray.
inline bool lemke(const Eigen::MatrixXd& M, const Eigen::VectorXd& q, Eigen::VectorXd& zeta, int max_iter,
                  int& iterations) {
  if (lemke_run<double>(M, q, zeta, max_iter, iterations, 1e-13)) return true;
  int more = 0;
  bool ok = lemke_run<long double>(M, q, zeta, max_iter, more, 1e-16L);
  iterations += more;
  return ok;
}

inline Solution solve_curved(const Problem& p, int max_iter) {
  const int n = p.cols(), m = p.rows();
  // z = offset + sum of signed nonnegative variables.
  std::vector<std::pair<int, double>> map;  // new var -> (old var, sign)
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
  std::vector<std::pair<int, double>> uppers;  // (new var, bound) for z' <= bound
  for (int j = 0; j < n; ++j) {
    double l = p.lo[j], h = p.hi[j];
    if (l > -kInf) {
      offset[j] = l;
      map.push_back({j, 1.0});
      if (h < kInf) uppers.push_back({static_cast<int>(map.size()) - 1, h - l});
    } else if (h < kInf) {
      offset[j] = h;
      map.push_back({j, -1.0});
    } else {
      map.push_back({j, 1.0});
      map.push_back({j, -1.0});
    }
  }
  const int nn = static_cast<int>(map.size());
  Eigen::MatrixXd Tm = Eigen::MatrixXd::Zero(n, nn);
  for (int k = 0; k < nn; ++k) Tm(map[k].first, k) = map[k].second;
  Eigen::VectorXd qdiag = p.q.size() > 0 ? p.q : Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd H = Tm.transpose() * qdiag.asDiagonal() * Tm;
  Eigen::VectorXd cc = Tm.transpose() * (p.c + qdiag.cwiseProduct(offset));
  Eigen::MatrixXd AT = p.A * Tm;
  Eigen::VectorXd bb = p.b - p.A * offset;
  const int mu = static_cast<int>(uppers.size());
  const int mi = 2 * m + mu;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(mi, nn);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(mi);
  G.topRows(m) = AT;
  h.head(m) = bb;
  G.middleRows(m, m) = -AT;
  h.segment(m, m) = -bb;
  for (int k = 0; k < mu; ++k) {
    G(2 * m + k, uppers[k].first) = -1.0;
    h[2 * m + k] = -uppers[k].second;
  }
  const int N = nn + mi;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  M.topLeftCorner(nn, nn) = H;
  M.topRightCorner(nn, mi) = -G.transpose();
  M.bottomLeftCorner(mi, nn) = G;
  Eigen::VectorXd qq(N);
  qq << cc, -h;
  Solution sol;
  Eigen::VectorXd zeta;
  bool ok = lemke(M, qq, zeta, max_iter, sol.iterations);
  if (!ok) {
    sol.status = sol.iterations >= max_iter ? Status::kIterationLimit : Status::kUnbounded;
    return sol;
  }
  sol.status = Status::kOptimal;
  sol.z = offset + Tm * zeta.head(nn);
  Eigen::VectorXd mult = zeta.tail(mi);
  sol.duals = mult.head(m) - mult.segment(m, m);
  Eigen::VectorXd grad = p.c + qdiag.cwiseProduct(sol.z);
  sol.reduced = grad - p.A.transpose() * sol.duals;
  sol.objective = objective(p, sol.z);
  return sol;
}

}  // namespace detail

/// Solve the program. Curved programs whose LCP ends on a ray are checked
/// for feasibility with phase 1 of the simplex to tell infeasible from unbounded.
inline Solution solve(const Problem& p, int max_iter = 50000) {
  if (!p.has_curvature()) return detail::Simplex(p).run(max_iter);
  Solution s = detail::solve_curved(p, max_iter);
  if (s.status == Status::kUnbounded) {
    Problem feas = p;
    feas.c.setZero();
    feas.q.resize(0);
    if (detail::Simplex(feas).run(max_iter).status == Status::kInfeasible) s.status = Status::kInfeasible;
  }
  return s;
}

}  // namespace nogap::lp
