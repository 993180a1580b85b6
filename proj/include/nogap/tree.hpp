#pragma once

// Finite filtered probability spaces as scenario trees.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nogap/common.hpp"

namespace nogap {

struct TreeNode {
  std::optional<int> parent;
  double prob = 1.0;  // conditional on the parent
  std::vector<double> price;
};

/// Rooted tree with node ids in stage-major order. Construction never throws;
/// use validate_tree() (or ScenarioTree::checked) before relying on the
/// invariants. Probabilities are stored conditionally and the unconditional
/// ones derived.
class ScenarioTree {
 public:
  ScenarioTree() = default;
  ScenarioTree(int horizon, int assets, std::vector<TreeNode> nodes)
      : horizon_(horizon), assets_(assets), nodes_(std::move(nodes)) {
    index();
  }

  /// Throws DomainError listing the first violation if the tree is invalid.
  static ScenarioTree checked(int horizon, int assets, std::vector<TreeNode> nodes);

  int horizon() const { return horizon_; }
  int assets() const { return assets_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int id) const { return nodes_[id]; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int stage(int id) const { return stage_[id]; }
  const std::vector<int>& children(int id) const { return children_[id]; }
  bool is_leaf(int id) const { return children_[id].empty(); }
  double probability(int id) const { return uncond_[id]; }
  const std::vector<int>& nodes_at(int stage) const { return by_stage_[stage]; }
  const std::vector<int>& leaves() const { return leaves_; }
  int leaf_count() const { return static_cast<int>(leaves_.size()); }
  /// Position of a leaf node in leaves().
  int leaf_index(int id) const { return leaf_pos_[id]; }

  /// Ancestor of `id` at stage t (t <= stage(id)).
  int ancestor(int id, int t) const {
    while (stage_[id] > t) id = *nodes_[id].parent;
    return id;
  }

  /// Price increment s(child) - s(parent) for asset j.
  double increment(int child, int j) const {
    return nodes_[child].price[j] - nodes_[*nodes_[child].parent].price[j];
  }

  /// Leaves of the subtree rooted at id.
  std::vector<int> leaves_under(int id) const {
    std::vector<int> out;
    for (int l : leaves_)
      if (stage_[id] <= stage_[l] && ancestor(l, stage_[id]) == id) out.push_back(l);
    return out;
  }

 private:
  void index() {
    int n = size();
    stage_.assign(n, 0);
    children_.assign(n, {});
    uncond_.assign(n, 0.0);
    leaf_pos_.assign(n, -1);
    leaves_.clear();
    by_stage_.assign(std::max(horizon_, 0) + 1, {});
    for (int i = 0; i < n; ++i) {
      const auto& p = nodes_[i].parent;
      if (p && *p >= 0 && *p < i) {
        stage_[i] = stage_[*p] + 1;
        children_[*p].push_back(i);
        uncond_[i] = uncond_[*p] * nodes_[i].prob;
      } else {
        stage_[i] = p ? -1 : 0;
        uncond_[i] = p ? 0.0 : nodes_[i].prob;
      }
      if (stage_[i] >= 0 && stage_[i] <= horizon_) by_stage_[stage_[i]].push_back(i);
    }
    for (int i = 0; i < n; ++i)
      if (children_[i].empty()) {
        leaf_pos_[i] = static_cast<int>(leaves_.size());
        leaves_.push_back(i);
      }
  }

  int horizon_ = 0;
  int assets_ = 0;
  std::vector<TreeNode> nodes_;
  std::vector<int> stage_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> by_stage_;
  std::vector<double> uncond_;
  std::vector<int> leaves_;
  std::vector<int> leaf_pos_;
};

/// Violations of the tree invariants, each naming the node and the rule.
inline std::vector<std::string> validate_tree(const ScenarioTree& tree) {
  std::vector<std::string> out;
  auto say = [&out](auto&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    out.push_back(os.str());
  };
  if (tree.horizon() < 1) say("horizon ", tree.horizon(), " must be at least 1");
  if (tree.assets() < 1) say("asset count ", tree.assets(), " must be at least 1");
  if (tree.size() == 0) {
    say("tree has no nodes");
    return out;
  }
  int roots = 0;
  for (int i = 0; i < tree.size(); ++i) {
    const auto& nd = tree.node(i);
    if (!nd.parent) {
      ++roots;
      if (i != 0) say("root ", i, " must have id 0");
      if (std::abs(nd.prob - 1.0) > tol::kFeasibility) say("root ", i, " probability ", nd.prob, " is not 1");
    } else if (*nd.parent < 0 || *nd.parent >= i) {
      say("node ", i, " has parent ", *nd.parent, " out of stage-major order");
      continue;
    }
    if (!(nd.prob > 0) || !std::isfinite(nd.prob)) say("node ", i, " probability ", nd.prob, " not positive");
    if (static_cast<int>(nd.price.size()) != tree.assets())
      say("node ", i, " price has dimension ", nd.price.size(), ", expected ", tree.assets());
    for (double s : nd.price)
      if (!std::isfinite(s)) say("node ", i, " price not finite");
    if (i > 0 && nd.parent && *nd.parent < i && tree.stage(i) < tree.stage(i - 1))
      say("node ", i, " breaks stage-major ordering");
    if (tree.stage(i) > tree.horizon()) say("node ", i, " beyond horizon");
  }
  if (roots != 1) say("expected exactly one root, found ", roots);
  for (int i = 0; i < tree.size(); ++i) {
    const auto& ch = tree.children(i);
    if (ch.empty()) {
      if (tree.stage(i) >= 0 && tree.stage(i) != tree.horizon()) say("leaf ", i, " not at horizon");
      continue;
    }
    double sum = 0;
    for (int c : ch) sum += tree.node(c).prob;
    if (std::abs(sum - 1.0) > tol::kFeasibility) say("children of node ", i, " sum to ", sum);
  }
  return out;
}

inline ScenarioTree ScenarioTree::checked(int horizon, int assets, std::vector<TreeNode> nodes) {
  ScenarioTree t(horizon, assets, std::move(nodes));
  auto v = validate_tree(t);
  if (!v.empty()) throw DomainError("invalid scenario tree: " + v.front());
  return t;
}

/// One vector per node for stages carrying a nonzero dimension; values of
/// stage t live at stage-t nodes, so x_t is F_t-measurable by construction.
struct AdaptedProcess {
  std::vector<int> dims;                     // n_t for t = 0..T
  std::vector<std::vector<double>> values;   // indexed by node id

  static AdaptedProcess zeros(const ScenarioTree& tree, std::vector<int> dims) {
    AdaptedProcess x{std::move(dims), std::vector<std::vector<double>>(tree.size())};
    for (int i = 0; i < tree.size(); ++i) x.values[i].assign(x.dims[tree.stage(i)], 0.0);
    return x;
  }
  /// Trading-strategy profile (J, ..., J, 0).
  static AdaptedProcess strategy(const ScenarioTree& tree) {
    std::vector<int> dims(tree.horizon() + 1, tree.assets());
    dims.back() = 0;
    return zeros(tree, dims);
  }
};

/// Per-scenario (leaf) realizations of a process that need not be adapted:
/// values[t][leaf] is a vector of dimension dims[t]. Houses elements of the
/// annihilator, whose stage-t component is only F_T-measurable.
struct ScenarioProcess {
  std::vector<int> dims;
  std::vector<std::vector<std::vector<double>>> values;

  static ScenarioProcess zeros(const ScenarioTree& tree, std::vector<int> dims) {
    ScenarioProcess v;
    v.dims = std::move(dims);
    v.values.resize(v.dims.size());
    for (std::size_t t = 0; t < v.dims.size(); ++t)
      v.values[t].assign(tree.leaf_count(), std::vector<double>(v.dims[t], 0.0));
    return v;
  }
  static ScenarioProcess strategy_dual(const ScenarioTree& tree) {
    std::vector<int> dims(tree.horizon() + 1, tree.assets());
    dims.back() = 0;
    return zeros(tree, dims);
  }
};

/// Leaf-indexed scalar field (densities, liabilities).
using LeafField = std::vector<double>;

inline void check_profile(const ScenarioTree& tree, const std::vector<int>& dims, const char* what) {
  if (static_cast<int>(dims.size()) != tree.horizon() + 1)
    throw DomainError(std::string(what) + ": stage profile length does not match horizon");
}

/// E[x_{t+1} | F_t] for a process whose stage-(t+1) values are given at the
/// stage-(t+1) nodes. The result carries the averaged vectors at stage-t nodes.
inline AdaptedProcess conditional_expectation(const ScenarioTree& tree, const AdaptedProcess& x, int t) {
  if (t < 0 || t >= tree.horizon()) throw DomainError("conditional_expectation: stage out of range");
  AdaptedProcess out;
  out.dims.assign(tree.horizon() + 1, 0);
  int dim = -1;
  out.values.assign(tree.size(), {});
  for (int n : tree.nodes_at(t)) {
    std::vector<double> acc;
    for (int c : tree.children(n)) {
      if (c >= static_cast<int>(x.values.size()) || x.values[c].empty()) {
        std::ostringstream os;
        os << "conditional_expectation: missing value at node " << c;
        throw DomainError(os.str());
      }
      const auto& v = x.values[c];
      if (acc.empty()) acc.assign(v.size(), 0.0);
      if (v.size() != acc.size()) throw DomainError("conditional_expectation: dimension mismatch");
      for (std::size_t j = 0; j < v.size(); ++j) acc[j] += tree.node(c).prob * v[j];
    }
    dim = static_cast<int>(acc.size());
    out.values[n] = std::move(acc);
  }
  out.dims[t] = std::max(dim, 0);
  return out;
}

/// E[v_t | F_t] at a stage-t node, from leaf realizations.
inline std::vector<double> conditional_mean_at(const ScenarioTree& tree, const std::vector<std::vector<double>>& leaf_values,
                                               int node) {
  std::vector<double> acc;
  double mass = 0;
  for (int l : tree.leaves_under(node)) {
    const auto& v = leaf_values[tree.leaf_index(l)];
    if (acc.empty()) acc.assign(v.size(), 0.0);
    for (std::size_t j = 0; j < v.size(); ++j) acc[j] += tree.probability(l) * v[j];
    mass += tree.probability(l);
  }
  for (double& a : acc) a /= mass;
  return acc;
}

/// Membership in the annihilator of bounded adapted processes: every
/// component has zero conditional mean given the information of its stage.
inline bool is_annihilator(const ScenarioTree& tree, const ScenarioProcess& v) {
  check_profile(tree, v.dims, "is_annihilator");
  double scale = 0;
  for (const auto& vt : v.values)
    for (const auto& leaf : vt)
      for (double a : leaf) scale = std::max(scale, std::abs(a));
  for (int t = 0; t <= tree.horizon(); ++t) {
    if (v.dims[t] == 0) continue;
    if (static_cast<int>(v.values[t].size()) != tree.leaf_count()) throw DomainError("is_annihilator: dimension mismatch");
    for (const auto& leaf : v.values[t])
      if (static_cast<int>(leaf.size()) != v.dims[t]) throw DomainError("is_annihilator: dimension mismatch");
    for (int n : tree.nodes_at(t))
      for (double m : conditional_mean_at(tree, v.values[t], n))
        if (std::abs(m) > scaled(tol::kAnnihilator, scale)) return false;
  }
  return true;
}

/// E(x . v) over scenarios.
inline double pairing(const ScenarioTree& tree, const AdaptedProcess& x, const ScenarioProcess& v) {
  check_profile(tree, x.dims, "pairing");
  if (x.dims != v.dims) throw DomainError("pairing: stage profiles differ");
  double total = 0;
  for (int l : tree.leaves()) {
    double s = 0;
    for (int t = 0; t <= tree.horizon(); ++t) {
      if (x.dims[t] == 0) continue;
      const auto& xv = x.values[tree.ancestor(l, t)];
      const auto& vv = v.values[t][tree.leaf_index(l)];
      if (xv.size() != vv.size()) throw DomainError("pairing: dimension mismatch");
      for (std::size_t j = 0; j < xv.size(); ++j) s += xv[j] * vv[j];
    }
    total += tree.probability(l) * s;
  }
  return total;
}

/// Node-indexed conditional expectations of a leaf field (E[y | node]).
inline std::vector<double> extend_to_nodes(const ScenarioTree& tree, const LeafField& y) {
  std::vector<double> out(tree.size(), 0.0);
  for (int l : tree.leaves()) out[l] = y[tree.leaf_index(l)];
  for (int i = tree.size() - 1; i >= 0; --i) {
    if (tree.is_leaf(i)) continue;
    double acc = 0;
    for (int c : tree.children(i)) acc += tree.node(c).prob * out[c];
    out[i] = acc;
  }
  return out;
}

/// y is the density of a martingale measure Q << P for the price process.
inline bool is_martingale_density(const ScenarioTree& tree, const LeafField& y) {
  if (static_cast<int>(y.size()) != tree.leaf_count()) throw DomainError("is_martingale_density: wrong leaf count");
  double scale = 0;
  for (double w : y) {
    if (w < 0) throw DomainError("is_martingale_density: negative weight");
    scale = std::max(scale, w);
  }
  auto ext = extend_to_nodes(tree, y);
  if (std::abs(ext[0] - 1.0) > tol::kMartingale) return false;
  for (int i = 0; i < tree.size(); ++i) {
    if (tree.is_leaf(i)) continue;
    double price_scale = 0;
    for (int c : tree.children(i))
      for (int j = 0; j < tree.assets(); ++j) price_scale = std::max(price_scale, std::abs(tree.increment(c, j)));
    for (int j = 0; j < tree.assets(); ++j) {
      double drift = 0;
      for (int c : tree.children(i)) drift += tree.node(c).prob * ext[c] * tree.increment(c, j);
      if (std::abs(drift) > scaled(tol::kMartingale, scale * price_scale)) return false;
    }
  }
  return true;
}

/// Terminal trading gain sum_t x_t . (s_{t+1} - s_t) along each scenario.
inline LeafField terminal_gains(const ScenarioTree& tree, const AdaptedProcess& x) {
  LeafField g(tree.leaf_count(), 0.0);
  for (int l : tree.leaves()) {
    double s = 0;
    for (int t = 0; t < tree.horizon(); ++t) {
      int n = tree.ancestor(l, t), c = tree.ancestor(l, t + 1);
      const auto& xv = x.values[n];
      for (int j = 0; j < tree.assets() && j < static_cast<int>(xv.size()); ++j) s += xv[j] * tree.increment(c, j);
    }
    g[tree.leaf_index(l)] = s;
  }
  return g;
}

inline double expectation(const ScenarioTree& tree, const LeafField& f) {
  double s = 0;
  for (int l : tree.leaves()) s += tree.probability(l) * f[tree.leaf_index(l)];
  return s;
}

}  // namespace nogap
