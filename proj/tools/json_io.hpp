#pragma once

// JSON model ingestion and report helpers for the command-line tool. The
// library itself never sees JSON.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nogap/finance.hpp"
#include "nogap/plq.hpp"
#include "nogap/tree.hpp"

namespace nogap::io {

using Json = nlohmann::ordered_json;

/// Bad input: malformed JSON, a schema mismatch or a failed validation.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Model {
  ScenarioTree tree;
  PlqFunction V = PlqFunction::zero();
  LeafField liability;
  std::optional<double> tail_bound;  // set for truncated families
};

// ---- numbers ---------------------------------------------------------------

/// Doubles with infinities spelled out, since plain JSON has no encoding for them.
inline Json num(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

inline Json nums(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

/// Accepts numbers, "inf"/"-inf" and null (read as `missing`).
inline double read_num(const Json& j, const std::string& where, double missing = kInf) {
  if (j.is_number()) return j.get<double>();
  if (j.is_null()) return missing;
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw InputError(where + ": expected a number");
}

inline std::vector<double> read_nums(const Json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_num(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing field \"" + key + "\"");
  return j.at(key);
}

// ---- parsing ---------------------------------------------------------------

/// Parses text, reporting syntax errors by line and column.
inline Json parse(const std::string& text, const std::string& name) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << name << ":" << line << ":" << col << ": malformed JSON";
    std::string what = e.what();
    auto pos = what.rfind(": ");
    if (pos != std::string::npos) os << " (" << what.substr(pos + 2) << ")";
    throw InputError(os.str());
  }
}

inline Json load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

inline ScenarioTree read_tree(const Json& j) {
  const std::string where = "tree";
  int T = field(j, "horizon", where).get<int>();
  int J = field(j, "assets", where).get<int>();
  const Json& arr = field(j, "nodes", where);
  if (!arr.is_array()) throw InputError("tree.nodes: expected an array");
  std::vector<TreeNode> nodes;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const Json& n = arr[i];
    std::string w = "tree.nodes[" + std::to_string(i) + "]";
    if (n.contains("id") && n.at("id").get<long long>() != static_cast<long long>(i))
      throw InputError(w + ": id " + n.at("id").dump() + " breaks the dense stage-major numbering");
    TreeNode node;
    const Json& p = field(n, "parent", w);
    if (!p.is_null()) node.parent = p.get<int>();
    node.prob = read_num(field(n, "prob", w), w + ".prob");
    node.price = read_nums(field(n, "price", w), w + ".price");
    nodes.push_back(std::move(node));
  }
  // Parents must point backwards before the tree can even be indexed.
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].parent && (*nodes[i].parent < 0 || *nodes[i].parent >= static_cast<int>(i)))
      throw InputError("tree.nodes[" + std::to_string(i) + "]: parent out of stage-major order");
  ScenarioTree tree(T, J, std::move(nodes));
  auto bad = validate_tree(tree);
  if (!bad.empty()) throw InputError("tree: " + bad.front());
  return tree;
}

/// PLQ literal or a named family. Families are normalized so that f(0) = 0.
inline PlqFunction read_plq(const Json& j, std::optional<double>* tail_bound = nullptr) {
  try {
    if (j.is_object() && j.contains("family")) {
      auto fam = j.at("family").get<std::string>();
      if (fam == "remark3") {
        int n = j.contains("n_pieces") ? j.at("n_pieces").get<int>() : 50;
        if (tail_bound) *tail_bound = 1.0 / (n - 1);
        return remark3_utility(n);
      }
      if (fam == "linear_kink") {
        auto s = read_nums(field(j, "slopes", "utility"), "utility.slopes");
        if (s.size() != 2) throw InputError("utility.slopes: expected two slopes");
        double kink = j.contains("kink") ? read_num(j.at("kink"), "utility.kink") : 0.0;
        return PlqFunction::piecewise_linear({kink}, s, 0.0, 0.0);
      }
      throw InputError("utility: unknown family \"" + fam + "\"");
    }
    auto dom = read_nums(field(j, "domain", "utility"), "utility.domain");
    if (dom.size() != 2) throw InputError("utility.domain: expected [lo, hi]");
    if (dom[0] == kInf) dom[0] = -kInf;  // null on the left reads as unbounded
    auto br = j.contains("breaks") ? read_nums(j.at("breaks"), "utility.breaks") : std::vector<double>{};
    const Json& ps = field(j, "pieces", "utility");
    if (!ps.is_array()) throw InputError("utility.pieces: expected an array");
    std::vector<Quadratic> pieces;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (!ps[i].is_object()) throw InputError("utility.pieces[" + std::to_string(i) + "]: expected {a, b, c}");
      pieces.push_back({ps[i].value("a", 0.0), ps[i].value("b", 0.0), ps[i].value("c", 0.0)});
    }
    return PlqFunction(dom[0], dom[1], br, pieces);
  } catch (const DomainError& e) {
    throw InputError(std::string("utility: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("utility: ") + e.what());
  }
}

inline LeafField read_leaf_values(const Json& j, const std::string& where, int leaves) {
  const Json& v = j.is_object() ? field(j, "leaf_values", where) : j;
  auto out = read_nums(v, where + ".leaf_values");
  if (static_cast<int>(out.size()) != leaves)
    throw InputError(where + ": expected " + std::to_string(leaves) + " leaf values, got " + std::to_string(out.size()));
  return out;
}

inline Model read_model(const Json& j) {
  try {
    Model m;
    m.tree = read_tree(field(j, "tree", "model"));
    m.V = read_plq(field(j, "utility", "model"), &m.tail_bound);
    m.liability = j.contains("liability") ? read_leaf_values(j.at("liability"), "liability", m.tree.leaf_count())
                                          : LeafField(m.tree.leaf_count(), 0.0);
    auto uv = utility_violations(m.V);
    if (!uv.empty()) throw InputError("utility: " + uv.front());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

// ---- serialization ---------------------------------------------------------

inline Json to_json(const ScenarioTree& t) {
  Json nodes = Json::array();
  for (int i = 0; i < t.size(); ++i) {
    const auto& n = t.node(i);
    nodes.push_back({{"id", i}, {"parent", n.parent ? Json(*n.parent) : Json(nullptr)}, {"prob", n.prob}, {"price", nums(n.price)}});
  }
  return {{"horizon", t.horizon()}, {"assets", t.assets()}, {"nodes", nodes}};
}

inline Json to_json(const PlqFunction& f) {
  Json pieces = Json::array();
  for (const auto& p : f.pieces()) pieces.push_back({{"a", p.a}, {"b", p.b}, {"c", p.c}});
  return {{"domain", {num(f.lo()), num(f.hi())}}, {"breaks", nums(f.breaks())}, {"pieces", pieces}};
}

/// Strategy as {node id: [x_j ...]} over the trading nodes.
inline Json to_json(const AdaptedProcess& x) {
  Json out = Json::array();
  for (std::size_t n = 0; n < x.values.size(); ++n)
    if (!x.values[n].empty()) out.push_back({{"node", n}, {"x", nums(x.values[n])}});
  return out;
}

inline Json to_json(const Model& m) {
  Json j = {{"tree", to_json(m.tree)}, {"utility", to_json(m.V)}, {"liability", {{"leaf_values", nums(m.liability)}}}};
  return j;
}

}  // namespace nogap::io
