// nogap: command-line front end. Every command prints one JSON report.
//
// Exit codes: 0 success, 2 invalid input, 3 a hypothesis or gap assertion
// failed while --assert was given, 64 usage error.

#include <cmath>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "json_io.hpp"
#include "nogap/duality.hpp"
#include "nogap/finance.hpp"
#include "nogap/random_instances.hpp"
#include "nogap/solver.hpp"

namespace {

using nogap::io::Json;
using nogap::io::num;
using nogap::io::nums;

constexpr int kExitInput = 2;
constexpr int kExitAssert = 3;
constexpr int kExitUsage = 64;

// Tolerances attached to reported numbers.
constexpr double kLpTol = 1e-9;
constexpr double kMartingaleTol = 1e-12;
constexpr double kGapTol = 1e-6;

void emit(const Json& j) { std::cout << j.dump(2) << "\n"; }

std::vector<double> radii_up_to(double mmax) {
  std::vector<double> r;
  for (double m = 1; m < mmax; m *= 10) r.push_back(m);
  r.push_back(mmax);
  return r;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw nogap::io::InputError("not a number in list: \"" + item + "\"");
    }
  }
  if (out.empty()) throw nogap::io::InputError("empty list");
  return out;
}

Json solve_json(const nogap::SolveReport& r, double tol, const std::optional<double>& tail) {
  Json trace = Json::array();
  for (const auto& e : r.radius_trace)
    trace.push_back({{"radius", e.radius},
                     {"value", num(e.value)},
                     {"boundary_slope", num(e.boundary_slope)},
                     {"interior", e.interior},
                     {"status", to_string(e.status)}});
  Json j = {{"status", nogap::to_string(r.status)},
            {"primal_value", num(r.primal_value)},
            {"lower_bound", num(r.lower_bound)},
            {"certified_gap", num(r.certified_gap)},
            {"tolerance", tol}};
  if (tail) j["truncation_bound"] = *tail;
  j["x_star"] = r.x_star ? nogap::io::to_json(*r.x_star) : Json(nullptr);
  if (r.recession_direction) j["recession_direction"] = nogap::io::to_json(*r.recession_direction);
  j["leaf_multipliers"] = nums(r.leaf_multipliers);
  j["radius_trace"] = trace;
  return j;
}

Json hypotheses_json(const nogap::Hypotheses& h) {
  return {{"lineality", h.lineality},
          {"two_lambda", h.two_lambda},
          {"certificate_valid", h.certificate_valid},
          {"verified", h.verified()},
          {"density", h.density ? nums(*h.density) : Json(nullptr)},
          {"lambdas", nums(h.lambdas)}};
}

Json two_lambda_json(const nogap::TwoLambdaReport& r) {
  Json ev = Json::array();
  for (auto [l, v] : r.evaluated) ev.push_back({{"lambda", l}, {"value", num(v)}});
  return {{"satisfied", r.satisfied},
          {"via_elasticity", r.via_elasticity},
          {"lambdas_finite", nums(r.lambdas_finite)},
          {"pins", nums(r.pins)},
          {"pin_tolerance", 1e-12},
          {"evaluated", ev}};
}

Json density_json(const std::optional<nogap::LeafField>& y, bool equivalent) {
  return {{"found", y.has_value()},
          {"equivalent_requested", equivalent},
          {"density", y ? nums(*y) : Json(nullptr)},
          {"tolerance", kMartingaleTol}};
}

// ---- commands --------------------------------------------------------------

int cmd_validate(const std::string& path) {
  try {
    auto m = nogap::io::read_model(nogap::io::load(path));
    emit({{"command", "validate"},
          {"valid", true},
          {"nodes", m.tree.size()},
          {"leaves", m.tree.leaf_count()},
          {"horizon", m.tree.horizon()},
          {"assets", m.tree.assets()},
          {"utility_pieces", m.V.piece_count()}});
    return 0;
  } catch (const nogap::io::InputError& e) {
    emit({{"command", "validate"}, {"valid", false}, {"errors", {e.what()}}});
    std::cerr << "nogap: " << e.what() << "\n";
    return kExitInput;
  }
}

int cmd_solve(const std::string& path, double tol, double mmax) {
  auto m = nogap::io::read_model(nogap::io::load(path));
  nogap::AlmIntegrand I(m.tree, m.V, m.liability);
  nogap::SolveOptions opt;
  opt.tol = tol;
  opt.radii = radii_up_to(mmax);
  Json j = {{"command", "solve"}};
  j.update(solve_json(nogap::solve_primal(I, opt), tol, m.tail_bound));
  emit(j);
  return 0;
}

int cmd_gap(const std::string& path, const std::string& probes_path, bool assert_hyp) {
  auto m = nogap::io::read_model(nogap::io::load(path));
  nogap::AlmIntegrand I(m.tree, m.V, m.liability);
  std::vector<nogap::LeafField> probes;
  if (probes_path.empty()) {
    probes.push_back(m.liability);
  } else {
    Json pj = nogap::io::load(probes_path);
    const Json& arr = pj.is_object() ? nogap::io::field(pj, "probes", "probes") : pj;
    if (!arr.is_array()) throw nogap::io::InputError("probes: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      probes.push_back(nogap::io::read_leaf_values(arr[i], "probes[" + std::to_string(i) + "]", m.tree.leaf_count()));
  }
  auto rep = nogap::gap_suite(I, probes, kGapTol);
  Json rows = Json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"primal", num(r.primal)}, {"dual", num(r.dual)}, {"gap", num(r.gap)}, {"status", nogap::to_string(r.status)}});
  emit({{"command", "gap"},
        {"hypotheses", hypotheses_json(rep.hypotheses)},
        {"rows", rows},
        {"max_gap", num(rep.max_gap)},
        {"tolerance", kGapTol},
        {"asserted", rep.asserted},
        {"passed", rep.passed}});
  if (assert_hyp && !(rep.asserted && rep.passed)) return kExitAssert;
  return 0;
}

int cmd_na(const std::string& path) {
  auto m = nogap::io::read_model(nogap::io::load(path));
  auto r = nogap::na_check(m.tree);
  emit({{"command", "na"},
        {"no_arbitrage", r.no_arbitrage},
        {"objective", r.objective},
        {"tolerance", kLpTol},
        {"arbitrage", r.arbitrage ? nogap::io::to_json(*r.arbitrage) : Json(nullptr)}});
  return 0;
}

int cmd_mm(const std::string& path, bool equivalent) {
  auto m = nogap::io::read_model(nogap::io::load(path));
  Json j = {{"command", "mm"}};
  j.update(density_json(nogap::find_martingale_measure(m.tree, equivalent), equivalent));
  emit(j);
  return 0;
}

int cmd_twolambda(const std::string& path, const std::string& grid) {
  auto m = nogap::io::read_model(nogap::io::load(path));
  auto y = nogap::find_martingale_measure(m.tree, false);
  Json j = {{"command", "twolambda"}, {"density", y ? nums(*y) : Json(nullptr)}};
  if (!y) {
    j["satisfied"] = false;
    j["reason"] = "no martingale measure";
    emit(j);
    return 0;
  }
  auto g = grid.empty() ? nogap::default_lambda_grid() : parse_list(grid);
  j.update(two_lambda_json(nogap::two_lambda_check(m.tree, m.V, *y, g)));
  emit(j);
  return 0;
}

int cmd_dp(const std::string& path, double at) {
  auto m = nogap::io::read_model(nogap::io::load(path));
  nogap::DpResult r;
  if (m.tree.assets() == 1) {
    r = nogap::dp_backward(m.tree, m.V);
  } else {
    std::vector<double> grid;
    for (int k = -80; k <= 80; ++k) grid.push_back(0.125 * k);
    r = nogap::dp_backward_grid(m.tree, m.V, grid);
  }
  Json j = {{"command", "dp"},
            {"exact", r.exact},
            {"minus_infinity", r.minus_infinity[0]},
            {"at", at},
            {"root_value", num(r.root_value(at))},
            {"root", r.value[0] ? nogap::io::to_json(*r.value[0]) : Json(nullptr)}};
  if (!r.exact) j["grid"] = {{"lo", r.grid.front()}, {"hi", r.grid.back()}, {"points", r.grid.size()}};
  if (m.tail_bound) j["truncation_bound"] = *m.tail_bound;
  emit(j);
  return 0;
}

int cmd_superhedge(const std::string& path, const std::string& claim) {
  auto m = nogap::io::read_model(nogap::io::load(path));
  auto u = nogap::io::read_leaf_values(nogap::io::load(claim), "claim", m.tree.leaf_count());
  auto r = nogap::superhedge(m.tree, u);
  emit({{"command", "superhedge"},
        {"status", r.status},
        {"price", num(r.price)},
        {"dual_price", num(r.dual_price)},
        {"tolerance", 1e-8},
        {"strategy", r.strategy ? nogap::io::to_json(*r.strategy) : Json(nullptr)},
        {"q_density", r.q_density ? nums(*r.q_density) : Json(nullptr)}});
  return 0;
}

int cmd_remark3(int pieces) {
  auto m = nogap::remark3_model(pieces);
  nogap::AlmIntegrand I(m.tree, m.V, {0.0, 0.0});
  auto y = nogap::find_martingale_measure(m.tree, false);
  auto tl = nogap::two_lambda_check(m.tree, m.V, *y);
  // The truncated problem is attained once the box reaches N, so the trace
  // stops just short of it.
  nogap::SolveOptions opt;
  opt.radii.clear();
  for (double r = 1; r < pieces - 1; r *= 2) opt.radii.push_back(r);
  opt.radii.push_back(pieces - 1);
  auto sol = nogap::solve_primal(I, opt);
  auto dual = nogap::dual_value(I);
  nogap::io::Model model{m.tree, m.V, {0.0, 0.0}, m.tail_bound};
  emit({{"command", "remark3"},
        {"n_pieces", pieces},
        {"truncation_bound", m.tail_bound},
        {"model", nogap::io::to_json(model)},
        {"no_arbitrage", nogap::na_check(m.tree).no_arbitrage},
        {"martingale_measure", density_json(y, false)},
        {"two_lambda", two_lambda_json(tl)},
        {"primal", solve_json(sol, opt.tol, m.tail_bound)},
        {"dual", {{"value", num(dual.dual_value)}, {"upper_bound", num(dual.upper_bound)}, {"y_star", dual.y_star ? nums(*dual.y_star) : Json(nullptr)}}},
        {"gap", num(sol.primal_value - dual.dual_value)}});
  return 0;
}

int cmd_suite(std::uint64_t seed, int count, bool csv, bool assert_gap) {
  nogap::random::Rng rng(seed);
  Json rows = Json::array();
  std::ostringstream table;
  table << nogap::csv_header() << "\n";
  int verified = 0, failures = 0;
  double worst = 0;
  for (int i = 0; i < count; ++i) {
    nogap::random::TreeSpec spec;
    spec.no_arbitrage = nogap::random::coin(rng, 0.8);
    auto tree = nogap::random::tree(rng, spec);
    auto kind = static_cast<nogap::random::UtilityKind>(i % 3);
    auto V = nogap::random::utility(rng, kind);
    auto u = nogap::random::liability(rng, tree);
    nogap::AlmIntegrand I(tree, V, u);
    bool na = nogap::na_check(tree).no_arbitrage;
    auto rep = nogap::gap_suite(I, {u}, kGapTol);
    const auto& r = rep.rows.front();
    bool attained = r.status == nogap::SolveStatus::kOptimal;
    if (rep.asserted) {
      ++verified;
      worst = std::max(worst, std::abs(r.gap));
      if (!rep.passed || !attained) ++failures;
    }
    rows.push_back({{"instance", i},
                    {"primal", num(r.primal)},
                    {"dual", num(r.dual)},
                    {"gap", num(r.gap)},
                    {"na", na},
                    {"two_lambda", rep.hypotheses.two_lambda},
                    {"attained", attained},
                    {"verified", rep.asserted}});
    table << i << "," << Json(num(r.primal)).dump() << "," << Json(num(r.dual)).dump() << "," << Json(num(r.gap)).dump()
          << "," << (na ? 1 : 0) << "," << (rep.hypotheses.two_lambda ? 1 : 0) << "," << (attained ? 1 : 0) << "\n";
  }
  if (csv) {
    std::cout << table.str();
  } else {
    emit({{"command", "suite"},
          {"seed", seed},
          {"count", count},
          {"verified", verified},
          {"failures", failures},
          {"max_gap_verified", worst},
          {"tolerance", kGapTol},
          {"rows", rows}});
  }
  if (assert_gap && failures > 0) return kExitAssert;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primal/dual solver for utility-based liability models on scenario trees"};
  app.require_subcommand(1);
  std::string model, probes, grid, claim;
  double tol = 1e-8, mmax = 1e4, at = 0.0;
  bool equivalent = false, assert_flag = false, csv = false;
  int pieces = 50, count = 20;
  std::uint64_t seed = 0;

  auto* validate = app.add_subcommand("validate", "Check a model file");
  validate->add_option("model", model, "model JSON")->required();
  auto* solve = app.add_subcommand("solve", "Solve the primal problem over growing boxes");
  solve->add_option("model", model, "model JSON")->required();
  solve->add_option("--tol", tol, "attainment tolerance");
  solve->add_option("--mmax", mmax, "largest box radius");
  auto* gap = app.add_subcommand("gap", "Primal, dual and hypotheses at one or more liabilities");
  gap->add_option("model", model, "model JSON")->required();
  gap->add_option("--probes", probes, "JSON list of liabilities");
  gap->add_flag("--assert", assert_flag, "exit 3 unless the hypotheses hold and every gap closes");
  auto* na = app.add_subcommand("na", "No-arbitrage check");
  na->add_option("model", model, "model JSON")->required();
  auto* mm = app.add_subcommand("mm", "Find a martingale measure");
  mm->add_option("model", model, "model JSON")->required();
  mm->add_flag("--equivalent", equivalent, "require an equivalent measure");
  auto* tl = app.add_subcommand("twolambda", "Integrability of V* along a martingale density");
  tl->add_option("model", model, "model JSON")->required();
  tl->add_option("--grid", grid, "comma-separated lambda grid");
  auto* dp = app.add_subcommand("dp", "Backward recursion for the value functions");
  dp->add_option("model", model, "model JSON")->required();
  dp->add_option("--at", at, "constant at which to report E V_0");
  auto* sh = app.add_subcommand("superhedge", "Superhedging price and its dual");
  sh->add_option("model", model, "model JSON")->required();
  sh->add_option("--claim", claim, "claim JSON with leaf_values")->required();
  auto* r3 = app.add_subcommand("remark3", "The built-in non-attainment example");
  r3->add_option("--pieces", pieces, "truncation N")->check(CLI::Range(3, 100000));
  auto* suite = app.add_subcommand("suite", "Randomized gap and attainment suite");
  suite->add_option("--seed", seed, "random seed");
  suite->add_option("--count", count, "number of instances")->check(CLI::PositiveNumber);
  suite->add_flag("--csv", csv, "print CSV instead of JSON");
  suite->add_flag("--assert", assert_flag, "exit 3 if a verified instance keeps a gap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(model);
    if (*solve) return cmd_solve(model, tol, mmax);
    if (*gap) return cmd_gap(model, probes, assert_flag);
    if (*na) return cmd_na(model);
    if (*mm) return cmd_mm(model, equivalent);
    if (*tl) return cmd_twolambda(model, grid);
    if (*dp) return cmd_dp(model, at);
    if (*sh) return cmd_superhedge(model, claim);
    if (*r3) return cmd_remark3(pieces);
    if (*suite) return cmd_suite(seed, count, csv, assert_flag);
  } catch (const nogap::io::InputError& e) {
    std::cerr << "nogap: " << e.what() << "\n";
    return kExitInput;
  } catch (const nogap::DomainError& e) {
    std::cerr << "nogap: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "nogap: internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
