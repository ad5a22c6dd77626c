// Acceptance harness: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dbell/campaign.hpp"
#include "oracles.hpp"

using namespace dbell;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

bool check_ok(const VerificationReport& r, const std::string& name, std::string& detail) {
  const CheckResult* c = r.find(name);
  if (!c) {
    detail += " " + name + "=missing";
    return false;
  }
  detail += " " + name + (c->pass() ? "=ok" : "=FAILED(" + std::to_string(c->violations) + "/" +
                                                  std::to_string(c->count) + ", worst " + fmt(c->worst_margin) + ")");
  return c->pass();
}

OrliczSweep corpus_sweep() {
  const CampaignConfig c;
  return orlicz_sweep(c.family, 1000, 8, sub_seed(c.seed, 3), 20.0);
}

Outcome criterion1() {
  const OrliczSweep o = corpus_sweep();
  const double cstar = std::max(o.ratio_max, 1.0 / o.ratio_min);
  const bool ok = o.report.find("norm_equivalence")->pass() && cstar <= 20.0 && std::isfinite(o.ratio_max);
  return {ok, "1000 weights, ratio in [" + fmt(o.ratio_min) + ", " + fmt(o.ratio_max) + "], C* = " + fmt(cstar) +
                  ", dist <= " + fmt(o.ratio_max) + " * def"};
}

Outcome criterion2() {
  const OrliczSweep o = corpus_sweep();
  const bool ok = o.report.find("self_improvement_finite")->pass() && std::isfinite(o.selfimp_max) && o.selfimp_max > 0;
  return {ok, "single C = " + fmt(o.selfimp_max) + " over " + std::to_string(1000 - o.skipped) + " weights"};
}

Outcome criterion3() {
  ConstantBudget b;
  const BellmanModel m = make_model(BumpFamily::log(1.0), PhiMap(GapFunction::power(0.25)), b);
  const VerificationReport r = b1_property_check(default_omega1_grid(b), m);
  std::string d;
  bool ok = check_ok(r, "bounds", d) & check_ok(r, "derivative_floor", d) & check_ok(r, "hessian_nsd", d);
  const std::size_t n = r.find("derivative_floor")->count;
  ok = ok && n >= 10000;
  const CheckResult* neg = r.find("negativity_region");
  const bool region = neg && std::isfinite(neg->value) && neg->pass() && !r.series.empty();
  ok = ok && region;
  return {ok, std::to_string(n) + " points;" + d + "; B1 < 0 for A < N/x*, x* = " + fmt(neg ? neg->value : NAN) +
                  (region ? " (region reported)" : " (region missing)")};
}

Outcome criterion4() {
  ConstantBudget b;
  b.delta = 1e-3;
  b.P = 100.0;
  const BellmanModel m = make_model(BumpFamily::log(0.5), PhiMap(GapFunction::power(0.25)), b);
  const VerificationReport r = b2_property_check(default_omega2_grid(), m);
  std::string d;
  bool ok = check_ok(r, "closed_vs_quadrature", d) & check_ok(r, "hessian_det_zero", d) & check_ok(r, "combined_drop", d);
  const CheckResult* comb = r.find("combined_drop");
  const auto scan = combined_drop_delta_scan(m.pm, b.P, {1e-3, 1e-4, 2.5e-5, 1e-5});
  double largest = 0.0;
  for (auto& row : scan)
    if (row.inf_ratio > 0.0) largest = std::max(largest, row.delta);
  ok = ok && comb && comb->value > 0.0;
  return {ok, std::to_string(r.find("closed_vs_quadrature")->count) + " points at delta = 1e-3;" + d +
                  "; combined c = " + fmt(comb ? comb->value : NAN) + "; largest passing delta in scan " + fmt(largest)};
}

Outcome criterion5() {
  const VerificationReport p = g_positivity(PhiMap(GapFunction::power(0.25)), 1e-6, 1e-1, 200);
  std::string d;
  bool ok = check_ok(p, "matches_closed_form", d) & check_ok(p, "g_positive", d);
  const BumpPairing ll = catalog_pairing(BumpFamily::loglog(2.0, 0.1));
  const PhiMap pm(ll.eps);
  const double hi = std::min(0.1, pm.y_max());
  const VerificationReport q = g_positivity(pm, std::min(1e-6, 0.5 * hi), hi, 200);
  std::string e;
  ok = ok & check_ok(q, "g_positive", e) & check_ok(q, "g_nondecreasing", e);
  return {ok, "power: worst rel err " + fmt(p.find("matches_closed_form")->value) + d + "; loglog(" + ll.eps.name() +
                  ", s <= " + fmt(hi) + "):" + e};
}

Outcome criterion6() {
  const VerificationReport r = aux_T_check(10000, 20261014, 2.0);
  std::string d;
  bool ok = true;
  for (const char* n : {"T_A_floor", "minor_positive", "minor_formula", "det_zero"}) ok = check_ok(r, n, d) && ok;
  return {ok, "10000 points, xy <= 2;" + d};
}

Outcome criterion7() {
  const CampaignConfig c;
  const auto insts = suite_instances(c);
  int max_depth = 0;
  for (auto& in : insts) max_depth = std::max(max_depth, in.depth);
  const VerificationReport g = green_suite(c, insts);
  const VerificationReport r = glav_refinement(c);
  std::string d;
  bool ok = check_ok(g, "telescoping_tolerance", d) & check_ok(g, "single_positive_C", d) &
            check_ok(g, "sup_ratio_finite", d) & check_ok(r, "sup_ratio_stable", d) & check_ok(r, "sup_ratio_finite", d);
  ok = ok && insts.size() == 100 && max_depth <= 10;
  return {ok, std::to_string(insts.size()) + " instances (depth <= " + std::to_string(max_depth) + "), C = " +
                  fmt(g.find("single_positive_C")->value) + ", refinement 8->12 worst change " +
                  fmt(r.find("sup_ratio_stable")->value) + ";" + d};
}

Outcome criterion8() {
  std::size_t cases = 0, failures = 0;
  double worst = 0.0;
  const double levels[3] = {0.0, 1.0 / 3.0, 1.0};
  auto run_case = [&](int depth, const std::vector<int>& pattern, std::uint64_t seed) {
    CarlesonSequence seq(5.0);
    NodeArray<double> a(depth, 0.0);
    for (std::size_t h = 0; h < pattern.size(); ++h) {
      a.at_heap(h) = levels[pattern[h]];
      seq.set(DyadicIndex::from_heap(h), a.at_heap(h));
    }
    const LeafWeight u = random_lognormal_weight(depth, seed ^ 0x11);
    const LeafWeight v = random_cascade_weight(depth, seed ^ 0x22);
    const LeafWeight f = random_lognormal_weight(depth, seed ^ 0x33, 1.5);
    double e = 0.0;
    const LeafWeight Tf = apply_sparse(a, f);
    const auto want = oracle::sparse(a, f);
    for (std::size_t x = 0; x < f.size(); ++x) e = std::max(e, oracle::rel(Tf[x], want[x]));
    const auto S = glav_lhs(u, v, a);
    for (auto& I : oracle::all_intervals(depth)) {
      e = std::max(e, oracle::rel(l_intensity(u, v, seq, I), oracle::l_intensity(u, v, a, I)));
      e = std::max(e, oracle::rel(S[I], oracle::glav(u, v, a, I)));
    }
    ++cases;
    if (!(e <= 1e-12)) ++failures;
    worst = std::max(worst, e);
  };
  std::size_t exhaustive = 0;
  for (int depth = 0; depth <= 2; ++depth) {
    const std::size_t n = node_count(depth);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<int> p(n);
      std::size_t c = code;
      for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<int>(c % 3), c /= 3;
      run_case(depth, p, code * 7919 + depth);
      ++exhaustive;
    }
  }
  num::Rng rng(8);
  for (int depth = 3; depth <= 4; ++depth)
    for (int k = 0; k < 600; ++k) {
      std::vector<int> p(node_count(depth));
      for (auto& x : p) x = static_cast<int>(rng.below(3));
      run_case(depth, p, rng.next());
    }
  const bool ok = cases >= 1000 && failures == 0;
  return {ok, std::to_string(cases) + " cases (" + std::to_string(exhaustive) +
                  " exhaustive at depth <= 2, 1200 random at depths 3-4), " + std::to_string(failures) +
                  " mismatches, worst relative difference " + fmt(worst)};
}

Outcome criterion9() {
  std::vector<ObstructionReport> reps;
  std::string d;
  bool ok = true;
  for (int depth : {10, 20, 40}) {
    reps.push_back(run_obstruction(depth));
    const auto& r = reps.back().report;
    for (const char* n : {"average_bounds", "uncovered_fraction", "uv_one_on_stopping", "A2_post_scaling",
                          "carleson_le_1", "S_dominates_maximal"})
      if (!r.find(n)->pass()) ok = false, d += " d" + std::to_string(depth) + ":" + n + "=FAILED";
  }
  const DepthSweep s = obstruction_depth_sweep(reps);
  ok = ok && s.strictly_increasing && s.increment_spread <= 0.35;
  return {ok, "S/mass = " + fmt(s.ratio[0]) + ", " + fmt(s.ratio[1]) + ", " + fmt(s.ratio[2]) + "; increment spread " +
                  fmt(s.increment_spread) + (d.empty() ? "; all invariants hold" : ";" + d)};
}

Outcome criterion10() {
  const CampaignConfig c;
  const VerificationReport r = gradient_checks(campaign_model(c), 1000, sub_seed(c.seed, 5));
  std::string d;
  bool ok = true;
  for (const char* n : {"b1", "b2", "T"}) {
    ok = check_ok(r, n, d) && ok;
    d += "(" + fmt(r.find(n)->value) + ")";
  }
  return {ok, "1000 points per function;" + d};
}

struct Criterion {
  const char* title;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::map<int, Criterion> all{
      {1, {"Orlicz norm equivalence", 30, criterion1}},
      {2, {"self-improvement constant", 60, criterion2}},
      {3, {"B1 properties", 60, criterion3}},
      {4, {"B2 closed form, determinant, combined drop", 120, criterion4}},
      {5, {"g positivity", 60, criterion5}},
      {6, {"auxiliary T lemma", 60, criterion6}},
      {7, {"Green induction and refinement", 300, criterion7}},
      {8, {"small-instance oracle equivalence", 60, criterion8}},
      {9, {"obstruction depth sweep", 120, criterion9}},
      {10, {"gradient checks", 60, criterion10}},
  };
  bool all_pass = true;
  for (auto& [id, c] : all) {
    if (only && id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    all_pass = all_pass && pass;
    std::printf("%s criterion %d (%s): %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", id, c.title, o.detail.c_str(), secs,
                in_time ? "" : ", over time budget");
  }
  return all_pass ? 0 : 1;
}
