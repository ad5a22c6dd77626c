#pragma once

// Campaign configuration and drivers. A campaign loads and validates all of
// its inputs first, computes every report in memory, and only then writes
// report.json, summary.csv and the plot series.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "dbell/bellman.hpp"
#include "dbell/bump.hpp"
#include "dbell/instances.hpp"
#include "dbell/io.hpp"
#include "dbell/obstruction.hpp"
#include "dbell/report.hpp"
#include "dbell/sparse.hpp"

namespace dbell {

inline constexpr const char* kToolName = "dbell";
inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string>& campaign_names() {
  static const std::vector<std::string> names{"bump-check", "orlicz", "bellman-b1", "bellman-b2",
                                              "glav",       "testing", "obstruction", "full"};
  return names;
}

struct Tolerances {
  double telescoping = 1e-10;
  double refinement = 0.1;     // relative change of the glav sup ratio
  double C_star = 20.0;        // norm equivalence window [1/C*, C*]
  double bump_target = 0.01;   // normalized one-sided bump constant
  double roundtrip = 1e-12;    // φ(φ⁻¹(y)) relative residual
  double gap_C = 10.0;         // Ψ₀ ≤ C·Ψ·ε(Ψ)
  double weak_concavity_floor = 0.1;
  double increment_spread = 0.35;
};

struct GeneratorSpec {
  std::size_t count = 100;
  int depth_min = 4;
  int depth_max = 10;
  std::uint64_t seed = 1;
};

struct CampaignConfig {
  BumpPairing family = catalog_pairing(BumpFamily::log(1.0));
  ConstantBudget budget = [] {
    ConstantBudget b;
    b.delta = 1e-5;
    return b;
  }();
  GridSpec omega1 = default_omega1_grid(ConstantBudget{});
  GridSpec omega2 = default_omega2_grid();
  GridSpec b0 = [] {
    GridSpec g;
    g.dims["u"] = {1e-8, 1.0, 16, true};
    g.dims["v"] = {1e-8, 1.0, 16, true};
    g.dims["A"] = {0.0, 1.0, 6, false};
    return g;
  }();
  std::vector<io::InstanceBundle> bundles;  // empty: use the generator
  GeneratorSpec generator;
  std::size_t corpus_count = 1000;
  int corpus_max_depth = 8;
  std::size_t refinement_count = 10;
  int refinement_coarse = 8;
  int refinement_fine = 12;
  std::vector<int> obstruction_depths{10, 20, 40};
  bool emit_bundle = true;
  std::size_t gradient_points = 1000;
  std::size_t aux_T_points = 10000;
  double aux_T_xy_max = 2.0;
  double g_s_min = 1e-6, g_s_max = 1e-1;
  std::size_t g_count = 200;
  std::size_t weak_concavity_trials = 100000;
  std::vector<double> delta_scan{1e-3, 3e-4, 1e-4, 5e-5, 2.5e-5, 1e-5, 1e-6};
  Tolerances tol;
  std::uint64_t seed = 1;
  std::string out = "out";
  int depth_cap = kDefaultDepthCap;
  json resolved = json::object();  // canonical form, hashed into the report
};

// ---------------------------------------------------------------------------
// Configuration loading.

inline CarlesonNormalization normalization_for(const CarlesonSequence& a) {
  if (a.bound() <= 1.0) return CarlesonNormalization::Unit;
  if (a.bound() <= 2.0) return CarlesonNormalization::Lerner;
  throw InputError("Carleson bound " + format_number(a.bound()) + " exceeds 2");
}

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> depth;
  std::optional<std::string> family_path;
};

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t key) { return num::splitmix64(seed ^ num::splitmix64(key)); }

inline CampaignConfig parse_config(const json& j, const std::string& where, const CliOverrides& cli = {}) {
  using namespace io;
  require_object(j, where);
  reject_unknown(j, where,
                 {"family", "budget", "grids", "instances", "corpus", "refinement", "obstruction", "gradients", "aux_T",
                  "g_positivity", "weak_concavity", "delta_scan", "tolerances", "seed", "out", "depth_cap"});
  CampaignConfig c;
  c.depth_cap = static_cast<int>(get_integer(j, "depth_cap", where, kDefaultDepthCap));
  if (c.depth_cap < 0 || c.depth_cap > kMaxLevel) throw InputError(where + ".depth_cap: out of range");
  const long long seed = get_integer(j, "seed", where, 1);
  if (seed < 0) throw InputError(where + ".seed: must be nonnegative");
  c.seed = cli.seed.value_or(static_cast<std::uint64_t>(seed));
  c.out = cli.out.value_or(j.contains("out") ? get_string(j, "out", where) : c.out);

  json family_json = bump_to_json(c.family.phi);
  if (cli.family_path) {
    family_json = load_json(*cli.family_path);
    c.family = parse_family(family_json, *cli.family_path);
  } else if (j.contains("family")) {
    if (j["family"].is_string()) {
      const std::string p = j["family"].get<std::string>();
      family_json = load_json(p);
      c.family = parse_family(family_json, p);
    } else {
      family_json = j["family"];
      c.family = parse_family(family_json, where + ".family");
    }
  }
  if (j.contains("budget")) c.budget = parse_budget(j["budget"], where + ".budget", c.budget);
  c.omega1 = default_omega1_grid(c.budget);

  if (j.contains("grids")) {
    const json& g = j["grids"];
    require_object(g, where + ".grids");
    reject_unknown(g, where + ".grids", {"omega1", "omega2", "b0"});
    if (g.contains("omega1")) c.omega1 = parse_grid(g["omega1"], where + ".grids.omega1", c.omega1);
    if (g.contains("omega2")) c.omega2 = parse_grid(g["omega2"], where + ".grids.omega2", c.omega2);
    if (g.contains("b0")) c.b0 = parse_grid(g["b0"], where + ".grids.b0", c.b0);
  }
  for (const char* d : {"N", "A"}) c.omega1.axis(d).validate(std::string("omega1.") + d);
  for (const char* d : {"u", "v", "L", "A"}) c.omega2.axis(d).validate(std::string("omega2.") + d);
  for (const char* d : {"u", "v", "A"}) c.b0.axis(d).validate(std::string("b0.") + d);

  c.generator.seed = sub_seed(c.seed, 1);
  if (j.contains("instances")) {
    const std::string at = where + ".instances";
    const json& in = j["instances"];
    require_object(in, at);
    reject_unknown(in, at, {"paths", "count", "depth_min", "depth_max"});
    if (in.contains("paths")) {
      if (!in["paths"].is_array() || in["paths"].empty()) throw InputError(at + ".paths: expected a nonempty array");
      for (std::size_t i = 0; i < in["paths"].size(); ++i) {
        if (!in["paths"][i].is_string()) throw InputError(at + ".paths[" + std::to_string(i) + "]: expected a string");
        c.bundles.push_back(load_bundle(in["paths"][i].get<std::string>(), c.depth_cap));
        const auto& b = c.bundles.back();
        try {
          (void)SparseOperator(b.u.depth(), b.a, normalization_for(b.a));
        } catch (const DomainError& e) {
          throw InputError(b.label + ": " + e.what());
        }
      }
    }
    c.generator.count = get_count(in, "count", at, c.generator.count);
    c.generator.depth_min = static_cast<int>(get_integer(in, "depth_min", at, c.generator.depth_min));
    c.generator.depth_max = static_cast<int>(get_integer(in, "depth_max", at, c.generator.depth_max));
  }
  if (cli.depth) {
    c.generator.depth_max = *cli.depth;
    c.generator.depth_min = std::min(c.generator.depth_min, *cli.depth);
  }
  if (c.generator.depth_min < 1 || c.generator.depth_min > c.generator.depth_max)
    throw InputError(where + ".instances: need 1 <= depth_min <= depth_max");
  if (c.generator.depth_max > c.depth_cap)
    throw ResourceError("instance depth " + std::to_string(c.generator.depth_max) + " exceeds the cap " +
                        std::to_string(c.depth_cap));

  if (j.contains("corpus")) {
    const std::string at = where + ".corpus";
    require_object(j["corpus"], at);
    reject_unknown(j["corpus"], at, {"count", "max_depth"});
    c.corpus_count = get_count(j["corpus"], "count", at, c.corpus_count);
    c.corpus_max_depth = static_cast<int>(get_integer(j["corpus"], "max_depth", at, c.corpus_max_depth));
  }
  if (c.corpus_max_depth < 1) throw InputError(where + ".corpus.max_depth: must be at least 1");
  check_depth(c.corpus_max_depth, c.depth_cap);

  if (j.contains("refinement")) {
    const std::string at = where + ".refinement";
    require_object(j["refinement"], at);
    reject_unknown(j["refinement"], at, {"count", "coarse", "fine"});
    c.refinement_count = get_count(j["refinement"], "count", at, c.refinement_count);
    c.refinement_coarse = static_cast<int>(get_integer(j["refinement"], "coarse", at, c.refinement_coarse));
    c.refinement_fine = static_cast<int>(get_integer(j["refinement"], "fine", at, c.refinement_fine));
  }
  if (c.refinement_coarse < 1 || c.refinement_fine <= c.refinement_coarse)
    throw InputError(where + ".refinement: need 1 <= coarse < fine");
  check_depth(c.refinement_fine, c.depth_cap);

  if (j.contains("obstruction")) {
    const std::string at = where + ".obstruction";
    require_object(j["obstruction"], at);
    reject_unknown(j["obstruction"], at, {"depths", "emit_bundle"});
    if (j["obstruction"].contains("depths")) {
      const json& d = j["obstruction"]["depths"];
      if (!d.is_array() || d.empty()) throw InputError(at + ".depths: expected a nonempty array");
      c.obstruction_depths.clear();
      for (auto& x : d) {
        if (!x.is_number_integer()) throw InputError(at + ".depths: expected integers");
        c.obstruction_depths.push_back(x.get<int>());
      }
    }
    if (j["obstruction"].contains("emit_bundle")) {
      if (!j["obstruction"]["emit_bundle"].is_boolean()) throw InputError(at + ".emit_bundle: expected a boolean");
      c.emit_bundle = j["obstruction"]["emit_bundle"].get<bool>();
    }
  }
  if (cli.depth) c.obstruction_depths = {*cli.depth};
  for (int d : c.obstruction_depths)
    if (d < 1 || d > kMaxLevel - 4) throw InputError(where + ".obstruction.depths: depth " + std::to_string(d) + " out of range");

  if (j.contains("gradients")) {
    require_object(j["gradients"], where + ".gradients");
    reject_unknown(j["gradients"], where + ".gradients", {"points"});
    c.gradient_points = get_count(j["gradients"], "points", where + ".gradients", c.gradient_points);
  }
  if (j.contains("aux_T")) {
    const std::string at = where + ".aux_T";
    require_object(j["aux_T"], at);
    reject_unknown(j["aux_T"], at, {"points", "xy_max"});
    c.aux_T_points = get_count(j["aux_T"], "points", at, c.aux_T_points);
    c.aux_T_xy_max = positive(get_number(j["aux_T"], "xy_max", at, c.aux_T_xy_max), at + ".xy_max");
  }
  if (j.contains("g_positivity")) {
    const std::string at = where + ".g_positivity";
    require_object(j["g_positivity"], at);
    reject_unknown(j["g_positivity"], at, {"s_min", "s_max", "count"});
    c.g_s_min = positive(get_number(j["g_positivity"], "s_min", at, c.g_s_min), at + ".s_min");
    c.g_s_max = positive(get_number(j["g_positivity"], "s_max", at, c.g_s_max), at + ".s_max");
    c.g_count = get_count(j["g_positivity"], "count", at, c.g_count);
    if (!(c.g_s_min < c.g_s_max)) throw InputError(at + ": need s_min < s_max");
  }
  if (j.contains("weak_concavity")) {
    require_object(j["weak_concavity"], where + ".weak_concavity");
    reject_unknown(j["weak_concavity"], where + ".weak_concavity", {"trials"});
    c.weak_concavity_trials = get_count(j["weak_concavity"], "trials", where + ".weak_concavity", c.weak_concavity_trials);
  }
  if (j.contains("delta_scan")) {
    if (!j["delta_scan"].is_array() || j["delta_scan"].empty()) throw InputError(where + ".delta_scan: expected a nonempty array");
    c.delta_scan.clear();
    for (auto& x : j["delta_scan"]) {
      if (!x.is_number()) throw InputError(where + ".delta_scan: expected numbers");
      c.delta_scan.push_back(positive(x.get<double>(), where + ".delta_scan"));
    }
  }
  if (j.contains("tolerances")) {
    const std::string at = where + ".tolerances";
    const json& t = j["tolerances"];
    require_object(t, at);
    reject_unknown(t, at, {"telescoping", "refinement", "C_star", "bump_target", "roundtrip", "gap_C",
                           "weak_concavity_floor", "increment_spread"});
    auto opt = [&](const char* key, double& slot) {
      if (t.contains(key)) slot = positive(get_number(t, key, at), at + "." + key);
    };
    opt("telescoping", c.tol.telescoping);
    opt("refinement", c.tol.refinement);
    opt("C_star", c.tol.C_star);
    opt("bump_target", c.tol.bump_target);
    opt("roundtrip", c.tol.roundtrip);
    opt("gap_C", c.tol.gap_C);
    opt("weak_concavity_floor", c.tol.weak_concavity_floor);
    opt("increment_spread", c.tol.increment_spread);
  }

  // Resolve the budget once so that bad combinations fail before any work.
  try {
    make_model(c.family, c.budget);
  } catch (const DomainError& e) {
    throw InputError(where + ": " + e.what());
  }

  json paths = json::array();
  for (auto& b : c.bundles) paths.push_back(b.label);
  json depths = c.obstruction_depths;
  c.resolved = {{"family", pairing_to_json(c.family)},
                {"budget", budget_to_json(c.budget)},
                {"instances", {{"paths", paths},
                               {"count", c.generator.count},
                               {"depth_min", c.generator.depth_min},
                               {"depth_max", c.generator.depth_max}}},
                {"corpus", {{"count", c.corpus_count}, {"max_depth", c.corpus_max_depth}}},
                {"refinement", {{"count", c.refinement_count}, {"coarse", c.refinement_coarse}, {"fine", c.refinement_fine}}},
                {"obstruction", {{"depths", depths}, {"emit_bundle", c.emit_bundle}}},
                {"gradients", {{"points", c.gradient_points}}},
                {"aux_T", {{"points", c.aux_T_points}, {"xy_max", c.aux_T_xy_max}}},
                {"g_positivity", {{"s_min", c.g_s_min}, {"s_max", c.g_s_max}, {"count", c.g_count}}},
                {"weak_concavity", {{"trials", c.weak_concavity_trials}}},
                {"delta_scan", c.delta_scan},
                {"seed", c.seed},
                {"depth_cap", c.depth_cap}};
  auto grid_json = [](const GridSpec& g) {
    json dims = json::object();
    for (auto& [k, a] : g.dims) dims[k] = {{"min", a.min}, {"max", a.max}, {"count", a.count}, {"log", a.log}};
    return json{{"dims", dims}, {"sampling", g.lattice ? "lattice" : "rejection"}, {"seed", g.seed}, {"points", g.points}};
  };
  c.resolved["grids"] = {{"omega1", grid_json(c.omega1)}, {"omega2", grid_json(c.omega2)}, {"b0", grid_json(c.b0)}};
  c.resolved["tolerances"] = {{"telescoping", c.tol.telescoping},
                              {"refinement", c.tol.refinement},
                              {"C_star", c.tol.C_star},
                              {"bump_target", c.tol.bump_target},
                              {"roundtrip", c.tol.roundtrip},
                              {"gap_C", c.tol.gap_C},
                              {"weak_concavity_floor", c.tol.weak_concavity_floor},
                              {"increment_spread", c.tol.increment_spread}};
  return c;
}

inline CampaignConfig load_config(const std::string& path, const CliOverrides& cli = {}) {
  return parse_config(io::load_json(path), path, cli);
}

inline std::string config_hash(const CampaignConfig& c) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(num::fnv1a(c.resolved.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Helpers.

inline BellmanModel campaign_model(const CampaignConfig& c) { return make_model(c.family, c.budget); }

/// Merges the checks of r into suite by name; the worst point records the instance.
inline void merge_checks(VerificationReport& suite, const VerificationReport& r, double instance) {
  for (const auto& c : r.checks) {
    CheckResult* dst = nullptr;
    for (auto& s : suite.checks)
      if (s.name == c.name) dst = &s;
    if (!dst) {
      CheckResult fresh(c.name, c.strict);
      fresh.informational = c.informational;
      fresh.note = c.note;
      dst = &suite.add(fresh);
    }
    const bool first = dst->count == 0;
    dst->count += c.count;
    dst->violations += c.violations;
    dst->informational = dst->informational && c.informational;
    if (c.count > 0 && (first || c.worst_margin < dst->worst_margin)) {
      dst->worst_margin = c.worst_margin;
      dst->worst_point = c.worst_point;
      dst->worst_point.insert(dst->worst_point.begin(), {"instance", instance});
      dst->value = c.value;
    }
  }
}

struct SuiteInstance {
  std::string label;
  int depth;
  LeafWeight u, v;
  CarlesonSequence a;
};

inline std::vector<SuiteInstance> suite_instances(const CampaignConfig& c) {
  std::vector<SuiteInstance> out;
  if (!c.bundles.empty()) {
    for (auto& b : c.bundles) out.push_back({b.label, b.u.depth(), b.u, b.v, b.a});
    return out;
  }
  const int span = c.generator.depth_max - c.generator.depth_min + 1;
  for (std::size_t i = 0; i < c.generator.count; ++i) {
    const int d = c.generator.depth_min + static_cast<int>(i % static_cast<std::size_t>(span));
    Instance inst = random_instance(d, sub_seed(c.generator.seed, i));
    out.push_back({"generated#" + std::to_string(i), d, std::move(inst.u), std::move(inst.v), std::move(inst.a)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// bump-check: structural hypotheses on Φ, Φ₀, ε and φ.

inline std::vector<VerificationReport> campaign_bump_check(const CampaignConfig& c) {
  const BumpPairing& pr = c.family;
  VerificationReport r;
  r.name = "family";
  auto flag = [&](const std::string& name, bool ok, const std::string& note, bool informational = false) {
    CheckResult k(name);
    k.note = note;
    k.informational = informational;
    k.observe(ok ? 0.0 : -1.0, {});
    r.add(k);
  };
  for (auto [label, fam] : {std::pair<const char*, const BumpFamily*>{"phi", &pr.phi}, {"phi0", &pr.phi0}}) {
    const FamilyInvariants inv = family_invariants(*fam);
    const std::string p = label;
    flag(p + ":increasing", inv.phi_increasing, "Phi increasing on [1, 1e6]");
    flag(p + ":convex", inv.phi_convex, "Phi convex on [1, 1e6]");
    flag(p + ":psi_decreasing", inv.psi_decreasing, "Psi decreasing on (0, 1]");
    flag(p + ":s_psi_increasing", inv.s_psi_increasing, "s*Psi(s) increasing on (0, 1]");
    CheckResult g(p + ":psi_integrable");
    g.note = "G(1) = integral of ds/(s Psi) on (0, 1] is finite";
    g.value = inv.psi_integral_at_one;
    g.observe(std::isfinite(inv.psi_integral_at_one) ? 0.0 : -1.0, {});
    r.add(g);
    const IntegralVerdict iv = integrability_phi(*fam);
    CheckResult k(p + ":phi_integrable");
    k.note = std::string("integral of dt/Phi on [1, inf): ") + verdict_name(iv.verdict);
    k.value = iv.value();
    k.observe(iv.verdict == Verdict::Finite ? 0.0 : -1.0, {});
    k.informational = iv.verdict == Verdict::Inconclusive;
    r.add(k);
  }
  const IntegralVerdict ev = epsilon_integrability(pr.eps);
  CheckResult ei("epsilon_integrable");
  ei.note = std::string("integral of eps(t)/t on [2, inf): ") + verdict_name(ev.verdict);
  ei.value = ev.value();
  ei.observe(ev.verdict == Verdict::Finite ? 0.0 : -1.0, {});
  r.add(ei);

  const GapHypothesis gh = gap_hypothesis(pr);
  CheckResult gap("gap_hypothesis");
  gap.note = "sup Psi0/(Psi*eps(Psi)) <= gap_C";
  gap.value = gh.worst_ratio;
  gap.observe(c.tol.gap_C - gh.worst_ratio, {{"s", gh.worst_s}});
  r.add(gap);

  const WeakConcavity wc = weak_concavity_probe(t_eps(pr.eps), 2.0, 1e6, c.weak_concavity_trials, sub_seed(c.seed, 2));
  CheckResult w("weak_concavity");
  w.note = wc.defined ? "inf of a(sum)/sum(a) for a(t) = t*eps(t) on [2, 1e6] above the floor" : wc.diagnostic;
  w.value = wc.worst;
  w.observe(wc.defined ? wc.worst - c.tol.weak_concavity_floor : -1.0, {{"n", double(wc.worst_n)}, {"mean", wc.worst_mean}});
  r.add(w);

  // Round trip and convexity of f = φ⁻¹ on the operating range.
  const PhiMap pm(pr.eps);
  const double y_hi = std::min(0.1, pm.y_max());
  CheckResult rt("phi_roundtrip"), fc("f_convex");
  rt.note = "|phi(f(y)) - y| <= roundtrip*y";
  fc.note = "second differences of f = phi^-1 nonnegative";
  const Axis ay{1e-14, y_hi, 400, true};
  for (std::size_t i = 0; i < ay.count; ++i) {
    const double y = ay.at(i);
    const double x = pm.inverse(y);
    rt.observe(c.tol.roundtrip - std::abs(pm.phi(x) - y) / y, {{"y", y}});
    const double h = 1e-3 * y;
    const double d2 = pm.inverse(y + h) - 2.0 * x + pm.inverse(y - h);
    fc.observe(d2 + 1e-9 * x, {{"y", y}});
  }
  r.add(rt);
  r.add(fc);

  const CurvTranslation ct = curv_translate(pr.eps);
  CheckResult cv("curv_regime");
  cv.informational = true;
  cv.note = std::string("regime: ") + regime_name(ct.regime);
  cv.value = ct.integral_ours.value();
  cv.observe(ct.regime == CurvRegime::Neither ? -1.0 : 0.0, {});
  r.add(cv);

  Series psi{"psi", {"s", "psi", "psi0", "s_psi"}, {}};
  for (int i = 0; i <= 120; ++i) {
    const double s = std::exp(-0.5 * i);
    psi.rows.push_back({s, pr.phi.psi(s), pr.phi0.psi(s), s * pr.phi.psi(s)});
  }
  r.series.push_back(std::move(psi));
  r.extra["phi"] = pr.phi.name();
  r.extra["phi0"] = pr.phi0.name();
  r.extra["epsilon"] = pr.eps.name();
  r.extra["weak_concavity_worst"] = number_or_null(wc.worst);
  r.extra["curv_regime"] = regime_name(ct.regime);
  r.extra["integral_ours"] = number_or_null(ct.integral_ours.value());
  r.extra["integral_curv"] = number_or_null(ct.integral_curv.value());
  return {r};
}

// ---------------------------------------------------------------------------
// orlicz: norm equivalence and self-improvement over a seeded corpus.

/// Weight #i of the corpus: depth 1..max_depth, lognormal, cascade or one tall leaf.
inline LeafWeight corpus_weight(std::size_t i, std::uint64_t seed, int max_depth) {
  const std::uint64_t s = sub_seed(seed, i);
  const int depth = 1 + static_cast<int>(i % static_cast<std::size_t>(max_depth));
  switch (i % 3) {
    case 0: return random_lognormal_weight(depth, s, 0.5 + 1.5 * num::hashed_unit(s, 1));
    case 1: return random_cascade_weight(depth, s, 0.3 + 0.6 * num::hashed_unit(s, 2));
    default: {
      std::vector<double> v(std::size_t{1} << depth, 1.0);
      v[static_cast<std::size_t>(num::hashed_unit(s, 3) * v.size())] = std::exp(10.0 * num::hashed_unit(s, 4));
      return LeafWeight(depth, std::move(v));
    }
  }
}

struct OrliczSweep {
  double ratio_min = num::kInf, ratio_max = 0.0;
  double selfimp_max = 0.0;
  std::size_t skipped = 0;
  VerificationReport report;
};

inline OrliczSweep orlicz_sweep(const BumpPairing& pr, std::size_t count, int max_depth, std::uint64_t seed,
                                double C_star) {
  struct Row {
    int depth;
    double avg, def, dist, ratio, si;
    bool skipped;
  };
  std::vector<Row> rows(count);
  num::parallel_for(count, [&](std::size_t i) {
    const LeafWeight w = corpus_weight(i, seed, max_depth);
    const DyadicIndex root = DyadicIndex::root();
    Row r{w.depth(), w.average(root), orlicz_norm_def(w, root, pr.phi), orlicz_norm_dist(w, root, pr.phi), 0.0, 0.0,
          false};
    r.ratio = r.dist / r.def;
    const SelfImprovement si = self_improvement_check(w, root, pr);
    r.skipped = si.skipped;
    r.si = si.ratio;
    rows[i] = r;
  });
  OrliczSweep o;
  VerificationReport& rep = o.report;
  rep.name = "orlicz";
  CheckResult eq("norm_equivalence"), si("self_improvement_finite", true), hom("homogeneity");
  eq.note = "dist/def ratio inside [1/C*, C*]";
  si.note = "smallest C with ||u||_Phi0 <= C ||u||_Phi eps(||u||_Phi/<u>); value is the corpus maximum";
  hom.note = "norm(c*w) = c*norm(w) within 1e-10";
  Series table{"corpus", {"index", "depth", "average", "norm_def", "norm_dist", "ratio", "selfimp_ratio"}, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const Row& r = rows[i];
    const Coords at{{"index", double(i)}, {"depth", double(r.depth)}};
    eq.observe(std::min(r.ratio * C_star - 1.0, C_star - r.ratio), at);
    o.ratio_min = std::min(o.ratio_min, r.ratio);
    o.ratio_max = std::max(o.ratio_max, r.ratio);
    if (r.skipped) {
      ++o.skipped;
    } else {
      si.observe(std::isfinite(r.si) && r.si > 0.0 ? 1.0 / r.si : -1.0, at);
      o.selfimp_max = std::max(o.selfimp_max, r.si);
    }
    table.rows.push_back({double(i), double(r.depth), r.avg, r.def, r.dist, r.ratio, r.si});
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(count, 50); ++i) {
    const LeafWeight w = corpus_weight(i, seed, max_depth);
    for (double s : {1e-3, 0.37, 12.5, 1e4}) {
      const double lhs = orlicz_norm_def(w.scaled(s), DyadicIndex::root(), pr.phi);
      hom.observe(1e-10 - num::relative_error(lhs, s * rows[i].def), {{"index", double(i)}, {"scale", s}});
    }
  }
  eq.value = std::max(o.ratio_max, 1.0 / o.ratio_min);
  si.value = o.selfimp_max;
  rep.add(eq);
  rep.add(si);
  rep.add(hom);
  rep.series.push_back(std::move(table));
  rep.extra["weights"] = count;
  rep.extra["ratio_min"] = o.ratio_min;
  rep.extra["ratio_max"] = o.ratio_max;
  rep.extra["C_star_measured"] = std::max(o.ratio_max, 1.0 / o.ratio_min);
  rep.extra["C_dist_le_def"] = o.ratio_max;
  rep.extra["C_self_improvement"] = o.selfimp_max;
  rep.extra["skipped"] = o.skipped;
  return o;
}

inline std::vector<VerificationReport> campaign_orlicz(const CampaignConfig& c) {
  return {orlicz_sweep(c.family, c.corpus_count, c.corpus_max_depth, sub_seed(c.seed, 3), c.tol.C_star).report};
}

// ---------------------------------------------------------------------------
// Bellman campaigns.

inline std::vector<VerificationReport> campaign_bellman_b1(const CampaignConfig& c) {
  return {b1_property_check(c.omega1, campaign_model(c))};
}

inline VerificationReport delta_scan_report(const PhiMap& pm, const ConstantBudget& b, const std::vector<double>& deltas) {
  VerificationReport r;
  r.name = "combined_drop_delta_scan";
  const auto rows = combined_drop_delta_scan(pm, b.P, deltas);
  CheckResult k("combined_drop_by_delta");
  k.informational = true;
  k.note = "infimum of the combined ratio on {L >= phi(uv)} for each delta";
  Series s{"scan", {"delta", "inf_ratio", "worst_w", "worst_z"}, {}};
  double largest_ok = 0.0;
  for (auto& row : rows) {
    k.observe(row.inf_ratio, {{"delta", row.delta}});
    s.rows.push_back({row.delta, row.inf_ratio, row.worst_w, row.worst_z});
    if (row.inf_ratio > 0.0) largest_ok = std::max(largest_ok, row.delta);
  }
  k.value = largest_ok;
  r.add(k);
  r.series.push_back(std::move(s));
  r.extra["largest_passing_delta"] = largest_ok;
  return r;
}

inline std::vector<VerificationReport> campaign_bellman_b2(const CampaignConfig& c) {
  const BellmanModel m = campaign_model(c);
  std::vector<VerificationReport> out;
  out.push_back(b2_property_check(c.omega2, m));
  out.push_back(delta_scan_report(m.pm, m.budget, c.delta_scan));
  if (m.pm.has_closed_F()) {
    const double hi = std::min(c.g_s_max, m.pm.y_max());
    const double lo = std::min(c.g_s_min, 0.5 * hi);
    out.push_back(g_positivity(m.pm, lo, hi, c.g_count));
  }
  out.push_back(aux_T_check(c.aux_T_points, sub_seed(c.seed, 4), c.aux_T_xy_max));
  out.push_back(gradient_checks(m, c.gradient_points, sub_seed(c.seed, 5)));
  return out;
}

// ---------------------------------------------------------------------------
// glav: Green induction over a suite and refinement stability.

inline VerificationReport green_suite(const CampaignConfig& c, const std::vector<SuiteInstance>& insts) {
  const BellmanModel m = campaign_model(c);
  VerificationReport suite;
  suite.name = "green_suite";
  Series table{"instances", {"index", "depth", "lambda", "bump_after", "telescoping", "min_ratio", "sup_ratio"}, {}};
  double cmin = num::kInf;
  std::vector<VerificationReport> per(insts.size());
  std::vector<std::vector<double>> rows(insts.size());
  num::parallel_for(insts.size(), [&](std::size_t i) {
    const auto& in = insts[i];
    const NormalizedInstance n = normalize_instance(in.u, in.v, c.family.phi, c.tol.bump_target, m.budget.delta);
    const SparseOperator T(in.depth, in.a, normalization_for(in.a));
    VerificationReport g = green_induction(n.u, n.v, T, m);
    VerificationReport gl = glav_check(n.u, n.v, T, c.family.phi, c.tol.bump_target);
    for (auto& k : gl.checks) g.add(k);
    per[i] = std::move(g);
    const double tel = per[i].find("telescoping")->value;
    rows[i] = {double(i), double(in.depth), n.lambda, n.after.max(), tel, per[i].find("node_drop")->value,
               gl.find("sup_ratio_finite")->value};
  });
  for (std::size_t i = 0; i < insts.size(); ++i) {
    merge_checks(suite, per[i], double(i));
    cmin = std::min(cmin, rows[i][5]);
    table.rows.push_back(rows[i]);
  }
  // Telescoping against the configured tolerance.
  CheckResult tel("telescoping_tolerance");
  tel.note = "relative telescoping residual <= configured tolerance on every instance";
  for (auto& row : rows) tel.observe(c.tol.telescoping - row[4], {{"instance", row[0]}});
  suite.add(tel);
  CheckResult single("single_positive_C", true);
  single.note = "minimum over the suite of Delta(J)/(|J| a_J u_J L_J)";
  single.value = cmin;
  single.observe(cmin, {});
  suite.add(single);
  suite.series.push_back(std::move(table));
  suite.extra["instances"] = insts.size();
  suite.extra["C_min"] = number_or_null(cmin);
  suite.extra["delta"] = m.budget.delta;
  suite.extra["C1"] = m.budget.C1;
  suite.extra["C2"] = m.budget.C2;
  return suite;
}

inline VerificationReport glav_refinement(const CampaignConfig& c) {
  VerificationReport r;
  r.name = "glav_refinement";
  CheckResult k("sup_ratio_stable");
  k.note = "relative change of sup S(I)/u_I between coarse and fine refinements";
  CheckResult fin("sup_ratio_finite", true);
  Series s{"refinement", {"index", "sup_coarse", "sup_fine", "relative_change"}, {}};
  double worst = 0.0;
  const double delta = campaign_model(c).budget.delta;
  for (std::size_t i = 0; i < c.refinement_count; ++i) {
    double sup[2];
    int k2 = 0;
    for (int d : {c.refinement_coarse, c.refinement_fine}) {
      const Instance inst = refinement_instance(d, sub_seed(c.seed, 100 + i));
      const NormalizedInstance n = normalize_instance(inst.u, inst.v, c.family.phi, c.tol.bump_target, delta);
      const SparseOperator T(d, inst.a);
      sup[k2++] = glav_sup(T, n.u, n.v).sup_ratio;
    }
    const double change = num::relative_error(sup[0], sup[1]);
    worst = std::max(worst, change);
    k.observe(c.tol.refinement - change, {{"instance", double(i)}});
    fin.observe(std::isfinite(sup[0]) && std::isfinite(sup[1]) ? 1.0 : -1.0, {{"instance", double(i)}});
    s.rows.push_back({double(i), sup[0], sup[1], change});
  }
  k.value = worst;
  r.add(k);
  r.add(fin);
  r.series.push_back(std::move(s));
  r.extra["coarse"] = c.refinement_coarse;
  r.extra["fine"] = c.refinement_fine;
  return r;
}

inline std::vector<VerificationReport> campaign_glav(const CampaignConfig& c) {
  return {green_suite(c, suite_instances(c)), glav_refinement(c)};
}

// ---------------------------------------------------------------------------
// testing: testing conditions, bump constants and the L bound.

inline std::vector<VerificationReport> campaign_testing(const CampaignConfig& c) {
  const auto insts = suite_instances(c);
  VerificationReport suite;
  suite.name = "testing_suite";
  Series table{"instances", {"index", "depth", "testing_uv", "testing_vu", "bump_left", "bump_right", "A2", "L_ratio"}, {}};
  std::vector<VerificationReport> per(insts.size());
  std::vector<std::vector<double>> rows(insts.size());
  const double delta = campaign_model(c).budget.delta;
  num::parallel_for(insts.size(), [&](std::size_t i) {
    const auto& in = insts[i];
    const NormalizedInstance n = normalize_instance(in.u, in.v, c.family.phi, c.tol.bump_target, delta);
    const SparseOperator T(in.depth, in.a, normalization_for(in.a));
    VerificationReport t = testing_verification(T, n.u, n.v, c.family.phi);
    const VerificationReport l = vavo_L_bound(n.u, n.v, T, c.budget.P);
    for (auto& k : l.checks) t.add(k);
    rows[i] = {double(i), double(in.depth), t.find("testing_u_to_v")->value, t.find("testing_v_to_u")->value,
               t.find("bump_left")->value, t.find("bump_right")->value, t.find("A2")->value,
               l.find("L_le_P_sqrt_uv")->value};
    per[i] = std::move(t);
  });
  double sup_uv = 0.0, sup_vu = 0.0;
  for (std::size_t i = 0; i < insts.size(); ++i) {
    merge_checks(suite, per[i], double(i));
    sup_uv = std::max(sup_uv, rows[i][2]);
    sup_vu = std::max(sup_vu, rows[i][3]);
    table.rows.push_back(rows[i]);
  }
  suite.series.push_back(std::move(table));
  suite.extra["instances"] = insts.size();
  suite.extra["sup_testing_u_to_v"] = sup_uv;
  suite.extra["sup_testing_v_to_u"] = sup_vu;
  return {suite};
}

// ---------------------------------------------------------------------------
// obstruction: construction at several depths, the depth sweep and the B0 probe.

struct ObstructionOutput {
  std::vector<VerificationReport> reports;
  json bundle_u, bundle_v, bundle_a;  // deepest construction
};

inline ObstructionOutput campaign_obstruction_full(const CampaignConfig& c) {
  ObstructionOutput out;
  std::vector<ObstructionReport> reps;
  for (int d : c.obstruction_depths) {
    reps.push_back(run_obstruction(d));
    out.reports.push_back(reps.back().report);
  }
  if (reps.size() >= 2) {
    const DepthSweep sw = obstruction_depth_sweep(reps);
    VerificationReport r;
    r.name = "obstruction_sweep";
    CheckResult inc("S_over_mass_strictly_increasing"), spread("increment_spread");
    inc.observe(sw.strictly_increasing ? 0.0 : -1.0, {});
    spread.note = "(max - min)/max of successive increments of S/mass";
    spread.value = sw.increment_spread;
    spread.observe(std::isnan(sw.increment_spread) ? -1.0 : c.tol.increment_spread - sw.increment_spread, {});
    r.add(inc);
    r.add(spread);
    Series s{"sweep", {"depth", "S_over_mass"}, {}};
    for (std::size_t i = 0; i < sw.depths.size(); ++i) s.rows.push_back({double(sw.depths[i]), sw.ratio[i]});
    r.series.push_back(std::move(s));
    r.extra["increments"] = sw.increments;
    out.reports.push_back(std::move(r));
  }
  const int deepest = *std::max_element(c.obstruction_depths.begin(), c.obstruction_depths.end());
  if (c.emit_bundle) {
    const PartitionWeight u = build_u(deepest);
    const StoppingHierarchy H = build_hierarchy(u);
    const ObstructionV V = build_v(u, H);
    out.bundle_u = io::partition_to_json(u);
    out.bundle_v = io::partition_to_json(V.v);
    out.bundle_a = io::carleson_to_json(build_alpha(H));
  }
  const Axis& au = c.b0.axis("u");
  const Axis& av = c.b0.axis("v");
  const Axis& aA = c.b0.axis("A");
  VerificationReport valid = b0_probe(au, av, aA, {{c.family.eps.name(), PhiMap(c.family.eps)}}, c.budget, false);
  valid.name = "b0_probe_family";
  out.reports.push_back(std::move(valid));
  std::vector<B0Candidate> unit;
  for (double y0 : {1e-12, 1e-8, 1e-4, 1.0}) {
    std::ostringstream label;
    label << "unit_cutoff_" << y0;
    unit.push_back({label.str(), PhiMap(GapFunction::unit(), InverseMode::Closed, y0)});
  }
  VerificationReport ob = b0_probe(au, av, aA, unit, c.budget, true);
  ob.name = "b0_probe_unit_epsilon";
  out.reports.push_back(std::move(ob));
  return out;
}

// ---------------------------------------------------------------------------
// Running and writing.

struct CampaignResult {
  std::string name;
  std::vector<VerificationReport> reports;
  std::optional<ObstructionOutput> obstruction;
  bool pass() const {
    for (auto& r : reports)
      if (!r.pass()) return false;
    return true;
  }
};

inline CampaignResult run_campaign(const std::string& name, const CampaignConfig& c) {
  if (std::find(campaign_names().begin(), campaign_names().end(), name) == campaign_names().end())
    throw InputError("unknown campaign \"" + name + "\"");
  CampaignResult res{name, {}, {}};
  auto append = [&](std::vector<VerificationReport> rs) {
    for (auto& r : rs) res.reports.push_back(std::move(r));
  };
  const bool full = name == "full";
  if (full || name == "bump-check") append(campaign_bump_check(c));
  if (full || name == "orlicz") append(campaign_orlicz(c));
  if (full || name == "bellman-b1") append(campaign_bellman_b1(c));
  if (full || name == "bellman-b2") append(campaign_bellman_b2(c));
  if (full || name == "glav") append(campaign_glav(c));
  if (full || name == "testing") append(campaign_testing(c));
  if (full || name == "obstruction") {
    ObstructionOutput o = campaign_obstruction_full(c);
    append(o.reports);
    res.obstruction = std::move(o);
  }
  return res;
}

inline json campaign_json(const CampaignResult& res, const CampaignConfig& c, const std::vector<std::string>& files) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["tool"] = kToolName;
  j["tool_version"] = kToolVersion;
  j["campaign"] = res.name;
  j["seed"] = c.seed;
  j["config_hash"] = config_hash(c);
  j["config"] = c.resolved;
  j["pass"] = res.pass();
  json reps = json::array();
  for (auto& r : res.reports) reps.push_back(to_json(r));
  j["reports"] = reps;
  j["files"] = files;
  return j;
}

/// Writes report.json, summary.csv, plot series and (for obstruction) the bundle.
inline void write_campaign(const CampaignResult& res, const CampaignConfig& c) {
  namespace fs = std::filesystem;
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::string> files{"report.json", "summary.csv"};
  for (auto& r : res.reports)
    for (auto& f : emit_plotdata(r, dir)) files.push_back(f);
  if (res.obstruction && !res.obstruction->bundle_u.is_null()) {
    const fs::path b = dir / "obstruction_bundle";
    fs::create_directories(b, ec);
    if (ec) throw InputError("cannot create " + b.string());
    io::write_json(b / "u.json", res.obstruction->bundle_u);
    io::write_json(b / "v.json", res.obstruction->bundle_v);
    io::write_json(b / "carleson.json", res.obstruction->bundle_a);
    for (const char* f : {"obstruction_bundle/u.json", "obstruction_bundle/v.json", "obstruction_bundle/carleson.json"})
      files.push_back(f);
  }
  write_summary_csv(res.reports, dir / "summary.csv");
  io::write_json(dir / "report.json", campaign_json(res, c, files));
}

}  // namespace dbell
