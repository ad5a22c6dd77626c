#pragma once

// JSON interchange: weights, Carleson sequences, family descriptors, grids,
// budgets, instance bundles and campaign configurations. Every parser
// validates completely and reports the offending location.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dbell/bellman.hpp"
#include "dbell/bump.hpp"
#include "dbell/dyadic.hpp"
#include "dbell/dyadic_partition.hpp"
#include "dbell/errors.hpp"
#include "dbell/report.hpp"

namespace dbell::io {

namespace fs = std::filesystem;

inline json load_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError(file.string() + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw InputError(file.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Field access with locations.

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected a JSON object");
}

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw InputError(where + ": unknown key \"" + it.key() + "\"");
}

inline double get_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing \"" + key + "\"");
  const json& v = j.at(key);
  if (!v.is_number()) throw InputError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline double get_number(const json& j, const std::string& key, const std::string& where, double fallback) {
  return j.contains(key) ? get_number(j, key, where) : fallback;
}

inline long long get_integer(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing \"" + key + "\"");
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw InputError(where + "." + key + ": expected an integer");
  return v.get<long long>();
}

inline long long get_integer(const json& j, const std::string& key, const std::string& where, long long fallback) {
  return j.contains(key) ? get_integer(j, key, where) : fallback;
}

inline std::size_t get_count(const json& j, const std::string& key, const std::string& where, std::size_t fallback) {
  const long long v = get_integer(j, key, where, static_cast<long long>(fallback));
  if (v <= 0) throw InputError(where + "." + key + ": must be positive");
  return static_cast<std::size_t>(v);
}

inline std::string get_string(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing \"" + key + "\"");
  if (!j.at(key).is_string()) throw InputError(where + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

inline double positive(double x, const std::string& where) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InputError(where + ": must be positive and finite");
  return x;
}

// ---------------------------------------------------------------------------
// Weights and Carleson sequences.

/// {"depth": n, "values": [2^n numbers]}
inline LeafWeight parse_weight(const json& j, const std::string& where, int depth_cap = kDefaultDepthCap) {
  require_object(j, where);
  reject_unknown(j, where, {"depth", "values"});
  const long long depth = get_integer(j, "depth", where);
  if (depth < 0) throw InputError(where + ".depth: must be nonnegative");
  if (depth > depth_cap)
    throw ResourceError(where + ": depth " + std::to_string(depth) + " exceeds the cap " + std::to_string(depth_cap));
  if (!j.contains("values") || !j["values"].is_array()) throw InputError(where + ": missing array \"values\"");
  const json& vals = j["values"];
  const std::size_t need = std::size_t{1} << depth;
  if (vals.size() != need)
    throw InputError(where + ".values: expected " + std::to_string(need) + " entries, got " + std::to_string(vals.size()));
  std::vector<double> v(need);
  for (std::size_t i = 0; i < need; ++i) {
    if (!vals[i].is_number()) throw InputError(where + ".values[" + std::to_string(i) + "]: expected a number");
    v[i] = vals[i].get<double>();
    if (!(v[i] >= 0.0) || !std::isfinite(v[i]))
      throw InputError(where + ".values[" + std::to_string(i) + "]: must be finite and nonnegative");
  }
  return LeafWeight(static_cast<int>(depth), std::move(v), depth_cap);
}

inline json weight_to_json(const LeafWeight& w) { return {{"depth", w.depth()}, {"values", w.values()}}; }

/// {"cells": [{"level": k, "pos": j, "value": x}, ...]}
inline PartitionWeight parse_partition_weight(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where, {"cells"});
  if (!j.contains("cells") || !j["cells"].is_array()) throw InputError(where + ": missing array \"cells\"");
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < j["cells"].size(); ++i) {
    const std::string at = where + ".cells[" + std::to_string(i) + "]";
    const json& c = j["cells"][i];
    require_object(c, at);
    reject_unknown(c, at, {"level", "pos", "value"});
    const long long k = get_integer(c, "level", at), p = get_integer(c, "pos", at);
    if (k < 0 || k > kMaxLevel || p < 0 || static_cast<unsigned long long>(p) >= (1ULL << k))
      throw InputError(at + ": invalid dyadic index");
    cells.push_back({DyadicIndex{static_cast<int>(k), static_cast<std::uint64_t>(p)}, get_number(c, "value", at)});
  }
  try {
    return PartitionWeight(std::move(cells));
  } catch (const DomainError& e) {
    throw InputError(where + ": " + e.what());
  }
}

inline json partition_to_json(const PartitionWeight& w) {
  json cells = json::array();
  for (auto& c : w.cells()) cells.push_back({{"level", c.index.level}, {"pos", c.index.pos}, {"value", c.value}});
  return {{"cells", cells}};
}

/// {"bound": B, "entries": [{"level": k, "pos": j, "a": x}, ...]}
inline CarlesonSequence parse_carleson(const json& j, const std::string& where) {
  require_object(j, where);
  reject_unknown(j, where, {"bound", "entries"});
  const double bound = positive(get_number(j, "bound", where, 1.0), where + ".bound");
  if (!j.contains("entries") || !j["entries"].is_array()) throw InputError(where + ": missing array \"entries\"");
  CarlesonSequence seq(bound);
  std::set<DyadicIndex> seen;
  for (std::size_t i = 0; i < j["entries"].size(); ++i) {
    const std::string at = where + ".entries[" + std::to_string(i) + "]";
    const json& e = j["entries"][i];
    require_object(e, at);
    reject_unknown(e, at, {"level", "pos", "a"});
    const long long k = get_integer(e, "level", at), p = get_integer(e, "pos", at);
    if (k < 0 || k > kMaxLevel || p < 0 || static_cast<unsigned long long>(p) >= (1ULL << k))
      throw InputError(at + ": invalid dyadic index");
    const DyadicIndex I{static_cast<int>(k), static_cast<std::uint64_t>(p)};
    if (!seen.insert(I).second) throw InputError(at + ": duplicate entry for " + to_string(I));
    try {
      seq.set(I, get_number(e, "a", at));
    } catch (const DomainError& err) {
      throw InputError(at + ": " + err.what());
    }
  }
  return seq;
}

inline json carleson_to_json(const CarlesonSequence& seq) {
  json entries = json::array();
  for (auto& [I, a] : seq.entries()) entries.push_back({{"level", I.level}, {"pos", I.pos}, {"a", a}});
  return {{"bound", seq.bound()}, {"entries", entries}};
}

// ---------------------------------------------------------------------------
// Family descriptors.

inline BumpFamily parse_bump(const json& j, const std::string& where) {
  require_object(j, where);
  const std::string tag = get_string(j, "tag", where);
  try {
    if (tag == "power") {
      reject_unknown(j, where, {"tag", "p", "epsilon", "family0"});
      return BumpFamily::power(get_number(j, "p", where));
    }
    if (tag == "log") {
      reject_unknown(j, where, {"tag", "sigma", "shift", "epsilon", "family0"});
      std::optional<double> shift;
      if (j.contains("shift")) shift = get_number(j, "shift", where);
      return BumpFamily::log(get_number(j, "sigma", where), shift);
    }
    if (tag == "loglog") {
      reject_unknown(j, where, {"tag", "sigma", "delta", "shift", "epsilon", "family0"});
      std::optional<double> shift;
      if (j.contains("shift")) shift = get_number(j, "shift", where);
      return BumpFamily::loglog(get_number(j, "sigma", where), get_number(j, "delta", where, 0.1), shift);
    }
    if (tag == "custom") {
      reject_unknown(j, where, {"tag", "phi_table", "epsilon", "family0"});
      if (!j.contains("phi_table") || !j["phi_table"].is_array())
        throw InputError(where + ": custom family needs array \"phi_table\"");
      std::vector<std::pair<double, double>> table;
      for (std::size_t i = 0; i < j["phi_table"].size(); ++i) {
        const json& row = j["phi_table"][i];
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
          throw InputError(where + ".phi_table[" + std::to_string(i) + "]: expected [t, Phi(t)]");
        table.emplace_back(row[0].get<double>(), row[1].get<double>());
      }
      return BumpFamily::custom(std::move(table));
    }
  } catch (const DomainError& e) {
    throw InputError(where + ": " + e.what());
  }
  throw InputError(where + ".tag: unknown family tag \"" + tag + "\"");
}

/// {"kind": "power", "beta": b} | {"kind": "logpower", "kappa": k} | {"kind": "unit"}
inline GapFunction parse_gap(const json& j, const std::string& where) {
  require_object(j, where);
  const std::string kind = get_string(j, "kind", where);
  try {
    if (kind == "power") {
      reject_unknown(j, where, {"kind", "beta"});
      return GapFunction::power(get_number(j, "beta", where));
    }
    if (kind == "logpower") {
      reject_unknown(j, where, {"kind", "kappa"});
      return GapFunction::logpower(get_number(j, "kappa", where));
    }
    if (kind == "unit") {
      reject_unknown(j, where, {"kind"});
      return GapFunction::unit();
    }
  } catch (const DomainError& e) {
    throw InputError(where + ": " + e.what());
  }
  throw InputError(where + ".kind: unknown epsilon kind \"" + kind + "\"");
}

/// Φ plus optional explicit ε and Φ₀; catalog pairing otherwise.
inline BumpPairing parse_family(const json& j, const std::string& where) {
  const BumpFamily phi = parse_bump(j, where);
  const bool has_eps = j.contains("epsilon"), has_f0 = j.contains("family0");
  if (has_eps != has_f0) throw InputError(where + ": \"epsilon\" and \"family0\" must be given together");
  if (has_eps) return {phi, parse_bump(j["family0"], where + ".family0"), parse_gap(j["epsilon"], where + ".epsilon")};
  try {
    return catalog_pairing(phi);
  } catch (const DomainError& e) {
    throw InputError(where + ": " + e.what());
  }
}

inline json bump_to_json(const BumpFamily& f) {
  switch (f.tag()) {
    case FamilyTag::Power: return {{"tag", "power"}, {"p", f.p()}};
    case FamilyTag::Log: return {{"tag", "log"}, {"sigma", f.sigma()}, {"shift", f.shift()}};
    case FamilyTag::LogLog: return {{"tag", "loglog"}, {"sigma", f.sigma()}, {"delta", f.delta()}, {"shift", f.shift()}};
    case FamilyTag::Custom: {
      json t = json::array();
      for (auto& [x, y] : f.table()) t.push_back({x, y});
      return {{"tag", "custom"}, {"phi_table", t}};
    }
  }
  return {};
}

inline json gap_to_json(const GapFunction& g) {
  switch (g.kind()) {
    case GapKind::Power: return {{"kind", "power"}, {"beta", g.beta()}};
    case GapKind::LogPower: return {{"kind", "logpower"}, {"kappa", g.kappa()}};
    case GapKind::Unit: return {{"kind", "unit"}};
  }
  return {};
}

inline json pairing_to_json(const BumpPairing& p) {
  json j = bump_to_json(p.phi);
  j["epsilon"] = gap_to_json(p.eps);
  j["family0"] = bump_to_json(p.phi0);
  return j;
}

// ---------------------------------------------------------------------------
// Grids and budgets.

/// {"dims": {name: {"min", "max", "count", "log"}}, "sampling": "lattice"|"rejection", "seed", "points"}
inline GridSpec parse_grid(const json& j, const std::string& where, const GridSpec& defaults) {
  require_object(j, where);
  reject_unknown(j, where, {"dims", "sampling", "seed", "points"});
  GridSpec g = defaults;
  if (j.contains("dims")) {
    require_object(j["dims"], where + ".dims");
    for (auto it = j["dims"].begin(); it != j["dims"].end(); ++it) {
      const std::string at = where + ".dims." + it.key();
      require_object(it.value(), at);
      reject_unknown(it.value(), at, {"min", "max", "count", "log"});
      Axis a = g.dims.count(it.key()) ? g.dims[it.key()] : Axis{};
      a.min = get_number(it.value(), "min", at, a.min);
      a.max = get_number(it.value(), "max", at, a.max);
      a.count = get_count(it.value(), "count", at, a.count);
      if (it.value().contains("log")) {
        if (!it.value()["log"].is_boolean()) throw InputError(at + ".log: expected a boolean");
        a.log = it.value()["log"].get<bool>();
      }
      a.validate(at);
      g.dims[it.key()] = a;
    }
  }
  if (j.contains("sampling")) {
    const std::string s = get_string(j, "sampling", where);
    if (s == "lattice") g.lattice = true;
    else if (s == "rejection") g.lattice = false;
    else throw InputError(where + ".sampling: expected \"lattice\" or \"rejection\"");
  }
  const long long seed = get_integer(j, "seed", where, static_cast<long long>(g.seed));
  if (seed < 0) throw InputError(where + ".seed: must be nonnegative");
  g.seed = static_cast<std::uint64_t>(seed);
  g.points = get_count(j, "points", where, g.points);
  return g;
}

inline ConstantBudget parse_budget(const json& j, const std::string& where, ConstantBudget b = {}) {
  require_object(j, where);
  reject_unknown(j, where, {"C1", "C2", "c_drop", "delta1", "derivative_floor", "delta", "P", "A_min"});
  auto opt = [&](const char* key, double& slot) {
    if (j.contains(key)) slot = positive(get_number(j, key, where), where + "." + key);
  };
  opt("C1", b.C1);
  opt("C2", b.C2);
  opt("c_drop", b.c_drop);
  opt("delta1", b.delta1);
  opt("derivative_floor", b.derivative_floor);
  opt("delta", b.delta);
  opt("P", b.P);
  opt("A_min", b.A_min);
  if (!std::isnan(b.delta1) && !(b.delta1 < b.c_drop)) throw InputError(where + ": delta1 must be below c_drop");
  if (b.A_min > 1.0) throw InputError(where + ".A_min: must not exceed 1");
  return b;
}

inline json budget_to_json(const ConstantBudget& b) {
  return {{"C1", number_or_null(b.C1)},     {"C2", number_or_null(b.C2)},
          {"c_drop", b.c_drop},             {"delta1", number_or_null(b.delta1)},
          {"derivative_floor", b.derivative_floor}, {"delta", b.delta},
          {"P", b.P},                       {"A_min", b.A_min}};
}

// ---------------------------------------------------------------------------
// Instance bundles: a directory with u.json, v.json, carleson.json.

struct InstanceBundle {
  std::string label;
  LeafWeight u;
  LeafWeight v;
  CarlesonSequence a;
};

inline InstanceBundle load_bundle(const fs::path& dir, int depth_cap = kDefaultDepthCap) {
  if (!fs::is_directory(dir)) throw InputError(dir.string() + ": instance directory not found");
  InstanceBundle b{dir.string(), {}, {}, CarlesonSequence(1.0)};
  b.u = parse_weight(load_json(dir / "u.json"), (dir / "u.json").string(), depth_cap);
  b.v = parse_weight(load_json(dir / "v.json"), (dir / "v.json").string(), depth_cap);
  b.a = parse_carleson(load_json(dir / "carleson.json"), (dir / "carleson.json").string());
  if (b.u.depth() != b.v.depth()) throw InputError(dir.string() + ": u and v have different depths");
  if (b.a.max_level() > b.u.depth()) throw InputError(dir.string() + ": Carleson entries below the weight depth");
  return b;
}

inline void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw InputError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

}  // namespace dbell::io
