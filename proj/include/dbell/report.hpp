#pragma once

// Verification reports: named checks with worst-point bookkeeping, headline
// values, and flat series for plotting.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dbell/errors.hpp"

namespace dbell {

using json = nlohmann::ordered_json;

using Coords = std::vector<std::pair<std::string, double>>;

/// One property evaluated over many points. A point passes when its margin is
/// nonnegative (or strictly positive when `strict`).
struct CheckResult {
  std::string name;
  bool informational = false;
  bool strict = false;
  std::size_t count = 0;
  std::size_t violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  Coords worst_point;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string note;

  CheckResult() = default;
  explicit CheckResult(std::string n, bool strict_ = false) : name(std::move(n)), strict(strict_) {}

  bool point_passes(double margin) const { return strict ? margin > 0.0 : margin >= 0.0; }

  void observe(double margin, const Coords& where) {
    ++count;
    if (!point_passes(margin) || std::isnan(margin)) ++violations;
    if (margin < worst_margin || (std::isnan(margin) && !std::isnan(worst_margin))) {
      worst_margin = margin;
      worst_point = where;
    }
  }

  /// A check with no evaluated points passes vacuously.
  bool pass() const { return violations == 0; }
};

struct Series {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct VerificationReport {
  std::string name;
  std::vector<CheckResult> checks;
  json extra = json::object();
  std::vector<Series> series;

  CheckResult& add(CheckResult c) {
    checks.push_back(std::move(c));
    return checks.back();
  }

  const CheckResult* find(const std::string& n) const {
    for (auto& c : checks)
      if (c.name == n) return &c;
    return nullptr;
  }

  bool pass() const {
    for (auto& c : checks)
      if (!c.informational && !c.pass()) return false;
    return true;
  }
};

inline json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return nullptr;
  return x > 0 ? "inf" : "-inf";
}

inline json to_json(const CheckResult& c) {
  json j;
  j["name"] = c.name;
  j["pass"] = c.pass();
  j["informational"] = c.informational;
  j["count"] = c.count;
  j["violations"] = c.violations;
  j["pass_fraction"] = c.count ? 1.0 - static_cast<double>(c.violations) / c.count : 1.0;
  j["worst_margin"] = number_or_null(c.worst_margin);
  json wp = json::object();
  for (auto& [k, v] : c.worst_point) wp[k] = number_or_null(v);
  j["worst_point"] = wp;
  j["value"] = number_or_null(c.value);
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline json to_json(const VerificationReport& r) {
  json j;
  j["name"] = r.name;
  j["pass"] = r.pass();
  json checks = json::array();
  for (auto& c : r.checks) checks.push_back(to_json(c));
  j["checks"] = checks;
  j["extra"] = r.extra;
  json series = json::array();
  for (auto& s : r.series) series.push_back({{"name", s.name}, {"columns", s.columns}, {"rows", s.rows.size()}});
  j["series"] = series;
  return j;
}

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// One row per check: report,check,pass,informational,count,violations,worst_margin,value
inline void write_summary_csv(const std::vector<VerificationReport>& reports, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw InputError("cannot write " + file.string());
  out << "report,check,pass,informational,count,violations,worst_margin,value\n";
  for (auto& r : reports)
    for (auto& c : r.checks)
      out << r.name << ',' << c.name << ',' << (c.pass() ? 1 : 0) << ',' << (c.informational ? 1 : 0) << ','
          << c.count << ',' << c.violations << ',' << format_number(c.worst_margin) << ','
          << format_number(c.value) << '\n';
}

/// Writes each series as <report>__<series>.csv; returns the file names.
inline std::vector<std::string> emit_plotdata(const VerificationReport& r, const std::filesystem::path& dir) {
  std::vector<std::string> files;
  for (auto& s : r.series) {
    const std::string fname = r.name + "__" + s.name + ".csv";
    std::ofstream out(dir / fname);
    if (!out) throw InputError("cannot write " + (dir / fname).string());
    for (std::size_t i = 0; i < s.columns.size(); ++i) out << (i ? "," : "") << s.columns[i];
    out << '\n';
    for (auto& row : s.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
      out << '\n';
    }
    files.push_back(fname);
  }
  return files;
}

}  // namespace dbell
