#pragma once

// Bump functions Φ, the parametric companion Ψ, gap functions ε, the map
// φ(x) = x/ε(1/x) with its inverse, Orlicz norms computed two ways, and the
// hypothesis checkers built on them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dbell/dyadic.hpp"
#include "dbell/errors.hpp"
#include "dbell/numerics.hpp"

namespace dbell {

enum class FamilyTag { Power, Log, LogLog, Custom };

inline const char* tag_name(FamilyTag t) {
  switch (t) {
    case FamilyTag::Power: return "power";
    case FamilyTag::Log: return "log";
    case FamilyTag::LogLog: return "loglog";
    case FamilyTag::Custom: return "custom";
  }
  return "?";
}

/// Φ on [0,∞) with derivative and the companion Ψ.
///   power   Φ(t) = t^p
///   log     Φ(t) = t(1+log⁺t)^{1+σ},                  Ψ(s) = (c + log(1/s))^{1+σ}
///   loglog  Φ(t) = t(1+log⁺t)(1+log(1+log⁺t))^{1+σ},  Ψ(s) = (a+r)(1+log(a+r))^{1+σ}
///   custom  piecewise-linear interpolation of a table, Ψ from the parametric system
/// with r = log(1/s). Ψ is extended by the constant Ψ(1) for s > 1.
class BumpFamily {
 public:
  static BumpFamily power(double p) {
    if (!(p >= 1.0)) throw DomainError("power bump needs p >= 1");
    BumpFamily f(FamilyTag::Power);
    f.p_ = p;
    return f;
  }

  /// Default shift 1+σ makes sΨ(s) increasing on all of (0,1].
  static BumpFamily log(double sigma, std::optional<double> shift = {}) {
    if (!(sigma > 0.0)) throw DomainError("log bump needs sigma > 0");
    BumpFamily f(FamilyTag::Log);
    f.sigma_ = sigma;
    f.shift_ = shift.value_or(1.0 + sigma);
    if (!(f.shift_ >= 0.0)) throw DomainError("log bump shift must be nonnegative");
    return f;
  }

  static BumpFamily loglog(double sigma, double delta = 0.1, std::optional<double> shift = {}) {
    if (!(sigma > 0.0)) throw DomainError("loglog bump needs sigma > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("loglog bump needs delta in (0,1)");
    BumpFamily f(FamilyTag::LogLog);
    f.sigma_ = sigma;
    f.delta_ = delta;
    f.shift_ = shift.value_or(2.0 + sigma);
    if (!(f.shift_ >= 1.0)) throw DomainError("loglog bump shift must be at least 1");
    return f;
  }

  /// Table of (t, Φ(t)) with t and Φ strictly increasing and positive.
  static BumpFamily custom(std::vector<std::pair<double, double>> table) {
    if (table.size() < 2) throw DomainError("custom bump table needs at least two points");
    std::sort(table.begin(), table.end());
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (!(table[i].first > 0.0) || !(table[i].second > 0.0))
        throw DomainError("custom bump table entries must be positive");
      if (i > 0 && (table[i].first <= table[i - 1].first || table[i].second <= table[i - 1].second))
        throw DomainError("custom bump table must be strictly increasing");
    }
    BumpFamily f(FamilyTag::Custom);
    f.table_ = std::move(table);
    // Φ·Φ' must increase on [1,∞) for the parametric map to be invertible.
    f.parametric_monotone_ = true;
    double prev = 0.0;
    for (double t = 1.0; t <= f.table_.back().first * 2.0; t *= 1.03) {
      const double v = f.phi(t) * f.phi_prime(t);
      if (v < prev) f.parametric_monotone_ = false;
      prev = v;
    }
    return f;
  }

  FamilyTag tag() const { return tag_; }
  double p() const { return p_; }
  double sigma() const { return sigma_; }
  double delta() const { return delta_; }
  double shift() const { return shift_; }
  const std::vector<std::pair<double, double>>& table() const { return table_; }
  bool parametric_monotone() const { return parametric_monotone_; }

  std::string name() const {
    std::ostringstream os;
    os << tag_name(tag_);
    switch (tag_) {
      case FamilyTag::Power: os << "(p=" << p_ << ")"; break;
      case FamilyTag::Log: os << "(sigma=" << sigma_ << ",shift=" << shift_ << ")"; break;
      case FamilyTag::LogLog: os << "(sigma=" << sigma_ << ",delta=" << delta_ << ")"; break;
      case FamilyTag::Custom: os << "(" << table_.size() << " points)"; break;
    }
    return os.str();
  }

  double phi(double t) const {
    if (t <= 0.0) return 0.0;
    const double L = t > 1.0 ? std::log(t) : 0.0;
    switch (tag_) {
      case FamilyTag::Power: return std::pow(t, p_);
      case FamilyTag::Log: return t * std::pow(1.0 + L, 1.0 + sigma_);
      case FamilyTag::LogLog: return t * (1.0 + L) * std::pow(1.0 + std::log1p(L), 1.0 + sigma_);
      case FamilyTag::Custom: return custom_phi(t);
    }
    return 0.0;
  }

  /// Right derivative.
  double phi_prime(double t) const {
    if (t < 0.0) return 0.0;
    switch (tag_) {
      case FamilyTag::Power: return t == 0.0 ? (p_ == 1.0 ? 1.0 : 0.0) : p_ * std::pow(t, p_ - 1.0);
      case FamilyTag::Log: {
        if (t < 1.0) return 1.0;
        const double L = std::log(t);
        return std::pow(1.0 + L, sigma_) * (2.0 + sigma_ + L);
      }
      case FamilyTag::LogLog: {
        if (t < 1.0) return 1.0;
        const double L = std::log(t);
        const double m = 1.0 + std::log1p(L);
        return std::pow(m, sigma_) * ((2.0 + L) * m + 1.0 + sigma_);
      }
      case FamilyTag::Custom: return custom_slope(t);
    }
    return 0.0;
  }

  /// Upper end of the parametric range: s = 1/(Φ(t)Φ'(t)) at t = 1.
  double s_cut() const { return 1.0 / (phi(1.0) * phi_prime(1.0)); }

  bool has_closed_psi() const { return tag_ != FamilyTag::Custom; }

  /// Ψ as a function of r = log(1/s); r < 0 maps to the constant Ψ(1).
  double psi_of_r(double r) const {
    if (r < 0.0) r = 0.0;
    switch (tag_) {
      case FamilyTag::Power: {
        const double q = (p_ - 1.0) / (2.0 * p_ - 1.0);
        return p_ * std::exp(q * (r - std::log(p_)));
      }
      case FamilyTag::Log: return std::pow(shift_ + r, 1.0 + sigma_);
      case FamilyTag::LogLog: {
        const double b = shift_ + r;
        return b * std::pow(1.0 + std::log(b), 1.0 + sigma_);
      }
      case FamilyTag::Custom: {
        const double s = std::exp(-r);
        return custom_psi(s);
      }
    }
    return 0.0;
  }

  double psi(double s) const {
    if (!(s > 0.0)) throw DomainError("psi needs s > 0");
    const double v = psi_of_r(s >= 1.0 ? 0.0 : -std::log(s));
    if (!(v > 0.0)) throw DomainError("psi vanishes at s = " + std::to_string(s));
    return v;
  }

  /// G(x) = ∫_0^x ds/(sΨ(s)).
  double psi_integral(double x) const {
    if (x <= 0.0) return 0.0;
    if (x > 1.0) return psi_integral(1.0) + std::log(x) / psi_of_r(0.0);
    const double r = -std::log(x);
    switch (tag_) {
      case FamilyTag::Power: {
        if (p_ == 1.0) return num::kInf;
        const double q = (p_ - 1.0) / (2.0 * p_ - 1.0);
        return std::pow(p_ * x, q) / (p_ * q);
      }
      case FamilyTag::Log: {
        const double b = shift_ + r;
        return b > 0.0 ? std::pow(b, -sigma_) / sigma_ : num::kInf;
      }
      case FamilyTag::LogLog: {
        const double M = 1.0 + std::log(shift_ + r);
        return std::pow(M, -sigma_) / sigma_;
      }
      case FamilyTag::Custom: return psi_integral_quadrature(x);
    }
    return num::kInf;
  }

  /// Same integral by quadrature in r = log(1/s).
  double psi_integral_quadrature(double x) const {
    if (x <= 0.0) return 0.0;
    if (x > 1.0) return psi_integral_quadrature(1.0) + std::log(x) / psi_of_r(0.0);
    const double r0 = -std::log(x);
    if (tag_ == FamilyTag::LogLog) {
      // w = log(a + r); dr/Ψ = dw/(1+w)^{1+σ} reaches far beyond double range of r.
      const double w0 = std::log(shift_ + r0);
      return num::integrate_to_infinity([this](double w) { return std::pow(1.0 + w, -1.0 - sigma_); },
                                        w0);
    }
    return num::integrate_to_infinity([this](double r) { return 1.0 / psi_of_r(r); }, r0);
  }

 private:
  explicit BumpFamily(FamilyTag t) : tag_(t) {}

  double custom_phi(double t) const {
    const auto& tb = table_;
    if (t <= tb.front().first) return tb.front().second * t / tb.front().first;
    for (std::size_t i = 1; i < tb.size(); ++i) {
      if (t <= tb[i].first) {
        const double w = (t - tb[i - 1].first) / (tb[i].first - tb[i - 1].first);
        return tb[i - 1].second + w * (tb[i].second - tb[i - 1].second);
      }
    }
    return tb.back().second + custom_slope(t) * (t - tb.back().first);
  }

  double custom_slope(double t) const {
    const auto& tb = table_;
    if (t < tb.front().first) return tb.front().second / tb.front().first;
    for (std::size_t i = 1; i < tb.size(); ++i)
      if (t < tb[i].first)
        return (tb[i].second - tb[i - 1].second) / (tb[i].first - tb[i - 1].first);
    const std::size_t n = tb.size();
    return (tb[n - 1].second - tb[n - 2].second) / (tb[n - 1].first - tb[n - 2].first);
  }

  double custom_psi(double s) const;

  FamilyTag tag_;
  double p_ = 1.0;
  double sigma_ = 0.0;
  double delta_ = 0.0;
  double shift_ = 0.0;
  std::vector<std::pair<double, double>> table_;
  bool parametric_monotone_ = true;
};

/// Ψ(s) = Φ'(t) where s = 1/(Φ(t)Φ'(t)), t ≥ 1, solved by bisection.
inline double psi_parametric(const BumpFamily& fam, double s) {
  if (!(s > 0.0) || s > fam.s_cut() * (1.0 + 1e-15)) {
    std::ostringstream os;
    os << "s = " << s << " outside the parametric range (0, " << fam.s_cut() << "]";
    throw DomainError(os.str());
  }
  if (!fam.parametric_monotone())
    throw DomainError("parametric map s = 1/(Phi Phi') is not monotone for " + fam.name());
  const double target = -std::log(s);
  auto h = [&](double t) { return std::log(fam.phi(t)) + std::log(fam.phi_prime(t)) - target; };
  if (h(1.0) >= 0.0) return fam.phi_prime(1.0);
  double hi = 2.0;
  int guard = 0;
  while (h(hi) < 0.0) {
    hi *= hi;
    if (++guard > 12 || !std::isfinite(hi)) throw InternalError("parametric bracket expansion failed");
  }
  const auto root = num::bisect(h, 1.0, hi, {1e-14, 400, true});
  return fam.phi_prime(root.x);
}

inline double BumpFamily::custom_psi(double s) const {
  const double sc = s_cut();
  return psi_parametric(*this, std::min(s, sc));
}

// ---------------------------------------------------------------------------

enum class GapKind { Power, LogPower, Unit };

/// ε(t): t^{-β}, (max(1, log t))^{-κ}, or 1.
class GapFunction {
 public:
  static GapFunction power(double beta) {
    if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("power gap needs beta in [0,1)");
    GapFunction g(GapKind::Power);
    g.param_ = beta;
    return g;
  }
  static GapFunction logpower(double kappa) {
    if (!(kappa > 0.0)) throw DomainError("log-power gap needs kappa > 0");
    GapFunction g(GapKind::LogPower);
    g.param_ = kappa;
    return g;
  }
  static GapFunction unit() { return GapFunction(GapKind::Unit); }

  GapKind kind() const { return kind_; }
  double beta() const { return kind_ == GapKind::Power ? param_ : 0.0; }
  double kappa() const { return kind_ == GapKind::LogPower ? param_ : 0.0; }

  double operator()(double t) const {
    switch (kind_) {
      case GapKind::Power: return std::pow(t, -param_);
      case GapKind::LogPower: return std::pow(std::max(1.0, std::log(t)), -param_);
      case GapKind::Unit: return 1.0;
    }
    return 1.0;
  }

  std::string name() const {
    std::ostringstream os;
    switch (kind_) {
      case GapKind::Power: os << "power(beta=" << param_ << ")"; break;
      case GapKind::LogPower: os << "logpower(kappa=" << param_ << ")"; break;
      case GapKind::Unit: os << "unit"; break;
    }
    return os.str();
  }

 private:
  explicit GapFunction(GapKind k) : kind_(k) {}
  GapKind kind_;
  double param_ = 0.0;
};

/// Φ, its improved companion Φ₀ and the gap ε relating Ψ₀ and Ψ.
struct BumpPairing {
  BumpFamily phi;
  BumpFamily phi0;
  GapFunction eps;
};

/// Catalog pairings: log σ ↦ (log σ/2, t^{-σ/(2(1+σ))}),
/// loglog (σ,δ) ↦ (loglog δσ, log^{-(1-δ)σ} t).
inline BumpPairing catalog_pairing(const BumpFamily& fam) {
  switch (fam.tag()) {
    case FamilyTag::Log:
      return {fam, BumpFamily::log(fam.sigma() / 2.0),
              GapFunction::power(fam.sigma() / (2.0 * (1.0 + fam.sigma())))};
    case FamilyTag::LogLog:
      return {fam, BumpFamily::loglog(fam.delta() * fam.sigma(), fam.delta()),
              GapFunction::logpower((1.0 - fam.delta()) * fam.sigma())};
    default:
      throw DomainError("no catalog pairing for " + fam.name() + "; supply epsilon and family0");
  }
}

// ---------------------------------------------------------------------------

enum class InverseMode { Closed, Bisection };

/// φ(x) = x/ε(1/x) near 0 and f = φ⁻¹. For the log-power gap φ is used on
/// (0, x_max] with x_max = e^{-(κ+1)} and continued by its tangent line, which
/// keeps φ concave and increasing (hence f convex) on all of (0,∞).
class PhiMap {
 public:
  explicit PhiMap(GapFunction eps, InverseMode mode = InverseMode::Closed,
                  std::optional<double> cutoff = {})
      : eps_(eps), mode_(mode), cutoff_(cutoff) {
    if (eps_.kind() == GapKind::LogPower) {
      const double k = eps_.kappa();
      x_max_ = std::exp(-(k + 1.0));
      y_max_ = x_max_ * std::pow(k + 1.0, k);
      slope_max_ = std::pow(k + 1.0, k - 1.0);
    }
    if (cutoff_ && !(*cutoff_ > 0.0)) throw DomainError("cutoff must be positive");
  }

  const GapFunction& eps() const { return eps_; }
  InverseMode mode() const { return mode_; }
  std::optional<double> cutoff() const { return cutoff_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }

  double phi(double x) const {
    if (x <= 0.0) return 0.0;
    switch (eps_.kind()) {
      case GapKind::Power: return std::pow(x, 1.0 - eps_.beta());
      case GapKind::LogPower:
        if (x > x_max_) return y_max_ + slope_max_ * (x - x_max_);
        return x * std::pow(-std::log(x), eps_.kappa());
      case GapKind::Unit: return x;
    }
    return x;
  }

  double phi_prime(double x) const {
    switch (eps_.kind()) {
      case GapKind::Power: return (1.0 - eps_.beta()) * std::pow(x, -eps_.beta());
      case GapKind::LogPower: {
        if (x > x_max_) return slope_max_;
        const double l = -std::log(x), k = eps_.kappa();
        return std::pow(l, k - 1.0) * (l - k);
      }
      case GapKind::Unit: return 1.0;
    }
    return 1.0;
  }

  double phi_second(double x) const {
    switch (eps_.kind()) {
      case GapKind::Power: {
        const double b = eps_.beta();
        return -b * (1.0 - b) * std::pow(x, -b - 1.0);
      }
      case GapKind::LogPower: {
        if (x > x_max_) return 0.0;
        const double l = -std::log(x), k = eps_.kappa();
        return -(k / x) * std::pow(l, k - 2.0) * (l - k + 1.0);
      }
      case GapKind::Unit: return 0.0;
    }
    return 0.0;
  }

  double inverse(double y) const {
    if (!(y >= 0.0) || !std::isfinite(y)) throw DomainError("phi inverse needs finite y >= 0");
    if (y == 0.0) return 0.0;
    if (mode_ == InverseMode::Closed) {
      switch (eps_.kind()) {
        case GapKind::Power: return std::pow(y, 1.0 / (1.0 - eps_.beta()));
        case GapKind::Unit: return y;
        case GapKind::LogPower:
          if (y >= y_max_) return x_max_ + (y - y_max_) / slope_max_;
          return bisect_inverse(y, x_max_);
      }
    }
    return bisect_inverse(y, num::kInf);
  }

  double f_prime(double y) const { return 1.0 / phi_prime(inverse(y)); }

  double f_second(double y) const {
    const double x = inverse(y);
    const double d = phi_prime(x);
    return -phi_second(x) / (d * d * d);
  }

  bool has_closed_F() const {
    switch (eps_.kind()) {
      case GapKind::Power: return eps_.beta() > 0.0;
      case GapKind::LogPower: return eps_.kappa() > 1.0;
      case GapKind::Unit: return cutoff_.has_value();
    }
    return false;
  }

  /// F(z) = ∫_0^z f(y)/y² dy (or ∫_{y0}^z with a cutoff); +∞ if divergent.
  double F(double z) const {
    if (!(z >= 0.0)) throw DomainError("F needs z >= 0");
    if (cutoff_) {
      if (eps_.kind() == GapKind::Unit) return z > 0.0 ? std::log(z / *cutoff_) : -num::kInf;
      return F_uncut(z) - F_uncut(*cutoff_);
    }
    return F_uncut(z);
  }

  /// Same integral by quadrature. On the range where φ is the closed
  /// expression the integrand is taken in ℓ = log(1/y), where f(y)/y depends
  /// only on q = log(1/f(y)); the tangent-line part is integrated directly.
  double F_quadrature(double z) const {
    if (z == 0.0) return 0.0;
    if (cutoff_) {
      const double y0 = *cutoff_;
      const double a = std::log(y0), b = std::log(z);
      const double sgn = b >= a ? 1.0 : -1.0;
      return sgn * num::integrate_finite(
                       [this](double w) { return inverse(std::exp(w)) * std::exp(-w); }, std::min(a, b),
                       std::max(a, b), 1e-12);
    }
    if (!has_closed_F()) return num::kInf;
    const double z1 = std::min(z, y_max_);
    double total = num::integrate_to_infinity([this](double l) { return f_over_y_log(l); },
                                              -std::log(z1), 1e-12);
    if (z > y_max_)
      total += num::integrate_finite([this](double y) { return inverse(y) / (y * y); }, y_max_, z, 1e-12);
    return total;
  }

  /// q = log(1/f(e^{-ℓ})) on the closed-expression range.
  double log_inverse(double l) const {
    switch (eps_.kind()) {
      case GapKind::Power: return l / (1.0 - eps_.beta());
      case GapKind::Unit: return l;
      case GapKind::LogPower: {
        const double k = eps_.kappa();
        auto h = [k, l](double q) { return q - k * std::log(q) - l; };
        if (h(k + 1.0) >= 0.0) return k + 1.0;
        double hi = std::max(2.0 * (k + 1.0), 2.0 * l);
        while (h(hi) < 0.0) hi *= 2.0;
        return num::bisect(h, k + 1.0, hi, {1e-15, 400, false}).x;
      }
    }
    return l;
  }

 private:
  /// f(y)/y at y = e^{-ℓ}.
  double f_over_y_log(double l) const {
    if (eps_.kind() == GapKind::LogPower) return std::pow(log_inverse(l), -eps_.kappa());
    return std::exp(l - log_inverse(l));
  }

  double F_uncut(double z) const {
    if (z == 0.0) return 0.0;
    switch (eps_.kind()) {
      case GapKind::Power: {
        const double b = eps_.beta();
        if (b == 0.0) return num::kInf;
        const double g1 = 1.0 / (1.0 - b) - 1.0;
        return std::pow(z, g1) / g1;
      }
      case GapKind::LogPower: {
        const double k = eps_.kappa();
        if (k <= 1.0) return num::kInf;
        auto closed = [k](double l) { return std::pow(l, 1.0 - k) / (k - 1.0) - std::pow(l, -k); };
        if (z <= y_max_) return closed(-std::log(inverse(z)));
        const double base = closed(k + 1.0);
        const double p = slope_max_;
        return base + (x_max_ - y_max_ / p) * (1.0 / y_max_ - 1.0 / z) + std::log(z / y_max_) / p;
      }
      case GapKind::Unit: return num::kInf;
    }
    return num::kInf;
  }

  double bisect_inverse(double y, double upper) const {
    // φ(x) ≥ x near 0 since ε ≤ 1, so the root lies below y.
    double hi = std::min(y, upper);
    if (phi(hi) < y) {
      hi = std::max(hi, y);
      int guard = 0;
      while (phi(hi) < y) {
        hi *= 2.0;
        if (++guard > 2000) throw InternalError("phi inverse bracket expansion failed");
      }
    }
    double lo = hi * 0.5;
    int guard = 0;
    while (phi(lo) >= y) {
      lo *= 0.5;
      if (++guard > 2000 || lo == 0.0) throw InternalError("phi inverse lower bracket failed");
    }
    return num::bisect([&](double x) { return phi(x) - y; }, lo, hi, {1e-15, 400, true}).x;
  }

  GapFunction eps_;
  InverseMode mode_;
  std::optional<double> cutoff_;
  double x_max_ = num::kInf;
  double y_max_ = num::kInf;
  double slope_max_ = 0.0;
};

inline double phi_inverse(const PhiMap& pm, double y) { return pm.inverse(y); }

// ---------------------------------------------------------------------------
// Sample sets: a function on I given by (value, relative measure) pairs.

using Samples = std::vector<std::pair<double, double>>;

inline Samples leaf_samples(const LeafWeight& w, const DyadicIndex& I) {
  auto [first, last] = w.leaf_range(I);
  const double share = 1.0 / static_cast<double>(last - first);
  Samples s;
  s.reserve(last - first);
  for (std::size_t i = first; i < last; ++i) s.emplace_back(w[i], share);
  return s;
}

/// Luxemburg norm inf{λ : Σ m·Φ(x/λ) ≤ 1} by bisection on λ.
inline double orlicz_norm_def(const Samples& s, const BumpFamily& fam) {
  double top = 0.0;
  for (auto& [x, m] : s) top = std::max(top, x);
  if (top == 0.0) return 0.0;
  auto mean_phi = [&](double lambda) {
    double acc = 0.0;
    for (auto& [x, m] : s) acc += m * fam.phi(x / lambda);
    return acc;
  };
  std::ostringstream trace;
  double hi = top;
  int guard = 0;
  while (mean_phi(hi) > 1.0) {
    trace << " hi=" << hi;
    hi *= 2.0;
    if (++guard > 1100) throw InternalError("Orlicz norm bracket failed:" + trace.str());
  }
  double lo = hi;
  guard = 0;
  while (mean_phi(lo) <= 1.0) {
    trace << " lo=" << lo;
    lo *= 0.5;
    if (++guard > 1100 || lo == 0.0) throw InternalError("Orlicz norm bracket failed:" + trace.str());
  }
  return num::bisect([&](double lambda) { return mean_phi(lambda) - 1.0; }, lo, hi,
                     {1e-12, 200, true})
      .x;
}

inline double orlicz_norm_def(const LeafWeight& w, const DyadicIndex& I, const BumpFamily& fam) {
  return orlicz_norm_def(leaf_samples(w, I), fam);
}

/// Σ over distribution steps of N·Ψ(N)·Δt.
inline double orlicz_norm_dist(const StepDistribution& N, const BumpFamily& fam) {
  return N.integrate([&](double m) { return m * fam.psi(m); });
}

inline double orlicz_norm_dist(const LeafWeight& w, const DyadicIndex& I, const BumpFamily& fam) {
  return orlicz_norm_dist(distribution(w, I), fam);
}

struct SelfImprovement {
  bool skipped = false;
  double average = 0.0;
  double norm_phi0 = 0.0;  // ‖u‖ for Φ₀
  double norm_phi = 0.0;   // ‖u‖ for Φ
  double eps_value = 0.0;  // ε(‖u‖_Φ/⟨u⟩)
  double ratio = 0.0;      // smallest C for this weight
};

/// ‖u‖_{Φ₀} ≤ C‖u‖_Φ ε(‖u‖_Φ/⟨u⟩), both norms in distribution form.
inline SelfImprovement self_improvement_check(const LeafWeight& w, const DyadicIndex& I,
                                              const BumpPairing& pr) {
  SelfImprovement out;
  out.average = w.average(I);
  if (out.average == 0.0) {
    out.skipped = true;
    return out;
  }
  const auto N = distribution(w, I);
  out.norm_phi0 = orlicz_norm_dist(N, pr.phi0);
  out.norm_phi = orlicz_norm_dist(N, pr.phi);
  out.eps_value = pr.eps(out.norm_phi / out.average);
  out.ratio = out.norm_phi0 / (out.norm_phi * out.eps_value);
  return out;
}

struct WeakConcavity {
  bool defined = true;
  std::string diagnostic;
  double worst = num::kInf;  // inf of f(Σλx)/Σλf(x)
  int worst_n = 0;
  double worst_mean = 0.0;
};

/// Random convex combinations of log-uniform points in [lo, hi].
inline WeakConcavity weak_concavity_probe(const std::function<double(double)>& f, double lo, double hi,
                                          std::size_t trials, std::uint64_t seed, int n_max = 64) {
  if (!(lo > 0.0 && hi > lo)) throw DomainError("weak concavity domain must satisfy 0 < lo < hi");
  WeakConcavity out;
  num::Rng rng(seed);
  std::vector<double> x, lam;
  for (std::size_t t = 0; t < trials; ++t) {
    const int n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_max - 1)));
    x.resize(n);
    lam.resize(n);
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      x[j] = rng.log_uniform(lo, hi);
      lam[j] = rng.exponential();
      total += lam[j];
    }
    double mean = 0.0, mean_f = 0.0;
    for (int j = 0; j < n; ++j) {
      lam[j] /= total;
      const double fx = f(x[j]);
      if (!(fx > 0.0)) {
        out.defined = false;
        out.diagnostic = "f is not positive at x = " + std::to_string(x[j]);
        return out;
      }
      mean += lam[j] * x[j];
      mean_f += lam[j] * fx;
    }
    const double fm = f(mean);
    if (!(fm > 0.0)) {
      out.defined = false;
      out.diagnostic = "f is not positive at x = " + std::to_string(mean);
      return out;
    }
    const double ratio = fm / mean_f;
    if (ratio < out.worst) {
      out.worst = ratio;
      out.worst_n = n;
      out.worst_mean = mean;
    }
  }
  return out;
}

/// a(t) = t·ε(t).
inline std::function<double(double)> t_eps(const GapFunction& eps) {
  return [eps](double t) { return t * eps(t); };
}

// ---------------------------------------------------------------------------

enum class Verdict { Finite, Infinite, Inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Finite: return "finite";
    case Verdict::Infinite: return "infinite";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct IntegralVerdict {
  Verdict verdict = Verdict::Inconclusive;
  double truncated = 0.0;  // quadrature over [start, T]
  double tail = num::kInf; // analytic bound on [T, ∞)
  double T = 0.0;
  double value() const { return verdict == Verdict::Finite ? truncated + tail : num::kInf; }
};

inline double log_scale_integral(const std::function<double(double)>& g, double a, double b) {
  // ∫_a^b g(t) dt with t = e^w.
  return num::integrate_finite([&](double w) { const double t = std::exp(w); return g(t) * t; },
                               std::log(a), std::log(b), 1e-12);
}

/// ∫_1^∞ dt/Φ(t).
inline IntegralVerdict integrability_phi(const BumpFamily& fam, double T = 1e6) {
  IntegralVerdict out;
  out.T = T;
  out.truncated = log_scale_integral([&](double t) { return 1.0 / fam.phi(t); }, 1.0, T);
  const double L = std::log(T);
  switch (fam.tag()) {
    case FamilyTag::Power:
      if (fam.p() > 1.0) {
        out.verdict = Verdict::Finite;
        out.tail = std::pow(T, 1.0 - fam.p()) / (fam.p() - 1.0);
      } else {
        out.verdict = Verdict::Infinite;
      }
      break;
    case FamilyTag::Log:
      out.verdict = Verdict::Finite;
      out.tail = std::pow(1.0 + L, -fam.sigma()) / fam.sigma();
      break;
    case FamilyTag::LogLog:
      out.verdict = Verdict::Finite;
      out.tail = std::pow(1.0 + std::log1p(L), -fam.sigma()) / fam.sigma();
      break;
    case FamilyTag::Custom:
      out.verdict = Verdict::Inconclusive;
      break;
  }
  return out;
}

/// ∫_2^∞ ε(t)/t dt.
inline IntegralVerdict epsilon_integrability(const GapFunction& eps, double T = 1e6) {
  IntegralVerdict out;
  out.T = T;
  out.truncated = log_scale_integral([&](double t) { return eps(t) / t; }, 2.0, T);
  const double L = std::log(T);
  switch (eps.kind()) {
    case GapKind::Power:
      if (eps.beta() > 0.0) {
        out.verdict = Verdict::Finite;
        out.tail = std::pow(T, -eps.beta()) / eps.beta();
      } else {
        out.verdict = Verdict::Infinite;
      }
      break;
    case GapKind::LogPower:
      if (eps.kappa() > 1.0) {
        out.verdict = Verdict::Finite;
        out.tail = std::pow(L, 1.0 - eps.kappa()) / (eps.kappa() - 1.0);
      } else {
        out.verdict = Verdict::Infinite;
      }
      break;
    case GapKind::Unit: out.verdict = Verdict::Infinite; break;
  }
  return out;
}

enum class CurvRegime { Both, OursOnly, Neither };

inline const char* regime_name(CurvRegime r) {
  switch (r) {
    case CurvRegime::Both: return "both";
    case CurvRegime::OursOnly: return "ours-only";
    case CurvRegime::Neither: return "neither";
  }
  return "?";
}

struct CurvTranslation {
  std::function<double(double)> epsilon_curv;  // √ε(t²)
  IntegralVerdict integral_ours;               // ∫ ε_curv(y)²/y dy
  IntegralVerdict integral_curv;               // ∫ ε_curv(y)/y dy
  CurvRegime regime = CurvRegime::Neither;
};

/// Integrals start at y = 2.
inline CurvTranslation curv_translate(const GapFunction& eps, double T = 1e6) {
  CurvTranslation out;
  out.epsilon_curv = [eps](double t) { return std::sqrt(eps(t * t)); };
  auto& ours = out.integral_ours;
  auto& curv = out.integral_curv;
  ours.T = curv.T = T;
  ours.truncated = log_scale_integral([&](double y) { return eps(y * y) / y; }, 2.0, T);
  curv.truncated = log_scale_integral([&](double y) { return std::sqrt(eps(y * y)) / y; }, 2.0, T);
  const double L = std::log(T);
  switch (eps.kind()) {
    case GapKind::Power: {
      const double b = eps.beta();
      if (b > 0.0) {
        ours.verdict = curv.verdict = Verdict::Finite;
        ours.tail = std::pow(T, -2.0 * b) / (2.0 * b);
        curv.tail = std::pow(T, -b) / b;
      } else {
        ours.verdict = curv.verdict = Verdict::Infinite;
      }
      break;
    }
    case GapKind::LogPower: {
      // ε(y²) = (2 log y)^{-κ}; substituting w = 2 log y gives the tails.
      const double k = eps.kappa();
      if (k > 1.0) {
        ours.verdict = Verdict::Finite;
        ours.tail = 0.5 * std::pow(2.0 * L, 1.0 - k) / (k - 1.0);
      } else {
        ours.verdict = Verdict::Infinite;
      }
      if (k > 2.0) {
        curv.verdict = Verdict::Finite;
        curv.tail = 0.5 * std::pow(2.0 * L, 1.0 - k / 2.0) / (k / 2.0 - 1.0);
      } else {
        curv.verdict = Verdict::Infinite;
      }
      break;
    }
    case GapKind::Unit: ours.verdict = curv.verdict = Verdict::Infinite; break;
  }
  if (ours.verdict == Verdict::Finite && curv.verdict == Verdict::Finite)
    out.regime = CurvRegime::Both;
  else if (ours.verdict == Verdict::Finite)
    out.regime = CurvRegime::OursOnly;
  return out;
}

// ---------------------------------------------------------------------------
// Sampled structural checks on a family.

struct FamilyInvariants {
  bool phi_increasing = true;
  bool phi_convex = true;
  bool psi_decreasing = true;
  bool s_psi_increasing = true;
  double first_failure_t = 0.0;
  double first_failure_s = 0.0;
  double psi_integral_at_one = 0.0;  // G(1); finite iff 1/(sΨ) is integrable at 0
};

inline FamilyInvariants family_invariants(const BumpFamily& fam, double T = 1e6, int samples = 400) {
  FamilyInvariants out;
  double prev = -1.0, prev_slope = -num::kInf;
  const double step = std::log(T) / samples;
  for (int i = 0; i <= samples; ++i) {
    const double t = std::exp(i * step);
    const double v = fam.phi(t);
    if (v <= prev && out.phi_increasing) {
      out.phi_increasing = false;
      out.first_failure_t = t;
    }
    if (i > 0) {
      const double tp = std::exp((i - 1) * step);
      const double slope = (v - fam.phi(tp)) / (t - tp);
      if (slope < prev_slope * (1.0 - 1e-12) && out.phi_convex) {
        out.phi_convex = false;
        out.first_failure_t = t;
      }
      prev_slope = slope;
    }
    prev = v;
  }
  double prev_psi = num::kInf, prev_spsi = 0.0;
  for (int i = samples; i >= 0; --i) {
    const double r = 60.0 * i / samples;  // s from e^{-60} up to 1
    const double s = std::exp(-r);
    const double psi = fam.psi_of_r(r);
    const double spsi = s * psi;
    if (psi > prev_psi * (1.0 + 1e-12) && out.psi_decreasing) {
      out.psi_decreasing = false;
      out.first_failure_s = s;
    }
    if (spsi < prev_spsi * (1.0 - 1e-12) && out.s_psi_increasing) {
      out.s_psi_increasing = false;
      out.first_failure_s = s;
    }
    prev_psi = psi;
    prev_spsi = spsi;
  }
  out.psi_integral_at_one = fam.psi_integral(1.0);
  return out;
}

struct GapHypothesis {
  double worst_ratio = 0.0;  // sup Ψ₀(s)/(Ψ(s)ε(Ψ(s)))
  double worst_s = 0.0;
};

/// Ψ₀(s) ≤ C·Ψ(s)·ε(Ψ(s)) on s = e^{-r}, r ∈ [0, r_max].
inline GapHypothesis gap_hypothesis(const BumpPairing& pr, double r_max = 200.0, int samples = 2000) {
  GapHypothesis out;
  for (int i = 0; i <= samples; ++i) {
    const double r = r_max * i / samples;
    const double psi = pr.phi.psi_of_r(r);
    const double ratio = pr.phi0.psi_of_r(r) / (psi * pr.eps(psi));
    if (ratio > out.worst_ratio) {
      out.worst_ratio = ratio;
      out.worst_s = std::exp(-r);
    }
  }
  return out;
}

}  // namespace dbell
