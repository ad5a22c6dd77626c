#pragma once

// The explicit Bellman functions B1(N, A) and B2(u, v, L, A), the master
// function on tree nodes, and sampled verification of their properties.

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dbell/bump.hpp"
#include "dbell/dyadic.hpp"
#include "dbell/numerics.hpp"
#include "dbell/report.hpp"

namespace dbell {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Budget and domain points.

struct ConstantBudget {
  double C1 = kNaN;  // constant in B1; NaN means 1 + G0(1)
  double C2 = kNaN;  // constant in B2; NaN means 1 + P²F(P√δ)
  double c_drop = 0.1;
  double delta1 = kNaN;  // NaN means c_drop/10
  double derivative_floor = 1.0;
  double delta = 1e-3;
  double P = 100.0;
  double A_min = 1e-3;

  void validate() const {
    auto positive = [](double x, const char* what) {
      if (!(x > 0.0) || std::isinf(x)) throw DomainError(std::string("budget entry ") + what + " must be positive and finite");
    };
    positive(C1, "C1");
    positive(C2, "C2");
    positive(c_drop, "c_drop");
    positive(delta1, "delta1");
    positive(derivative_floor, "derivative_floor");
    positive(delta, "delta");
    positive(P, "P");
    positive(A_min, "A_min");
    if (!(delta1 < c_drop)) throw DomainError("budget needs delta1 < c_drop");
  }
};

struct OmegaOnePoint {
  double N = 0.0;
  double A = 0.0;

  void validate() const {
    if (!(N >= 0.0 && N <= 1.0)) throw DomainError("Omega1 needs 0 <= N <= 1");
    if (!(A >= 0.0 && A <= 1.0)) throw DomainError("Omega1 needs 0 <= A <= 1");
  }
};

struct OmegaTwoPoint {
  double u = 0.0, v = 0.0, L = 0.0, A = 0.0;
  double delta = 1e-3, P = 100.0;

  /// Membership with a relative slack for values produced by arithmetic.
  bool contains(double slack = 1e-12) const {
    if (!(u >= 0.0 && v >= 0.0 && L >= 0.0)) return false;
    if (!(A >= 0.0 && A <= 1.0 + slack)) return false;
    if (u * v > delta * (1.0 + slack)) return false;
    return L <= P * std::sqrt(u * v) * (1.0 + slack);
  }

  void validate() const {
    if (!std::isfinite(u) || !std::isfinite(v) || !std::isfinite(L) || !std::isfinite(A))
      throw DomainError("Omega2 point has non-finite coordinates");
    if (!contains()) {
      std::ostringstream os;
      os << "point (u=" << u << ", v=" << v << ", L=" << L << ", A=" << A << ") is outside Omega2";
      throw DomainError(os.str());
    }
  }
};

/// Ψ0, the gap map φ and a fully resolved budget.
struct BellmanModel {
  BumpFamily phi0;
  PhiMap pm;
  ConstantBudget budget;
};

inline BellmanModel make_model(const BumpFamily& phi0, const PhiMap& pm, ConstantBudget b = {}) {
  if (std::isnan(b.C1)) b.C1 = 1.0 + phi0.psi_integral(1.0);
  if (std::isnan(b.C2)) b.C2 = 1.0 + b.P * b.P * pm.F(b.P * std::sqrt(b.delta));
  if (std::isnan(b.delta1)) b.delta1 = b.c_drop / 10.0;
  b.validate();
  return {phi0, pm, b};
}

inline BellmanModel make_model(const BumpPairing& pr, ConstantBudget b = {},
                               InverseMode mode = InverseMode::Closed) {
  return make_model(pr.phi0, PhiMap(pr.eps, mode), b);
}

// ---------------------------------------------------------------------------
// B1(N, A) = CN − N·G0(N/A), G0(x) = ∫_0^x ds/(sΨ0(s)).

struct B1Value {
  double value;
  double grad_N;
  double grad_A;
};

inline B1Value b1_formula(double N, double A, const BumpFamily& fam0, double C, bool quadrature = false) {
  if (N == 0.0) return {0.0, 0.0, 0.0};
  if (!(A > 0.0)) return {-num::kInf, kNaN, kNaN};
  const double x = N / A;
  const double G = quadrature ? fam0.psi_integral_quadrature(x) : fam0.psi_integral(x);
  const double psi = fam0.psi(x);
  return {N * (C - G), C - G - 1.0 / psi, N / (A * psi)};
}

inline B1Value b1_eval(const OmegaOnePoint& p, const BellmanModel& m) {
  p.validate();
  return b1_formula(p.N, p.A, m.phi0, m.budget.C1);
}

/// Sup of the A-range where B1(N, ·) < 0 for fixed N: B1 < 0 iff N/A > x*.
inline double b1_negativity_threshold(const BumpFamily& fam0, double C) {
  const double G1 = fam0.psi_integral(1.0);
  if (C > G1) return std::exp((C - G1) * fam0.psi(1.0));
  return num::bisect([&](double x) { return fam0.psi_integral(x) - C; }, 1e-300, 1.0, {1e-14, 400, true}).x;
}

// ---------------------------------------------------------------------------
// B2(u,v,L,A) = Cu − (L²/v)·F(L/(A+1)), F(z) = ∫_0^z f(y)/y² dy.

struct B2Value {
  double value;
  std::array<double, 4> grad;  // u, v, L, A
};

/// The part −(L²/v)F(L/(A+1)) that carries all the curvature.
inline double b2_curved_part(double v, double L, double A, const PhiMap& pm, bool quadrature = false) {
  if (L == 0.0) return 0.0;
  const double z = L / (A + 1.0);
  const double F = quadrature ? pm.F_quadrature(z) : pm.F(z);
  return -(L * L / v) * F;
}

inline B2Value b2_formula(double u, double v, double L, double A, const PhiMap& pm, double C,
                          bool quadrature = false) {
  if (L == 0.0 || v == 0.0) return {C * u, {C, 0.0, 0.0, 0.0}};
  const double z = L / (A + 1.0);
  const double F = quadrature ? pm.F_quadrature(z) : pm.F(z);
  const double f = pm.inverse(z);
  const double value = C * u - (L * L / v) * F;
  return {value, {C, L * L * F / (v * v), -(2.0 * L / v) * F - (A + 1.0) * f / v, (L / v) * f}};
}

inline B2Value b2_eval(const OmegaTwoPoint& p, const BellmanModel& m) {
  p.validate();
  return b2_formula(p.u, p.v, p.L, p.A, m.pm, m.budget.C2);
}

// ---------------------------------------------------------------------------
// Sylvester-type criterion for 3×3 matrices with vanishing determinant.

enum class SylvesterVerdict { NSD, NotCovered };

struct SylvesterResult {
  SylvesterVerdict verdict;
  bool premises;       // m11 < 0, leading minor > 0, det ≈ 0
  double m11;
  double minor;
  double det_relative;  // |det| / determinant_scale
  double max_eigenvalue;
  bool eigen_nsd;       // max eigenvalue ≤ tol·trace magnitude
};

inline SylvesterResult sylvester_nsd(const Eigen::Matrix3d& M, double det_tol = 1e-6, double eig_tol = 1e-7) {
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff())) throw DomainError("sylvester_nsd needs a symmetric matrix");
  SylvesterResult r{};
  r.m11 = M(0, 0);
  r.minor = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  const double scale = num::determinant_scale(M);
  r.det_relative = scale == 0.0 ? 0.0 : std::abs(M.determinant()) / scale;
  const double minor_scale = std::abs(M(0, 0) * M(1, 1)) + M(0, 1) * M(0, 1);
  const bool minor_positive = r.minor > 1e-12 * minor_scale;
  bool row_zero = true;
  for (int j = 0; j < 3; ++j) row_zero = row_zero && M(0, j) == 0.0;
  r.premises = (r.m11 < 0.0 && minor_positive && r.det_relative <= det_tol);
  r.verdict = r.premises ? SylvesterVerdict::NSD : SylvesterVerdict::NotCovered;
  // Degenerate premise: a zero first row reduces the question to the 2×2 block.
  if (!r.premises && row_zero) {
    const Eigen::Matrix2d sub = M.block<2, 2>(1, 1);
    if (sub(0, 0) <= 0.0 && sub(1, 1) <= 0.0 && sub.determinant() >= -1e-12 * (std::abs(sub(0, 0) * sub(1, 1)) + sub(0, 1) * sub(0, 1)))
      r.verdict = SylvesterVerdict::NSD;
  }
  r.max_eigenvalue = num::max_eigenvalue<3>(M);
  r.eigen_nsd = r.max_eigenvalue <= eig_tol * num::trace_magnitude<3>(M);
  return r;
}

// ---------------------------------------------------------------------------
// Sampling grids.

struct Axis {
  double min = 0.0, max = 1.0;
  std::size_t count = 10;
  bool log = false;

  void validate(const std::string& name) const {
    if (!(min <= max) || !std::isfinite(min) || !std::isfinite(max)) throw InputError("axis " + name + " has an invalid range");
    if (log && !(min > 0.0)) throw InputError("log axis " + name + " needs a positive minimum");
    if (count == 0) throw InputError("axis " + name + " needs a positive count");
  }
  /// Cell-centered node i of count.
  double at(std::size_t i) const {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    if (log) return std::exp(std::log(min) + t * (std::log(max) - std::log(min)));
    return min + t * (max - min);
  }
  double draw(num::Rng& rng) const { return log ? rng.log_uniform(min, max) : rng.uniform(min, max); }
};

struct GridSpec {
  std::map<std::string, Axis> dims;
  bool lattice = true;
  std::uint64_t seed = 1;
  std::size_t points = 10000;  // accepted points for rejection sampling

  const Axis& axis(const std::string& n) const {
    auto it = dims.find(n);
    if (it == dims.end()) throw InputError("grid is missing dimension " + n);
    return it->second;
  }
};

inline GridSpec default_omega1_grid(const ConstantBudget& b) {
  GridSpec g;
  g.dims["N"] = {1e-6, 1.0, 150, true};
  g.dims["A"] = {b.A_min, 1.0, 150, true};
  return g;
}

inline GridSpec default_omega2_grid() {
  GridSpec g;
  g.lattice = false;
  g.points = 10000;
  g.dims["u"] = {1e-6, 1.0, 0, true};
  g.dims["v"] = {1e-6, 1.0, 0, true};
  g.dims["L"] = {1e-10, 4.0, 0, true};
  g.dims["A"] = {0.0, 1.0, 0, false};
  for (auto& [k, a] : g.dims) a.count = 20;
  return g;
}

inline std::vector<std::array<double, 4>> sample_omega2(const GridSpec& g, double delta, double P) {
  const std::array<std::string, 4> names{"u", "v", "L", "A"};
  for (auto& n : names) g.axis(n).validate(n);
  if (g.axis("A").min < 0.0 || g.axis("A").max > 1.0) throw InputError("grid A range must lie in [0,1]");
  auto admissible = [&](const std::array<double, 4>& p) {
    return p[0] * p[1] <= delta && p[2] <= P * std::sqrt(p[0] * p[1]) && p[1] > 0.0;
  };
  std::vector<std::array<double, 4>> out;
  if (g.lattice) {
    const Axis &au = g.axis("u"), &av = g.axis("v"), &aL = g.axis("L"), &aA = g.axis("A");
    for (std::size_t i = 0; i < au.count; ++i)
      for (std::size_t j = 0; j < av.count; ++j)
        for (std::size_t k = 0; k < aL.count; ++k)
          for (std::size_t l = 0; l < aA.count; ++l) {
            std::array<double, 4> p{au.at(i), av.at(j), aL.at(k), aA.at(l)};
            if (admissible(p)) out.push_back(p);
          }
    return out;
  }
  num::Rng rng(g.seed);
  const std::size_t max_attempts = 1000 * std::max<std::size_t>(g.points, 1);
  for (std::size_t a = 0; a < max_attempts && out.size() < g.points; ++a) {
    std::array<double, 4> p{};
    for (std::size_t i = 0; i < 4; ++i) p[i] = g.axis(names[i]).draw(rng);
    if (admissible(p)) out.push_back(p);
  }
  if (out.size() < g.points) throw ResourceError("rejection sampling could not fill the Omega2 grid");
  return out;
}

// ---------------------------------------------------------------------------
// B1 sweep.

inline Coords b1_coords(double N, double A) { return {{"N", N}, {"A", A}}; }

inline VerificationReport b1_property_check(const GridSpec& grid, const BellmanModel& m,
                                            bool only_N_le_A = true) {
  const Axis& aN = grid.axis("N");
  const Axis& aA = grid.axis("A");
  aN.validate("N");
  aA.validate("A");
  if (aN.max > 1.0 || aA.max > 1.0 || aN.min < 0.0) throw InputError("Omega1 grid must lie in [0,1]²");
  const auto& b = m.budget;
  const double A_floor = std::max(aA.min, b.A_min);

  struct Pt {
    double N, A;
  };
  std::vector<Pt> pts;
  std::size_t below_floor = 0;
  for (std::size_t i = 0; i < aN.count; ++i)
    for (std::size_t j = 0; j < aA.count; ++j) {
      const double N = aN.at(i), A = aA.at(j);
      if (only_N_le_A && N > A) continue;
      if (A < A_floor) {
        ++below_floor;
        continue;
      }
      pts.push_back({N, A});
    }

  struct Out {
    double bound, floor, hess, value, max_eig, trace;
  };
  std::vector<Out> res(pts.size());
  num::parallel_for(pts.size(), [&](std::size_t i) {
    const auto [N, A] = pts[i];
    const B1Value v = b1_formula(N, A, m.phi0, b.C1);
    const double per_N = v.value / N;
    const double target = b.derivative_floor * N / m.phi0.psi(N);
    // Curvature lives in −N·G0(N/A); the CN term is linear.
    auto curved = [&](const num::Point<2>& p) { return -p[0] * m.phi0.psi_integral(p[0] / p[1]); };
    const num::Point<2> x{N, A};
    const auto H = num::second_difference_hessian<2>(curved, x, num::relative_steps<2>(x, 1e-4));
    const double lam = num::max_eigenvalue<2>(H);
    const double tr = num::trace_magnitude<2>(H);
    res[i] = {std::min(per_N, b.C1 - per_N), (v.grad_A - target) / target, 1e-7 - lam / tr, v.value, lam, tr};
  });

  VerificationReport r;
  r.name = "bellman_b1";
  CheckResult bounds("bounds"), floor("derivative_floor", true), hess("hessian_nsd");
  bounds.note = "0 <= B1 <= C1*N, margin min(B1, C1*N - B1)/N";
  floor.note = "dA B1 >= derivative_floor*N/Psi0(N), margin relative to the target";
  hess.note = "max eigenvalue <= 1e-7*trace magnitude of the second-difference Hessian";
  Series heat{"heat", {"N", "A", "B1", "floor_margin", "hessian_margin"}, {}};
  double worst_floor_ratio = num::kInf;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Coords at = b1_coords(pts[i].N, pts[i].A);
    bounds.observe(res[i].bound, at);
    floor.observe(res[i].floor, at);
    hess.observe(res[i].hess, at);
    worst_floor_ratio = std::min(worst_floor_ratio, 1.0 + res[i].floor);
    heat.rows.push_back({pts[i].N, pts[i].A, res[i].value, res[i].floor, res[i].hess});
  }
  floor.value = worst_floor_ratio * b.derivative_floor;
  r.add(bounds);
  r.add(floor);
  r.add(hess);

  // Region where B1 < 0: A < N/x*, for every N of the grid.
  const double xstar = b1_negativity_threshold(m.phi0, b.C1);
  CheckResult neg("negativity_region");
  neg.informational = true;
  neg.value = xstar;
  neg.note = "B1(N,A) < 0 exactly when A < N/x*; value is x*";
  Series boundary{"negativity_boundary", {"N", "A_crit", "B1_at_half_A_crit"}, {}};
  for (std::size_t i = 0; i < aN.count; ++i) {
    const double N = aN.at(i);
    const double Ac = N / xstar;
    const double probe = b1_formula(N, 0.5 * Ac, m.phi0, b.C1).value;
    boundary.rows.push_back({N, Ac, probe});
    // A violation is a confirmed negative value below the predicted boundary.
    neg.observe(-probe / N, b1_coords(N, 0.5 * Ac));
  }
  r.add(neg);
  r.series.push_back(std::move(heat));
  r.series.push_back(std::move(boundary));
  r.extra["grid_points"] = pts.size();
  r.extra["excluded_below_A_min"] = below_floor;
  r.extra["A_min"] = A_floor;
  r.extra["C1"] = b.C1;
  r.extra["x_star"] = xstar;
  r.extra["derivative_floor"] = b.derivative_floor;
  return r;
}

// ---------------------------------------------------------------------------
// B2 sweep.

inline Coords b2_coords(double u, double v, double L, double A) {
  return {{"u", u}, {"v", v}, {"L", L}, {"A", A}};
}

/// Second-difference Hessian of the curved part in the order (v, A, L).
inline Eigen::Matrix3d b2_hessian(double v, double L, double A, const PhiMap& pm) {
  auto g = [&](const num::Point<3>& p) { return b2_curved_part(p[0], p[2], p[1], pm); };
  const num::Point<3> x{v, A, L};
  const num::Point<3> h{1e-4 * v, 1e-4 * (A + 1.0), 1e-4 * L};
  return num::second_difference_hessian<3>(g, x, h);
}

/// ((B2)'_A + uv(B2)'_L)/(uL) = f(z)/(uv) − 2F(z) − f(z)/z with z = L/(A+1).
inline double combined_drop_ratio(double w, double z, const PhiMap& pm) {
  const double f = pm.inverse(z);
  return f / w - 2.0 * pm.F(z) - f / z;
}

inline VerificationReport b2_property_check(const GridSpec& grid, const BellmanModel& m) {
  const auto& b = m.budget;
  const auto pts = sample_omega2(grid, b.delta, b.P);
  const bool closed = m.pm.has_closed_F() && m.pm.eps().kind() == GapKind::Power;

  struct Out {
    double bound, dA, a_drop, combined, lder, nsd, vv, det, quad, value;
    bool region;
    SylvesterResult syl;
  };
  std::vector<Out> res(pts.size());
  num::parallel_for(pts.size(), [&](std::size_t i) {
    const auto [u, v, L, A] = pts[i];
    Out o{};
    const B2Value val = b2_formula(u, v, L, A, m.pm, b.C2);
    const double Cu = b.C2 * u;
    o.value = val.value;
    o.bound = std::min(val.value, Cu - val.value) / Cu;
    o.dA = val.grad[3];
    o.region = L >= m.pm.phi(u * v);
    const double uL = u * L;
    o.a_drop = val.grad[3] / uL;
    o.combined = (val.grad[3] + u * v * val.grad[2]) / uL;
    o.lder = u * v * val.grad[2] / uL;
    const Eigen::Matrix3d H = b2_hessian(v, L, A, m.pm);
    const double lam = num::max_eigenvalue<3>(H);
    o.nsd = 1e-7 - lam / num::trace_magnitude<3>(H);
    o.vv = -H(0, 0);
    const double scale = num::determinant_scale(H);
    o.det = 1e-6 - (scale == 0.0 ? 0.0 : std::abs(H.determinant()) / scale);
    o.syl = sylvester_nsd(H);
    if (closed) {
      const double z = L / (A + 1.0);
      o.quad = 1e-9 - num::relative_error(m.pm.F(z), m.pm.F_quadrature(z));
    } else {
      o.quad = num::kInf;
    }
    res[i] = o;
  });

  VerificationReport r;
  r.name = "bellman_b2";
  CheckResult bounds("bounds"), dA("dA_nonnegative"), adrop("A_drop"), comb("combined_drop", true),
      lder("L_derivative"), nsd("hessian_nsd"), vv("hessian_vv_negative", true), det("hessian_det_zero"),
      syl("sylvester_agreement"), quad("closed_vs_quadrature");
  bounds.note = "0 <= B2 <= C2*u, margin relative to C2*u";
  adrop.note = "(B2)'_A >= c_drop*u*L on L >= phi(uv); value is the infimum of (B2)'_A/(uL)";
  comb.note = "(B2)'_A + uv(B2)'_L > 0 relative to uL on L >= phi(uv); value is the infimum ratio";
  lder.informational = true;
  lder.note = "uv(B2)'_L >= -delta1*u*L on Omega2; value is the infimum of uv(B2)'_L/(uL)";
  det.note = "|det| <= 1e-6 * sum of absolute Leibniz terms, Hessian in (v, A, L)";
  syl.note = "lemma verdict agrees with eigenvalues wherever the premises hold";
  quad.note = closed ? "closed-form F against quadrature, 1e-9 relative" : "no closed form; skipped";
  double inf_adrop = num::kInf, inf_comb = num::kInf, inf_lder = num::kInf;
  std::size_t region_count = 0, premise_count = 0;
  Series heat{"heat", {"u", "v", "L", "A", "in_region", "combined_ratio", "hessian_margin"}, {}};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto [u, v, L, A] = pts[i];
    const Coords at = b2_coords(u, v, L, A);
    const Out& o = res[i];
    bounds.observe(o.bound, at);
    dA.observe(o.dA, at);
    lder.observe(o.lder + b.delta1, at);
    inf_lder = std::min(inf_lder, o.lder);
    nsd.observe(o.nsd, at);
    vv.observe(o.vv, at);
    det.observe(o.det, at);
    if (o.syl.premises) {
      ++premise_count;
      syl.observe(o.syl.eigen_nsd ? 1.0 : -1.0, at);
    }
    if (closed) quad.observe(o.quad, at);
    if (o.region) {
      ++region_count;
      adrop.observe(o.a_drop - b.c_drop, at);
      comb.observe(o.combined, at);
      inf_adrop = std::min(inf_adrop, o.a_drop);
      inf_comb = std::min(inf_comb, o.combined);
    }
    heat.rows.push_back({u, v, L, A, o.region ? 1.0 : 0.0, o.combined, o.nsd});
  }
  adrop.value = inf_adrop;
  comb.value = inf_comb;
  lder.value = inf_lder;
  syl.value = static_cast<double>(premise_count);
  for (auto* c : {&bounds, &dA, &adrop, &comb, &lder, &nsd, &vv, &det, &syl, &quad}) r.add(*c);
  r.series.push_back(std::move(heat));
  r.extra["points"] = pts.size();
  r.extra["region_points"] = region_count;
  r.extra["C2"] = b.C2;
  r.extra["delta"] = b.delta;
  r.extra["P"] = b.P;
  r.extra["c_drop"] = b.c_drop;
  r.extra["delta1"] = b.delta1;
  r.extra["largest_feasible_c"] = inf_comb > 0.0 ? inf_comb : 0.0;
  return r;
}

/// Infimum of the combined ratio over {uv ≤ δ, φ(uv) ≤ L ≤ P√(uv), 0 ≤ A ≤ 1}
/// for each δ. The ratio depends on (uv, z) only, with z ∈ [φ(uv)/2, P√(uv)].
struct DeltaScanRow {
  double delta;
  double inf_ratio;
  double worst_w;
  double worst_z;
};

inline std::vector<DeltaScanRow> combined_drop_delta_scan(const PhiMap& pm, double P,
                                                          const std::vector<double>& deltas,
                                                          std::size_t nw = 80, std::size_t nz = 80) {
  std::vector<DeltaScanRow> out;
  for (double d : deltas) {
    if (!(d > 0.0)) throw DomainError("delta scan needs positive deltas");
    DeltaScanRow row{d, num::kInf, 0.0, 0.0};
    const Axis aw{d * 1e-8, d, nw, true};
    for (std::size_t i = 0; i <= nw; ++i) {
      // Include the endpoint w = δ, where the bound is tightest.
      const double w = i == nw ? d : aw.at(i);
      const double zlo = 0.5 * pm.phi(w), zhi = P * std::sqrt(w);
      if (!(zlo < zhi)) continue;
      for (std::size_t j = 0; j <= nz; ++j) {
        const double z = j == 0 ? zlo : Axis{zlo, zhi, nz, true}.at(j - 1);
        const double r = combined_drop_ratio(w, z, pm);
        if (r < row.inf_ratio) row = {d, r, w, z};
      }
    }
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// g(s) = −f(s)² + 2s²f'(s)F(s).

inline double g_function(double s, const PhiMap& pm, bool quadrature = true) {
  const double f = pm.inverse(s);
  const double F = quadrature ? pm.F_quadrature(s) : pm.F(s);
  return -f * f + 2.0 * s * s * pm.f_prime(s) * F;
}

inline VerificationReport g_positivity(const PhiMap& pm, double s_min, double s_max, std::size_t count = 200) {
  if (!(s_min > 0.0 && s_min < s_max)) throw InputError("g positivity range needs 0 < s_min < s_max");
  if (!pm.has_closed_F()) throw DomainError("F diverges for " + pm.eps().name() + "; g is undefined");
  VerificationReport r;
  r.name = "g_positivity";
  const Axis ax{s_min, s_max, count, true};
  std::vector<double> s(count), g(count), fp(count), fpp(count);
  num::parallel_for(count, [&](std::size_t i) {
    s[i] = ax.at(i);
    g[i] = g_function(s[i], pm);
    fp[i] = pm.f_prime(s[i]);
    fpp[i] = pm.f_second(s[i]);
  });
  CheckResult pos("g_positive", true), mono("g_nondecreasing"), regime("f_increasing_convex", true);
  Series series{"g", {"s", "g"}, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const Coords at{{"s", s[i]}};
    pos.observe(g[i], at);
    if (i > 0) mono.observe(g[i] - g[i - 1] * (1.0 - 1e-12), at);
    regime.observe(std::min(fp[i], fpp[i]), at);
    series.rows.push_back({s[i], g[i]});
  }
  CheckResult limit("g_vanishes_at_zero");
  limit.informational = true;
  limit.value = g.front() / g.back();
  limit.note = "g(s_min)/g(s_max)";
  // Power gap: g = s^{2γ}(γ+1)/(γ−1), γ = 1/(1−β).
  if (pm.eps().kind() == GapKind::Power) {
    const double gam = 1.0 / (1.0 - pm.eps().beta());
    CheckResult sym("matches_closed_form");
    sym.note = "relative error against s^(2 gamma)(gamma+1)/(gamma-1), tolerance 1e-8";
    double worst = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double exact = std::pow(s[i], 2.0 * gam) * (gam + 1.0) / (gam - 1.0);
      const double e = num::relative_error(g[i], exact);
      worst = std::max(worst, e);
      sym.observe(1e-8 - e, {{"s", s[i]}});
    }
    sym.value = worst;
    r.add(sym);
  }
  r.add(pos);
  r.add(mono);
  r.add(regime);
  r.add(limit);
  r.series.push_back(std::move(series));
  r.extra["epsilon"] = pm.eps().name();
  r.extra["s_min"] = s_min;
  r.extra["s_max"] = s_max;
  return r;
}

// ---------------------------------------------------------------------------
// T(u, v, A) = 100√(uv) − uv/(A+1), with u = x, v = y.

struct TDerivatives {
  double value;
  std::array<double, 3> grad;  // A, v, u
  Eigen::Matrix3d hessian;     // order A, v, u
};

inline TDerivatives aux_T(double x, double y, double A) {
  const double a = A + 1.0;
  const double r = std::sqrt(x * y);
  TDerivatives t;
  t.value = 100.0 * r - x * y / a;
  t.grad = {x * y / (a * a), 50.0 * std::sqrt(x / y) - x / a, 50.0 * std::sqrt(y / x) - y / a};
  const double TAA = -2.0 * x * y / (a * a * a);
  const double TAy = x / (a * a), TAx = y / (a * a);
  const double Tyy = -25.0 * std::sqrt(x) * std::pow(y, -1.5);
  const double Txx = -25.0 * std::sqrt(y) * std::pow(x, -1.5);
  const double Txy = 25.0 / r - 1.0 / a;
  t.hessian << TAA, TAy, TAx, TAy, Tyy, Txy, TAx, Txy, Txx;
  return t;
}

inline double aux_T_minor_formula(double x, double y, double A) {
  const double a = A + 1.0;
  return (x / (y * std::pow(a, 4))) * (50.0 * a * std::sqrt(x * y) - x * y);
}

inline VerificationReport aux_T_check(std::size_t points, std::uint64_t seed, double xy_max = 2.0) {
  num::Rng rng(seed);
  struct Pt {
    double x, y, A;
  };
  std::vector<Pt> pts(points);
  for (auto& p : pts) {
    const double w = rng.log_uniform(1e-8, xy_max);
    const double ratio = rng.log_uniform(1e-3, 1e3);
    p = {std::sqrt(w * ratio), std::sqrt(w / ratio), rng.uniform()};
  }
  // The boundary A = 1 is where T'_A = uv/4 holds with equality.
  for (std::size_t i = 0; i < pts.size(); i += 10) pts[i].A = 1.0;

  struct Out {
    double taa, minor, minor_err, det, det_fd, ta;
    SylvesterResult syl;
  };
  std::vector<Out> res(points);
  num::parallel_for(points, [&](std::size_t i) {
    const auto [x, y, A] = pts[i];
    const TDerivatives t = aux_T(x, y, A);
    const auto& H = t.hessian;
    const double minor = H(0, 0) * H(1, 1) - H(0, 1) * H(0, 1);
    const double formula = aux_T_minor_formula(x, y, A);
    Out o{};
    o.taa = -H(0, 0);
    o.minor = formula;
    o.minor_err = 1e-9 - num::relative_error(minor, formula);
    o.det = 1e-10 - std::abs(H.determinant()) / num::determinant_scale(H);
    auto f = [](const num::Point<3>& p) { return aux_T(p[2], p[1], p[0]).value; };
    const num::Point<3> at{A, y, x};
    const auto Hd = num::second_difference_hessian<3>(f, at, {1e-4 * (A + 1.0), 1e-4 * y, 1e-4 * x});
    o.det_fd = 1e-6 - std::abs(Hd.determinant()) / num::determinant_scale(Hd);
    o.ta = t.grad[0] - x * y / 4.0;
    if (A == 1.0) o.ta = o.ta >= -1e-15 * x * y ? 0.0 : o.ta;
    o.syl = sylvester_nsd(H, 1e-10);
    res[i] = o;
  });

  VerificationReport r;
  r.name = "aux_T";
  CheckResult taa("T_AA_negative", true), minor("minor_positive", true), mf("minor_formula"),
      det("det_zero"), detfd("det_zero_second_difference"), ta("T_A_floor"), syl("sylvester_nsd");
  minor.note = "(x/(y(A+1)^4))(50(A+1)sqrt(xy) - xy) > 0 on xy <= 2";
  mf.note = "analytic 2x2 minor of (T_AA, T_Av; T_Av, T_vv) against the closed formula";
  det.note = "analytic 3x3 Hessian, |det| <= 1e-10 * Leibniz scale";
  detfd.note = "second-difference 3x3 Hessian, |det| <= 1e-6 * Leibniz scale";
  ta.note = "T'_A - uv/4 >= 0; equality at A = 1";
  syl.note = "lemma premises hold and the eigenvalues agree";
  double worst_ta = num::kInf;
  for (std::size_t i = 0; i < points; ++i) {
    const Coords at{{"u", pts[i].x}, {"v", pts[i].y}, {"A", pts[i].A}};
    const Out& o = res[i];
    taa.observe(o.taa, at);
    minor.observe(o.minor, at);
    mf.observe(o.minor_err, at);
    det.observe(o.det, at);
    detfd.observe(o.det_fd, at);
    ta.observe(o.ta, at);
    worst_ta = std::min(worst_ta, o.ta);
    syl.observe(o.syl.premises && o.syl.verdict == SylvesterVerdict::NSD && o.syl.eigen_nsd ? 1.0 : -1.0, at);
  }
  ta.value = worst_ta;
  for (auto* c : {&taa, &minor, &mf, &det, &detfd, &ta, &syl}) r.add(*c);
  r.extra["points"] = points;
  r.extra["xy_max"] = xy_max;
  return r;
}

// ---------------------------------------------------------------------------
// Gradient cross-checks against central differences.

/// f(p, k) is the function differenced along coordinate k; terms that do not
/// depend on coordinate k may be dropped from it to avoid cancellation.
template <std::size_t N, class F, class G>
CheckResult gradient_check(const std::string& name, const std::vector<num::Point<N>>& pts, F&& f, G&& grad,
                           const std::array<std::string, N>& labels, double h_rel = 1e-5, double tol = 1e-5) {
  std::vector<double> err(pts.size());
  num::parallel_for(pts.size(), [&](std::size_t i) {
    const auto h = num::relative_steps<N>(pts[i], h_rel);
    const auto an = grad(pts[i]);
    double e = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      auto xp = pts[i], xm = pts[i];
      xp[k] += h[k];
      xm[k] -= h[k];
      const double fd = (f(xp, k) - f(xm, k)) / (2.0 * h[k]);
      e = std::max(e, std::abs(fd - an[k]) / std::max(std::abs(an[k]), 1e-300));
    }
    err[i] = e;
  });
  CheckResult c(name);
  c.note = "max relative error of the analytic gradient against central differences";
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Coords at;
    for (std::size_t k = 0; k < N; ++k) at.emplace_back(labels[k], pts[i][k]);
    c.observe(tol - err[i], at);
    worst = std::max(worst, err[i]);
  }
  c.value = worst;
  return c;
}

inline VerificationReport gradient_checks(const BellmanModel& m, std::size_t points, std::uint64_t seed) {
  num::Rng rng(seed);
  const auto& b = m.budget;
  VerificationReport r;
  r.name = "gradients";

  std::vector<num::Point<2>> p1(points);
  for (auto& p : p1) {
    const double A = rng.uniform(0.05, 0.95);
    p = {A * rng.log_uniform(1e-4, 2.0), A};
    p[0] = std::min(p[0], 0.95);
  }
  r.add(gradient_check<2>(
      "b1", p1, [&](const num::Point<2>& p, std::size_t) { return b1_formula(p[0], p[1], m.phi0, b.C1).value; },
      [&](const num::Point<2>& p) {
        const auto v = b1_formula(p[0], p[1], m.phi0, b.C1);
        return num::Point<2>{v.grad_N, v.grad_A};
      },
      {"N", "A"}));

  // B2: u enters linearly; v, L, A through the curved part only.
  std::vector<num::Point<4>> p2(points);
  for (auto& p : p2) {
    const double w = rng.log_uniform(b.delta * 1e-6, b.delta * 0.9);
    const double ratio = rng.log_uniform(1e-2, 1e2);
    const double u = std::sqrt(w * ratio), v = std::sqrt(w / ratio);
    p = {u, v, rng.log_uniform(1e-3, 0.9) * b.P * std::sqrt(w), rng.uniform(0.05, 0.95)};
  }
  r.add(gradient_check<4>(
      "b2", p2,
      [&](const num::Point<4>& p, std::size_t k) {
        return k == 0 ? b.C2 * p[0] + b2_curved_part(p[1], p[2], p[3], m.pm) : b2_curved_part(p[1], p[2], p[3], m.pm);
      },
      [&](const num::Point<4>& p) { return b2_formula(p[0], p[1], p[2], p[3], m.pm, b.C2).grad; },
      {"u", "v", "L", "A"}));

  std::vector<num::Point<3>> p3(points);
  for (auto& p : p3) {
    const double w = rng.log_uniform(1e-6, 1.9);
    const double ratio = rng.log_uniform(1e-2, 1e2);
    p = {rng.uniform(0.05, 0.95), std::sqrt(w / ratio), std::sqrt(w * ratio)};
  }
  r.add(gradient_check<3>(
      "T", p3, [](const num::Point<3>& p, std::size_t) { return aux_T(p[2], p[1], p[0]).value; },
      [](const num::Point<3>& p) { return aux_T(p[2], p[1], p[0]).grad; }, {"A", "v", "u"}));
  r.extra["points_per_function"] = points;
  return r;
}

// ---------------------------------------------------------------------------
// Master function on tree nodes.

struct NodeData {
  double u = 0.0, v = 0.0, A = 0.0, L = 0.0;
  StepDistribution N;
};

struct MasterValue {
  double value = 0.0;
  double b2 = 0.0;
  double b1_part = 0.0;
  bool valid = true;
  std::string diagnostic;
};

/// 𝓑 = B2(u, v, L, A) + ∫_0^∞ B1(N(t), A) dt; the integral is a sum over steps.
inline MasterValue master_bellman_eval(const NodeData& nd, const BellmanModel& m) {
  MasterValue out;
  const auto& b = m.budget;
  const OmegaTwoPoint p{nd.u, nd.v, nd.L, nd.A, b.delta, b.P};
  if (!p.contains()) {
    out.valid = false;
    std::ostringstream os;
    os << "node outside Omega2 (u=" << nd.u << ", v=" << nd.v << ", L=" << nd.L << ", A=" << nd.A << ")";
    out.diagnostic = os.str();
    return out;
  }
  if (nd.u == 0.0) return out;
  if (!(nd.A > 0.0)) {
    out.valid = false;
    out.diagnostic = "A = 0 with positive mass: B1 is -inf";
    return out;
  }
  out.b2 = b2_formula(nd.u, nd.v, nd.L, std::min(nd.A, 1.0), m.pm, b.C2).value;
  out.b1_part = nd.N.integrate([&](double mass) { return b1_formula(mass, nd.A, m.phi0, b.C1).value; });
  out.value = out.b2 + out.b1_part;
  return out;
}

struct NodeDrop {
  double drop;
  double required;  // a_I·u_I·L_I
  double ratio;     // drop/required (+inf when required = 0)
  bool pass;
};

inline double distribution_mismatch(const StepDistribution& N, const StepDistribution& Np,
                                    const StepDistribution& Nm) {
  std::vector<double> t{0.0};
  for (auto* d : {&N, &Np, &Nm}) {
    auto bp = d->breakpoints();
    t.insert(t.end(), bp.begin(), bp.end());
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  double worst = 0.0;
  auto probe = [&](double x) { worst = std::max(worst, std::abs(N(x) - 0.5 * (Np(x) + Nm(x)))); };
  for (std::size_t i = 0; i < t.size(); ++i) {
    probe(t[i]);
    if (i + 1 < t.size()) probe(0.5 * (t[i] + t[i + 1]));
  }
  probe(t.back() * 2.0 + 1.0);
  return worst;
}

inline void check_dynamics(const NodeData& I, const NodeData& Ip, const NodeData& Im, double a) {
  auto close = [](double lhs, double rhs, const char* what) {
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    if (std::abs(lhs - rhs) > 1e-10 * scale && std::abs(lhs - rhs) > 1e-300)
      throw IntegrityError(std::string("dyadic dynamics violated for ") + what);
  };
  close(I.u, 0.5 * (Ip.u + Im.u), "u");
  close(I.v, 0.5 * (Ip.v + Im.v), "v");
  close(I.A, 0.5 * (Ip.A + Im.A) + a, "A");
  close(I.L, 0.5 * (Ip.L + Im.L) + a * I.u * I.v, "L");
  if (distribution_mismatch(I.N, Ip.N, Im.N) > 1e-10) throw IntegrityError("dyadic dynamics violated for N");
}

inline NodeDrop node_drop_check(const NodeData& I, const NodeData& Ip, const NodeData& Im, double a,
                                const BellmanModel& m) {
  check_dynamics(I, Ip, Im, a);
  const MasterValue B = master_bellman_eval(I, m);
  const MasterValue Bp = master_bellman_eval(Ip, m);
  const MasterValue Bm = master_bellman_eval(Im, m);
  if (!B.valid || !Bp.valid || !Bm.valid)
    throw DomainError("node_drop_check: " + (B.valid ? (Bp.valid ? Bm.diagnostic : Bp.diagnostic) : B.diagnostic));
  NodeDrop d{};
  d.drop = B.value - 0.5 * (Bp.value + Bm.value);
  d.required = a * I.u * I.L;
  const double tol = 1e-12 * std::max({std::abs(B.value), std::abs(Bp.value), std::abs(Bm.value)});
  d.ratio = d.required > 0.0 ? d.drop / d.required : num::kInf;
  d.pass = d.required > 0.0 ? d.drop > 0.0 : d.drop >= -tol;
  return d;
}

}  // namespace dbell
