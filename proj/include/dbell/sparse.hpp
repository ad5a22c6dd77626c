#pragma once

// The positive dyadic sparse operator T f = Σ a_I⟨f⟩_I χ_I, its testing
// conditions, bump constants, the (glav) sum and the Green's-formula
// induction on finite trees.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dbell/bellman.hpp"
#include "dbell/bump.hpp"
#include "dbell/dyadic.hpp"
#include "dbell/report.hpp"

namespace dbell {

enum class CarlesonNormalization {
  Unit,    // sup_J (1/|J|) Σ_{I⊆J} a_I|I| ≤ 1
  Lerner,  // same sum bounded by 2; stored halved
};

class SparseOperator {
 public:
  SparseOperator(int depth, const CarlesonSequence& seq,
                 CarlesonNormalization norm = CarlesonNormalization::Unit)
      : depth_(depth), seq_(1.0) {
    check_depth(depth, kDefaultDepthCap);
    if (seq.max_level() > depth) throw DomainError("Carleson coefficients below the lattice depth");
    const double bound = norm == CarlesonNormalization::Lerner ? 2.0 : 1.0;
    const auto chk = carleson_check(seq, depth);
    if (chk.sup > bound * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "Carleson bound " << bound << " exceeded: " << chk.sup << " at " << to_string(chk.argmax);
      throw DomainError(os.str());
    }
    factor_ = norm == CarlesonNormalization::Lerner ? 0.5 : 1.0;
    seq_ = seq.scaled(factor_, 1.0);
  }

  int depth() const { return depth_; }
  const CarlesonSequence& coefficients() const { return seq_; }
  /// Factor applied to the input coefficients (1/2 for the Lerner convention).
  double conversion_factor() const { return factor_; }
  NodeArray<double> dense(int tree_depth) const {
    if (tree_depth < depth_) throw DomainError("tree shallower than the operator lattice");
    return seq_.dense(tree_depth);
  }

 private:
  int depth_;
  CarlesonSequence seq_;
  double factor_ = 1.0;
};

/// Raw form on dense coefficients over the tree of f; no Carleson restriction.
inline LeafWeight apply_sparse(const NodeArray<double>& a, const LeafWeight& f) {
  if (a.depth() != f.depth()) throw DomainError("coefficients and f must share one depth");
  const auto avg = node_averages(f);
  NodeArray<double> acc(f.depth(), 0.0);
  acc.at_heap(0) = a.at_heap(0) * avg.at_heap(0);
  for (std::size_t h = 1; h < acc.size(); ++h)
    acc.at_heap(h) = acc.at_heap((h - 1) / 2) + a.at_heap(h) * avg.at_heap(h);
  const std::size_t leaf0 = (std::size_t{1} << f.depth()) - 1;
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = acc.at_heap(leaf0 + i);
  return LeafWeight(f.depth(), std::move(out), kMaxLevel);
}

inline LeafWeight apply_sparse(const SparseOperator& T, const LeafWeight& f) {
  if (f.depth() < T.depth()) throw DomainError("apply_sparse needs f at least as deep as the lattice");
  return apply_sparse(T.dense(f.depth()), f);
}

// ---------------------------------------------------------------------------
// Testing condition ‖χ_J T(wχ_J)‖²_{L²(σ)} ≤ C·w(J).

struct TestingDirection {
  NodeArray<double> ratio;  // NaN where w(J) = 0
  double sup = 0.0;
  DyadicIndex argmax{};
};

struct BumpConstants {
  double left = 0.0;   // sup ‖u‖_{Φ,I}⟨v⟩_I
  double right = 0.0;  // sup ⟨u⟩_I‖v‖_{Φ,I}
  double A2 = 0.0;     // sup ⟨u⟩_I⟨v⟩_I
  DyadicIndex argmax_left{}, argmax_right{}, argmax_A2{};
  double max() const { return std::max(left, right); }
};

struct TestingReport {
  TestingDirection uv;  // ‖χ_J T(uχ_J)‖²_{L²(v)}/u(J)
  TestingDirection vu;  // ‖χ_J T(vχ_J)‖²_{L²(u)}/v(J)
  BumpConstants bump;
};

inline TestingDirection testing_direction(const SparseOperator& T, const LeafWeight& w, const LeafWeight& s) {
  if (w.depth() != s.depth()) throw DomainError("testing weights must share one depth");
  if (w.depth() < T.depth()) throw DomainError("weights shallower than the lattice");
  const int D = w.depth();
  const auto avg = node_averages(w);
  const auto a = T.dense(D);
  const std::size_t nleaf = w.size();
  // Q[k][x] = Σ_{I ∋ x, level(I) ≥ k} a_I⟨w⟩_I.
  std::vector<std::vector<double>> Q(D + 2, std::vector<double>(nleaf, 0.0));
  for (int k = D; k >= 0; --k)
    for (std::size_t x = 0; x < nleaf; ++x) {
      const DyadicIndex I{k, static_cast<std::uint64_t>(x >> (D - k))};
      Q[k][x] = Q[k + 1][x] + a[I] * avg[I];
    }
  TestingDirection out{NodeArray<double>(T.depth(), kNaN), 0.0, DyadicIndex::root()};
  const double leaf_len = std::ldexp(1.0, -D);
  for (std::size_t h = 0; h < out.ratio.size(); ++h) {
    const DyadicIndex J = DyadicIndex::from_heap(h);
    const double mass = avg[J] * J.length();
    if (mass == 0.0) continue;
    // Ancestors strictly above J see w·χ_J only through its mass.
    double c = 0.0;
    for (DyadicIndex I = J; I.level > 0;) {
      I = I.parent();
      c += a[I] * mass / I.length();
    }
    auto [first, last] = w.leaf_range(J);
    double num = 0.0;
    for (std::size_t x = first; x < last; ++x) {
      const double t = c + Q[J.level][x];
      num += t * t * s[x];
    }
    num *= leaf_len;
    out.ratio[J] = num / mass;
    if (out.ratio[J] > out.sup) {
      out.sup = out.ratio[J];
      out.argmax = J;
    }
  }
  return out;
}

/// Suprema over dyadic I with level ≤ depth.
inline BumpConstants bump_condition(const LeafWeight& u, const LeafWeight& v, const BumpFamily& fam, int depth) {
  if (u.depth() != v.depth()) throw DomainError("bump weights must share one depth");
  if (depth > u.depth() || depth < 0) throw DomainError("bump depth outside the weight tree");
  const std::size_t n = node_count(depth);
  std::vector<double> L(n), R(n), A(n);
  const auto ua = node_averages(u);
  const auto va = node_averages(v);
  num::parallel_for(n, [&](std::size_t h) {
    const DyadicIndex I = DyadicIndex::from_heap(h);
    const double uI = ua[I], vI = va[I];
    L[h] = uI == 0.0 || vI == 0.0 ? 0.0 : orlicz_norm_def(u, I, fam) * vI;
    R[h] = uI == 0.0 || vI == 0.0 ? 0.0 : uI * orlicz_norm_def(v, I, fam);
    A[h] = uI * vI;
  });
  BumpConstants out;
  for (std::size_t h = 0; h < n; ++h) {
    const DyadicIndex I = DyadicIndex::from_heap(h);
    if (L[h] > out.left) out.left = L[h], out.argmax_left = I;
    if (R[h] > out.right) out.right = R[h], out.argmax_right = I;
    if (A[h] > out.A2) out.A2 = A[h], out.argmax_A2 = I;
  }
  return out;
}

inline TestingReport testing_condition(const SparseOperator& T, const LeafWeight& u, const LeafWeight& v) {
  return {testing_direction(T, u, v), testing_direction(T, v, u), {}};
}

inline TestingReport testing_report(const SparseOperator& T, const LeafWeight& u, const LeafWeight& v,
                                    const BumpFamily& fam) {
  TestingReport r = testing_condition(T, u, v);
  r.bump = bump_condition(u, v, fam, u.depth());
  return r;
}

inline VerificationReport testing_verification(const SparseOperator& T, const LeafWeight& u, const LeafWeight& v,
                                               const BumpFamily& fam) {
  const TestingReport t = testing_report(T, u, v, fam);
  VerificationReport r;
  r.name = "testing";
  auto summary = [&](const std::string& name, const TestingDirection& d) {
    CheckResult c(name);
    c.informational = true;
    std::size_t skipped = 0;
    for (std::size_t h = 0; h < d.ratio.size(); ++h) {
      if (std::isnan(d.ratio.at_heap(h))) {
        ++skipped;
        continue;
      }
      const DyadicIndex J = DyadicIndex::from_heap(h);
      c.observe(d.ratio.at_heap(h), {{"level", J.level}, {"pos", static_cast<double>(J.pos)}});
    }
    c.value = d.sup;
    c.note = "sup of the testing ratio; " + std::to_string(skipped) + " zero-mass intervals skipped";
    return c;
  };
  r.add(summary("testing_u_to_v", t.uv));
  r.add(summary("testing_v_to_u", t.vu));
  for (auto [name, val] : {std::pair{"bump_left", t.bump.left}, {"bump_right", t.bump.right}, {"A2", t.bump.A2}}) {
    CheckResult c(name);
    c.informational = true;
    c.value = val;
    c.observe(val, {});
    r.add(c);
  }
  r.extra["family"] = fam.name();
  r.extra["depth"] = u.depth();
  r.extra["conversion_factor"] = T.conversion_factor();
  return r;
}

// ---------------------------------------------------------------------------
// (glav): S(I) = (1/|I|) Σ_{J⊆I} a_J u_J L_J |J|.

inline NodeArray<double> glav_lhs(const LeafWeight& u, const LeafWeight& v, const NodeArray<double>& a) {
  const auto ua = node_averages(u);
  const auto L = l_intensities(u, v, a);
  NodeArray<double> S(a.depth());
  const std::size_t leaf0 = (std::size_t{1} << a.depth()) - 1;
  for (std::size_t h = S.size(); h-- > 0;) {
    const double own = a.at_heap(h) * ua.at_heap(h) * L.at_heap(h);
    S.at_heap(h) = h >= leaf0 ? own : own + 0.5 * (S.at_heap(2 * h + 1) + S.at_heap(2 * h + 2));
  }
  return S;
}

struct GlavResult {
  NodeArray<double> lhs;
  double sup_ratio = 0.0;
  DyadicIndex argmax{};
};

inline GlavResult glav_sup(const SparseOperator& T, const LeafWeight& u, const LeafWeight& v) {
  GlavResult g{glav_lhs(u, v, T.dense(u.depth())), 0.0, DyadicIndex::root()};
  const auto ua = node_averages(u);
  for (std::size_t h = 0; h < g.lhs.size(); ++h) {
    if (ua.at_heap(h) == 0.0) continue;
    const double r = g.lhs.at_heap(h) / ua.at_heap(h);
    if (r > g.sup_ratio) g.sup_ratio = r, g.argmax = DyadicIndex::from_heap(h);
  }
  return g;
}

inline VerificationReport glav_check(const LeafWeight& u, const LeafWeight& v, const SparseOperator& T,
                                     const BumpFamily& fam, double bump_target = 0.01) {
  VerificationReport r;
  r.name = "glav";
  const BumpConstants bc = bump_condition(u, v, fam, u.depth());
  CheckResult pre("bump_normalized");
  pre.note = "max one-sided bump constant <= target";
  pre.observe(bump_target - bc.max(), {});
  pre.value = bc.max();
  r.add(pre);
  const GlavResult g = glav_sup(T, u, v);
  CheckResult sup("sup_ratio_finite", true);
  sup.note = "sup over I of S(I)/u_I";
  sup.value = g.sup_ratio;
  sup.observe(std::isfinite(g.sup_ratio) ? 1.0 : -1.0,
              {{"level", g.argmax.level}, {"pos", static_cast<double>(g.argmax.pos)}});
  r.add(sup);
  r.extra["bump_left"] = bc.left;
  r.extra["bump_right"] = bc.right;
  r.extra["A2"] = bc.A2;
  r.extra["sup_ratio"] = g.sup_ratio;
  return r;
}

// ---------------------------------------------------------------------------
// Normalization: scale u so that the bump constant and sup uv are small.

struct NormalizedInstance {
  LeafWeight u;
  LeafWeight v;
  double lambda = 1.0;
  BumpConstants before;
  BumpConstants after;
};

inline NormalizedInstance normalize_instance(const LeafWeight& u, const LeafWeight& v, const BumpFamily& fam,
                                             double bump_target, double delta) {
  if (!(bump_target > 0.0) || !(delta > 0.0)) throw DomainError("normalization targets must be positive");
  NormalizedInstance out{u, v, 1.0, bump_condition(u, v, fam, u.depth()), {}};
  double lambda = 1.0;
  if (out.before.max() > 0.0) lambda = std::min(lambda, bump_target / out.before.max());
  if (out.before.A2 > 0.0) lambda = std::min(lambda, delta / out.before.A2);
  // Slightly inside the targets so that rounding cannot push a node out.
  if (lambda < 1.0) lambda *= 1.0 - 1e-9;
  out.lambda = lambda;
  out.u = u.scaled(lambda);
  out.after = bump_condition(out.u, v, fam, u.depth());
  return out;
}

// ---------------------------------------------------------------------------
// L_I ≤ P√(u_I v_I) under A2 ≤ 1 and Carleson ≤ 1.

inline VerificationReport vavo_L_bound(const LeafWeight& u, const LeafWeight& v, const SparseOperator& T,
                                       double P = 100.0) {
  const int D = u.depth();
  const auto ua = node_averages(u);
  const auto va = node_averages(v);
  const auto a = T.dense(D);
  const auto L = l_intensities(u, v, a);
  double A2 = 0.0;
  for (std::size_t h = 0; h < ua.size(); ++h) A2 = std::max(A2, ua.at_heap(h) * va.at_heap(h));
  const double carleson = carleson_check(T.coefficients(), D).sup;
  const bool hypotheses = A2 <= 1.0 + 1e-12 && carleson <= 1.0 + 1e-12;
  VerificationReport r;
  r.name = "L_bound";
  CheckResult c("L_le_P_sqrt_uv");
  c.informational = !hypotheses;
  c.note = hypotheses ? "L_I <= P*sqrt(u_I v_I) at every node" : "conditional: lemma hypotheses fail";
  double worst = 0.0;
  for (std::size_t h = 0; h < L.size(); ++h) {
    const double bound = P * std::sqrt(ua.at_heap(h) * va.at_heap(h));
    const DyadicIndex I = DyadicIndex::from_heap(h);
    if (L.at_heap(h) == 0.0) continue;
    const double ratio = bound > 0.0 ? L.at_heap(h) / std::sqrt(ua.at_heap(h) * va.at_heap(h)) : num::kInf;
    worst = std::max(worst, ratio);
    c.observe(P - ratio, {{"level", I.level}, {"pos", static_cast<double>(I.pos)}});
  }
  c.value = worst;
  r.add(c);
  r.extra["A2"] = A2;
  r.extra["carleson_sup"] = carleson;
  r.extra["hypotheses_hold"] = hypotheses;
  r.extra["worst_ratio"] = worst;
  return r;
}

// ---------------------------------------------------------------------------
// Green's-formula induction.

struct GreenNode {
  DyadicIndex I;
  NodeData data;
  MasterValue B;
  double a = 0.0;
  double delta = kNaN;  // |J|𝓑(J) − |J+|𝓑(J+) − |J−|𝓑(J−); internal nodes only
  double ratio = kNaN;  // Δ/(|J| a u L)
};

struct GreenResult {
  std::vector<GreenNode> nodes;  // heap order
  double telescoping_residual = 0.0;  // relative to |root|·|𝓑(root)|
  double min_ratio = num::kInf;
  DyadicIndex argmin{};
  double sum_weighted = 0.0;  // Σ_internal |J| a_J u_J L_J
  std::size_t excluded = 0;
  std::vector<std::string> diagnostics;
};

inline GreenResult green_tree(const LeafWeight& u, const LeafWeight& v, const SparseOperator& T,
                              const BellmanModel& m) {
  if (u.depth() != v.depth()) throw DomainError("weights must share one depth");
  const int D = u.depth();
  const auto ua = node_averages(u);
  const auto va = node_averages(v);
  const auto a = T.dense(D);
  const auto A = carleson_intensities(a);
  const auto L = l_intensities(u, v, a);
  const std::size_t n = node_count(D);
  GreenResult g;
  g.nodes.resize(n);
  num::parallel_for(n, [&](std::size_t h) {
    const DyadicIndex I = DyadicIndex::from_heap(h);
    GreenNode& nd = g.nodes[h];
    nd.I = I;
    nd.a = a.at_heap(h);
    nd.data = {ua.at_heap(h), va.at_heap(h), A.at_heap(h), L.at_heap(h), distribution(u, I)};
    nd.B = master_bellman_eval(nd.data, m);
  });
  for (auto& nd : g.nodes)
    if (!nd.B.valid) {
      ++g.excluded;
      if (g.diagnostics.size() < 20) g.diagnostics.push_back(to_string(nd.I) + ": " + nd.B.diagnostic);
    }
  const std::size_t leaf0 = (std::size_t{1} << D) - 1;
  double sum_delta = 0.0;
  for (std::size_t h = 0; h < leaf0; ++h) {
    GreenNode& nd = g.nodes[h];
    const GreenNode& p = g.nodes[2 * h + 1];
    const GreenNode& q = g.nodes[2 * h + 2];
    if (!nd.B.valid || !p.B.valid || !q.B.valid) continue;
    check_dynamics(nd.data, p.data, q.data, nd.a);
    const double len = nd.I.length();
    nd.delta = len * nd.B.value - 0.5 * len * (p.B.value + q.B.value);
    sum_delta += nd.delta;
    const double req = len * nd.a * nd.data.u * nd.data.L;
    g.sum_weighted += req;
    if (req > 0.0) {
      nd.ratio = nd.delta / req;
      if (nd.ratio < g.min_ratio) g.min_ratio = nd.ratio, g.argmin = nd.I;
    }
  }
  if (g.excluded == 0) {
    double leaves = 0.0;
    for (std::size_t h = leaf0; h < n; ++h) leaves += g.nodes[h].I.length() * g.nodes[h].B.value;
    const double lhs = g.nodes[0].B.value - leaves;
    const double scale = std::max(std::abs(g.nodes[0].B.value), 1e-300);
    g.telescoping_residual = std::abs(lhs - sum_delta) / scale;
  } else {
    g.telescoping_residual = kNaN;
  }
  return g;
}

inline VerificationReport green_induction(const LeafWeight& u, const LeafWeight& v, const SparseOperator& T,
                                          const BellmanModel& m, GreenResult* keep = nullptr) {
  GreenResult g = green_tree(u, v, T, m);
  VerificationReport r;
  r.name = "green";
  CheckResult member("omega2_membership");
  member.note = "nodes outside Omega2 are excluded";
  for (auto& nd : g.nodes)
    member.observe(nd.B.valid ? 0.0 : -1.0, {{"level", nd.I.level}, {"pos", static_cast<double>(nd.I.pos)}});
  member.value = static_cast<double>(g.excluded);
  CheckResult tel("telescoping");
  tel.note = "|I|B(I) - sum over leaves = sum of Delta, relative residual <= 1e-10";
  if (!std::isnan(g.telescoping_residual)) tel.observe(1e-10 - g.telescoping_residual, {});
  tel.value = g.telescoping_residual;
  CheckResult drop("node_drop", true);
  drop.note = "Delta(J)/(|J| a_J u_J L_J) > 0; value is the minimum";
  CheckResult zero("node_drop_unloaded");
  zero.note = "Delta(J) >= 0 where a_J u_J L_J = 0";
  CheckResult bounds("master_bounds");
  bounds.informational = true;
  bounds.note = "0 <= B(I) <= (C1 + C2) u_I";
  for (auto& nd : g.nodes) {
    const Coords at{{"level", nd.I.level}, {"pos", static_cast<double>(nd.I.pos)}};
    if (!std::isnan(nd.ratio)) drop.observe(nd.ratio, at);
    else if (!std::isnan(nd.delta))
      zero.observe(nd.delta + 1e-12 * nd.I.length() * std::abs(nd.B.value), at);
    if (nd.B.valid && nd.data.u > 0.0) {
      const double cap = (m.budget.C1 + m.budget.C2) * nd.data.u;
      bounds.observe(std::min(nd.B.value, cap - nd.B.value) / cap, at);
    }
  }
  drop.value = g.min_ratio;
  // Chain: |I|B(I) − Σ_leaves ≥ C_min·Σ|J| a u L.
  CheckResult chain("glav_chain");
  chain.note = "sum of Delta >= C_min * sum |J| a_J u_J L_J";
  if (!std::isnan(g.telescoping_residual) && std::isfinite(g.min_ratio)) {
    double sum_delta = 0.0;
    for (auto& nd : g.nodes)
      if (!std::isnan(nd.delta)) sum_delta += nd.delta;
    chain.observe(sum_delta - g.min_ratio * g.sum_weighted + 1e-12 * std::abs(sum_delta), {});
    chain.value = g.sum_weighted > 0.0 ? sum_delta / g.sum_weighted : num::kInf;
  }
  for (auto* c : {&member, &tel, &drop, &zero, &bounds, &chain}) r.add(*c);
  Series table{"nodes", {"level", "pos", "u", "v", "A", "L", "B", "Delta", "ratio"}, {}};
  for (auto& nd : g.nodes)
    table.rows.push_back({static_cast<double>(nd.I.level), static_cast<double>(nd.I.pos), nd.data.u, nd.data.v,
                          nd.data.A, nd.data.L, nd.B.value, nd.delta, nd.ratio});
  r.series.push_back(std::move(table));
  r.extra["depth"] = u.depth();
  r.extra["excluded"] = g.excluded;
  r.extra["diagnostics"] = g.diagnostics;
  r.extra["min_ratio"] = number_or_null(g.min_ratio);
  if (keep) *keep = std::move(g);
  return r;
}

}  // namespace dbell
