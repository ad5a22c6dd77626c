#pragma once

// Direct-summation reference computations used to cross-check the recursions.

#include <cmath>
#include <cstdint>
#include <vector>

#include "dbell/dyadic.hpp"

namespace oracle {

using dbell::DyadicIndex;
using dbell::LeafWeight;
using dbell::NodeArray;

inline std::vector<DyadicIndex> all_intervals(int depth) {
  std::vector<DyadicIndex> out;
  for (int k = 0; k <= depth; ++k)
    for (std::uint64_t j = 0; j < (std::uint64_t{1} << k); ++j) out.push_back({k, j});
  return out;
}

// I ⊆ J, both closed under the dyadic order.
inline bool inside(const DyadicIndex& I, const DyadicIndex& J) {
  return I.level >= J.level && (I.pos >> (I.level - J.level)) == J.pos;
}

inline bool leaf_in(std::size_t x, int depth, const DyadicIndex& I) {
  return (x >> (depth - I.level)) == I.pos;
}

inline double mean(const LeafWeight& w, const DyadicIndex& I) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t x = 0; x < w.size(); ++x)
    if (leaf_in(x, w.depth(), I)) sum += w[x], ++n;
  return sum / static_cast<double>(n);
}

inline double length(const DyadicIndex& I) { return std::pow(2.0, -I.level); }

// A_J = (1/|J|) Σ_{I⊆J} a_I |I|
inline double carleson(const NodeArray<double>& a, const DyadicIndex& J) {
  double s = 0.0;
  for (auto& I : all_intervals(a.depth()))
    if (inside(I, J)) s += a[I] * length(I);
  return s / length(J);
}

// L_J = (1/|J|) Σ_{I⊆J} a_I ⟨u⟩_I ⟨v⟩_I |I|
inline double l_intensity(const LeafWeight& u, const LeafWeight& v, const NodeArray<double>& a,
                          const DyadicIndex& J) {
  double s = 0.0;
  for (auto& I : all_intervals(a.depth()))
    if (inside(I, J)) s += a[I] * mean(u, I) * mean(v, I) * length(I);
  return s / length(J);
}

// (T f)(x) = Σ_{I ∋ x} a_I ⟨f⟩_I
inline std::vector<double> sparse(const NodeArray<double>& a, const LeafWeight& f) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t x = 0; x < f.size(); ++x)
    for (auto& I : all_intervals(a.depth()))
      if (leaf_in(x, f.depth(), I)) out[x] += a[I] * mean(f, I);
  return out;
}

// S(J) = (1/|J|) Σ_{I⊆J} a_I u_I L_I |I|
inline double glav(const LeafWeight& u, const LeafWeight& v, const NodeArray<double>& a, const DyadicIndex& J) {
  double s = 0.0;
  for (auto& I : all_intervals(a.depth()))
    if (inside(I, J)) s += a[I] * mean(u, I) * l_intensity(u, v, a, I) * length(I);
  return s / length(J);
}

inline double maximal(const LeafWeight& w, std::size_t x) {
  double m = 0.0;
  for (auto& I : all_intervals(w.depth()))
    if (leaf_in(x, w.depth(), I)) m = std::max(m, mean(w, I));
  return m;
}

inline double rel(double a, double b) {
  const double s = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / s;
}

}  // namespace oracle
