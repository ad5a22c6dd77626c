#pragma once

// Seeded generators: random step weights, Carleson sequences, and smooth
// instances whose refinements share one underlying weight.

#include <cmath>
#include <cstdint>
#include <vector>

#include "dbell/dyadic.hpp"
#include "dbell/numerics.hpp"
#include "dbell/sparse.hpp"

namespace dbell {

/// Multiplicative cascade: each child multiplies its parent's factor by
/// 1 ± η·r with r uniform in [0,1). Values are bounded away from zero.
inline LeafWeight random_cascade_weight(int depth, std::uint64_t seed, double eta = 0.6) {
  check_depth(depth, kDefaultDepthCap);
  NodeArray<double> f(depth, 1.0);
  for (std::size_t h = 1; h < f.size(); ++h) {
    const double r = num::hashed_unit(seed, h);
    const double sign = (h % 2 == 1) ? 1.0 : -1.0;
    f.at_heap(h) = f.at_heap((h - 1) / 2) * (1.0 + sign * eta * r);
  }
  const std::size_t leaf0 = (std::size_t{1} << depth) - 1;
  std::vector<double> v(std::size_t{1} << depth);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f.at_heap(leaf0 + i);
  return LeafWeight(depth, std::move(v));
}

/// Step weight with leaf values exp(s·z), z standard normal.
inline LeafWeight random_lognormal_weight(int depth, std::uint64_t seed, double s = 1.0) {
  check_depth(depth, kDefaultDepthCap);
  num::Rng rng(seed);
  std::vector<double> v(std::size_t{1} << depth);
  for (auto& x : v) x = std::exp(s * rng.normal());
  return LeafWeight(depth, std::move(v));
}

/// Per-level budgets m_k with Σ m_k ≤ 1 and a_I = m_k·(lo + (1−lo)·r_I), so
/// that every A_I ≤ 1. The deepest level keeps a fixed share, which keeps
/// A_I bounded below at every node.
inline CarlesonSequence random_carleson(int depth, std::uint64_t seed, double leaf_share = 0.3, double lo = 0.6) {
  check_depth(depth, kDefaultDepthCap);
  num::Rng rng(seed ^ 0x5bd1e995ULL);
  std::vector<double> m(depth + 1);
  double total = 0.0;
  for (int k = 0; k < depth; ++k) total += (m[k] = 0.2 + rng.uniform());
  for (int k = 0; k < depth; ++k) m[k] *= depth > 0 ? (1.0 - leaf_share) / total : 0.0;
  m[depth] = depth > 0 ? leaf_share : 1.0;
  CarlesonSequence seq(1.0);
  for (std::size_t h = 0; h < node_count(depth); ++h) {
    const DyadicIndex I = DyadicIndex::from_heap(h);
    seq.set(I, m[I.level] * (lo + (1.0 - lo) * num::hashed_unit(seed, h)));
  }
  return seq;
}

struct Instance {
  LeafWeight u;
  LeafWeight v;
  CarlesonSequence a;
};

inline Instance random_instance(int depth, std::uint64_t seed) {
  return {random_cascade_weight(depth, num::splitmix64(seed) ^ 1), random_cascade_weight(depth, num::splitmix64(seed) ^ 2),
          random_carleson(depth, seed)};
}

/// Leaf averages of 1 + α·sin(2π(a x + b)) (exact integrals), a and b per seed.
inline LeafWeight smooth_weight(int depth, std::uint64_t seed, double alpha = 0.6) {
  check_depth(depth, kDefaultDepthCap);
  const double freq = 1.0 + std::floor(3.0 * num::hashed_unit(seed, 11));
  const double phase = num::hashed_unit(seed, 12);
  const double two_pi = 2.0 * 3.141592653589793;
  const std::size_t n = std::size_t{1} << depth;
  std::vector<double> v(n);
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = i * h, x1 = x0 + h;
    const double integral =
        h - alpha * (std::cos(two_pi * (freq * x1 + phase)) - std::cos(two_pi * (freq * x0 + phase))) / (two_pi * freq);
    v[i] = integral / h;
  }
  return LeafWeight(depth, std::move(v));
}

/// a_I = ρ·θ^level·(1/2 + r_I/2) with r_I hashed from I, independent of depth.
inline CarlesonSequence geometric_carleson(int depth, std::uint64_t seed, double rho = 0.45, double theta = 0.5) {
  check_depth(depth, kDefaultDepthCap);
  CarlesonSequence seq(1.0);
  for (std::size_t h = 0; h < node_count(depth); ++h) {
    const DyadicIndex I = DyadicIndex::from_heap(h);
    seq.set(I, rho * std::pow(theta, I.level) * (0.5 + 0.5 * num::hashed_unit(seed, h)));
  }
  return seq;
}

inline Instance refinement_instance(int depth, std::uint64_t seed) {
  return {smooth_weight(depth, num::splitmix64(seed) ^ 3), smooth_weight(depth, num::splitmix64(seed) ^ 4),
          geometric_carleson(depth, seed)};
}

}  // namespace dbell
