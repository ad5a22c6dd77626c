#pragma once

// Dyadic intervals of [0,1), weights constant on the 2^n leaves of a finite
// tree, distribution functions, Carleson sequences and the intensities A_I, L_I.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dbell/errors.hpp"

namespace dbell {

inline constexpr int kDefaultDepthCap = 24;
inline constexpr int kMaxLevel = 62;

struct DyadicIndex {
  int level = 0;
  std::uint64_t pos = 0;

  static DyadicIndex root() { return {0, 0}; }

  /// Validated constructor.
  static DyadicIndex make(int level, std::uint64_t pos) {
    if (level < 0 || level > kMaxLevel || pos >= (std::uint64_t{1} << level)) {
      std::ostringstream os;
      os << "invalid dyadic index (level " << level << ", pos " << pos << ")";
      throw DomainError(os.str());
    }
    return {level, pos};
  }

  static DyadicIndex from_heap(std::size_t h) {
    int k = 0;
    while (((std::size_t{2} << k) - 1) <= h) ++k;
    return {k, static_cast<std::uint64_t>(h - ((std::size_t{1} << k) - 1))};
  }

  std::size_t heap() const { return ((std::size_t{1} << level) - 1) + pos; }
  double length() const { return std::ldexp(1.0, -level); }
  double left_end() const { return std::ldexp(static_cast<double>(pos), -level); }
  double right_end() const { return std::ldexp(static_cast<double>(pos + 1), -level); }

  DyadicIndex left() const { return {level + 1, 2 * pos}; }
  DyadicIndex right() const { return {level + 1, 2 * pos + 1}; }
  DyadicIndex child(int side) const { return side == 0 ? left() : right(); }
  DyadicIndex parent() const {
    if (level == 0) throw DomainError("the root has no parent");
    return {level - 1, pos / 2};
  }
  DyadicIndex ancestor(int lvl) const {
    if (lvl < 0 || lvl > level) throw DomainError("ancestor level out of range");
    return {lvl, pos >> (level - lvl)};
  }

  /// Inclusive containment: other ⊆ *this.
  bool contains(const DyadicIndex& other) const {
    return other.level >= level && (other.pos >> (other.level - level)) == pos;
  }

  auto operator<=>(const DyadicIndex&) const = default;
};

inline std::string to_string(const DyadicIndex& I) {
  std::ostringstream os;
  os << "(" << I.level << "," << I.pos << ")";
  return os.str();
}

inline std::size_t node_count(int depth) { return (std::size_t{2} << depth) - 1; }

/// Dense per-node storage for the complete tree down to `depth`, heap order.
template <class T>
class NodeArray {
 public:
  NodeArray() = default;
  NodeArray(int depth, T init = T{}) : depth_(depth), data_(node_count(depth), init) {}

  int depth() const { return depth_; }
  std::size_t size() const { return data_.size(); }
  T& operator[](const DyadicIndex& I) { return data_[I.heap()]; }
  const T& operator[](const DyadicIndex& I) const { return data_[I.heap()]; }
  T& at_heap(std::size_t h) { return data_[h]; }
  const T& at_heap(std::size_t h) const { return data_[h]; }
  const std::vector<T>& data() const { return data_; }

 private:
  int depth_ = 0;
  std::vector<T> data_;
};

inline void check_depth(int depth, int cap) {
  if (depth < 0) throw DomainError("negative tree depth");
  if (depth > cap) {
    std::ostringstream os;
    os << "tree depth " << depth << " exceeds the configured cap " << cap;
    throw ResourceError(os.str());
  }
}

/// Nonnegative weight on [0,1), constant on each of the 2^depth leaves.
class LeafWeight {
 public:
  LeafWeight() : LeafWeight(0, {0.0}) {}

  LeafWeight(int depth, std::vector<double> values, int depth_cap = kDefaultDepthCap)
      : depth_(depth), values_(std::move(values)) {
    check_depth(depth, depth_cap);
    if (values_.size() != (std::size_t{1} << depth)) {
      std::ostringstream os;
      os << "weight of depth " << depth << " needs " << (std::size_t{1} << depth)
         << " values, got " << values_.size();
      throw DomainError(os.str());
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) {
        std::ostringstream os;
        os << "weight value at leaf " << i << " is not a finite nonnegative number";
        throw DomainError(os.str());
      }
    }
  }

  static LeafWeight constant(int depth, double c) {
    return LeafWeight(depth, std::vector<double>(std::size_t{1} << depth, c));
  }

  int depth() const { return depth_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  void require(const DyadicIndex& I) const {
    if (I.level > depth_ || I.pos >= (std::uint64_t{1} << I.level)) {
      throw DomainError("interval " + to_string(I) + " is outside a weight of depth " +
                        std::to_string(depth_));
    }
  }

  /// Leaf index range [first, last) covered by I.
  std::pair<std::size_t, std::size_t> leaf_range(const DyadicIndex& I) const {
    require(I);
    const int shift = depth_ - I.level;
    const std::size_t first = static_cast<std::size_t>(I.pos) << shift;
    return {first, first + (std::size_t{1} << shift)};
  }

  /// Mean over I by repeated pairwise halving, bitwise identical to the
  /// bottom-up node recursion.
  double average(const DyadicIndex& I) const {
    auto [first, last] = leaf_range(I);
    std::vector<double> buf(values_.begin() + first, values_.begin() + last);
    while (buf.size() > 1) {
      for (std::size_t i = 0; i < buf.size() / 2; ++i) buf[i] = 0.5 * (buf[2 * i] + buf[2 * i + 1]);
      buf.resize(buf.size() / 2);
    }
    return buf[0];
  }

  double integral() const { return average(DyadicIndex::root()); }

  double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

  LeafWeight scaled(double lambda) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= lambda;
    return LeafWeight(depth_, std::move(v), kMaxLevel);
  }

  /// Same function on a finer tree.
  LeafWeight refined(int new_depth, int depth_cap = kDefaultDepthCap) const {
    if (new_depth < depth_) throw DomainError("refinement cannot reduce depth");
    check_depth(new_depth, depth_cap);
    const std::size_t rep = std::size_t{1} << (new_depth - depth_);
    std::vector<double> v;
    v.reserve(values_.size() * rep);
    for (double x : values_) v.insert(v.end(), rep, x);
    return LeafWeight(new_depth, std::move(v), depth_cap);
  }

 private:
  int depth_;
  std::vector<double> values_;
};

inline double average(const LeafWeight& w, const DyadicIndex& I) { return w.average(I); }

/// All node averages, bottom-up.
inline NodeArray<double> node_averages(const LeafWeight& w) {
  const int n = w.depth();
  NodeArray<double> avg(n);
  const std::size_t leaf0 = (std::size_t{1} << n) - 1;
  for (std::size_t i = 0; i < w.size(); ++i) avg.at_heap(leaf0 + i) = w[i];
  for (std::size_t h = leaf0; h-- > 0;) avg.at_heap(h) = 0.5 * (avg.at_heap(2 * h + 1) + avg.at_heap(2 * h + 2));
  return avg;
}

// ---------------------------------------------------------------------------

/// Right-continuous step function N(t), N = mass on (lower, upper].
struct Step {
  double lower;
  double upper;
  double mass;
};

class StepDistribution {
 public:
  StepDistribution() = default;
  explicit StepDistribution(std::vector<Step> steps) : steps_(std::move(steps)) {}

  /// Distribution of a function taking `value` on a set of relative measure
  /// `weight`; weights must sum to 1.
  static StepDistribution from_samples(std::vector<std::pair<double, double>> samples) {
    std::sort(samples.begin(), samples.end());
    double total = 0.0;
    for (auto& s : samples) total += s.second;
    std::vector<Step> steps;
    double above = total;
    double prev = 0.0;
    std::size_t i = 0;
    while (i < samples.size()) {
      const double t = samples[i].first;
      double here = 0.0;
      while (i < samples.size() && samples[i].first == t) here += samples[i++].second;
      if (t > 0.0 && above > 0.0) steps.push_back({prev, t, above});
      if (t > 0.0) prev = t;
      above -= here;
    }
    return StepDistribution(std::move(steps));
  }

  const std::vector<Step>& steps() const { return steps_; }
  bool empty() const { return steps_.empty(); }

  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (auto& s : steps_) b.push_back(s.upper);
    return b;
  }
  std::vector<double> masses() const {
    std::vector<double> m;
    for (auto& s : steps_) m.push_back(s.mass);
    return m;
  }

  double operator()(double t) const {
    if (t <= 0.0) return steps_.empty() ? 0.0 : steps_.front().mass;
    for (auto& s : steps_)
      if (t > s.lower && t <= s.upper) return s.mass;
    return 0.0;
  }

  double integral() const {
    double sum = 0.0;
    for (auto& s : steps_) sum += s.mass * (s.upper - s.lower);
    return sum;
  }

  /// Σ g(mass)·Δt over the steps.
  template <class G>
  double integrate(G&& g) const {
    double sum = 0.0;
    for (auto& s : steps_) sum += g(s.mass) * (s.upper - s.lower);
    return sum;
  }

 private:
  std::vector<Step> steps_;
};

inline StepDistribution distribution(const LeafWeight& w, const DyadicIndex& I) {
  auto [first, last] = w.leaf_range(I);
  const double share = 1.0 / static_cast<double>(last - first);
  std::vector<std::pair<double, double>> samples;
  samples.reserve(last - first);
  for (std::size_t i = first; i < last; ++i) samples.emplace_back(w[i], share);
  return StepDistribution::from_samples(std::move(samples));
}

// ---------------------------------------------------------------------------

/// Coefficients a_I on dyadic intervals; absent entries are zero.
class CarlesonSequence {
 public:
  explicit CarlesonSequence(double bound = 1.0) : bound_(bound) {
    if (!(bound > 0.0) || !std::isfinite(bound)) throw DomainError("Carleson bound must be positive");
  }

  double bound() const { return bound_; }

  void set(const DyadicIndex& I, double a) {
    DyadicIndex::make(I.level, I.pos);
    if (!(a >= 0.0) || a > std::max(1.0, bound_)) {
      std::ostringstream os;
      os << "coefficient " << a << " at " << to_string(I) << " outside [0, "
         << std::max(1.0, bound_) << "]";
      throw DomainError(os.str());
    }
    if (a == 0.0)
      entries_.erase(I);
    else
      entries_[I] = a;
  }

  double a(const DyadicIndex& I) const {
    auto it = entries_.find(I);
    return it == entries_.end() ? 0.0 : it->second;
  }

  const std::map<DyadicIndex, double>& entries() const { return entries_; }

  int max_level() const {
    int m = 0;
    for (auto& [I, a] : entries_) m = std::max(m, I.level);
    return m;
  }

  CarlesonSequence scaled(double lambda, double new_bound) const {
    CarlesonSequence out(new_bound);
    for (auto& [I, a] : entries_) out.set(I, a * lambda);
    return out;
  }

  NodeArray<double> dense(int depth) const {
    NodeArray<double> out(depth, 0.0);
    for (auto& [I, a] : entries_)
      if (I.level <= depth) out[I] = a;
    return out;
  }

 private:
  double bound_;
  std::map<DyadicIndex, double> entries_;
};

/// A_I = a_I + (A_{I+} + A_{I-})/2, leaves seeded with their own a.
inline NodeArray<double> carleson_intensities(const NodeArray<double>& a) {
  NodeArray<double> A(a);
  const std::size_t leaf0 = (std::size_t{1} << a.depth()) - 1;
  for (std::size_t h = leaf0; h-- > 0;)
    A.at_heap(h) = a.at_heap(h) + 0.5 * (A.at_heap(2 * h + 1) + A.at_heap(2 * h + 2));
  return A;
}

inline NodeArray<double> carleson_intensities(const CarlesonSequence& seq, int depth) {
  return carleson_intensities(seq.dense(depth));
}

inline double carleson_intensity(const CarlesonSequence& seq, const DyadicIndex& I, int depth) {
  if (I.level > depth) throw DomainError("interval below the tree depth");
  return carleson_intensities(seq, depth)[I];
}

/// L_I = a_I·u_I·v_I + (L_{I+} + L_{I-})/2.
inline NodeArray<double> l_intensities(const LeafWeight& u, const LeafWeight& v,
                                       const NodeArray<double>& a) {
  if (u.depth() != v.depth() || u.depth() != a.depth())
    throw DomainError("u, v and the Carleson sequence must share one tree depth");
  const auto ua = node_averages(u);
  const auto va = node_averages(v);
  NodeArray<double> L(a.depth());
  const std::size_t n = L.size();
  const std::size_t leaf0 = (std::size_t{1} << a.depth()) - 1;
  for (std::size_t h = n; h-- > 0;) {
    const double own = a.at_heap(h) * ua.at_heap(h) * va.at_heap(h);
    L.at_heap(h) = h >= leaf0 ? own : own + 0.5 * (L.at_heap(2 * h + 1) + L.at_heap(2 * h + 2));
  }
  return L;
}

inline NodeArray<double> l_intensities(const LeafWeight& u, const LeafWeight& v,
                                       const CarlesonSequence& seq) {
  return l_intensities(u, v, seq.dense(u.depth()));
}

inline double l_intensity(const LeafWeight& u, const LeafWeight& v, const CarlesonSequence& seq,
                          const DyadicIndex& I) {
  u.require(I);
  return l_intensities(u, v, seq)[I];
}

struct CarlesonCheck {
  double sup = 0.0;
  DyadicIndex argmax{};
  bool within_bound = true;
};

inline CarlesonCheck carleson_check(const CarlesonSequence& seq, int depth) {
  const auto A = carleson_intensities(seq, depth);
  CarlesonCheck out;
  for (std::size_t h = 0; h < A.size(); ++h) {
    if (A.at_heap(h) > out.sup) {
      out.sup = A.at_heap(h);
      out.argmax = DyadicIndex::from_heap(h);
    }
  }
  out.within_bound = out.sup <= seq.bound() * (1.0 + 1e-12);
  return out;
}

/// (M^d w)(x) = max over dyadic I ∋ x of ⟨w⟩_I, leafwise.
inline LeafWeight dyadic_maximal(const LeafWeight& w) {
  const auto avg = node_averages(w);
  NodeArray<double> M(w.depth());
  M.at_heap(0) = avg.at_heap(0);
  for (std::size_t h = 1; h < M.size(); ++h) M.at_heap(h) = std::max(avg.at_heap(h), M.at_heap((h - 1) / 2));
  const std::size_t leaf0 = (std::size_t{1} << w.depth()) - 1;
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = M.at_heap(leaf0 + i);
  return LeafWeight(w.depth(), std::move(out), kMaxLevel);
}

/// Maximal dyadic I ⊆ root with ⟨w⟩_I ≥ threshold, left to right.
inline std::vector<DyadicIndex> stopping_family(const LeafWeight& w, double threshold,
                                                const DyadicIndex& root = DyadicIndex::root()) {
  if (!(threshold > 0.0)) throw DomainError("stopping threshold must be positive");
  w.require(root);
  const auto avg = node_averages(w);
  std::vector<DyadicIndex> out;
  std::vector<DyadicIndex> stack{root};
  while (!stack.empty()) {
    const DyadicIndex I = stack.back();
    stack.pop_back();
    if (avg[I] >= threshold) {
      out.push_back(I);
    } else if (I.level < w.depth()) {
      stack.push_back(I.right());
      stack.push_back(I.left());
    }
  }
  return out;
}

}  // namespace dbell
