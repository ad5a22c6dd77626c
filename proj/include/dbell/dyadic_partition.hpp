#pragma once

// Weights constant on the cells of an adaptive dyadic partition of [0,1).
// Used where a complete tree would be too large (deep obstruction profiles).

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "dbell/dyadic.hpp"

namespace dbell {

struct Cell {
  DyadicIndex index;
  double value;
};

class PartitionWeight {
 public:
  PartitionWeight() : PartitionWeight({Cell{DyadicIndex::root(), 0.0}}) {}

  /// Cells must tile [0,1) exactly; order is irrelevant.
  explicit PartitionWeight(std::vector<Cell> cells) : cells_(std::move(cells)) {
    if (cells_.empty()) throw DomainError("partition weight needs at least one cell");
    std::sort(cells_.begin(), cells_.end(),
              [](const Cell& a, const Cell& b) { return a.index.left_end() < b.index.left_end(); });
    double cursor = 0.0;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      const auto& c = cells_[i];
      DyadicIndex::make(c.index.level, c.index.pos);
      if (!(c.value >= 0.0) || !std::isfinite(c.value))
        throw DomainError("cell value at " + to_string(c.index) + " is not finite nonnegative");
      if (c.index.left_end() != cursor)
        throw DomainError("cells do not tile [0,1): gap or overlap at " + to_string(c.index));
      cursor = c.index.right_end();
      cell_of_[c.index] = i;
    }
    if (cursor != 1.0) throw DomainError("cells do not cover [0,1)");
    build_nodes();
  }

  static PartitionWeight from_leaf_weight(const LeafWeight& w) {
    std::vector<Cell> cells;
    cells.reserve(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
      cells.push_back({DyadicIndex{w.depth(), static_cast<std::uint64_t>(i)}, w[i]});
    return PartitionWeight(std::move(cells));
  }

  const std::vector<Cell>& cells() const { return cells_; }
  std::size_t cell_count() const { return cells_.size(); }

  int max_level() const {
    int m = 0;
    for (auto& c : cells_) m = std::max(m, c.index.level);
    return m;
  }

  /// Cell containing I, if I lies inside a single cell.
  const Cell* enclosing_cell(const DyadicIndex& I) const {
    for (int lvl = std::min(I.level, max_level_); lvl >= 0; --lvl) {
      auto it = cell_of_.find(I.ancestor(lvl));
      if (it != cell_of_.end()) return &cells_[it->second];
    }
    return nullptr;
  }

  bool is_cell(const DyadicIndex& I) const { return cell_of_.count(I) > 0; }

  /// Tree nodes strictly above cells (the refinement skeleton).
  const std::vector<DyadicIndex>& internal_nodes() const { return internal_; }

  /// Internal nodes followed by cells.
  std::vector<DyadicIndex> all_nodes() const {
    std::vector<DyadicIndex> out(internal_);
    for (auto& c : cells_) out.push_back(c.index);
    return out;
  }

  double average(const DyadicIndex& I) const {
    DyadicIndex::make(I.level, I.pos);
    if (const Cell* c = enclosing_cell(I)) return c->value;
    auto it = internal_avg_.find(I);
    if (it == internal_avg_.end()) throw InternalError("partition node average missing");
    return it->second;
  }

  double integral() const { return average(DyadicIndex::root()); }

  PartitionWeight with_cell_values(const std::vector<double>& values) const {
    if (values.size() != cells_.size()) throw DomainError("cell value count mismatch");
    std::vector<Cell> out(cells_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].value = values[i];
    return PartitionWeight(std::move(out));
  }

  PartitionWeight scaled(double lambda) const {
    std::vector<double> v;
    for (auto& c : cells_) v.push_back(c.value * lambda);
    return with_cell_values(v);
  }

  /// Complete-tree form; requires depth ≥ max_level.
  LeafWeight to_leaf_weight(int depth, int depth_cap = kDefaultDepthCap) const {
    check_depth(depth, depth_cap);
    if (depth < max_level()) throw DomainError("leaf depth below the partition's finest cell");
    std::vector<double> v(std::size_t{1} << depth);
    for (auto& c : cells_) {
      const int shift = depth - c.index.level;
      const std::size_t first = static_cast<std::size_t>(c.index.pos) << shift;
      std::fill(v.begin() + first, v.begin() + first + (std::size_t{1} << shift), c.value);
    }
    return LeafWeight(depth, std::move(v), depth_cap);
  }

  /// Per-cell value of M^d w (the cell value dominates every sub-interval).
  std::vector<double> maximal_values() const {
    std::vector<double> out;
    out.reserve(cells_.size());
    for (auto& c : cells_) {
      double m = c.value;
      for (int lvl = 0; lvl < c.index.level; ++lvl) m = std::max(m, average(c.index.ancestor(lvl)));
      out.push_back(m);
    }
    return out;
  }

  double maximal_integral() const {
    const auto m = maximal_values();
    double s = 0.0;
    for (std::size_t i = 0; i < cells_.size(); ++i) s += m[i] * cells_[i].index.length();
    return s;
  }

  StepDistribution distribution(const DyadicIndex& I) const {
    if (const Cell* c = enclosing_cell(I)) return StepDistribution::from_samples({{c->value, 1.0}});
    std::vector<std::pair<double, double>> samples;
    for (auto& c : cells_)
      if (I.contains(c.index)) samples.emplace_back(c.value, c.index.length() / I.length());
    return StepDistribution::from_samples(std::move(samples));
  }

  /// Maximal I ⊆ root with ⟨w⟩_I ≥ threshold. The search stops at cells,
  /// since every sub-interval of a cell has the cell's average.
  std::vector<DyadicIndex> stopping_family(double threshold,
                                           const DyadicIndex& root = DyadicIndex::root()) const {
    if (!(threshold > 0.0)) throw DomainError("stopping threshold must be positive");
    std::vector<DyadicIndex> out;
    std::vector<DyadicIndex> stack{root};
    while (!stack.empty()) {
      const DyadicIndex I = stack.back();
      stack.pop_back();
      if (average(I) >= threshold) {
        out.push_back(I);
      } else if (!enclosing_cell(I)) {
        stack.push_back(I.right());
        stack.push_back(I.left());
      }
    }
    return out;
  }

 private:
  void build_nodes() {
    max_level_ = max_level();
    std::set<DyadicIndex> internal;
    for (auto& c : cells_)
      for (int lvl = 0; lvl < c.index.level; ++lvl) internal.insert(c.index.ancestor(lvl));
    internal_.assign(internal.begin(), internal.end());
    std::sort(internal_.begin(), internal_.end(), [](const DyadicIndex& a, const DyadicIndex& b) {
      return a.level != b.level ? a.level > b.level : a.pos < b.pos;
    });
    // Deepest first, so children are known before parents.
    for (auto& I : internal_) {
      auto child_avg = [&](const DyadicIndex& J) {
        auto it = cell_of_.find(J);
        if (it != cell_of_.end()) return cells_[it->second].value;
        return internal_avg_.at(J);
      };
      internal_avg_[I] = 0.5 * (child_avg(I.left()) + child_avg(I.right()));
    }
    std::sort(internal_.begin(), internal_.end());
  }

  std::vector<Cell> cells_;
  std::map<DyadicIndex, std::size_t> cell_of_;
  std::vector<DyadicIndex> internal_;
  std::map<DyadicIndex, double> internal_avg_;
  int max_level_ = 0;
};

}  // namespace dbell
