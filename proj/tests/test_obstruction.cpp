#include <gtest/gtest.h>

#include <cmath>

#include "dbell/obstruction.hpp"
#include "oracles.hpp"

using namespace dbell;

TEST(BuildU, DepthOneIsConstant) {
  const PartitionWeight u = build_u(1);
  ASSERT_EQ(u.cell_count(), 1u);
  EXPECT_DOUBLE_EQ(u.average(DyadicIndex::root()), 1.0);
  EXPECT_THROW(build_u(0), DomainError);
}

TEST(BuildU, BandProfile) {
  const PartitionWeight u = build_u(6);
  for (int k = 0; k <= 4; ++k)
    EXPECT_DOUBLE_EQ(u.average({k + 1, 1}), std::ldexp(1.0, k) / ((k + 1.0) * (k + 1.0)));
  EXPECT_DOUBLE_EQ(u.average({5, 0}), 32.0 / 36.0);
}

TEST(BuildU, MassStaysBounded) {
  const double m20 = build_u(20).integral(), m40 = build_u(40).integral();
  EXPECT_LT(std::abs(m20 - m40), 0.025);
  EXPECT_LT(m40, 1.0);
  EXPECT_GT(build_u(40).maximal_integral(), build_u(20).maximal_integral());
}

TEST(Hierarchy, ConstantWeightIsEmpty) {
  const StoppingHierarchy H = build_hierarchy(PartitionWeight::from_leaf_weight(LeafWeight::constant(3, 1.0)));
  EXPECT_TRUE(H.trivial());
  EXPECT_TRUE(H.violations.empty());
  const CarlesonSequence a = build_alpha(H);
  EXPECT_TRUE(a.entries().empty());
  EXPECT_EQ(carleson_check_sparse(a).sup, 0.0);
}

TEST(Hierarchy, InvariantsOnDefaultProfile) {
  for (int d : {10, 20}) {
    const PartitionWeight u = build_u(d);
    const StoppingHierarchy H = build_hierarchy(u);
    EXPECT_TRUE(H.violations.empty());
    EXPECT_GE(H.depth(), 1u);
    for (std::size_t k = 1; k < H.generations.size(); ++k)
      for (auto& I : H.generations[k]) {
        const double t = std::pow(3.0, double(k));
        EXPECT_GE(u.average(I), t);
        EXPECT_LE(u.average(I), 2.0 * t);
      }
    for (double f : H.uncovered_fraction) EXPECT_GE(f, 1.0 / 3.0 - 1e-12);
  }
}

TEST(BuildV, MatchesStoppingAverages) {
  const PartitionWeight u = build_u(20);
  const StoppingHierarchy H = build_hierarchy(u);
  const ObstructionV V = build_v(u, H);
  for (auto& gen : H.generations)
    for (auto& J : gen) {
      EXPECT_LE(oracle::rel(u.average(J) * V.v_pre.average(J), 1.0), 1e-10);
      EXPECT_GT(V.c.at(J), 1.0);
      EXPECT_LT(V.c.at(J), 9.0);
    }
  for (auto& I : V.v.all_nodes()) EXPECT_LE(u.average(I) * V.v.average(I), 1.0 + 1e-10);
  EXPECT_LE(carleson_check_sparse(build_alpha(H)).sup, 1.0 + 1e-12);
}

TEST(Obstruction, ReportPassesAndGrows) {
  const ObstructionReport o = run_obstruction(20);
  EXPECT_TRUE(o.report.pass());
  ASSERT_FALSE(o.growth.empty());
  for (std::size_t i = 1; i < o.growth.size(); ++i) EXPECT_GE(o.growth[i].S, o.growth[i - 1].S);
  for (auto& row : o.growth) EXPECT_GE(row.S, row.trunc_maximal / 3.0 - 1e-12);
  EXPECT_LE(o.A2_post_sup, 1.0 + 1e-10);
  EXPECT_LE(o.carleson_sup, 1.0 + 1e-10);
  EXPECT_LE(o.A2_pre_stopping_error, 1e-10);
}

TEST(Obstruction, DepthSweepIncreases) {
  std::vector<ObstructionReport> reps;
  for (int d : {10, 20, 40}) reps.push_back(run_obstruction(d));
  const DepthSweep s = obstruction_depth_sweep(reps);
  EXPECT_TRUE(s.strictly_increasing);
  ASSERT_EQ(s.increments.size(), 2u);
  EXPECT_LE(s.increment_spread, 0.35);
}

TEST(B0Probe, UnitGapFailsValidFamilyMonotone) {
  ConstantBudget b;
  b.delta = 1e-5;
  const Axis au{1e-6, 1.0, 5, true}, av{1e-6, 1.0, 5, true}, aA{0.0, 1.0, 2, false};
  const auto ok = b0_probe(au, av, aA, {{"quarter", PhiMap(GapFunction::power(0.25))}}, b, false);
  EXPECT_TRUE(ok.pass());
  std::vector<B0Candidate> unit;
  for (double y0 : {1e-8, 1e-2}) unit.push_back({"cut", PhiMap(GapFunction::unit(), InverseMode::Closed, y0)});
  const auto ob = b0_probe(au, av, aA, unit, b, true);
  ASSERT_NE(ob.find("obstruction_illustrated"), nullptr);
  EXPECT_TRUE(ob.find("obstruction_illustrated")->pass());
}

TEST(B0Probe, LineSearchFindsMaximum) {
  const PhiMap pm(GapFunction::power(0.25));
  const double u = 1e-3, v = 2e-3, A = 0.3, C = 10.0;
  const LineMax lm = b0_line_search(u, v, A, pm, C, 100.0);
  for (double t = 0.0; t <= 1.0; t += 0.01) {
    const double L = std::exp(std::log(u * v) + t * (std::log(100.0 * std::sqrt(u * v)) - std::log(u * v)));
    EXPECT_LE(b2_formula(u, v, L, A, pm, C).value, lm.value + 1e-15);
  }
}
