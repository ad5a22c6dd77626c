#include <gtest/gtest.h>

#include <cmath>

#include "dbell/dyadic.hpp"
#include "dbell/dyadic_partition.hpp"
#include "dbell/instances.hpp"
#include "oracles.hpp"

using namespace dbell;

TEST(DyadicIndex, HeapRoundTrip) {
  for (std::size_t h = 0; h < node_count(6); ++h) EXPECT_EQ(DyadicIndex::from_heap(h).heap(), h);
  EXPECT_EQ(DyadicIndex::from_heap(0), DyadicIndex::root());
  EXPECT_EQ((DyadicIndex{2, 3}.heap()), 6u);
}

TEST(DyadicIndex, FamilyRelations) {
  const DyadicIndex I{3, 5};
  EXPECT_EQ(I.left().parent(), I);
  EXPECT_EQ(I.right().parent(), I);
  EXPECT_EQ(I.child(1), I.right());
  EXPECT_EQ(I.ancestor(1), (DyadicIndex{1, 1}));
  EXPECT_TRUE(I.contains(I));
  EXPECT_TRUE(DyadicIndex::root().contains(I));
  EXPECT_FALSE(I.contains(DyadicIndex{3, 4}));
  EXPECT_DOUBLE_EQ(I.length(), 0.125);
  EXPECT_DOUBLE_EQ(I.left_end(), 0.625);
}

TEST(DyadicIndex, InvalidIndicesThrow) {
  EXPECT_THROW(DyadicIndex::make(2, 4), DomainError);
  EXPECT_THROW(DyadicIndex::make(-1, 0), DomainError);
  EXPECT_THROW(DyadicIndex::root().parent(), DomainError);
  EXPECT_THROW(check_depth(30, 24), ResourceError);
}

TEST(LeafWeight, RejectsBadInput) {
  EXPECT_THROW(LeafWeight(2, {1.0, 2.0, 3.0}), DomainError);
  EXPECT_THROW(LeafWeight(1, {1.0, -1.0}), DomainError);
  EXPECT_THROW(LeafWeight(1, {1.0, NAN}), DomainError);
  EXPECT_THROW(LeafWeight::constant(25, 1.0), ResourceError);
  const LeafWeight w(1, {1.0, 1.0});
  EXPECT_THROW(w.average({2, 0}), DomainError);
}

TEST(Average, Examples) {
  const LeafWeight c = LeafWeight::constant(3, 2.5);
  for (auto& I : oracle::all_intervals(3)) EXPECT_DOUBLE_EQ(c.average(I), 2.5);
  EXPECT_DOUBLE_EQ(LeafWeight(1, {2.0, 0.0}).average(DyadicIndex::root()), 1.0);
  EXPECT_DOUBLE_EQ(LeafWeight(2, {4.0, 2.0, 1.0, 1.0}).average({1, 0}), 3.0);
}

TEST(Average, MidpointRecursionAndOracle) {
  const LeafWeight w = random_lognormal_weight(6, 11);
  const auto avg = node_averages(w);
  for (auto& I : oracle::all_intervals(5)) {
    EXPECT_EQ(avg[I], 0.5 * (avg[I.left()] + avg[I.right()]));
    EXPECT_EQ(avg[I], w.average(I));
  }
  for (auto& I : oracle::all_intervals(6)) EXPECT_LE(oracle::rel(avg[I], oracle::mean(w, I)), 1e-14);
}

TEST(Distribution, Examples) {
  const auto Nc = distribution(LeafWeight::constant(2, 3.0), DyadicIndex::root());
  EXPECT_DOUBLE_EQ(Nc(1.0), 1.0);
  EXPECT_DOUBLE_EQ(Nc(3.0), 1.0);
  EXPECT_DOUBLE_EQ(Nc(3.5), 0.0);

  const auto N = distribution(LeafWeight(1, {2.0, 0.0}), DyadicIndex::root());
  EXPECT_DOUBLE_EQ(N(0.5), 0.5);
  EXPECT_DOUBLE_EQ(N(2.0), 0.5);
  EXPECT_DOUBLE_EQ(N(2.0001), 0.0);
  EXPECT_DOUBLE_EQ(N.integral(), 1.0);

  const LeafWeight w(2, {4.0, 2.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(distribution(w, DyadicIndex::root()).integral(), 2.0);
}

TEST(Distribution, LayerCakeAndMonotone) {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const LeafWeight w = random_cascade_weight(5, s);
    for (auto& I : oracle::all_intervals(3)) {
      const auto N = distribution(w, I);
      EXPECT_LE(oracle::rel(N.integral(), w.average(I)), 1e-13);
      double prev = 1.0;
      for (auto& st : N.steps()) {
        EXPECT_GT(st.mass, 0.0);
        EXPECT_LE(st.mass, prev + 1e-15);
        prev = st.mass;
      }
    }
  }
}

TEST(Carleson, IntensityExamples) {
  CarlesonSequence zero(1.0);
  for (auto& I : oracle::all_intervals(2)) EXPECT_EQ(carleson_intensity(zero, I, 2), 0.0);

  CarlesonSequence one(1.0);
  one.set(DyadicIndex::root(), 1.0);
  EXPECT_DOUBLE_EQ(carleson_intensity(one, DyadicIndex::root(), 1), 1.0);
  EXPECT_DOUBLE_EQ(carleson_intensity(one, {1, 0}, 1), 0.0);

  CarlesonSequence third(1.0);
  for (auto I : {DyadicIndex{0, 0}, DyadicIndex{1, 0}, DyadicIndex{1, 1}}) third.set(I, 1.0 / 3.0);
  EXPECT_NEAR(carleson_intensity(third, DyadicIndex::root(), 1), 2.0 / 3.0, 1e-15);
}

TEST(Carleson, RejectsOutOfRangeCoefficients) {
  CarlesonSequence a(1.0);
  EXPECT_THROW(a.set({1, 0}, -0.1), DomainError);
  EXPECT_THROW(a.set({1, 0}, 1.5), DomainError);
  EXPECT_THROW(a.set({1, 2}, 0.5), DomainError);
  EXPECT_THROW(CarlesonSequence(0.0), DomainError);
}

TEST(Carleson, CheckFindsSupremum) {
  CarlesonSequence a(1.0);
  a.set({2, 1}, 1.0);
  a.set({1, 0}, 0.5);
  const auto chk = carleson_check(a, 2);
  EXPECT_DOUBLE_EQ(chk.sup, 1.0);
  EXPECT_TRUE(chk.within_bound);
  a.set({2, 0}, 1.0);
  const auto over = carleson_check(a, 2);
  EXPECT_DOUBLE_EQ(over.sup, 1.5);
  EXPECT_EQ(over.argmax, (DyadicIndex{1, 0}));
  EXPECT_FALSE(over.within_bound);
}

TEST(LIntensity, Examples) {
  const LeafWeight u = LeafWeight::constant(2, 2.0), v = LeafWeight::constant(2, 3.0);
  CarlesonSequence zero(1.0);
  for (auto& I : oracle::all_intervals(2)) EXPECT_EQ(l_intensity(u, v, zero, I), 0.0);
  CarlesonSequence a(1.0);
  a.set(DyadicIndex::root(), 1.0);
  EXPECT_DOUBLE_EQ(l_intensity(u, v, a, DyadicIndex::root()), 6.0);
}

TEST(LIntensity, MatchesDoubleSumDepthFour) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const Instance in = random_instance(4, s);
    const auto a = in.a.dense(4);
    const auto L = l_intensities(in.u, in.v, a);
    const auto A = carleson_intensities(a);
    for (auto& I : oracle::all_intervals(4)) {
      EXPECT_LE(oracle::rel(L[I], oracle::l_intensity(in.u, in.v, a, I)), 1e-12);
      EXPECT_LE(oracle::rel(A[I], oracle::carleson(a, I)), 1e-12);
    }
  }
}

TEST(Maximal, Examples) {
  const LeafWeight c = LeafWeight::constant(3, 1.5);
  const LeafWeight Mc = dyadic_maximal(c);
  for (double x : Mc.values()) EXPECT_DOUBLE_EQ(x, 1.5);
  const auto M = dyadic_maximal(LeafWeight(1, {2.0, 0.0})).values();
  EXPECT_DOUBLE_EQ(M[0], 2.0);
  EXPECT_DOUBLE_EQ(M[1], 1.0);
}

TEST(Maximal, OracleAndDomination) {
  const LeafWeight w = random_cascade_weight(6, 3);
  const LeafWeight M = dyadic_maximal(w);
  for (std::size_t x = 0; x < w.size(); ++x) {
    EXPECT_GE(M[x], w[x]);
    EXPECT_DOUBLE_EQ(M[x], oracle::maximal(w, x));
  }
}

TEST(StoppingFamily, Examples) {
  const LeafWeight c = LeafWeight::constant(3, 1.0);
  EXPECT_TRUE(stopping_family(c, 2.0).empty());
  const auto S = stopping_family(LeafWeight(2, {4.0, 0.0, 0.0, 0.0}), 3.0);
  ASSERT_EQ(S.size(), 1u);
  EXPECT_EQ(S[0], (DyadicIndex{2, 0}));
  EXPECT_THROW(stopping_family(c, 0.0), DomainError);
}

TEST(StoppingFamily, MaximalAndDisjoint) {
  const LeafWeight w = random_lognormal_weight(7, 5, 1.5);
  const double t = 2.0 * w.integral();
  const auto S = stopping_family(w, t);
  for (std::size_t i = 0; i < S.size(); ++i) {
    EXPECT_GE(w.average(S[i]), t);
    for (int lvl = 0; lvl < S[i].level; ++lvl) EXPECT_LT(w.average(S[i].ancestor(lvl)), t);
    for (std::size_t j = i + 1; j < S.size(); ++j) {
      EXPECT_FALSE(S[i].contains(S[j]));
      EXPECT_FALSE(S[j].contains(S[i]));
    }
  }
}

TEST(Chebyshev, WeakTypeOfMaximal) {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const LeafWeight w = random_cascade_weight(8, s);
    const LeafWeight M = dyadic_maximal(w);
    for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      double measure = 0.0;
      for (double x : M.values())
        if (x >= t) measure += std::ldexp(1.0, -w.depth());
      EXPECT_LE(measure, w.integral() / t + 1e-12);
    }
  }
}

TEST(PartitionWeight, AgreesWithLeafWeight) {
  const LeafWeight w = random_lognormal_weight(5, 9);
  const PartitionWeight p = PartitionWeight::from_leaf_weight(w);
  for (auto& I : oracle::all_intervals(5)) EXPECT_LE(oracle::rel(p.average(I), w.average(I)), 1e-13);
  EXPECT_LE(oracle::rel(p.integral(), w.integral()), 1e-14);
}
