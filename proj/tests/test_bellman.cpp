#include <gtest/gtest.h>

#include <cmath>

#include "dbell/bellman.hpp"
#include "oracles.hpp"

using namespace dbell;

namespace {

BellmanModel quarter_model(double delta = 1e-5) {
  ConstantBudget b;
  b.delta = delta;
  return make_model(BumpFamily::log(0.5), PhiMap(GapFunction::power(0.25)), b);
}

template <class F>
double central(F&& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

TEST(Budget, ValidationAndAutoConstants) {
  const BellmanModel m = quarter_model();
  EXPECT_TRUE(std::isfinite(m.budget.C1));
  EXPECT_DOUBLE_EQ(m.budget.delta1, 0.01);
  EXPECT_NEAR(m.budget.C2, 1.0 + 1e4 * 3.0 * std::cbrt(100.0 * std::sqrt(1e-5)), 1e-9);
  ConstantBudget bad;
  bad.c_drop = 0.1;
  bad.delta1 = 0.2;
  EXPECT_THROW(make_model(BumpFamily::log(1.0), PhiMap(GapFunction::power(0.25)), bad), DomainError);
  ConstantBudget neg;
  neg.P = -1.0;
  EXPECT_THROW(make_model(BumpFamily::log(1.0), PhiMap(GapFunction::power(0.25)), neg), DomainError);
}

TEST(Domain, Membership) {
  EXPECT_THROW((OmegaOnePoint{1.5, 0.5}.validate()), DomainError);
  EXPECT_NO_THROW((OmegaOnePoint{0.5, 0.5}.validate()));
  OmegaTwoPoint p{0.01, 0.01, 0.5, 0.5, 1e-3, 100.0};
  EXPECT_TRUE(p.contains());
  p.L = 2.0;
  EXPECT_FALSE(p.contains());
  EXPECT_THROW(p.validate(), DomainError);
  p = {0.1, 0.1, 0.0, 0.0, 1e-3, 100.0};
  EXPECT_FALSE(p.contains());
}

TEST(B1, Examples) {
  const BumpFamily k1 = BumpFamily::log(1.0, 0.0);
  for (double A : {0.01, 0.5, 1.0}) EXPECT_EQ(b1_formula(0.0, A, k1, 2.0).value, 0.0);
  const double N = std::exp(-2.0);
  const double C = 1.7;
  EXPECT_LE(oracle::rel(b1_formula(N, 1.0, k1, C).value, C * N - N / 2.0), 1e-14);
  EXPECT_LE(oracle::rel(b1_formula(N, 1.0, k1, C, true).value, C * N - N / 2.0), 1e-10);
}

TEST(B1, GradientMatchesFiniteDifferences) {
  const BumpFamily f = BumpFamily::log(1.0);
  const double C = 1.0 + f.psi_integral(1.0);
  for (double N : {1e-4, 0.01, 0.3}) {
    for (double A : {0.4, 0.7, 0.95}) {
      const B1Value v = b1_formula(N, A, f, C);
      const double gN = central([&](double x) { return b1_formula(x, A, f, C).value; }, N, 1e-6 * N);
      const double gA = central([&](double x) { return b1_formula(N, x, f, C).value; }, A, 1e-6 * A);
      EXPECT_LE(oracle::rel(v.grad_N, gN), 1e-6);
      EXPECT_LE(oracle::rel(v.grad_A, gA), 1e-6);
      // dA B1 = N/(A Ψ0(N/A)) ≥ N/Ψ0(N) when N ≤ A.
      if (N <= A) EXPECT_GE(v.grad_A, N / f.psi(N));
    }
  }
}

TEST(B1, ConstantShiftIsLinear) {
  const BumpFamily f = BumpFamily::log(1.0);
  for (double N : {0.01, 0.2}) {
    const B1Value a = b1_formula(N, 0.5, f, 1.0), b = b1_formula(N, 0.5, f, 2.0);
    EXPECT_LE(oracle::rel(b.value - a.value, N), 1e-13);
    EXPECT_DOUBLE_EQ(a.grad_A, b.grad_A);
  }
}

TEST(B1, PropertyCheckOnRegion) {
  ConstantBudget b;
  const BellmanModel m = make_model(BumpFamily::log(1.0), PhiMap(GapFunction::power(0.25)), b);
  GridSpec g = default_omega1_grid(b);
  g.dims["N"].count = 40;
  g.dims["A"].count = 40;
  const VerificationReport r = b1_property_check(g, m);
  EXPECT_TRUE(r.pass());
  for (const char* n : {"bounds", "derivative_floor", "hessian_nsd"}) {
    ASSERT_NE(r.find(n), nullptr);
    EXPECT_GT(r.find(n)->count, 0u);
  }
  // Below A = N/x* the value is negative.
  const double xs = r.find("negativity_region")->value;
  EXPECT_LT(b1_formula(0.5, 0.25 / xs, m.phi0, m.budget.C1).value, 0.0);
  EXPECT_GT(b1_formula(0.5, 2.0 / xs, m.phi0, m.budget.C1).value, 0.0);
}

TEST(B2, Examples) {
  const PhiMap pm(GapFunction::power(0.25));
  const double C = 5.0;
  EXPECT_LE(oracle::rel(b2_formula(0.1, 0.1, 0.01, 0.0, pm, C).value, C * 0.1 - 3.0 * std::pow(0.01, 7.0 / 3.0) / 0.1),
            1e-14);
  EXPECT_LE(oracle::rel(b2_formula(0.1, 0.1, 0.01, 0.0, pm, C, true).value,
                        C * 0.1 - 3.0 * std::pow(0.01, 7.0 / 3.0) / 0.1),
            1e-12);
  EXPECT_NEAR(b2_formula(0.1, 0.1, 1e-300, 0.3, pm, C).value, C * 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(b2_formula(0.1, 0.1, 0.0, 0.3, pm, C).value, C * 0.1);
}

TEST(B2, GradientMatchesFiniteDifferences) {
  const PhiMap pm(GapFunction::power(0.25));
  const double C = 4.0;
  const double u = 0.003, v = 0.002;
  for (double L : {1e-5, 1e-3, 0.1}) {
    for (double A : {0.1, 0.8}) {
      const auto g = b2_formula(u, v, L, A, pm, C).grad;
      const double gv = central([&](double x) { return b2_curved_part(x, L, A, pm); }, v, 1e-6 * v);
      const double gL = central([&](double x) { return b2_curved_part(v, x, A, pm); }, L, 1e-6 * L);
      const double gA = central([&](double x) { return b2_curved_part(v, L, x, pm); }, A, 1e-6);
      EXPECT_DOUBLE_EQ(g[0], C);
      EXPECT_LE(oracle::rel(g[1], gv), 1e-6);
      EXPECT_LE(oracle::rel(g[2], gL), 1e-6);
      EXPECT_LE(oracle::rel(g[3], gA), 1e-6);
      EXPECT_GE(g[3], 0.0);
    }
  }
}

TEST(B2, HessianDeterminantVanishes) {
  const PhiMap pm(GapFunction::power(0.25));
  for (double L : {1e-4, 1e-2, 0.3})
    for (double A : {0.0, 0.5, 1.0}) {
      const Eigen::Matrix3d H = b2_hessian(0.01, L, A, pm);
      EXPECT_LE(std::abs(H.determinant()) / num::determinant_scale(H), 1e-6);
      EXPECT_LT(H(0, 0), 0.0);
      EXPECT_LE(num::max_eigenvalue<3>(H), 1e-7 * num::trace_magnitude<3>(H));
    }
}

TEST(B2, PropertyCheckAtSmallDelta) {
  const BellmanModel m = quarter_model(1e-5);
  GridSpec g = default_omega2_grid();
  g.points = 1500;
  const VerificationReport r = b2_property_check(g, m);
  for (const char* n : {"bounds", "dA_nonnegative", "combined_drop", "hessian_nsd", "hessian_det_zero",
                        "closed_vs_quadrature"}) {
    ASSERT_NE(r.find(n), nullptr) << n;
    EXPECT_TRUE(r.find(n)->pass()) << n << " margin " << r.find(n)->worst_margin;
  }
  EXPECT_GT(r.find("combined_drop")->value, 0.0);
}

TEST(B2, DeltaScanImprovesAsDeltaShrinks) {
  const PhiMap pm(GapFunction::power(0.25));
  const auto rows = combined_drop_delta_scan(pm, 100.0, {1e-3, 1e-4, 1e-5, 1e-6}, 40, 40);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].inf_ratio, rows[i - 1].inf_ratio);
  EXPECT_GT(rows.back().inf_ratio, 0.0);
}

TEST(GFunction, PowerClosedForm) {
  const PhiMap pm(GapFunction::power(0.25));
  for (double s : {1e-6, 1e-4, 1e-2, 0.1}) {
    EXPECT_LE(oracle::rel(g_function(s, pm), 7.0 * std::pow(s, 8.0 / 3.0)), 1e-8) << s;
    EXPECT_LE(oracle::rel(g_function(s, pm, false), 7.0 * std::pow(s, 8.0 / 3.0)), 1e-12) << s;
  }
  EXPECT_LT(std::abs(g_function(1e-30, pm, false)), 1e-70);
}

TEST(GFunction, PositivityReports) {
  const VerificationReport p = g_positivity(PhiMap(GapFunction::power(0.25)), 1e-6, 0.1, 60);
  EXPECT_TRUE(p.pass());
  const PhiMap lp(GapFunction::logpower(1.8));
  const VerificationReport l = g_positivity(lp, 1e-6, std::min(0.1, lp.y_max()), 60);
  EXPECT_TRUE(l.find("g_positive")->pass());
  EXPECT_TRUE(l.find("g_nondecreasing")->pass());
  EXPECT_THROW(g_positivity(PhiMap(GapFunction::logpower(0.5)), 1e-6, 0.1), DomainError);
}

TEST(Sylvester, Examples) {
  Eigen::Matrix3d D = Eigen::Vector3d(-1.0, -1.0, 0.0).asDiagonal();
  const auto d = sylvester_nsd(D);
  EXPECT_EQ(d.verdict, SylvesterVerdict::NSD);
  EXPECT_TRUE(d.eigen_nsd);

  Eigen::Matrix3d M;
  M << -1, 1, 0, 1, 0, 0, 0, 0, 0;
  const auto m = sylvester_nsd(M);
  EXPECT_NEAR(m.minor, -1.0, 1e-15);
  EXPECT_EQ(m.verdict, SylvesterVerdict::NotCovered);
  EXPECT_GT(m.max_eigenvalue, 0.0);
  EXPECT_FALSE(m.eigen_nsd);

  Eigen::Matrix3d asym = Eigen::Matrix3d::Zero();
  asym(0, 1) = 1.0;
  EXPECT_THROW(sylvester_nsd(asym), DomainError);
}

TEST(Sylvester, AgreesWithEigenvaluesOnB2Hessians) {
  const PhiMap pm(GapFunction::power(0.25));
  for (double v : {1e-4, 1e-2})
    for (double L : {1e-4, 1e-2, 0.3}) {
      const auto s = sylvester_nsd(b2_hessian(v, L, 0.4, pm));
      if (s.premises) EXPECT_TRUE(s.eigen_nsd);
    }
}

TEST(AuxT, Examples) {
  const auto t = aux_T(0.25, 0.25, 0.5);
  EXPECT_EQ(sylvester_nsd(t.hessian).verdict, SylvesterVerdict::NSD);
  for (double x : {0.1, 0.7})
    for (double y : {0.2, 1.1}) EXPECT_DOUBLE_EQ(aux_T(x, y, 1.0).grad[0], x * y / 4.0);
  const double x = std::sqrt(2.0), y = std::sqrt(2.0);
  EXPECT_GT(aux_T_minor_formula(x, y, 0.0), 0.0);
  const auto H = aux_T(0.3, 0.6, 0.2).hessian;
  EXPECT_LE(oracle::rel(H(0, 0) * H(1, 1) - H(0, 1) * H(0, 1), aux_T_minor_formula(0.3, 0.6, 0.2)), 1e-12);
  EXPECT_LE(std::abs(H.determinant()) / num::determinant_scale(H), 1e-10);
}

TEST(AuxT, CheckReportPasses) { EXPECT_TRUE(aux_T_check(2000, 7).pass()); }

TEST(GradientChecks, ReportPasses) {
  const VerificationReport r = gradient_checks(quarter_model(), 200, 3);
  EXPECT_TRUE(r.pass());
  for (const char* n : {"b1", "b2", "T"}) ASSERT_NE(r.find(n), nullptr) << n;
}

TEST(Master, ZeroWeightAndSingleStep) {
  const BellmanModel m = quarter_model();
  const NodeData zero{0.0, 0.001, 0.5, 0.0, StepDistribution{}};
  const MasterValue z = master_bellman_eval(zero, m);
  EXPECT_TRUE(z.valid);
  EXPECT_EQ(z.value, 0.0);

  // Constant u = c: the t-integral is c·B1(1, A).
  const double c = 0.002, A = 0.4;
  const NodeData one{c, 0.001, A, 0.0, StepDistribution({{0.0, c, 1.0}})};
  const MasterValue v = master_bellman_eval(one, m);
  EXPECT_LE(oracle::rel(v.b1_part, c * b1_formula(1.0, A, m.phi0, m.budget.C1).value), 1e-14);
  EXPECT_LE(oracle::rel(v.value, v.b1_part + m.budget.C2 * c), 1e-14);

  const NodeData outside{1.0, 1.0, 0.5, 0.1, StepDistribution({{0.0, 1.0, 1.0}})};
  EXPECT_FALSE(master_bellman_eval(outside, m).valid);
}

TEST(NodeDrop, UnloadedEqualChildren) {
  const BellmanModel m = quarter_model();
  const NodeData d{0.002, 0.003, 0.4, 0.01, StepDistribution({{0.0, 0.002, 1.0}})};
  const NodeDrop r = node_drop_check(d, d, d, 0.0, m);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.drop, 0.0, 1e-15);
  EXPECT_EQ(r.required, 0.0);
}

TEST(NodeDrop, LoadedNodeDropsAndDynamicsAreEnforced) {
  const BellmanModel m = quarter_model();
  const StepDistribution Np({{0.0, 0.001, 1.0}}), Nm({{0.0, 0.003, 1.0}});
  const StepDistribution N({{0.0, 0.001, 1.0}, {0.001, 0.003, 0.5}});
  const NodeData Ip{0.001, 0.002, 0.2, 1e-4, Np}, Im{0.003, 0.002, 0.3, 2e-4, Nm};
  const double a = 0.25;
  const double u = 0.002, v = 0.002;
  const NodeData I{u, v, 0.25 + a, 1.5e-4 + a * u * v, N};
  const NodeDrop r = node_drop_check(I, Ip, Im, a, m);
  EXPECT_GT(r.drop, 0.0);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(oracle::rel(r.required, a * u * I.L), 1e-15);
  NodeData broken = I;
  broken.A += 1e-3;
  EXPECT_THROW(node_drop_check(broken, Ip, Im, a, m), IntegrityError);
  NodeData badN = I;
  badN.N = StepDistribution({{0.0, 0.002, 1.0}});
  EXPECT_THROW(check_dynamics(badN, Ip, Im, a), IntegrityError);
}

TEST(Grid, AxisIsCellCentered) {
  const Axis lin{0.0, 1.0, 4, false};
  EXPECT_DOUBLE_EQ(lin.at(0), 0.125);
  EXPECT_DOUBLE_EQ(lin.at(3), 0.875);
  const Axis lg{1e-4, 1.0, 2, true};
  EXPECT_NEAR(lg.at(0), 1e-3, 1e-15);
  EXPECT_THROW((Axis{0.0, 1.0, 3, true}.validate("x")), InputError);
  EXPECT_THROW((Axis{1.0, 0.0, 3, false}.validate("x")), InputError);
}
