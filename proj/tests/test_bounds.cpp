#include <gtest/gtest.h>

#include <cmath>

#include "topeq/bounds.hpp"
#include "topeq/gallery.hpp"

using namespace topeq;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

const CoupledSystem& g1() {
  static const CoupledSystem cs = make_coupled(load_gallery("G1"));
  return cs;
}
const CoupledSystem& g2() {
  static const CoupledSystem cs = make_coupled(load_gallery("G2"));
  return cs;
}

const Constants kG1{1.0, 1.0, 1.0, 0.25, 0.0};

}  // namespace

TEST(Bounds, ThetaValues) {
  EXPECT_NEAR(eval_theta0(2.0, 1.0, 0.25, 1.0, 1.0), 0.5, 1e-12);
  EXPECT_NEAR(eval_theta(2.0, 1.0, 0.25, 1.0, 1.0), 1.6487212707001281, 1e-12);
  EXPECT_EQ(eval_theta0(0.0, 1.0, 0.25, 1.0, 1.0), 0.0);
  EXPECT_EQ(eval_theta(0.0, 1.0, 0.25, 1.0, 1.0), 1.0);
}

TEST(Bounds, ThetaGeneralBranch) {
  // K gamma (e^{(M-alpha)t} - 1)/(M - alpha) with M - alpha = 0.5
  EXPECT_NEAR(eval_theta0(2.0, 2.0, 0.25, 1.0, 1.5), 0.5 * (std::exp(1.0) - 1.0) / 0.5, 1e-12);
}

TEST(Bounds, ThetaNondecreasing) {
  double prev0 = -1.0, prev = 0.0;
  for (double t : uniform_grid(0.0, 10.0, 100)) {
    const double a = eval_theta0(t, 1.0, 0.25, 1.0, 1.2);
    const double b = eval_theta(t, 1.0, 0.25, 1.0, 1.2);
    EXPECT_GE(a, prev0);
    EXPECT_GE(b, prev);
    prev0 = a;
    prev = b;
  }
}

TEST(Bounds, CriticalTimeG) {
  const CriticalTime ct = critical_time_g(0.1, kG1, 2.0);
  EXPECT_NEAR(ct.time, 2.3025850929940457, 1e-12);
  EXPECT_NEAR(ct.max_value, 1.7782794100389228, 1e-12);
  const CriticalTime deg = critical_time_g(10.0, kG1, 2.0);
  EXPECT_EQ(deg.time, 0.0);
  EXPECT_EQ(deg.max_value, 1.0);
}

TEST(Bounds, MaximaAtRightEndpoint) {
  const ConstantSheet sheet{kG1, 3.0, 2.0};
  double grid_max = 0.0;
  const double L = sheet.L(0.1);
  for (double t : uniform_grid(0.0, L, 50)) grid_max = std::max(grid_max, sheet.theta(t));
  EXPECT_NEAR(sheet.thetastar(0.1), grid_max, 1e-12);
  EXPECT_NEAR(sheet.Theta0star(0.1), sheet.theta0(sheet.Lstar(0.1)), 1e-15);
}

TEST(Bounds, DeltaRecursion) {
  EXPECT_NEAR(delta_second_term(0.1, 0.5, 0.25), 0.075, 1e-12);
  EXPECT_NEAR(delta_recursion(0.1, 0, 0.5, 0.25), 0.1, 1e-15);
  double prev = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= 10; ++j) {
    const double d = delta_recursion(0.1, j, [](double e) { return 0.5 + e; }, 0.25);
    EXPECT_LE(d, prev);
    prev = d;
  }
  EXPECT_THROW(delta_recursion(0.1, 1, 0.5, 1.0), Error);
  EXPECT_THROW(delta_recursion(0.1, -1, 0.5, 0.25), Error);
}

TEST(Bounds, GronwallG1) {
  const auto g = check_gronwall(g1(), default_pair_samples(1, 5.0));
  EXPECT_TRUE(g.prop.pass);
  EXPECT_TRUE(g.cor.pass);
  EXPECT_TRUE(g.eq400.pass);
  EXPECT_EQ(g.cor.id, "Cor-2.4");
  EXPECT_EQ(g.eq400.id, "Eq-400");
}

TEST(Bounds, LinearSandwichSaturatesForScalarFlow) {
  const auto g = check_gronwall(g1(), {{1.0, 0.0, v1(1.0), v1(0.0)}});
  EXPECT_NEAR(g.cor.worst_margin, 0.0, 1e-9);
  EXPECT_TRUE(g.cor.pass);
}

TEST(Bounds, CoincidentPairsHaveZeroLhs) {
  const auto g = check_gronwall(g2(), {{3.0, 1.0, v1(0.7), v1(0.7)}});
  EXPECT_TRUE(g.prop.pass);
  EXPECT_TRUE(g.cor.pass);
  EXPECT_TRUE(g.eq400.pass);
  EXPECT_EQ(g.prop.worst_margin, 0.0);
}

TEST(Bounds, TwoSidedDivergenceLowerBoundFailsForSoftplus) {
  // The exponential lower bound on |y(t,s,p) - y(t,s,q)| is not implied by the
  // hypotheses; the softplus system violates it at this witness.
  const auto g = check_gronwall(g2(), {{4.0, 3.0, v1(1.69), v1(-1.99)}});
  EXPECT_FALSE(g.prop.pass);
  EXPECT_LT(g.prop.worst_margin, -0.25);
}

TEST(Bounds, IterateBoundsG1) {
  const Certificate c = check_zj_bounds(g1(), 1.0, v1(2.0), 5);
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.id, "Lemma-3.4");
  const Certificate z = check_zj_bounds(g1(), 1.0, v1(0.0), 5);
  EXPECT_TRUE(z.pass);
  EXPECT_EQ(z.scale, 1.0);
}

TEST(Bounds, IterateBoundFirstStepG1Margin) {
  // |z_0(s)| = 0.5 s <= 0.25 * 2e = 1.3591...
  const Certificate c = check_zj_bounds(g1(), 1.0, v1(2.0), 0);
  EXPECT_NEAR(c.worst_margin, 1.3591409142295226 - 0.5, 1e-6);
}

TEST(Bounds, IterateBoundsG2) { EXPECT_TRUE(check_zj_bounds(g2(), 1.0, v1(1.0), 5).pass); }

TEST(Bounds, ModulusG1AndG2) {
  const auto ball = ball_points(1, 40, 1.0, 5);
  std::vector<std::pair<Vec, Vec>> pairs;
  for (std::size_t k = 0; k + 1 < ball.size(); k += 2) pairs.emplace_back(ball[k], ball[k + 1]);
  const Certificate c2 = modulus_check(g2(), uniform_grid(0.0, 5.0, 5), pairs, 0.1);
  EXPECT_TRUE(c2.pass);
  EXPECT_EQ(c2.id, "Thm-3.6");
  EXPECT_TRUE(modulus_check(g1(), {0.0, 2.5, 5.0}, {{v1(1.0), v1(1.0)}, {v1(-1.0), v1(2.0)}}, 0.1).pass);
}

TEST(Bounds, IterateModulusG2) {
  const Certificate c = check_zj_modulus(g2(), {0.0, 2.5, 5.0}, {{v1(0.5), v1(-0.3)}}, 0.1, 5);
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.id, "Lemma-3.5");
  EXPECT_GT(c.values.at("omega"), 0.0);
}

TEST(Bounds, PairSamplesAreOrdered) {
  const auto s = default_pair_samples(2, 5.0, 5, 3.0, 7);
  for (const auto& p : s) {
    EXPECT_GE(p.t, p.s);
    EXPECT_LE(p.p.norm(), 3.0);
  }
  EXPECT_EQ((s.back().p - s.back().q).norm(), 0.0);
}
