#include <gtest/gtest.h>

#include <cmath>

#include "topeq/gallery.hpp"
#include "topeq/smoothness.hpp"

using namespace topeq;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

const CoupledSystem& g1() {
  static const CoupledSystem cs = make_coupled(load_gallery("G1"));
  return cs;
}
const CoupledSystem& g2() {
  static const CoupledSystem cs = make_coupled(load_gallery("G2"));
  return cs;
}
const CoupledSystem& g3() {
  static const CoupledSystem cs = make_coupled(load_gallery("G3"));
  return cs;
}

}  // namespace

TEST(Smoothness, VariationalG1ClosedForm) {
  const VariationalSolution v = variational_first(g1(), 2.0, v1(1.0));
  EXPECT_EQ(v.Y(2.0)(0, 0), 1.0);
  for (double s : {0.0, 0.5, 1.5}) EXPECT_NEAR(v.Y(s)(0, 0), std::exp(-0.75 * (s - 2.0)), 1e-8);
}

TEST(Smoothness, VariationalUnperturbedIsTransitionMatrix) {
  const GallerySystem g = load_gallery("G3");
  const CoupledSystem cs = CoupledSystem::make(make_flow(g), Perturbation::from_dsl(2, {"0", "0"}), {1, 1, 1, 0, 0});
  const VariationalSolution v = variational_first(cs, 2.0, v2(1.0, 0.5));
  const Mat oracle = unflatten(oracle_eval(g, OracleKind::Phi, {0.5, 2.0}), 2, 2);
  EXPECT_LE((v.Y(0.5) - oracle).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Smoothness, SecondVariationVanishesForLinearF) {
  const VariationalSolution v = variational_second(g1(), 2.0, v1(1.0));
  EXPECT_EQ(v.Z(2.0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(v.Z(0.0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Smoothness, JacobianGAtZeroIsIdentity) {
  const DerivativeBundle b = jacobian_G(g3(), 0.0, v2(1.0, 1.0));
  EXPECT_EQ(b.jacobian, Mat::Identity(2, 2));
  EXPECT_EQ(b.cross_check.det, 1.0);
  EXPECT_EQ(jacobian_H(g3(), 0.0, v2(1.0, 1.0)).jacobian, Mat::Identity(2, 2));
}

TEST(Smoothness, JacobianG1Oracle) {
  for (double eta : {-2.0, 0.0, 3.0}) {
    const DerivativeBundle b = jacobian_G(g1(), 1.0, v1(eta));
    EXPECT_NEAR(b.jacobian(0, 0), 0.77880078307140487, 1e-9);
    EXPECT_GT(b.cross_check.det, 0.0);
    EXPECT_LE(b.cross_check.machine_vs_direct, 1e-5);
  }
  EXPECT_NEAR(jacobian_H(g1(), 1.0, v1(2.0)).jacobian(0, 0), 1.2840254166877415, 1e-8);
}

TEST(Smoothness, JacobianG3MatchesFdAndReference) {
  const DerivativeBundle b = jacobian_G(g3(), 2.0, v2(1.0, -0.5));
  EXPECT_LE(b.cross_check.fd_error, 1e-5);
  EXPECT_LE(b.cross_check.machine_vs_direct, 1e-5);
  // Reference: central differences of a scipy DOP853 evaluation of G.
  Mat ref(2, 2);
  ref << 0.7296393974398628, -0.07711323765091649, 0.02470047555380716, 0.7495578012661762;
  EXPECT_LE((b.jacobian - ref).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Smoothness, JacobianHInvertsJacobianG) {
  for (const CoupledSystem* cs : {&g1(), &g2(), &g3()}) {
    const Vec xi = cs->dim() == 1 ? v1(0.7) : v2(0.7, -1.1);
    const DerivativeBundle h = jacobian_H(*cs, 1.5, xi);
    EXPECT_LE(h.cross_check.identity_error, 1e-8);
    EXPECT_LE(h.cross_check.fd_error, 1e-5);
  }
}

TEST(Smoothness, HessianG1Vanishes) {
  const DerivativeBundle g = hessian_G(g1(), 1.0, v1(2.0));
  EXPECT_LE(max_abs(g.hessian), 1e-8);
  const DerivativeBundle h = hessian_H(g1(), 1.0, v1(2.0));
  EXPECT_LE(max_abs(h.hessian), 1e-8);
}

TEST(Smoothness, HessianAtZeroIsZero) {
  EXPECT_EQ(max_abs(hessian_G(g3(), 0.0, v2(1.0, 1.0)).hessian), 0.0);
  EXPECT_EQ(max_abs(hessian_H(g3(), 0.0, v2(1.0, 1.0)).hessian), 0.0);
}

TEST(Smoothness, HessianG2MatchesFdAndReference) {
  const DerivativeBundle g = hessian_G(g2(), 1.0, v1(1.0));
  EXPECT_LE(g.cross_check.fd_error, 1e-3);
  // Reference: 5-point second difference of a scipy DOP853 evaluation of G.
  EXPECT_NEAR(g.hessian[0], -0.05306060698225441, 1e-5);
  EXPECT_NEAR(g.jacobian(0, 0), 0.851849186538467, 1e-7);
}

TEST(Smoothness, HessianG3SymmetricAndFdValidated) {
  const DerivativeBundle g = hessian_G(g3(), 1.0, v2(0.4, -0.7));
  EXPECT_LE(g.cross_check.symmetry_error, 1e-8);
  EXPECT_LE(g.cross_check.fd_error, 1e-3);
  const DerivativeBundle h = hessian_H(g3(), 1.0, v2(0.4, -0.7));
  EXPECT_LE(h.cross_check.symmetry_error, 1e-8);
  EXPECT_LE(h.cross_check.fd_error, 1e-3);
}

TEST(Smoothness, ChainRuleOfRoundTrip) {
  // d/dxi G(t, H(t, xi)) = DG(H) DH = I
  const Vec xi = v2(0.3, 0.8);
  const Vec image = map_H(g3(), 2.0, xi).value;
  const Mat prod = jacobian_G(g3(), 2.0, image).jacobian * jacobian_H(g3(), 2.0, xi).jacobian;
  EXPECT_LE((prod - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Smoothness, FdValidateOrderTwoInteriorMinimum) {
  const FdTable t = fd_validate(MapKind::G, g2(), 1.0, v1(1.0), {2}, {1e-2, 1e-3, 1e-4});
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_LE(t.best_error_2, 1e-3);
  EXPECT_THROW(fd_validate(MapKind::G, g2(), 1.0, v1(1.0), {1}, {1e-3, 1e-2}), Error);
}

TEST(Smoothness, FdValidateUnperturbedIsExact) {
  const CoupledSystem cs =
      CoupledSystem::make(make_flow(load_gallery("G1")), Perturbation::from_dsl(1, {"0"}), {1, 1, 1, 0, 0});
  const FdTable t = fd_validate(MapKind::H, cs, 1.0, v1(0.5), {1, 2}, {1e-2, 1e-4});
  // Second differences carry rounding of order eps/h^2.
  for (const FdRow& r : t.rows) EXPECT_LE(r.error, r.order == 1 ? 1e-9 : 1e-5);
}

TEST(Smoothness, TensorIndexConvention) {
  EXPECT_EQ(tensor_index(2, 1, 0, 1), 5);
  Vec T = Vec::Zero(8);
  T[tensor_index(2, 0, 0, 1)] = 1.0;
  EXPECT_EQ(symmetry_error(T, 2), 1.0);
}
