#include <gtest/gtest.h>

#include <cmath>

#include "topeq/audit.hpp"
#include "topeq/gallery.hpp"
#include "topeq/perturbation.hpp"

using namespace topeq;

TEST(Perturbation, LipschitzG1) {
  EXPECT_NEAR(estimate_lipschitz(load_gallery("G1").pert, {10.0, 5.0}, 500), 0.25, 1e-12);
}

TEST(Perturbation, LipschitzG2ApproachesFromBelow) {
  const Perturbation p = load_gallery("G2").pert;
  const double narrow = estimate_lipschitz(p, {1.0, 5.0}, 500);
  const double wide = estimate_lipschitz(p, {100.0, 5.0}, 500);
  EXPECT_LT(narrow, wide);
  EXPECT_LT(wide, 0.2);
  EXPECT_GT(wide, 0.199);
}

TEST(Perturbation, LipschitzOfZero) {
  EXPECT_EQ(estimate_lipschitz(Perturbation::from_dsl(2, {"0", "0"}), {10.0, 5.0}, 200), 0.0);
}

TEST(Perturbation, MuValues) {
  const auto grid = uniform_grid(0.0, 5.0, 200);
  EXPECT_EQ(estimate_mu(load_gallery("G1").pert, grid), 0.0);
  const Perturbation g2 = load_gallery("G2").pert;
  EXPECT_DOUBLE_EQ(estimate_mu(g2, grid), 0.4);
  EXPECT_DOUBLE_EQ(g2.f(0.0, Vec::Zero(1))[0], 0.4);
  EXPECT_NEAR(estimate_mu(Perturbation::from_dsl(1, {"sin(t)"}), uniform_grid(0.0, 5.0, 500)), 1.0, 1e-4);
}

TEST(Perturbation, SymbolicDerivativesMatchFd) {
  const Perturbation p = load_gallery("G3").pert;
  ASSERT_TRUE(p.symbolic);
  Vec x(2);
  x << 0.4, -1.2;
  EXPECT_LE((p.Df(1.0, x) - fd_jacobian(p.f, 1.0, x, 1e-6)).cwiseAbs().maxCoeff(), 1e-8);
  const Vec d2 = p.D2f(1.0, x);
  // d^2 f1 / dx2^2 = -0.1 sin(x2), d^2 f2 / dx1^2 = -0.1 sin(x1)
  EXPECT_NEAR(d2[(0 * 2 + 1) * 2 + 1], -0.1 * std::sin(-1.2), 1e-15);
  EXPECT_NEAR(d2[(1 * 2 + 0) * 2 + 0], -0.1 * std::sin(0.4), 1e-15);
  EXPECT_EQ(d2[(0 * 2 + 0) * 2 + 1], 0.0);
}

TEST(Perturbation, AbsFallsBackToFd) {
  const Perturbation p = Perturbation::from_dsl(1, {"0.1*abs(x1)"});
  EXPECT_FALSE(p.symbolic);
  EXPECT_FALSE(p.derivative_note.empty());
  EXPECT_NEAR(p.Df(0.0, Vec::Constant(1, 2.0))(0, 0), 0.1, 1e-8);
}

TEST(Perturbation, ScaledKeepsDeclaredConstantsConsistent) {
  const Perturbation p = load_gallery("G2").pert.scaled(0.5);
  EXPECT_DOUBLE_EQ(*p.gamma, 0.1);
  EXPECT_DOUBLE_EQ(*p.mu, 0.2);
  EXPECT_DOUBLE_EQ(p.f(0.0, Vec::Zero(1))[0], 0.2);
}

TEST(Audit, G1PassesWithMargin) {
  const GallerySystem g = load_gallery("G1");
  const AuditReport a = audit_hypotheses(g.sys, g.pert);
  EXPECT_TRUE(a.passed());
  EXPECT_TRUE(a.smallness());
  EXPECT_NEAR(a.smallness_margin, 0.75, 1e-6);
  for (const auto& r : a.records)
    EXPECT_TRUE(r.status == ProbeStatus::CertifiedOnGrid || r.status == ProbeStatus::ProbePassed) << r.id;
  EXPECT_TRUE(a.warnings.empty());
}

TEST(Audit, X1ViolatesSmallness) {
  const GallerySystem g = load_gallery("X1");
  const AuditReport a = audit_hypotheses(g.sys, g.pert);
  EXPECT_FALSE(a.smallness());
  EXPECT_EQ(a.get("smallness").status, ProbeStatus::Violated);
  EXPECT_NEAR(a.smallness_margin, -1.0, 1e-6);
}

TEST(Audit, BoundedPerturbationIsInconclusiveOnGrowth) {
  const GallerySystem g = load_gallery("G1");
  const AuditReport a = audit_hypotheses(g.sys, Perturbation::from_dsl(1, {"0.2*tanh(x1)"}));
  const HypothesisRecord& p4 = a.get("P4");
  EXPECT_EQ(p4.status, ProbeStatus::ProbeInconclusive);
  EXPECT_NEAR(p4.value, 0.2, 1e-6);
  EXPECT_TRUE(a.smallness());
}

TEST(Audit, DeclaredMismatchWarns) {
  const GallerySystem g = load_gallery("G1");
  AuditOptions o;
  o.declared_K = 2.0;
  const AuditReport a = audit_hypotheses(g.sys, g.pert, o);
  ASSERT_EQ(a.warnings.size(), 1u);
  EXPECT_NE(a.warnings[0].find("declared K"), std::string::npos);
}

TEST(Audit, ExpandingLinearPartViolatesP1) {
  const AuditReport a =
      audit_hypotheses(LinearSystem::from_dsl(1, {"0.5"}, 3.0), Perturbation::from_dsl(1, {"0.1*x1"}));
  EXPECT_EQ(a.get("P1").status, ProbeStatus::Violated);
  EXPECT_FALSE(a.passed());
}
