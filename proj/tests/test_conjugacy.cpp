#include <gtest/gtest.h>

#include <cmath>

#include "topeq/bounds.hpp"
#include "topeq/conjugacy.hpp"
#include "topeq/gallery.hpp"

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
CoupledSystem unperturbed() {
  return CoupledSystem::make(make_flow(load_gallery("G3")), Perturbation::from_dsl(2, {"0", "0"}), {1, 1, 1, 0, 0});
}

}  // namespace

TEST(Conjugacy, SmallnessGate) {
  EXPECT_THROW(make_coupled(load_gallery("X1")), SmallnessViolation);
  const CoupledSystem cs = make_coupled(load_gallery("X1"), {}, true);
  EXPECT_TRUE(cs.outside_theorem());
  EXPECT_TRUE(map_H(cs, 1.0, v1(1.0)).outside_theorem);
}

TEST(Conjugacy, NonlinearSolutionG1) {
  EXPECT_EQ(nonlinear_solution(g1(), 1.0, 1.0, v1(1.0))[0], 1.0);
  EXPECT_NEAR(nonlinear_solution(g1(), 2.0, 0.0, v1(1.0))[0], 0.22313016014842983, 1e-9);
  EXPECT_NEAR(nonlinear_solution(g1(), 0.0, 2.0, v1(1.0))[0], 4.4816890703380648, 1e-8);
}

TEST(Conjugacy, ZStarG1) {
  EXPECT_NEAR(z_star_ivp(g1(), 1.0, v1(2.0)).value[0], 0.56805083337548297, 1e-9);
  EXPECT_EQ(z_star_ivp(g1(), 0.0, v1(-3.0)).value[0], 0.0);
}

TEST(Conjugacy, ZStarVanishesWithoutPerturbation) {
  const CoupledSystem cs = unperturbed();
  EXPECT_LE(z_star_ivp(cs, 2.0, v2(1.0, -2.0)).value.norm(), 1e-14);
  const PicardRun run = picard_iterates(cs, 2.0, v2(1.0, -2.0), 3, 0.0);
  for (const Vec& e : run.endpoints) EXPECT_LE(e.norm(), 1e-14);
  EXPECT_LE((map_G(cs, 2.0, v2(1.0, -2.0)).value - v2(1.0, -2.0)).norm(), 1e-14);
}

TEST(Conjugacy, PicardFirstIterateG1) {
  const PicardRun run = picard_iterates(g1(), 1.0, v1(2.0), 0, 0.0);
  EXPECT_NEAR(run.endpoints.front()[0], 0.5, 1e-9);
}

TEST(Conjugacy, PicardRatiosBoundedByContraction) {
  const PicardRun run = z_star_picard(g1(), 1.0, v1(2.0));
  EXPECT_TRUE(run.converged);
  const auto r = run.ratios();
  for (std::size_t j = 2; j < r.size(); ++j) EXPECT_LE(r[j], 0.30) << "j=" << j;
  EXPECT_NEAR(run.result.value[0], 0.56805083337548297, 1e-8);
}

TEST(Conjugacy, PicardAgreesWithIvp) {
  for (const CoupledSystem* cs : {&g2(), &g3()}) {
    const Vec xi = cs->dim() == 1 ? v1(1.5) : v2(1.0, -0.5);
    const double d = (z_star_picard(*cs, 2.0, xi).result.value - z_star_ivp(*cs, 2.0, xi).value).norm();
    EXPECT_LE(d, 1e-6);
  }
}

TEST(Conjugacy, PicardNoConvergenceOutsideTheorem) {
  const CoupledSystem cs = make_coupled(load_gallery("X1"), {}, true);
  EXPECT_THROW(z_star_picard(cs, 5.0, v1(1.0), 3, 1e-12), NoConvergence);
}

TEST(Conjugacy, MapsAgainstG1Oracle) {
  const GallerySystem g = load_gallery("G1");
  for (double t : {0.0, 0.5, 1.0, 2.0, 5.0})
    for (double xi : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
      const double h = oracle_eval(g, OracleKind::H, {t, xi})[0];
      const double gg = oracle_eval(g, OracleKind::G, {t, xi})[0];
      EXPECT_LE(std::abs(map_H(g1(), t, v1(xi)).value[0] - h) / (1 + std::abs(h)), 1e-6);
      EXPECT_LE(std::abs(map_G(g1(), t, v1(xi)).value[0] - gg) / (1 + std::abs(gg)), 1e-6);
    }
  EXPECT_NEAR(map_H(g1(), 1.0, v1(2.0)).value[0], 2.568050833375483, 1e-8);
  EXPECT_NEAR(map_G(g1(), 1.0, v1(2.568050833375483)).value[0], 2.0, 1e-8);
}

TEST(Conjugacy, MapsAgainstScipyReference) {
  // Reference values: scipy DOP853, rtol 1e-13.
  EXPECT_NEAR(map_H(g2(), 1.0, v1(1.5)).value[0], 1.9687149882815844, 1e-8);
  EXPECT_NEAR(map_G(g2(), 1.0, v1(1.5)).value[0], 1.1101860706891933, 1e-8);
  EXPECT_NEAR(map_G(g2(), 0.5, v1(-2.0)).value[0], -2.304723644476212, 1e-8);
  EXPECT_LE((map_H(g3(), 2.0, v2(1.0, -0.5)).value - v2(1.2671677749533832, -0.6255631722247682)).norm(), 1e-8);
  EXPECT_LE((map_G(g3(), 2.0, v2(1.0, -0.5)).value - v2(0.7974891126512861, -0.4122852071812902)).norm(), 1e-8);
}

TEST(Conjugacy, PicardMethodForH) {
  const ConjugacyResult r = map_H(g2(), 1.0, v1(1.5), MapMethod::Picard);
  EXPECT_EQ(r.method, MapMethod::Picard);
  EXPECT_NEAR(r.value[0], 1.9687149882815844, 1e-7);
}

TEST(Conjugacy, MapsAreIdentityAtZero) {
  EXPECT_EQ(map_H(g3(), 0.0, v2(1.0, 2.0)).value, v2(1.0, 2.0));
  EXPECT_EQ(map_G(g3(), 0.0, v2(1.0, 2.0)).value, v2(1.0, 2.0));
}

TEST(Conjugacy, VerifyConjugacyG2) {
  const Certificate c = verify_conjugacy(g2(), 0.5, v1(1.5), uniform_grid(0.0, 5.0, 10));
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.id, "Def-3.1(i)");
  EXPECT_LE(c.values.at("residual_H"), 1e-5);
  EXPECT_LE(c.values.at("residual_G"), 1e-5);
}

TEST(Conjugacy, VerifyConjugacyUnperturbed) {
  const Certificate c = verify_conjugacy(unperturbed(), 1.0, v2(1.0, 1.0), {0.0, 2.0, 5.0});
  EXPECT_TRUE(c.pass);
  EXPECT_LE(c.values.at("residual_H"), 1e-9);
}

TEST(Conjugacy, VerifyInverse) {
  std::vector<Vec> pts;
  for (double x : {-3.0, -1.0, 0.0, 1.0, 3.0}) pts.push_back(v1(x));
  const Certificate at0 = verify_inverse(g1(), 0.0, pts);
  EXPECT_EQ(at0.values.at("residual"), 0.0);
  EXPECT_LE(verify_inverse(g1(), 1.0, pts).values.at("residual"), 1e-6);
  const Certificate c3 = verify_inverse(g3(), 2.0, ball_points(2, 20, 5.0, 11), 1e-5);
  EXPECT_TRUE(c3.pass);
  EXPECT_EQ(c3.id, "Def-3.1(iv)");
}

TEST(Conjugacy, GrowthProbe) {
  const GrowthTable t = growth_probe(g2(), 1.0, v1(1.0), {1.0, 10.0, 100.0});
  EXPECT_EQ(t.H, ProbeStatus::ProbePassed);
  EXPECT_EQ(t.G, ProbeStatus::ProbePassed);
  EXPECT_EQ(t.rows.size(), 3u);
  EXPECT_THROW(growth_probe(g2(), 1.0, v1(1.0), {10.0, 1.0}), Error);
}

TEST(Conjugacy, ContinuityProbeG1) {
  std::vector<double> deltas;
  for (int k = 1; k <= 10; ++k) deltas.push_back(std::ldexp(1.0, -k));
  const ContinuityTable t = continuity_probe(g1(), 1.0, v1(2.0), deltas);
  EXPECT_NEAR(t.slope_H, 1.0, 0.05);
  for (std::size_t k = 1; k < t.rows.size(); ++k) EXPECT_LT(t.rows[k].diff_H, t.rows[k - 1].diff_H);
  const ContinuityTable zero = continuity_probe(g1(), 1.0, v1(2.0), {0.0});
  EXPECT_EQ(zero.rows[0].diff_H, 0.0);
}

TEST(Conjugacy, ContinuityProbeG2ReachesTolerance) {
  std::vector<double> deltas;
  for (int k = 1; k <= 24; ++k) deltas.push_back(std::ldexp(1.0, -k));
  const ContinuityTable t = continuity_probe(g2(), 0.5, v1(1.0), deltas);
  EXPECT_EQ(t.status, ProbeStatus::ProbePassed);
  EXPECT_LE(t.rows.back().diff_H, 1e-6);
  EXPECT_LE(t.rows.back().diff_G, 1e-6);
}
