// Acceptance gate: ten criteria, one line each. Tolerances are pinned below.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "topeq/audit.hpp"
#include "topeq/bounds.hpp"
#include "topeq/cli/cli.hpp"
#include "topeq/conjugacy.hpp"
#include "topeq/gallery.hpp"
#include "topeq/ode.hpp"
#include "topeq/smoothness.hpp"

using namespace topeq;

namespace {

constexpr double kOracleTol = 1e-6;
constexpr double kInverseTolG1 = 1e-6;
constexpr double kInverseTol = 1e-5;
constexpr double kConjTol = 1e-5;
constexpr double kPicardTol = 1e-6;
constexpr double kRatioSlack = 0.05;
constexpr double kMachineDirectTol = 1e-5;
constexpr double kJacobianFdTol = 1e-5;
constexpr double kIdentityTol = 1e-8;
constexpr double kHessianFdTol = 1e-3;
constexpr double kZeroHessianTol = 1e-8;
constexpr double kSymmetryTol = 1e-8;
constexpr double kFormulaTol = 1e-12;
constexpr double kOrderFactor = 8.0;
constexpr double kEps = 0.1;

const std::vector<double> kTimes{0.0, 0.5, 1.0, 2.0, 5.0};
const std::vector<double> kScalars{-3.0, -1.0, 0.0, 1.0, 3.0};

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

struct Sys {
  GallerySystem g;
  CoupledSystem cs;
};

const std::vector<Sys>& systems() {
  static const std::vector<Sys> s = [] {
    std::vector<Sys> out;
    for (const char* id : {"G1", "G2", "G3"}) {
      GallerySystem g = load_gallery(id);
      CoupledSystem cs = make_coupled(g);
      out.push_back({std::move(g), std::move(cs)});
    }
    return out;
  }();
  return s;
}

/// The lattice points of a system: the scalar grid, or {-3, 0, 3}^2 in the plane.
std::vector<Vec> grid_points(int n) {
  std::vector<Vec> pts;
  if (n == 1)
    for (double x : kScalars) pts.push_back(v1(x));
  else
    for (double a : {-3.0, 0.0, 3.0})
      for (double b : {-3.0, 0.0, 3.0}) pts.push_back(v2(a, b));
  return pts;
}

// ------------------------------------------------------------------ criteria

Outcome c1_oracle() {
  const Sys& s = systems()[0];
  double worst = 0.0;
  for (double t : kTimes)
    for (double xi : kScalars) {
      const double h = oracle_eval(s.g, OracleKind::H, {t, xi})[0];
      const double g = oracle_eval(s.g, OracleKind::G, {t, xi})[0];
      worst = std::max(worst, std::abs(map_H(s.cs, t, v1(xi)).value[0] - h) / (1 + std::abs(h)));
      worst = std::max(worst, std::abs(map_G(s.cs, t, v1(xi)).value[0] - g) / (1 + std::abs(g)));
    }
  return {worst <= kOracleTol, "max relative error " + fmt(worst) + " (tol " + fmt(kOracleTol) + ")"};
}

Outcome c2_inverse() {
  bool pass = true;
  std::string detail;
  for (const Sys& s : systems()) {
    const double tol = s.g.id == "G1" ? kInverseTolG1 : kInverseTol;
    std::vector<Vec> pts = grid_points(s.cs.dim());
    for (const Vec& p : ball_points(s.cs.dim(), 20, 5.0, 2024)) pts.push_back(p);
    double worst = 0.0;
    for (double t : kTimes) worst = std::max(worst, verify_inverse(s.cs, t, pts, tol).values.at("residual"));
    pass = pass && worst <= tol;
    detail += s.g.id + " " + fmt(worst) + " (tol " + fmt(tol) + ") ";
  }
  return {pass, detail};
}

Outcome c3_conjugacy() {
  bool pass = true;
  std::string detail;
  const auto t_grid = uniform_grid(0.0, 5.0, 10);
  for (const Sys& s : systems()) {
    const std::vector<Vec> pts =
        s.cs.dim() == 1 ? grid_points(1) : std::vector<Vec>{v2(1.0, -0.5), v2(-2.0, 1.5), v2(0.0, 0.0), v2(3.0, 3.0)};
    double worst = 0.0;
    for (double tau : {0.0, 0.5, 1.0})
      for (const Vec& xi : pts) {
        const Certificate c = verify_conjugacy(s.cs, tau, xi, t_grid, kConjTol);
        worst = std::max({worst, c.values.at("residual_H"), c.values.at("residual_G")});
      }
    pass = pass && worst <= kConjTol;
    detail += s.g.id + " " + fmt(worst) + " ";
  }
  return {pass, detail + "(tol " + fmt(kConjTol) + ")"};
}

Outcome c4_picard() {
  bool pass = true;
  double worst_diff = 0.0, worst_ratio_margin = std::numeric_limits<double>::infinity();
  for (const Sys& s : systems()) {
    const double bound = s.cs.constants().contraction() + kRatioSlack;
    const int n = s.cs.dim();
    std::vector<std::pair<double, Vec>> cases;
    const auto ball = ball_points(n, 10, 3.0, 99);
    for (int k = 0; k < 10; ++k) cases.emplace_back(0.5 * (k + 1), ball[static_cast<std::size_t>(k)]);
    for (const auto& [tau, xi] : cases) {
      const PicardRun run = z_star_picard(s.cs, tau, xi);
      const double d = (run.result.value - z_star_ivp(s.cs, tau, xi).value).norm();
      worst_diff = std::max(worst_diff, d);
      const auto r = run.ratios();
      for (std::size_t j = 2; j < r.size(); ++j)
        if (!std::isnan(r[j])) worst_ratio_margin = std::min(worst_ratio_margin, bound - r[j]);
    }
  }
  pass = worst_diff <= kPicardTol && worst_ratio_margin >= 0.0;
  return {pass, "max |picard - ivp| " + fmt(worst_diff) + " (tol " + fmt(kPicardTol) +
                    "), min ratio margin " + fmt(worst_ratio_margin)};
}

Outcome c5_jacobian() {
  SmoothnessOptions so;
  so.mismatch_tol = std::numeric_limits<double>::infinity();
  so.det_floor = -std::numeric_limits<double>::infinity();
  double direct = 0, fd = 0, ident = 0, min_det = std::numeric_limits<double>::infinity();
  for (const Sys& s : systems()) {
    const int n = s.cs.dim();
    const std::vector<Vec> pts = n == 1 ? std::vector<Vec>{v1(-2.0), v1(0.5), v1(3.0)}
                                        : std::vector<Vec>{v2(1.0, -0.5), v2(-2.0, 1.5), v2(0.3, 2.2)};
    for (double t : {0.5, 2.0, 5.0})
      for (const Vec& p : pts) {
        const DerivativeBundle g = jacobian_G(s.cs, t, p, so);
        const DerivativeBundle h = jacobian_H(s.cs, t, p, so);
        direct = std::max(direct, g.cross_check.machine_vs_direct);
        fd = std::max(fd, g.cross_check.fd_error);
        ident = std::max(ident, h.cross_check.identity_error);
        min_det = std::min(min_det, g.cross_check.det);
      }
  }
  const bool pass = direct <= kMachineDirectTol && fd <= kJacobianFdTol && min_det > 0.0 && ident <= kIdentityTol;
  return {pass, "machine-vs-direct " + fmt(direct) + ", DG-vs-FD " + fmt(fd) + ", min det " + fmt(min_det) +
                    ", |DH DG - I| " + fmt(ident)};
}

Outcome c6_hessian() {
  SmoothnessOptions so;
  so.hessian_fd_tol = std::numeric_limits<double>::infinity();
  double fd = 0, zero = 0, sym = 0;
  for (const Sys& s : systems()) {
    const int n = s.cs.dim();
    const std::vector<Vec> pts = n == 1 ? std::vector<Vec>{v1(1.0), v1(-2.0)} : std::vector<Vec>{v2(0.4, -0.7), v2(-1.5, 1.0)};
    for (double t : {1.0, 3.0})
      for (const Vec& p : pts) {
        const DerivativeBundle g = hessian_G(s.cs, t, p, so);
        sym = std::max(sym, g.cross_check.symmetry_error);
        if (s.g.id == "G1")
          zero = std::max(zero, max_abs(g.hessian));
        else
          fd = std::max(fd, g.cross_check.fd_error);
      }
  }
  const bool pass = fd <= kHessianFdTol && zero <= kZeroHessianTol && sym <= kSymmetryTol;
  return {pass, "D2G-vs-FD " + fmt(fd) + " (G2, G3), |D2G| on G1 " + fmt(zero) + ", symmetry " + fmt(sym)};
}

Outcome c7_bounds() {
  bool pass = true;
  std::string failed;
  int count = 0;
  for (const Sys& s : systems()) {
    const int n = s.cs.dim();
    std::vector<Certificate> certs;
    const auto g = check_gronwall(s.cs, default_pair_samples(n, 5.0));
    certs.push_back(g.cor);
    certs.push_back(g.prop);
    certs.push_back(g.eq400);
    for (double tau : {0.5, 1.0, 2.0})
      for (const Vec& xi : ball_points(n, 3, 3.0, 17)) certs.push_back(check_zj_bounds(s.cs, tau, xi, 5));
    std::vector<std::pair<Vec, Vec>> pairs;
    const auto ball = ball_points(n, 20, 1.0, 31);
    for (std::size_t k = 0; k + 1 < ball.size(); k += 2) pairs.emplace_back(ball[k], ball[k + 1]);
    certs.push_back(modulus_check(s.cs, uniform_grid(0.0, 5.0, 5), pairs, kEps));
    for (const Certificate& c : certs) {
      ++count;
      if (!c.pass) {
        pass = false;
        failed += s.g.id + ":" + c.id + " margin " + fmt(c.worst_margin) + " at (";
        for (std::size_t i = 0; i < c.witness.size(); ++i) failed += (i ? ", " : "") + fmt(c.witness[i]);
        failed += ") ";
      }
    }
  }
  return {pass, std::to_string(count) + " certificates" + (failed.empty() ? ", all margins >= -1e-9*scale"
                                                                          : "; failed: " + failed)};
}

Outcome c8_formulas() {
  const double th0 = eval_theta0(2.0, 1.0, 0.25, 1.0, 1.0);
  const double th = eval_theta(2.0, 1.0, 0.25, 1.0, 1.0);
  const double L = critical_time_g(0.1, {1.0, 1.0, 1.0, 0.25, 0.0}, 2.0).time;
  const double d = delta_second_term(0.1, 0.5, 0.25);
  const double e = std::max({std::abs(th0 - 0.5), std::abs(th - std::exp(0.5)), std::abs(L - std::log(10.0)),
                             std::abs(d - 0.075)});
  return {e <= kFormulaTol, "theta0(2)=" + fmt(th0) + ", theta(2)=" + fmt(th) + ", L(0.1)=" + fmt(L) +
                                ", delta term=" + fmt(d) + ", max error " + fmt(e)};
}

Outcome c9_audit() {
  bool pass = true;
  std::string detail;
  for (const Sys& s : systems()) {
    const AuditReport a = audit_hypotheses(s.g.sys, s.g.pert);
    const bool ok = a.passed() && a.smallness();
    pass = pass && ok;
    detail += s.g.id + (ok ? " pass, " : " FAIL, ");
  }
  const cli::Report x1 = cli::execute(cli::parse_config("[system]\ngallery = X1\n[task]\nname = audit\n"));
  const int code = x1.exit_code();
  pass = pass && code == 1;
  detail += "X1 exit " + std::to_string(code) + ", ";
  const GallerySystem g1 = load_gallery("G1");
  const auto p4 = audit_hypotheses(g1.sys, Perturbation::from_dsl(1, {"0.2*tanh(x1)"})).get("P4").status;
  pass = pass && p4 == ProbeStatus::ProbeInconclusive;
  detail += std::string("tanh P4 ") + to_string(p4);
  return {pass, detail};
}

Outcome c10_ode() {
  IvpProblem p;
  p.field = [](double, const Vec& x) -> Vec { return -x; };
  p.state0 = v1(1.0);
  p.t1 = 1.0;
  const double exact = std::exp(-1.0);
  const double e1 = std::abs(integrate_ivp(p, IntegratorOptions::rk4(0.1)).end_state()[0] - exact);
  const double e2 = std::abs(integrate_ivp(p, IntegratorOptions::rk4(0.05)).end_state()[0] - exact);
  const double factor = e1 / e2;

  const IntegratorOptions opts = IntegratorOptions::rk45(1e-9);
  IvpProblem q;
  q.field = [](double t, const Vec& x) -> Vec {
    Vec d(2);
    d << x[1], -x[0] + 0.3 * std::cos(t) * x[1];
    return d;
  };
  q.state0 = v2(1.0, -0.5);
  q.t1 = 5.0;
  IvpProblem back = q;
  back.t0 = 5.0;
  back.t1 = 0.0;
  back.state0 = integrate_ivp(q, opts).end_state();
  const double rev = (integrate_ivp(back, opts).end_state() - q.state0).norm();
  const double rev_tol = 10.0 * (opts.abs_tol + opts.rel_tol * q.state0.norm());
  return {factor >= kOrderFactor && rev <= rev_tol,
          "RK4 halving factor " + fmt(factor) + " (>= 8), reverse error " + fmt(rev) + " (tol " + fmt(rev_tol) + ")"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 oracle equivalence (G1)", c1_oracle},
      {"2 inverse identity", c2_inverse},
      {"3 conjugacy identity", c3_conjugacy},
      {"4 Picard/IVP agreement", c4_picard},
      {"5 Jacobian identity", c5_jacobian},
      {"6 Hessian", c6_hessian},
      {"7 bound certificates", c7_bounds},
      {"8 constant formulas", c8_formulas},
      {"9 audit behavior", c9_audit},
      {"10 ODE layer", c10_ode},
  };
  int failures = 0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d of %zu criteria passed in %.1fs\n", static_cast<int>(criteria.size()) - failures, criteria.size(),
              total);
  return failures == 0 ? 0 : 1;
}
