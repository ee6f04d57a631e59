#pragma once
/**
 * @file conjugacy.hpp
 * @brief The equivalence maps between x' = A(t)x and y' = A(t)y + f(t,y).
 *
 *     H(t, xi)  = xi  + z*(t; (t, xi)),
 *     G(t, eta) = eta + w*(t; (t, eta)) = eta - int_0^t Phi(t,s) f(s, y(s,t,eta)) ds,
 *
 * where z*(.; (tau, xi)) solves z' = A z + f(t, x(t,tau,xi) + z), z(0) = 0,
 * and w* solves w' = A w - f(t, y(t,tau,eta)), w(0) = 0.
 *
 * Two independent routes to z* are provided. The primary one integrates the
 * IVP above once (x first backward to 0, then (x, z) forward). The second
 * one runs the Picard recursion
 *
 *     z_{j+1}(r) = int_0^r Phi(r,s) f(s, x(s) + z_j(s)) ds,   z_{-1} = 0,
 *
 * on a uniform grid of [0, tau], with Phi(r,s) = X(r) X(s)^{-1} taken from a
 * dense fundamental matrix X(r) = Phi(r, 0) and each panel integral done by
 * adaptive Simpson. Iterates are represented by cubic Hermite interpolation
 * using z_j' = A z_j + f(., x + z_{j-1}).
 *
 * All constructions live on the truncated horizon [0, T].
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "topeq/certificate.hpp"
#include "topeq/linear_flow.hpp"
#include "topeq/ode.hpp"
#include "topeq/perturbation.hpp"
#include "topeq/quadrature.hpp"

namespace topeq {

struct Constants {
  double K = 1.0;
  double alpha = 1.0;
  double M = 1.0;
  double gamma = 0.0;
  double mu = 0.0;

  double contraction() const { return K * gamma / alpha; }
  bool smallness() const { return K * gamma < alpha; }
};

struct ConjugacyOptions {
  IntegratorOptions ivp = IntegratorOptions::rk45(1e-11, 0.05);
  IntegratorOptions fundamental = IntegratorOptions::rk45(1e-12, 0.01);
  double tol_conj = 1e-5;
  double tol_inv = 1e-6;
  double tol_picard = 1e-8;
  int j_max = 60;
  double picard_grid_step = 0.01;
};

class CoupledSystem {
 public:
  /// Refuses construction when K*gamma >= alpha unless `unsafe` is set, in
  /// which case every result derived from it is marked outside-theorem.
  static CoupledSystem make(std::shared_ptr<const LinearFlow> lin, Perturbation pert, Constants c,
                            ConjugacyOptions opts = {}, bool unsafe = false) {
    if (!lin) throw Error("coupled system needs a linear flow");
    if (pert.n != lin->dim()) throw Error("dimension mismatch between A(t) and f");
    const bool small = c.smallness();
    if (!small && !unsafe) throw SmallnessViolation(c.K * c.gamma, c.alpha);
    CoupledSystem cs;
    cs.lin_ = std::move(lin);
    cs.pert_ = std::make_shared<const Perturbation>(std::move(pert));
    cs.c_ = c;
    cs.opts_ = opts;
    cs.outside_ = !small;
    cs.fundamental_ = std::make_shared<const Trajectory>(cs.integrate_fundamental());
    return cs;
  }

  const LinearFlow& lin() const { return *lin_; }
  std::shared_ptr<const LinearFlow> lin_ptr() const { return lin_; }
  const Perturbation& pert() const { return *pert_; }
  const Constants& constants() const { return c_; }
  const ConjugacyOptions& options() const { return opts_; }
  bool outside_theorem() const { return outside_; }
  int dim() const { return lin_->dim(); }
  double horizon() const { return lin_->horizon(); }

  Mat A(double t) const { return lin_->A(t); }
  Vec f(double t, const Vec& x) const { return pert_->f(t, x); }

  /// X(r) = Phi(r, 0) from the dense fundamental solution.
  Mat fundamental(double r) const {
    const int n = dim();
    return unflatten(fundamental_->eval(std::clamp(r, 0.0, horizon())), n, n);
  }

  /// Phi(t, s) through the fundamental solution (used inside quadratures).
  Mat phi_dense(double t, double s) const {
    return fundamental(t) * fundamental(s).partialPivLu().inverse();
  }

  CoupledSystem with_integrator(const IntegratorOptions& ivp) const {
    CoupledSystem cs = *this;
    cs.opts_.ivp = ivp;
    return cs;
  }
  CoupledSystem with_options(const ConjugacyOptions& o) const {
    CoupledSystem cs = *this;
    cs.opts_ = o;
    return cs;
  }

 private:
  CoupledSystem() = default;

  Trajectory integrate_fundamental() const {
    const int n = dim();
    IvpProblem p;
    p.field = [this, n](double r, const Vec& u) { return flatten(lin_->A(r) * unflatten(u, n, n)); };
    p.t0 = 0.0;
    p.t1 = horizon();
    p.state0 = flatten(Mat::Identity(n, n));
    return integrate_ivp(p, opts_.fundamental);
  }

  std::shared_ptr<const LinearFlow> lin_;
  std::shared_ptr<const Perturbation> pert_;
  Constants c_;
  ConjugacyOptions opts_;
  bool outside_ = false;
  std::shared_ptr<const Trajectory> fundamental_;
};

enum class MapMethod { Ivp, Picard };

inline const char* to_string(MapMethod m) { return m == MapMethod::Ivp ? "ivp" : "picard"; }

struct ConjugacyResult {
  Vec value;
  MapMethod method = MapMethod::Ivp;
  int iterations = 0;
  /// picard: last sup-norm increment; ivp: largest local error estimate.
  double residual = 0.0;
  bool outside_theorem = false;
};

// ------------------------------------------------------------------ solutions

/// Trajectory of y' = A y + f(t, y) through (t, eta), integrated to s.
inline Trajectory nonlinear_trajectory(const CoupledSystem& cs, double t, const Vec& eta, double s) {
  IvpProblem p;
  p.field = [&cs](double r, const Vec& y) -> Vec { return cs.A(r) * y + cs.f(r, y); };
  p.t0 = t;
  p.t1 = s;
  p.state0 = eta;
  return integrate_ivp(p, cs.options().ivp);
}

/// y(s, t, eta).
inline Vec nonlinear_solution(const CoupledSystem& cs, double s, double t, const Vec& eta) {
  if (s == t) return eta;
  return nonlinear_trajectory(cs, t, eta, s).end_state();
}

/// Trajectory of x' = A x through (t, xi), integrated to s.
inline Trajectory linear_trajectory(const CoupledSystem& cs, double t, const Vec& xi, double s) {
  IvpProblem p;
  p.field = [&cs](double r, const Vec& x) -> Vec { return cs.A(r) * x; };
  p.t0 = t;
  p.t1 = s;
  p.state0 = xi;
  return integrate_ivp(p, cs.options().ivp);
}

// ------------------------------------------------------------------ z*, H

inline ConjugacyResult z_star_ivp(const CoupledSystem& cs, double tau, const Vec& xi) {
  const int n = cs.dim();
  ConjugacyResult res;
  res.outside_theorem = cs.outside_theorem();
  if (tau == 0.0) {
    res.value = Vec::Zero(n);
    return res;
  }
  const Trajectory back = linear_trajectory(cs, tau, xi, 0.0);
  IvpProblem p;
  p.field = [&cs, n](double r, const Vec& u) -> Vec {
    const Mat a = cs.A(r);
    Vec out(2 * n);
    out.head(n) = a * u.head(n);
    out.tail(n) = a * u.tail(n) + cs.f(r, u.head(n) + u.tail(n));
    return out;
  };
  p.t0 = 0.0;
  p.t1 = tau;
  p.state0 = Vec::Zero(2 * n);
  p.state0.head(n) = back.end_state();
  const Trajectory fwd = integrate_ivp(p, cs.options().ivp);
  res.value = fwd.end_state().tail(n);
  res.residual = back.stats().max_error_estimate + fwd.stats().max_error_estimate;
  return res;
}

/// Picard iterates of z* on a uniform grid of [0, tau].
struct PicardRun {
  double tau = 0.0;
  Vec xi;
  std::vector<double> grid;
  std::vector<Vec> x, dx;  // x(r) = x(r, tau, xi) and its derivative on the grid

  struct Iterate {
    std::vector<Vec> z, dz;
  };
  std::vector<Iterate> iterates;
  /// z_j(tau) for j = 0, 1, ...
  std::vector<Vec> endpoints;
  /// increments[0] = sup|z_0|, increments[j] = sup|z_j - z_{j-1}| (grid sup).
  std::vector<double> increments;
  bool converged = false;
  ConjugacyResult result;

  /// increments[j] / increments[j-1] for j >= 2 (index j; entries 0,1 are NaN).
  std::vector<double> ratios() const {
    std::vector<double> r(increments.size(), std::nan(""));
    for (std::size_t j = 2; j < increments.size(); ++j)
      if (increments[j - 1] > 0) r[j] = increments[j] / increments[j - 1];
    return r;
  }

  static Vec hermite(const std::vector<double>& g, const std::vector<Vec>& v, const std::vector<Vec>& d,
                     double s) {
    if (g.size() == 1) return v.front();
    const double h = g[1] - g[0];
    const auto last = g.size() - 2;
    auto k = static_cast<std::size_t>(std::clamp(std::floor((s - g[0]) / h), 0.0, static_cast<double>(last)));
    const double hk = g[k + 1] - g[k];
    const double u = (s - g[k]) / hk;
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * v[k] + ((u3 - 2 * u2 + u) * hk) * d[k] + (-2 * u3 + 3 * u2) * v[k + 1] +
           ((u3 - u2) * hk) * d[k + 1];
  }

  Vec z_at(std::size_t j, double s) const { return hermite(grid, iterates[j].z, iterates[j].dz, s); }
  Vec x_at(double s) const { return hermite(grid, x, dx, s); }

  /// Grid sup (nodes and midpoints) of |z_j|.
  double sup_z(std::size_t j) const {
    return sup_over([&](double s) { return z_at(j, s).norm(); });
  }
  /// Grid sup of |x + z_j|; j < 0 means |x| alone.
  double sup_x_plus_z(int j) const {
    return sup_over([&](double s) {
      return j < 0 ? x_at(s).norm() : (x_at(s) + z_at(static_cast<std::size_t>(j), s)).norm();
    });
  }

 private:
  template <typename F>
  double sup_over(F&& g) const {
    double m = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      m = std::max(m, g(grid[k]));
      if (k + 1 < grid.size()) m = std::max(m, g(0.5 * (grid[k] + grid[k + 1])));
    }
    return m;
  }
};

/// Runs the recursion up to j_max or until the sup-norm increment drops to
/// tol (tol = 0 runs all j_max + 1 iterates). Quadrature accuracy follows
/// the larger of tol and options().tol_picard, relative to max(1, sup|x|).
/// Never throws on non-convergence; see z_star_picard.
inline PicardRun picard_iterates(const CoupledSystem& cs, double tau, const Vec& xi, int j_max, double tol) {
  const int n = cs.dim();
  PicardRun run;
  run.tau = tau;
  run.xi = xi;
  run.result.method = MapMethod::Picard;
  run.result.outside_theorem = cs.outside_theorem();

  if (tau == 0.0) {
    run.grid = {0.0};
    run.x = {xi};
    run.dx = {cs.A(0.0) * xi};
    run.iterates.push_back({{Vec::Zero(n)}, {cs.f(0.0, xi)}});
    run.endpoints.push_back(Vec::Zero(n));
    run.increments.push_back(0.0);
    run.converged = true;
    run.result.value = Vec::Zero(n);
    return run;
  }

  const int N = std::max(1, static_cast<int>(std::ceil(tau / cs.options().picard_grid_step - 1e-9)));
  run.grid = uniform_grid(0.0, tau, N);
  const Vec c = cs.fundamental(tau).partialPivLu().solve(xi);
  auto x_of = [&](double s) -> Vec { return cs.fundamental(s) * c; };
  for (double r : run.grid) {
    run.x.push_back(x_of(r));
    run.dx.push_back(cs.A(r) * run.x.back());
  }

  double scale = 1.0;
  for (const Vec& v : run.x) scale = std::max(scale, v.norm());
  const double panel_tol = 0.25 * std::max(tol, cs.options().tol_picard) * scale / N;
  PicardRun::Iterate prev{std::vector<Vec>(run.grid.size(), Vec::Zero(n)),
                          std::vector<Vec>(run.grid.size(), Vec::Zero(n))};

  for (int j = 0; j <= j_max; ++j) {
    auto integrand = [&](double s) -> Vec {
      const Vec zprev = PicardRun::hermite(run.grid, prev.z, prev.dz, s);
      const Mat xs = cs.fundamental(s);
      return xs.partialPivLu().solve(cs.f(s, xs * c + zprev));
    };
    PicardRun::Iterate cur;
    cur.z.reserve(run.grid.size());
    cur.dz.reserve(run.grid.size());
    Vec acc = Vec::Zero(n);
    for (std::size_t k = 0; k < run.grid.size(); ++k) {
      if (k > 0) acc += adaptive_simpson(integrand, run.grid[k - 1], run.grid[k], panel_tol);
      const double r = run.grid[k];
      Vec z = k == 0 ? Vec::Zero(n) : Vec(cs.fundamental(r) * acc);
      cur.dz.push_back(cs.A(r) * z + cs.f(r, run.x[k] + prev.z[k]));
      cur.z.push_back(std::move(z));
    }
    double inc = 0.0;
    for (std::size_t k = 0; k < run.grid.size(); ++k) inc = std::max(inc, (cur.z[k] - prev.z[k]).norm());
    run.endpoints.push_back(cur.z.back());
    run.increments.push_back(inc);
    run.iterates.push_back(cur);
    prev = std::move(cur);
    if (j >= 1 && inc <= tol) {
      run.converged = true;
      break;
    }
  }
  run.result.value = run.endpoints.back();
  run.result.iterations = static_cast<int>(run.endpoints.size());
  run.result.residual = run.increments.back();
  return run;
}

/// Picard fixed point; throws NoConvergence when j_max is reached first.
inline PicardRun z_star_picard(const CoupledSystem& cs, double tau, const Vec& xi, int j_max, double tol) {
  PicardRun run = picard_iterates(cs, tau, xi, j_max, tol);
  if (!run.converged) throw NoConvergence(j_max, run.increments.back());
  return run;
}

inline PicardRun z_star_picard(const CoupledSystem& cs, double tau, const Vec& xi) {
  return z_star_picard(cs, tau, xi, cs.options().j_max, cs.options().tol_picard);
}

inline ConjugacyResult map_H(const CoupledSystem& cs, double t, const Vec& xi, MapMethod method = MapMethod::Ivp) {
  ConjugacyResult r = method == MapMethod::Ivp ? z_star_ivp(cs, t, xi) : z_star_picard(cs, t, xi).result;
  r.value += xi;
  return r;
}

// ------------------------------------------------------------------ w*, G

inline ConjugacyResult w_star(const CoupledSystem& cs, double t, const Vec& eta) {
  const int n = cs.dim();
  ConjugacyResult res;
  res.outside_theorem = cs.outside_theorem();
  if (t == 0.0) {
    res.value = Vec::Zero(n);
    return res;
  }
  const Trajectory back = nonlinear_trajectory(cs, t, eta, 0.0);
  IvpProblem p;
  p.field = [&cs, n](double r, const Vec& u) -> Vec {
    const Mat a = cs.A(r);
    const Vec fy = cs.f(r, u.head(n));
    Vec out(2 * n);
    out.head(n) = a * u.head(n) + fy;
    out.tail(n) = a * u.tail(n) - fy;
    return out;
  };
  p.t0 = 0.0;
  p.t1 = t;
  p.state0 = Vec::Zero(2 * n);
  p.state0.head(n) = back.end_state();
  const Trajectory fwd = integrate_ivp(p, cs.options().ivp);
  res.value = fwd.end_state().tail(n);
  res.residual = back.stats().max_error_estimate + fwd.stats().max_error_estimate;
  return res;
}

inline ConjugacyResult map_G(const CoupledSystem& cs, double t, const Vec& eta) {
  ConjugacyResult r = w_star(cs, t, eta);
  r.value += eta;
  return r;
}

// ------------------------------------------------------------------ verification

namespace detail {
inline std::string describe_grid(const std::vector<double>& g) {
  std::string s = "{";
  for (std::size_t i = 0; i < g.size(); ++i) s += (i ? ", " : "") + format_g(g[i]);
  return s + "}";
}
}  // namespace detail

/// Residuals of H[t, x(t,tau,xi)] = y(t, tau, H(tau,xi)) and
/// G[t, y(t,tau,xi)] = Phi(t,tau) G(tau,xi) over t_grid.
inline Certificate verify_conjugacy(const CoupledSystem& cs, double tau, const Vec& xi,
                                    const std::vector<double>& t_grid, double tol = -1) {
  if (tol <= 0) tol = cs.options().tol_conj;
  CertificateBuilder cb("Def-3.1(i)", "solution-mapping residuals of H and G", cs.horizon());
  cb.grid("tau=" + format_g(tau) + ", t in " + detail::describe_grid(t_grid));
  cb.outside_theorem(cs.outside_theorem());
  cb.value("tol", tol);
  const Vec h_tau = map_H(cs, tau, xi).value;
  const Vec g_tau = map_G(cs, tau, xi).value;
  double worst_h = 0, worst_g = 0;
  for (double t : t_grid) {
    const Vec xt = cs.lin().linear_solution(t, tau, xi);
    const double rh = (map_H(cs, t, xt).value - nonlinear_solution(cs, t, tau, h_tau)).norm();
    const Vec yt = nonlinear_solution(cs, t, tau, xi);
    const double rg = (map_G(cs, t, yt).value - cs.lin().transition_matrix(t, tau) * g_tau).norm();
    worst_h = std::max(worst_h, rh);
    worst_g = std::max(worst_g, rg);
    cb.check(rh, tol, {t, tau, 0.0});
    cb.check(rg, tol, {t, tau, 1.0});
  }
  cb.value("residual_H", worst_h);
  cb.value("residual_G", worst_g);
  return cb.finish();
}

/// max over points of |G(t,H(t,p)) - p| and |H(t,G(t,p)) - p|.
inline Certificate verify_inverse(const CoupledSystem& cs, double t, const std::vector<Vec>& points,
                                  double tol = -1) {
  if (tol <= 0) tol = cs.options().tol_inv;
  CertificateBuilder cb("Def-3.1(iv)", "G(t,.) inverts H(t,.)", cs.horizon());
  cb.grid("t=" + format_g(t) + ", " + std::to_string(points.size()) + " points");
  cb.outside_theorem(cs.outside_theorem());
  cb.value("tol", tol);
  double worst = 0.0;
  for (const Vec& p : points) {
    const double a = (map_G(cs, t, map_H(cs, t, p).value).value - p).norm();
    const double b = (map_H(cs, t, map_G(cs, t, p).value).value - p).norm();
    worst = std::max({worst, a, b});
    std::vector<double> w{t};
    w.insert(w.end(), p.data(), p.data() + p.size());
    cb.check(a, tol, w);
    cb.check(b, tol, w);
  }
  cb.value("residual", worst);
  return cb.finish();
}

// ------------------------------------------------------------------ probes

struct GrowthRow {
  double radius;
  double norm_H, norm_G, norm_z;
};

struct GrowthTable {
  std::vector<GrowthRow> rows;
  ProbeStatus H = ProbeStatus::ProbeInconclusive;
  ProbeStatus G = ProbeStatus::ProbeInconclusive;
  ProbeStatus z = ProbeStatus::ProbeInconclusive;
};

inline bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

inline GrowthTable growth_probe(const CoupledSystem& cs, double t, const Vec& direction,
                                const std::vector<double>& radii) {
  if (radii.empty() || !strictly_increasing(radii)) throw Error("growth_probe radii must be strictly increasing");
  const Vec u = direction.normalized();
  GrowthTable table;
  std::vector<double> h, g, z;
  for (double r : radii) {
    const Vec p = r * u;
    const Vec zs = z_star_ivp(cs, t, p).value;
    const GrowthRow row{r, (p + zs).norm(), map_G(cs, t, p).value.norm(), zs.norm()};
    table.rows.push_back(row);
    h.push_back(row.norm_H);
    g.push_back(row.norm_G);
    z.push_back(row.norm_z);
  }
  auto verdict = [](const std::vector<double>& v) {
    return strictly_increasing(v) ? ProbeStatus::ProbePassed : ProbeStatus::ProbeInconclusive;
  };
  table.H = verdict(h);
  table.G = verdict(g);
  table.z = verdict(z);
  return table;
}

struct ContinuityRow {
  double delta, t;
  double diff_H, diff_G;
};

struct ContinuityTable {
  std::vector<ContinuityRow> rows;
  /// Log-log slope of the differences against delta (1 for Lipschitz maps).
  double slope_H = 0.0, slope_G = 0.0;
  ProbeStatus status = ProbeStatus::ProbeInconclusive;
};

namespace detail {
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  int m = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0 && y[i] > 0) {
      mx += std::log(x[i]);
      my += std::log(y[i]);
      ++m;
    }
  if (m < 2) return 0.0;
  mx /= m;
  my /= m;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0 && y[i] > 0) {
      sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
      sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
  return sxx > 0 ? sxy / sxx : 0.0;
}
}  // namespace detail

/// Joint perturbations (t0 +- delta/2, p0 + delta/2 e_1) of the base point.
/// Passes when the differences never grow as delta shrinks and end <= tol.
inline ContinuityTable continuity_probe(const CoupledSystem& cs, double t0, const Vec& p0,
                                        const std::vector<double>& deltas, double tol = 1e-6) {
  ContinuityTable table;
  const Vec h0 = map_H(cs, t0, p0).value;
  const Vec g0 = map_G(cs, t0, p0).value;
  Vec e1 = Vec::Zero(p0.size());
  e1[0] = 1.0;
  std::vector<double> ds, dh, dg;
  for (double d : deltas) {
    double t = t0 + 0.5 * d;
    if (t > cs.horizon()) t = t0 - 0.5 * d;
    const Vec p = p0 + 0.5 * d * e1;
    const ContinuityRow row{d, t, (map_H(cs, t, p).value - h0).norm(), (map_G(cs, t, p).value - g0).norm()};
    table.rows.push_back(row);
    ds.push_back(d);
    dh.push_back(row.diff_H);
    dg.push_back(row.diff_G);
  }
  table.slope_H = detail::loglog_slope(ds, dh);
  table.slope_G = detail::loglog_slope(ds, dg);
  bool monotone = true;
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const bool shrinking = ds[i] < ds[i - 1];
    if (shrinking && (dh[i] > dh[i - 1] || dg[i] > dg[i - 1])) monotone = false;
  }
  const bool small_end = !table.rows.empty() && dh.back() <= tol && dg.back() <= tol;
  table.status = monotone && small_end ? ProbeStatus::ProbePassed : ProbeStatus::ProbeInconclusive;
  return table;
}

}  // namespace topeq
