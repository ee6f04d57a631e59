#pragma once
/**
 * @file bounds.hpp
 * @brief Explicit constants of the equivalence proof and grid certificates
 *        for the inequalities they enter.
 *
 *   theta0(t) = K gamma t                                  if alpha = M
 *             = K gamma (e^{(M-alpha)t} - 1) / (M - alpha)  otherwise
 *   theta(t)  = 1 + K gamma (e^{(M+gamma-alpha)t} - 1) / (M + gamma - alpha)
 *   L*(eps)   = ln(2 gamma omega K / (alpha eps)) / alpha,  Theta0* = theta0(L*)
 *   L(eps)    = ln(2 gamma beta K / (alpha eps)) / alpha,   theta*  = theta(L)
 *   delta_0(eps)     = eps / (2 Theta0*)
 *   delta_{j+1}(eps) = min{delta_j(eps/2), eps (1 - K gamma/alpha) / (2 Theta0*)}
 *
 * A logarithm argument <= 1 gives a critical time of 0. theta0 and theta are
 * nondecreasing, so their maxima over [0, L] sit at L.
 *
 * Certificate ids: "Prop-2.3", "Cor-2.4", "Eq-400", "Lemma-3.4",
 * "Lemma-3.5", "Thm-3.6".
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "topeq/certificate.hpp"
#include "topeq/conjugacy.hpp"

namespace topeq {

inline constexpr double kBranchTol = 1e-9;

/// (e^{r t} - 1) / r, with the limit t as r -> 0.
inline double expm1_ratio(double r, double t) {
  if (std::abs(r) <= kBranchTol) return t;
  return std::expm1(r * t) / r;
}

inline double eval_theta0(double t, double K, double gamma, double alpha, double M) {
  if (std::abs(alpha - M) <= kBranchTol) return K * gamma * t;
  return K * gamma * (std::exp((M - alpha) * t) - 1.0) / (M - alpha);
}

inline double eval_theta(double t, double K, double gamma, double alpha, double M) {
  const double r = M + gamma - alpha;
  if (std::abs(r) <= kBranchTol) return 1.0 + K * gamma * t;
  return 1.0 + K * gamma * (std::exp(r * t) - 1.0) / r;
}

struct CriticalTime {
  double time = 0.0;       // L* or L
  double max_value = 0.0;  // Theta0* or theta*
};

/// ln(2 gamma w K / (alpha eps)) / alpha, or 0 when the argument is <= 1.
inline double critical_length(double eps, double K, double gamma, double alpha, double w) {
  if (!(eps > 0)) throw Error("critical time needs eps > 0");
  const double arg = 2.0 * gamma * w * K / (alpha * eps);
  return arg > 1.0 ? std::log(arg) / alpha : 0.0;
}

/// (L*, Theta0*) for the z_j modulus, from omega.
inline CriticalTime critical_time_z(double eps, const Constants& c, double omega) {
  const double L = critical_length(eps, c.K, c.gamma, c.alpha, omega);
  return {L, eval_theta0(L, c.K, c.gamma, c.alpha, c.M)};
}

/// (L, theta*) for the G modulus, from beta.
inline CriticalTime critical_time_g(double eps, const Constants& c, double beta) {
  const double L = critical_length(eps, c.K, c.gamma, c.alpha, beta);
  return {L, eval_theta(L, c.K, c.gamma, c.alpha, c.M)};
}

/// delta_j(eps) with Theta0* depending on eps.
inline double delta_recursion(double eps, int j, const std::function<double(double)>& theta0_star,
                              double contraction) {
  if (j < 0) throw Error("delta_recursion needs j >= 0");
  if (!(contraction < 1.0)) throw Error("delta_recursion needs K*gamma/alpha < 1");
  const double th = theta0_star(eps);
  if (j == 0) return eps / (2.0 * th);
  return std::min(delta_recursion(eps / 2.0, j - 1, theta0_star, contraction),
                  eps / (2.0 * th) * (1.0 - contraction));
}

inline double delta_recursion(double eps, int j, double theta0_star, double contraction) {
  return delta_recursion(eps, j, [theta0_star](double) { return theta0_star; }, contraction);
}

/// The second argument of the min in the delta recursion.
inline double delta_second_term(double eps, double theta0_star, double contraction) {
  return eps / (2.0 * theta0_star) * (1.0 - contraction);
}

struct ConstantSheet {
  Constants c;
  double omega = 0.0;
  double beta = 0.0;

  double theta0(double t) const { return eval_theta0(t, c.K, c.gamma, c.alpha, c.M); }
  double theta(double t) const { return eval_theta(t, c.K, c.gamma, c.alpha, c.M); }
  double Lstar(double eps) const { return critical_time_z(eps, c, omega).time; }
  double L(double eps) const { return critical_time_g(eps, c, beta).time; }
  double Theta0star(double eps) const { return critical_time_z(eps, c, omega).max_value; }
  double thetastar(double eps) const { return critical_time_g(eps, c, beta).max_value; }
  double delta(double eps, int j) const {
    return delta_recursion(eps, j, [this](double e) { return Theta0star(e); }, c.contraction());
  }
};

// ------------------------------------------------------------------ samples

struct PairSample {
  double t, s;
  Vec p, q;
};

/// Pairs (t, s), t > s, from a uniform lattice of [0, T], each with two
/// seeded points in the ball of the given radius, plus one coincident pair.
inline std::vector<PairSample> default_pair_samples(int n, double horizon, int lattice = 5, double radius = 3.0,
                                                    std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  auto ball = [&] {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return Vec(v.normalized() * radius * std::pow(unif(rng), 1.0 / n));
  };
  std::vector<PairSample> out;
  for (const auto& [t, s] : default_pair_grid(horizon, lattice))
    if (t > s) out.push_back({t, s, ball(), ball()});
  const Vec same = ball();
  out.push_back({horizon, 0.0, same, same});
  return out;
}

/// Points uniformly in the ball of the given radius (seeded).
inline std::vector<Vec> ball_points(int n, int count, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  std::vector<Vec> out;
  for (int k = 0; k < count; ++k) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    out.push_back(v.normalized() * radius * std::pow(unif(rng), 1.0 / n));
  }
  return out;
}

namespace detail {
inline std::vector<double> witness(std::initializer_list<double> head, const Vec& p, const Vec& q) {
  std::vector<double> w(head);
  w.insert(w.end(), p.data(), p.data() + p.size());
  w.insert(w.end(), q.data(), q.data() + q.size());
  return w;
}
}  // namespace detail

// ------------------------------------------------------------------ Gronwall-type bounds

struct GronwallCertificates {
  Certificate prop;   // two-sided bound on |y(t,s,p) - y(t,s,q)|, t >= s
  Certificate cor;    // e^{-M|t-s|} sandwich for the linear flow, both orientations
  Certificate eq400;  // |y(s,t,p) - y(s,t,q)| <= |p-q| e^{(M+gamma)(t-s)}
};

inline GronwallCertificates check_gronwall(const CoupledSystem& cs, const std::vector<PairSample>& samples) {
  const Constants& c = cs.constants();
  const double T = cs.horizon();
  CertificateBuilder prop("Prop-2.3", "(1/K)|p-q|e^{(-alpha+K gamma)(t-s)} <= |y(t,s,p)-y(t,s,q)| <= "
                                      "K|p-q|e^{(alpha-K gamma)(t-s)}, t >= s", T);
  CertificateBuilder cor("Cor-2.4", "|p-q|e^{-M|t-s|} <= |x(t,s,p)-x(t,s,q)| <= |p-q|e^{M|t-s|}", T);
  CertificateBuilder e400("Eq-400", "|y(s,t,p)-y(s,t,q)| <= |p-q|e^{(M+gamma)(t-s)}, 0 <= s <= t", T);
  const std::string grid = std::to_string(samples.size()) + " (t, s, p, q) samples on [0, " + format_g(T) + "]";
  for (auto* b : {&prop, &cor, &e400}) {
    b->grid(grid);
    b->outside_theorem(cs.outside_theorem());
    b->value("K", c.K);
    b->value("alpha", c.alpha);
    b->value("M", c.M);
    b->value("gamma", c.gamma);
  }
  for (const auto& smp : samples) {
    if (smp.t < smp.s) throw Error("Gronwall samples need t >= s");
    const double d0 = (smp.p - smp.q).norm();
    const double dt = smp.t - smp.s;
    const auto w = detail::witness({smp.t, smp.s}, smp.p, smp.q);

    const double fwd = (nonlinear_solution(cs, smp.t, smp.s, smp.p) - nonlinear_solution(cs, smp.t, smp.s, smp.q)).norm();
    prop.check(d0 / c.K * std::exp((-c.alpha + c.K * c.gamma) * dt), fwd, w);
    prop.check(fwd, c.K * d0 * std::exp((c.alpha - c.K * c.gamma) * dt), w);

    for (const auto& [a, b] : {std::pair{smp.t, smp.s}, std::pair{smp.s, smp.t}}) {
      const double lin = (cs.lin().linear_solution(a, b, smp.p) - cs.lin().linear_solution(a, b, smp.q)).norm();
      cor.check(d0 * std::exp(-c.M * std::abs(a - b)), lin, w);
      cor.check(lin, d0 * std::exp(c.M * std::abs(a - b)), w);
    }

    const double back = (nonlinear_solution(cs, smp.s, smp.t, smp.p) - nonlinear_solution(cs, smp.s, smp.t, smp.q)).norm();
    e400.check(back, d0 * std::exp((c.M + c.gamma) * dt), w);
  }
  return {prop.finish(), cor.finish(), e400.finish()};
}

// ------------------------------------------------------------------ Picard iterate bounds

/// |z_j(s)| <= (K/alpha)(gamma |x + z_{j-1}|_inf + mu) on [0, tau], z_{-1} = 0.
inline Certificate check_zj_bounds(const CoupledSystem& cs, double tau, const Vec& xi, int j_max) {
  const Constants& c = cs.constants();
  CertificateBuilder cb("Lemma-3.4", "|z_j(s)| <= (K/alpha)(gamma |x + z_{j-1}|_inf + mu)", cs.horizon());
  cb.outside_theorem(cs.outside_theorem());
  const PicardRun run = picard_iterates(cs, tau, xi, j_max, 0.0);
  cb.grid("tau=" + format_g(tau) + ", j <= " + std::to_string(run.iterates.size() - 1) + ", " +
          std::to_string(run.grid.size()) + " nodes plus midpoints");
  cb.value("mu", c.mu);
  cb.value("gamma", c.gamma);
  for (std::size_t j = 0; j < run.iterates.size(); ++j) {
    const double sup_prev = run.sup_x_plus_z(static_cast<int>(j) - 1);
    const double rhs = c.K / c.alpha * (c.gamma * sup_prev + c.mu);
    for (std::size_t k = 0; k < run.grid.size(); ++k) {
      cb.check(run.iterates[j].z[k].norm(), rhs, {static_cast<double>(j), run.grid[k]});
      if (k + 1 < run.grid.size()) {
        const double mid = 0.5 * (run.grid[k] + run.grid[k + 1]);
        cb.check(run.z_at(j, mid).norm(), rhs, {static_cast<double>(j), mid});
      }
    }
  }
  return cb.finish();
}

/// Modulus of xi -> z_j(t;(t,xi)):
///   |D_0(t)|     <= Theta0* |xi - xi_bar|                           (+ eps/2 if t > L*)
///   |D_{j+1}(t)| <= Theta0* |xi - xi_bar| + (K gamma/alpha) S_j(t)   (+ eps/2 if t > L*)
/// with D_j(t) = z_j(t;(t,xi)) - z_j(t;(t,xi_bar)), S_j(t) the sup over
/// s in [0, t] of |z_j(s;(t,xi)) - z_j(s;(t,xi_bar))|, and omega(t) the max
/// over j <= j_max of sup_s |x + z_j| summed over both points.
inline Certificate check_zj_modulus(const CoupledSystem& cs, const std::vector<double>& t_grid,
                                    const std::vector<std::pair<Vec, Vec>>& pairs, double eps, int j_max) {
  const Constants& c = cs.constants();
  CertificateBuilder cb("Lemma-3.5", "uniform continuity modulus of z_j(t;(t,xi)) in xi", cs.horizon());
  cb.outside_theorem(cs.outside_theorem());
  cb.grid(std::to_string(pairs.size()) + " pairs, t in " + detail::describe_grid(t_grid) + ", j <= " +
          std::to_string(j_max));
  cb.value("eps", eps);
  for (const auto& [p, q] : pairs) {
    const double d0 = (p - q).norm();
    for (double t : t_grid) {
      const PicardRun a = picard_iterates(cs, t, p, j_max, 0.0);
      const PicardRun b = picard_iterates(cs, t, q, j_max, 0.0);
      const std::size_t jn = std::min(a.iterates.size(), b.iterates.size());
      double omega = 0.0;
      for (std::size_t j = 0; j < jn; ++j)
        omega = std::max(omega, a.sup_x_plus_z(static_cast<int>(j)) + b.sup_x_plus_z(static_cast<int>(j)));
      const CriticalTime ct = critical_time_z(eps, c, omega);
      cb.value_max("omega", omega);
      cb.value_max("Lstar", ct.time);
      cb.value_max("Theta0star", ct.max_value);
      const double tail = t > ct.time ? eps / 2.0 : 0.0;
      double s_prev = 0.0;
      for (std::size_t j = 0; j < jn; ++j) {
        const double lhs = (a.endpoints[j] - b.endpoints[j]).norm();
        const double rhs = ct.max_value * d0 + (j == 0 ? 0.0 : c.contraction() * s_prev) + tail;
        cb.check(lhs, rhs, detail::witness({t, static_cast<double>(j)}, p, q));
        double sj = 0.0;
        for (std::size_t k = 0; k < a.grid.size(); ++k) {
          sj = std::max(sj, (a.iterates[j].z[k] - b.iterates[j].z[k]).norm());
          if (k + 1 < a.grid.size()) {
            const double mid = 0.5 * (a.grid[k] + a.grid[k + 1]);
            sj = std::max(sj, (a.z_at(j, mid) - b.z_at(j, mid)).norm());
          }
        }
        s_prev = sj;
      }
    }
  }
  return cb.finish();
}

/// |G(t,p) - G(t,q)| <= theta* |p - q| (+ eps/2 when t > L), with
/// beta(t) = sup_{s in [0,t]} |y(s,t,p)| + |y(s,t,q)| and L = L(eps; beta).
inline Certificate modulus_check(const CoupledSystem& cs, const std::vector<double>& t_grid,
                                 const std::vector<std::pair<Vec, Vec>>& pairs, double eps) {
  const Constants& c = cs.constants();
  CertificateBuilder cb("Thm-3.6", "uniform continuity modulus of G(t, .)", cs.horizon());
  cb.outside_theorem(cs.outside_theorem());
  cb.grid(std::to_string(pairs.size()) + " pairs, t in " + detail::describe_grid(t_grid));
  cb.value("eps", eps);
  for (const auto& [p, q] : pairs) {
    const double d0 = (p - q).norm();
    for (double t : t_grid) {
      double beta;
      if (t == 0.0)
        beta = p.norm() + q.norm();
      else
        beta = nonlinear_trajectory(cs, t, p, 0.0).sup_norm() + nonlinear_trajectory(cs, t, q, 0.0).sup_norm();
      const CriticalTime ct = critical_time_g(eps, c, beta);
      cb.value_max("beta", beta);
      cb.value_max("L", ct.time);
      cb.value_max("thetastar", ct.max_value);
      const double lhs = (map_G(cs, t, p).value - map_G(cs, t, q).value).norm();
      const double rhs = ct.max_value * d0 + (t > ct.time ? eps / 2.0 : 0.0);
      cb.check(lhs, rhs, detail::witness({t}, p, q));
    }
  }
  return cb.finish();
}

}  // namespace topeq
