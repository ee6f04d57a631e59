#pragma once
/**
 * @file audit.hpp
 * @brief Sampled audit of the standing hypotheses on (A, f).
 *
 *   P1  ||Phi(t,s)|| <= K e^{-alpha(t-s)}        estimate_dichotomy on a pair grid
 *   P2  f Lipschitz with constant gamma          sampled gamma_hat
 *   P3  sup_t |f(t,0)| <= mu, f(., x) bounded     t-grid maxima
 *   P4  |f(t,x)| -> inf as |x| -> inf            ray probe
 *   P5  Df, D2f continuous                       symbolic vs finite differences
 *   N   |x(s,t,xi) + z_j(s;(t,xi))| -> inf       ray probe through Picard iterates
 *   smallness  K_hat gamma_hat < alpha_hat       strict comparison
 *
 * P4 and N are limit statements: a finite probe can pass or be inconclusive
 * but never certify them.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "topeq/certificate.hpp"
#include "topeq/conjugacy.hpp"
#include "topeq/linear_flow.hpp"
#include "topeq/perturbation.hpp"

namespace topeq {

struct HypothesisRecord {
  std::string id;
  ProbeStatus status = ProbeStatus::ProbeInconclusive;
  std::vector<double> witness;
  double value = 0.0;
  std::string detail;
};

struct AuditOptions {
  int pair_intervals = 10;
  int lipschitz_samples = 2000;
  SampleDomain domain{10.0, 0.0};  // horizon 0 means the system horizon
  std::uint64_t seed = 1;
  std::vector<double> ray_radii{10.0, 1e2, 1e3, 1e4};
  int derivative_points = 200;
  double derivative_tol = 1e-6;
  int n_probe_j_max = 5;
  /// Declared constants; used downstream and cross-checked against estimates.
  std::optional<double> declared_K, declared_alpha, declared_M;
};

struct AuditReport {
  std::vector<HypothesisRecord> records;
  Constants estimated;
  std::vector<std::string> warnings;
  DichotomyEstimate dichotomy;
  double smallness_margin = 0.0;  // alpha_hat - K_hat gamma_hat

  const HypothesisRecord& get(const std::string& id) const {
    for (const auto& r : records)
      if (r.id == id) return r;
    throw Error("no audit record " + id);
  }
  bool passed() const {
    return std::none_of(records.begin(), records.end(),
                        [](const HypothesisRecord& r) { return r.status == ProbeStatus::Violated; });
  }
  bool smallness() const { return get("smallness").status == ProbeStatus::CertifiedOnGrid; }
};

namespace detail {

/// Ray directions: +-e_i.
inline std::vector<Vec> ray_directions(int n) {
  std::vector<Vec> dirs;
  for (int i = 0; i < n; ++i)
    for (double sgn : {1.0, -1.0}) {
      Vec u = Vec::Zero(n);
      u[i] = sgn;
      dirs.push_back(u);
    }
  return dirs;
}

inline double rel_mismatch(const Vec& a, const Vec& b) {
  const double ref = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / ref;
}

inline void warn_mismatch(AuditReport& rep, const std::string& name, std::optional<double> declared, double est) {
  if (!declared) return;
  const double ref = std::max(std::abs(*declared), std::abs(est));
  if (ref > 0 && std::abs(*declared - est) >= 0.1 * ref)
    rep.warnings.push_back("declared " + name + "=" + format_g(*declared) + " differs from estimate " +
                           format_g(est) + " by 10% or more");
}

}  // namespace detail

inline AuditReport audit_hypotheses(const LinearSystem& sys, const Perturbation& p, const AuditOptions& opts = {}) {
  AuditReport rep;
  const int n = sys.n;
  const double T = sys.horizon;
  const LinearFlow flow(sys);
  const std::vector<double> t_grid = uniform_grid(0.0, T, 200);

  // P1 and M
  HypothesisRecord p1{"P1", ProbeStatus::CertifiedOnGrid, {}, 0.0, ""};
  rep.estimated.M = flow.estimate_bound_M(t_grid);
  try {
    rep.dichotomy = flow.estimate_dichotomy(default_pair_grid(T, opts.pair_intervals));
    rep.estimated.K = rep.dichotomy.K_hat;
    rep.estimated.alpha = rep.dichotomy.alpha_hat;
    p1.value = rep.dichotomy.residual;
    p1.detail = "K_hat=" + format_g(rep.estimated.K) + ", alpha_hat=" + format_g(rep.estimated.alpha);
  } catch (const NotContractive& e) {
    p1.status = ProbeStatus::Violated;
    p1.value = e.slope();
    p1.detail = e.what();
    rep.estimated.K = 1.0;
    rep.estimated.alpha = 0.0;
  }
  rep.records.push_back(p1);

  // P2
  SampleDomain dom = opts.domain;
  if (dom.horizon <= 0) dom.horizon = T;
  const LipschitzEstimate lip = estimate_lipschitz_detail(p, dom, opts.lipschitz_samples, opts.seed);
  rep.estimated.gamma = lip.gamma_hat;
  HypothesisRecord p2{"P2", std::isfinite(lip.gamma_hat) ? ProbeStatus::CertifiedOnGrid : ProbeStatus::Violated,
                      {}, lip.gamma_hat, "gamma_hat over " + std::to_string(opts.lipschitz_samples) + " samples"};
  p2.witness.push_back(lip.witness_t);
  if (lip.witness_x.size()) p2.witness.insert(p2.witness.end(), lip.witness_x.data(), lip.witness_x.data() + n);
  rep.records.push_back(p2);

  // P3
  rep.estimated.mu = estimate_mu(p, t_grid);
  HypothesisRecord p3{"P3", ProbeStatus::CertifiedOnGrid, {}, rep.estimated.mu, "mu_hat on a t-grid"};
  for (double t : t_grid)
    if (p.f(t, Vec::Zero(n)).norm() == rep.estimated.mu) {
      p3.witness = {t};
      break;
    }
  SampleStream fixed_x(n, dom, opts.seed + 1);
  for (int k = 0; k < 5; ++k) {
    const Vec x = fixed_x.next().x;
    double m = 0.0;
    for (double t : t_grid) m = std::max(m, p.f(t, x).norm());
    if (!std::isfinite(m)) p3.status = ProbeStatus::Violated;
  }
  if (!std::isfinite(rep.estimated.mu)) p3.status = ProbeStatus::Violated;
  rep.records.push_back(p3);

  // P4
  HypothesisRecord p4{"P4", ProbeStatus::ProbePassed, {}, 0.0, ""};
  double worst_growth = std::numeric_limits<double>::infinity();
  for (double t : {0.0, 0.5 * T, T})
    for (const Vec& u : detail::ray_directions(n)) {
      std::vector<double> vals;
      for (double r : opts.ray_radii) vals.push_back(p.f(t, r * u).norm());
      for (std::size_t k = 1; k < vals.size(); ++k) {
        const double growth = vals[k] - vals[k - 1];
        if (growth < worst_growth) {
          worst_growth = growth;
          p4.witness = {t, opts.ray_radii[k]};
          p4.witness.insert(p4.witness.end(), u.data(), u.data() + n);
          p4.value = vals[k];
        }
      }
      if (!strictly_increasing(vals)) p4.status = ProbeStatus::ProbeInconclusive;
    }
  p4.detail = p4.status == ProbeStatus::ProbePassed ? "|f| strictly increasing on every ray"
                                                    : "|f| stalls on a ray (plateau value recorded)";
  rep.records.push_back(p4);

  // P5
  HypothesisRecord p5{"P5", ProbeStatus::CertifiedOnGrid, {}, 0.0, ""};
  if (!p.symbolic) {
    p5.status = ProbeStatus::ProbeInconclusive;
    p5.detail = "no symbolic derivatives (" + p.derivative_note + ")";
  } else {
    SampleStream pts(n, dom, opts.seed + 2);
    for (int k = 0; k < opts.derivative_points; ++k) {
      const auto s = pts.next();
      const double h = 1e-5 * std::max(1.0, s.x.norm());
      const double e1 = detail::rel_mismatch(flatten(p.Df(s.t, s.x)), flatten(fd_jacobian(p.f, s.t, s.x, h)));
      const VecField df_flat = [&p](double t, const Vec& x) { return flatten(p.Df(t, x)); };
      // rows of the FD Jacobian of vec(Df) are (i, j), columns k: the (i; j, k) layout
      const double e2 = detail::rel_mismatch(p.D2f(s.t, s.x), flatten(fd_jacobian(df_flat, s.t, s.x, h)));
      const double e = std::max(e1, e2);
      if (e > p5.value) {
        p5.value = e;
        p5.witness = {s.t};
        p5.witness.insert(p5.witness.end(), s.x.data(), s.x.data() + n);
      }
    }
    if (p5.value > opts.derivative_tol) p5.status = ProbeStatus::Violated;
    p5.detail = "max relative FD mismatch of Df, D2f over " + std::to_string(opts.derivative_points) + " points";
  }
  rep.records.push_back(p5);

  // N
  HypothesisRecord nrec{"N", ProbeStatus::ProbePassed, {}, 0.0, ""};
  try {
    auto cs = CoupledSystem::make(std::make_shared<const LinearFlow>(sys), p,
                                  {std::max(rep.estimated.K, 1.0), std::max(rep.estimated.alpha, 1e-12),
                                   rep.estimated.M, rep.estimated.gamma, rep.estimated.mu},
                                  {}, true);
    const double t = std::min(1.0, T);
    for (const Vec& u : detail::ray_directions(n)) {
      std::vector<PicardRun> runs;
      for (double r : opts.ray_radii) runs.push_back(picard_iterates(cs, t, r * u, opts.n_probe_j_max, 0.0));
      for (int j = 0; j <= opts.n_probe_j_max; ++j)
        for (double s : {0.0, 0.5 * t, t}) {
          std::vector<double> vals;
          for (const auto& run : runs) {
            const auto jj = std::min<std::size_t>(static_cast<std::size_t>(j), run.iterates.size() - 1);
            vals.push_back((run.x_at(s) + run.z_at(jj, s)).norm());
          }
          if (!strictly_increasing(vals)) {
            nrec.status = ProbeStatus::ProbeInconclusive;
            nrec.witness = {static_cast<double>(j), s, t};
            nrec.value = vals.back();
          }
        }
    }
    nrec.detail = "|x + z_j| along rays, j <= " + std::to_string(opts.n_probe_j_max);
  } catch (const NumericalError& e) {
    nrec.status = ProbeStatus::ProbeInconclusive;
    nrec.detail = e.what();
  }
  rep.records.push_back(nrec);

  // smallness
  const double kg = rep.estimated.K * rep.estimated.gamma;
  rep.smallness_margin = rep.estimated.alpha - kg;
  HypothesisRecord sm{"smallness", kg < rep.estimated.alpha ? ProbeStatus::CertifiedOnGrid : ProbeStatus::Violated,
                      {kg, rep.estimated.alpha}, rep.smallness_margin,
                      "K_hat*gamma_hat=" + format_g(kg) + " vs alpha_hat=" + format_g(rep.estimated.alpha)};
  rep.records.push_back(sm);

  detail::warn_mismatch(rep, "K", opts.declared_K, rep.estimated.K);
  detail::warn_mismatch(rep, "alpha", opts.declared_alpha, rep.estimated.alpha);
  detail::warn_mismatch(rep, "M", opts.declared_M, rep.estimated.M);
  detail::warn_mismatch(rep, "gamma", p.gamma, rep.estimated.gamma);
  detail::warn_mismatch(rep, "mu", p.mu, rep.estimated.mu);
  return rep;
}

}  // namespace topeq
