#pragma once
/**
 * @file cli.hpp
 * @brief Command-line driver: config -> system -> task -> report.
 *
 * Flags: --config PATH (required), --task NAME, --out DIR, --tol X
 * (overrides tol_conj and tol_inv), --unsafe-skip-smallness, --seed N.
 *
 * Exit codes: 0 pass or outside-theorem, 1 certificate failure,
 * 2 usage/config/parse error, 3 numerical failure.
 *
 * CSV tables per task (columns are append-only):
 *   audit     audit:     hypothesis, status, value
 *   map       map:       t, p1..pn, H1..Hn, G1..Gn, GH_residual, HG_residual
 *   verify    verify:    tau, xi1..xin, residual_H, residual_G, picard_ivp
 *   jacobian  jacobian:  t, p1..pn, det, machine_vs_direct, fd_error_G, fd_error_H, identity_error
 *   hessian   hessian:   t, p1..pn, fd_error_G, fd_error_H, symmetry_G, symmetry_H
 *   bounds    theta:     t, theta0, theta
 *   sweep     sweep:     gamma, K_gamma_over_alpha, conj_residual, inv_residual,
 *                        value, alpha, smallness_margin, outside_theorem
 */

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "topeq/audit.hpp"
#include "topeq/bounds.hpp"
#include "topeq/cli/config.hpp"
#include "topeq/cli/report.hpp"
#include "topeq/conjugacy.hpp"
#include "topeq/gallery.hpp"
#include "topeq/smoothness.hpp"

namespace topeq::cli {

/// Resolved system with the constants every downstream task uses.
struct ResolvedSystem {
  std::optional<GallerySystem> gallery;
  LinearSystem sys;
  Perturbation pert;
  Constants constants;
  std::string source;  // declared, estimated or mixed
};

struct Overrides {
  std::optional<std::string> task, out;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  bool unsafe = false;
};

namespace detail {

inline Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

inline void push_vec(std::vector<Cell>& row, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.emplace_back(v[i]);
}

inline std::vector<std::string> indexed(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

inline void append(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }

template <class F>
auto with_entry(const std::string& what, const std::string& text, F&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ConfigError(what + " = \"" + text + "\": " + e.what());
  }
}

}  // namespace detail

inline ResolvedSystem resolve_system(const SystemSpec& spec, std::uint64_t seed) {
  ResolvedSystem r;
  std::optional<double> K = spec.K, alpha = spec.alpha, M = spec.M, gamma = spec.gamma, mu = spec.mu;
  if (spec.gallery) {
    GallerySystem g = load_gallery(*spec.gallery, spec.horizon);
    r.sys = g.sys;
    r.pert = g.pert;
    K = K.value_or(g.declared.K);
    alpha = alpha.value_or(g.declared.alpha);
    M = M.value_or(g.declared.M);
    gamma = gamma.value_or(g.declared.gamma);
    mu = mu.value_or(g.declared.mu);
    r.gallery = std::move(g);
  } else {
    const int n = spec.n;
    std::vector<std::string> A;
    for (int k = 0; k < n * n; ++k) {
      const std::string key = "A" + std::to_string(k / n + 1) + std::to_string(k % n + 1);
      detail::with_entry(key, spec.A[k], [&] { return dsl::parse_expr(spec.A[k], 0); });
    }
    for (int i = 0; i < n; ++i)
      detail::with_entry("f" + std::to_string(i + 1), spec.f[i], [&] { return dsl::parse_expr(spec.f[i], n); });
    r.sys = LinearSystem::from_dsl(n, spec.A, spec.horizon);
    r.pert = Perturbation::from_dsl(n, spec.f, gamma, mu);
  }

  const int declared = K.has_value() + alpha.has_value() + M.has_value() + gamma.has_value() + mu.has_value();
  r.source = declared == 5 ? "declared" : declared == 0 ? "estimated" : "mixed";
  if (declared < 5) {
    const LinearFlow flow(r.sys);
    const auto t_grid = uniform_grid(0.0, r.sys.horizon, 200);
    if (!K || !alpha) {
      const DichotomyEstimate d = flow.estimate_dichotomy(default_pair_grid(r.sys.horizon, 10));
      K = K.value_or(d.K_hat);
      alpha = alpha.value_or(d.alpha_hat);
    }
    if (!M) M = flow.estimate_bound_M(t_grid);
    if (!gamma) gamma = estimate_lipschitz(r.pert, {10.0, r.sys.horizon}, 2000, seed);
    if (!mu) mu = estimate_mu(r.pert, t_grid);
  }
  r.constants = {*K, *alpha, *M, *gamma, *mu};
  return r;
}

inline json constants_json(const ResolvedSystem& r) {
  json j;
  j["K"] = r.constants.K;
  j["alpha"] = r.constants.alpha;
  j["M"] = r.constants.M;
  j["gamma"] = r.constants.gamma;
  j["mu"] = r.constants.mu;
  j["source"] = r.source;
  j["smallness_margin"] = r.constants.alpha - r.constants.K * r.constants.gamma;
  j["contraction"] = r.constants.contraction();
  return j;
}

inline json config_json(const RunConfig& cfg, const Overrides& ov) {
  json j = json::object();
  for (const auto& [name, sec] : cfg.raw) {
    json s = json::object();
    for (const auto& [k, v] : sec) s[k] = v;
    j[name] = s;
  }
  json o = json::object();
  if (ov.task) o["task"] = *ov.task;
  if (ov.out) o["out"] = *ov.out;
  if (ov.tol) o["tol"] = *ov.tol;
  if (ov.seed) o["seed"] = *ov.seed;
  if (ov.unsafe) o["unsafe_skip_smallness"] = true;
  j["overrides"] = o;
  return j;
}

/// Points from points/xi, or the default lattice {-3,-1,0,1,3} (scalar) /
/// five seeded points in the radius-3 ball.
inline std::vector<Vec> task_points(const TaskSpec& t, int n) {
  std::vector<Vec> out;
  if (t.points)
    for (const auto& p : *t.points) out.push_back(detail::to_vec(p));
  else if (t.xi)
    out.push_back(detail::to_vec(*t.xi));
  else if (n == 1)
    for (double v : {-3.0, -1.0, 0.0, 1.0, 3.0}) out.push_back(Vec::Constant(1, v));
  else
    out = ball_points(n, 5, 3.0, t.seed);
  for (const Vec& p : out)
    if (p.size() != n) throw ConfigError("point of dimension " + std::to_string(p.size()) + ", system has n = " + std::to_string(n));
  return out;
}

inline std::vector<double> task_times(const TaskSpec& t, double T) {
  std::vector<double> g = t.t_grid ? *t.t_grid : t.t ? std::vector<double>{*t.t} : uniform_grid(0.0, T, 10);
  for (double v : g)
    if (v < 0.0 || v > T) throw OutOfSpan(v, 0.0, T);
  return g;
}

inline std::vector<double> task_taus(const TaskSpec& t, double T) {
  std::vector<double> g = t.tau ? std::vector<double>{*t.tau} : std::vector<double>{0.0, 0.5, 1.0};
  for (double v : g)
    if (v < 0.0 || v > T) throw OutOfSpan(v, 0.0, T);
  return g;
}

inline ConjugacyOptions task_options(const TaskSpec& t) {
  ConjugacyOptions o;
  if (t.tol_conj) o.tol_conj = *t.tol_conj;
  if (t.tol_inv) o.tol_inv = *t.tol_inv;
  if (t.tol_picard) o.tol_picard = *t.tol_picard;
  o.j_max = t.j_max;
  return o;
}

inline Certificate smallness_certificate(const Constants& c, double horizon) {
  CertificateBuilder cb("smallness", "K gamma < alpha", horizon);
  cb.grid("constants");
  cb.value("K_gamma", c.K * c.gamma);
  cb.value("alpha", c.alpha);
  cb.check(c.K * c.gamma, c.alpha, {c.K * c.gamma, c.alpha});
  Certificate cert = cb.finish();
  cert.pass = c.K * c.gamma < c.alpha;
  return cert;
}

// ------------------------------------------------------------------ tasks

inline void task_audit(const ResolvedSystem& rs, const RunConfig& cfg, Report& rep) {
  AuditOptions ao;
  ao.seed = cfg.task.seed;
  ao.declared_K = rs.constants.K;
  ao.declared_alpha = rs.constants.alpha;
  ao.declared_M = rs.constants.M;
  const AuditReport a = audit_hypotheses(rs.sys, rs.pert, ao);
  Table tab{"audit", {"hypothesis", "status", "value"}, {}};
  json est;
  est["K"] = a.estimated.K;
  est["alpha"] = a.estimated.alpha;
  est["M"] = a.estimated.M;
  est["gamma"] = a.estimated.gamma;
  est["mu"] = a.estimated.mu;
  est["smallness_margin"] = a.smallness_margin;
  rep.details["estimated"] = est;
  for (const auto& r : a.records) {
    Certificate c;
    c.id = r.id;
    c.description = std::string(to_string(r.status)) + (r.detail.empty() ? "" : ": " + r.detail);
    c.grid = "sampled";
    c.samples = 1;
    c.horizon = rs.sys.horizon;
    c.witness = r.witness;
    c.values["value"] = r.value;
    c.pass = r.status != ProbeStatus::Violated;
    c.worst_margin = r.id == "smallness" ? a.smallness_margin : (c.pass ? 0.0 : -1.0);
    rep.certificates.push_back(c);
    tab.rows.push_back({r.id, std::string(to_string(r.status)), r.value});
  }
  rep.tables.push_back(std::move(tab));
  for (const auto& w : a.warnings) rep.warnings.push_back(w);
}

inline void task_map(const CoupledSystem& cs, const RunConfig& cfg, Report& rep) {
  const int n = cs.dim();
  const MapMethod method = cfg.task.method == "picard" ? MapMethod::Picard : MapMethod::Ivp;
  std::vector<Vec> pts = task_points(cfg.task, n);
  for (const Vec& p : ball_points(n, cfg.task.random_points, cfg.task.radius.value_or(5.0), cfg.task.seed)) pts.push_back(p);
  Table tab{"map", {"t"}, {}};
  detail::append(tab.columns, detail::indexed("p", n));
  detail::append(tab.columns, detail::indexed("H", n));
  detail::append(tab.columns, detail::indexed("G", n));
  detail::append(tab.columns, {"GH_residual", "HG_residual"});
  for (double t : task_times(cfg.task, cs.horizon())) {
    for (const Vec& p : pts) {
      const Vec h = map_H(cs, t, p, method).value;
      const Vec g = map_G(cs, t, p).value;
      std::vector<Cell> row{t};
      detail::push_vec(row, p);
      detail::push_vec(row, h);
      detail::push_vec(row, g);
      row.emplace_back((map_G(cs, t, h).value - p).norm());
      row.emplace_back((map_H(cs, t, g, method).value - p).norm());
      tab.rows.push_back(std::move(row));
    }
    rep.certificates.push_back(verify_inverse(cs, t, pts));
  }
  rep.details["method"] = to_string(method);
  rep.tables.push_back(std::move(tab));
}

inline void task_verify(const CoupledSystem& cs, const RunConfig& cfg, Report& rep) {
  const int n = cs.dim();
  const auto pts = task_points(cfg.task, n);
  const auto t_grid = task_times(cfg.task, cs.horizon());
  Table tab{"verify", {"tau"}, {}};
  detail::append(tab.columns, detail::indexed("xi", n));
  detail::append(tab.columns, {"residual_H", "residual_G", "picard_ivp"});
  CertificateBuilder pic("Picard-IVP", "|z*_picard - z*_ivp| <= 1e-6", cs.horizon());
  pic.grid(std::to_string(pts.size()) + " points per tau");
  pic.outside_theorem(cs.outside_theorem());
  for (double tau : task_taus(cfg.task, cs.horizon())) {
    for (const Vec& xi : pts) {
      const Certificate c = verify_conjugacy(cs, tau, xi, t_grid);
      const double d = (z_star_picard(cs, tau, xi).result.value - z_star_ivp(cs, tau, xi).value).norm();
      std::vector<double> w{tau};
      w.insert(w.end(), xi.data(), xi.data() + n);
      pic.check(d, 1e-6, w);
      std::vector<Cell> row{tau};
      detail::push_vec(row, xi);
      row.emplace_back(c.values.at("residual_H"));
      row.emplace_back(c.values.at("residual_G"));
      row.emplace_back(d);
      tab.rows.push_back(std::move(row));
      rep.certificates.push_back(c);
    }
    rep.certificates.push_back(verify_inverse(cs, tau, pts));
  }
  rep.certificates.push_back(pic.finish());
  rep.tables.push_back(std::move(tab));
}

inline void task_jacobian(const CoupledSystem& cs, const RunConfig& cfg, Report& rep) {
  const int n = cs.dim();
  SmoothnessOptions so;
  so.mismatch_tol = std::numeric_limits<double>::infinity();
  so.det_floor = -std::numeric_limits<double>::infinity();
  const double T = cs.horizon();
  CertificateBuilder direct("DG-direct", "machine vs direct DG <= 1e-5", T);
  CertificateBuilder fd("DG-FD", "DG vs central FD <= 1e-5 relative", T);
  CertificateBuilder det("DG-det", "det DG > 0", T);
  CertificateBuilder ident("DH-DG-identity", "DH DG(image) = I within 1e-8", T);
  for (auto* b : {&direct, &fd, &det, &ident}) b->outside_theorem(cs.outside_theorem());
  Table tab{"jacobian", {"t"}, {}};
  detail::append(tab.columns, detail::indexed("p", n));
  detail::append(tab.columns, {"det", "machine_vs_direct", "fd_error_G", "fd_error_H", "identity_error"});
  const auto pts = task_points(cfg.task, n);
  for (double t : task_times(cfg.task, T))
    for (const Vec& p : pts) {
      const DerivativeBundle g = jacobian_G(cs, t, p, so);
      const DerivativeBundle h = jacobian_H(cs, t, p, so);
      std::vector<double> w{t};
      w.insert(w.end(), p.data(), p.data() + n);
      direct.check(g.cross_check.machine_vs_direct, 1e-5, w);
      fd.check(g.cross_check.fd_error, 1e-5, w);
      det.check(0.0, g.cross_check.det, w);
      ident.check(h.cross_check.identity_error, 1e-8, w);
      std::vector<Cell> row{t};
      detail::push_vec(row, p);
      for (double v : {g.cross_check.det, g.cross_check.machine_vs_direct, g.cross_check.fd_error,
                       h.cross_check.fd_error, h.cross_check.identity_error})
        row.emplace_back(v);
      tab.rows.push_back(std::move(row));
    }
  for (auto* b : {&direct, &fd, &det, &ident}) {
    Certificate c = b->finish();
    if (c.id == "DG-det") c.pass = c.worst_margin > 0.0;
    rep.certificates.push_back(c);
  }
  rep.tables.push_back(std::move(tab));
}

inline void task_hessian(const CoupledSystem& cs, const RunConfig& cfg, Report& rep) {
  const int n = cs.dim();
  SmoothnessOptions so;
  so.hessian_fd_tol = std::numeric_limits<double>::infinity();
  const double T = cs.horizon();
  CertificateBuilder fdg("D2G-FD", "D2G vs second central FD <= 1e-3 relative", T);
  CertificateBuilder fdh("D2H-FD", "D2H vs second central FD <= 1e-3 relative", T);
  CertificateBuilder sym("D2-symmetry", "trailing-index symmetry of D2G and D2H within 1e-8", T);
  for (auto* b : {&fdg, &fdh, &sym}) b->outside_theorem(cs.outside_theorem());
  Table tab{"hessian", {"t"}, {}};
  detail::append(tab.columns, detail::indexed("p", n));
  detail::append(tab.columns, {"fd_error_G", "fd_error_H", "symmetry_G", "symmetry_H"});
  const auto pts = task_points(cfg.task, n);
  for (double t : task_times(cfg.task, T))
    for (const Vec& p : pts) {
      const DerivativeBundle g = hessian_G(cs, t, p, so);
      const DerivativeBundle h = hessian_H(cs, t, p, so);
      std::vector<double> w{t};
      w.insert(w.end(), p.data(), p.data() + n);
      fdg.check(g.cross_check.fd_error, 1e-3, w);
      fdh.check(h.cross_check.fd_error, 1e-3, w);
      sym.check(std::max(g.cross_check.symmetry_error, h.cross_check.symmetry_error), 1e-8, w);
      std::vector<Cell> row{t};
      detail::push_vec(row, p);
      for (double v : {g.cross_check.fd_error, h.cross_check.fd_error, g.cross_check.symmetry_error,
                       h.cross_check.symmetry_error})
        row.emplace_back(v);
      tab.rows.push_back(std::move(row));
    }
  for (auto* b : {&fdg, &fdh, &sym}) rep.certificates.push_back(b->finish());
  rep.tables.push_back(std::move(tab));
}

inline void task_bounds(const CoupledSystem& cs, const RunConfig& cfg, Report& rep) {
  const int n = cs.dim();
  const double T = cs.horizon();
  const double eps = cfg.task.eps.value_or(0.1);
  const int j_bounds = std::min(cfg.task.j_max, 5);
  const auto g = check_gronwall(cs, default_pair_samples(n, T, 5, 3.0, cfg.task.seed));
  rep.certificates.push_back(g.prop);
  rep.certificates.push_back(g.cor);
  rep.certificates.push_back(g.eq400);
  const auto pts = task_points(cfg.task, n);
  for (double tau : task_taus(cfg.task, T))
    for (const Vec& xi : pts) rep.certificates.push_back(check_zj_bounds(cs, tau, xi, j_bounds));

  std::vector<std::pair<Vec, Vec>> pairs;
  const auto ball = ball_points(n, 6, 3.0, cfg.task.seed + 1);
  for (std::size_t k = 0; k + 1 < ball.size(); k += 2) pairs.emplace_back(ball[k], ball[k + 1]);
  const std::vector<double> t_grid = cfg.task.t_grid ? task_times(cfg.task, T) : uniform_grid(0.0, T, 5);
  const Certificate zm = check_zj_modulus(cs, t_grid, pairs, eps, j_bounds);
  const Certificate gm = modulus_check(cs, t_grid, pairs, eps);
  rep.certificates.push_back(zm);
  rep.certificates.push_back(gm);

  ConstantSheet sheet{cs.constants(), zm.values.count("omega") ? zm.values.at("omega") : 0.0,
                      gm.values.count("beta") ? gm.values.at("beta") : 0.0};
  json sj;
  sj["eps"] = eps;
  sj["omega"] = sheet.omega;
  sj["beta"] = sheet.beta;
  sj["Lstar"] = sheet.Lstar(eps);
  sj["Theta0star"] = sheet.Theta0star(eps);
  sj["L"] = sheet.L(eps);
  sj["thetastar"] = sheet.thetastar(eps);
  if (cs.constants().smallness()) {
    json d = json::array();
    for (int j = 0; j <= 3; ++j) d.push_back(sheet.delta(eps, j));
    sj["delta"] = d;
  }
  rep.details["constant_sheet"] = sj;
  Table tab{"theta", {"t", "theta0", "theta"}, {}};
  for (double t : uniform_grid(0.0, T, 20)) tab.rows.push_back({t, sheet.theta0(t), sheet.theta(t)});
  rep.tables.push_back(std::move(tab));
}

inline void task_sweep(const ResolvedSystem& rs, const RunConfig& cfg, Report& rep) {
  const int n = rs.sys.n;
  Table tab{"sweep",
            {"gamma", "K_gamma_over_alpha", "conj_residual", "inv_residual", "value", "alpha", "smallness_margin",
             "outside_theorem"},
            {}};
  json rows = json::array();
  for (double v : *cfg.task.values) {
    if (!std::isfinite(v) || v <= 0) throw ConfigError("sweep values must be positive and finite");
    LinearSystem sys = rs.sys;
    Perturbation pert = rs.pert;
    Constants c = rs.constants;
    switch (cfg.task.sweep) {
      case SweepParameter::GammaScale:
        pert = pert.scaled(v);
        c.gamma *= v;
        c.mu *= v;
        break;
      case SweepParameter::AlphaScale:
        sys = sys.scaled(v);
        c.alpha *= v;
        c.M *= v;
        break;
      case SweepParameter::Horizon: sys.horizon = v; break;
    }
    const bool outside = !c.smallness();
    const CoupledSystem cs =
        CoupledSystem::make(std::make_shared<const LinearFlow>(sys), pert, c, task_options(cfg.task), true);
    const double T = cs.horizon();
    const double tau = std::min(cfg.task.tau.value_or(1.0), T);
    const std::vector<double> t_grid = uniform_grid(0.0, T, 5);
    const auto pts = task_points(cfg.task, n);
    double conj = 0.0;
    std::vector<Certificate> certs;
    for (const Vec& xi : pts) {
      certs.push_back(verify_conjugacy(cs, tau, xi, t_grid));
      conj = std::max({conj, certs.back().values.at("residual_H"), certs.back().values.at("residual_G")});
    }
    certs.push_back(verify_inverse(cs, tau, pts));
    const double inv = certs.back().values.at("residual");
    tab.rows.push_back({c.gamma, c.contraction(), conj, inv, v, c.alpha, c.alpha - c.K * c.gamma,
                        outside ? 1.0 : 0.0});
    json r;
    r["value"] = v;
    r["outside_theorem"] = outside;
    json ids = json::array();
    for (auto& cert : certs) {
      ids.push_back(cert.id + (cert.pass ? ": pass" : ": fail"));
      if (!outside) rep.certificates.push_back(std::move(cert));
    }
    r["certificates"] = ids;
    rows.push_back(r);
    if (outside) rep.outside_theorem = true;
  }
  rep.details["sweep"] = to_string(cfg.task.sweep);
  rep.details["rows"] = rows;
  rep.tables.push_back(std::move(tab));
}

// ------------------------------------------------------------------ driver

inline const char* error_type(const std::exception& e) {
  if (dynamic_cast<const UnknownIdentifier*>(&e)) return "UnknownIdentifier";
  if (dynamic_cast<const DimensionError*>(&e)) return "DimensionError";
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const UnknownGalleryId*>(&e)) return "UnknownGalleryId";
  if (dynamic_cast<const OutOfSpan*>(&e)) return "OutOfSpan";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  if (dynamic_cast<const StepLimitExceeded*>(&e)) return "StepLimitExceeded";
  if (dynamic_cast<const NonFiniteState*>(&e)) return "NonFiniteState";
  if (dynamic_cast<const EvalError*>(&e)) return "EvalError";
  if (dynamic_cast<const NotContractive*>(&e)) return "NotContractive";
  if (dynamic_cast<const NoConvergence*>(&e)) return "NoConvergence";
  if (dynamic_cast<const DerivativeMismatch*>(&e)) return "DerivativeMismatch";
  if (dynamic_cast<const SingularJacobian*>(&e)) return "SingularJacobian";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  if (dynamic_cast<const NonDifferentiable*>(&e)) return "NonDifferentiable";
  if (dynamic_cast<const OracleUnavailable*>(&e)) return "OracleUnavailable";
  return "Error";
}

inline ErrorKind error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const UnknownGalleryId*>(&e) || dynamic_cast<const OutOfSpan*>(&e) ||
      dynamic_cast<const IoError*>(&e))
    return ErrorKind::Usage;
  return ErrorKind::Numerical;
}

/// Runs one task on a parsed config. Errors land in the report.
inline Report execute(RunConfig cfg, const Overrides& ov = {}) {
  Report rep;
  if (ov.task) cfg.task.kind = parse_task(*ov.task);
  if (ov.out) cfg.output.dir = *ov.out;
  if (ov.seed) cfg.task.seed = *ov.seed;
  if (ov.tol) {
    if (!(*ov.tol > 0)) throw ConfigError("--tol must be positive");
    cfg.task.tol_conj = cfg.task.tol_inv = *ov.tol;
  }
  rep.config = config_json(cfg, ov);
  rep.details["task"] = to_string(cfg.task.kind);
  try {
    const ResolvedSystem rs = resolve_system(cfg.system, cfg.task.seed);
    rep.constants = constants_json(rs);
    if (cfg.task.kind == TaskKind::Audit) {
      task_audit(rs, cfg, rep);
    } else if (cfg.task.kind == TaskKind::Sweep) {
      task_sweep(rs, cfg, rep);
    } else {
      if (!rs.constants.smallness() && !ov.unsafe) {
        rep.certificates.push_back(smallness_certificate(rs.constants, rs.sys.horizon));
        return rep;
      }
      const CoupledSystem cs = CoupledSystem::make(std::make_shared<const LinearFlow>(rs.sys), rs.pert, rs.constants,
                                                   task_options(cfg.task), ov.unsafe);
      rep.outside_theorem = cs.outside_theorem();
      switch (cfg.task.kind) {
        case TaskKind::Map: task_map(cs, cfg, rep); break;
        case TaskKind::Verify: task_verify(cs, cfg, rep); break;
        case TaskKind::Jacobian: task_jacobian(cs, cfg, rep); break;
        case TaskKind::Hessian: task_hessian(cs, cfg, rep); break;
        case TaskKind::Bounds: task_bounds(cs, cfg, rep); break;
        default: break;
      }
    }
  } catch (const Error& e) {
    rep.error = ReportError{error_kind(e), error_type(e), e.what()};
  }
  return rep;
}

/// Entry point. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const auto start = std::chrono::steady_clock::now();
  CLI::App app{"topeq: numerical topological equivalence of linear and perturbed nonautonomous systems"};
  std::string config_path, task;
  std::string out_dir;
  double tol = 0.0;
  std::uint64_t seed = 0;
  bool unsafe = false;
  app.add_option("--config", config_path, "config file")->required();
  auto* task_opt = app.add_option("--task", task, "task override");
  auto* out_opt = app.add_option("--out", out_dir, "output directory override");
  auto* tol_opt = app.add_option("--tol", tol, "tolerance override for conjugacy and inverse checks");
  auto* seed_opt = app.add_option("--seed", seed, "sampling seed");
  app.add_flag("--unsafe-skip-smallness", unsafe, "run tasks even when K gamma >= alpha");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  Overrides ov;
  if (*task_opt) ov.task = task;
  if (*out_opt) ov.out = out_dir;
  if (*tol_opt) ov.tol = tol;
  if (*seed_opt) ov.seed = seed;
  ov.unsafe = unsafe;

  Report rep;
  std::string dir = ov.out.value_or("");
  bool json_out = true, csv_out = true;
  try {
    RunConfig cfg = load_config(config_path);
    if (!ov.out) dir = cfg.output.dir;
    json_out = cfg.output.json;
    csv_out = cfg.output.csv;
    rep = execute(std::move(cfg), ov);
  } catch (const Error& e) {
    rep.error = ReportError{error_kind(e), error_type(e), e.what()};
  }

  if (rep.error) err << "error (" << rep.error->type << "): " << rep.error->message << "\n";
  if (!dir.empty()) {
    try {
      write_report(rep, dir, json_out, csv_out);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      write_metadata(dir, secs);
    } catch (const IoError& e) {
      err << "error (IoError): " << e.what() << "\n";
      return rep.error ? rep.exit_code() : 2;
    }
  }
  out << "status: " << rep.status() << "\n";
  for (const auto& c : rep.certificates)
    if (!c.pass) out << "failed: " << c.id << " (worst margin " << format_g(c.worst_margin) << ")\n";
  return rep.exit_code();
}

}  // namespace topeq::cli
