#pragma once
/**
 * @file gallery.hpp
 * @brief Built-in systems with declared constants and closed-form oracles.
 *
 *   G1  scalar-linear       A = -1, f = 0.25 x
 *   G2  scalar-softplus     A = -1, f = 0.2 (sqrt(1 + x^2) + cos t)
 *   G3  planar-rotating     A = -I + 0.5 cos t [[0,1],[-1,0]],
 *                           f = 0.15 y + 0.1 (sin y2, sin y1)
 *   X1  smallness-violator  A = -1, f = 2 x
 *
 * Oracles of the scalar-linear family A = -1, f = c x (G1: c = 0.25, X1: c = 2):
 *
 *   Phi(t,s)      = e^{-(t-s)}
 *   x(s,t,xi)     = xi e^{-(s-t)}
 *   y(s,t,eta)    = eta e^{(c-1)(s-t)}
 *   z*(t;(t,xi))  = xi (e^{ct} - 1)
 *       z' = (c-1) z + c xi e^{t-s} with z(0) = 0 is solved by
 *       z(s) = xi e^{t-s} (e^{cs} - 1).
 *   H(t,xi)       = xi e^{ct}
 *   G(t,eta)      = eta - int_0^t e^{-(t-u)} c eta e^{(c-1)(u-t)} du = eta e^{-ct}
 *   DG(t,eta)     = e^{-ct}
 *
 * G3: every A(t) is a combination of I and the rotation generator S, so the
 * A(t) commute and Phi(t,s) = exp(int_s^t A) = e^{-(t-s)} R(0.5 (sin t - sin s))
 * with R(a) = [[cos a, sin a], [-sin a, cos a]]. Hence ||Phi(t,s)|| = e^{-(t-s)}.
 */

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "topeq/conjugacy.hpp"
#include "topeq/errors.hpp"
#include "topeq/linear_flow.hpp"
#include "topeq/perturbation.hpp"

namespace topeq {

enum class OracleKind { Phi, x, y, zstar, H, G, DG };

inline const char* to_string(OracleKind k) {
  switch (k) {
    case OracleKind::Phi: return "Phi";
    case OracleKind::x: return "x";
    case OracleKind::y: return "y";
    case OracleKind::zstar: return "zstar";
    case OracleKind::H: return "H";
    case OracleKind::G: return "G";
    case OracleKind::DG: return "DG";
  }
  return "?";
}

struct GallerySystem {
  std::string id;
  std::string name;
  LinearSystem sys;
  Perturbation pert;
  Constants declared;
  /// Coefficient c of the scalar-linear family; empty for other systems.
  std::optional<double> linear_c;

  bool has_oracle(OracleKind k) const {
    if (linear_c) return true;
    return id == "G3" && k == OracleKind::Phi;
  }
};

inline const std::vector<std::string>& gallery_ids() {
  static const std::vector<std::string> ids{"G1", "G2", "G3", "X1"};
  return ids;
}

namespace detail {
inline GallerySystem scalar_linear(const std::string& id, const std::string& name, double c, double horizon) {
  GallerySystem g;
  g.id = id;
  g.name = name;
  g.sys = LinearSystem::from_dsl(1, {"-1"}, horizon);
  g.pert = Perturbation::from_dsl(1, {dsl::detail::format_number(c) + "*x1"}, c, 0.0);
  g.declared = {1.0, 1.0, 1.0, c, 0.0};
  g.linear_c = c;
  return g;
}
}  // namespace detail

inline GallerySystem load_gallery(const std::string& id, double horizon = 5.0) {
  if (id == "G1") return detail::scalar_linear("G1", "scalar-linear", 0.25, horizon);
  if (id == "X1") return detail::scalar_linear("X1", "smallness-violator", 2.0, horizon);
  GallerySystem g;
  g.id = id;
  if (id == "G2") {
    g.name = "scalar-softplus";
    g.sys = LinearSystem::from_dsl(1, {"-1"}, horizon);
    g.pert = Perturbation::from_dsl(1, {"0.2*(sqrt(1 + x1^2) + cos(t))"}, 0.2, 0.4);
    g.declared = {1.0, 1.0, 1.0, 0.2, 0.4};
    return g;
  }
  if (id == "G3") {
    g.name = "planar-rotating";
    g.sys = LinearSystem::from_dsl(2, {"-1", "0.5*cos(t)", "-0.5*cos(t)", "-1"}, horizon);
    g.pert = Perturbation::from_dsl(2, {"0.15*x1 + 0.1*sin(x2)", "0.15*x2 + 0.1*sin(x1)"}, 0.25, 0.0);
    g.declared = {1.0, 1.0, std::sqrt(1.25), 0.25, 0.0};
    return g;
  }
  throw UnknownGalleryId(id);
}

/// Closed-form oracle. Arguments:
///   Phi (t, s)   x (s, t, xi...)   y (s, t, eta...)
///   zstar, H (t, xi...)   G, DG (t, eta...)
/// Matrices are returned row-major flattened.
inline Vec oracle_eval(const GallerySystem& gs, OracleKind which, const std::vector<double>& args) {
  if (!gs.has_oracle(which)) throw OracleUnavailable(gs.id, to_string(which));
  const int n = gs.sys.n;
  const std::size_t need = (which == OracleKind::Phi) ? 2u
                           : (which == OracleKind::x || which == OracleKind::y) ? 2u + n
                                                                                : 1u + n;
  if (args.size() != need)
    throw Error(std::string("oracle ") + to_string(which) + " expects " + std::to_string(need) + " arguments");

  if (gs.id == "G3") {
    const double t = args[0], s = args[1];
    const double a = 0.5 * (std::sin(t) - std::sin(s));
    Mat R(2, 2);
    R << std::cos(a), std::sin(a), -std::sin(a), std::cos(a);
    return flatten(std::exp(-(t - s)) * R);
  }

  const double c = *gs.linear_c;
  Vec out(1);
  switch (which) {
    case OracleKind::Phi: out[0] = std::exp(-(args[0] - args[1])); break;
    case OracleKind::x: out[0] = args[2] * std::exp(-(args[0] - args[1])); break;
    case OracleKind::y: out[0] = args[2] * std::exp((c - 1.0) * (args[0] - args[1])); break;
    case OracleKind::zstar: out[0] = args[1] * (std::exp(c * args[0]) - 1.0); break;
    case OracleKind::H: out[0] = args[1] * std::exp(c * args[0]); break;
    case OracleKind::G: out[0] = args[1] * std::exp(-c * args[0]); break;
    case OracleKind::DG: out[0] = std::exp(-c * args[0]); break;
  }
  return out;
}

inline std::shared_ptr<const LinearFlow> make_flow(const GallerySystem& gs) {
  return std::make_shared<const LinearFlow>(gs.sys);
}

/// CoupledSystem built from the declared constants.
inline CoupledSystem make_coupled(const GallerySystem& gs, ConjugacyOptions opts = {}, bool unsafe = false) {
  return CoupledSystem::make(make_flow(gs), gs.pert, gs.declared, opts, unsafe);
}

}  // namespace topeq
