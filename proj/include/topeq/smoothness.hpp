#pragma once
/**
 * @file smoothness.hpp
 * @brief First and second derivatives of G(t, .) and H(t, .) in the space
 *        variable, through the variational equations of y' = A y + f(t, y).
 *
 * Along y(s) = y(s, t, eta) the sensitivities Y(s) = dy(s,t,eta)/d eta and
 * Z(s) = d^2 y(s,t,eta)/d eta^2 satisfy
 *
 *     Y' = B Y,                                     Y(t) = I,
 *     Z_{i;jk}' = sum_a B_ia Z_{a;jk} + sum_ab D2f_{i;ab} Y_aj Y_bk,   Z(t) = 0,
 *
 * with B(s) = A(s) + Df(s, y(s)). Then
 *
 *     DG(t, eta)   = Phi(t, 0) Y(0),
 *     D2G(t, eta)  = Phi(t, 0) Z(0)          (contracted on the first index),
 *     DH(t, xi)    = DG(t, H(t, xi))^{-1},
 *     D2H_{i;jk}   = - sum_abc DH_ia D2G_{a;bc} DH_bj DH_ck.
 *
 * The Jacobian of G is cross-checked against the direct formula
 *
 *     DG e_i = e_i - int_0^t Phi(t,s) Df(s, y(s)) Y(s) e_i ds.
 *
 * Orders r >= 3 follow the same recursion: the r-th variation obeys a linear
 * equation with matrix B and a forcing assembled from D^k f, k <= r, and the
 * lower variations. variational() is the place to add it.
 */

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "topeq/conjugacy.hpp"
#include "topeq/ode.hpp"
#include "topeq/quadrature.hpp"

namespace topeq {

/// Index of (i; j, k) in a flattened n^3 tensor.
inline Eigen::Index tensor_index(int n, int i, int j, int k) { return (i * n + j) * n + k; }

struct CrossCheck {
  static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  double machine_vs_direct = kNaN;
  double fd_error = kNaN;
  double det = kNaN;
  double condition = kNaN;
  /// |DH * DG(image) - I|, Jacobians of H only.
  double identity_error = kNaN;
  /// max |T_{i;jk} - T_{i;kj}|, order 2 only.
  double symmetry_error = kNaN;
};

struct DerivativeBundle {
  int order = 1;
  Mat jacobian;
  /// Flattened n^3 tensor, (i; j, k) -> (i*n + j)*n + k. Empty for order 1.
  Vec hessian;
  CrossCheck cross_check;

  double hess(int i, int j, int k) const {
    return hessian[tensor_index(static_cast<int>(jacobian.rows()), i, j, k)];
  }
};

/// Relative error with the denominator floored at 1e-3.
inline double relative_error(double err, double ref_norm) { return err / std::max(ref_norm, 1e-3); }

inline double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }
inline double max_abs(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

inline double symmetry_error(const Vec& T, int n) {
  double e = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = j + 1; k < n; ++k)
        e = std::max(e, std::abs(T[tensor_index(n, i, j, k)] - T[tensor_index(n, i, k, j)]));
  return e;
}

// ------------------------------------------------------------------ variations

/// Dense (y, Y[, Z]) along y(s, t, eta) for s in [0, t].
class VariationalSolution {
 public:
  VariationalSolution(Trajectory traj, int n, int order) : traj_(std::move(traj)), n_(n), order_(order) {}

  int dim() const { return n_; }
  int order() const { return order_; }
  const Trajectory& trajectory() const { return traj_; }

  Vec y(double s) const { return traj_.eval(s).head(n_); }
  Mat Y(double s) const { return unflatten(traj_.eval(s).segment(n_, n_ * n_), n_, n_); }
  /// Second variation at s, flattened (i; j, k).
  Vec Z(double s) const {
    if (order_ < 2) throw Error("second variation was not integrated");
    return traj_.eval(s).tail(n_ * n_ * n_);
  }

 private:
  Trajectory traj_;
  int n_;
  int order_;
};

/// Integrates the augmented variational system backward from t to 0.
inline VariationalSolution variational(const CoupledSystem& cs, double t, const Vec& eta, int order) {
  if (order < 1 || order > 2) throw Error("variational equations are implemented for orders 1 and 2");
  const int n = cs.dim();
  const int nn = n * n, nnn = nn * n;
  IvpProblem p;
  p.field = [&cs, n, nn, nnn, order](double r, const Vec& u) -> Vec {
    const Vec y = u.head(n);
    const Mat B = cs.A(r) + cs.pert().Df(r, y);
    const Mat Y = unflatten(u.segment(n, nn), n, n);
    Vec out(u.size());
    out.head(n) = cs.A(r) * y + cs.f(r, y);
    out.segment(n, nn) = flatten(B * Y);
    if (order == 2) {
      const Vec D2 = cs.pert().D2f(r, y);
      const Vec Zf = u.tail(nnn);
      Vec dZ = Vec::Zero(nnn);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            double acc = 0.0;
            for (int a = 0; a < n; ++a) acc += B(i, a) * Zf[tensor_index(n, a, j, k)];
            for (int a = 0; a < n; ++a)
              for (int b = 0; b < n; ++b) acc += D2[tensor_index(n, i, a, b)] * Y(a, j) * Y(b, k);
            dZ[tensor_index(n, i, j, k)] = acc;
          }
      out.tail(nnn) = dZ;
    }
    return out;
  };
  p.t0 = t;
  p.t1 = 0.0;
  p.state0 = Vec::Zero(n + nn + (order == 2 ? nnn : 0));
  p.state0.head(n) = eta;
  p.state0.segment(n, nn) = flatten(Mat::Identity(n, n));
  return VariationalSolution(integrate_ivp(p, cs.options().ivp), n, order);
}

inline VariationalSolution variational_first(const CoupledSystem& cs, double t, const Vec& eta) {
  return variational(cs, t, eta, 1);
}

inline VariationalSolution variational_second(const CoupledSystem& cs, double t, const Vec& eta) {
  return variational(cs, t, eta, 2);
}

// ------------------------------------------------------------------ finite differences

enum class MapKind { H, G };

inline const char* to_string(MapKind k) { return k == MapKind::H ? "H" : "G"; }

/// Fixed-step integrator used for FD of the maps: the discrete map is then
/// a smooth function of the point.
inline IntegratorOptions fd_integrator() { return IntegratorOptions::rk4(1e-3); }

inline Vec eval_map(MapKind kind, const CoupledSystem& cs, double t, const Vec& p) {
  return kind == MapKind::H ? map_H(cs, t, p).value : map_G(cs, t, p).value;
}

/// Central-difference Jacobian of the map at (t, p).
inline Mat fd_map_jacobian(MapKind kind, const CoupledSystem& cs, double t, const Vec& p, double h) {
  const CoupledSystem fd = cs.with_integrator(fd_integrator());
  const int n = cs.dim();
  Mat J(n, n);
  for (int j = 0; j < n; ++j) {
    Vec pp = p, pm = p;
    pp[j] += h;
    pm[j] -= h;
    J.col(j) = (eval_map(kind, fd, t, pp) - eval_map(kind, fd, t, pm)) / (2 * h);
  }
  return J;
}

/// Second derivatives by central differences: 5-point stencil on the
/// diagonal, 4-point stencil for mixed pairs.
inline Vec fd_map_hessian(MapKind kind, const CoupledSystem& cs, double t, const Vec& p, double h) {
  const CoupledSystem fd = cs.with_integrator(fd_integrator());
  const int n = cs.dim();
  Vec T(n * n * n);
  const Vec f0 = eval_map(kind, fd, t, p);
  auto at = [&](int j, double dj, int k, double dk) {
    Vec q = p;
    q[j] += dj;
    q[k] += dk;
    return eval_map(kind, fd, t, q);
  };
  for (int j = 0; j < n; ++j)
    for (int k = j; k < n; ++k) {
      Vec d;
      if (j == k)
        d = (-at(j, 2 * h, j, 0) + 16 * at(j, h, j, 0) - 30 * f0 + 16 * at(j, -h, j, 0) - at(j, -2 * h, j, 0)) /
            (12 * h * h);
      else
        d = (at(j, h, k, h) - at(j, h, k, -h) - at(j, -h, k, h) + at(j, -h, k, -h)) / (4 * h * h);
      for (int i = 0; i < n; ++i) {
        T[tensor_index(n, i, j, k)] = d[i];
        T[tensor_index(n, i, k, j)] = d[i];
      }
    }
  return T;
}

// ------------------------------------------------------------------ Jacobians

struct SmoothnessOptions {
  double mismatch_tol = 1e-5;
  double det_floor = 1e-12;
  double fd_step_1 = 1e-5;
  double fd_step_2 = 1e-4;
  double hessian_fd_tol = 1e-3;
  bool fd_check = true;
};

namespace detail {

/// DG from the direct formula e_i - int_0^t Phi(t,s) Df(s,y) Y(s) e_i ds.
inline Mat jacobian_G_direct(const CoupledSystem& cs, double t, const VariationalSolution& v) {
  const int n = cs.dim();
  if (t == 0.0) return Mat::Identity(n, n);
  auto integrand = [&](double s) -> Vec {
    const Mat xs = cs.fundamental(s);
    return flatten(xs.partialPivLu().solve(cs.pert().Df(s, v.y(s)) * v.Y(s)));
  };
  const Vec I = adaptive_simpson_panels(integrand, 0.0, t, 1e-10, 0.05);
  return Mat::Identity(n, n) - cs.fundamental(t) * unflatten(I, n, n);
}

inline Mat phi_t0(const CoupledSystem& cs, double t) {
  return t == 0.0 ? Mat::Identity(cs.dim(), cs.dim()) : cs.lin().transition_matrix(t, 0.0);
}

inline Vec contract_first(const Mat& P, const Vec& Z, int n) {
  Vec out = Vec::Zero(n * n * n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int jk = 0; jk < n * n; ++jk) out[i * n * n + jk] += P(i, a) * Z[a * n * n + jk];
  return out;
}

}  // namespace detail

/// DG(t, eta) = Phi(t,0) Y(0), checked against the direct formula and FD.
inline DerivativeBundle jacobian_G(const CoupledSystem& cs, double t, const Vec& eta,
                                   const SmoothnessOptions& opts = {}) {
  const int n = cs.dim();
  DerivativeBundle b;
  b.order = 1;
  if (t == 0.0) {
    b.jacobian = Mat::Identity(n, n);
    b.cross_check.machine_vs_direct = 0.0;
  } else {
    const VariationalSolution v = variational_first(cs, t, eta);
    b.jacobian = detail::phi_t0(cs, t) * v.Y(0.0);
    b.cross_check.machine_vs_direct = max_abs(Mat(b.jacobian - detail::jacobian_G_direct(cs, t, v)));
  }
  b.cross_check.det = b.jacobian.determinant();
  b.cross_check.condition = b.jacobian.norm() * b.jacobian.inverse().norm();
  if (b.cross_check.machine_vs_direct > opts.mismatch_tol)
    throw DerivativeMismatch("DG machine-vs-direct", b.cross_check.machine_vs_direct);
  if (!(b.cross_check.det > opts.det_floor)) throw SingularJacobian(b.cross_check.det);
  if (opts.fd_check) {
    const Mat fd = t == 0.0 ? Mat(Mat::Identity(n, n)) : fd_map_jacobian(MapKind::G, cs, t, eta, opts.fd_step_1);
    b.cross_check.fd_error = relative_error(max_abs(Mat(b.jacobian - fd)), max_abs(b.jacobian));
  }
  return b;
}

/// DH(t, xi) = DG(t, H(t, xi))^{-1}.
inline DerivativeBundle jacobian_H(const CoupledSystem& cs, double t, const Vec& xi,
                                   const SmoothnessOptions& opts = {}) {
  const int n = cs.dim();
  SmoothnessOptions inner = opts;
  inner.fd_check = false;
  const Vec image = map_H(cs, t, xi).value;
  const DerivativeBundle g = jacobian_G(cs, t, image, inner);
  DerivativeBundle b;
  b.order = 1;
  b.jacobian = g.jacobian.inverse();
  b.cross_check = g.cross_check;
  b.cross_check.identity_error = max_abs(Mat(b.jacobian * g.jacobian - Mat::Identity(n, n)));
  if (opts.fd_check) {
    const Mat fd = t == 0.0 ? Mat(Mat::Identity(n, n)) : fd_map_jacobian(MapKind::H, cs, t, xi, opts.fd_step_1);
    b.cross_check.fd_error = relative_error(max_abs(Mat(b.jacobian - fd)), max_abs(b.jacobian));
  }
  return b;
}

// ------------------------------------------------------------------ Hessians

/// D2G(t, eta) = Phi(t,0) Z(0); FD-validated.
inline DerivativeBundle hessian_G(const CoupledSystem& cs, double t, const Vec& eta,
                                  const SmoothnessOptions& opts = {}) {
  const int n = cs.dim();
  DerivativeBundle b;
  b.order = 2;
  if (t == 0.0) {
    b.jacobian = Mat::Identity(n, n);
    b.hessian = Vec::Zero(n * n * n);
  } else {
    const VariationalSolution v = variational_second(cs, t, eta);
    const Mat P = detail::phi_t0(cs, t);
    b.jacobian = P * v.Y(0.0);
    b.hessian = detail::contract_first(P, v.Z(0.0), n);
  }
  b.cross_check.det = b.jacobian.determinant();
  b.cross_check.symmetry_error = symmetry_error(b.hessian, n);
  if (opts.fd_check && t != 0.0) {
    const Vec fd = fd_map_hessian(MapKind::G, cs, t, eta, opts.fd_step_2);
    b.cross_check.fd_error = relative_error(max_abs(Vec(b.hessian - fd)), max_abs(b.hessian));
    if (b.cross_check.fd_error > opts.hessian_fd_tol) throw DerivativeMismatch("D2G vs FD", b.cross_check.fd_error);
  } else if (opts.fd_check) {
    b.cross_check.fd_error = 0.0;
  }
  return b;
}

/// D2H_{i;jk} = -sum DH_ia D2G_{a;bc} DH_bj DH_ck at the image point.
inline DerivativeBundle hessian_H(const CoupledSystem& cs, double t, const Vec& xi,
                                  const SmoothnessOptions& opts = {}) {
  const int n = cs.dim();
  SmoothnessOptions inner = opts;
  inner.fd_check = false;
  const Vec image = map_H(cs, t, xi).value;
  const DerivativeBundle g = hessian_G(cs, t, image, inner);
  const Mat DH = g.jacobian.inverse();
  DerivativeBundle b;
  b.order = 2;
  b.jacobian = DH;
  b.hessian = Vec::Zero(n * n * n);
  for (int a = 0; a < n; ++a)
    for (int bb = 0; bb < n; ++bb)
      for (int c = 0; c < n; ++c) {
        const double g2 = g.hessian[tensor_index(n, a, bb, c)];
        if (g2 == 0.0) continue;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) b.hessian[tensor_index(n, i, j, k)] -= DH(i, a) * g2 * DH(bb, j) * DH(c, k);
      }
  b.cross_check.det = g.cross_check.det;
  b.cross_check.identity_error = max_abs(Mat(DH * g.jacobian - Mat::Identity(n, n)));
  b.cross_check.symmetry_error = symmetry_error(b.hessian, n);
  if (opts.fd_check && t != 0.0) {
    const Vec fd = fd_map_hessian(MapKind::H, cs, t, xi, opts.fd_step_2);
    b.cross_check.fd_error = relative_error(max_abs(Vec(b.hessian - fd)), max_abs(b.hessian));
    if (b.cross_check.fd_error > opts.hessian_fd_tol) throw DerivativeMismatch("D2H vs FD", b.cross_check.fd_error);
  } else if (opts.fd_check) {
    b.cross_check.fd_error = 0.0;
  }
  return b;
}

// ------------------------------------------------------------------ FD validation

struct FdRow {
  int order;
  double step;
  double error;  // relative, floored as in relative_error
};

struct FdTable {
  MapKind kind = MapKind::G;
  std::vector<FdRow> rows;
  /// Step with the smallest error, per order (NaN if the order was not run).
  double best_step_1 = std::numeric_limits<double>::quiet_NaN();
  double best_step_2 = std::numeric_limits<double>::quiet_NaN();
  double best_error_1 = std::numeric_limits<double>::infinity();
  double best_error_2 = std::numeric_limits<double>::infinity();
};

/// Error-vs-step curve of central differences against the variational derivatives.
inline FdTable fd_validate(MapKind kind, const CoupledSystem& cs, double t, const Vec& point,
                           const std::vector<int>& orders, const std::vector<double>& steps) {
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (!(steps[i] < steps[i - 1])) throw Error("fd_validate steps must be strictly decreasing");
  SmoothnessOptions quiet;
  quiet.fd_check = false;
  FdTable table;
  table.kind = kind;
  for (int order : orders) {
    if (order != 1 && order != 2) throw Error("fd_validate supports orders 1 and 2");
    const DerivativeBundle ref = order == 1 ? (kind == MapKind::G ? jacobian_G(cs, t, point, quiet)
                                                                  : jacobian_H(cs, t, point, quiet))
                                            : (kind == MapKind::G ? hessian_G(cs, t, point, quiet)
                                                                  : hessian_H(cs, t, point, quiet));
    for (double h : steps) {
      double err;
      if (order == 1)
        err = relative_error(max_abs(Mat(ref.jacobian - fd_map_jacobian(kind, cs, t, point, h))),
                             max_abs(ref.jacobian));
      else
        err = relative_error(max_abs(Vec(ref.hessian - fd_map_hessian(kind, cs, t, point, h))),
                             max_abs(ref.hessian));
      table.rows.push_back({order, h, err});
      double& best = order == 1 ? table.best_error_1 : table.best_error_2;
      double& best_step = order == 1 ? table.best_step_1 : table.best_step_2;
      if (err < best) {
        best = err;
        best_step = h;
      }
    }
  }
  return table;
}

}  // namespace topeq
