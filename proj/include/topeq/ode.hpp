#pragma once
/**
 * @file ode.hpp
 * @brief Initial value problem integration with dense output.
 *
 * Two explicit methods are provided: classic fixed-step RK4 and adaptive
 * Dormand-Prince 5(4). Both store (time, state, derivative) at every accepted
 * node; queries between nodes use cubic Hermite interpolation, which matches
 * the local order of both methods without extra field evaluations.
 *
 * Matrix and tensor states are integrated as flattened vectors in row-major
 * order (see flatten()/unflatten()); every module relies on that convention.
 *
 * Backward integration (t1 < t0) integrates the time-reversed field
 * u' = -f(t0 - r, u) forward in r and maps the nodes back.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "topeq/errors.hpp"

namespace topeq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Row-major flattening of an n x m matrix into a vector.
inline Vec flatten(const Mat& m) {
  Vec v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return v;
}

inline Mat unflatten(const Eigen::Ref<const Vec>& v, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[i * cols + j];
  return m;
}

enum class Method { FixedRk4, AdaptiveRk45 };

struct IntegratorOptions {
  Method method = Method::AdaptiveRk45;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  std::size_t max_steps = 1'000'000;
  /// Step for FixedRk4 (rounded so the span is hit exactly); first trial step for RK45.
  double initial_step = 1e-2;
  /// Upper bound on accepted step length (RK45 only). Keeps dense output accurate.
  double max_step = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw Error("integrator tolerances must be positive");
    if (max_steps < 1) throw Error("max_steps must be >= 1");
    if (!(initial_step > 0.0)) throw Error("initial_step must be positive");
    if (!(max_step > 0.0)) throw Error("max_step must be positive");
  }

  static IntegratorOptions rk4(double step) {
    IntegratorOptions o;
    o.method = Method::FixedRk4;
    o.initial_step = step;
    return o;
  }
  static IntegratorOptions rk45(double tol, double max_step = std::numeric_limits<double>::infinity()) {
    IntegratorOptions o;
    o.abs_tol = o.rel_tol = tol;
    o.max_step = max_step;
    return o;
  }
};

using Field = std::function<Vec(double, const Vec&)>;

struct IvpProblem {
  Field field;
  double t0 = 0.0;
  Vec state0;
  double t1 = 0.0;
};

struct TrajectoryStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  double max_error_estimate = 0.0;
};

/// Dense-output solution. Immutable once built.
class Trajectory {
 public:
  struct Node {
    double t;
    Vec x;
    Vec dx;
  };

  Trajectory() = default;
  Trajectory(std::vector<Node> nodes, TrajectoryStats stats, double t_start, double t_end)
      : nodes_(std::move(nodes)), stats_(stats), t_start_(t_start), t_end_(t_end) {}

  double lo() const { return nodes_.front().t; }
  double hi() const { return nodes_.back().t; }
  /// Time the integration started from (t0), which is hi() for backward runs.
  double start_time() const { return t_start_; }
  double end_time() const { return t_end_; }
  const Vec& start_state() const { return t_start_ <= t_end_ ? nodes_.front().x : nodes_.back().x; }
  const Vec& end_state() const { return t_start_ <= t_end_ ? nodes_.back().x : nodes_.front().x; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const TrajectoryStats& stats() const { return stats_; }
  Eigen::Index dim() const { return nodes_.front().x.size(); }

  Vec operator()(double s) const { return eval(s); }

  Vec eval(double s) const {
    if (nodes_.empty() || !(s >= lo() && s <= hi())) throw OutOfSpan(s, lo(), hi());
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), s,
                               [](const Node& n, double v) { return n.t < v; });
    if (it != nodes_.end() && it->t == s) return it->x;
    const Node& b = *it;
    const Node& a = *(it - 1);
    const double h = b.t - a.t;
    const double u = (s - a.t) / h;
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1;
    const double h10 = u3 - 2 * u2 + u;
    const double h01 = -2 * u3 + 3 * u2;
    const double h11 = u3 - u2;
    return h00 * a.x + (h10 * h) * a.dx + h01 * b.x + (h11 * h) * b.dx;
  }

  /// Sup of |state| over the nodes and the interval midpoints.
  double sup_norm() const {
    double m = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      m = std::max(m, nodes_[i].x.norm());
      if (i + 1 < nodes_.size()) m = std::max(m, eval(0.5 * (nodes_[i].t + nodes_[i + 1].t)).norm());
    }
    return m;
  }

 private:
  std::vector<Node> nodes_;
  TrajectoryStats stats_;
  double t_start_ = 0.0;
  double t_end_ = 0.0;
};

namespace detail {

inline void check_finite(const Vec& v, double t) {
  if (!v.allFinite()) throw NonFiniteState(t);
}

// Dormand-Prince 5(4) tableau.
struct Dopri {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b - b_hat
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

// Integrates forward in the local variable r in [0, length]; node times are r.
inline std::vector<Trajectory::Node> run_forward(const Field& g, const Vec& u0, double length,
                                                 const IntegratorOptions& opts, TrajectoryStats& stats) {
  std::vector<Trajectory::Node> nodes;
  Vec k1 = g(0.0, u0);
  check_finite(k1, 0.0);
  nodes.push_back({0.0, u0, k1});
  if (length == 0.0) return nodes;

  if (opts.method == Method::FixedRk4) {
    const auto n = static_cast<std::size_t>(std::ceil(length / opts.initial_step - 1e-12));
    const std::size_t steps = std::max<std::size_t>(n, 1);
    if (steps > opts.max_steps) throw StepLimitExceeded(0.0, length, opts.max_steps);
    const double h = length / static_cast<double>(steps);
    Vec u = u0;
    for (std::size_t i = 0; i < steps; ++i) {
      const double r = static_cast<double>(i) * h;
      const Vec k2 = g(r + 0.5 * h, u + (0.5 * h) * k1);
      const Vec k3 = g(r + 0.5 * h, u + (0.5 * h) * k2);
      const Vec k4 = g(r + h, u + h * k3);
      u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const double rn = (i + 1 == steps) ? length : static_cast<double>(i + 1) * h;
      check_finite(u, rn);
      k1 = g(rn, u);
      check_finite(k1, rn);
      nodes.push_back({rn, u, k1});
      ++stats.steps;
    }
    return nodes;
  }

  using D = Dopri;
  Vec u = u0;
  double r = 0.0;
  double h = std::min({opts.initial_step, opts.max_step, length});
  std::size_t attempts = 0;
  while (r < length) {
    if (++attempts > opts.max_steps) throw StepLimitExceeded(r, length, opts.max_steps);
    bool last = false;
    if (r + h >= length || length - (r + h) < 1e-12 * std::max(1.0, length)) {
      h = length - r;
      last = true;
    }
    const Vec k2 = g(r + D::c2 * h, u + h * (D::a21 * k1));
    const Vec k3 = g(r + D::c3 * h, u + h * (D::a31 * k1 + D::a32 * k2));
    const Vec k4 = g(r + D::c4 * h, u + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3));
    const Vec k5 = g(r + D::c5 * h, u + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4));
    const Vec k6 = g(r + h, u + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 +
                                      D::a65 * k5));
    const Vec un = u + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 + D::b6 * k6);
    const double rn = last ? length : r + h;
    const Vec k7 = g(rn, un);
    const Vec err = h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * k7);

    double err_norm = 0.0;
    bool finite = un.allFinite() && k7.allFinite() && err.allFinite();
    if (finite) {
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(u[i]), std::abs(un[i]));
        err_norm = std::max(err_norm, std::abs(err[i]) / sc);
      }
    }
    if (!finite) {
      // Shrink and retry; a genuinely non-finite field fails once h underflows.
      if (h < 1e-14 * std::max(1.0, length)) throw NonFiniteState(rn);
      h *= 0.25;
      ++stats.rejected;
      continue;
    }
    if (err_norm <= 1.0) {
      r = rn;
      u = un;
      k1 = k7;
      nodes.push_back({r, u, k1});
      ++stats.steps;
      stats.max_error_estimate = std::max(stats.max_error_estimate, err.cwiseAbs().maxCoeff());
      const double fac = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
      h = std::min(h * fac, opts.max_step);
    } else {
      ++stats.rejected;
      h *= std::clamp(0.9 * std::pow(err_norm, -0.2), 0.1, 0.9);
      if (h < 1e-14 * std::max(1.0, length)) throw StepLimitExceeded(r, length, stats.steps);
    }
  }
  return nodes;
}

}  // namespace detail

/// Solves the IVP over [t0, t1] (either orientation). Deterministic.
inline Trajectory integrate_ivp(const IvpProblem& problem, const IntegratorOptions& opts = {}) {
  opts.validate();
  if (!problem.state0.allFinite()) throw NonFiniteState(problem.t0);
  TrajectoryStats stats;
  const double t0 = problem.t0, t1 = problem.t1;

  if (t1 >= t0) {
    Field g = [&](double r, const Vec& u) { return problem.field(t0 + r, u); };
    auto nodes = detail::run_forward(g, problem.state0, t1 - t0, opts, stats);
    for (auto& n : nodes) n.t = (&n == &nodes.back()) ? t1 : t0 + n.t;
    return Trajectory(std::move(nodes), stats, t0, t1);
  }

  Field g = [&](double r, const Vec& u) -> Vec { return -problem.field(t0 - r, u); };
  auto nodes = detail::run_forward(g, problem.state0, t0 - t1, opts, stats);
  for (auto& n : nodes) {
    n.t = (&n == &nodes.back()) ? t1 : t0 - n.t;
    n.dx = -n.dx;
  }
  std::reverse(nodes.begin(), nodes.end());
  return Trajectory(std::move(nodes), stats, t0, t1);
}

/// Dense evaluation; throws OutOfSpan outside [lo, hi].
inline Vec eval_trajectory(const Trajectory& traj, double s) { return traj.eval(s); }

}  // namespace topeq
