#pragma once
/**
 * @file linear_flow.hpp
 * @brief Transition matrices of x' = A(t)x and estimation of the constants
 *        M (sup of ||A||), K and alpha (uniform exponential contraction).
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topeq/ode.hpp"
#include "topeq/sysdsl.hpp"

namespace topeq {

/// Operator 2-norm (largest singular value).
inline double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

struct LinearSystem {
  int n = 1;
  std::function<Mat(double)> A;
  double horizon = 5.0;

  /// Builds A(t) from n*n DSL strings in row-major order; entries may use t only.
  static LinearSystem from_dsl(int n, const std::vector<std::string>& entries, double horizon) {
    if (n < 1) throw Error("dimension must be >= 1");
    if (static_cast<int>(entries.size()) != n * n)
      throw Error("A(t) needs " + std::to_string(n * n) + " entries, got " + std::to_string(entries.size()));
    if (!(horizon > 0.0)) throw Error("horizon must be positive");
    std::vector<dsl::Expr> exprs;
    exprs.reserve(entries.size());
    for (const auto& s : entries) exprs.push_back(dsl::parse_expr(s, 0));
    LinearSystem sys;
    sys.n = n;
    sys.horizon = horizon;
    sys.A = [n, exprs = std::move(exprs)](double t) {
      Mat a(n, n);
      const dsl::Env env{t, {}};
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = exprs[static_cast<std::size_t>(i * n + j)].eval(env);
      return a;
    };
    return sys;
  }

  LinearSystem scaled(double c) const {
    LinearSystem s = *this;
    s.A = [a = A, c](double t) -> Mat { return c * a(t); };
    return s;
  }
};

struct DichotomyEstimate {
  double K_hat = 1.0;
  double alpha_hat = 0.0;
  double M_hat = 0.0;
  std::vector<std::pair<double, double>> grid;  // (t, s), t >= s
  double residual = 0.0;
  double fitted_slope = 0.0;
};

/// Pairs (t, s) with t >= s on a uniform lattice of [0, T] with m intervals.
inline std::vector<std::pair<double, double>> default_pair_grid(double horizon, int m = 10) {
  std::vector<std::pair<double, double>> grid;
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j <= i; ++j) grid.emplace_back(horizon * i / m, horizon * j / m);
  return grid;
}

inline std::vector<double> uniform_grid(double lo, double hi, int intervals) {
  std::vector<double> g;
  for (int i = 0; i <= intervals; ++i) g.push_back(i == intervals ? hi : lo + (hi - lo) * i / intervals);
  return g;
}

class LinearFlow {
 public:
  static IntegratorOptions default_options() { return IntegratorOptions::rk45(1e-12, 0.05); }

  explicit LinearFlow(LinearSystem sys, IntegratorOptions opts = default_options())
      : sys_(std::move(sys)), opts_(opts) {
    if (sys_.n < 1 || !sys_.A) throw Error("linear system is not well formed");
  }

  const LinearSystem& system() const { return sys_; }
  int dim() const { return sys_.n; }
  double horizon() const { return sys_.horizon; }
  const IntegratorOptions& options() const { return opts_; }

  Mat A(double t) const { return sys_.A(t); }

  /// Phi(t, s): solution of X' = A X, X(s) = I, evaluated at t. Memoized on (t, s).
  Mat transition_matrix(double t, double s) const {
    check_time(t);
    check_time(s);
    const int n = sys_.n;
    if (t == s) return Mat::Identity(n, n);
    {
      std::shared_lock lock(memo_mutex_);
      auto it = memo_.find({t, s});
      if (it != memo_.end()) return it->second;
    }
    IvpProblem p;
    p.field = [this, n](double r, const Vec& u) { return flatten(sys_.A(r) * unflatten(u, n, n)); };
    p.t0 = s;
    p.t1 = t;
    p.state0 = flatten(Mat::Identity(n, n));
    Mat phi = unflatten(integrate_ivp(p, opts_).end_state(), n, n);
    std::unique_lock lock(memo_mutex_);
    memo_.emplace(std::make_pair(t, s), phi);
    return phi;
  }

  /// ||Phi(t,u) Phi(u,s) - Phi(t,s)||, a health metric of the integrator.
  double cocycle_check(double t, double u, double s) const {
    if (t == u && u == s) return 0.0;
    return op_norm(transition_matrix(t, u) * transition_matrix(u, s) - transition_matrix(t, s));
  }

  /// x(s, t, xi) = Phi(s, t) xi.
  Vec linear_solution(double s, double t, const Vec& xi) const {
    if (s == t) return xi;
    return transition_matrix(s, t) * xi;
  }

  double estimate_bound_M(std::span<const double> t_samples) const {
    double m = 0.0;
    for (double t : t_samples) m = std::max(m, op_norm(sys_.A(t)));
    return m;
  }

  /// Least-squares decay rate of ln||Phi(t,s)|| against t - s, clamped to
  /// (0, M_hat], followed by the smallest K >= 1 that envelopes the grid.
  DichotomyEstimate estimate_dichotomy(const std::vector<std::pair<double, double>>& pairs) const {
    if (pairs.size() < 2) throw Error("dichotomy estimation needs at least two pairs");
    std::vector<double> times;
    std::vector<double> sep, logn;
    for (const auto& [t, s] : pairs) {
      if (t < s) throw Error("dichotomy pairs need t >= s");
      const double nrm = op_norm(transition_matrix(t, s));
      sep.push_back(t - s);
      logn.push_back(std::log(nrm));
      times.push_back(t);
      times.push_back(s);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    DichotomyEstimate est;
    est.grid = pairs;
    est.M_hat = estimate_bound_M(times);

    const double nd = static_cast<double>(sep.size());
    double md = 0, ml = 0;
    for (std::size_t i = 0; i < sep.size(); ++i) {
      md += sep[i];
      ml += logn[i];
    }
    md /= nd;
    ml /= nd;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < sep.size(); ++i) {
      sxy += (sep[i] - md) * (logn[i] - ml);
      sxx += (sep[i] - md) * (sep[i] - md);
    }
    if (sxx == 0.0) throw Error("dichotomy pairs need at least two distinct separations");
    est.fitted_slope = sxy / sxx;
    if (!(est.fitted_slope < 0.0)) throw NotContractive(est.fitted_slope);
    est.alpha_hat = std::min(-est.fitted_slope, est.M_hat);

    double k = 0.0;
    for (std::size_t i = 0; i < sep.size(); ++i) k = std::max(k, std::exp(logn[i] + est.alpha_hat * sep[i]));
    est.K_hat = std::max(1.0, k);
    est.residual = k / est.K_hat;
    return est;
  }

 private:
  void check_time(double t) const {
    const double slack = 1e-12 * std::max(1.0, sys_.horizon);
    if (t < -slack || t > sys_.horizon + slack)
      throw Error("time " + std::to_string(t) + " outside [0, " + std::to_string(sys_.horizon) + "]");
  }

  LinearSystem sys_;
  IntegratorOptions opts_;
  mutable std::shared_mutex memo_mutex_;
  mutable std::map<std::pair<double, double>, Mat> memo_;
};

}  // namespace topeq
