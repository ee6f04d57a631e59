#pragma once
/**
 * @file perturbation.hpp
 * @brief The nonlinearity f(t, x) with first and second x-derivatives, and
 *        sampled estimators for its Lipschitz constant gamma and for
 *        mu = sup_t |f(t, 0)|.
 *
 * Second derivatives are stored flattened with index (i; j, k) ->
 * i*n*n + j*n + k, i.e. d^2 f_i / dx_j dx_k.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "topeq/linear_flow.hpp"
#include "topeq/ode.hpp"
#include "topeq/sysdsl.hpp"

namespace topeq {

using VecField = std::function<Vec(double, const Vec&)>;
using MatField = std::function<Mat(double, const Vec&)>;

/// Central-difference Jacobian of g at (t, x).
inline Mat fd_jacobian(const VecField& g, double t, const Vec& x, double h = 1e-5) {
  const Vec g0 = g(t, x);
  Mat J(g0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (g(t, xp) - g(t, xm)) / (2 * h);
  }
  return J;
}

struct Perturbation {
  int n = 1;
  VecField f;
  MatField Df;
  /// Flattened n^3 tensor of second derivatives.
  VecField D2f;
  std::optional<double> gamma;  // declared
  std::optional<double> mu;     // declared
  /// True when Df and D2f come from symbolic differentiation.
  bool symbolic = false;
  /// Reason symbolic derivatives are unavailable (empty if symbolic).
  std::string derivative_note;
  std::vector<std::string> source;  // DSL text, if any

  Vec operator()(double t, const Vec& x) const { return f(t, x); }

  static Perturbation from_dsl(int n, const std::vector<std::string>& components,
                               std::optional<double> gamma = {}, std::optional<double> mu = {}) {
    if (static_cast<int>(components.size()) != n)
      throw Error("f needs " + std::to_string(n) + " components, got " + std::to_string(components.size()));
    std::vector<dsl::Expr> fe;
    for (const auto& c : components) fe.push_back(dsl::parse_expr(c, n));

    Perturbation p;
    p.n = n;
    p.gamma = gamma;
    p.mu = mu;
    p.source = components;
    p.f = [n, fe](double t, const Vec& x) {
      Vec out(n);
      const dsl::Env env{t, std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))};
      for (int i = 0; i < n; ++i) out[i] = fe[static_cast<std::size_t>(i)].eval(env);
      return out;
    };

    try {
      std::vector<dsl::Expr> d1, d2;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d1.push_back(fe[static_cast<std::size_t>(i)].diff(dsl::Var::x(j + 1)));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            d2.push_back(d1[static_cast<std::size_t>(i * n + j)].diff(dsl::Var::x(k + 1)));
      p.Df = [n, d1](double t, const Vec& x) {
        Mat J(n, n);
        const dsl::Env env{t, std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))};
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) J(i, j) = d1[static_cast<std::size_t>(i * n + j)].eval(env);
        return J;
      };
      p.D2f = [n, d2](double t, const Vec& x) {
        Vec T(n * n * n);
        const dsl::Env env{t, std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))};
        for (std::size_t q = 0; q < d2.size(); ++q) T[static_cast<Eigen::Index>(q)] = d2[q].eval(env);
        return T;
      };
      p.symbolic = true;
    } catch (const NonDifferentiable& e) {
      p.attach_fd_derivatives();
      p.derivative_note = e.what();
    }
    return p;
  }

  /// Wraps a callable; derivatives by central differences.
  static Perturbation from_function(int n, VecField f, std::optional<double> gamma = {},
                                    std::optional<double> mu = {}) {
    Perturbation p;
    p.n = n;
    p.f = std::move(f);
    p.gamma = gamma;
    p.mu = mu;
    p.attach_fd_derivatives();
    p.derivative_note = "finite differences";
    return p;
  }

  /// c * f, with declared constants scaled accordingly.
  Perturbation scaled(double c) const {
    Perturbation p = *this;
    p.f = [g = f, c](double t, const Vec& x) -> Vec { return c * g(t, x); };
    p.Df = [g = Df, c](double t, const Vec& x) -> Mat { return c * g(t, x); };
    p.D2f = [g = D2f, c](double t, const Vec& x) -> Vec { return c * g(t, x); };
    if (gamma) p.gamma = std::abs(c) * *gamma;
    if (mu) p.mu = std::abs(c) * *mu;
    return p;
  }

 private:
  void attach_fd_derivatives() {
    const int dim = n;
    VecField g = f;
    Df = [g](double t, const Vec& x) { return fd_jacobian(g, t, x, 1e-6); };
    D2f = [g, dim](double t, const Vec& x) {
      const double h = 1e-4;
      Vec T(dim * dim * dim);
      for (int j = 0; j < dim; ++j)
        for (int k = 0; k < dim; ++k) {
          Vec pp = x, pm = x, mp = x, mm = x;
          pp[j] += h, pp[k] += h;
          pm[j] += h, pm[k] -= h;
          mp[j] -= h, mp[k] += h;
          mm[j] -= h, mm[k] -= h;
          const Vec d = (g(t, pp) - g(t, pm) - g(t, mp) + g(t, mm)) / (4 * h * h);
          for (int i = 0; i < dim; ++i) T[i * dim * dim + j * dim + k] = d[i];
        }
      return T;
    };
  }
};

/// Sampling domain: the box [-radius, radius]^n times [0, horizon].
struct SampleDomain {
  double radius = 10.0;
  double horizon = 5.0;
};

/// Sample i of a deterministic stream: (t, x, x_bar). Prefixes of the stream
/// are nested sample sets.
class SampleStream {
 public:
  SampleStream(int n, SampleDomain dom, std::uint64_t seed) : n_(n), dom_(dom), rng_(seed) {}

  struct Sample {
    double t;
    Vec x, xbar;
  };

  Sample next() {
    std::uniform_real_distribution<double> ut(0.0, dom_.horizon), ux(-dom_.radius, dom_.radius);
    Sample s{ut(rng_), Vec(n_), Vec(n_)};
    for (int i = 0; i < n_; ++i) s.x[i] = ux(rng_);
    for (int i = 0; i < n_; ++i) s.xbar[i] = ux(rng_);
    return s;
  }

 private:
  int n_;
  SampleDomain dom_;
  std::mt19937_64 rng_;
};

struct LipschitzEstimate {
  double gamma_hat = 0.0;
  double derivative_based = 0.0;
  double pair_based = 0.0;
  double witness_t = 0.0;
  Vec witness_x;
};

/// Larger of max ||Df|| and max |f(t,x)-f(t,x_bar)|/|x-x_bar| over the samples.
inline LipschitzEstimate estimate_lipschitz_detail(const Perturbation& p, SampleDomain dom, int samples,
                                                   std::uint64_t seed = 1) {
  if (samples < 2) throw Error("estimate_lipschitz needs at least 2 samples");
  SampleStream stream(p.n, dom, seed);
  LipschitzEstimate est;
  for (int i = 0; i < samples; ++i) {
    const auto s = stream.next();
    const double d = op_norm(p.Df(s.t, s.x));
    if (d > est.derivative_based) {
      est.derivative_based = d;
      if (d > est.gamma_hat) {
        est.witness_t = s.t;
        est.witness_x = s.x;
      }
    }
    const double dist = (s.x - s.xbar).norm();
    if (dist > 0) {
      const double q = (p.f(s.t, s.x) - p.f(s.t, s.xbar)).norm() / dist;
      if (q > est.pair_based) {
        est.pair_based = q;
        if (q > est.gamma_hat) {
          est.witness_t = s.t;
          est.witness_x = s.x;
        }
      }
    }
    est.gamma_hat = std::max(est.derivative_based, est.pair_based);
  }
  return est;
}

inline double estimate_lipschitz(const Perturbation& p, SampleDomain dom, int samples, std::uint64_t seed = 1) {
  return estimate_lipschitz_detail(p, dom, samples, seed).gamma_hat;
}

/// max over t_samples of |f(t, 0)|.
inline double estimate_mu(const Perturbation& p, std::span<const double> t_samples) {
  double m = 0.0;
  const Vec zero = Vec::Zero(p.n);
  for (double t : t_samples) m = std::max(m, p.f(t, zero).norm());
  return m;
}

}  // namespace topeq
