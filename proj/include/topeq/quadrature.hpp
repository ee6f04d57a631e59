#pragma once
// Adaptive Simpson quadrature for vector-valued integrands.

#include <cmath>
#include <functional>

#include "topeq/ode.hpp"

namespace topeq {

namespace detail {

template <typename F>
Vec simpson_rec(const F& f, double a, double b, const Vec& fa, const Vec& fm, const Vec& fb,
                const Vec& whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const Vec flm = f(lm), frm = f(rm);
  const Vec left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Vec right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const Vec delta = left + right - whole;
  if (depth <= 0 || delta.lpNorm<Eigen::Infinity>() <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Integral of f over [a, b] to absolute tolerance tol (sup norm), with
/// Richardson correction on accepted panels.
template <typename F>
Vec adaptive_simpson(const F& f, double a, double b, double tol, int max_depth = 40) {
  const Vec fa = f(a), fb = f(b);
  if (a == b) return Vec::Zero(fa.size());
  const double m = 0.5 * (a + b);
  const Vec fm = f(m);
  const Vec whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Splits [a, b] into panels of length <= panel before integrating.
template <typename F>
Vec adaptive_simpson_panels(const F& f, double a, double b, double tol, double panel) {
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / panel - 1e-12)));
  const double h = (b - a) / pieces;
  Vec acc;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + i * h;
    const double hi = (i + 1 == pieces) ? b : a + (i + 1) * h;
    Vec part = adaptive_simpson(f, lo, hi, tol / pieces);
    if (i == 0)
      acc = std::move(part);
    else
      acc += part;
  }
  return acc;
}

}  // namespace topeq
