#pragma once

#include "pdhyp/types.hpp"

#include <cmath>

namespace pdhyp::fd {

inline constexpr double kStep = 1e-6;

inline double step_for(double x, double base = kStep) { return base * (1.0 + std::abs(x)); }

// Central-difference Jacobian of a vector map.
template <class F>
Mat jacobian(F&& f, const Vec& u, double base = kStep) {
  const int n = static_cast<int>(u.size());
  Mat out;
  for (int j = 0; j < n; ++j) {
    const double h = step_for(u(j), base);
    Vec up = u, um = u;
    up(j) += h;
    um(j) -= h;
    const Vec col = (f(up) - f(um)) / (2.0 * h);
    if (j == 0) out.resize(col.size(), n);
    out.col(j) = col;
  }
  return out;
}

template <class F>
Vec gradient(F&& f, const Vec& u, double base = kStep) {
  const int n = static_cast<int>(u.size());
  Vec g(n);
  for (int j = 0; j < n; ++j) {
    const double h = step_for(u(j), base);
    Vec up = u, um = u;
    up(j) += h;
    um(j) -= h;
    g(j) = (f(up) - f(um)) / (2.0 * h);
  }
  return g;
}

// Derivative of f along direction v at u.
template <class F>
auto directional(F&& f, const Vec& u, const Vec& v, double base = kStep) {
  const double h = base * (1.0 + u.norm()) / std::max(v.norm(), 1e-300);
  return (f(u + h * v) - f(u - h * v)) / (2.0 * h);
}

// Second-difference Hessian with fixed absolute step h.
template <class F>
Mat hessian_step(F&& f, const Vec& u, double h) {
  const int n = static_cast<int>(u.size());
  Mat H(n, n);
  const double f0 = f(u);
  for (int i = 0; i < n; ++i) {
    Vec up = u, um = u;
    up(i) += h;
    um(i) -= h;
    H(i, i) = (f(up) - 2.0 * f0 + f(um)) / (h * h);
    for (int j = i + 1; j < n; ++j) {
      Vec pp = u, pm = u, mp = u, mm = u;
      pp(i) += h, pp(j) += h;
      pm(i) += h, pm(j) -= h;
      mp(i) -= h, mp(j) += h;
      mm(i) -= h, mm(j) -= h;
      H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return H;
}

// Richardson combination of two step sizes for a second-order formula.
template <class F>
Mat hessian(F&& f, const Vec& u, double h1 = 1e-4, double h2 = 1e-5) {
  const Mat a = hessian_step(f, u, h1);
  const Mat b = hessian_step(f, u, h2);
  const double q = (h1 / h2) * (h1 / h2);
  return (q * b - a) / (q - 1.0);
}

}  // namespace pdhyp::fd
