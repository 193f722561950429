#pragma once

#include "pdhyp/system.hpp"

namespace pdhyp {

// Closure p = exp(S / cv) rho^gamma with internal energy e = p / ((gamma - 1) rho),
// temperature theta = e_S = e / cv.
struct GammaLaw {
  double gamma = 2.0;
  double cv = 1.0;

  double p(double rho, double S) const;
  double p_rho(double rho, double S) const;
  double p_S(double rho, double S) const;
  double e(double rho, double S) const;
  double theta(double rho, double S) const;
};

struct DampedEulerOptions {
  int d = 2;
  GammaLaw eos{};
  double S_star = 0.0;
  double rho_star = 1.0;
  double damping = 1.0;
  // Extra quadratic mass source beta * (S - S*)^2; nonzero values break the
  // degeneracy that keeps the entropy mode a steady state.
  double mass_source = 0.0;
  bool undamped = false;
};

// Unknowns u = (S, rho, v_1..v_d), n = d + 2, r = 2.
SystemSpec builtin_damped_euler(const DampedEulerOptions& opt);
SystemSpec builtin_damped_euler(int d, double gamma);

// Orthonormal complement of omega, pivoting on the axis least aligned with it.
Mat orthonormal_complement(const Vec& omega);

}  // namespace pdhyp
