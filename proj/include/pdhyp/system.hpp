#pragma once

#include "pdhyp/types.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>

namespace pdhyp {

// Eigenvalues, left eigenvectors (rows of L) and right eigenvectors
// (columns of R) of A(u, omega). Index 0 is the distinguished family.
struct EigenPacket {
  Vec lambda;
  Mat left;
  Mat right;
  Vec state;
  Vec direction;
  // Set when more than one eigen-direction sits in the kernel of grad Q(0).
  bool first_family_ambiguous = false;
};

enum class DerivativeMode { FiniteDifference, Analytic };

// Optional closed-form derivatives. Anything left empty falls back to
// central differences.
struct AnalyticDerivatives {
  std::function<Mat(const Vec&)> source_jacobian;
  std::function<Vec(const Vec&)> entropy_gradient;
  std::function<Vec(const Vec&, int)> entropy_flux_gradient;
  std::function<Mat(const Vec&)> conserved_jacobian;
  std::function<Vec(const Vec&, const Vec&)> first_eigenvalue_gradient;
};

struct SystemSpec {
  std::string name;
  std::map<std::string, double> params;
  int d = 0;
  int n = 0;
  int r = 0;

  std::function<Mat(const Vec&, int)> flux_jacobian;  // A^k(u), k zero-based
  std::function<Vec(const Vec&)> source;              // Q(u)
  std::function<Vec(const Vec&)> conserved;           // G(u), may be empty
  std::function<double(const Vec&)> entropy;          // eta(u), may be empty
  std::function<double(const Vec&, int)> entropy_flux;  // psi^k(u), may be empty
  std::function<EigenPacket(const Vec&, const Vec&)> eigen_provider;  // may be empty
  std::function<Vec(const Vec&)> first_right;  // fast path for r_1(u) when it is omega-free
  AnalyticDerivatives analytic;

  Vec equilibrium;
  double domain_radius = 0.25;
  bool normalized = false;
  // u_original - u_star = transform * u for preprocessed systems.
  Mat transform;

  std::shared_ptr<std::atomic<long>> out_of_domain = std::make_shared<std::atomic<long>>(0);

  BlockLayout layout() const { return {n, r}; }
  bool has_conserved() const { return static_cast<bool>(conserved); }
  bool has_entropy() const { return static_cast<bool>(entropy) && static_cast<bool>(entropy_flux); }
  bool has_eigen_provider() const { return static_cast<bool>(eigen_provider); }
};

// Throws DimensionError on inconsistent sizes.
void validate(const SystemSpec& sys);

// A(u, omega) = sum_k omega_k A^k(u). omega must be a unit vector.
Mat direction_matrix(const SystemSpec& sys, const Vec& u, const Vec& omega);

// Shift to u* = 0 and renormalize G so that G(0) = 0, grad G(0) = I.
SystemSpec normalize_equilibrium(const SystemSpec& sys);

// Pulls every evaluator back through u_parent = T u (T constant, invertible).
SystemSpec apply_linear_transform(const SystemSpec& sys, const Mat& T);

// Derivative helpers honouring analytic plug-ins where allowed.
Mat source_jacobian(const SystemSpec& sys, const Vec& u, DerivativeMode mode = DerivativeMode::FiniteDifference);
Vec entropy_gradient(const SystemSpec& sys, const Vec& u, DerivativeMode mode = DerivativeMode::FiniteDifference);
Vec entropy_flux_gradient(const SystemSpec& sys, const Vec& u, int k,
                          DerivativeMode mode = DerivativeMode::FiniteDifference);
Mat conserved_jacobian(const SystemSpec& sys, const Vec& u, DerivativeMode mode = DerivativeMode::FiniteDifference);
Mat entropy_hessian(const SystemSpec& sys, const Vec& u);

bool has_analytic(const SystemSpec& sys);

}  // namespace pdhyp
