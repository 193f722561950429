#pragma once

#include "pdhyp/coords.hpp"
#include "pdhyp/trace.hpp"

#include <Eigen/Dense>

#include <map>
#include <vector>

namespace pdhyp {

// Constant-coefficient flat system d/dt u + sum_k A^k u_{x_k} - Theta u = 0.
struct LinearSymbol {
  int d = 0;
  BlockLayout layout;
  std::vector<Mat> A;  // flat blocks of A~^k(0)
  Mat theta;           // flat block of Theta
  std::string name;

  // i sum_k xi_k A^k - Theta; the propagator is exp(-t symbol).
  Eigen::MatrixXcd symbol(const Vec& xi) const;
};

LinearSymbol linear_symbol(const TransformedSystem& ts);
LinearSymbol linear_symbol(const std::vector<Mat>& A_flat, const Mat& theta_flat, const BlockLayout& layout);
// Same symbol with Theta removed.
LinearSymbol without_damping(LinearSymbol sym);

struct SymbolGridOptions {
  double xi_min = 1e-3;
  double xi_max = 32.0;
  int shells = 256;
  int angles = 32;  // circle points for d = 2, sphere points for d = 3
};

// Quadrature nodes in frequency space: integral f(xi) dxi ~ sum weight_j f(xi_j).
class SymbolGrid {
 public:
  SymbolGrid(LinearSymbol sym, std::vector<Vec> xi, std::vector<double> weight);

  const LinearSymbol& symbol() const { return sym_; }
  int size() const { return static_cast<int>(xi_.size()); }
  const Vec& xi(int j) const { return xi_[j]; }
  double weight(int j) const { return weight_[j]; }
  double radius(int j) const { return xi_[j].norm(); }

  // exp(-t symbol(xi_j)), cached per requested time.
  const Eigen::MatrixXcd& propagator(int j, double t) const;
  void cache_times(const std::vector<double>& times) const;
  void clear_cache() const { cache_.clear(); }

 private:
  LinearSymbol sym_;
  std::vector<Vec> xi_;
  std::vector<double> weight_;
  mutable std::map<double, std::vector<Eigen::MatrixXcd>> cache_;
};

// Log-radial shells times directions, plus a single node at xi = 0 carrying
// the volume of the inner ball. d = 1 uses +-xi, d = 2 equi-angular, d = 3 a
// Fibonacci sphere.
SymbolGrid make_radial_grid(const LinearSymbol& sym, const SymbolGridOptions& opt = {});
// Box lattice 2 pi k / side in FFT order (axis 0 slowest), weight (2 pi / side)^d.
SymbolGrid make_lattice_grid(const LinearSymbol& sym, int N, double side);

using SpectralField = std::vector<Eigen::VectorXcd>;  // one flat vector per node

SpectralField propagate_linear(const SymbolGrid& grid, const SpectralField& u0, double t);

enum class Band { C, D, Flat };
// ||Lambda^alpha Pi u||_{L^2} by Plancherel: (2 pi)^-d sum w |xi|^{2 alpha} |Pi u|^2.
double band_norm(const SymbolGrid& grid, const SpectralField& u, Band band, double alpha = 0.0);

// Fourier transform of exp(-|x|^2 / (2 R^2)) times a flat vector.
SpectralField gaussian_profile(const SymbolGrid& grid, double R, const Eigen::VectorXd& vec);
// |xi|^{-d(1 - 1/p)} exp(-|xi|^2 / 2): the transform of a profile with an
// |x|^{-d/p} tail (weak L^p), zero at the xi = 0 node.
SpectralField power_profile(const SymbolGrid& grid, double p, const Eigen::VectorXd& vec);

struct LinearExperiment {
  double p = 1.0;
  double alpha = 0.0;
  double t_min = 10.0;
  double t_max = 100.0;
  int samples = 32;
  // Gaussian width; <= 0 picks 1 for p = 1 and 200 for p = 2. Other p use
  // power_profile.
  double width = 0.0;
  Eigen::VectorXd profile;  // flat direction of the data; empty means all ones
  SymbolGridOptions grid;
};

// Columns norm_C, norm_D, fit_slope_C, fit_slope_D; fits and linear-regime
// predictions attached.
DecayTrace linear_lp_decay_experiment(const LinearSymbol& sym, const LinearExperiment& ex);

struct PointwiseBoundsOptions {
  std::vector<double> times{1, 2, 4, 8, 16, 32, 64};
  SymbolGridOptions grid{1e-3, 32.0, 96, 16};
};

struct PointwiseBoundsReport {
  double xi_c = 0.0;
  double gap_ratio_limit = 0.0;  // low-frequency limit of gap / |xi|^2
  double c_low_C = 0.0, C_low_C = 0.0;
  double c_low_D = 0.0, C_low_D = 0.0;
  double c_fast = 0.0, C_fast = 0.0;  // remainder on the low band and full propagator above xi_c
  int low_nodes = 0;
  int high_nodes = 0;
  bool passed = false;
  std::string note;
};

// Splits exp(-t symbol) into the slow spectral part (r - 1 eigenvalues
// nearest the imaginary axis) and the rest on |xi| <= xi_c, and fits
// exponential envelopes to both bands.
PointwiseBoundsReport verify_pointwise_bounds(const LinearSymbol& sym, const PointwiseBoundsOptions& opt = {});

nlohmann::json to_json(const PointwiseBoundsReport& r);

struct DuhamelResult {
  double residual = 0.0;  // L^2 norm
  double reference = 0.0;  // L^2 norm of the solution at t
  double max_rate_dt = 0.0;  // max |eigenvalue| * snapshot spacing
  bool coarse_warning = false;
};

// u(t) - e^{-tL} u0 - int_0^t e^{-(t - tau) L} N(tau) dtau with the trapezoid
// rule over the snapshot times tau (tau.front() = 0, tau.back() = t).
DuhamelResult duhamel_residual(const SymbolGrid& lattice, const SpectralField& u0, const SpectralField& ut,
                               const std::vector<double>& tau, const std::vector<SpectralField>& nonlinear);

}  // namespace pdhyp
