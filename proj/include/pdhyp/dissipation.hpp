#pragma once

#include "pdhyp/coords.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pdhyp {

// Full n x n symmetrizer in chart variables at u~, assembled as J^T S J with
// S = Hess eta - sum_l (grad eta (grad G)^-1)_l Hess G_l in the preprocessed
// variables. This equals the chart-level formula and needs no second
// derivatives of the chart.
Mat symmetrizer_full(const TransformedSystem& ts, const Vec& ut);
// Flat block (indices 2..n) of symmetrizer_full.
Mat symmetrizer(const TransformedSystem& ts, const Vec& ut);
// Same matrix from finite-difference Hessians of eta o Phi and G o Phi.
// Slower and noisier; kept as an independent cross-check.
Mat symmetrizer_direct(const TransformedSystem& ts, const Vec& ut);

// max_k |A0 A^k - (A^k)^T A0| over the flat blocks at u~.
double commutation_residual(const TransformedSystem& ts, const Vec& ut);

struct DissipationMatrix {
  Mat M;                 // -(B4 Theta^D + (Theta^D)^T B4)
  Mat B4;                // damped block of Hess eta~(0)
  double symmetry_residual = 0.0;
  double c_m = 0.0;      // smallest eigenvalue of M
  double c_block_residual = 0.0;  // max entry of H Theta + Theta^T H outside the damped block
  bool passed = false;
};

// Throws StructureError when c_m <= 0.
DissipationMatrix dissipation_matrix(const TransformedSystem& ts);
// Same computation from raw pieces (n x n Hessian at 0 and Theta).
DissipationMatrix dissipation_matrix(const Mat& hess0, const Mat& theta, const BlockLayout& layout);

enum class CompensatorVariant {
  DampedBlock,   // subtract 2 diag(0_{r-1}, I_{n-r})
  PrintedBlock,  // subtract 2 diag(0_{n-r}, I_{r-1})
};
std::string to_string(CompensatorVariant v);
CompensatorVariant compensator_variant_from_string(const std::string& s);

struct CompensatorOptions {
  double norm_bound = 10.0;  // |K|_F <= norm_bound
  int directions = 64;       // size of the full omega grid
  CompensatorVariant variant = CompensatorVariant::DampedBlock;
  double pass_margin = 1e-4;
  double gap_tol = 1e-11;  // barrier duality gap target
};

struct CompensatorSlice {
  Vec omega;
  Mat K;
  double margin = 0.0;  // c_k for this omega
  bool passed = false;
  int newton_steps = 0;
};

struct CompensatorK {
  std::vector<CompensatorSlice> slices;  // slices[i + half] is the antipode of slices[i]
  CompensatorVariant variant = CompensatorVariant::DampedBlock;
  double norm_bound = 10.0;
  double c_k = 0.0;  // minimum margin over the grid
  double skew_residual = 0.0;
  double oddness_residual = 0.0;
  double lmi_residual = 0.0;  // -min eig of the shifted LMI, floored at 0
  bool passed = false;
};

// Diagonal pattern matrix 2 * diag(...) used in the LMI.
Mat lmi_pattern(const BlockLayout& layout, CompensatorVariant v);
// K A - A^T K + pattern(layout, v).
Mat lmi_matrix(const Mat& K, const Mat& A_flat, const BlockLayout& layout, CompensatorVariant v);

// Maximizes 1/2 min eig(K A - A^T K + pattern) over skew K with |K|_F <= bound
// by a log-barrier Newton path. The problem is a concave maximization so the
// returned value is the optimum up to gap_tol.
CompensatorSlice build_compensator(const Mat& A_flat, const BlockLayout& layout, const CompensatorOptions& opt = {});
CompensatorSlice build_compensator(const TransformedSystem& ts, const Vec& omega, const CompensatorOptions& opt = {});
// Solves on the hemisphere of direction_grid(d, opt.directions) and extends
// by K(-omega) = -K(omega).
CompensatorK build_compensator_table(const TransformedSystem& ts, const CompensatorOptions& opt = {});

nlohmann::json to_json(const CompensatorK& k);
CompensatorK compensator_from_json(const nlohmann::json& j);

// Sum of eta over the columns of a point cloud (one state per column) times
// the cell volume: the periodic trapezoid rule on a uniform grid.
double entropy_functional(const Eigen::MatrixXd& field, double cell_volume,
                          const std::function<double(const Vec&)>& eta);
double entropy_functional(const Eigen::MatrixXd& field, double cell_volume, const SystemSpec& sys);
double entropy_functional(const Eigen::MatrixXd& field_ut, double cell_volume, const TransformedSystem& ts);

}  // namespace pdhyp
