#pragma once

#include "pdhyp/system.hpp"

namespace pdhyp {

struct PacketResiduals {
  double biorthonormality = 0.0;  // max |L R - I|
  double left = 0.0;              // max |L A - Lambda L|
  double right = 0.0;             // max |A R - R Lambda|
  double max() const;
};

struct DecomposeOptions {
  bool use_provider = true;
  double hyperbolicity_tol = 1e-9;
  double cond_limit = 1e10;
  double cluster_tol = 1e-8;
};

// Kernel matrix used to pick the distinguished family numerically.
Mat kernel_probe(const SystemSpec& sys);

// Numerical decomposition with the distinguished family placed at index 0.
// The family is the eigen-direction annihilated (or nearly so) by grad Q(0).
EigenPacket numeric_decompose(const SystemSpec& sys, const Vec& u, const Vec& omega, const Mat& probe,
                              const DecomposeOptions& opt = {});

EigenPacket eigen_decompose(const SystemSpec& sys, const Vec& u, const Vec& omega, const DecomposeOptions& opt = {});

PacketResiduals verify_packet(const EigenPacket& p, const Mat& A);

// r_1(u) through the cheapest route available.
Vec first_right_eigenvector(const SystemSpec& sys, const Vec& u);

}  // namespace pdhyp
