#pragma once

#include "pdhyp/system.hpp"

#include <vector>

namespace pdhyp {

// Constant-coefficient system u_t + sum A^k u_k = theta u with quadratic
// entropy eta = u^T H u / 2. H must symmetrize every A^k for the entropy
// pair to be compatible.
struct LinearSystemOptions {
  std::vector<Mat> A;
  Mat theta;
  Mat H;  // defaults to the identity
  int r = 1;
  std::string name = "linear";
  // Optional quadratic term added to Q: q_index receives quad_coeff * u_{quad_from}^2.
  int quad_index = -1;
  int quad_from = 0;
  double quad_coeff = 0.0;
};

SystemSpec make_linear_system(const LinearSystemOptions& opt);

// The 2x2 one-dimensional toy with A = [[0,1],[1,0]] and damping on the
// second unknown, embedded as the flat block of an n = 3 system.
SystemSpec toy_two_by_two();

}  // namespace pdhyp
