#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace pdhyp {

// Small dense objects never exceed this many unknowns; keeping a fixed
// upper bound lets Eigen avoid heap traffic in per-point loops.
inline constexpr int kMaxUnknowns = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxUnknowns, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxUnknowns, kMaxUnknowns>;
using CVec = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, 1, 0, kMaxUnknowns, 1>;
using CMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxUnknowns,
                           kMaxUnknowns>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct HyperbolicityError : Error {
  using Error::Error;
};
struct DegeneracyError : Error {
  using Error::Error;
};
struct StructureError : Error {
  using Error::Error;
};
struct FitError : Error {
  using Error::Error;
};

// Index bookkeeping for u = (u_1, u^C, u^D): u^C = u_2..u_r, u^D = u_{r+1}..u_n.
// Indices here are zero-based.
struct BlockLayout {
  int n = 0;
  int r = 0;

  int c_size() const { return r - 1; }
  int d_size() const { return n - r; }
  int flat_size() const { return n - 1; }

  static Vec flat(const Vec& u) { return u.tail(u.size() - 1); }
  Vec c_part(const Vec& u) const { return u.segment(1, r - 1); }
  Vec d_part(const Vec& u) const { return u.tail(n - r); }
  // Blocks of an n x n matrix.
  static Mat flat_block(const Mat& m) { return m.bottomRightCorner(m.rows() - 1, m.cols() - 1); }
  static Mat sharp_row(const Mat& m) { return m.topRightCorner(1, m.cols() - 1); }
  Mat d_block(const Mat& m) const { return m.bottomRightCorner(n - r, n - r); }
};

}  // namespace pdhyp
