#include "doctest.h"
#include "helpers.hpp"
#include "pdhyp/damped_euler.hpp"
#include "pdhyp/eigenstructure.hpp"
#include "pdhyp/linear_system.hpp"

#include <cmath>

using namespace pdhyp;
using testing_util::max_abs;

namespace {

// Roots of the monic characteristic polynomial of a 3x3 matrix, refined by
// Newton iteration from a given guess. Independent of any eigen-solver.
double refine_char_root(const Mat& a, double x) {
  const double c2 = -a.trace();
  const double c1 = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) + a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0) +
                    a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
  const double c0 = -a.determinant();
  for (int it = 0; it < 50; ++it) {
    const double f = ((x + c2) * x + c1) * x + c0;
    const double df = (3.0 * x + 2.0 * c2) * x + c1;
    x -= f / df;
  }
  return x;
}

}  // namespace

TEST_CASE("analytic Euler packet at rest has the expected spectrum and r1") {
  const SystemSpec sys = builtin_damped_euler(2, 2.0);
  Vec w(2);
  w << 1.0, 0.0;
  const EigenPacket p = eigen_decompose(sys, sys.equilibrium, w);
  CHECK(p.lambda(0) == 0.0);
  CHECK(p.lambda(1) == 0.0);
  CHECK(p.lambda(2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(p.lambda(3) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));
  Vec r1(4);
  r1 << 1.0, -0.5, 0.0, 0.0;
  CHECK((p.right.col(0) - r1).norm() < 1e-15);
}

TEST_CASE("analytic Euler packet is biorthonormal and diagonalizes A") {
  for (int d = 1; d <= 3; ++d) {
    DampedEulerOptions o;
    o.d = d;
    o.eos.gamma = 1.4;
    o.S_star = 0.2;
    const SystemSpec sys = builtin_damped_euler(o);
    std::mt19937_64 rng(100 + d);
    for (int t = 0; t < 40; ++t) {
      Vec u = sys.equilibrium + testing_util::random_in_ball(rng, sys.n, 0.25);
      Vec w = testing_util::random_unit(rng, d);
      const EigenPacket p = eigen_decompose(sys, u, w);
      const PacketResiduals res = verify_packet(p, direction_matrix(sys, u, w));
      CHECK(res.max() < 1e-12);
    }
  }
}

TEST_CASE("zeroing a left row breaks biorthonormality on that diagonal entry") {
  const SystemSpec sys = builtin_damped_euler(2, 2.0);
  Vec w(2);
  w << 0.6, 0.8;
  EigenPacket p = eigen_decompose(sys, sys.equilibrium, w);
  p.left.row(2).setZero();
  const PacketResiduals res = verify_packet(p, direction_matrix(sys, sys.equilibrium, w));
  CHECK(res.biorthonormality == doctest::Approx(1.0));
}

TEST_CASE("numeric decomposition of random hyperbolic 3x3 matrices") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    Mat S(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) S(i, j) = uni(rng) + (i == j ? 2.0 : 0.0);
    Vec diag(3);
    diag << -1.0 + 0.3 * uni(rng), 0.1 * uni(rng), 1.0 + 0.3 * uni(rng);
    const Mat A = S * diag.asDiagonal() * S.inverse();
    LinearSystemOptions o;
    o.A = {A};
    o.theta = Mat::Zero(3, 3);
    o.theta(2, 2) = -1.0;
    o.r = 2;
    const SystemSpec sys = make_linear_system(o);
    Vec w(1);
    w << 1.0;
    const EigenPacket p = eigen_decompose(sys, Vec::Zero(3), w);
    CHECK(verify_packet(p, A).max() < 1e-9);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(p.lambda(i) - refine_char_root(A, p.lambda(i))) < 1e-10);
  }
}

TEST_CASE("complex spectrum is reported as non-hyperbolic") {
  LinearSystemOptions o;
  Mat a = Mat::Zero(3, 3);
  a(1, 2) = 1.0;
  a(2, 1) = -1.0;
  o.A = {a};
  o.theta = Mat::Zero(3, 3);
  o.r = 2;
  const SystemSpec sys = make_linear_system(o);
  Vec w(1);
  w << 1.0;
  CHECK_THROWS_AS(eigen_decompose(sys, Vec::Zero(3), w), HyperbolicityError);
}

TEST_CASE("Jordan block is reported as degenerate") {
  LinearSystemOptions o;
  Mat a = Mat::Zero(3, 3);
  a(1, 2) = 1.0;
  o.A = {a};
  o.theta = Mat::Zero(3, 3);
  o.r = 2;
  const SystemSpec sys = make_linear_system(o);
  Vec w(1);
  w << 1.0;
  CHECK_THROWS_AS(eigen_decompose(sys, Vec::Zero(3), w), DegeneracyError);
}

TEST_CASE("numeric path recovers the Euler entropy family inside a repeated eigenvalue") {
  const SystemSpec sys = normalize_equilibrium(builtin_damped_euler(2, 2.0));
  DecomposeOptions opt;
  opt.use_provider = false;
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    Vec u = testing_util::random_in_ball(rng, 4, 0.1);
    Vec w = testing_util::random_unit(rng, 2);
    const EigenPacket num = eigen_decompose(sys, u, w, opt);
    const EigenPacket ana = eigen_decompose(sys, u, w);
    const Vec a = ana.right.col(0).normalized();
    const Vec b = num.right.col(0);
    CHECK(std::min((a - b).norm(), (a + b).norm()) < 1e-8);
    CHECK(num.lambda(0) == doctest::Approx(ana.lambda(0)).epsilon(1e-10));
    CHECK(!num.first_family_ambiguous);
    CHECK(verify_packet(num, direction_matrix(sys, u, w)).max() < 1e-9);
  }
}

TEST_CASE("undamped Euler leaves the first family ambiguous for the numeric labeller") {
  DampedEulerOptions o;
  o.undamped = true;
  const SystemSpec sys = normalize_equilibrium(builtin_damped_euler(o));
  DecomposeOptions opt;
  opt.use_provider = false;
  Vec w(2);
  w << 1.0, 0.0;
  CHECK(eigen_decompose(sys, Vec::Zero(4), w, opt).first_family_ambiguous);
}
