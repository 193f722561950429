#include "doctest.h"
#include "helpers.hpp"
#include "pdhyp/damped_euler.hpp"
#include "pdhyp/fd.hpp"
#include "pdhyp/linear_system.hpp"
#include "pdhyp/system.hpp"

#include <cmath>

using namespace pdhyp;
using testing_util::max_abs;

TEST_CASE("damped Euler direction matrix at rest state") {
  const SystemSpec sys = builtin_damped_euler(2, 2.0);
  Vec u(4);
  u << 0.0, 1.0, 0.0, 0.0;
  Vec w(2);
  w << 1.0, 0.0;
  const Mat a = direction_matrix(sys, u, w);
  // p = rho^2: p_S / rho = 1, p_rho / rho = 2
  Mat expect = Mat::Zero(4, 4);
  expect(1, 2) = 1.0;
  expect(2, 0) = 1.0;
  expect(2, 1) = 2.0;
  CHECK(max_abs(a - expect) == 0.0);
}

TEST_CASE("direction must be a unit vector") {
  const SystemSpec sys = builtin_damped_euler(2, 2.0);
  Vec w(2);
  w << 1.0, 1.0;
  CHECK_THROWS_AS(direction_matrix(sys, sys.equilibrium, w), DomainError);
  Vec w3(3);
  w3 << 1.0, 0.0, 0.0;
  CHECK_THROWS_AS(direction_matrix(sys, sys.equilibrium, w3), DimensionError);
}

TEST_CASE("direction matrix is linear in omega") {
  const SystemSpec sys = builtin_damped_euler(3, 1.4);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    Vec u = sys.equilibrium + testing_util::random_in_ball(rng, sys.n, 0.2);
    Vec w = testing_util::random_unit(rng, 3);
    Mat sum = Mat::Zero(sys.n, sys.n);
    for (int k = 0; k < 3; ++k) sum += w(k) * sys.flux_jacobian(u, k);
    CHECK(max_abs(direction_matrix(sys, u, w) - sum) < 1e-15);
    CHECK(max_abs(direction_matrix(sys, u, -w) + direction_matrix(sys, u, w)) < 1e-15);
  }
}

TEST_CASE("normalization sends the equilibrium to the origin") {
  DampedEulerOptions o;
  o.d = 2;
  o.S_star = 1.0;
  o.rho_star = 2.0;
  const SystemSpec sys = normalize_equilibrium(builtin_damped_euler(o));
  const Vec z = Vec::Zero(4);
  CHECK(sys.source(z).norm() == 0.0);
  CHECK(sys.conserved(z).norm() < 1e-14);
  CHECK(max_abs(conserved_jacobian(sys, z) - Mat::Identity(4, 4)) < 1e-9);
  CHECK(max_abs(conserved_jacobian(sys, z, DerivativeMode::Analytic) - Mat::Identity(4, 4)) < 1e-14);
  CHECK(std::abs(sys.entropy(z)) < 1e-14);
  CHECK(entropy_gradient(sys, z).norm() < 1e-9);
  CHECK(entropy_gradient(sys, z, DerivativeMode::Analytic).norm() < 1e-14);
}

TEST_CASE("normalization is a fixed point on normalized systems") {
  const SystemSpec once = normalize_equilibrium(builtin_damped_euler(2, 2.0));
  const SystemSpec twice = normalize_equilibrium(once);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    Vec u = testing_util::random_in_ball(rng, 4, 0.2);
    CHECK(max_abs(once.flux_jacobian(u, 1) - twice.flux_jacobian(u, 1)) == 0.0);
    CHECK((once.conserved(u) - twice.conserved(u)).norm() == 0.0);
  }
}

TEST_CASE("equilibrium must be a zero of Q") {
  SystemSpec sys = builtin_damped_euler(2, 2.0);
  sys.equilibrium(2) = 0.1;
  CHECK_THROWS_AS(normalize_equilibrium(sys), ConfigError);
}

TEST_CASE("singular conserved Jacobian is rejected") {
  SystemSpec sys = toy_two_by_two();
  sys.conserved = [](const Vec& u) {
    Vec g = u;
    g(2) = u(1);
    return g;
  };
  sys.analytic.conserved_jacobian = nullptr;
  sys.equilibrium(0) = 0.5;  // forces the non-trivial path
  sys.source = [](const Vec& u) {
    Vec q = Vec::Zero(3);
    q(2) = -u(2);
    return q;
  };
  CHECK_THROWS_AS(normalize_equilibrium(sys), DegeneracyError);
}

TEST_CASE("analytic Euler derivatives agree with central differences") {
  DampedEulerOptions o;
  o.d = 2;
  o.S_star = 0.3;
  o.rho_star = 1.5;
  o.eos.gamma = 1.4;
  const SystemSpec sys = builtin_damped_euler(o);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 30; ++t) {
    Vec u = sys.equilibrium + testing_util::random_in_ball(rng, 4, 0.25);
    CHECK((entropy_gradient(sys, u, DerivativeMode::Analytic) - entropy_gradient(sys, u)).norm() < 1e-8);
    for (int k = 0; k < 2; ++k)
      CHECK((entropy_flux_gradient(sys, u, k, DerivativeMode::Analytic) - entropy_flux_gradient(sys, u, k)).norm() <
            1e-8);
    CHECK(max_abs(conserved_jacobian(sys, u, DerivativeMode::Analytic) - conserved_jacobian(sys, u)) < 1e-8);
  }
}

TEST_CASE("Euler entropy pair is compatible and dissipated by the damping") {
  DampedEulerOptions o;
  o.d = 3;
  o.S_star = 1.0;
  o.rho_star = 2.0;
  const SystemSpec sys = builtin_damped_euler(o);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    Vec u = sys.equilibrium + testing_util::random_in_ball(rng, sys.n, 0.25);
    const Vec ge = entropy_gradient(sys, u, DerivativeMode::Analytic);
    for (int k = 0; k < 3; ++k) {
      const Vec lhs = entropy_flux_gradient(sys, u, k, DerivativeMode::Analytic);
      const Vec rhs = sys.flux_jacobian(u, k).transpose() * ge;
      CHECK((lhs - rhs).norm() < 1e-12);
    }
    // grad(eta) . Q = -rho |v|^2
    const double v2 = u.tail(3).squaredNorm();
    CHECK(ge.dot(sys.source(u)) == doctest::Approx(-u(1) * v2).epsilon(1e-12));
  }
}

TEST_CASE("Euler entropy is strictly convex near equilibrium") {
  const SystemSpec sys = normalize_equilibrium(builtin_damped_euler(2, 2.0));
  const Mat h = entropy_hessian(sys, Vec::Zero(4));
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  CHECK(es.eigenvalues().minCoeff() > 0.1);
}

TEST_CASE("linear transform pulls back eigen data consistently") {
  const SystemSpec base = normalize_equilibrium(builtin_damped_euler(2, 2.0));
  Mat T = Mat::Identity(4, 4);
  T(1, 0) = -0.5;
  T(2, 3) = 0.3;
  const SystemSpec sys = apply_linear_transform(base, T);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    Vec u = testing_util::random_in_ball(rng, 4, 0.1);
    Vec w = testing_util::random_unit(rng, 2);
    const EigenPacket p = sys.eigen_provider(u, w);
    const Mat A = direction_matrix(sys, u, w);
    CHECK(max_abs(A * p.right - p.right * Mat(p.lambda.asDiagonal())) < 1e-12);
    CHECK(max_abs(p.left * p.right - Mat::Identity(4, 4)) < 1e-12);
  }
}
