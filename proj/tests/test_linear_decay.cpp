#include "doctest.h"
#include "pdhyp/damped_euler.hpp"
#include "pdhyp/linear_decay.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <random>

using namespace pdhyp;
using std::numbers::pi;
using cd = std::complex<double>;

namespace {

// n = 4, r = 2, d = 2 flat system with Theta = diag(0, -1, -1).
LinearSymbol toy_symbol() {
  Mat a1(3, 3), a2(3, 3);
  a1 << 0, 1, 0, 1, 0, 0, 0, 0, 0;
  a2 << 0, 0, 1, 0, 0, 0, 1, 0, 0;
  Mat th = Mat::Zero(3, 3);
  th(1, 1) = th(2, 2) = -1.0;
  return linear_symbol({a1, a2}, th, BlockLayout{4, 2});
}

const LinearSymbol& euler_symbol() {
  static const LinearSymbol s = linear_symbol(*build_transformed(builtin_damped_euler(2, 2.0)));
  return s;
}

double max_diff(const SpectralField& a, const SpectralField& b) {
  double m = 0.0;
  for (size_t j = 0; j < a.size(); ++j) m = std::max(m, (a[j] - b[j]).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST_CASE("symbol at zero frequency is minus Theta") {
  const LinearSymbol s = toy_symbol();
  const Eigen::MatrixXcd z = s.symbol(Vec::Zero(2));
  CHECK((z + s.theta.cast<cd>()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero-frequency propagation decouples") {
  const LinearSymbol s = toy_symbol();
  const SymbolGrid g(s, {Vec::Zero(2)}, {1.0});
  SpectralField u0{Eigen::Vector3cd(1.0, 1.0, 1.0)};
  const SpectralField u = propagate_linear(g, u0, 1.0);
  CHECK(std::abs(u[0](0) - 1.0) < 1e-15);
  CHECK(std::abs(u[0](1) - std::exp(-1.0)) < 1e-14);
  CHECK(std::abs(u[0](2) - 0.367879441171442) < 1e-14);
  // the C component at xi = 0 stays put for all t
  for (double t : {0.5, 3.0, 40.0}) CHECK(std::abs(propagate_linear(g, u0, t)[0](0) - 1.0) < 1e-13);
}

TEST_CASE("semigroup laws") {
  const LinearSymbol s = euler_symbol();
  SymbolGridOptions o;
  o.shells = 12;
  o.angles = 6;
  const SymbolGrid g = make_radial_grid(s, o);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  SpectralField u0(g.size());
  for (auto& v : u0) {
    v.resize(3);
    for (int i = 0; i < 3; ++i) v(i) = cd(n01(rng), n01(rng));
  }
  CHECK(max_diff(propagate_linear(g, u0, 0.0), u0) == 0.0);
  for (auto [a, b] : {std::pair{0.3, 0.7}, std::pair{2.0, 5.0}, std::pair{0.01, 12.0}}) {
    const SpectralField lhs = propagate_linear(g, u0, a + b);
    const SpectralField rhs = propagate_linear(g, propagate_linear(g, u0, a), b);
    CHECK(max_diff(lhs, rhs) < 1e-10);
  }
}

TEST_CASE("Gaussian L2 norm by radial quadrature") {
  // ||exp(-|x|^2 / (2 R^2))||_{L^2}^2 = (pi R^2)^{d/2} per unit component
  const LinearSymbol s = euler_symbol();
  for (double R : {1.0, 3.0}) {
    SymbolGridOptions o;
    o.xi_min = 1e-4;
    const SymbolGrid g = make_radial_grid(s, o);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
    e(0) = 1.0;
    const double nrm = band_norm(g, gaussian_profile(g, R, e), Band::C);
    CHECK(nrm == doctest::Approx(std::sqrt(pi * R * R)).epsilon(1e-3));
    // |xi|^2 |f^|^2 integrates to ||grad f||^2 = (d / (2 R^2)) ||f||^2
    const double n1 = band_norm(g, gaussian_profile(g, R, e), Band::C, 1.0);
    CHECK(n1 * n1 == doctest::Approx(pi * R * R / (R * R)).epsilon(2e-3));
  }
}

TEST_CASE("lattice quadrature obeys Parseval against a direct DFT") {
  Mat a = Mat::Zero(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  Mat th = Mat::Zero(2, 2);
  th(1, 1) = -1.0;
  const LinearSymbol s = linear_symbol({a}, th, BlockLayout{3, 2});
  const int N = 32;
  const double side = 8.0 * pi, dx = side / N;
  const SymbolGrid g = make_lattice_grid(s, N, side);
  std::vector<double> f(N);
  double l2 = 0.0;
  for (int i = 0; i < N; ++i) {
    f[i] = std::exp(-std::pow(i * dx - 0.5 * side, 2) / 4.0) + 0.1 * std::sin(3 * 2 * pi * i / N);
    l2 += f[i] * f[i] * dx;
  }
  SpectralField fh(N);
  for (int j = 0; j < N; ++j) {
    cd acc = 0.0;
    for (int i = 0; i < N; ++i) acc += f[i] * std::exp(cd(0.0, -g.xi(j)(0) * i * dx)) * dx;
    fh[j] = Eigen::Vector2cd(acc, 0.0);
  }
  CHECK(band_norm(g, fh, Band::C) == doctest::Approx(std::sqrt(l2)).epsilon(1e-12));
  CHECK(band_norm(g, fh, Band::D) == 0.0);
}

TEST_CASE("damped Euler linear decay slopes") {
  const LinearSymbol& s = euler_symbol();
  LinearExperiment ex;
  const DecayTrace p1 = linear_lp_decay_experiment(s, ex);
  REQUIRE(p1.t.size() == 32);
  const auto* c = p1.find_fit("norm_C");
  const auto* d = p1.find_fit("norm_D");
  REQUIRE(c->ok);
  REQUIRE(d->ok);
  CHECK(c->predicted == doctest::Approx(-0.5));
  CHECK(d->predicted == doctest::Approx(-1.0));
  CHECK(std::abs(c->fit.slope + 0.5) < 0.05);
  CHECK(std::abs(d->fit.slope + 1.0) < 0.1);
  CHECK(p1.column("fit_slope_C").front() == c->fit.slope);
  for (double x : p1.column("norm_D")) CHECK(x > 0.0);

  ex.p = 2.0;
  const DecayTrace p2 = linear_lp_decay_experiment(s, ex);
  CHECK(std::abs(p2.find_fit("norm_C")->fit.slope) < 0.05);

  ex.p = 1.5;
  const DecayTrace p15 = linear_lp_decay_experiment(s, ex);
  CHECK(std::abs(p15.find_fit("norm_C")->fit.slope - p15.find_fit("norm_C")->predicted) < 0.05);
  CHECK(std::abs(p15.find_fit("norm_D")->fit.slope - p15.find_fit("norm_D")->predicted) < 0.05);
}

TEST_CASE("undamped symbol does not decay") {
  LinearExperiment ex;
  const DecayTrace tr = linear_lp_decay_experiment(without_damping(euler_symbol()), ex);
  CHECK(tr.find_fit("norm_D")->fit.slope >= -0.1);
  CHECK(tr.find_fit("norm_C")->fit.slope >= -0.1);
}

TEST_CASE("experiment rejects short fit windows") {
  LinearExperiment ex;
  ex.samples = 7;
  CHECK_THROWS_AS(linear_lp_decay_experiment(euler_symbol(), ex), FitError);
  ex.samples = 32;
  ex.p = 2.5;
  CHECK_THROWS_AS(linear_lp_decay_experiment(euler_symbol(), ex), ConfigError);
}

TEST_CASE("pointwise bounds for damped Euler") {
  const PointwiseBoundsReport a = verify_pointwise_bounds(euler_symbol());
  CHECK(a.passed);
  CHECK(a.c_low_C > 0.0);
  CHECK(a.c_low_D > 0.0);
  CHECK(a.c_fast > 0.0);
  CHECK(a.xi_c > 0.0);
  PointwiseBoundsOptions fine;
  fine.grid.shells *= 2;
  fine.grid.angles *= 2;
  const PointwiseBoundsReport b = verify_pointwise_bounds(euler_symbol(), fine);
  CHECK(std::abs(b.c_low_C / a.c_low_C - 1.0) < 0.02);
  CHECK(std::abs(b.c_low_D / a.c_low_D - 1.0) < 0.02);
}

TEST_CASE("pointwise bounds fail without damping") {
  const PointwiseBoundsReport r = verify_pointwise_bounds(without_damping(euler_symbol()));
  CHECK_FALSE(r.passed);
  CHECK_FALSE(r.note.empty());
}

TEST_CASE("predicted exponents") {
  const DecayPrediction t3 = predicted_exponents(2, 1, 1, 0, Component::D, Regime::WaveLq);
  CHECK(t3.exponent == doctest::Approx(-1.0));
  CHECK(t3.admissible);
  const DecayPrediction t1 = predicted_exponents(3, 2, 2, 0, Component::C, Regime::HighDim);
  CHECK(t1.exponent == 0.0);
  CHECK_FALSE(t1.admissible);
  CHECK(predicted_exponents(5, 2, 2, 0, Component::C, Regime::HighDim).admissible);
  const DecayPrediction ok = predicted_exponents(3, 1, 1, 0.5, Component::C, Regime::HighDim);
  CHECK(ok.admissible);
  CHECK(ok.exponent == doctest::Approx(-0.75 - 0.25));
  CHECK(ok.s1_star == doctest::Approx(1.0));
  CHECK(ok.p_star == doctest::Approx(1.5));
  // s above the D cap s1* - 1 = 0 for p = 1
  CHECK_FALSE(predicted_exponents(3, 1, 1, 0.5, Component::D, Regime::HighDim).admissible);
  // the refined high-dimensional regime excludes d = 2
  CHECK_FALSE(predicted_exponents(2, 1, 1, 0, Component::C, Regime::HighDimRefined).admissible);
  // the wave L^q regime needs p <= q
  CHECK_FALSE(predicted_exponents(2, 1.5, 1.2, 0, Component::C, Regime::WaveLq).admissible);
  const DecayPrediction s3 = predicted_exponents(2, 1, 1.5, 0, Component::C, Regime::WaveLq, 4.0);
  CHECK(s3.s3_star == doctest::Approx(std::min({2.0 * (0.5 + 1.0 / 1.5 - 1.0) + 1.0, 2.0, 3.0})));
  const auto back = prediction_from_json(to_json(t1));
  CHECK(to_json(back).dump() == to_json(t1).dump());
}

TEST_CASE("Duhamel residual of a linear run vanishes") {
  Mat a = Mat::Zero(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  Mat th = Mat::Zero(2, 2);
  th(1, 1) = -1.0;
  const LinearSymbol s = linear_symbol({a}, th, BlockLayout{3, 2});
  const SymbolGrid g = make_lattice_grid(s, 16, 4 * pi);
  SpectralField u0(g.size());
  for (int j = 0; j < g.size(); ++j) u0[j] = Eigen::Vector2cd(std::exp(-g.radius(j)), cd(0.0, 0.3));
  std::vector<double> tau;
  std::vector<SpectralField> zero;
  for (int i = 0; i <= 64; ++i) {
    tau.push_back(i / 64.0);
    zero.emplace_back(g.size(), Eigen::VectorXcd::Zero(2));
  }
  const DuhamelResult r = duhamel_residual(g, u0, propagate_linear(g, u0, 1.0), tau, zero);
  CHECK(r.residual < 1e-8);
  CHECK_FALSE(r.coarse_warning);
  const DuhamelResult r0 = duhamel_residual(g, u0, u0, {0.0}, {zero[0]});
  CHECK(r0.residual == 0.0);
}

TEST_CASE("Duhamel quadrature converges at second order") {
  Mat a = Mat::Zero(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  Mat th = Mat::Zero(2, 2);
  th(1, 1) = -1.0;
  const LinearSymbol s = linear_symbol({a}, th, BlockLayout{3, 2});
  const SymbolGrid g = make_lattice_grid(s, 16, 4 * pi);
  const double decay = 0.7, t = 1.0;
  // forcing N(tau) = e^{-decay tau} f has the closed-form Duhamel integral
  // (S - decay)^{-1} (e^{-decay t} - e^{-t S}) f
  SpectralField f(g.size()), u0(g.size()), ut(g.size());
  for (int j = 0; j < g.size(); ++j) {
    f[j] = Eigen::Vector2cd(1.0, 0.5) * std::exp(-0.3 * g.radius(j));
    u0[j] = Eigen::Vector2cd(0.2, -0.1);
    const Eigen::MatrixXcd S = s.symbol(g.xi(j));
    const Eigen::MatrixXcd E = (-t * S).exp();
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(2, 2);
    ut[j] = E * u0[j] + (S - decay * I).partialPivLu().solve((std::exp(-decay * t) * I - E) * f[j]);
  }
  auto run = [&](int steps) {
    std::vector<double> tau;
    std::vector<SpectralField> nl;
    for (int i = 0; i <= steps; ++i) {
      tau.push_back(t * i / steps);
      SpectralField ni(g.size());
      for (int j = 0; j < g.size(); ++j) ni[j] = std::exp(-decay * tau.back()) * f[j];
      nl.push_back(ni);
    }
    return duhamel_residual(g, u0, ut, tau, nl).residual;
  };
  const double r64 = run(64), r128 = run(128);
  CHECK(r64 > 0.0);
  CHECK(r64 / r128 >= 3.5);
  CHECK(r64 / r128 <= 4.5);
}

TEST_CASE("power-law fit") {
  std::vector<double> t = log_space(1.0, 100.0, 20), y;
  for (double x : t) y.push_back(3.0 * std::pow(x, -0.75));
  const PowerFit f = fit_power_law(t, y, 1.0, 100.0);
  CHECK(f.slope == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.points == 20);
  CHECK_THROWS_AS(fit_power_law(t, y, 1.0, 2.0), FitError);
  // noisy data: the interval brackets the true slope
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01(0.0, 0.02);
  for (auto& v : y) v *= std::exp(n01(rng));
  const PowerFit g = fit_power_law(t, y, 1.0, 100.0);
  CHECK(g.ci_low < -0.75);
  CHECK(g.ci_high > -0.75);
  CHECK(g.ci_high - g.ci_low < 0.1);
}

TEST_CASE("decay trace round-trips through CSV and JSON") {
  DecayTrace tr;
  tr.label = "demo";
  tr.t = log_space(1.0, 10.0, 9);
  auto& a = tr.add_column("n_C_s0");
  for (double x : tr.t) a.push_back(1.0 / x);
  auto& b = tr.add_column("n_D_s0");
  for (double x : tr.t) b.push_back(1.0 / (x * x));
  tr.fit("n_C_s0", 1.0, 10.0);
  tr.fit("n_D_s0", 5.0, 10.0);  // too few points, recorded as an error
  CHECK(tr.find_fit("n_C_s0")->ok);
  CHECK_FALSE(tr.find_fit("n_D_s0")->ok);
  tr.predictions.push_back(predicted_exponents(2, 1, 1, 0, Component::C, Regime::Linear));
  const std::string csv = to_csv(tr);
  CHECK(csv.rfind("t,n_C_s0,n_D_s0\n", 0) == 0);
  const DecayTrace back = decay_trace_from_csv(csv);
  CHECK(to_csv(back) == csv);
  const auto j = to_json(tr);
  CHECK(to_json(decay_trace_from_json(j)).dump() == j.dump());
}
