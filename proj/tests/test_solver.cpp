#include "doctest.h"
#include "helpers.hpp"
#include "pdhyp/damped_euler.hpp"
#include "pdhyp/solver.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace pdhyp;
using std::numbers::pi;

namespace {

std::shared_ptr<TransformedSystem> euler_ts(int d) {
  static std::shared_ptr<TransformedSystem> c[3];
  if (!c[d]) c[d] = build_transformed(builtin_damped_euler(d, 2.0));
  return c[d];
}

RealField gaussian_field(const BoxGrid& g, int rows, double width, double amp) {
  RealField f(rows, g.points());
  const Vec c = Vec::Constant(g.d, 0.5 * g.side);
  for (int p = 0; p < g.points(); ++p) {
    const double r2 = (g.position(p) - c).squaredNorm();
    for (int i = 0; i < rows; ++i) f(i, p) = amp * (1.0 + 0.3 * i) * std::exp(-r2 / (2 * width * width));
  }
  return f;
}

double max_abs(const RealField& f) { return f.cwiseAbs().maxCoeff(); }

SimConfig small_config(int N, double side) {
  SimConfig c;
  c.N = N;
  c.side = side;
  c.t_end = 1.0;
  c.record_every = 0.5;
  c.fit_t_min = 0.0;
  c.fit_t_max = 1.0;
  return c;
}

}  // namespace

TEST_CASE("box grid bookkeeping") {
  CHECK_THROWS_AS(BoxGrid(2, 16, 1.0), ConfigError);
  CHECK_THROWS_AS(BoxGrid(2, 48, 1.0), ConfigError);
  CHECK_THROWS_AS(BoxGrid(3, 32, 1.0), ConfigError);
  const BoxGrid g(2, 32, 2 * pi);
  CHECK(g.modes() == 32 * 17);
  double w = 0.0;
  int kept = 0;
  for (int m = 0; m < g.modes(); ++m) {
    w += g.hermitian_weight(m);
    kept += g.kept(m);
  }
  CHECK(w == g.points());
  CHECK(kept == 21 * 11);  // |i| <= 10 on the full axis, 0..10 on the half axis
  CHECK(g.wavevector(1)(1) == doctest::Approx(1.0));
  CHECK(g.mode_index(31 * 17)[0] == -1);
}

TEST_CASE("transform round trip and spectral derivative") {
  const BoxGrid g(2, 32, 4 * pi);
  Fourier fft(g);
  RealField f(1, g.points());
  for (int p = 0; p < g.points(); ++p) {
    const Vec x = g.position(p);
    f(0, p) = std::sin(x(0)) * std::cos(1.5 * x(1)) + 0.2;
  }
  const ComplexField s = fft.forward(f);
  CHECK(max_abs(fft.backward(s) - f) < 1e-14);
  const RealField dy = fft.backward(fft.derivative(s, 1));
  double e = 0.0;
  for (int p = 0; p < g.points(); ++p) {
    const Vec x = g.position(p);
    e = std::max(e, std::abs(dy(0, p) + 1.5 * std::sin(x(0)) * std::sin(1.5 * x(1))));
  }
  CHECK(e < 1e-13);
}

TEST_CASE("Lambda^s norms") {
  const BoxGrid g(2, 64, 8 * pi);
  Fourier fft(g);
  SUBCASE("s = 0 is the plain L2 norm") {
    const RealField f = gaussian_field(g, 2, 1.5, 1.0);
    const double direct = std::sqrt(f.squaredNorm() * g.cell_volume());
    CHECK(lambda_s_norm(g, fft.forward(f), 0, 2, 0.0) == doctest::Approx(direct).epsilon(1e-13));
  }
  SUBCASE("single mode") {
    RealField f(1, g.points());
    const double A = 0.7;
    for (int p = 0; p < g.points(); ++p) f(0, p) = A * std::cos(3 * 2 * pi / g.side * g.position(p)(0) + 2 * 2 * pi / g.side * g.position(p)(1));
    const double k = 2 * pi / g.side * std::sqrt(13.0);
    for (double s : {0.0, 0.5, 1.0, 2.0})
      CHECK(lambda_s_norm(g, fft.forward(f), 0, 1, s) ==
            doctest::Approx(std::pow(k, s) * A * std::sqrt(g.volume() / 2)).epsilon(1e-12));
  }
  SUBCASE("Lambda^1 equals the gradient norm") {
    const RealField f = gaussian_field(g, 1, 1.5, 1.0);
    const ComplexField s = fft.forward(f);
    double grad2 = 0.0;
    for (int k = 0; k < 2; ++k) grad2 += fft.backward(fft.derivative(s, k)).squaredNorm() * g.cell_volume();
    CHECK(std::abs(lambda_s_norm(g, s, 0, 1, 1.0) - std::sqrt(grad2)) < 1e-10);
  }
  SUBCASE("L^q norms") {
    RealField one = RealField::Constant(1, g.points(), 2.0);
    CHECK(lq_norm(g, one, 0, 1, 1.0) == doctest::Approx(2.0 * g.volume()));
    CHECK(lq_norm(g, one, 0, 1, 2.0) == doctest::Approx(2.0 * std::sqrt(g.volume())));
    CHECK(lq_norm(g, one, 0, 1, INFINITY) == 2.0);
  }
}

TEST_CASE("initial data families") {
  const auto ts = euler_ts(2);
  const BoxGrid g(2, 128, 40 * pi);
  InitialData data;
  data.amplitude = 0.0;
  const RealField zero = make_initial_data(g, *ts, data);
  CHECK(max_abs(zero) == 0.0);
  const InitialNorms nz = initial_norms(g, *ts, zero, 1.0, 1.0);
  CHECK(nz.h_ell == 0.0);
  CHECK(nz.c_lp == 0.0);

  data.amplitude = 0.01;
  data.groups = {Group::D};
  const RealField dd = make_initial_data(g, *ts, data);
  CHECK(max_abs(dd.topRows(2)) == 0.0);
  CHECK(max_abs(dd.bottomRows(2)) > 0.009);
  const InitialNorms nd = initial_norms(g, *ts, dd, 1.0, 1.0);
  CHECK(nd.c_lp == 0.0);
  CHECK(nd.u1_lq == 0.0);
  CHECK(nd.d_lpstar > 0.0);

  // dilation R -> 2R at fixed amplitude, on a grid resolving both widths
  const BoxGrid fine(2, 256, 40 * pi);
  data.groups = {Group::C};
  data.width = 2.0;
  const RealField narrow = make_initial_data(fine, *ts, data);
  const InitialNorms a = initial_norms(fine, *ts, narrow, 1.0, 2.0);
  data.width = 4.0;
  const RealField wide = make_initial_data(fine, *ts, data);
  const InitialNorms b = initial_norms(fine, *ts, wide, 1.0, 2.0);
  CHECK(b.c_lp / a.c_lp == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(lq_norm(fine, wide, 1, 1, 2.0) / lq_norm(fine, narrow, 1, 1, 2.0) == doctest::Approx(2.0).epsilon(1e-6));

  data.amplitude = 1.0;
  try {
    make_initial_data(g, *ts, data);
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("amplitude outside chart domain") != std::string::npos);
  }

  data.amplitude = 0.01;
  data.groups.clear();
  data.family = DataFamily::Packet;
  data.wavenumber = {6.0, 0.0};
  const RealField pk = make_initial_data(g, *ts, data);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(pk.row(i).sum()) * g.cell_volume() < 1e-12 * lq_norm(g, pk, i, 1, 1.0));
}

TEST_CASE("equilibria are fixed points") {
  const auto sys = builtin_damped_euler(2, 2.0);
  SimConfig c = small_config(32, 8 * pi);
  for (Integrator it : {Integrator::IfRk4, Integrator::Rk4}) {
    c.integrator = it;
    Simulator sim(sys, c, euler_ts(2));
    const RealField zero = RealField::Zero(4, sim.grid().points());
    CHECK(max_abs(sim.advance(zero, 100.0, 0.1)) < 1e-12);
    // constant (S, rho, 0) with vanishing source
    RealField k = RealField::Zero(4, sim.grid().points());
    k.row(0).setConstant(0.01);
    k.row(1).setConstant(-0.02);
    const RealField k1 = sim.advance(k, 0.1, 0.1);
    CHECK(max_abs(k1 - k) < 1e-13);
  }
}

TEST_CASE("constant velocity decays like exp(-t)") {
  const auto sys = builtin_damped_euler(2, 2.0);
  SimConfig c = small_config(32, 8 * pi);
  RealField s = RealField::Zero(4, 32 * 32);
  s.row(2).setConstant(0.01);
  s.row(3).setConstant(-0.005);
  Simulator ifs(sys, c, euler_ts(2));
  RealField out = ifs.advance(s, 2.0, 0.1);
  CHECK(std::abs(out(2, 7) - 0.01 * std::exp(-2.0)) < 1e-15);
  CHECK(std::abs(out(3, 100) + 0.005 * std::exp(-2.0)) < 1e-15);
  c.integrator = Integrator::Rk4;
  Simulator rk(sys, c, euler_ts(2));
  const double e1 = std::abs(rk.advance(s, 2.0, 0.1)(2, 0) - 0.01 * std::exp(-2.0));
  const double e2 = std::abs(rk.advance(s, 2.0, 0.05)(2, 0) - 0.01 * std::exp(-2.0));
  CHECK(e1 < 1e-7);
  CHECK(e1 / e2 > 15.0);
}

TEST_CASE("time stepping converges at fourth order") {
  const auto sys = builtin_damped_euler(2, 2.0);
  SimConfig c = small_config(32, 8 * pi);
  for (Integrator it : {Integrator::IfRk4, Integrator::Rk4}) {
    c.integrator = it;
    Simulator sim(sys, c, euler_ts(2));
    InitialData data;
    data.amplitude = 0.08;
    data.width = 1.5;
    const RealField u0 = sim.to_state(make_initial_data(sim.grid(), sim.transformed(), data));
    const RealField ref = sim.advance(u0, 1.0, 1.0 / 64);
    const double e1 = max_abs(sim.advance(u0, 1.0, 1.0 / 8) - ref);
    const double e2 = max_abs(sim.advance(u0, 1.0, 1.0 / 16) - ref);
    CAPTURE(to_string(it));
    CHECK(e1 > 1e-12);
    CHECK(e1 / e2 >= 15.0);
  }
}

TEST_CASE("chart and original modes agree") {
  const auto ts = euler_ts(1);
  const auto sys = builtin_damped_euler(1, 2.0);
  SimConfig c = small_config(32, 8 * pi);
  c.initial.amplitude = 0.02;
  c.initial.width = 1.5;
  c.record_every = 0.25;
  const SimResult a = Simulator(sys, c, ts).run();
  c.mode = SimMode::Chart;
  const SimResult b = Simulator(sys, c, ts).run();
  for (const char* col : {"E_entropy", "n_u1_s0", "n_C_s0", "n_D_s0", "v1_Lq"}) {
    CAPTURE(col);
    CHECK(a.trace.column(col).back() == doctest::Approx(b.trace.column(col).back()).epsilon(1e-7));
  }
}

TEST_CASE("fast v1 matches the pointwise definition") {
  const auto ts = euler_ts(2);
  const auto sys = builtin_damped_euler(2, 2.0);
  SimConfig c = small_config(32, 8 * pi);
  c.initial.amplitude = 0.05;
  c.t_end = 0.0;
  c.norms = {{0.0, Group::V1}};
  c.q = INFINITY;
  const SimResult r = Simulator(sys, c, ts).run();
  const BoxGrid g(2, 32, 8 * pi);
  const RealField ut = make_initial_data(g, *ts, c.initial);
  double m = 0.0;
  for (int p = 0; p < g.points(); ++p) m = std::max(m, std::abs(v1_value(*ts, ts->at(Vec(ut.col(p))))));
  CHECK(r.trace.column("v1_Lq").front() == doctest::Approx(m).epsilon(1e-8));
}

TEST_CASE("small-data run dissipates entropy and is deterministic") {
  const auto sys = builtin_damped_euler(2, 2.0);
  SimConfig c = small_config(64, 16 * pi);
  c.t_end = 8.0;
  c.record_every = 0.5;
  c.fit_t_min = 2.0;
  c.fit_t_max = 8.0;
  const SimResult a = Simulator(sys, c, euler_ts(2)).run();
  const SimResult b = Simulator(sys, c, euler_ts(2)).run();
  CHECK(to_csv(a.trace) == to_csv(b.trace));
  const auto& e = a.trace.column("E_entropy");
  REQUIRE(e.size() == 17);
  // increase per unit time at most 1e-6 relative
  for (size_t i = 1; i < e.size(); ++i) CHECK(e[i] - e[i - 1] <= 1e-6 * e[i - 1] * c.record_every);
  CHECK(e[0] > 0.0);
  for (const auto& col : a.trace.columns)
    for (double x : col.second) CHECK(x >= 0.0);
  CHECK_FALSE(a.trace.blowup);
  const auto back = decay_trace_from_json(to_json(a.trace));
  CHECK(to_json(back).dump() == to_json(a.trace).dump());
  CHECK(to_csv(decay_trace_from_csv(to_csv(a.trace))) == to_csv(a.trace));
  CHECK(a.trace.find_fit("n_D_s0")->has_prediction);
}

TEST_CASE("Plancherel consistency with the solver transform") {
  const auto ts = euler_ts(2);
  const LinearSymbol sym = linear_symbol(*ts);
  const BoxGrid g(2, 64, 16 * pi);
  Fourier fft(g);
  const RealField f = gaussian_field(g, 3, 2.0, 0.01);
  const ComplexField s = fft.forward(f);
  const SymbolGrid sg = box_symbol_grid(g, sym);
  for (double t : {0.0, 0.7, 3.0}) {
    const SpectralField u = propagate_linear(sg, to_symbol_field(g, s, 0, 3), t);
    ComplexField back(3, g.modes());
    for (int m = 0; m < g.modes(); ++m) back.col(m) = u[m] / g.cell_volume();
    const RealField phys = fft.backward(back);
    const double direct = std::sqrt(phys.squaredNorm() * g.cell_volume());
    CHECK(std::abs(band_norm(sg, u, Band::Flat) - direct) < 1e-8 * direct);
    const double direct_d = std::sqrt(phys.bottomRows(2).squaredNorm() * g.cell_volume());
    CHECK(std::abs(band_norm(sg, u, Band::D) - direct_d) < 1e-8 * direct);
  }
}

TEST_CASE("Duhamel oracle on solver runs") {
  const auto ts = euler_ts(1);
  const auto sys = builtin_damped_euler(1, 2.0);
  const LinearSymbol sym = linear_symbol(*ts);
  SimConfig c = small_config(32, 8 * pi);
  c.initial.amplitude = 0.05;
  c.initial.width = 1.5;
  c.store_duhamel = true;
  c.record_every = 1.0 / 256;
  c.norms = {{0.0, Group::C}};
  SUBCASE("linear run") {
    c.mode = SimMode::Linearized;
    const SimResult r = Simulator(sys, c, ts).run();
    CHECK(duhamel_check(r, BoxGrid(1, 32, 8 * pi), sym, 1).residual < 1e-8);
  }
  SUBCASE("nonlinear run shrinks at second order") {
    c.mode = SimMode::Chart;
    const SimResult r = Simulator(sys, c, ts).run();
    const BoxGrid g(1, 32, 8 * pi);
    const DuhamelResult fine = duhamel_check(r, g, sym, 1);
    const DuhamelResult coarse = duhamel_check(r, g, sym, 2);
    CHECK(coarse.residual > 0.0);
    CHECK(coarse.residual / fine.residual >= 3.5);
    CHECK_FALSE(coarse.coarse_warning);
  }
  SUBCASE("original mode cannot store Duhamel data") {
    CHECK_THROWS_AS(Simulator(sys, c, ts), ConfigError);
  }
}

TEST_CASE("snapshots round-trip") {
  Snapshot s;
  s.d = 2;
  s.N = 32;
  s.n = 3;
  s.time = 1.25;
  s.field = RealField::Random(3, 32 * 32);
  const auto path = (std::filesystem::temp_directory_path() / "pdhyp_snap_test.bin").string();
  write_snapshot(path, s);
  CHECK(std::filesystem::file_size(path) == 8 + 12 + 8 + 3 * 1024 * 8);
  const Snapshot b = read_snapshot(path);
  CHECK(b.d == 2);
  CHECK(b.N == 32);
  CHECK(b.n == 3);
  CHECK(b.time == 1.25);
  CHECK(b.field == s.field);
  std::ofstream(path, std::ios::binary) << "NOTASNAP";
  CHECK_THROWS_AS(read_snapshot(path), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("simulation config JSON") {
  SimConfig c;
  c.N = 128;
  c.mode = SimMode::Chart;
  c.initial.groups = {Group::C, Group::D};
  c.norms = {{1.0, Group::D}, {0.0, Group::V1}};
  const auto j = to_json(c);
  CHECK(to_json(sim_config_from_json(j)).dump() == j.dump());
  auto bad = j;
  bad["cfll"] = 0.3;
  CHECK_THROWS_AS(sim_config_from_json(bad), ConfigError);
  bad = j;
  bad["initial"]["family"] = "square";
  CHECK_THROWS_AS(sim_config_from_json(bad), ConfigError);
}

TEST_CASE("leaving the chart ball is reported, not thrown") {
  DampedEulerOptions o;
  o.d = 1;
  o.mass_source = 40.0;
  const auto sys = builtin_damped_euler(o);
  SimConfig c = small_config(32, 8 * pi);
  c.initial.amplitude = 0.1;
  c.t_end = 10.0;
  const SimResult r = Simulator(sys, c).run();
  CHECK(r.trace.blowup);
  CHECK(r.trace.blowup_time > 0.0);
  CHECK(r.trace.t.size() < 21);
  CHECK_FALSE(r.trace.blowup_reason.empty());
}
