#include "pdhyp/solver.hpp"

#include "pdhyp/dissipation.hpp"
#include "pdhyp/eigenstructure.hpp"

#include <fftw3.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace pdhyp {

using cd = std::complex<double>;
using std::numbers::pi;

BoxGrid::BoxGrid(int d_, int N_, double side_) : d(d_), N(N_), side(side_) {
  if (d < 1 || d > 2) throw ConfigError("box grids support d = 1 or 2");
  if (N < 32 || (N & (N - 1)) != 0) throw ConfigError("N must be a power of two and at least 32");
  if (!(side > 0.0)) throw ConfigError("box side must be positive");
}

int BoxGrid::points() const { return d == 1 ? N : N * N; }
int BoxGrid::modes() const { return d == 1 ? half() : N * half(); }
double BoxGrid::cell_volume() const { return std::pow(dx(), d); }
double BoxGrid::volume() const { return std::pow(side, d); }

Vec BoxGrid::position(int p) const {
  Vec x(d);
  if (d == 1) {
    x(0) = p * dx();
  } else {
    x(0) = (p / N) * dx();
    x(1) = (p % N) * dx();
  }
  return x;
}

std::vector<int> BoxGrid::mode_index(int m) const {
  if (d == 1) return {m};
  const int i0 = m / half();
  return {i0 <= N / 2 ? i0 : i0 - N, m % half()};
}

Vec BoxGrid::wavevector(int m) const {
  const auto idx = mode_index(m);
  Vec k(d);
  for (int a = 0; a < d; ++a) k(a) = 2.0 * pi / side * idx[a];
  return k;
}

double BoxGrid::hermitian_weight(int m) const {
  const int j = mode_index(m).back();
  return (j == 0 || j == N / 2) ? 1.0 : 2.0;
}

bool BoxGrid::kept(int m) const {
  for (int i : mode_index(m))
    if (3 * std::abs(i) > N) return false;
  return true;
}

// ---------------------------------------------------------------------------

Fourier::Fourier(const BoxGrid& g) : grid_(g) {
  const int M = g.modes();
  keep_.resize(M);
  index_.resize(static_cast<size_t>(M) * g.d);
  for (int m = 0; m < M; ++m) {
    keep_[m] = g.kept(m);
    const auto idx = g.mode_index(m);
    for (int a = 0; a < g.d; ++a) index_[static_cast<size_t>(m) * g.d + a] = idx[a];
  }
  rbuf_ = fftw_alloc_real(g.points());
  auto* c = fftw_alloc_complex(M);
  cbuf_ = c;
  if (g.d == 1) {
    fwd_ = fftw_plan_dft_r2c_1d(g.N, rbuf_, c, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_1d(g.N, c, rbuf_, FFTW_ESTIMATE);
  } else {
    fwd_ = fftw_plan_dft_r2c_2d(g.N, g.N, rbuf_, c, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(g.N, g.N, c, rbuf_, FFTW_ESTIMATE);
  }
}

Fourier::~Fourier() {
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
  fftw_free(rbuf_);
  fftw_free(cbuf_);
}

ComplexField Fourier::forward(const RealField& f) const {
  const int P = grid_.points(), M = grid_.modes();
  if (f.cols() != P) throw DimensionError("field does not match the grid");
  ComplexField out(f.rows(), M);
  for (Eigen::Index r = 0; r < f.rows(); ++r) {
    std::memcpy(rbuf_, f.row(r).data(), sizeof(double) * P);
    fftw_execute(static_cast<fftw_plan>(fwd_));
    std::memcpy(out.row(r).data(), cbuf_, sizeof(cd) * M);
  }
  return out;
}

RealField Fourier::backward(const ComplexField& f) const {
  const int P = grid_.points(), M = grid_.modes();
  if (f.cols() != M) throw DimensionError("spectrum does not match the grid");
  RealField out(f.rows(), P);
  const double scale = 1.0 / P;
  for (Eigen::Index r = 0; r < f.rows(); ++r) {
    std::memcpy(cbuf_, f.row(r).data(), sizeof(cd) * M);
    fftw_execute(static_cast<fftw_plan>(bwd_));
    for (int p = 0; p < P; ++p) out(r, p) = rbuf_[p] * scale;
  }
  return out;
}

ComplexField Fourier::derivative(const ComplexField& f, int axis) const {
  const int M = grid_.modes(), d = grid_.d, N = grid_.N;
  const double k0 = 2.0 * pi / grid_.side;
  ComplexField out(f.rows(), M);
  for (int m = 0; m < M; ++m) {
    const int i = index_[static_cast<size_t>(m) * d + axis];
    const cd mult = 2 * std::abs(i) == N ? cd(0.0) : cd(0.0, k0 * i);
    out.col(m) = f.col(m) * mult;
  }
  return out;
}

void Fourier::dealias(ComplexField& f) const {
  for (int m = 0; m < grid_.modes(); ++m)
    if (!keep_[m]) f.col(m).setZero();
}

// ---------------------------------------------------------------------------

std::string to_string(Group g) {
  switch (g) {
    case Group::U1: return "u1";
    case Group::C: return "C";
    case Group::D: return "D";
    default: return "v1";
  }
}

Group group_from_string(const std::string& s) {
  if (s == "u1") return Group::U1;
  if (s == "C" || s == "c") return Group::C;
  if (s == "D" || s == "d") return Group::D;
  if (s == "v1") return Group::V1;
  throw ConfigError("unknown norm group '" + s + "' (expected u1, C, D or v1)");
}

double lambda_s_norm(const BoxGrid& grid, const ComplexField& spec, int row0, int rows, double s) {
  if (s < 0.0) throw ConfigError("Lambda^s needs s >= 0");
  double sum = 0.0;
  for (int m = 0; m < grid.modes(); ++m) {
    const double k2 = grid.wavevector(m).squaredNorm();
    const double mult = s == 0.0 ? 1.0 : (k2 == 0.0 ? 0.0 : std::pow(k2, s));
    if (mult == 0.0) continue;
    double a = 0.0;
    for (int r = row0; r < row0 + rows; ++r) a += std::norm(spec(r, m));
    sum += grid.hermitian_weight(m) * mult * a;
  }
  return std::sqrt(sum * grid.cell_volume() / grid.points());
}

double measure_lambda_s(const BoxGrid& grid, const ComplexField& spec, double s, Group group, int r) {
  const int n = static_cast<int>(spec.rows());
  switch (group) {
    case Group::U1: return lambda_s_norm(grid, spec, 0, 1, s);
    case Group::C: return lambda_s_norm(grid, spec, 1, r - 1, s);
    case Group::D: return lambda_s_norm(grid, spec, r, n - r, s);
    default: return lambda_s_norm(grid, spec, 0, 1, s);  // spectrum of v~_1 alone
  }
}

double lq_norm(const BoxGrid& grid, const RealField& f, int row0, int rows, double q) {
  if (!(q >= 1.0)) throw ConfigError("L^q needs q >= 1");
  double acc = 0.0;
  for (Eigen::Index p = 0; p < f.cols(); ++p) {
    const double a = f.block(row0, p, rows, 1).norm();
    if (std::isinf(q))
      acc = std::max(acc, a);
    else
      acc += std::pow(a, q);
  }
  if (std::isinf(q)) return acc;
  return std::pow(acc * grid.cell_volume(), 1.0 / q);
}

std::string to_string(Integrator i) { return i == Integrator::IfRk4 ? "if_rk4" : "rk4"; }

std::string to_string(SimMode m) {
  switch (m) {
    case SimMode::Chart: return "chart";
    case SimMode::Linearized: return "linearized";
    default: return "original";
  }
}

std::string to_string(DataFamily f) { return f == DataFamily::Gaussian ? "gaussian" : "packet"; }

Integrator integrator_from_string(const std::string& s) {
  if (s == "if_rk4") return Integrator::IfRk4;
  if (s == "rk4") return Integrator::Rk4;
  throw ConfigError("unknown integrator '" + s + "' (expected if_rk4 or rk4)");
}

SimMode sim_mode_from_string(const std::string& s) {
  if (s == "original") return SimMode::Original;
  if (s == "chart") return SimMode::Chart;
  if (s == "linearized") return SimMode::Linearized;
  throw ConfigError("unknown mode '" + s + "' (expected original, chart or linearized)");
}

DataFamily data_family_from_string(const std::string& s) {
  if (s == "gaussian") return DataFamily::Gaussian;
  if (s == "packet") return DataFamily::Packet;
  throw ConfigError("unknown initial-data family '" + s + "'");
}

// ---------------------------------------------------------------------------

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!keys.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

std::string fmt_s(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", s);
  return buf;
}

}  // namespace

nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json groups = nlohmann::json::array();
  for (Group g : c.initial.groups) groups.push_back(to_string(g));
  nlohmann::json norms = nlohmann::json::array();
  for (const auto& r : c.norms) norms.push_back({{"s", r.s}, {"group", to_string(r.group)}});
  return {{"N", c.N},
          {"side", c.side},
          {"cfl", c.cfl},
          {"t_end", c.t_end},
          {"record_every", c.record_every},
          {"integrator", to_string(c.integrator)},
          {"mode", to_string(c.mode)},
          {"initial",
           {{"family", to_string(c.initial.family)},
            {"amplitude", c.initial.amplitude},
            {"width", c.initial.width},
            {"profile", c.initial.profile},
            {"groups", groups},
            {"center", c.initial.center},
            {"wavenumber", c.initial.wavenumber}}},
          {"norms", norms},
          {"q", c.q},
          {"p", c.p},
          {"regime", to_string(c.regime)},
          {"ell", c.ell},
          {"fit_t_min", c.fit_t_min},
          {"fit_t_max", c.fit_t_max},
          {"blowup_norm", c.blowup_norm},
          {"saturation_mass", c.saturation_mass},
          {"saturation_radius", c.saturation_radius},
          {"store_duhamel", c.store_duhamel},
          {"snapshot_dir", c.snapshot_dir}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"N", "side", "cfl", "t_end", "record_every", "integrator", "mode", "initial", "norms", "q", "p",
                  "regime", "ell", "fit_t_min", "fit_t_max", "blowup_norm", "saturation_mass", "saturation_radius",
                  "store_duhamel", "snapshot_dir"},
                 "simulation config");
  SimConfig c;
  take(j, "N", c.N);
  take(j, "side", c.side);
  take(j, "cfl", c.cfl);
  take(j, "t_end", c.t_end);
  take(j, "record_every", c.record_every);
  std::string s;
  if (j.contains("integrator")) {
    take(j, "integrator", s);
    c.integrator = integrator_from_string(s);
  }
  if (j.contains("mode")) {
    take(j, "mode", s);
    c.mode = sim_mode_from_string(s);
  }
  if (j.contains("initial")) {
    const auto& in = j.at("initial");
    reject_unknown(in, {"family", "amplitude", "width", "profile", "groups", "center", "wavenumber"}, "initial");
    if (in.contains("family")) {
      take(in, "family", s);
      c.initial.family = data_family_from_string(s);
    }
    take(in, "amplitude", c.initial.amplitude);
    take(in, "width", c.initial.width);
    take(in, "profile", c.initial.profile);
    take(in, "center", c.initial.center);
    take(in, "wavenumber", c.initial.wavenumber);
    if (in.contains("groups")) {
      std::vector<std::string> g;
      take(in, "groups", g);
      c.initial.groups.clear();
      for (const auto& x : g) c.initial.groups.push_back(group_from_string(x));
    }
  }
  if (j.contains("norms")) {
    c.norms.clear();
    if (!j.at("norms").is_array()) throw ConfigError("'norms' must be a list");
    for (const auto& e : j.at("norms")) {
      reject_unknown(e, {"s", "group"}, "norm request");
      NormRequest r;
      take(e, "s", r.s);
      std::string g = "C";
      take(e, "group", g);
      r.group = group_from_string(g);
      c.norms.push_back(r);
    }
  }
  take(j, "q", c.q);
  take(j, "p", c.p);
  if (j.contains("regime")) {
    take(j, "regime", s);
    c.regime = regime_from_string(s);
  }
  take(j, "ell", c.ell);
  take(j, "fit_t_min", c.fit_t_min);
  take(j, "fit_t_max", c.fit_t_max);
  take(j, "blowup_norm", c.blowup_norm);
  take(j, "saturation_mass", c.saturation_mass);
  take(j, "saturation_radius", c.saturation_radius);
  take(j, "store_duhamel", c.store_duhamel);
  take(j, "snapshot_dir", c.snapshot_dir);
  return c;
}

nlohmann::json to_json(const InitialNorms& n) {
  return {{"max_abs", n.max_abs}, {"h_ell", n.h_ell}, {"c_lp", n.c_lp}, {"d_lpstar", n.d_lpstar}, {"u1_lq", n.u1_lq}};
}

// ---------------------------------------------------------------------------

namespace {

// Minimum-image offset of x from c on the periodic box.
Vec periodic_offset(const Vec& x, const Vec& c, double side) {
  Vec r = x - c;
  for (Eigen::Index a = 0; a < r.size(); ++a) r(a) -= side * std::round(r(a) / side);
  return r;
}

Vec box_center(const BoxGrid& grid, const std::vector<double>& center) {
  Vec c = Vec::Constant(grid.d, 0.5 * grid.side);
  if (!center.empty()) {
    if (static_cast<int>(center.size()) != grid.d) throw ConfigError("initial centre has the wrong dimension");
    for (int a = 0; a < grid.d; ++a) c(a) = center[a];
  }
  return c;
}

double max_point_norm(const RealField& f) {
  double m = 0.0;
  for (Eigen::Index p = 0; p < f.cols(); ++p) m = std::max(m, f.col(p).norm());
  return m;
}

}  // namespace

RealField make_initial_data(const BoxGrid& grid, const TransformedSystem& ts, const InitialData& data) {
  const int n = ts.n(), r = ts.r();
  if (ts.d() != grid.d) throw DimensionError("grid and system dimensions differ");
  if (!(data.width > 0.0)) throw ConfigError("initial width must be positive");
  Vec dir = Vec::Ones(n);
  if (!data.profile.empty()) {
    if (static_cast<int>(data.profile.size()) != n) throw ConfigError("initial profile must have n entries");
    for (int i = 0; i < n; ++i) dir(i) = data.profile[i];
  }
  if (!data.groups.empty()) {
    Vec mask = Vec::Zero(n);
    for (Group g : data.groups) {
      if (g == Group::U1) mask(0) = 1.0;
      if (g == Group::C) mask.segment(1, r - 1).setOnes();
      if (g == Group::D) mask.tail(n - r).setOnes();
      if (g == Group::V1) throw ConfigError("initial data groups are u1, C and D");
    }
    dir = dir.cwiseProduct(mask);
  }
  const Vec c = box_center(grid, data.center);
  Vec k = Vec::Zero(grid.d);
  if (data.family == DataFamily::Packet) {
    if (static_cast<int>(data.wavenumber.size()) != grid.d) throw ConfigError("packet wavenumber has the wrong dimension");
    for (int a = 0; a < grid.d; ++a) k(a) = 2.0 * pi / grid.side * data.wavenumber[a];
  }
  RealField f(n, grid.points());
  for (int p = 0; p < grid.points(); ++p) {
    const Vec x = periodic_offset(grid.position(p), c, grid.side);
    double env = data.amplitude * std::exp(-x.squaredNorm() / (2.0 * data.width * data.width));
    if (data.family == DataFamily::Packet) env *= std::cos(k.dot(x));
    f.col(p) = env * dir;
  }
  Fourier fft(grid);
  ComplexField spec = fft.forward(f);
  fft.dealias(spec);
  if (data.family == DataFamily::Packet) spec.col(0).setZero();
  f = fft.backward(spec);
  const double m = max_point_norm(f);
  if (m > ts.chart().radius()) {
    std::ostringstream os;
    os << "amplitude outside chart domain (max |u~_0| = " << m << ", chart radius " << ts.chart().radius() << ")";
    throw DomainError(os.str());
  }
  return f;
}

InitialNorms initial_norms(const BoxGrid& grid, const TransformedSystem& ts, const RealField& ut0, double p, double q,
                           double ell) {
  const int n = ts.n(), r = ts.r(), d = grid.d;
  InitialNorms out;
  out.max_abs = max_point_norm(ut0);
  Fourier fft(grid);
  const ComplexField spec = fft.forward(ut0);
  double sum = 0.0;
  for (int m = 0; m < grid.modes(); ++m) {
    const double w = grid.hermitian_weight(m) * std::pow(1.0 + grid.wavevector(m).squaredNorm(), ell);
    for (int i = 0; i < n; ++i) sum += w * std::norm(spec(i, m));
  }
  out.h_ell = std::sqrt(sum * grid.cell_volume() / grid.points());
  const double p_star = p < d ? std::min(2.0, d * p / (d - p)) : 2.0;
  out.c_lp = lq_norm(grid, ut0, 1, r - 1, p);
  out.d_lpstar = lq_norm(grid, ut0, r, n - r, p_star);
  out.u1_lq = lq_norm(grid, ut0, 0, 1, q);
  return out;
}

// ---------------------------------------------------------------------------

struct Simulator::Impl {
  SystemSpec sys;
  std::shared_ptr<const TransformedSystem> ts;
  SimConfig cfg;
  BoxGrid grid;
  std::unique_ptr<Fourier> fft;
  int n = 0, r = 0, d = 0;
  Vec ustar;
  Mat T;
  Eigen::PartialPivLU<Mat> T_lu;
  std::vector<Mat> A0;  // linear flux blocks in the evolved variables
  Mat Q0;               // linear source
  std::vector<cd> symbols;  // per mode, n x n column-major
  double eta0 = 0.0;
  std::vector<int> by_distance;  // points sorted by distance from the data centre
  std::vector<double> distance;

  struct Exps {
    std::vector<cd> full, half;
  };
  mutable std::map<double, Exps> exps;

  bool chart_vars() const { return cfg.mode != SimMode::Original; }

  const Exps& exponentials(double h) const {
    auto it = exps.find(h);
    if (it != exps.end()) return it->second;
    if (exps.size() >= 4) exps.clear();
    Exps e;
    const int M = grid.modes(), nn = n * n;
    e.full.resize(static_cast<size_t>(M) * nn);
    e.half.resize(static_cast<size_t>(M) * nn);
    for (int m = 0; m < M; ++m) {
      Eigen::Map<const Eigen::MatrixXcd> S(symbols.data() + static_cast<size_t>(m) * nn, n, n);
      const Eigen::MatrixXcd eh = (-0.5 * h * S).exp();
      const Eigen::MatrixXcd ef = eh * eh;
      std::copy(eh.data(), eh.data() + nn, e.half.data() + static_cast<size_t>(m) * nn);
      std::copy(ef.data(), ef.data() + nn, e.full.data() + static_cast<size_t>(m) * nn);
    }
    return exps.emplace(h, std::move(e)).first->second;
  }

  ComplexField apply(const std::vector<cd>& mats, const ComplexField& v) const {
    const int M = grid.modes(), nn = n * n;
    ComplexField out(n, M);
    for (int m = 0; m < M; ++m) {
      Eigen::Map<const Eigen::MatrixXcd> E(mats.data() + static_cast<size_t>(m) * nn, n, n);
      out.col(m) = E * v.col(m);
    }
    return out;
  }

  ComplexField nonlinear(const ComplexField& v) const {
    if (cfg.mode == SimMode::Linearized) return ComplexField::Zero(n, grid.modes());
    const RealField w = fft->backward(v);
    std::vector<RealField> dw;
    for (int k = 0; k < d; ++k) dw.push_back(fft->backward(fft->derivative(v, k)));
    RealField out(n, grid.points());
    for (int p = 0; p < grid.points(); ++p) {
      const Vec x = w.col(p);
      Vec acc;
      if (cfg.mode == SimMode::Original) {
        const Vec u = ustar + x;
        acc = sys.source(u) - Q0 * x;
        for (int k = 0; k < d; ++k) acc -= (sys.flux_jacobian(u, k) - A0[k]) * Vec(dw[k].col(p));
      } else {
        const auto pt = ts->at(x);
        acc = ts->source(pt) - Q0 * x;
        for (int k = 0; k < d; ++k) acc -= (ts->flux(pt, k) - A0[k]) * Vec(dw[k].col(p));
      }
      out.col(p) = acc;
    }
    ComplexField spec = fft->forward(out);
    fft->dealias(spec);
    return spec;
  }

  ComplexField linear_rhs(const ComplexField& v) const {
    ComplexField out = apply(symbols, v);
    return -out;
  }

  ComplexField step(const ComplexField& v, double h) const {
    if (cfg.integrator == Integrator::IfRk4) {
      const Exps& e = exponentials(h);
      const ComplexField Ev = apply(e.full, v), Hv = apply(e.half, v);
      const ComplexField k1 = nonlinear(v);
      const ComplexField k2 = nonlinear(apply(e.half, v + (0.5 * h) * k1));
      const ComplexField k3 = nonlinear(Hv + (0.5 * h) * k2);
      const ComplexField k4 = nonlinear(Ev + h * apply(e.half, k3));
      return Ev + (h / 6.0) * (apply(e.full, k1) + 2.0 * apply(e.half, k2 + k3) + k4);
    }
    auto f = [&](const ComplexField& x) -> ComplexField { return linear_rhs(x) + nonlinear(x); };
    const ComplexField k1 = f(v);
    const ComplexField k2 = f(v + (0.5 * h) * k1);
    const ComplexField k3 = f(v + (0.5 * h) * k2);
    const ComplexField k4 = f(v + h * k3);
    return v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  Vec to_pre(const Vec& x) const { return chart_vars() ? ts->chart().forward(x) : Vec(T_lu.solve(x)); }

  // Largest characteristic speed over the coordinate axes at equilibrium
  // and at the largest state on the grid.
  double max_speed(const RealField& w) const {
    auto spectral_radius = [](const Mat& a) {
      Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a), false);
      return es.eigenvalues().cwiseAbs().maxCoeff();
    };
    Eigen::Index pmax = 0;
    double best = -1.0;
    for (Eigen::Index p = 0; p < w.cols(); ++p) {
      const double a = w.col(p).norm();
      if (a > best) {
        best = a;
        pmax = p;
      }
    }
    const Vec x = w.col(pmax);
    double s = 0.0;
    for (int k = 0; k < d; ++k) {
      s = std::max(s, spectral_radius(A0[k]));
      if (cfg.mode == SimMode::Original)
        s = std::max(s, spectral_radius(sys.flux_jacobian(ustar + x, k)));
      else if (cfg.mode == SimMode::Chart)
        s = std::max(s, spectral_radius(ts->flux(x, k)));
    }
    return s;
  }

  double v1_point(const Vec& u_pre, const Vec& ut) const {
    if (ut.squaredNorm() == 0.0) return 0.0;
    Vec w = Vec::Zero(d);
    w(0) = 1.0;
    const Vec l1 = eigen_decompose(ts->pre(), u_pre, w).left.row(0).transpose();
    constexpr double h = 1e-4;
    const Vec Jut = (ts->chart().forward(ut * (1.0 + h)) - ts->chart().forward(ut * (1.0 - h))) / (2.0 * h);
    return l1.dot(Jut);
  }

  double saturation_radius(const RealField& ut) const {
    double total = 0.0;
    std::vector<double> mass(grid.points());
    for (int p = 0; p < grid.points(); ++p) {
      mass[p] = ut.block(1, p, n - 1, 1).squaredNorm();
      total += mass[p];
    }
    if (total == 0.0) return 0.0;
    double acc = 0.0;
    for (int p : by_distance) {
      acc += mass[p];
      if (acc >= cfg.saturation_mass * total) return distance[p];
    }
    return distance[by_distance.back()];
  }
};

Simulator::Simulator(const SystemSpec& sys, const SimConfig& cfg, std::shared_ptr<const TransformedSystem> ts)
    : impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  m.sys = sys;
  m.ts = ts ? ts : build_transformed(sys);
  m.cfg = cfg;
  if (m.cfg.side <= 0.0) m.cfg.side = 100.0 * pi;
  m.grid = BoxGrid(sys.d, cfg.N, m.cfg.side);
  m.fft = std::make_unique<Fourier>(m.grid);
  m.n = sys.n;
  m.r = sys.r;
  m.d = sys.d;
  if (!(cfg.cfl > 0.0)) throw ConfigError("CFL number must be positive");
  if (!(cfg.record_every > 0.0) || !(cfg.t_end >= 0.0)) throw ConfigError("record cadence and end time must be positive");
  if (cfg.store_duhamel && cfg.mode == SimMode::Original)
    throw ConfigError("store_duhamel needs the chart or linearized mode");
  m.ustar = sys.equilibrium.size() == sys.n ? sys.equilibrium : Vec::Zero(sys.n);
  m.T = m.ts->pre().transform;
  m.T_lu.compute(m.T);
  if (m.chart_vars()) {
    for (int k = 0; k < m.d; ++k) m.A0.push_back(m.ts->flux0(k));
    m.Q0 = m.ts->theta();
    m.eta0 = m.ts->pre().entropy ? m.ts->entropy(Vec::Zero(m.n)) : 0.0;
  } else {
    for (int k = 0; k < m.d; ++k) m.A0.push_back(sys.flux_jacobian(m.ustar, k));
    m.Q0 = source_jacobian(sys, m.ustar, has_analytic(sys) ? DerivativeMode::Analytic : DerivativeMode::FiniteDifference);
    m.eta0 = sys.entropy ? sys.entropy(m.ustar) : 0.0;
  }
  const int M = m.grid.modes(), nn = m.n * m.n;
  m.symbols.resize(static_cast<size_t>(M) * nn);
  for (int j = 0; j < M; ++j) {
    const Vec k = m.grid.wavevector(j);
    Eigen::MatrixXcd S = -m.Q0.cast<cd>();
    for (int a = 0; a < m.d; ++a) S += cd(0.0, k(a)) * m.A0[a].cast<cd>();
    std::copy(S.data(), S.data() + nn, m.symbols.data() + static_cast<size_t>(j) * nn);
  }
  const Vec c = box_center(m.grid, cfg.initial.center);
  m.distance.resize(m.grid.points());
  m.by_distance.resize(m.grid.points());
  for (int p = 0; p < m.grid.points(); ++p) m.distance[p] = periodic_offset(m.grid.position(p), c, m.grid.side).norm();
  std::iota(m.by_distance.begin(), m.by_distance.end(), 0);
  std::stable_sort(m.by_distance.begin(), m.by_distance.end(),
                   [&](int a, int b) { return m.distance[a] < m.distance[b]; });
}

Simulator::~Simulator() = default;

const BoxGrid& Simulator::grid() const { return impl_->grid; }
const TransformedSystem& Simulator::transformed() const { return *impl_->ts; }
const SimConfig& Simulator::config() const { return impl_->cfg; }

RealField Simulator::to_state(const RealField& ut) const {
  const auto& m = *impl_;
  if (m.chart_vars()) return ut;
  RealField out(ut.rows(), ut.cols());
  for (Eigen::Index p = 0; p < ut.cols(); ++p) out.col(p) = m.T * m.ts->chart().forward(ut.col(p));
  return out;
}

RealField Simulator::to_chart(const RealField& state) const {
  const auto& m = *impl_;
  if (m.chart_vars()) return state;
  RealField out(state.rows(), state.cols());
  for (Eigen::Index p = 0; p < state.cols(); ++p) out.col(p) = m.ts->chart().inverse(m.T_lu.solve(Vec(state.col(p))));
  return out;
}

ComplexField Simulator::nonlinear(const ComplexField& v) const { return impl_->nonlinear(v); }
ComplexField Simulator::step(const ComplexField& v, double h) const { return impl_->step(v, h); }

RealField Simulator::advance(const RealField& state, double t, double h) const {
  const auto& m = *impl_;
  ComplexField v = m.fft->forward(state);
  const long steps = std::lround(t / h);
  for (long s = 0; s < steps; ++s) v = m.step(v, h);
  return m.fft->backward(v);
}

SimResult Simulator::run() const {
  const auto& m = *impl_;
  const SimConfig& cfg = m.cfg;
  const BoxGrid& g = m.grid;
  SimResult res;
  DecayTrace& tr = res.trace;
  tr.label = m.sys.name + "_" + to_string(cfg.mode);

  const RealField ut0 = make_initial_data(g, *m.ts, cfg.initial);
  res.initial = initial_norms(g, *m.ts, ut0, cfg.p, cfg.q, cfg.ell);
  ComplexField v = m.fft->forward(to_state(ut0));
  m.fft->dealias(v);

  const bool has_entropy = static_cast<bool>(m.sys.entropy);
  std::vector<std::string> names;
  if (has_entropy) names.push_back("E_entropy");
  for (const auto& rq : cfg.norms) names.push_back("n_" + to_string(rq.group) + "_s" + fmt_s(rq.s));
  names.push_back("v1_Lq");
  for (const auto& nm : names) tr.add_column(nm);
  if (!has_entropy) tr.notes.push_back("system has no entropy; E_entropy omitted");

  if (!cfg.snapshot_dir.empty()) std::filesystem::create_directories(cfg.snapshot_dir);
  double max_r99 = 0.0;
  RealField last_state = m.fft->backward(v);

  auto blow = [&](double t, const std::string& why) {
    tr.blowup = true;
    tr.blowup_time = t;
    tr.blowup_reason = why;
  };

  // Returns false when the record exposes a blow-up.
  auto record = [&](double t, const ComplexField& vs, int index) -> bool {
    const RealField state = m.fft->backward(vs);
    RealField ut;
    try {
      ut = to_chart(state);
    } catch (const DomainError& e) {
      blow(t, std::string("chart inverse failed: ") + e.what());
      return false;
    }
    const ComplexField uts = m.chart_vars() ? vs : m.fft->forward(ut);
    std::vector<double> vals;
    if (has_entropy) {
      double e = 0.0;
      for (int p = 0; p < g.points(); ++p) {
        const Vec x = state.col(p);
        e += (m.chart_vars() ? m.ts->entropy(x) : m.sys.entropy(m.ustar + x)) - m.eta0;
      }
      vals.push_back(e * g.cell_volume());
    }
    RealField v1(1, g.points());
    for (int p = 0; p < g.points(); ++p) {
      const Vec x = ut.col(p);
      const Vec u_pre = m.chart_vars() ? m.ts->chart().forward(x) : Vec(m.T_lu.solve(Vec(state.col(p))));
      v1(0, p) = m.v1_point(u_pre, x);
    }
    ComplexField v1s;
    for (const auto& rq : cfg.norms) {
      if (rq.group == Group::V1) {
        if (v1s.size() == 0) v1s = m.fft->forward(v1);
        vals.push_back(measure_lambda_s(g, v1s, rq.s, Group::V1, m.r));
      } else {
        vals.push_back(measure_lambda_s(g, uts, rq.s, rq.group, m.r));
      }
    }
    vals.push_back(lq_norm(g, v1, 0, 1, cfg.q));
    for (double x : vals)
      if (!std::isfinite(x) || x > cfg.blowup_norm) {
        blow(t, "norm above the blow-up threshold");
        return false;
      }
    tr.t.push_back(t);
    for (size_t i = 0; i < vals.size(); ++i) tr.columns[i].second.push_back(vals[i]);
    const double r99 = m.saturation_radius(ut);
    max_r99 = std::max(max_r99, r99);
    if (!tr.saturated && r99 >= cfg.saturation_radius * g.side) {
      tr.saturated = true;
      tr.saturation_time = t;
    }
    if (cfg.store_duhamel) {
      res.tau.push_back(t);
      res.flat_state.push_back(to_symbol_field(g, uts, 1, m.n - 1));
      res.flat_nonlinear.push_back(to_symbol_field(g, m.nonlinear(vs), 1, m.n - 1));
    }
    if (!cfg.snapshot_dir.empty()) {
      Snapshot s{g.d, g.N, m.n, t, state};
      if (!m.chart_vars())
        for (int p = 0; p < g.points(); ++p) s.field.col(p) += m.ustar;
      char name[32];
      std::snprintf(name, sizeof name, "snap_%06d.bin", index);
      write_snapshot((std::filesystem::path(cfg.snapshot_dir) / name).string(), s);
    }
    last_state = state;
    return true;
  };

  const double radius = m.ts->chart().radius();
  const long records = std::lround(cfg.t_end / cfg.record_every);
  bool alive = record(0.0, v, 0);
  for (long i = 1; alive && i <= records; ++i) {
    const double t0 = (i - 1) * cfg.record_every, t1 = i * cfg.record_every;
    const double speed = m.max_speed(m.fft->backward(v));
    const double h_max = speed > 0.0 ? cfg.cfl * g.dx() / speed : cfg.record_every;
    const long steps = std::max(1L, static_cast<long>(std::ceil(cfg.record_every / h_max - 1e-12)));
    const double h = cfg.record_every / steps;
    for (long s = 1; s <= steps; ++s) {
      v = m.step(v, h);
      ++res.steps;
      if (!v.allFinite()) {
        blow(t0 + s * h, "non-finite state");
        alive = false;
        break;
      }
      const RealField w = m.fft->backward(v);
      double big = 0.0;
      for (int p = 0; p < g.points(); ++p)
        big = std::max(big, m.chart_vars() ? w.col(p).norm() : m.T_lu.solve(Vec(w.col(p))).norm());
      if (big > radius) {
        blow(t0 + s * h, "state left the chart ball");
        alive = false;
        break;
      }
    }
    if (alive) alive = record(t1, v, static_cast<int>(i));
  }
  res.final_state = last_state;

  double fit_hi = cfg.fit_t_max;
  if (tr.saturated) fit_hi = std::min(fit_hi, tr.saturation_time);
  std::ostringstream note;
  note << "fit window [" << cfg.fit_t_min << ", " << fit_hi << "], max 99% mass radius " << max_r99;
  tr.notes.push_back(note.str());
  for (size_t i = 0; i < cfg.norms.size(); ++i) {
    const auto& rq = cfg.norms[i];
    const std::string name = "n_" + to_string(rq.group) + "_s" + fmt_s(rq.s);
    tr.fit(name, cfg.fit_t_min, fit_hi);
    if (rq.group == Group::C || rq.group == Group::D) {
      const DecayPrediction pr = predicted_exponents(m.d, cfg.p, cfg.q, rq.s,
                                                     rq.group == Group::C ? Component::C : Component::D, cfg.regime,
                                                     cfg.ell);
      tr.predictions.push_back(pr);
      for (auto& f : tr.fits)
        if (f.series == name) {
          f.has_prediction = true;
          f.predicted = pr.exponent;
        }
    }
  }
  if (has_entropy && tr.t.size() > 1) {
    const auto& e = tr.columns[0].second;
    double worst = 0.0;
    for (size_t i = 1; i < e.size(); ++i) {
      const double rate = (e[i] - e[i - 1]) / ((tr.t[i] - tr.t[i - 1]) * std::max(std::abs(e[i - 1]), 1e-300));
      worst = std::max(worst, rate);
    }
    std::ostringstream os;
    os << "max relative entropy increase per unit time " << worst;
    tr.notes.push_back(os.str());
  }
  return res;
}

// ---------------------------------------------------------------------------

SymbolGrid box_symbol_grid(const BoxGrid& grid, const LinearSymbol& sym) {
  if (sym.d != grid.d) throw DimensionError("symbol and grid dimensions differ");
  std::vector<Vec> xi;
  std::vector<double> w;
  const double cell = std::pow(2.0 * pi / grid.side, grid.d);
  for (int m = 0; m < grid.modes(); ++m) {
    xi.push_back(grid.wavevector(m));
    w.push_back(grid.hermitian_weight(m) * cell);
  }
  return SymbolGrid(sym, std::move(xi), std::move(w));
}

SpectralField to_symbol_field(const BoxGrid& grid, const ComplexField& spec, int row0, int rows) {
  const double scale = grid.cell_volume();
  SpectralField out(grid.modes());
  for (int m = 0; m < grid.modes(); ++m) out[m] = spec.block(row0, m, rows, 1) * scale;
  return out;
}

DuhamelResult duhamel_check(const SimResult& res, const BoxGrid& grid, const LinearSymbol& sym, int stride) {
  if (res.tau.empty()) throw ConfigError("run has no stored Duhamel data (set store_duhamel)");
  if (stride < 1 || (res.tau.size() - 1) % stride != 0) throw ConfigError("stride must divide the record count");
  std::vector<double> tau;
  std::vector<SpectralField> nl;
  for (size_t i = 0; i < res.tau.size(); i += stride) {
    tau.push_back(res.tau[i]);
    nl.push_back(res.flat_nonlinear[i]);
  }
  const SymbolGrid sg = box_symbol_grid(grid, sym);
  return duhamel_residual(sg, res.flat_state.front(), res.flat_state.back(), tau, nl);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'D', 'H', 'S', 'N', 'A', 'P', '1'};

void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == EOF) throw ConfigError("snapshot truncated");
    v |= static_cast<std::uint64_t>(c & 0xff) << (8 * i);
  }
  return v;
}

}  // namespace

void write_snapshot(const std::string& path, const Snapshot& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write snapshot " + path);
  os.write(kMagic, 8);
  put_le(os, static_cast<std::uint32_t>(s.d), 4);
  put_le(os, static_cast<std::uint32_t>(s.N), 4);
  put_le(os, static_cast<std::uint32_t>(s.n), 4);
  put_le(os, std::bit_cast<std::uint64_t>(s.time), 8);
  for (Eigen::Index r = 0; r < s.field.rows(); ++r)
    for (Eigen::Index p = 0; p < s.field.cols(); ++p) put_le(os, std::bit_cast<std::uint64_t>(s.field(r, p)), 8);
  if (!os) throw ConfigError("failed writing snapshot " + path);
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read snapshot " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("not a snapshot file: " + path);
  Snapshot s;
  s.d = static_cast<int>(get_le(is, 4));
  s.N = static_cast<int>(get_le(is, 4));
  s.n = static_cast<int>(get_le(is, 4));
  s.time = std::bit_cast<double>(get_le(is, 8));
  if (s.d < 1 || s.d > 3 || s.N < 1 || s.n < 1 || s.n > kMaxUnknowns) throw ConfigError("corrupt snapshot header");
  const long P = s.d == 1 ? s.N : (s.d == 2 ? static_cast<long>(s.N) * s.N : static_cast<long>(s.N) * s.N * s.N);
  s.field.resize(s.n, P);
  for (int r = 0; r < s.n; ++r)
    for (long p = 0; p < P; ++p) s.field(r, p) = std::bit_cast<double>(get_le(is, 8));
  return s;
}

}  // namespace pdhyp
