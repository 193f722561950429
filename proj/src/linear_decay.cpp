#include "pdhyp/linear_decay.hpp"

#include "pdhyp/sampling.hpp"
#include "pdhyp/structure.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace pdhyp {

using std::numbers::pi;
using cd = std::complex<double>;

Eigen::MatrixXcd LinearSymbol::symbol(const Vec& xi) const {
  Eigen::MatrixXcd s = -theta.cast<cd>();
  for (int k = 0; k < d; ++k)
    if (xi(k) != 0.0) s += cd(0.0, xi(k)) * Eigen::MatrixXcd(A[k].cast<cd>());
  return s;
}

LinearSymbol linear_symbol(const TransformedSystem& ts) {
  const int m = ts.n() - 1;
  std::vector<Mat> a;
  for (int k = 0; k < ts.d(); ++k) a.push_back(ts.flux0(k).bottomRightCorner(m, m));
  LinearSymbol s = linear_symbol(a, ts.theta().bottomRightCorner(m, m), ts.layout());
  s.name = ts.pre().name;
  return s;
}

LinearSymbol linear_symbol(const std::vector<Mat>& A_flat, const Mat& theta_flat, const BlockLayout& layout) {
  const int m = layout.flat_size();
  if (A_flat.empty()) throw DimensionError("linear symbol needs at least one flux block");
  for (const auto& a : A_flat)
    if (a.rows() != m || a.cols() != m) throw DimensionError("flux block has the wrong size");
  if (theta_flat.rows() != m || theta_flat.cols() != m) throw DimensionError("Theta block has the wrong size");
  LinearSymbol s;
  s.d = static_cast<int>(A_flat.size());
  s.layout = layout;
  s.A = A_flat;
  s.theta = theta_flat;
  s.name = "linear";
  return s;
}

LinearSymbol without_damping(LinearSymbol sym) {
  sym.theta.setZero();
  sym.name += "_undamped";
  return sym;
}

SymbolGrid::SymbolGrid(LinearSymbol sym, std::vector<Vec> xi, std::vector<double> weight)
    : sym_(std::move(sym)), xi_(std::move(xi)), weight_(std::move(weight)) {
  if (xi_.size() != weight_.size()) throw DimensionError("symbol grid: node and weight counts differ");
}

const Eigen::MatrixXcd& SymbolGrid::propagator(int j, double t) const {
  auto it = cache_.find(t);
  if (it == cache_.end()) {
    cache_times({t});
    it = cache_.find(t);
  }
  return it->second[j];
}

void SymbolGrid::cache_times(const std::vector<double>& times) const {
  for (double t : times) {
    if (t < 0.0) throw DomainError("propagation time must be non-negative");
    if (cache_.count(t)) continue;
    std::vector<Eigen::MatrixXcd> ps(xi_.size());
    for (size_t j = 0; j < xi_.size(); ++j) ps[j] = (-t * sym_.symbol(xi_[j])).exp();
    cache_.emplace(t, std::move(ps));
  }
}

SymbolGrid make_radial_grid(const LinearSymbol& sym, const SymbolGridOptions& opt) {
  const int d = sym.d;
  if (d < 1 || d > 3) throw DimensionError("radial symbol grid supports d = 1, 2, 3");
  if (!(opt.xi_min > 0.0) || !(opt.xi_max > opt.xi_min) || opt.shells < 1) throw ConfigError("bad symbol grid");
  const std::vector<Vec> dirs = d == 1 ? direction_grid(1, 2) : direction_grid(d, opt.angles);
  auto ball = [d](double r) {
    if (d == 1) return 2.0 * r;
    if (d == 2) return pi * r * r;
    return 4.0 / 3.0 * pi * r * r * r;
  };
  std::vector<Vec> xi;
  std::vector<double> w;
  xi.push_back(Vec::Zero(d));
  w.push_back(ball(opt.xi_min));
  const double lo = std::log(opt.xi_min), hi = std::log(opt.xi_max);
  for (int i = 0; i < opt.shells; ++i) {
    const double a = std::exp(lo + (hi - lo) * i / opt.shells);
    const double b = std::exp(lo + (hi - lo) * (i + 1) / opt.shells);
    const double r = std::sqrt(a * b);
    const double vol = (ball(b) - ball(a)) / static_cast<double>(dirs.size());
    for (const Vec& u : dirs) {
      xi.push_back(r * u);
      w.push_back(vol);
    }
  }
  return SymbolGrid(sym, std::move(xi), std::move(w));
}

SymbolGrid make_lattice_grid(const LinearSymbol& sym, int N, double side) {
  const int d = sym.d;
  if (d < 1 || d > 3) throw DimensionError("lattice grid supports d = 1, 2, 3");
  const double dk = 2.0 * pi / side;
  long total = 1;
  for (int k = 0; k < d; ++k) total *= N;
  std::vector<Vec> xi(total);
  std::vector<double> w(total, std::pow(dk, d));
  for (long idx = 0; idx < total; ++idx) {
    Vec x(d);
    long rem = idx;
    for (int k = d - 1; k >= 0; --k) {
      const int j = static_cast<int>(rem % N);
      rem /= N;
      x(k) = dk * (j < N / 2 ? j : j - N);
    }
    xi[idx] = x;
  }
  return SymbolGrid(sym, std::move(xi), std::move(w));
}

SpectralField propagate_linear(const SymbolGrid& grid, const SpectralField& u0, double t) {
  if (static_cast<int>(u0.size()) != grid.size()) throw DimensionError("field and grid sizes differ");
  if (t < 0.0) throw DomainError("propagation time must be non-negative");
  SpectralField out(u0.size());
  if (t == 0.0) return u0;
  for (int j = 0; j < grid.size(); ++j) out[j] = grid.propagator(j, t) * u0[j];
  return out;
}

namespace {

std::pair<int, int> band_range(const BlockLayout& l, Band b) {
  switch (b) {
    case Band::C: return {0, l.r - 1};
    case Band::D: return {l.r - 1, l.n - l.r};
    default: return {0, l.flat_size()};
  }
}

}  // namespace

double band_norm(const SymbolGrid& grid, const SpectralField& u, Band band, double alpha) {
  const auto [off, len] = band_range(grid.symbol().layout, band);
  const int d = grid.symbol().d;
  double sum = 0.0;
  for (int j = 0; j < grid.size(); ++j) {
    const double r = grid.radius(j);
    if (alpha > 0.0 && r == 0.0) continue;
    const double m = alpha == 0.0 ? 1.0 : std::pow(r, 2.0 * alpha);
    sum += grid.weight(j) * m * u[j].segment(off, len).squaredNorm();
  }
  return std::sqrt(sum / std::pow(2.0 * pi, d));
}

namespace {

Eigen::VectorXd data_vector(const SymbolGrid& grid, const Eigen::VectorXd& vec) {
  const int m = grid.symbol().layout.flat_size();
  if (vec.size() == 0) return Eigen::VectorXd::Ones(m);
  if (vec.size() != m) throw DimensionError("profile vector must have n - 1 entries");
  return vec;
}

}  // namespace

SpectralField gaussian_profile(const SymbolGrid& grid, double R, const Eigen::VectorXd& vec) {
  const int d = grid.symbol().d;
  const Eigen::VectorXcd v = data_vector(grid, vec).cast<cd>();
  SpectralField out(grid.size());
  const double amp = std::pow(2.0 * pi * R * R, 0.5 * d);
  for (int j = 0; j < grid.size(); ++j) {
    const double r = grid.radius(j);
    out[j] = amp * std::exp(-0.5 * R * R * r * r) * v;
  }
  return out;
}

SpectralField power_profile(const SymbolGrid& grid, double p, const Eigen::VectorXd& vec) {
  const int d = grid.symbol().d;
  const Eigen::VectorXcd v = data_vector(grid, vec).cast<cd>();
  const double beta = d * (1.0 - 1.0 / p);
  SpectralField out(grid.size());
  for (int j = 0; j < grid.size(); ++j) {
    const double r = grid.radius(j);
    if (r == 0.0 && beta > 0.0) {
      out[j] = Eigen::VectorXcd::Zero(v.size());
      continue;
    }
    out[j] = std::pow(r, -beta) * std::exp(-0.5 * r * r) * v;
  }
  return out;
}

DecayTrace linear_lp_decay_experiment(const LinearSymbol& sym, const LinearExperiment& ex) {
  if (ex.p < 1.0 || ex.p > 2.0) throw ConfigError("linear decay experiment needs 1 <= p <= 2");
  if (ex.samples < kMinFitPoints) throw FitError("fit window needs at least 8 samples");
  const SymbolGrid grid = make_radial_grid(sym, ex.grid);
  SpectralField u0;
  std::string profile;
  double width = ex.width;
  if (width <= 0.0 && ex.p == 1.0) width = 1.0;
  if (width <= 0.0 && ex.p == 2.0) width = 200.0;
  if (width > 0.0) {
    u0 = gaussian_profile(grid, width, ex.profile);
    std::ostringstream os;
    os << "gaussian profile, width " << width;
    profile = os.str();
  } else {
    u0 = power_profile(grid, ex.p, ex.profile);
    profile = "power-law profile with |x|^{-d/p} tail";
  }

  DecayTrace tr;
  tr.label = "linear_" + sym.name;
  tr.t = log_space(ex.t_min, ex.t_max, ex.samples);
  tr.add_column("norm_C");
  tr.add_column("norm_D");
  auto& nc = tr.columns[0].second;
  auto& nd = tr.columns[1].second;
  for (double t : tr.t) {
    const SpectralField u = propagate_linear(grid, u0, t);
    nc.push_back(band_norm(grid, u, Band::C, ex.alpha));
    nd.push_back(band_norm(grid, u, Band::D, ex.alpha));
  }
  grid.clear_cache();
  const int d = sym.d;
  const DecayPrediction pc = predicted_exponents(d, ex.p, ex.p, ex.alpha, Component::C, Regime::Linear);
  const DecayPrediction pd = predicted_exponents(d, ex.p, ex.p, ex.alpha, Component::D, Regime::Linear);
  tr.predictions = {pc, pd};
  for (const auto& [name, pred] : {std::pair{"norm_C", pc}, std::pair{"norm_D", pd}}) {
    tr.fit(name, ex.t_min, ex.t_max);
    auto& f = tr.fits.back();
    f.has_prediction = true;
    f.predicted = pred.exponent;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto* fc = tr.find_fit("norm_C");
  const auto* fd = tr.find_fit("norm_D");
  tr.add_column("fit_slope_C").assign(tr.t.size(), fc->ok ? fc->fit.slope : nan);
  tr.add_column("fit_slope_D").assign(tr.t.size(), fd->ok ? fd->fit.slope : nan);
  std::ostringstream os;
  os << profile << "; p = " << ex.p << ", alpha = " << ex.alpha << ", " << grid.size() << " frequency nodes";
  tr.notes.push_back(os.str());
  return tr;
}

namespace {

struct SlowSplit {
  Eigen::VectorXcd mu;   // eigenvalues sorted by real part
  Eigen::MatrixXcd V;    // matching right eigenvectors
  Eigen::MatrixXcd Vinv;
};

SlowSplit split(const Eigen::MatrixXcd& s) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(s);
  const int m = static_cast<int>(s.rows());
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return es.eigenvalues()(a).real() < es.eigenvalues()(b).real(); });
  SlowSplit out;
  out.mu.resize(m);
  out.V.resize(m, m);
  for (int i = 0; i < m; ++i) {
    out.mu(i) = es.eigenvalues()(order[i]);
    out.V.col(i) = es.eigenvectors().col(order[i]);
  }
  out.Vinv = out.V.inverse();
  return out;
}

double op_norm(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

// Least-squares decay rate of log a against x.
double rate(const std::vector<double>& x, const std::vector<double>& a) {
  double mx = 0.0, my = 0.0;
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) mx += x[i], my += std::log(std::max(a[i], 1e-300));
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (std::log(std::max(a[i], 1e-300)) - my);
  }
  return sxx > 0.0 ? -sxy / sxx : 0.0;
}

}  // namespace

PointwiseBoundsReport verify_pointwise_bounds(const LinearSymbol& sym, const PointwiseBoundsOptions& opt) {
  const BlockLayout lay = sym.layout;
  const int m = lay.flat_size(), nc = lay.r - 1, nd = lay.n - lay.r;
  const SymbolGrid grid = make_radial_grid(sym, opt.grid);
  PointwiseBoundsReport rep;

  // shell-wise minimum of gap / |xi|^2
  const int per_shell = (grid.size() - 1) / opt.grid.shells;
  std::vector<double> radii, ratio;
  for (int i = 0; i < opt.grid.shells; ++i) {
    double worst = std::numeric_limits<double>::infinity();
    double r = 0.0;
    for (int a = 0; a < per_shell; ++a) {
      const int j = 1 + i * per_shell + a;
      r = grid.radius(j);
      const SlowSplit sp = split(grid.symbol().symbol(grid.xi(j)));
      worst = std::min(worst, sp.mu(0).real() / (r * r));
    }
    radii.push_back(r);
    ratio.push_back(worst);
  }
  rep.gap_ratio_limit = ratio.front();
  if (!(rep.gap_ratio_limit > 1e-10)) {
    rep.note = "no low-frequency dissipation: smallest eigenvalue real part does not scale like |xi|^2";
    rep.xi_c = 0.0;
    // the whole grid is tested against a uniform exponential envelope, which must fail
  } else {
    rep.xi_c = radii.back();
    for (size_t i = 0; i + 1 < radii.size(); ++i) {
      if (ratio[i + 1] < 0.5 * rep.gap_ratio_limit) {
        const double f = (ratio[i] - 0.5 * rep.gap_ratio_limit) / (ratio[i] - ratio[i + 1]);
        rep.xi_c = std::exp(std::log(radii[i]) + f * (std::log(radii[i + 1]) - std::log(radii[i])));
        break;
      }
    }
  }

  // low band nodes plus a ring exactly at xi_c, so the band edge does not move with the grid
  std::vector<Vec> low, high;
  for (int j = 1; j < grid.size(); ++j) (grid.radius(j) <= rep.xi_c ? low : high).push_back(grid.xi(j));
  if (rep.xi_c > 0.0) {
    const auto dirs = sym.d == 1 ? direction_grid(1, 2) : direction_grid(sym.d, opt.grid.angles);
    for (const Vec& u : dirs) low.push_back(rep.xi_c * u);
  }
  rep.low_nodes = static_cast<int>(low.size());
  rep.high_nodes = static_cast<int>(high.size());

  const auto& ts = opt.times;
  double cC = std::numeric_limits<double>::infinity(), cD = cC, cF = cC;
  struct Sample {
    double tau, t, aC, aD, aF;
  };
  std::vector<Sample> samples;
  for (const Vec& xi : low) {
    const double r = xi.norm();
    const SlowSplit sp = split(sym.symbol(xi));
    Eigen::VectorXcd winv = Eigen::VectorXcd::Ones(m);
    winv.tail(nd).setConstant(1.0 / r);
    std::vector<double> tau, tt, aC, aD, aF;
    for (double t : ts) {
      Eigen::VectorXcd e(m);
      for (int i = 0; i < m; ++i) e(i) = std::exp(-t * sp.mu(i));
      const Eigen::MatrixXcd full = sp.V * e.asDiagonal() * sp.Vinv;
      const Eigen::MatrixXcd slow =
          sp.V.leftCols(nc) * e.head(nc).asDiagonal() * sp.Vinv.topRows(nc);
      const Eigen::MatrixXcd sw = slow * winv.asDiagonal();
      tau.push_back(r * r * t);
      tt.push_back(t);
      aC.push_back(op_norm(sw.topRows(nc)));
      aD.push_back(op_norm(sw.bottomRows(nd)) / r);
      aF.push_back(op_norm(full - slow));
      samples.push_back({r * r * t, t, aC.back(), aD.back(), aF.back()});
    }
    if (nc > 0) {
      cC = std::min(cC, rate(tau, aC));
      cD = std::min(cD, rate(tau, aD));
    }
    cF = std::min(cF, rate(tt, aF));
  }
  for (const Vec& xi : high) {
    std::vector<double> a;
    for (double t : ts) a.push_back(op_norm((-t * sym.symbol(xi)).exp()));
    cF = std::min(cF, rate(ts, a));
  }
  if (nc == 0 || low.empty()) cC = cD = 0.0;
  rep.c_low_C = cC;
  rep.c_low_D = cD;
  rep.c_fast = cF;
  for (const auto& s : samples) {
    rep.C_low_C = std::max(rep.C_low_C, s.aC * std::exp(cC * s.tau));
    rep.C_low_D = std::max(rep.C_low_D, s.aD * std::exp(cD * s.tau));
    rep.C_fast = std::max(rep.C_fast, s.aF * std::exp(cF * s.t));
  }
  const double tiny = 1e-8;
  rep.passed = rep.c_low_C > tiny && rep.c_low_D > tiny && rep.c_fast > tiny;
  if (!rep.passed && rep.note.empty()) {
    std::ostringstream os;
    os << "non-positive fitted decay constant (c_C = " << cC << ", c_D = " << cD << ", c_fast = " << cF << ")";
    rep.note = os.str();
  }
  return rep;
}

nlohmann::json to_json(const PointwiseBoundsReport& r) {
  return {{"xi_c", r.xi_c},           {"gap_ratio_limit", r.gap_ratio_limit},
          {"c_low_C", r.c_low_C},     {"C_low_C", r.C_low_C},
          {"c_low_D", r.c_low_D},     {"C_low_D", r.C_low_D},
          {"c_fast", r.c_fast},       {"C_fast", r.C_fast},
          {"low_nodes", r.low_nodes}, {"high_nodes", r.high_nodes},
          {"passed", r.passed},       {"note", r.note}};
}

DuhamelResult duhamel_residual(const SymbolGrid& lattice, const SpectralField& u0, const SpectralField& ut,
                               const std::vector<double>& tau, const std::vector<SpectralField>& nonlinear) {
  if (tau.size() != nonlinear.size() || tau.empty()) throw DimensionError("Duhamel: snapshot count mismatch");
  if (tau.front() != 0.0) throw ConfigError("Duhamel: the first snapshot must be at tau = 0");
  const int nodes = lattice.size();
  for (const auto& f : nonlinear)
    if (static_cast<int>(f.size()) != nodes) throw DimensionError("Duhamel: nonlinearity on the wrong grid");
  const double t = tau.back();
  DuhamelResult out;
  double dmax = 0.0;
  for (size_t i = 1; i < tau.size(); ++i) dmax = std::max(dmax, tau[i] - tau[i - 1]);
  SpectralField res(nodes);
  for (int j = 0; j < nodes; ++j) {
    const Eigen::MatrixXcd s = lattice.symbol().symbol(lattice.xi(j));
    if (dmax > 0.0) {
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(s, false);
      out.max_rate_dt = std::max(out.max_rate_dt, es.eigenvalues().cwiseAbs().maxCoeff() * dmax);
    }
    // Horner form of the trapezoid sum: acc <- e^{-h L} acc + w_i N_i
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(s.rows());
    Eigen::MatrixXcd step;
    double h_prev = -1.0;
    for (size_t i = 0; i < tau.size(); ++i) {
      if (i > 0) {
        const double h = tau[i] - tau[i - 1];
        if (std::abs(h - h_prev) > 1e-15 * (1.0 + t)) {
          step = (-h * s).exp();
          h_prev = h;
        }
        acc = step * acc;
      }
      double w = 0.0;
      if (i > 0) w += 0.5 * (tau[i] - tau[i - 1]);
      if (i + 1 < tau.size()) w += 0.5 * (tau[i + 1] - tau[i]);
      acc += w * nonlinear[i][j];
    }
    const Eigen::VectorXcd lin = t == 0.0 ? Eigen::VectorXcd(u0[j]) : Eigen::VectorXcd((-t * s).exp() * u0[j]);
    res[j] = ut[j] - lin - acc;
  }
  out.residual = band_norm(lattice, res, Band::Flat);
  out.reference = band_norm(lattice, ut, Band::Flat);
  out.coarse_warning = out.max_rate_dt > 1.0;
  return out;
}

}  // namespace pdhyp
