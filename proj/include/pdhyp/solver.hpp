#pragma once

#include "pdhyp/coords.hpp"
#include "pdhyp/linear_decay.hpp"
#include "pdhyp/trace.hpp"

#include "json.hpp"

#include <complex>
#include <memory>
#include <string>
#include <vector>

namespace pdhyp {

// Periodic box [0, side)^d with N points per axis. Real fields are stored as
// rows (one per component) over points in row-major order (axis 0 slowest);
// spectra use the real-to-complex half layout, last axis halved.
struct BoxGrid {
  int d = 2;
  int N = 64;
  double side = 0.0;

  BoxGrid() = default;
  BoxGrid(int d, int N, double side);

  int points() const;
  int modes() const;
  int half() const { return N / 2 + 1; }
  double dx() const { return side / N; }
  double cell_volume() const;
  double volume() const;
  Vec position(int point) const;
  Vec wavevector(int mode) const;
  // Signed integer index of the mode along each axis.
  std::vector<int> mode_index(int mode) const;
  // 1 for modes stored once (last-axis index 0 or N/2), 2 for the rest.
  double hermitian_weight(int mode) const;
  // 2/3 rule: every axis index |k| <= N/3.
  bool kept(int mode) const;
};

using RealField = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexField = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// FFTW wrapper with unnormalized forward and 1/N^d-normalized backward
// transforms. Plans use FFTW_ESTIMATE so results are bit-stable.
class Fourier {
 public:
  explicit Fourier(const BoxGrid& grid);
  ~Fourier();
  Fourier(const Fourier&) = delete;
  Fourier& operator=(const Fourier&) = delete;

  const BoxGrid& grid() const { return grid_; }
  ComplexField forward(const RealField& f) const;
  RealField backward(const ComplexField& f) const;
  // i k_axis f^ with the Nyquist row of that axis zeroed.
  ComplexField derivative(const ComplexField& f, int axis) const;
  void dealias(ComplexField& f) const;

 private:
  BoxGrid grid_;
  std::vector<unsigned char> keep_;
  std::vector<int> index_;  // modes x d signed indices
  double* rbuf_ = nullptr;
  void* cbuf_ = nullptr;
  void* fwd_ = nullptr;
  void* bwd_ = nullptr;
};

enum class Group { U1, C, D, V1 };
std::string to_string(Group g);
Group group_from_string(const std::string& s);

// ||Lambda^s f||_{L^2} over the box for the listed rows of a spectrum.
double lambda_s_norm(const BoxGrid& grid, const ComplexField& spec, int row0, int rows, double s);
// Same for a group of a chart-variable spectrum (layout r).
double measure_lambda_s(const BoxGrid& grid, const ComplexField& spec, double s, Group group, int r);
// (sum over points |f|^q dx^d)^{1/q}, |.| the Euclidean norm over the listed rows.
double lq_norm(const BoxGrid& grid, const RealField& f, int row0, int rows, double q);

enum class Integrator { IfRk4, Rk4 };
// Original: the given system's variables minus the equilibrium.
// Chart: u~. Linearized: u~ with the nonlinear term dropped.
enum class SimMode { Original, Chart, Linearized };
enum class DataFamily { Gaussian, Packet };
std::string to_string(Integrator i);
std::string to_string(SimMode m);
std::string to_string(DataFamily f);
Integrator integrator_from_string(const std::string& s);
SimMode sim_mode_from_string(const std::string& s);
DataFamily data_family_from_string(const std::string& s);

struct InitialData {
  DataFamily family = DataFamily::Gaussian;
  double amplitude = 1e-2;
  double width = 2.0;
  // Chart-variable direction; empty means all ones. Groups, when given,
  // switch on only the listed blocks of it.
  std::vector<double> profile;
  std::vector<Group> groups;
  std::vector<double> center;  // empty means the box centre
  std::vector<double> wavenumber;  // packet carrier (integer box modes)
};

struct NormRequest {
  double s = 0.0;
  Group group = Group::C;
};

struct SimConfig {
  int N = 64;
  double side = 0.0;  // <= 0 means 100 pi
  double cfl = 0.5;
  double t_end = 40.0;
  double record_every = 1.0;
  Integrator integrator = Integrator::IfRk4;
  SimMode mode = SimMode::Original;
  InitialData initial;
  std::vector<NormRequest> norms{{0.0, Group::U1}, {0.0, Group::C}, {0.0, Group::D}};
  double q = 1.0;  // exponent for v1_Lq
  double p = 1.0;  // L^p character of the data for predictions
  Regime regime = Regime::WaveLq;
  double ell = kDefaultEll;
  double fit_t_min = 5.0;
  double fit_t_max = 40.0;
  double blowup_norm = 1e6;
  double saturation_mass = 0.99;
  double saturation_radius = 0.25;  // fraction of the side
  bool store_duhamel = false;  // needs Chart or Linearized mode
  std::string snapshot_dir;  // binary snapshots at every record when set
};

nlohmann::json to_json(const SimConfig& c);
// Unknown keys are rejected so typos surface as errors.
SimConfig sim_config_from_json(const nlohmann::json& j);

struct InitialNorms {
  double max_abs = 0.0;     // max |u~_0|
  double h_ell = 0.0;       // (sum (1 + |k|^2)^ell |u^|^2)^{1/2}
  double c_lp = 0.0;        // ||u~_0^C||_{L^p}
  double d_lpstar = 0.0;    // ||u~_0^D||_{L^{p*}}
  double u1_lq = 0.0;       // ||u~_{0,1}||_{L^q}
};

nlohmann::json to_json(const InitialNorms& n);

// u~_0 on the grid (chart variables, dealiased). Throws DomainError with
// "amplitude outside chart domain" when max |u~_0| exceeds the chart radius.
RealField make_initial_data(const BoxGrid& grid, const TransformedSystem& ts, const InitialData& data);
InitialNorms initial_norms(const BoxGrid& grid, const TransformedSystem& ts, const RealField& ut0, double p, double q,
                           double ell = kDefaultEll);

struct SimResult {
  DecayTrace trace;
  InitialNorms initial;
  RealField final_state;  // evolved variables at the last good record
  long steps = 0;
  // Chart-variable flat spectra at the record times, scaled as continuous
  // transforms (dx^d times the DFT), filled when store_duhamel is set.
  std::vector<double> tau;
  std::vector<SpectralField> flat_state;
  std::vector<SpectralField> flat_nonlinear;
};

class Simulator {
 public:
  // sys is the system as given; ts its chart (built when null).
  Simulator(const SystemSpec& sys, const SimConfig& cfg, std::shared_ptr<const TransformedSystem> ts = nullptr);
  ~Simulator();

  const BoxGrid& grid() const;
  const TransformedSystem& transformed() const;
  const SimConfig& config() const;

  // Evolved variables from chart variables and back (pointwise).
  RealField to_state(const RealField& ut) const;
  RealField to_chart(const RealField& state) const;

  // Spectrum of the right-hand side nonlinearity at a state spectrum.
  ComplexField nonlinear(const ComplexField& v) const;
  // One step of length h in spectral variables.
  ComplexField step(const ComplexField& v, double h) const;

  SimResult run() const;
  // Advances an arbitrary state (evolved variables) to time t with fixed h.
  RealField advance(const RealField& state, double t, double h) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Symbol nodes on the half spectrum with Hermitian weights, matching the
// solver's transform scaling.
SymbolGrid box_symbol_grid(const BoxGrid& grid, const LinearSymbol& sym);
// Rows row0.. of a spectrum as a SpectralField scaled by dx^d.
SpectralField to_symbol_field(const BoxGrid& grid, const ComplexField& spec, int row0, int rows);

// Duhamel check over the stored records, using every stride-th one.
DuhamelResult duhamel_check(const SimResult& res, const BoxGrid& grid, const LinearSymbol& sym, int stride = 1);

struct Snapshot {
  int d = 0;
  int N = 0;
  int n = 0;
  double time = 0.0;
  RealField field;
};

// Header: 8-byte magic "PDHSNAP1", int32 d, int32 N, int32 n, float64 time;
// then components one after another, points in row-major order, all
// little-endian.
void write_snapshot(const std::string& path, const Snapshot& s);
Snapshot read_snapshot(const std::string& path);

}  // namespace pdhyp
