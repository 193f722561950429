#pragma once

#include "pdhyp/eigenstructure.hpp"
#include "pdhyp/system.hpp"

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace pdhyp {

struct TrajectoryOptions {
  double tol = 1e-10;  // local error per unit arc
  double h_init = 1e-2;
  double h_max = 5e-2;
  int max_steps = 200000;
};

// Integral curve of r_1 through u0, evaluated at arc s (either sign).
Vec trajectory(const SystemSpec& sys, const Vec& u0, double s, const TrajectoryOptions& opt = {});

struct Preprocessed {
  SystemSpec system;
  Mat T1;  // u = T1 u'   (decouples the damped block)
  Mat T2;  // u' = T2 u''  (sends r_1(0) to e_1)
  Mat T;   // T1 * T2
  int pivot = 0;
};

// Linear preprocessing of a normalized system. Needs an invertible damped
// block only when the D rows of grad Q(0) couple to the first r columns.
Preprocessed preprocess_linear(const SystemSpec& normalized);

struct ChartOptions {
  double radius = 0.2;
  int steps = 32;  // fixed RK4 steps per forward evaluation
  double cond_limit = 1e6;
  double newton_tol = 1e-12;
  int newton_max = 50;
  int validation_samples = 48;
  std::uint64_t seed = 1;
};

// u = Phi(u~): follow r_1 for arc u~_1 starting from (0, u~_2, ..., u~_n).
class Chart {
 public:
  Chart(const SystemSpec& preprocessed, const ChartOptions& opt = {});

  Vec forward(const Vec& ut) const;
  Vec inverse(const Vec& u) const;
  Mat jacobian(const Vec& ut) const;
  Mat jacobian(const Vec& ut, const Vec& u) const;  // u = forward(ut) already known

  double radius() const { return radius_; }
  double max_condition() const { return max_cond_; }
  const SystemSpec& system() const { return *sys_; }
  const ChartOptions& options() const { return opt_; }

 private:
  Vec r1(const Vec& u) const;
  Vec flow(Vec u, double s) const;
  Vec project_guess(const Vec& u) const;

  std::shared_ptr<const SystemSpec> sys_;
  ChartOptions opt_;
  double radius_ = 0.2;
  double max_cond_ = 1.0;
};

class TransformedSystem {
 public:
  explicit TransformedSystem(Chart chart);

  struct Point {
    Vec ut;
    Vec u;
    Mat J;
    Eigen::PartialPivLU<Mat> lu;
  };
  Point at(const Vec& ut) const;

  Mat flux(const Point& p, int k) const;
  Mat flux(const Vec& ut, int k) const { return flux(at(ut), k); }
  Mat direction(const Point& p, const Vec& omega) const;
  Vec source(const Point& p) const;
  Vec source(const Vec& ut) const { return source(at(ut)); }
  EigenPacket eigen(const Point& p, const Vec& omega) const;
  Vec first_left(const Point& p) const;
  double entropy(const Vec& ut) const;
  Vec conserved(const Vec& ut) const;

  // Theta = grad Q~(0), cached.
  const Mat& theta() const { return theta_; }
  // A~^k(0), cached.
  const Mat& flux0(int k) const { return flux0_[k]; }

  const Chart& chart() const { return chart_; }
  const SystemSpec& pre() const { return chart_.system(); }
  int n() const { return pre().n; }
  int d() const { return pre().d; }
  int r() const { return pre().r; }
  BlockLayout layout() const { return pre().layout(); }

  // Evaluators in chart variables packaged as a system.
  SystemSpec as_system() const;

 private:
  Chart chart_;
  Mat theta_;
  std::vector<Mat> flux0_;
};

// Builds normalize -> preprocess -> chart -> transformed system.
std::shared_ptr<TransformedSystem> build_transformed(const SystemSpec& sys, const ChartOptions& opt = {});

// w~_{i,k} = l~_i(u~, e_k) . grad_k u~ for one point.
Vec wave_components(const TransformedSystem& ts, const TransformedSystem::Point& p, const Vec& grad_k, int k);
// Sum_i w~_{i,k} r~_i(u~, e_k).
Vec wave_reconstruct(const TransformedSystem& ts, const TransformedSystem::Point& p, const Vec& waves, int k);

// v~_1 = l~_1(u~) . u~.
double v1_value(const TransformedSystem& ts, const TransformedSystem::Point& p);

struct ChartReport {
  double radius = 0.0;
  double max_condition = 0.0;
  int samples = 0;
  double jacobian_at_origin = 0.0;   // max |J(0) - I|
  double roundtrip = 0.0;            // max |inverse(forward(x)) - x|
  double first_column = 0.0;         // max |J e_1 - r_1(u)|
  double lower_first_column = 0.0;   // max_j>=2 |A~_{j1}|
  double first_diagonal = 0.0;       // max |A~_{11} - lambda~_1|
  double right_first = 0.0;          // max |r~_1 - e_1|
  double left_first_column = 0.0;    // max_{i>=2} |l~_{i1}|
  double theta_layout = 0.0;         // max |Theta| over rows/columns 1..r
  double source_on_axis = 0.0;       // max |Q~(s e_1)|
  bool passed = false;
};

ChartReport verify_chart(const TransformedSystem& ts, int samples, std::uint64_t seed, double sample_radius = 0.1);

nlohmann::json to_json(const ChartReport& r);
ChartReport chart_report_from_json(const nlohmann::json& j);

}  // namespace pdhyp
