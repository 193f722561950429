#include "pdhyp/coords.hpp"

#include "pdhyp/fd.hpp"
#include "pdhyp/sampling.hpp"

#include <cmath>
#include <sstream>

namespace pdhyp {

namespace {

template <class F>
Vec rk4_step(F&& f, const Vec& u, double h) {
  const Vec k1 = f(u);
  const Vec k2 = f(u + 0.5 * h * k1);
  const Vec k3 = f(u + 0.5 * h * k2);
  const Vec k4 = f(u + h * k3);
  return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double cond(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  const auto s = svd.singularValues();
  return s(0) / std::max(s(s.size() - 1), 1e-300);
}

}  // namespace

Vec trajectory(const SystemSpec& sys, const Vec& u0, double s, const TrajectoryOptions& opt) {
  if (s == 0.0) return u0;
  const double sign = s > 0 ? 1.0 : -1.0;
  auto f = [&](const Vec& u) -> Vec { return sign * first_right_eigenvector(sys, u); };
  double remaining = std::abs(s);
  double h = std::min(opt.h_init, remaining);
  Vec u = u0;
  int steps = 0;
  while (remaining > 0.0) {
    if (++steps > opt.max_steps) throw DomainError("trajectory integration exceeded the step budget");
    h = std::min(h, remaining);
    const Vec y1 = rk4_step(f, u, h);
    const Vec yh = rk4_step(f, u, 0.5 * h);
    const Vec y2 = rk4_step(f, yh, 0.5 * h);
    const double err = (y2 - y1).cwiseAbs().maxCoeff() / 15.0;
    if (err <= opt.tol * h || h < 1e-12) {
      u = y2 + (y2 - y1) / 15.0;
      remaining -= h;
      if ((u - sys.equilibrium).norm() > sys.domain_radius) {
        std::ostringstream os;
        os << "trajectory left the domain ball (radius " << sys.domain_radius << ") at arc "
           << sign * (std::abs(s) - remaining);
        throw DomainError(os.str());
      }
    }
    const double fac = err > 0 ? 0.9 * std::pow(opt.tol * h / err, 0.25) : 2.0;
    h = std::min(opt.h_max, h * std::clamp(fac, 0.2, 2.0));
  }
  return u;
}

Preprocessed preprocess_linear(const SystemSpec& sys) {
  if (!sys.normalized) throw ConfigError("preprocessing expects a normalized system");
  validate(sys);
  const int n = sys.n, r = sys.r, m = n - r;
  const Mat theta = source_jacobian(sys, Vec::Zero(n), DerivativeMode::Analytic);
  Preprocessed out;
  out.T1 = Mat::Identity(n, n);
  const Mat coupling = theta.bottomLeftCorner(m, r);
  if (coupling.cwiseAbs().maxCoeff() > 1e-14) {
    const Mat dd = theta.bottomRightCorner(m, m);
    Eigen::JacobiSVD<Mat> svd(dd);
    if (svd.singularValues()(m - 1) < 1e-8)
      throw StructureError("damped block of grad Q(0) is singular (A1) but couples to the first r unknowns");
    out.T1.bottomLeftCorner(m, r) = -dd.inverse() * coupling;
  }
  const SystemSpec s1 = apply_linear_transform(sys, out.T1);
  const Vec r1 = first_right_eigenvector(s1, Vec::Zero(n));
  Eigen::Index piv = 0;
  const double big = r1.head(r).cwiseAbs().maxCoeff(&piv);
  if (!(big > 1e-12)) throw StructureError("r_1(0) has no component among the first r unknowns");
  out.pivot = static_cast<int>(piv);
  out.T2 = Mat::Zero(n, n);
  out.T2.col(0) = r1;
  int c = 1;
  for (int i = 0; i < r; ++i)
    if (i != piv) out.T2(i, c++) = 1.0;
  for (int i = r; i < n; ++i) out.T2(i, c++) = 1.0;
  out.system = apply_linear_transform(s1, out.T2);
  out.T = out.T1 * out.T2;
  const Mat th2 = source_jacobian(out.system, Vec::Zero(n), DerivativeMode::Analytic);
  if (th2.leftCols(r).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + theta.cwiseAbs().maxCoeff()))
    throw StructureError("r_1(0) is not annihilated by grad Q(0) (A4)");
  out.system.name = sys.name;
  return out;
}

Chart::Chart(const SystemSpec& pre, const ChartOptions& opt)
    : sys_(std::make_shared<const SystemSpec>(pre)), opt_(opt), radius_(opt.radius) {
  const int n = pre.n;
  const Vec e1 = r1(Vec::Zero(n));
  Vec unit = Vec::Zero(n);
  unit(0) = 1.0;
  if ((e1 - unit).cwiseAbs().maxCoeff() > 1e-10)
    throw StructureError("chart needs r_1(0) = e_1; run preprocess_linear first");
  for (int attempt = 0; attempt < 30; ++attempt) {
    SamplePlan plan;
    plan.radius = radius_;
    plan.n_states = opt_.validation_samples;
    plan.seed = opt_.seed;
    double worst = 1.0;
    for (const Vec& x : sample_states(n, plan)) worst = std::max(worst, cond(jacobian(x)));
    max_cond_ = worst;
    if (worst <= opt_.cond_limit) return;
    radius_ *= 0.8;
  }
  throw DegeneracyError("chart Jacobian stays ill-conditioned on every trial radius");
}

Vec Chart::r1(const Vec& u) const { return first_right_eigenvector(*sys_, u); }

Vec Chart::flow(Vec u, double s) const {
  if (s == 0.0) return u;
  const double h = s / opt_.steps;
  auto f = [this](const Vec& x) { return r1(x); };
  for (int i = 0; i < opt_.steps; ++i) u = rk4_step(f, u, h);
  return u;
}

Vec Chart::forward(const Vec& ut) const {
  Vec start = ut;
  start(0) = 0.0;
  return flow(start, ut(0));
}

Mat Chart::jacobian(const Vec& ut) const { return jacobian(ut, forward(ut)); }

Mat Chart::jacobian(const Vec& ut, const Vec& u) const {
  const int n = static_cast<int>(ut.size());
  Mat J(n, n);
  J.col(0) = r1(u);
  for (int j = 1; j < n; ++j) {
    const double h = fd::step_for(ut(j));
    Vec p = ut, m = ut;
    p(j) += h;
    m(j) -= h;
    J.col(j) = (forward(p) - forward(m)) / (2.0 * h);
  }
  return J;
}

Vec Chart::project_guess(const Vec& u) const {
  // follow r_1 back to the hyperplane {u_1 = 0}, using u_1 as the parameter
  const int n = static_cast<int>(u.size());
  Vec y(n + 1);
  y.head(n) = u;
  y(n) = 0.0;
  auto f = [n, this](const Vec& x) -> Vec {
    const Vec v = r1(x.head(n));
    Vec out(n + 1);
    out.head(n) = v / v(0);
    out(n) = 1.0 / v(0);
    return out;
  };
  const Vec probe = r1(u);
  if (!(probe(0) > 0.1)) return u;
  const double h = -u(0) / opt_.steps;
  if (h != 0.0)
    for (int i = 0; i < opt_.steps; ++i) y = rk4_step(f, y, h);
  Vec ut = y.head(n);
  ut(0) = -y(n);
  return ut;
}

Vec Chart::inverse(const Vec& u) const {
  Vec ut = project_guess(u);
  Vec res = forward(ut) - u;
  double rn = res.cwiseAbs().maxCoeff();
  for (int it = 0; it < opt_.newton_max && rn > opt_.newton_tol; ++it) {
    const Mat J = jacobian(ut);
    const Vec step = J.partialPivLu().solve(res);
    double t = 1.0;
    bool improved = false;
    for (int b = 0; b < 40; ++b) {
      const Vec cand = ut - t * step;
      const Vec cres = forward(cand) - u;
      const double cn = cres.cwiseAbs().maxCoeff();
      if (cn < rn) {
        ut = cand;
        res = cres;
        rn = cn;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }
  if (!(rn <= std::max(opt_.newton_tol, 1e-14 * (1.0 + u.norm())) * 10.0)) {
    std::ostringstream os;
    os << "chart inverse did not converge (residual " << rn << ")";
    throw DomainError(os.str());
  }
  if (ut.norm() > radius_ * (1.0 + 1e-9)) {
    std::ostringstream os;
    os << "state lies outside the chart domain (|u~| = " << ut.norm() << " > " << radius_ << ")";
    throw DomainError(os.str());
  }
  return ut;
}

TransformedSystem::TransformedSystem(Chart chart) : chart_(std::move(chart)) {
  const int n = chart_.system().n;
  theta_ = fd::jacobian([this](const Vec& x) { return source(at(x)); }, Vec::Zero(n));
  const Point p0 = at(Vec::Zero(n));
  for (int k = 0; k < chart_.system().d; ++k) flux0_.push_back(flux(p0, k));
}

TransformedSystem::Point TransformedSystem::at(const Vec& ut) const {
  Point p;
  p.ut = ut;
  p.u = chart_.forward(ut);
  p.J = chart_.jacobian(ut, p.u);
  p.lu.compute(p.J);
  return p;
}

Mat TransformedSystem::flux(const Point& p, int k) const {
  return p.lu.solve(pre().flux_jacobian(p.u, k) * p.J);
}

Mat TransformedSystem::direction(const Point& p, const Vec& omega) const {
  return p.lu.solve(direction_matrix(pre(), p.u, omega) * p.J);
}

Vec TransformedSystem::source(const Point& p) const { return p.lu.solve(pre().source(p.u)); }

EigenPacket TransformedSystem::eigen(const Point& p, const Vec& omega) const {
  EigenPacket e = eigen_decompose(pre(), p.u, omega);
  e.right = p.lu.solve(e.right);
  e.left = e.left * p.J;
  e.state = p.ut;
  return e;
}

Vec TransformedSystem::first_left(const Point& p) const {
  Vec w = Vec::Zero(d());
  w(0) = 1.0;
  const EigenPacket e = eigen_decompose(pre(), p.u, w);
  return (e.left.row(0) * p.J).transpose();
}

double TransformedSystem::entropy(const Vec& ut) const { return pre().entropy(chart_.forward(ut)); }

Vec TransformedSystem::conserved(const Vec& ut) const { return pre().conserved(chart_.forward(ut)); }

SystemSpec TransformedSystem::as_system() const {
  const auto self = std::make_shared<const TransformedSystem>(*this);
  const SystemSpec& base = pre();
  SystemSpec s;
  s.name = base.name + "_chart";
  s.params = base.params;
  s.d = base.d;
  s.n = base.n;
  s.r = base.r;
  s.normalized = true;
  s.equilibrium = Vec::Zero(base.n);
  s.domain_radius = chart_.radius();
  s.transform = base.transform;
  s.flux_jacobian = [self](const Vec& ut, int k) { return self->flux(ut, k); };
  s.source = [self](const Vec& ut) { return self->source(ut); };
  if (base.conserved) s.conserved = [self](const Vec& ut) { return self->conserved(ut); };
  if (base.entropy) s.entropy = [self](const Vec& ut) { return self->entropy(ut); };
  if (base.entropy_flux)
    s.entropy_flux = [self](const Vec& ut, int k) { return self->pre().entropy_flux(self->chart().forward(ut), k); };
  s.eigen_provider = [self](const Vec& ut, const Vec& w) { return self->eigen(self->at(ut), w); };
  s.first_right = [self](const Vec& ut) -> Vec {
    const Point p = self->at(ut);
    return p.lu.solve(first_right_eigenvector(self->pre(), p.u));
  };
  return s;
}

std::shared_ptr<TransformedSystem> build_transformed(const SystemSpec& sys, const ChartOptions& opt) {
  const SystemSpec normalized = normalize_equilibrium(sys);
  const Preprocessed pre = preprocess_linear(normalized);
  return std::make_shared<TransformedSystem>(Chart(pre.system, opt));
}

Vec wave_components(const TransformedSystem& ts, const TransformedSystem::Point& p, const Vec& grad_k, int k) {
  Vec w = Vec::Zero(ts.d());
  w(k) = 1.0;
  return ts.eigen(p, w).left * grad_k;
}

Vec wave_reconstruct(const TransformedSystem& ts, const TransformedSystem::Point& p, const Vec& waves, int k) {
  Vec w = Vec::Zero(ts.d());
  w(k) = 1.0;
  return ts.eigen(p, w).right * waves;
}

double v1_value(const TransformedSystem& ts, const TransformedSystem::Point& p) {
  return ts.first_left(p).dot(p.ut);
}

ChartReport verify_chart(const TransformedSystem& ts, int samples, std::uint64_t seed, double sample_radius) {
  const int n = ts.n(), r = ts.r();
  ChartReport rep;
  rep.radius = ts.chart().radius();
  rep.max_condition = ts.chart().max_condition();
  rep.samples = samples;
  rep.jacobian_at_origin = (ts.chart().jacobian(Vec::Zero(n)) - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
  SamplePlan plan;
  plan.radius = std::min(sample_radius, ts.chart().radius());
  plan.n_states = samples;
  plan.seed = seed;
  Vec e1 = Vec::Zero(n);
  e1(0) = 1.0;
  for (const Vec& x : sample_states(n, plan)) {
    const TransformedSystem::Point p = ts.at(x);
    rep.roundtrip = std::max(rep.roundtrip, (ts.chart().inverse(p.u) - x).cwiseAbs().maxCoeff());
    rep.first_column =
        std::max(rep.first_column, (p.J.col(0) - first_right_eigenvector(ts.pre(), p.u)).cwiseAbs().maxCoeff());
    for (int k = 0; k < ts.d(); ++k) {
      Vec w = Vec::Zero(ts.d());
      w(k) = 1.0;
      const Mat a = ts.flux(p, k);
      const EigenPacket e = ts.eigen(p, w);
      rep.lower_first_column = std::max(rep.lower_first_column, a.col(0).tail(n - 1).cwiseAbs().maxCoeff());
      rep.first_diagonal = std::max(rep.first_diagonal, std::abs(a(0, 0) - e.lambda(0)));
      rep.right_first = std::max(rep.right_first, (e.right.col(0) - e1).cwiseAbs().maxCoeff());
      rep.left_first_column = std::max(rep.left_first_column, e.left.col(0).tail(n - 1).cwiseAbs().maxCoeff());
    }
  }
  const Mat& th = ts.theta();
  rep.theta_layout = std::max(th.topRows(r).cwiseAbs().maxCoeff(), th.leftCols(r).cwiseAbs().maxCoeff());
  for (int i = -10; i <= 10; ++i) {
    Vec x = Vec::Zero(n);
    x(0) = plan.radius * i / 10.0;
    rep.source_on_axis = std::max(rep.source_on_axis, ts.source(x).cwiseAbs().maxCoeff());
  }
  rep.passed = rep.jacobian_at_origin < 1e-9 && rep.roundtrip < 1e-10 && rep.lower_first_column < 1e-7 &&
               rep.first_diagonal < 1e-7 && rep.right_first < 1e-8 && rep.left_first_column < 1e-8 &&
               rep.theta_layout < 1e-8;
  return rep;
}

}  // namespace pdhyp

namespace pdhyp {

#define PDHYP_CHART_FIELDS(X)                                                                          \
  X(radius) X(max_condition) X(jacobian_at_origin) X(roundtrip) X(first_column) X(lower_first_column) \
  X(first_diagonal) X(right_first) X(left_first_column) X(theta_layout) X(source_on_axis)

nlohmann::json to_json(const ChartReport& r) {
  nlohmann::json j;
#define X(f) j[#f] = r.f;
  PDHYP_CHART_FIELDS(X)
#undef X
  j["samples"] = r.samples;
  j["passed"] = r.passed;
  return j;
}

ChartReport chart_report_from_json(const nlohmann::json& j) {
  ChartReport r;
  try {
#define X(f) r.f = j.at(#f).get<double>();
    PDHYP_CHART_FIELDS(X)
#undef X
    r.samples = j.at("samples").get<int>();
    r.passed = j.at("passed").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("chart report: ") + e.what());
  }
  return r;
}

}  // namespace pdhyp
