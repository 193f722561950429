#include "pdhyp/dissipation.hpp"

#include "pdhyp/fd.hpp"
#include "pdhyp/sampling.hpp"
#include "pdhyp/structure.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pdhyp {

namespace {

// Hessian of G_l in the preprocessed variables.
Mat conserved_hessian(const SystemSpec& sys, const Vec& u, int l) {
  if (sys.analytic.conserved_jacobian) {
    const Mat h = fd::jacobian(
        [&](const Vec& x) -> Vec { return sys.analytic.conserved_jacobian(x).row(l).transpose(); }, u);
    return 0.5 * (h + h.transpose());
  }
  return fd::hessian([&](const Vec& x) { return sys.conserved(x)(l); }, u);
}

void require_pieces(const SystemSpec& sys) {
  if (!sys.entropy) throw ConfigError("symmetrizer needs an entropy");
  if (!sys.conserved) throw ConfigError("symmetrizer checks require conserved variables G; none supplied");
}

double sym_min_eig(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

Mat symmetrizer_full(const TransformedSystem& ts, const Vec& ut) {
  const SystemSpec& sys = ts.pre();
  require_pieces(sys);
  const auto p = ts.at(ut);
  const int n = sys.n;
  const Mat dg = conserved_jacobian(sys, p.u, DerivativeMode::Analytic);
  const Vec ge = entropy_gradient(sys, p.u, DerivativeMode::Analytic);
  const Vec coef = dg.transpose().partialPivLu().solve(ge);
  Mat s = entropy_hessian(sys, p.u);
  for (int l = 0; l < n; ++l)
    if (coef(l) != 0.0) s -= coef(l) * conserved_hessian(sys, p.u, l);
  const Mat out = p.J.transpose() * s * p.J;
  return 0.5 * (out + out.transpose());
}

Mat symmetrizer(const TransformedSystem& ts, const Vec& ut) {
  const int m = ts.n() - 1;
  return symmetrizer_full(ts, ut).bottomRightCorner(m, m);
}

Mat symmetrizer_direct(const TransformedSystem& ts, const Vec& ut) {
  const SystemSpec& sys = ts.pre();
  require_pieces(sys);
  const int n = sys.n;
  auto gt = [&](const Vec& x) { return ts.conserved(x); };
  const Mat dg = fd::jacobian(gt, ut);
  const Vec ge = fd::gradient([&](const Vec& x) { return ts.entropy(x); }, ut);
  const Vec coef = dg.transpose().partialPivLu().solve(ge);
  Mat a0 = fd::hessian([&](const Vec& x) { return ts.entropy(x); }, ut);
  for (int l = 0; l < n; ++l)
    if (coef(l) != 0.0) a0 -= coef(l) * fd::hessian([&](const Vec& x) { return ts.conserved(x)(l); }, ut);
  a0 = 0.5 * (a0 + a0.transpose());
  return a0.bottomRightCorner(n - 1, n - 1);
}

double commutation_residual(const TransformedSystem& ts, const Vec& ut) {
  const int m = ts.n() - 1;
  const Mat a0 = symmetrizer(ts, ut);
  const auto p = ts.at(ut);
  double worst = 0.0;
  for (int k = 0; k < ts.d(); ++k) {
    const Mat ak = ts.flux(p, k).bottomRightCorner(m, m);
    const Mat prod = a0 * ak;
    worst = std::max(worst, (prod - prod.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

DissipationMatrix dissipation_matrix(const Mat& hess0, const Mat& theta, const BlockLayout& layout) {
  const int n = layout.n, q = layout.d_size();
  const Mat b4 = hess0.bottomRightCorner(q, q);
  const Mat td = theta.bottomRightCorner(q, q);
  DissipationMatrix out;
  out.B4 = b4;
  out.M = -(b4 * td + td.transpose() * b4);
  out.symmetry_residual = (out.M - out.M.transpose()).cwiseAbs().maxCoeff();
  out.c_m = sym_min_eig(out.M);
  const Mat full = hess0 * theta + theta.transpose() * hess0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i < layout.r || j < layout.r) out.c_block_residual = std::max(out.c_block_residual, std::abs(full(i, j)));
  out.passed = out.c_m > 0.0;
  return out;
}

DissipationMatrix dissipation_matrix(const TransformedSystem& ts) {
  const SystemSpec& sys = ts.pre();
  if (!sys.entropy) throw ConfigError("dissipation matrix needs an entropy");
  // J(0) = I, so the chart Hessian at 0 is the preprocessed one.
  const Mat h0 = symmetrizer_full(ts, Vec::Zero(sys.n));
  DissipationMatrix out = dissipation_matrix(h0, ts.theta(), ts.layout());
  if (!out.passed) {
    std::ostringstream os;
    os << "damped dissipation matrix is not positive definite (c_m = " << out.c_m << ")";
    throw StructureError(os.str());
  }
  return out;
}

std::string to_string(CompensatorVariant v) {
  return v == CompensatorVariant::DampedBlock ? "damped_block" : "printed_block";
}

CompensatorVariant compensator_variant_from_string(const std::string& s) {
  if (s == "damped_block") return CompensatorVariant::DampedBlock;
  if (s == "printed_block") return CompensatorVariant::PrintedBlock;
  throw ConfigError("unknown compensator variant '" + s + "'");
}

Mat lmi_pattern(const BlockLayout& layout, CompensatorVariant v) {
  const int m = layout.flat_size();
  Mat w = Mat::Zero(m, m);
  if (v == CompensatorVariant::DampedBlock) {
    for (int i = layout.r - 1; i < m; ++i) w(i, i) = 2.0;
  } else {
    for (int i = layout.n - layout.r; i < m; ++i) w(i, i) = 2.0;
  }
  return w;
}

Mat lmi_matrix(const Mat& K, const Mat& A, const BlockLayout& layout, CompensatorVariant v) {
  const Mat ka = K * A;
  return ka + ka.transpose() + lmi_pattern(layout, v);
}

namespace {

struct Barrier {
  const Mat& A;
  Mat W;
  double bound2;
  int m;
  std::vector<std::pair<int, int>> idx;

  Mat skew(const Eigen::VectorXd& x) const {
    Mat K = Mat::Zero(m, m);
    for (size_t i = 0; i < idx.size(); ++i) {
      K(idx[i].first, idx[i].second) = x(i);
      K(idx[i].second, idx[i].first) = -x(i);
    }
    return K;
  }
  Mat F(const Eigen::VectorXd& x) const {
    const Mat ka = skew(x) * A;
    return ka + ka.transpose() + W - 2.0 * x(x.size() - 1) * Mat::Identity(m, m);
  }
  double slack(const Eigen::VectorXd& x) const { return bound2 - 2.0 * x.head(idx.size()).squaredNorm(); }
  // Objective value; +inf outside the feasible set.
  double value(const Eigen::VectorXd& x, double tau) const {
    const double s = slack(x);
    if (s <= 0.0) return std::numeric_limits<double>::infinity();
    Eigen::LLT<Mat> llt(F(x));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    double logdet = 0.0;
    for (int i = 0; i < m; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    if (!std::isfinite(logdet)) return std::numeric_limits<double>::infinity();
    return -tau * x(x.size() - 1) - logdet - std::log(s);
  }
};

}  // namespace

CompensatorSlice build_compensator(const Mat& A, const BlockLayout& layout, const CompensatorOptions& opt) {
  const int m = layout.flat_size();
  if (A.rows() != m || A.cols() != m) throw DimensionError("compensator needs the (n-1)x(n-1) flat block");
  Barrier b{A, lmi_pattern(layout, opt.variant), opt.norm_bound * opt.norm_bound, m, {}};
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) b.idx.emplace_back(i, j);
  const int p = static_cast<int>(b.idx.size());

  std::vector<Mat> Fi;
  for (const auto& [i, j] : b.idx) {
    Mat e = Mat::Zero(m, m);
    e(i, j) = 1.0;
    e(j, i) = -1.0;
    const Mat ea = e * A;
    Fi.push_back(ea + ea.transpose());
  }
  Fi.push_back(-2.0 * Mat::Identity(m, m));

  Eigen::VectorXd x = Eigen::VectorXd::Zero(p + 1);
  x(p) = 0.5 * (sym_min_eig(b.W) - 1.0);
  const double nu = m + 1.0;
  CompensatorSlice out;
  for (double tau = 1.0;; tau *= 10.0) {
    for (int it = 0; it < 200; ++it) {
      const Mat Finv = b.F(x).inverse();
      Eigen::VectorXd g(p + 1);
      Eigen::MatrixXd H(p + 1, p + 1);
      std::vector<Mat> G;
      for (int i = 0; i <= p; ++i) G.push_back(Finv * Fi[i]);
      for (int i = 0; i <= p; ++i) {
        g(i) = -G[i].trace();
        for (int j = i; j <= p; ++j) H(i, j) = H(j, i) = (G[i] * G[j]).trace();
      }
      g(p) -= tau;
      const double s = b.slack(x);
      for (int i = 0; i < p; ++i) {
        g(i) += 4.0 * x(i) / s;
        H(i, i) += 4.0 / s;
        for (int j = 0; j < p; ++j) H(i, j) += 16.0 * x(i) * x(j) / (s * s);
      }
      const Eigen::VectorXd dx = H.ldlt().solve(-g);
      const double dec = -g.dot(dx);
      ++out.newton_steps;
      if (!(dec > 1e-14)) break;
      const double f0 = b.value(x, tau);
      double a = 1.0;
      while (a > 1e-12 && !(b.value(x + a * dx, tau) <= f0 - 0.25 * a * dec)) a *= 0.5;
      if (a <= 1e-12) break;
      x += a * dx;
      if (dec < 1e-12) break;
    }
    if (nu / tau < opt.gap_tol) break;
  }
  out.K = b.skew(x);
  out.margin = 0.5 * sym_min_eig(lmi_matrix(out.K, A, layout, opt.variant));
  out.passed = out.margin >= opt.pass_margin;
  return out;
}

CompensatorSlice build_compensator(const TransformedSystem& ts, const Vec& omega, const CompensatorOptions& opt) {
  const int m = ts.n() - 1;
  Mat a = Mat::Zero(ts.n(), ts.n());
  for (int k = 0; k < ts.d(); ++k) a += omega(k) * ts.flux0(k);
  CompensatorSlice s = build_compensator(Mat(a.bottomRightCorner(m, m)), ts.layout(), opt);
  s.omega = omega;
  return s;
}

CompensatorK build_compensator_table(const TransformedSystem& ts, const CompensatorOptions& opt) {
  const auto grid = direction_grid(ts.d(), opt.directions);
  const size_t half = grid.size() / 2;
  CompensatorK table;
  table.variant = opt.variant;
  table.norm_bound = opt.norm_bound;
  table.slices.resize(grid.size());
  for (size_t i = 0; i < half; ++i) {
    table.slices[i] = build_compensator(ts, grid[i], opt);
    CompensatorSlice neg = table.slices[i];
    neg.omega = grid[i + half];
    neg.K = -neg.K;
    table.slices[i + half] = neg;
  }
  const int m = ts.n() - 1;
  table.c_k = std::numeric_limits<double>::infinity();
  for (const auto& s : table.slices) table.c_k = std::min(table.c_k, s.margin);
  for (size_t i = 0; i < grid.size(); ++i) {
    const auto& s = table.slices[i];
    table.skew_residual = std::max(table.skew_residual, (s.K + s.K.transpose()).cwiseAbs().maxCoeff());
    if (i < half)
      table.oddness_residual =
          std::max(table.oddness_residual, (s.K + table.slices[i + half].K).cwiseAbs().maxCoeff());
    Mat a = Mat::Zero(ts.n(), ts.n());
    for (int k = 0; k < ts.d(); ++k) a += s.omega(k) * ts.flux0(k);
    const Mat lmi = lmi_matrix(s.K, Mat(a.bottomRightCorner(m, m)), ts.layout(), opt.variant) -
                    2.0 * table.c_k * Mat::Identity(m, m);
    table.lmi_residual = std::max(table.lmi_residual, -sym_min_eig(lmi));
  }
  table.passed = table.c_k >= opt.pass_margin;
  return table;
}

nlohmann::json to_json(const CompensatorK& k) {
  nlohmann::json j;
  j["variant"] = to_string(k.variant);
  j["norm_bound"] = k.norm_bound;
  j["c_k"] = k.c_k;
  j["skew_residual"] = k.skew_residual;
  j["oddness_residual"] = k.oddness_residual;
  j["lmi_residual"] = k.lmi_residual;
  j["passed"] = k.passed;
  nlohmann::json e = nlohmann::json::object();
  for (size_t i = 0; i < k.slices.size(); ++i) {
    const auto& s = k.slices[i];
    e[std::to_string(i)] = {{"omega", vec_to_json(s.omega)}, {"K", mat_to_json(s.K)},
                            {"margin", s.margin},           {"passed", s.passed}};
  }
  j["entries"] = e;
  return j;
}

CompensatorK compensator_from_json(const nlohmann::json& j) {
  CompensatorK k;
  k.variant = compensator_variant_from_string(j.at("variant").get<std::string>());
  k.norm_bound = j.at("norm_bound").get<double>();
  k.c_k = j.at("c_k").get<double>();
  k.skew_residual = j.at("skew_residual").get<double>();
  k.oddness_residual = j.at("oddness_residual").get<double>();
  k.lmi_residual = j.at("lmi_residual").get<double>();
  k.passed = j.at("passed").get<bool>();
  const auto& e = j.at("entries");
  k.slices.resize(e.size());
  for (size_t i = 0; i < e.size(); ++i) {
    const auto& s = e.at(std::to_string(i));
    k.slices[i].omega = vec_from_json(s.at("omega"));
    k.slices[i].K = mat_from_json(s.at("K"));
    k.slices[i].margin = s.at("margin").get<double>();
    k.slices[i].passed = s.at("passed").get<bool>();
  }
  return k;
}

double entropy_functional(const Eigen::MatrixXd& field, double cell_volume,
                          const std::function<double(const Vec&)>& eta) {
  double sum = 0.0;
  for (Eigen::Index c = 0; c < field.cols(); ++c) sum += eta(Vec(field.col(c)));
  return sum * cell_volume;
}

double entropy_functional(const Eigen::MatrixXd& field, double cell_volume, const SystemSpec& sys) {
  if (!sys.entropy) throw ConfigError("system has no entropy");
  return entropy_functional(field, cell_volume, sys.entropy);
}

double entropy_functional(const Eigen::MatrixXd& field_ut, double cell_volume, const TransformedSystem& ts) {
  return entropy_functional(field_ut, cell_volume, [&](const Vec& x) { return ts.entropy(x); });
}

}  // namespace pdhyp
