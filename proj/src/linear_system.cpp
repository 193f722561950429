#include "pdhyp/linear_system.hpp"

namespace pdhyp {

SystemSpec make_linear_system(const LinearSystemOptions& opt) {
  if (opt.A.empty()) throw ConfigError("linear system needs at least one A^k");
  const int n = static_cast<int>(opt.A.front().rows());
  const Mat H = opt.H.size() ? opt.H : Mat(Mat::Identity(n, n));
  const auto A = std::make_shared<const std::vector<Mat>>(opt.A);
  const Mat theta = opt.theta;
  const int qi = opt.quad_index, qf = opt.quad_from;
  const double qc = opt.quad_coeff;

  SystemSpec s;
  s.name = opt.name;
  s.d = static_cast<int>(opt.A.size());
  s.n = n;
  s.r = opt.r;
  s.flux_jacobian = [A](const Vec&, int k) { return (*A)[k]; };
  s.source = [theta, qi, qf, qc](const Vec& u) -> Vec {
    Vec q = theta * u;
    if (qi >= 0) q(qi) += qc * u(qf) * u(qf);
    return q;
  };
  s.conserved = [](const Vec& u) { return u; };
  s.entropy = [H](const Vec& u) { return 0.5 * u.dot(H * u); };
  s.entropy_flux = [H, A](const Vec& u, int k) { return 0.5 * u.dot(H * (*A)[k] * u); };
  s.analytic.source_jacobian = [theta, qi, qf, qc](const Vec& u) -> Mat {
    Mat j = theta;
    if (qi >= 0) j(qi, qf) += 2.0 * qc * u(qf);
    return j;
  };
  s.analytic.entropy_gradient = [H](const Vec& u) -> Vec { return H * u; };
  s.analytic.entropy_flux_gradient = [H, A](const Vec& u, int k) -> Vec {
    const Mat m = H * (*A)[k];
    return 0.5 * (m + m.transpose()) * u;
  };
  s.analytic.conserved_jacobian = [n](const Vec&) -> Mat { return Mat::Identity(n, n); };
  s.equilibrium = Vec::Zero(n);
  s.transform = Mat::Identity(n, n);
  return s;
}

SystemSpec toy_two_by_two() {
  LinearSystemOptions o;
  Mat a = Mat::Zero(3, 3);
  a(1, 2) = a(2, 1) = 1.0;
  o.A = {a};
  o.theta = Mat::Zero(3, 3);
  o.theta(2, 2) = -1.0;
  o.r = 2;
  o.name = "toy2x2";
  return make_linear_system(o);
}

}  // namespace pdhyp
