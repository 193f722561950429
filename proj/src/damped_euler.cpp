#include "pdhyp/damped_euler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pdhyp {

double GammaLaw::p(double rho, double S) const { return std::exp(S / cv) * std::pow(rho, gamma); }
double GammaLaw::p_rho(double rho, double S) const { return gamma * std::exp(S / cv) * std::pow(rho, gamma - 1.0); }
double GammaLaw::p_S(double rho, double S) const { return p(rho, S) / cv; }
double GammaLaw::e(double rho, double S) const { return p(rho, S) / ((gamma - 1.0) * rho); }
double GammaLaw::theta(double rho, double S) const { return e(rho, S) / cv; }

Mat orthonormal_complement(const Vec& omega) {
  const int d = static_cast<int>(omega.size());
  Mat chi(d, std::max(d - 1, 0));
  if (d <= 1) return chi;
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(omega(a)) < std::abs(omega(b)); });
  for (int c = 0; c < d - 1; ++c) {
    Vec x = Vec::Zero(d);
    x(order[c]) = 1.0;
    x -= omega.dot(x) * omega;
    for (int j = 0; j < c; ++j) x -= chi.col(j).dot(x) * chi.col(j);
    chi.col(c) = x / x.norm();
  }
  return chi;
}

namespace {

struct Euler {
  DampedEulerOptions o;
  double e_s, p_s, th_s, c_s;  // starred constants

  explicit Euler(const DampedEulerOptions& opt) : o(opt) {
    e_s = o.eos.e(o.rho_star, o.S_star);
    p_s = o.eos.p(o.rho_star, o.S_star);
    th_s = o.eos.theta(o.rho_star, o.S_star);
    c_s = e_s + p_s / o.rho_star - o.S_star * th_s;
  }

  int n() const { return o.d + 2; }
  static double S(const Vec& u) { return u(0); }
  static double rho(const Vec& u) { return u(1); }
  Vec v(const Vec& u) const { return u.tail(o.d); }

  Mat flux(const Vec& u, int k) const {
    Mat a = Mat::Zero(n(), n());
    const double r = rho(u), s = S(u);
    const double vk = u(2 + k);
    for (int i = 0; i < n(); ++i) a(i, i) = vk;
    a(1, 2 + k) = r;
    a(2 + k, 0) = o.eos.p_S(r, s) / r;
    a(2 + k, 1) = o.eos.p_rho(r, s) / r;
    return a;
  }

  Vec source(const Vec& u) const {
    Vec q = Vec::Zero(n());
    const double ds = S(u) - o.S_star;
    q(1) = o.mass_source * ds * ds;
    if (!o.undamped) q.tail(o.d) = -o.damping * v(u);
    return q;
  }

  Mat source_jac(const Vec& u) const {
    Mat j = Mat::Zero(n(), n());
    j(1, 0) = 2.0 * o.mass_source * (S(u) - o.S_star);
    if (!o.undamped)
      for (int k = 0; k < o.d; ++k) j(2 + k, 2 + k) = -o.damping;
    return j;
  }

  Vec conserved(const Vec& u) const {
    Vec g(n());
    g(0) = rho(u) * S(u);
    g(1) = rho(u);
    g.tail(o.d) = rho(u) * v(u);
    return g;
  }

  Mat conserved_jac(const Vec& u) const {
    Mat j = Mat::Zero(n(), n());
    j(0, 0) = rho(u);
    j(0, 1) = S(u);
    j(1, 1) = 1.0;
    for (int k = 0; k < o.d; ++k) {
      j(2 + k, 1) = u(2 + k);
      j(2 + k, 2 + k) = rho(u);
    }
    return j;
  }

  double entropy(const Vec& u) const {
    const double r = rho(u), s = S(u);
    const double v2 = v(u).squaredNorm();
    return 0.5 * r * v2 + r * o.eos.e(r, s) - r * e_s - r * s * th_s + r * o.S_star * th_s -
           (r / o.rho_star) * p_s + p_s;
  }

  Vec entropy_grad(const Vec& u) const {
    const double r = rho(u), s = S(u);
    Vec g(n());
    g(0) = r * (o.eos.theta(r, s) - th_s);
    g(1) = 0.5 * v(u).squaredNorm() + o.eos.e(r, s) + o.eos.p(r, s) / r - e_s - p_s / o.rho_star - (s - o.S_star) * th_s;
    g.tail(o.d) = r * v(u);
    return g;
  }

  double total(const Vec& u) const {
    const double r = rho(u), s = S(u);
    return 0.5 * r * v(u).squaredNorm() + r * o.eos.e(r, s) + o.eos.p(r, s);
  }

  double entropy_flux(const Vec& u, int k) const {
    const double r = rho(u), s = S(u), vk = u(2 + k);
    return vk * total(u) - c_s * r * vk - th_s * r * s * vk;
  }

  Vec entropy_flux_grad(const Vec& u, int k) const {
    const double r = rho(u), s = S(u), vk = u(2 + k);
    Vec g(n());
    g(0) = vk * (r * o.eos.theta(r, s) + o.eos.p_S(r, s)) - th_s * r * vk;
    g(1) = vk * (0.5 * v(u).squaredNorm() + o.eos.e(r, s) + o.eos.p(r, s) / r + o.eos.p_rho(r, s)) - c_s * vk -
           th_s * s * vk;
    for (int j = 0; j < o.d; ++j) g(2 + j) = vk * r * u(2 + j);
    g(2 + k) += total(u) - c_s * r - th_s * r * s;
    return g;
  }

  Vec first_right(const Vec& u) const {
    Vec r1 = Vec::Zero(n());
    r1(0) = 1.0;
    r1(1) = -o.eos.p_S(rho(u), S(u)) / o.eos.p_rho(rho(u), S(u));
    return r1;
  }

  EigenPacket eigen(const Vec& u, const Vec& w) const {
    const int d = o.d, m = n();
    const double r = rho(u), s = S(u);
    const double pr = o.eos.p_rho(r, s), ps = o.eos.p_S(r, s);
    const double c = std::sqrt(pr);
    const double vw = v(u).dot(w);
    const Mat chi = orthonormal_complement(w);
    EigenPacket p;
    p.state = u;
    p.direction = w;
    p.lambda = Vec::Constant(m, vw);
    p.lambda(d) = vw + c;
    p.lambda(d + 1) = vw - c;
    p.left = Mat::Zero(m, m);
    p.right = Mat::Zero(m, m);
    p.left(0, 0) = 1.0;
    p.right.col(0) = first_right(u);
    for (int k = 0; k < d - 1; ++k) {
      p.left.row(1 + k).tail(d) = chi.col(k).transpose();
      p.right.col(1 + k).tail(d) = chi.col(k);
    }
    for (int sgn = 0; sgn < 2; ++sgn) {
      const double sg = sgn == 0 ? 1.0 : -1.0;
      const int i = d + sgn;
      p.left(i, 0) = ps / c;
      p.left(i, 1) = c;
      p.left.row(i).tail(d) = sg * r * w.transpose();
      p.right(1, i) = 1.0 / (2.0 * c);
      p.right.col(i).tail(d) = sg * w / (2.0 * r);
    }
    return p;
  }
};

}  // namespace

SystemSpec builtin_damped_euler(const DampedEulerOptions& opt) {
  if (opt.d < 1 || opt.d + 2 > kMaxUnknowns) throw DimensionError("damped Euler supports 1 <= d <= " + std::to_string(kMaxUnknowns - 2));
  if (opt.eos.gamma <= 1.0) throw ConfigError("gamma must exceed 1");
  if (opt.rho_star <= 0.0) throw ConfigError("equilibrium density must be positive");
  const auto e = std::make_shared<const Euler>(opt);
  SystemSpec s;
  s.name = "damped_euler";
  s.params = {{"gamma", opt.eos.gamma}, {"cv", opt.eos.cv}, {"rho_star", opt.rho_star}, {"S_star", opt.S_star},
              {"damping", opt.undamped ? 0.0 : opt.damping}, {"mass_source", opt.mass_source}};
  s.d = opt.d;
  s.n = opt.d + 2;
  s.r = 2;
  s.flux_jacobian = [e](const Vec& u, int k) { return e->flux(u, k); };
  s.source = [e](const Vec& u) { return e->source(u); };
  s.conserved = [e](const Vec& u) { return e->conserved(u); };
  s.entropy = [e](const Vec& u) { return e->entropy(u); };
  s.entropy_flux = [e](const Vec& u, int k) { return e->entropy_flux(u, k); };
  s.eigen_provider = [e](const Vec& u, const Vec& w) { return e->eigen(u, w); };
  s.first_right = [e](const Vec& u) { return e->first_right(u); };
  s.analytic.source_jacobian = [e](const Vec& u) { return e->source_jac(u); };
  s.analytic.entropy_gradient = [e](const Vec& u) { return e->entropy_grad(u); };
  s.analytic.entropy_flux_gradient = [e](const Vec& u, int k) { return e->entropy_flux_grad(u, k); };
  s.analytic.conserved_jacobian = [e](const Vec& u) { return e->conserved_jac(u); };
  s.analytic.first_eigenvalue_gradient = [e](const Vec&, const Vec& w) {
    Vec g = Vec::Zero(e->n());
    g.tail(e->o.d) = w;
    return g;
  };
  s.equilibrium = Vec::Zero(s.n);
  s.equilibrium(0) = opt.S_star;
  s.equilibrium(1) = opt.rho_star;
  s.transform = Mat::Identity(s.n, s.n);
  if (opt.undamped) s.name = "damped_euler_undamped";
  if (opt.mass_source != 0.0) s.name = "damped_euler_mass_source";
  return s;
}

SystemSpec builtin_damped_euler(int d, double gamma) {
  DampedEulerOptions o;
  o.d = d;
  o.eos.gamma = gamma;
  return builtin_damped_euler(o);
}

}  // namespace pdhyp
