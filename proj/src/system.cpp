#include "pdhyp/system.hpp"

#include "pdhyp/fd.hpp"

#include <cmath>
#include <sstream>

namespace pdhyp {

void validate(const SystemSpec& sys) {
  if (sys.n < 2 || sys.n > kMaxUnknowns)
    throw DimensionError("n must lie in [2, " + std::to_string(kMaxUnknowns) + "], got " + std::to_string(sys.n));
  if (sys.r < 1 || sys.r >= sys.n)
    throw DimensionError("r must satisfy 1 <= r < n (got r=" + std::to_string(sys.r) + ", n=" + std::to_string(sys.n) +
                         ")");
  if (sys.d < 1) throw DimensionError("d must be positive");
  if (!sys.flux_jacobian || !sys.source) throw ConfigError("system '" + sys.name + "' lacks A^k or Q evaluators");
  if (sys.equilibrium.size() != sys.n) throw DimensionError("equilibrium has wrong length");
  const Mat a = sys.flux_jacobian(sys.equilibrium, 0);
  if (a.rows() != sys.n || a.cols() != sys.n) throw DimensionError("A^k returns a matrix of the wrong shape");
  if (sys.source(sys.equilibrium).size() != sys.n) throw DimensionError("Q returns a vector of the wrong length");
}

Mat direction_matrix(const SystemSpec& sys, const Vec& u, const Vec& omega) {
  if (omega.size() != sys.d) throw DimensionError("direction has length " + std::to_string(omega.size()) + ", expected d=" + std::to_string(sys.d));
  const double nrm = omega.norm();
  if (std::abs(nrm - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "direction must be a unit vector (|omega| = " << nrm << "); pass omega / |omega|";
    throw DomainError(os.str());
  }
  Mat a = Mat::Zero(sys.n, sys.n);
  for (int k = 0; k < sys.d; ++k)
    if (omega(k) != 0.0) a += omega(k) * sys.flux_jacobian(u, k);
  return a;
}

namespace {

bool is_zero(const Vec& v) { return v.cwiseAbs().maxCoeff() == 0.0; }

}  // namespace

Mat conserved_jacobian(const SystemSpec& sys, const Vec& u, DerivativeMode mode) {
  if (!sys.conserved) throw ConfigError("system has no conserved-variable map G");
  if (mode == DerivativeMode::Analytic && sys.analytic.conserved_jacobian) return sys.analytic.conserved_jacobian(u);
  return fd::jacobian(sys.conserved, u);
}

Mat source_jacobian(const SystemSpec& sys, const Vec& u, DerivativeMode mode) {
  if (mode == DerivativeMode::Analytic && sys.analytic.source_jacobian) return sys.analytic.source_jacobian(u);
  return fd::jacobian(sys.source, u);
}

Vec entropy_gradient(const SystemSpec& sys, const Vec& u, DerivativeMode mode) {
  if (!sys.entropy) throw ConfigError("system has no entropy");
  if (mode == DerivativeMode::Analytic && sys.analytic.entropy_gradient) return sys.analytic.entropy_gradient(u);
  return fd::gradient(sys.entropy, u);
}

Vec entropy_flux_gradient(const SystemSpec& sys, const Vec& u, int k, DerivativeMode mode) {
  if (!sys.entropy_flux) throw ConfigError("system has no entropy flux");
  if (mode == DerivativeMode::Analytic && sys.analytic.entropy_flux_gradient)
    return sys.analytic.entropy_flux_gradient(u, k);
  return fd::gradient([&](const Vec& x) { return sys.entropy_flux(x, k); }, u);
}

Mat entropy_hessian(const SystemSpec& sys, const Vec& u) {
  if (!sys.entropy) throw ConfigError("system has no entropy");
  if (sys.analytic.entropy_gradient) {
    Mat h = fd::jacobian(sys.analytic.entropy_gradient, u);
    return 0.5 * (h + h.transpose());
  }
  return fd::hessian(sys.entropy, u);
}

bool has_analytic(const SystemSpec& sys) {
  const auto& a = sys.analytic;
  return a.source_jacobian || a.entropy_gradient || a.entropy_flux_gradient || a.conserved_jacobian ||
         a.first_eigenvalue_gradient;
}

SystemSpec normalize_equilibrium(const SystemSpec& sys) {
  validate(sys);
  const Vec ustar = sys.equilibrium;
  const Vec q0 = sys.source(ustar);
  if (q0.cwiseAbs().maxCoeff() > 1e-10) {
    std::ostringstream os;
    os << "equilibrium is not a zero of Q (|Q(u*)|_max = " << q0.cwiseAbs().maxCoeff() << ")";
    throw ConfigError(os.str());
  }

  Mat m_inv;
  Vec g0;
  if (sys.conserved) {
    const Mat m = conserved_jacobian(sys, ustar, DerivativeMode::Analytic);
    Eigen::JacobiSVD<Mat> svd(m);
    const auto sv = svd.singularValues();
    if (sv(sv.size() - 1) < 1e-12 * std::max(1.0, sv(0)))
      throw DegeneracyError("grad G(u*) is singular; cannot normalize conserved variables");
    m_inv = m.inverse();
    g0 = sys.conserved(ustar);
    const bool identity = (m - Mat::Identity(sys.n, sys.n)).cwiseAbs().maxCoeff() < 1e-12 &&
                          g0.cwiseAbs().maxCoeff() < 1e-12;
    if (is_zero(ustar) && identity) {
      SystemSpec out = sys;
      out.normalized = true;
      if (out.transform.size() == 0) out.transform = Mat::Identity(sys.n, sys.n);
      return out;
    }
  } else if (is_zero(ustar)) {
    SystemSpec out = sys;
    out.normalized = true;
    if (out.transform.size() == 0) out.transform = Mat::Identity(sys.n, sys.n);
    return out;
  }

  SystemSpec out = sys;
  out.normalized = true;
  out.equilibrium = Vec::Zero(sys.n);
  out.transform = sys.transform.size() ? sys.transform : Mat::Identity(sys.n, sys.n);
  const auto base = std::make_shared<const SystemSpec>(sys);
  auto counter = out.out_of_domain;
  const double radius = sys.domain_radius;
  auto flag = [counter, radius](const Vec& u) {
    if (u.norm() > radius) ++*counter;
  };

  out.flux_jacobian = [base, ustar, flag](const Vec& u, int k) {
    flag(u);
    return base->flux_jacobian(ustar + u, k);
  };
  out.source = [base, ustar, flag](const Vec& u) {
    flag(u);
    return base->source(ustar + u);
  };
  if (sys.conserved)
    out.conserved = [base, ustar, m_inv, g0](const Vec& u) -> Vec { return m_inv * (base->conserved(ustar + u) - g0); };
  if (sys.entropy) out.entropy = [base, ustar](const Vec& u) { return base->entropy(ustar + u); };
  if (sys.entropy_flux)
    out.entropy_flux = [base, ustar](const Vec& u, int k) { return base->entropy_flux(ustar + u, k); };
  if (sys.eigen_provider)
    out.eigen_provider = [base, ustar](const Vec& u, const Vec& w) {
      EigenPacket p = base->eigen_provider(ustar + u, w);
      p.state = u;
      return p;
    };
  if (sys.first_right) out.first_right = [base, ustar](const Vec& u) { return base->first_right(ustar + u); };

  const auto& a = sys.analytic;
  AnalyticDerivatives b;
  if (a.source_jacobian) b.source_jacobian = [base, ustar](const Vec& u) { return base->analytic.source_jacobian(ustar + u); };
  if (a.entropy_gradient)
    b.entropy_gradient = [base, ustar](const Vec& u) { return base->analytic.entropy_gradient(ustar + u); };
  if (a.entropy_flux_gradient)
    b.entropy_flux_gradient = [base, ustar](const Vec& u, int k) {
      return base->analytic.entropy_flux_gradient(ustar + u, k);
    };
  if (a.conserved_jacobian && sys.conserved)
    b.conserved_jacobian = [base, ustar, m_inv](const Vec& u) -> Mat {
      return m_inv * base->analytic.conserved_jacobian(ustar + u);
    };
  if (a.first_eigenvalue_gradient)
    b.first_eigenvalue_gradient = [base, ustar](const Vec& u, const Vec& w) {
      return base->analytic.first_eigenvalue_gradient(ustar + u, w);
    };
  out.analytic = b;
  return out;
}

SystemSpec apply_linear_transform(const SystemSpec& sys, const Mat& T) {
  if (T.rows() != sys.n || T.cols() != sys.n) throw DimensionError("transform has wrong shape");
  Eigen::FullPivLU<Mat> lu(T);
  if (!lu.isInvertible()) throw DegeneracyError("linear change of variables is singular");
  const Mat Ti = lu.inverse();
  const auto base = std::make_shared<const SystemSpec>(sys);

  SystemSpec out = sys;
  out.transform = (sys.transform.size() ? sys.transform : Mat::Identity(sys.n, sys.n)) * T;
  out.equilibrium = Ti * sys.equilibrium;
  out.flux_jacobian = [base, T, Ti](const Vec& u, int k) -> Mat { return Ti * base->flux_jacobian(T * u, k) * T; };
  out.source = [base, T, Ti](const Vec& u) -> Vec { return Ti * base->source(T * u); };
  if (sys.conserved) out.conserved = [base, T, Ti](const Vec& u) -> Vec { return Ti * base->conserved(T * u); };
  if (sys.entropy) out.entropy = [base, T](const Vec& u) { return base->entropy(T * u); };
  if (sys.entropy_flux) out.entropy_flux = [base, T](const Vec& u, int k) { return base->entropy_flux(T * u, k); };
  if (sys.eigen_provider)
    out.eigen_provider = [base, T, Ti](const Vec& u, const Vec& w) {
      EigenPacket p = base->eigen_provider(T * u, w);
      p.right = Ti * p.right;
      p.left = p.left * T;
      p.state = u;
      return p;
    };
  if (sys.first_right) out.first_right = [base, T, Ti](const Vec& u) -> Vec { return Ti * base->first_right(T * u); };

  const auto& a = sys.analytic;
  AnalyticDerivatives b;
  if (a.source_jacobian)
    b.source_jacobian = [base, T, Ti](const Vec& u) -> Mat { return Ti * base->analytic.source_jacobian(T * u) * T; };
  if (a.entropy_gradient)
    b.entropy_gradient = [base, T](const Vec& u) -> Vec { return T.transpose() * base->analytic.entropy_gradient(T * u); };
  if (a.entropy_flux_gradient)
    b.entropy_flux_gradient = [base, T](const Vec& u, int k) -> Vec {
      return T.transpose() * base->analytic.entropy_flux_gradient(T * u, k);
    };
  if (a.conserved_jacobian && sys.conserved)
    b.conserved_jacobian = [base, T, Ti](const Vec& u) -> Mat {
      return Ti * base->analytic.conserved_jacobian(T * u) * T;
    };
  if (a.first_eigenvalue_gradient)
    b.first_eigenvalue_gradient = [base, T](const Vec& u, const Vec& w) -> Vec {
      return T.transpose() * base->analytic.first_eigenvalue_gradient(T * u, w);
    };
  out.analytic = b;
  return out;
}

}  // namespace pdhyp
