#include "pdhyp/eigenstructure.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pdhyp {

double PacketResiduals::max() const { return std::max({biorthonormality, left, right}); }

Mat kernel_probe(const SystemSpec& sys) { return source_jacobian(sys, Vec::Zero(sys.n), DerivativeMode::Analytic); }

namespace {

void sign_fix(Eigen::Ref<Vec> r) {
  Eigen::Index imax = 0;
  r.cwiseAbs().maxCoeff(&imax);
  if (r(imax) < 0) r = -r;
}

}  // namespace

EigenPacket numeric_decompose(const SystemSpec& sys, const Vec& u, const Vec& omega, const Mat& probe,
                              const DecomposeOptions& opt) {
  const int n = sys.n;
  const Mat A = direction_matrix(sys, u, omega);
  Eigen::EigenSolver<Mat> es(A);
  if (es.info() != Eigen::Success) throw HyperbolicityError("eigenvalue iteration did not converge");
  const auto ev = es.eigenvalues();
  const double scale = 1.0 + ev.cwiseAbs().maxCoeff();
  for (int i = 0; i < n; ++i) {
    if (std::abs(ev(i).imag()) > opt.hyperbolicity_tol * scale) {
      std::ostringstream os;
      os << "A(u, omega) is not hyperbolic: eigenvalue pair " << ev(i).real() << " +/- " << std::abs(ev(i).imag())
         << "i";
      throw HyperbolicityError(os.str());
    }
  }
  Mat R = es.eigenvectors().real();
  Vec lam = ev.real();
  for (int j = 0; j < n; ++j) R.col(j).normalize();

  {
    Eigen::JacobiSVD<Mat> svd(R);
    const auto sv = svd.singularValues();
    const double cond = sv(0) / std::max(sv(n - 1), 1e-300);
    if (!(cond < opt.cond_limit)) {
      double best = 1e300;
      int a = 0, b = 1;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (std::abs(lam(i) - lam(j)) < best) best = std::abs(lam(i) - lam(j)), a = i, b = j;
      std::ostringstream os;
      os << "eigenvector matrix is near-defective (cond " << cond << "); cluster {" << lam(a) << ", " << lam(b) << "}";
      throw DegeneracyError(os.str());
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return lam(a) < lam(b); });

  // clusters of (numerically) equal eigenvalues
  std::vector<std::vector<int>> clusters;
  for (int idx : order) {
    if (!clusters.empty() && std::abs(lam(clusters.back().back()) - lam(idx)) <= opt.cluster_tol * scale)
      clusters.back().push_back(idx);
    else
      clusters.push_back({idx});
  }

  int best_cluster = -1;
  double best_score = 1e300;
  std::vector<double> kernel_hits;
  Eigen::MatrixXd best_basis;
  for (int c = 0; c < static_cast<int>(clusters.size()); ++c) {
    const auto& cl = clusters[c];
    const int m = static_cast<int>(cl.size());
    Eigen::MatrixXd V(n, m);
    for (int j = 0; j < m; ++j) V.col(j) = R.col(cl[j]);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(V);
    Eigen::MatrixXd Qv = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(probe * Qv, Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    for (int j = 0; j < m; ++j) kernel_hits.push_back(sv(j));
    // singular values come in decreasing order; put the null direction first
    Eigen::MatrixXd basis = Qv * svd.matrixV();
    Eigen::MatrixXd reordered(n, m);
    reordered.col(0) = basis.col(m - 1);
    for (int j = 0; j + 1 < m; ++j) reordered.col(j + 1) = basis.col(j);
    if (sv(m - 1) < best_score) {
      best_score = sv(m - 1);
      best_cluster = c;
      best_basis = reordered;
    }
  }
  const long null_count =
      std::count_if(kernel_hits.begin(), kernel_hits.end(), [](double s) { return s < 1e-8; });

  EigenPacket p;
  p.state = u;
  p.direction = omega;
  p.lambda.resize(n);
  p.right.resize(n, n);
  const auto& cl = clusters[best_cluster];
  int col = 0;
  p.lambda(col) = lam(cl[0]);
  p.right.col(col++) = best_basis.col(0);
  for (int c = 0; c < static_cast<int>(clusters.size()); ++c) {
    if (c == best_cluster) {
      for (size_t j = 1; j < cl.size(); ++j) {
        p.lambda(col) = lam(cl[0]);
        p.right.col(col++) = best_basis.col(j);
      }
    } else {
      for (int idx : clusters[c]) {
        p.lambda(col) = lam(idx);
        p.right.col(col++) = R.col(idx);
      }
    }
  }
  for (int j = 0; j < n; ++j) {
    p.right.col(j).normalize();
    sign_fix(p.right.col(j));
  }
  p.left = p.right.inverse();
  p.first_family_ambiguous = null_count > 1;
  return p;
}

EigenPacket eigen_decompose(const SystemSpec& sys, const Vec& u, const Vec& omega, const DecomposeOptions& opt) {
  if (opt.use_provider && sys.eigen_provider) {
    if (std::abs(omega.norm() - 1.0) > 1e-12) throw DomainError("direction must be a unit vector");
    return sys.eigen_provider(u, omega);
  }
  return numeric_decompose(sys, u, omega, kernel_probe(sys), opt);
}

PacketResiduals verify_packet(const EigenPacket& p, const Mat& A) {
  const int n = static_cast<int>(A.rows());
  PacketResiduals r;
  r.biorthonormality = (p.left * p.right - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
  const Mat lam = p.lambda.asDiagonal();
  r.left = (p.left * A - lam * p.left).cwiseAbs().maxCoeff();
  r.right = (A * p.right - p.right * lam).cwiseAbs().maxCoeff();
  return r;
}

Vec first_right_eigenvector(const SystemSpec& sys, const Vec& u) {
  if (sys.first_right) return sys.first_right(u);
  Vec w = Vec::Zero(sys.d);
  w(0) = 1.0;
  return eigen_decompose(sys, u, w).right.col(0);
}

}  // namespace pdhyp
