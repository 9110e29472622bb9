#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "errors.hpp"

namespace dnc {

SymEig jacobi_eig(const Mat& a0, int max_sweeps) {
  require(a0.rows() == a0.cols(), "jacobi_eig: matrix must be square");
  const Eigen::Index n = a0.rows();
  Mat a = 0.5 * (a0 + a0.transpose());
  Mat v = Mat::Identity(n, n);
  const double scale = std::max(a.squaredNorm(), 1e-300);

  bool converged = n <= 1;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-32 * scale) {
      converged = true;
      break;
    }
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off > 1e-24 * scale) fail(ErrorCode::numerical, "jacobi_eig: no convergence within sweep budget");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  SymEig out{Vec(n), Mat(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

double spectral_norm(const CMat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(a);
  return svd.singularValues()(0);
}

Eigen::Vector3d sym3_eigenvalues(const Eigen::Matrix3d& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  Eigen::Vector3d out;
  if (p1 == 0.0) {
    out << a(0, 0), a(1, 1), a(2, 2);
    std::sort(out.data(), out.data() + 3);
    return out;
  }
  const double q = a.trace() / 3.0;
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const Eigen::Matrix3d b = (a - q * Eigen::Matrix3d::Identity()) / p;
  const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double hi = q + 2.0 * p * std::cos(phi);
  const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  out << lo, 3.0 * q - hi - lo, hi;
  return out;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CVec general_eigenvalues(const Mat& a) {
  require(a.rows() == a.cols(), "general_eigenvalues: matrix must be square");
  Eigen::EigenSolver<Mat> es(a, false);
  if (es.info() != Eigen::Success) fail(ErrorCode::numerical, "general_eigenvalues: QR iteration did not converge");
  return es.eigenvalues();
}

double max_asymmetry(const Mat& a) {
  if (a.rows() != a.cols()) return INFINITY;
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace dnc
