#include "spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace dnc {

namespace {

Mat block_diag(const std::vector<Mat>& blocks) {
  const int n = static_cast<int>(blocks.size());
  const int d = static_cast<int>(blocks[0].rows());
  Mat out = Mat::Zero(n * d, n * d);
  for (int i = 0; i < n; ++i) out.block(i * d, i * d, d, d) = blocks[i];
  return out;
}

Mat checked_inverse(const Mat& h_star) {
  const SymEig e = jacobi_eig(h_star);
  const double big = e.values.cwiseAbs().maxCoeff();
  const double small = e.values.cwiseAbs().minCoeff();
  if (!(big > 0.0) || small <= 1e-14 * big) fail(ErrorCode::numerical, "mean Hessian at the optimum is singular");
  return e.vectors * e.values.cwiseInverse().asDiagonal() * e.vectors.transpose();
}

void check_inputs(const Topology& w, const std::vector<Mat>& hessians, const Mat& h_star) {
  require(static_cast<int>(hessians.size()) == w.node_count, "need one local Hessian per node");
  for (const auto& h : hessians)
    require(h.rows() == h_star.rows() && h.cols() == h_star.cols(), "local Hessians must match the mean Hessian shape");
}

}  // namespace

GammaModel build_gamma(const Topology& w, const std::vector<Mat>& hessians, const Mat& h_star) {
  check_inputs(w, hessians, h_star);
  const int n = w.node_count;
  const int d = static_cast<int>(h_star.rows());
  const Mat hinv = kron(Mat::Identity(n, n), checked_inverse(h_star));
  const Mat wb = kron(w.weights, Mat::Identity(d, d));
  const Mat hb = block_diag(hessians);
  const Mat eye = Mat::Identity(n * d, n * d);
  GammaModel g;
  g.nodes = n;
  g.dim = d;
  g.base = Mat::Zero(2 * n * d, 2 * n * d);
  g.slope = Mat::Zero(2 * n * d, 2 * n * d);
  g.base.topLeftCorner(n * d, n * d) = wb;
  g.base.bottomLeftCorner(n * d, n * d) = wb * hb * (wb - eye);
  g.base.bottomRightCorner(n * d, n * d) = wb;
  g.slope.topRightCorner(n * d, n * d) = -hinv;
  g.slope.bottomRightCorner(n * d, n * d) = -wb * hb * hinv;
  return g;
}

DeflatedSpectrum deflated_spectrum(const Mat& m, int dim) {
  const CVec ev = general_eigenvalues(m);
  const int n = static_cast<int>(ev.size());
  require(dim >= 0 && dim < n, "deflated_spectrum: cannot remove that many eigenvalues");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return std::abs(ev(a) - 1.0) < std::abs(ev(b) - 1.0); });
  DeflatedSpectrum out;
  out.kept.resize(n - dim);
  for (int k = dim; k < n; ++k) {
    out.kept(k - dim) = ev(idx[k]);
    out.radius = std::max(out.radius, std::abs(ev(idx[k])));
  }
  const double removed = dim > 0 ? std::abs(ev(idx[dim - 1]) - 1.0) : 0.0;
  out.gap = std::abs(ev(idx[dim]) - 1.0) - removed;
  out.separated = out.gap >= kDeflationGap;
  return out;
}

std::vector<double> alpha_grid(double hi, int points) {
  require(hi > 0.0 && hi < 1.0 && points >= 2, "alpha_grid: need 0 < hi < 1 and at least two points");
  std::vector<double> g;
  for (int i = 1; i <= points; ++i) g.push_back(hi * i / points);
  return g;
}

AlphaScan scan_alpha_opt(const std::function<Mat(double)>& builder, int dim, const std::vector<double>& grid) {
  require(!grid.empty(), "scan_alpha_opt: empty grid");
  AlphaScan out;
  auto rate = [&](double a) {
    const DeflatedSpectrum d = deflated_spectrum(builder(a), dim);
    if (a > 0.0 && !d.separated)
      fail(ErrorCode::numerical, "scan_alpha_opt: stationary cluster not separated at alpha = " + std::to_string(a) +
                                     " (gap " + std::to_string(d.gap) + ")");
    return d.radius;
  };
  for (double a : grid) {
    require(a >= 0.0 && a < 1.0, "scan_alpha_opt: grid must lie in [0, 1)");
    out.alphas.push_back(a);
    out.radii.push_back(rate(a));
  }
  const auto j = static_cast<std::size_t>(std::min_element(out.radii.begin(), out.radii.end()) - out.radii.begin());
  double lo = grid[j > 0 ? j - 1 : j];
  double hi = grid[j + 1 < grid.size() ? j + 1 : j];
  out.alpha_opt = grid[j];
  out.rate_opt = out.radii[j];
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
  double f1 = rate(m1), f2 = rate(m2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      hi = m2;
      m2 = m1;
      f2 = f1;
      m1 = hi - gr * (hi - lo);
      f1 = rate(m1);
    } else {
      lo = m1;
      m1 = m2;
      f1 = f2;
      m2 = lo + gr * (hi - lo);
      f2 = rate(m2);
    }
  }
  const double a = 0.5 * (lo + hi);
  const double r = rate(a);
  if (r <= out.rate_opt) {
    out.alpha_opt = a;
    out.rate_opt = r;
  }
  return out;
}

std::pair<cplx, cplx> perturbed_roots(cplx mu0, cplx s, double alpha) {
  const cplx t = alpha * s;
  const cplx b = -mu0 * (2.0 - t);
  const cplx c = mu0 * (mu0 - t);
  const cplx sq = std::sqrt(b * b - 4.0 * c);
  // Pick the sign that avoids cancellation in b + sq.
  const cplx q = -0.5 * ((std::real(std::conj(b) * sq) >= 0.0) ? b + sq : b - sq);
  if (q == cplx(0.0, 0.0)) return {cplx(0.0, 0.0), cplx(0.0, 0.0)};
  cplx r1 = q, r2 = c / q;
  if (std::abs(r2) > std::abs(r1)) std::swap(r1, r2);
  return {r1, r2};
}

CMat rmatrix(const std::vector<Mat>& hessians, const Mat& h_star, const CVec& u, const CVec& v) {
  const int n = static_cast<int>(hessians.size());
  require(u.size() == n && v.size() == n, "rmatrix: eigenvector length must match the node count");
  const cplx vu = (v.transpose() * u)(0);
  if (std::abs(vu) < 1e-12) fail(ErrorCode::numerical, "rmatrix: left and right eigenvectors are nearly orthogonal");
  const Mat hinv = checked_inverse(h_star);
  CMat r = CMat::Zero(h_star.rows(), h_star.cols());
  for (int i = 0; i < n; ++i) r += (v(i) * u(i) / vu) * (hessians[i] * hinv).cast<cplx>();
  return r;
}

std::vector<std::pair<cplx, cplx>> root_modes(const SpectralParams& sp, const std::vector<Mat>& hessians,
                                              const Mat& h_star) {
  const CMat r = rmatrix(hessians, h_star, sp.u, sp.v);
  Eigen::ComplexEigenSolver<CMat> es(r, false);
  if (es.info() != Eigen::Success) fail(ErrorCode::numerical, "root_modes: eigenvalues of R did not converge");
  std::vector<std::pair<cplx, cplx>> out;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) out.emplace_back(sp.lambda2, es.eigenvalues()(k));
  return out;
}

RootCheck verify_root_prediction(const GammaModel& g, const std::vector<std::pair<cplx, cplx>>& modes,
                                 const std::vector<double>& alphas) {
  RootCheck out;
  for (double a : alphas) {
    const CVec ev = general_eigenvalues(g.at(a));
    double dev = 0.0;
    for (const auto& [mu0, s] : modes) {
      const auto roots = perturbed_roots(mu0, s, a);
      for (cplx p : {roots.first, roots.second}) {
        double best = INFINITY, second = INFINITY;
        cplx best_v, second_v;
        for (Eigen::Index k = 0; k < ev.size(); ++k) {
          const double dk = std::abs(ev(k) - p);
          if (dk < best) {
            second = best;
            second_v = best_v;
            best = dk;
            best_v = ev(k);
          } else if (dk < second) {
            second = dk;
            second_v = ev(k);
          }
        }
        if (std::isfinite(second) && second - best <= 1e-14 * std::max(1.0, best) && std::abs(best_v - second_v) > 1e-12)
          out.ambiguous = true;
        dev = std::max(dev, best);
      }
    }
    out.alphas.push_back(a);
    out.deviations.push_back(dev);
  }
  return out;
}

cplx geig_perturbation(const Mat& a_tilde, const Mat& b, const CVec& x, const CVec& y) {
  const cplx den = (y.transpose() * (b.cast<cplx>() * x))(0);
  if (std::abs(den) < 1e-12) fail(ErrorCode::numerical, "geig_perturbation: y^T B x is nearly zero");
  return (y.transpose() * (a_tilde.cast<cplx>() * x))(0) / den;
}

LocalRateModel build_local_rate_model(const Topology& w, const std::vector<Mat>& hessians, const Mat& h_star,
                                      double alpha) {
  check_inputs(w, hessians, h_star);
  const int n = w.node_count;
  const int d = static_cast<int>(h_star.rows());
  const int m = n * d;
  const Mat hs_inv = checked_inverse(h_star);
  const Mat ed = Mat::Identity(d, d);
  const Mat wb = kron(w.weights, ed);
  const Mat hb = block_diag(hessians);
  const Mat hinv = kron(Mat::Identity(n, n), hs_inv);
  const Mat ones = kron(Mat::Ones(n, 1), ed);       // m x d
  const Mat avg = ones.transpose() / n;              // d x m
  const Mat proj = Mat::Identity(m, m) - ones * avg;  // removes the network mean
  const Mat wt = proj * wb;
  const Mat mix_h = proj * wb * hb;

  LocalRateModel out;
  const int sz = d + 2 * m;
  out.theta = Mat::Zero(sz, sz);
  out.theta.topLeftCorner(d, d) = ed;
  out.theta.block(d, d, m, m) = wt;
  out.theta.block(d + m, d, m, m) = mix_h * (wb - Mat::Identity(m, m));
  out.theta.block(d + m, d + m, m, m) = wt;

  // Gradient mean expressed through the conserved quantity: H_star xbar + avg H x_dis.
  const Mat g_from_x = hs_inv * avg * hb;  // d x m
  Mat up = Mat::Zero(sz, sz);
  up.topLeftCorner(d, d) = ed;
  up.block(0, d, d, m) = g_from_x;
  up.block(d, d + m, m, m) = proj * hinv;
  up.block(d + m, 0, m, d) = mix_h * ones;
  up.block(d + m, d, m, m) = mix_h * ones * g_from_x;
  up.block(d + m, d + m, m, m) = mix_h * hinv;
  out.upsilon = alpha * up;

  const CVec ev = general_eigenvalues(out.matrix());
  out.radius = ev.cwiseAbs().maxCoeff();
  return out;
}

}  // namespace dnc
