#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "netgraph.hpp"

namespace dnc {

// Linearized joint dynamics of the (x, g) stacks near the optimum:
// matrix(alpha) = base + alpha * slope.
struct GammaModel {
  Mat base;
  Mat slope;
  int nodes = 0;
  int dim = 0;
  Mat at(double alpha) const { return base + alpha * slope; }
};

// hessians: local Hessians at the optimum; h_star: their mean.
GammaModel build_gamma(const Topology& w, const std::vector<Mat>& hessians, const Mat& h_star);

// Spectrum with the `dim` eigenvalues nearest 1 removed.
struct DeflatedSpectrum {
  double radius = 0.0;
  // Distance to 1 of the nearest kept eigenvalue minus that of the farthest removed one.
  double gap = 0.0;
  bool separated = false;
  CVec kept;
};
inline constexpr double kDeflationGap = 1e-6;
DeflatedSpectrum deflated_spectrum(const Mat& m, int dim);

struct AlphaScan {
  double alpha_opt = 0.0;
  double rate_opt = 0.0;
  std::vector<double> alphas;
  std::vector<double> radii;
};
std::vector<double> alpha_grid(double hi = 0.02, int points = 200);
// Grid scan then golden-section refinement of the deflated radius. Throws
// ErrorCode::numerical when a grid point's deflation is ambiguous.
AlphaScan scan_alpha_opt(const std::function<Mat(double)>& builder, int dim, const std::vector<double>& grid);

// Roots of mu^2 - mu0 (2 - alpha s) mu + mu0 (mu0 - alpha s), larger modulus first.
std::pair<cplx, cplx> perturbed_roots(cplx mu0, cplx s, double alpha);

// (1 / v^T u) sum_i v_i u_i H^i H_star^{-1}
CMat rmatrix(const std::vector<Mat>& hessians, const Mat& h_star, const CVec& u, const CVec& v);

// (mu0, s) pairs for the eigenvalue described by `sp`: one per eigenvalue s of R.
std::vector<std::pair<cplx, cplx>> root_modes(const SpectralParams& sp, const std::vector<Mat>& hessians,
                                              const Mat& h_star);

struct RootCheck {
  std::vector<double> alphas;
  std::vector<double> deviations;
  bool ambiguous = false;
};
// Matches each predicted root to the nearest eigenvalue of the model.
RootCheck verify_root_prediction(const GammaModel& g, const std::vector<std::pair<cplx, cplx>>& modes,
                                 const std::vector<double>& alphas);

// First-order change of a generalized eigenvalue of (A, B) under A -> A + a_tilde:
// y^T a_tilde x / y^T B x.
cplx geig_perturbation(const Mat& a_tilde, const Mat& b, const CVec& x, const CVec& y);

// Error dynamics in (mean error, x disagreement, g disagreement)
// coordinates, with the conserved gradient mean eliminated.
struct LocalRateModel {
  Mat theta;
  Mat upsilon;
  double radius = 0.0;
  Mat matrix() const { return theta - upsilon; }
};
LocalRateModel build_local_rate_model(const Topology& w, const std::vector<Mat>& hessians, const Mat& h_star,
                                      double alpha);

}  // namespace dnc
