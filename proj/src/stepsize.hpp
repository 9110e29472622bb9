#pragma once

#include <utility>

#include "dnewton.hpp"
#include "netgraph.hpp"
#include "objectives.hpp"

namespace dnc {

// Roots moving up/down from lambda2 for the product alpha*s:
// mu = lambda2/2 (2 - t +- sqrt(t^2 + 4t(1/lambda2 - 1))), t = alpha*s.
std::pair<cplx, cplx> criterion_roots(cplx lambda2, double s, double alpha);

// max(|mu_+|, |mu_-|) - (1 - alpha). Negative below the design step, positive above.
double criterion_residual(cplx lambda2, double s, double alpha);

inline constexpr double kAlphaTol = 1e-12;

double offline_alpha(cplx lambda2);
double adaptive_alpha(cplx lambda2, double s);

// Per-node estimates of the weighted Hessian ratio matrix. Inputs are
// scaled by the node count so the network mean tracks the weighted sum
// itself rather than its average.
struct RTracker {
  std::vector<Mat> r;
  std::vector<Mat> last_input;
  Vec weights;
};

RTracker init_rtracker(const SpectralParams& sp, int nodes, int dim);
// I * w_i * hess f^i(x) * B(H)^{-1}
Mat r_input(const LocalObjective& f, const Vec& x, const Mat& h, double weight, int nodes, double beta);
// One estimate-form round driven by the inputs evaluated at `next` (x_{k+1}, H_{k+1}).
RTracker r_step(const Topology& w, const ObjectiveSet& objs, const States& next, const RTracker& tracker, double beta);

// (sigma_max(R) + sigma_min(R)) / 2
double s_estimate(const Mat& r);

// Similarity transform used to weight disagreement norms: W = T^{-1} Lambda T.
struct NetworkTransform {
  CMat t;
  CMat t_inv;
  double tau = 1.0;
  double sigma_c = 1.0;
  bool unitary = false;
};
NetworkTransform network_transform(const Topology& w);

struct StabilityConstants {
  ConstantsForm form = ConstantsForm::rigorous;
  double beta = 0.0, gamma = 0.0, delta = 0.0;
  double lambda2 = 0.0;
  double tau = 1.0, sigma_c = 1.0, eta = 0.0, upsilon = 0.0;
  Eigen::Vector3d mu = Eigen::Vector3d::Zero(), nu = Eigen::Vector3d::Zero(), psi = Eigen::Vector3d::Zero();
  Eigen::Matrix3d omega = Eigen::Matrix3d::Zero(), phi = Eigen::Matrix3d::Zero(), psi_m = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d p = Eigen::Matrix3d::Identity();
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0, e = 0.0, h = 0.0;

  double f(double alpha) const;
  double g(double alpha) const;
  double lyapunov_residual() const;

  // Cached pieces so f and g are cheap inside the scheduler.
  Eigen::Matrix3d f0 = Eigen::Matrix3d::Zero(), f1 = Eigen::Matrix3d::Zero();
  Eigen::Vector3d w0 = Eigen::Vector3d::Zero(), w1 = Eigen::Vector3d::Zero();
  Eigen::Matrix3d p_inv = Eigen::Matrix3d::Identity();
};

StabilityConstants assemble_constants(double lambda2, double tau, double sigma_c, double eta, double upsilon, double beta,
                                      double gamma, double delta, ConstantsForm form);
StabilityConstants compute_constants(const Topology& w, double beta, double gamma, double delta,
                                     ConstantsForm form = ConstantsForm::rigorous);

// Solves Phi^T P Phi = P - I through the vectorized 9x9 system.
Eigen::Matrix3d solve_lyapunov(const Eigen::Matrix3d& phi);

struct FResult {
  Eigen::Vector2d y;
  bool clamped = false;
};
FResult F_map(const StabilityConstants& k, const Eigen::Vector2d& chi, double alpha);

// argmin |F(chi, alpha)| over alpha in [0, 1] subject to F(chi, alpha) <= chi.
double schedule_alpha(const StabilityConstants& k, const Eigen::Vector2d& chi);

// [ |gbar(xbar)|, |theta|_P ] for the current states.
Eigen::Vector2d certified_pair(const NetworkTransform& tr, const StabilityConstants& k, const ObjectiveSet& objs,
                               const States& s);
Eigen::Vector3d disagreement(const NetworkTransform& tr, const States& s);

Trace global_run(const Topology& w, const ObjectiveSet& objs, double beta, double gamma, double delta,
                 const std::vector<Vec>& x_init, int rounds, const Vec& x_star,
                 ConstantsForm form = ConstantsForm::rigorous, const RunOptions& opts = {});

}  // namespace dnc
