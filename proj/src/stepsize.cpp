#include "stepsize.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "errors.hpp"

namespace dnc {

std::pair<cplx, cplx> criterion_roots(cplx lambda2, double s, double alpha) {
  const double t = alpha * s;
  const cplx q = std::sqrt(cplx(t * t) + 4.0 * t * (1.0 / lambda2 - 1.0));
  cplx up = lambda2 / 2.0 * (2.0 - t + q);
  cplx down = lambda2 / 2.0 * (2.0 - t - q);
  if (std::abs(down) > std::abs(up)) std::swap(up, down);
  return {up, down};
}

double criterion_residual(cplx lambda2, double s, double alpha) {
  if (lambda2 == cplx(0.0, 0.0)) return -(1.0 - alpha);
  const auto [up, down] = criterion_roots(lambda2, s, alpha);
  return std::max(std::abs(up), std::abs(down)) - (1.0 - alpha);
}

double adaptive_alpha(cplx lambda2, double s) {
  require(std::abs(lambda2) < 1.0, "adaptive_alpha: |lambda2| must be below 1");
  require(s > 0.0 && std::isfinite(s), "adaptive_alpha: s must be positive");
  if (lambda2 == cplx(0.0, 0.0)) return 1.0;
  if (criterion_residual(lambda2, s, 1.0) <= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  // r(0) = |lambda2| - 1 < 0.
  while (hi - lo > kAlphaTol * 1e-3) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (criterion_residual(lambda2, s, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double a = 0.5 * (lo + hi);
  if (std::abs(criterion_residual(lambda2, s, a)) > kAlphaTol)
    fail(ErrorCode::numerical, "step size criterion has no root on (0, 1)");
  return a;
}

double offline_alpha(cplx lambda2) {
  require(std::abs(lambda2) < 1.0, "offline_alpha: |lambda2| must be below 1");
  if (lambda2 == cplx(0.0, 0.0)) return 1.0;
  if (lambda2.imag() == 0.0 && lambda2.real() > 0.0) return 1.0 - std::sqrt(lambda2.real());
  return adaptive_alpha(lambda2, 1.0);
}

RTracker init_rtracker(const SpectralParams& sp, int nodes, int dim) {
  require(sp.weights.size() == nodes, "init_rtracker: spectral parameters do not match the node count");
  RTracker t;
  t.r.assign(static_cast<std::size_t>(nodes), Mat::Identity(dim, dim));
  t.last_input = t.r;
  t.weights = sp.weights;
  return t;
}

Mat r_input(const LocalObjective& f, const Vec& x, const Mat& h, double weight, int nodes, double beta) {
  const Mat hs = 0.5 * (h + h.transpose());
  return nodes * weight * f.hessian(x) * floor_hessian_factors(hs, beta).inverse();
}

RTracker r_step(const Topology& w, const ObjectiveSet& objs, const States& next, const RTracker& tracker, double beta) {
  const int n = objs.size();
  require(tracker.weights.size() == n && static_cast<int>(tracker.r.size()) == n,
          "r_step: tracker is missing spectral parameters");
  std::vector<Mat> in(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) in[i] = r_input(objs[i], next.x[i], next.h[i], tracker.weights(i), n, beta);
  RTracker out;
  out.r = dynamic_step_estimate(w, tracker.r, in, tracker.last_input);
  out.last_input = std::move(in);
  out.weights = tracker.weights;
  return out;
}

double s_estimate(const Mat& r) {
  const Eigen::JacobiSVD<Mat> svd(r);
  const Vec& sv = svd.singularValues();
  const double hi = sv(0), lo = sv(sv.size() - 1);
  if (!(hi > 0.0) || lo <= hi * 1e-12) fail(ErrorCode::numerical, "s_estimate: ratio matrix is near singular");
  return 0.5 * (hi + lo);
}

NetworkTransform network_transform(const Topology& w) {
  const Mat& m = w.weights;
  const int n = w.node_count;
  NetworkTransform out;
  const double normal_gap = (m * m.transpose() - m.transpose() * m).cwiseAbs().maxCoeff();
  if (normal_gap <= 1e-12) {
    // Normal W: unitary triangularization is diagonal.
    Eigen::ComplexSchur<CMat> schur(m.cast<cplx>());
    if (schur.info() != Eigen::Success) fail(ErrorCode::numerical, "network_transform: Schur decomposition failed");
    out.t_inv = schur.matrixU();
    out.t = out.t_inv.adjoint();
    out.unitary = true;
  } else {
    Eigen::EigenSolver<Mat> es(m);
    if (es.info() != Eigen::Success) fail(ErrorCode::numerical, "network_transform: eigendecomposition failed");
    out.t_inv = es.eigenvectors();
    Eigen::JacobiSVD<CMat> svd(out.t_inv);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) <= sv(0) * 1e-12)
      fail(ErrorCode::numerical, "network_transform: W is not diagonalizable (defective eigenvalue)");
    out.t = out.t_inv.inverse();
  }
  out.tau = spectral_norm(out.t);
  out.sigma_c = spectral_norm(out.t_inv);
  return out;
}

Eigen::Matrix3d solve_lyapunov(const Eigen::Matrix3d& phi) {
  const Mat pt = phi.transpose();
  const Mat sys = kron(pt, pt) - Mat::Identity(9, 9);
  Vec rhs = -Vec(Eigen::Map<const Vec>(Eigen::Matrix3d::Identity().eval().data(), 9));
  const double rho = general_eigenvalues(Mat(phi)).cwiseAbs().maxCoeff();
  if (!(rho < 1.0)) fail(ErrorCode::numerical, "solve_lyapunov: no unique solution (spectral radius of Phi is not below 1)");
  const Vec sol = Eigen::PartialPivLU<Mat>(sys).solve(rhs);
  if (!sol.allFinite()) fail(ErrorCode::numerical, "solve_lyapunov: solution is not finite");
  Eigen::Matrix3d p = Eigen::Map<const Eigen::Matrix3d>(sol.data());
  return 0.5 * (p + p.transpose());
}

namespace {

double sym3_max(const Eigen::Matrix3d& m) { return sym3_eigenvalues(0.5 * (m + m.transpose()))(2); }

}  // namespace

double StabilityConstants::f(double alpha) const {
  const Eigen::Matrix3d m = f0 + alpha * f1;
  if (form == ConstantsForm::printed) return spectral_norm(Mat(m));
  return std::max(0.0, sym3_max(m));
}

double StabilityConstants::g(double alpha) const {
  const Eigen::Vector3d w = w0 + alpha * w1;
  const double q = w.dot(p_inv * w);
  if (form == ConstantsForm::printed) return 2.0 * q;
  return 2.0 * std::sqrt(std::max(0.0, q));
}

double StabilityConstants::lyapunov_residual() const {
  return spectral_norm(Mat(phi.transpose() * p * phi - p + Eigen::Matrix3d::Identity()));
}

StabilityConstants assemble_constants(double lambda2, double tau, double sigma_c, double eta, double upsilon, double beta,
                                      double gamma, double delta, ConstantsForm form) {
  require(lambda2 >= 0.0 && lambda2 < 1.0, "compute_constants: lambda2 modulus must lie in [0, 1)");
  require(beta > 0.0 && gamma >= 0.0 && delta >= 0.0, "compute_constants: beta must be positive, gamma and delta nonnegative");
  StabilityConstants k;
  k.form = form;
  k.beta = beta;
  k.gamma = gamma;
  k.delta = delta;
  k.lambda2 = lambda2;
  k.tau = tau;
  k.sigma_c = sigma_c;
  k.eta = eta;
  k.upsilon = upsilon;
  const double b = beta, g = gamma, d = delta, t = tau, vs = sigma_c, u = upsilon;
  const bool rig = form == ConstantsForm::rigorous;

  k.mu << vs * g, vs, 0.0;
  k.nu << vs * b * d * (b * g + 1.0), rig ? vs * b * b * d : 0.0, vs * b;
  k.psi << b * t, b * g * t * u, b * d * t * u;
  const double o12 = rig ? b * d * (1.0 + b * g) : b * d;
  k.omega << b * g * d * (b * g + 2.0), o12, b * g,  //
      o12, b * b * d, b,                              //
      b * g, b, 0.0;
  k.omega *= vs * vs / 2.0;
  const double cpl = rig ? vs : 1.0;
  k.phi << lambda2, 0.0, 0.0,                //
      g * t * eta * u * cpl, lambda2, 0.0,  //
      d * t * eta * u * cpl, 0.0, lambda2;
  k.psi_m << b * g * t, b * t, 0.0,          //
      b * g * g * t * u, b * g * t * u, 0.0,  //
      b * g * d * t * u, b * d * t * u, 0.0;
  if (rig) k.psi_m *= vs;

  k.p = solve_lyapunov(k.phi);
  const SymEig pe = jacobi_eig(k.p);
  if (!(pe.values(0) > 0.0)) fail(ErrorCode::numerical, "compute_constants: Lyapunov solution is not positive definite");
  k.p_inv = k.p.inverse();
  k.p_inv = 0.5 * (k.p_inv + k.p_inv.transpose()).eval();
  const Eigen::Matrix3d p_inv_half = pe.vectors * pe.values.cwiseSqrt().cwiseInverse().asDiagonal() * pe.vectors.transpose();

  const double a2 = k.mu.dot(k.p_inv * k.mu);
  const double c2 = k.nu.dot(k.p_inv * k.nu);
  k.b = b * b * d / 2.0;
  k.h = k.psi.dot(k.p * k.psi);
  k.w0 = k.phi.transpose() * k.p * k.psi;
  k.w1 = k.psi_m.transpose() * k.p * k.psi;
  const Eigen::Matrix3d om = p_inv_half * k.omega * p_inv_half;
  if (rig) {
    k.a = std::sqrt(a2);
    k.c = std::sqrt(c2);
    k.d = std::max(0.0, sym3_max(om));
    k.e = 1.0 / pe.values(2);
    k.f0 = p_inv_half * (k.phi.transpose() * k.p * k.psi_m + k.psi_m.transpose() * k.p * k.phi) * p_inv_half;
    k.f1 = p_inv_half * (k.psi_m.transpose() * k.p * k.psi_m) * p_inv_half;
  } else {
    k.a = a2;
    k.c = c2;
    k.d = spectral_norm(Mat(om));
    k.e = 1.0 / pe.values(0);
    k.f0 = 2.0 * k.psi_m.transpose() * k.p * k.phi * k.p_inv;
    k.f1 = k.psi_m.transpose() * k.p * k.psi_m * k.p_inv;
  }
  return k;
}

StabilityConstants compute_constants(const Topology& w, double beta, double gamma, double delta, ConstantsForm form) {
  const NetworkTransform tr = network_transform(w);
  const SpectralParams sp = spectral_params(w);
  const int n = w.node_count;
  const Mat eye = Mat::Identity(n, n);
  const Mat avg = Mat::Constant(n, n, 1.0 / n);
  const double eta = spectral_norm(Mat(eye - w.weights));
  const double upsilon = spectral_norm(Mat(avg - w.weights));
  return assemble_constants(sp.lambda2_modulus, tr.tau, tr.sigma_c, eta, upsilon, beta, gamma, delta, form);
}

FResult F_map(const StabilityConstants& k, const Eigen::Vector2d& chi, double alpha) {
  require(chi(0) >= 0.0 && chi(1) >= 0.0, "F_map: chi must be nonnegative");
  const double x1 = chi(0), x2 = chi(1), al = alpha;
  FResult r;
  r.y(0) = (1.0 - al) * x1 + al * k.a * x2 + al * al * k.b * x1 * x1 + al * k.c * x1 * x2 + al * k.d * x2 * x2;
  const double rad = (1.0 - k.e + al * k.f(al)) * x2 * x2 + al * k.g(al) * x2 * x1 + al * al * k.h * x1 * x1;
  r.clamped = rad < 0.0;
  r.y(1) = std::sqrt(std::max(0.0, rad));
  return r;
}

namespace {

struct Probe {
  double alpha;
  bool feasible;
  double norm;
};

Probe probe(const StabilityConstants& k, const Eigen::Vector2d& chi, double alpha) {
  const Eigen::Vector2d y = F_map(k, chi, alpha).y;
  return {alpha, y(0) <= chi(0) && y(1) <= chi(1), y.norm()};
}

}  // namespace

double schedule_alpha(const StabilityConstants& k, const Eigen::Vector2d& chi) {
  std::vector<double> grid;
  for (int i = 0; i <= 1000; ++i) grid.push_back(i * 1e-3);
  for (int i = 0; i <= 240; ++i) grid.push_back(std::pow(10.0, -12.0 + i / 20.0));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<Probe> probes;
  probes.reserve(grid.size());
  for (double a : grid) probes.push_back(probe(k, chi, std::min(a, 1.0)));

  std::size_t best = 0;
  for (std::size_t i = 1; i < probes.size(); ++i)
    if (probes[i].feasible && probes[i].norm < probes[best].norm) best = i;
  Probe winner = probes[best];
  auto consider = [&](const Probe& p) {
    if (p.feasible && p.norm < winner.norm) winner = p;
  };

  const double lo0 = best > 0 ? probes[best - 1].alpha : probes[best].alpha;
  double hi0 = best + 1 < probes.size() ? probes[best + 1].alpha : probes[best].alpha;

  // The norm usually keeps falling up to the feasibility boundary.
  if (best + 1 < probes.size() && !probes[best + 1].feasible) {
    double in = probes[best].alpha, out = probes[best + 1].alpha;
    while (out - in > 1e-6 * std::max(in, 1e-300) && out - in > 0.0) {
      const double mid = 0.5 * (in + out);
      if (mid <= in || mid >= out) break;
      if (probe(k, chi, mid).feasible)
        in = mid;
      else
        out = mid;
    }
    consider(probe(k, chi, in));
    hi0 = in;
  }

  auto objective = [&](double a) {
    const Probe p = probe(k, chi, a);
    consider(p);
    return p.feasible ? p.norm : std::numeric_limits<double>::infinity();
  };
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = lo0, hi = hi0;
  if (hi > lo) {
    double m1 = hi - gr * (hi - lo), m2 = lo + gr * (hi - lo);
    double f1 = objective(m1), f2 = objective(m2);
    while (hi - lo > 1e-6 * std::max(0.5 * (lo + hi), 1e-300)) {
      if (f1 <= f2) {
        hi = m2;
        m2 = m1;
        f2 = f1;
        m1 = hi - gr * (hi - lo);
        f1 = objective(m1);
      } else {
        lo = m1;
        m1 = m2;
        f1 = f2;
        m2 = lo + gr * (hi - lo);
        f2 = objective(m2);
      }
      if (m1 == m2) break;
    }
  }
  return winner.alpha;
}

Eigen::Vector3d disagreement(const NetworkTransform& tr, const States& s) {
  const int n = s.size();
  const int dim = static_cast<int>(s.x[0].size());
  Mat xt(n, dim), gt(n, dim), ht(n, dim * dim);
  const Vec xm = stack_mean(s.x), gm = stack_mean(s.g);
  const Mat hm = stack_mean(s.h);
  for (int i = 0; i < n; ++i) {
    xt.row(i) = (s.x[i] - xm).transpose();
    gt.row(i) = (s.g[i] - gm).transpose();
    const Mat dh = s.h[i] - hm;
    ht.row(i) = Eigen::Map<const Vec>(dh.data(), dim * dim).transpose();
  }
  return {(tr.t * xt.cast<cplx>()).norm(), (tr.t * gt.cast<cplx>()).norm(), (tr.t * ht.cast<cplx>()).norm()};
}

Eigen::Vector2d certified_pair(const NetworkTransform& tr, const StabilityConstants& k, const ObjectiveSet& objs,
                               const States& s) {
  const Vec xm = stack_mean(s.x);
  const Aggregate agg = global_aggregate(objs, xm);
  const Eigen::Vector3d th = disagreement(tr, s);
  return {std::sqrt(static_cast<double>(objs.size())) * agg.gradient.norm(), std::sqrt(std::max(0.0, th.dot(k.p * th)))};
}

Trace global_run(const Topology& w, const ObjectiveSet& objs, double beta, double gamma, double delta,
                 const std::vector<Vec>& x_init, int rounds, const Vec& x_star, ConstantsForm form,
                 const RunOptions& opts) {
  require(rounds >= 1, "global_run: need at least one round");
  if (!(beta > 0.0) || !(gamma > 0.0) || !(delta >= 0.0))
    fail(ErrorCode::config, "global step size mode needs beta > 0, gamma > 0 and delta >= 0");
  const StabilityConstants k = compute_constants(w, beta, gamma, delta, form);
  const NetworkTransform tr = network_transform(w);

  Trace t;
  t.nodes = objs.size();
  t.rounds_requested = rounds;
  States s = init_states(objs, x_init);
  Eigen::Vector2d chi = certified_pair(tr, k, objs, s);
  const double scale = std::max(chi.norm(), std::numeric_limits<double>::min());
  Eigen::Vector2d zeta_prev = chi;
  double alpha_prev = 0.0;

  for (int r = 1; r <= rounds; ++r) {
    const Eigen::Vector2d zeta = certified_pair(tr, k, objs, s);
    for (int j = 0; j < 2; ++j)
      t.certificate_violation = std::max(t.certificate_violation, (zeta(j) - chi(j) * (1.0 + 1e-9)) / scale);
    bool clamped = false;
    if (r > 1) {
      const FResult bound = F_map(k, zeta_prev, alpha_prev);
      for (int j = 0; j < 2; ++j) t.one_step_violation = std::max(t.one_step_violation, (zeta(j) - bound.y(j)) / scale);
    }
    const double alpha = schedule_alpha(k, chi);
    s.alpha.setConstant(alpha);
    const FResult next_chi = F_map(k, chi, alpha);
    clamped = next_chi.clamped;
    t.certificate.push_back({r, chi(0), chi(1), zeta(0), zeta(1), alpha, clamped});

    StepInfo info;
    States next;
    if (r < rounds) next = step(Variant::proposed, w, objs, s, beta, &info, opts.divergence_threshold);
    record_round(t, r, s, x_star, info.floored, false);
    if (r == rounds) break;
    if (info.diverged) {
      t.diverged = true;
      t.divergence_round = r + 1;
      record_round(t, r + 1, next, x_star, info.floored, true);
      break;
    }
    chi = next_chi.y;
    zeta_prev = zeta;
    alpha_prev = alpha;
    s = std::move(next);
  }
  return t;
}

}  // namespace dnc
