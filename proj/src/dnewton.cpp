#include "dnewton.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "stepsize.hpp"

namespace dnc {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::proposed: return "proposed";
    case Variant::alg_a: return "alg_a";
    case Variant::alg_b: return "alg_b";
    case Variant::vzcps: return "vzcps";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "proposed") return Variant::proposed;
  if (s == "alg_a" || s == "A" || s == "a") return Variant::alg_a;
  if (s == "alg_b" || s == "B" || s == "b") return Variant::alg_b;
  if (s == "vzcps") return Variant::vzcps;
  fail(ErrorCode::config, "unknown algorithm variant '" + s + "' (expected proposed, alg_a, alg_b or vzcps)");
}

bool uses_ell(Variant v) { return v == Variant::alg_b || v == Variant::vzcps; }

FlooredHessian floor_hessian_factors(const Mat& h, double beta) {
  require(beta > 0.0, "floor_hessian: beta must be positive");
  require(h.rows() == h.cols(), "floor_hessian: matrix must be square");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (max_asymmetry(h) > 1e-8 * scale) fail(ErrorCode::invalid_argument, "floor_hessian: input is not symmetric");
  const SymEig e = jacobi_eig(h);
  FlooredHessian out{e.vectors, e.values, false};
  const double lo = 1.0 / beta;
  for (Eigen::Index k = 0; k < out.values.size(); ++k)
    if (out.values(k) < lo) {
      out.values(k) = lo;
      out.floored = true;
    }
  return out;
}

Mat floor_hessian(const Mat& h, double beta) {
  const FlooredHessian f = floor_hessian_factors(h, beta);
  if (!f.floored) return h;
  Mat m = f.matrix();
  return 0.5 * (m + m.transpose());
}

States init_states(const ObjectiveSet& objs, const std::vector<Vec>& x_init, double alpha) {
  require(static_cast<int>(x_init.size()) == objs.size(), "init_states: need one initial point per node");
  States s;
  const int n = objs.size();
  s.alpha = Vec::Constant(n, alpha);
  for (int i = 0; i < n; ++i) {
    require(x_init[i].size() == objs.dim() && x_init[i].allFinite(), "init_states: initial points must be finite");
    s.x.push_back(x_init[i]);
    s.grad_at_x.push_back(objs[i].gradient(x_init[i]));
    s.hess_at_x.push_back(objs[i].hessian(x_init[i]));
    s.ell_at_x.push_back(s.hess_at_x.back() * x_init[i] - s.grad_at_x.back());
  }
  s.g = s.grad_at_x;
  s.h = s.hess_at_x;
  s.l = s.ell_at_x;
  return s;
}

States step(Variant v, const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info,
            double divergence_threshold) {
  const int n = s.size();
  require(n == w.node_count && n == objs.size(), "step: node count mismatch between states, topology and objectives");
  require(s.alpha.size() == n, "step: need one step size per node");

  std::vector<FlooredHessian> b;
  b.reserve(n);
  for (int i = 0; i < n; ++i) b.push_back(floor_hessian_factors(s.h[i], beta));

  // x-phase: reads only round-k buffers.
  const bool mix_x = v == Variant::proposed || v == Variant::alg_b;
  const std::vector<Vec> wx = mix_x ? static_step(w, s.x) : std::vector<Vec>{};
  States next;
  next.alpha = s.alpha;
  next.x.resize(n);
  bool diverged = false;
  for (int i = 0; i < n; ++i) {
    const double a = s.alpha(i);
    switch (v) {
      case Variant::proposed: next.x[i] = wx[i] - a * b[i].solve(s.g[i]); break;
      case Variant::alg_a: next.x[i] = s.x[i] - a * b[i].solve(s.g[i]); break;
      case Variant::alg_b: next.x[i] = (1.0 - a) * wx[i] + a * b[i].solve(s.l[i]); break;
      case Variant::vzcps: next.x[i] = (1.0 - a) * s.x[i] + a * b[i].solve(s.l[i]); break;
    }
    if (!next.x[i].allFinite() || next.x[i].cwiseAbs().maxCoeff() > divergence_threshold) diverged = true;
  }
  if (info) {
    info->floored.assign(n, 0);
    for (int i = 0; i < n; ++i) info->floored[i] = b[i].floored ? 1 : 0;
    info->diverged = diverged;
  }
  if (diverged) {
    // Tracker updates are meaningless past the guard; keep the old ones.
    next.g = s.g;
    next.h = s.h;
    next.l = s.l;
    next.grad_at_x = s.grad_at_x;
    next.hess_at_x = s.hess_at_x;
    next.ell_at_x = s.ell_at_x;
    return next;
  }

  // g/H/l-phase: uses x_{k+1} and x_k.
  next.grad_at_x.resize(n);
  next.hess_at_x.resize(n);
  next.ell_at_x.resize(n);
  for (int i = 0; i < n; ++i) {
    next.grad_at_x[i] = objs[i].gradient(next.x[i]);
    next.hess_at_x[i] = objs[i].hessian(next.x[i]);
    next.ell_at_x[i] = next.hess_at_x[i] * next.x[i] - next.grad_at_x[i];
  }
  next.g = dynamic_step_estimate(w, s.g, next.grad_at_x, s.grad_at_x);
  next.h = dynamic_step_estimate(w, s.h, next.hess_at_x, s.hess_at_x);
  next.l = dynamic_step_estimate(w, s.l, next.ell_at_x, s.ell_at_x);
  return next;
}

States step_proposed(const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info) {
  return step(Variant::proposed, w, objs, s, beta, info);
}
States step_alg_a(const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info) {
  return step(Variant::alg_a, w, objs, s, beta, info);
}
States step_alg_b(const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info) {
  return step(Variant::alg_b, w, objs, s, beta, info);
}
States step_vzcps(const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info) {
  return step(Variant::vzcps, w, objs, s, beta, info);
}

std::vector<double> Trace::max_err() const {
  std::vector<double> out(static_cast<std::size_t>(rounds_recorded), 0.0);
  for (const auto& r : rows) out[static_cast<std::size_t>(r.k - 1)] = std::max(out[static_cast<std::size_t>(r.k - 1)], r.err);
  return out;
}

std::vector<double> Trace::max_consensus_residual() const {
  std::vector<double> out(static_cast<std::size_t>(rounds_recorded), 0.0);
  for (const auto& r : rows)
    out[static_cast<std::size_t>(r.k - 1)] = std::max(out[static_cast<std::size_t>(r.k - 1)], r.consensus_residual);
  return out;
}

void record_round(Trace& t, int k, const States& s, const Vec& x_star, const std::vector<char>& floored, bool diverged) {
  const int n = s.size();
  Vec mean = Vec::Zero(s.x[0].size());
  for (const auto& x : s.x) mean += x;
  mean /= n;
  for (int i = 0; i < n; ++i) {
    TraceRow r;
    r.k = k;
    r.i = i;
    r.err = (s.x[i] - x_star).norm();
    r.consensus_residual = (s.x[i] - mean).norm();
    r.grad_residual = s.g[i].norm();
    r.alpha = s.alpha(i);
    r.floored = !floored.empty() && floored[static_cast<std::size_t>(i)];
    r.diverged = diverged;
    t.rows.push_back(r);
  }
  t.rounds_recorded = std::max(t.rounds_recorded, k);

  if (!diverged) {
    auto gap = [](const auto& est, const auto& local) {
      const auto d = (stack_mean(est) - stack_mean(local)).eval();
      double scale = 1.0;
      for (const auto& b : local) scale = std::max(scale, b.cwiseAbs().maxCoeff());
      return d.cwiseAbs().maxCoeff() / scale;
    };
    t.tracking_gap_g = std::max(t.tracking_gap_g, gap(s.g, s.grad_at_x));
    t.tracking_gap_h = std::max(t.tracking_gap_h, gap(s.h, s.hess_at_x));
    t.tracking_gap_l = std::max(t.tracking_gap_l, gap(s.l, s.ell_at_x));
  }
}

StepSizeMode parse_step_mode(const std::string& s) {
  StepSizeMode m;
  if (s.rfind("fixed:", 0) == 0) {
    m.kind = StepMode::fixed;
    const std::string num = s.substr(6);
    std::size_t used = 0;
    try {
      m.value = std::stod(num, &used);
    } catch (...) {
      used = 0;
    }
    if (used == 0 || used != num.size() || !(m.value >= 0.0 && m.value <= 1.0))
      fail(ErrorCode::config, "step size mode '" + s + "': fixed value must be a number in [0, 1]");
    return m;
  }
  if (s == "offline") {
    m.kind = StepMode::offline;
    return m;
  }
  if (s == "adaptive") {
    m.kind = StepMode::adaptive;
    return m;
  }
  if (s == "global") {
    m.kind = StepMode::global;
    return m;
  }
  fail(ErrorCode::config, "unknown step size mode '" + s + "' (expected fixed:<value>, offline, adaptive or global)");
}

std::string step_mode_name(const StepSizeMode& m) {
  switch (m.kind) {
    case StepMode::fixed: {
      std::ostringstream os;
      os << "fixed:" << m.value;
      return os.str();
    }
    case StepMode::offline: return "offline";
    case StepMode::adaptive: return "adaptive";
    case StepMode::global: return "global";
  }
  return "?";
}

Trace run(Variant v, const Topology& w, const ObjectiveSet& objs, const StepSizeMode& mode, int rounds, double beta,
          const std::vector<Vec>& x_init, const Vec& x_star, const RunOptions& opts) {
  require(rounds >= 1, "run: need at least one round");
  require(w.node_count == objs.size(), "run: topology and objective set disagree on node count");
  require(x_star.size() == objs.dim(), "run: x_star dimension mismatch");
  if (mode.kind == StepMode::global) {
    if (v != Variant::proposed) fail(ErrorCode::config, "global step size schedule is defined only for the proposed variant");
    return global_run(w, objs, beta, mode.gamma, mode.delta, x_init, rounds, x_star, mode.form, opts);
  }

  const int n = objs.size();
  const int dim = objs.dim();
  Trace t;
  t.nodes = n;
  t.rounds_requested = rounds;

  States s = init_states(objs, x_init);
  SpectralParams sp;
  RTracker tracker;
  if (mode.kind == StepMode::fixed) {
    s.alpha.setConstant(mode.value);
  } else {
    sp = spectral_params(w);
    if (mode.kind == StepMode::offline) s.alpha.setConstant(offline_alpha(sp.lambda2));
    if (mode.kind == StepMode::adaptive) tracker = init_rtracker(sp, n, dim);
  }

  std::vector<char> floored;
  for (int k = 1; k <= rounds; ++k) {
    if (mode.kind == StepMode::adaptive)
      for (int i = 0; i < n; ++i) s.alpha(i) = adaptive_alpha(sp.lambda2, s_estimate(tracker.r[i]));
    StepInfo info;
    States next;
    if (k < rounds) next = step(v, w, objs, s, beta, &info, opts.divergence_threshold);
    record_round(t, k, s, x_star, info.floored, false);
    if (k == rounds) break;
    if (info.diverged) {
      t.diverged = true;
      t.divergence_round = k + 1;
      record_round(t, k + 1, next, x_star, info.floored, true);
      break;
    }
    if (mode.kind == StepMode::adaptive) tracker = r_step(w, objs, next, tracker, beta);
    s = std::move(next);
  }
  return t;
}

}  // namespace dnc
