#pragma once

#include <string>
#include <vector>

#include "consensus.hpp"
#include "netgraph.hpp"
#include "objectives.hpp"

namespace dnc {

enum class Variant { proposed, alg_a, alg_b, vzcps };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& s);
bool uses_ell(Variant v);

// Spectral factors of B(H): eigenvalues floored at 1/beta.
struct FlooredHessian {
  Mat vectors;
  Vec values;
  bool floored = false;

  Mat matrix() const { return vectors * values.asDiagonal() * vectors.transpose(); }
  // B(H)^{-1} y through the factors; no explicit inverse.
  Vec solve(const Vec& y) const { return vectors * (values.cwiseInverse().asDiagonal() * (vectors.transpose() * y)); }
  Mat inverse() const { return vectors * values.cwiseInverse().asDiagonal() * vectors.transpose(); }
};

FlooredHessian floor_hessian_factors(const Mat& h, double beta);
Mat floor_hessian(const Mat& h, double beta);

// Node states plus the local evaluations at the current x, which the next
// round needs as the "old" consensus inputs.
struct States {
  std::vector<Vec> x;
  std::vector<Vec> g;
  std::vector<Mat> h;
  std::vector<Vec> l;
  Vec alpha;

  std::vector<Vec> grad_at_x;
  std::vector<Mat> hess_at_x;
  std::vector<Vec> ell_at_x;

  int size() const { return static_cast<int>(x.size()); }
};

// x_1 = x_init, g_1 = grad f^i(x_init), H_1 = hess f^i(x_init), l_1 = ell^i(x_init).
States init_states(const ObjectiveSet& objs, const std::vector<Vec>& x_init, double alpha = 0.0);

inline constexpr double kDivergenceThreshold = 1e12;
inline constexpr double kConsensusFloor = 1e-3;

struct StepInfo {
  std::vector<char> floored;
  bool diverged = false;
};

States step(Variant v, const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info = nullptr,
            double divergence_threshold = kDivergenceThreshold);

States step_proposed(const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info = nullptr);
States step_alg_a(const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info = nullptr);
States step_alg_b(const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info = nullptr);
States step_vzcps(const Topology& w, const ObjectiveSet& objs, const States& s, double beta, StepInfo* info = nullptr);

struct TraceRow {
  int k = 0;
  int i = 0;
  double err = 0.0;
  double consensus_residual = 0.0;
  double grad_residual = 0.0;
  double alpha = 0.0;
  bool floored = false;
  bool diverged = false;
};

// Global-schedule bookkeeping per round: certified bound chi and the true
// pair zeta it must dominate.
struct CertificateRow {
  int k = 0;
  double chi1 = 0.0;
  double chi2 = 0.0;
  double zeta1 = 0.0;
  double zeta2 = 0.0;
  double alpha = 0.0;
  bool radicand_clamped = false;
};

struct Trace {
  int nodes = 0;
  int rounds_requested = 0;
  int rounds_recorded = 0;
  std::vector<TraceRow> rows;
  bool diverged = false;
  int divergence_round = -1;

  // Largest deviation of mean(g), mean(H), mean(l) from the means of the
  // local evaluations, over all recorded rounds.
  double tracking_gap_g = 0.0;
  double tracking_gap_h = 0.0;
  double tracking_gap_l = 0.0;

  std::vector<CertificateRow> certificate;
  // Global mode: largest violation of zeta <= chi, and of
  // zeta_{k+1} <= F(zeta_k, alpha_k).
  double certificate_violation = 0.0;
  double one_step_violation = 0.0;

  std::vector<double> max_err() const;
  std::vector<double> max_consensus_residual() const;
};

enum class StepMode { fixed, offline, adaptive, global };

enum class ConstantsForm { printed, rigorous };

struct StepSizeMode {
  StepMode kind = StepMode::offline;
  double value = 0.0;  // fixed
  double gamma = 0.0;  // global
  double delta = 0.0;  // global
  ConstantsForm form = ConstantsForm::rigorous;
};

StepSizeMode parse_step_mode(const std::string& s);
std::string step_mode_name(const StepSizeMode& m);

struct RunOptions {
  double divergence_threshold = kDivergenceThreshold;
  double consensus_floor = kConsensusFloor;
};

// Runs `rounds` synchronous rounds. Row k holds the state x_k (k = 1 is the
// initialization). Stops early, with a partial trace, if the divergence
// guard fires.
Trace run(Variant v, const Topology& w, const ObjectiveSet& objs, const StepSizeMode& mode, int rounds, double beta,
          const std::vector<Vec>& x_init, const Vec& x_star, const RunOptions& opts = {});

// Appends the rows for the round held in `s`.
void record_round(Trace& t, int k, const States& s, const Vec& x_star, const std::vector<char>& floored, bool diverged);

}  // namespace dnc
