#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace dnc {

// Doubly stochastic, primitive mixing matrix. Node i mixes with
// in_neighbors[i] (ascending, self included when w_ii > 0) and sends to
// out_neighbors[i].
struct Topology {
  int node_count = 0;
  Mat weights;
  std::vector<std::vector<int>> in_neighbors;
  std::vector<std::vector<int>> out_neighbors;

  int size() const { return node_count; }
};

inline constexpr double kStochasticTol = 1e-12;

// Validates and wraps W. Throws ErrorCode::config naming the broken
// invariant and the offending row/column.
Topology make_topology(const Mat& w);

Topology build_ring(int nodes, double self_w, double off1, double off2);

// First line I, then I rows of I decimals.
Topology load_topology(const std::string& path);
void save_topology(const Topology& t, const std::string& path);

bool is_primitive(const Mat& w);
bool is_symmetric(const Topology& t, double tol = 1e-12);

struct SpectralParams {
  cplx lambda2{0.0, 0.0};
  double lambda2_modulus = 0.0;
  CVec u;  // right eigenvector, unit norm
  CVec v;  // left eigenvector, unit norm, v^T u real positive
  // Re(v_i u_i / v^T u); sums to 1.
  Vec weights;
  bool is_real() const { return lambda2.imag() == 0.0; }
};

SpectralParams spectral_params(const Topology& t);

enum class MeanMode {
  exact,    // subtract the exact network mean every round
  tracked,  // subtract a static-consensus estimate of the initial mean
};

struct PowerEstimate {
  Vec lambda2;             // per node
  Vec u;                   // per node entry of the normalized eigenvector estimate
  std::vector<double> history;  // estimate after each round (index 0 is round 2)
  bool collapsed = false;
};

PowerEstimate power_estimate_lambda2(const Topology& t, std::uint64_t seed, int rounds,
                                     MeanMode mode = MeanMode::exact);

}  // namespace dnc
