#include "netgraph.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace dnc {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> bool_product(
    const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& a,
    const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& b) {
  const Eigen::Index n = a.rows();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> c(n, n);
  c.setConstant(false);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      if (a(i, k))
        for (Eigen::Index j = 0; j < n; ++j) c(i, j) = c(i, j) || b(k, j);
  return c;
}

}  // namespace

bool is_primitive(const Mat& w) {
  const Eigen::Index n = w.rows();
  if (n == 0) return false;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> base = (w.array() > 0.0).matrix();
  // A primitive matrix has W^m > 0 for every m >= (n-1)^2 + 1 (Wielandt), and
  // that bound is below n^2, so one exponent settles it.
  long long m = static_cast<long long>(n - 1) * (n - 1) + 1;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> result(n, n);
  result.setConstant(false);
  for (Eigen::Index i = 0; i < n; ++i) result(i, i) = true;
  while (m > 0) {
    if (m & 1) result = bool_product(result, base);
    m >>= 1;
    if (m > 0) base = bool_product(base, base);
  }
  return result.all();
}

Topology make_topology(const Mat& w) {
  if (w.rows() != w.cols() || w.rows() == 0)
    fail(ErrorCode::config, "topology: weight matrix must be square and non-empty, got " +
                                std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
  const int n = static_cast<int>(w.rows());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(w(i, j)))
        fail(ErrorCode::config, "topology: entry (" + std::to_string(i) + "," + std::to_string(j) + ") is not finite");
      if (w(i, j) < 0.0)
        fail(ErrorCode::config, "topology: nonnegativity violated at entry (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") = " + fmt(w(i, j)));
    }
  for (int i = 0; i < n; ++i) {
    const double r = w.row(i).sum();
    if (std::abs(r - 1.0) > kStochasticTol)
      fail(ErrorCode::config, "topology: doubly stochastic violated, row " + std::to_string(i) + " sums to " + fmt(r));
  }
  for (int j = 0; j < n; ++j) {
    const double c = w.col(j).sum();
    if (std::abs(c - 1.0) > kStochasticTol)
      fail(ErrorCode::config,
           "topology: doubly stochastic violated, column " + std::to_string(j) + " sums to " + fmt(c));
  }
  if (!is_primitive(w)) fail(ErrorCode::config, "topology: primitivity violated, no power W^m (m <= I^2) is entrywise positive");

  Topology t;
  t.node_count = n;
  t.weights = w;
  t.in_neighbors.assign(n, {});
  t.out_neighbors.assign(n, {});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (w(i, j) != 0.0) {
        t.in_neighbors[i].push_back(j);
        t.out_neighbors[j].push_back(i);
      }
  return t;
}

Topology build_ring(int nodes, double self_w, double off1, double off2) {
  if (nodes < 3) fail(ErrorCode::config, "build_ring: need at least 3 nodes, got " + std::to_string(nodes));
  if (self_w < 0 || off1 < 0 || off2 < 0) fail(ErrorCode::config, "build_ring: weights must be nonnegative");
  if (std::abs(self_w + off1 + off2 - 1.0) > kStochasticTol)
    fail(ErrorCode::config, "build_ring: weights sum to " + fmt(self_w + off1 + off2) + ", expected 1");
  Mat w = Mat::Zero(nodes, nodes);
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j) {
      const int d = ((i - j) % nodes + nodes) % nodes;
      if (i == j) w(i, j) += self_w;
      if (d == 1) w(i, j) += off1;
      if (d == nodes - 2) w(i, j) += off2;
    }
  return make_topology(w);
}

Topology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config, "topology file '" + path + "' cannot be opened");
  long long n = 0;
  if (!(in >> n) || n <= 0) fail(ErrorCode::config, "topology file '" + path + "': first line must be a positive node count");
  Mat w(n, n);
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j < n; ++j)
      if (!(in >> w(i, j)))
        fail(ErrorCode::config, "topology file '" + path + "': missing or malformed entry at row " + std::to_string(i) +
                                    ", column " + std::to_string(j));
  std::string extra;
  if (in >> extra) fail(ErrorCode::config, "topology file '" + path + "': trailing data after " + std::to_string(n) + " rows");
  return make_topology(w);
}

void save_topology(const Topology& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write topology file '" + path + "'");
  out << t.node_count << "\n" << std::setprecision(17);
  for (int i = 0; i < t.node_count; ++i) {
    for (int j = 0; j < t.node_count; ++j) out << (j ? " " : "") << t.weights(i, j);
    out << "\n";
  }
}

bool is_symmetric(const Topology& t, double tol) { return max_asymmetry(t.weights) <= tol; }

SpectralParams spectral_params(const Topology& t) {
  const Mat& w = t.weights;
  const int n = t.node_count;
  SpectralParams sp;
  if (n == 1) {
    sp.u = CVec::Ones(1);
    sp.v = CVec::Ones(1);
    sp.weights = Vec::Ones(1);
    return sp;
  }

  CVec vals;
  CMat right;
  CMat left;
  if (is_symmetric(t)) {
    const SymEig e = jacobi_eig(w);
    vals = e.values.cast<cplx>();
    right = e.vectors.cast<cplx>();
    left = right;
  } else {
    Eigen::EigenSolver<Mat> es(w, true);
    if (es.info() != Eigen::Success) fail(ErrorCode::numerical, "spectral_params: eigen-iteration did not converge");
    vals = es.eigenvalues();
    right = es.eigenvectors();
    Eigen::EigenSolver<Mat> lt(w.transpose(), true);
    if (lt.info() != Eigen::Success) fail(ErrorCode::numerical, "spectral_params: eigen-iteration did not converge");
    // Pair each left eigenvector with the same eigenvalue ordering as the right ones.
    left.resize(n, n);
    const CVec lvals = lt.eigenvalues();
    const CMat lvecs = lt.eigenvectors();
    std::vector<bool> used(n, false);
    for (int k = 0; k < n; ++k) {
      int best = -1;
      double dist = INFINITY;
      for (int m = 0; m < n; ++m)
        if (!used[m] && std::abs(lvals(m) - vals(k)) < dist) {
          dist = std::abs(lvals(m) - vals(k));
          best = m;
        }
      used[best] = true;
      left.col(k) = lvecs.col(best);
    }
  }

  int perron = 0;
  for (int k = 1; k < n; ++k)
    if (std::abs(vals(k) - 1.0) < std::abs(vals(perron) - 1.0)) perron = k;
  int second = -1;
  for (int k = 0; k < n; ++k) {
    if (k == perron) continue;
    if (second < 0) {
      second = k;
      continue;
    }
    const double dm = std::abs(vals(k)) - std::abs(vals(second));
    if (dm > 1e-12 || (std::abs(dm) <= 1e-12 && (vals(k).imag() > vals(second).imag() + 1e-12 ||
                                                 (std::abs(vals(k).imag() - vals(second).imag()) <= 1e-12 &&
                                                  vals(k).real() > vals(second).real()))))
      second = k;
  }

  cplx lam = vals(second);
  if (std::abs(lam.imag()) < 1e-14 * std::max(1.0, std::abs(lam))) lam = cplx(lam.real(), 0.0);
  CVec u = right.col(second);
  CVec v = left.col(second);
  if (lam.imag() == 0.0) {
    // Real eigenvalue: a real eigenvector exists; rotate away any phase.
    auto realify = [](CVec x) {
      Eigen::Index idx;
      x.cwiseAbs().maxCoeff(&idx);
      const cplx ph = std::abs(x(idx)) > 0 ? std::conj(x(idx)) / std::abs(x(idx)) : cplx(1.0);
      x *= ph;
      return CVec(x.real().cast<cplx>());
    };
    u = realify(u);
    v = realify(v);
  }
  u /= u.norm();
  v /= v.norm();
  const cplx c = (v.transpose() * u)(0);
  if (std::abs(c) < 1e-12) fail(ErrorCode::numerical, "spectral_params: left/right eigenvectors nearly orthogonal (v^T u ~ 0)");
  v *= std::conj(c) / std::abs(c);
  const cplx vu = (v.transpose() * u)(0);

  const double res = (w.cast<cplx>() * u - lam * u).norm();
  if (res > 1e-8) fail(ErrorCode::numerical, "spectral_params: eigenvector residual " + fmt(res) + " exceeds 1e-8");

  sp.lambda2 = lam;
  sp.lambda2_modulus = std::abs(lam);
  sp.u = u;
  sp.v = v;
  sp.weights.resize(n);
  for (int i = 0; i < n; ++i) sp.weights(i) = (v(i) * u(i) / vu).real();
  return sp;
}

PowerEstimate power_estimate_lambda2(const Topology& t, std::uint64_t seed, int rounds, MeanMode mode) {
  if (!is_symmetric(t)) fail(ErrorCode::config, "power_estimate_lambda2: W must be symmetric (undirected graph)");
  if (rounds < 2) fail(ErrorCode::config, "power_estimate_lambda2: need at least 2 rounds");
  const int n = t.node_count;
  const Mat& w = t.weights;
  Rng rng(seed, Stream::power);
  Vec u(n);
  for (int i = 0; i < n; ++i) u(i) = rng.normal();
  Vec tracker = u;

  PowerEstimate out;
  double est = 0.0;
  for (int k = 1; k < rounds; ++k) {
    Vec next;
    if (mode == MeanMode::exact) {
      next = w * u - Vec::Constant(n, u.mean());
    } else {
      next = w * u - tracker;
      tracker = w * tracker;
    }
    const double prev_norm = u.norm();
    const double next_norm = next.norm();
    if (prev_norm == 0.0 || next_norm <= 1e-12 * prev_norm) {
      out.collapsed = true;
      est = 0.0;
      out.history.push_back(0.0);
      u = next;
      break;
    }
    est = next_norm / prev_norm;
    out.history.push_back(est);
    u = next;
    if (mode == MeanMode::exact) u /= next_norm;
  }
  out.lambda2 = Vec::Constant(n, est);
  const double un = u.norm();
  out.u = un > 0 ? Vec(u / un) : Vec(Vec::Zero(n));
  return out;
}

}  // namespace dnc
