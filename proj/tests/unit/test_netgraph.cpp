#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "errors.hpp"
#include "netgraph.hpp"
#include "rng.hpp"

using namespace dnc;

namespace {

Mat symmetric_ring(int n) {
  Mat w = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    w(i, i) = 0.5;
    w(i, (i + 1) % n) += 0.25;
    w(i, (i + n - 1) % n) += 0.25;
  }
  return w;
}

// Metropolis weights on a random connected graph: symmetric, doubly stochastic.
Mat random_metropolis(int n, std::uint64_t seed) {
  Rng rng(seed, Stream::sampling);
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) adj(i, i + 1) = adj(i + 1, i) = 1;
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j)
      if (rng.uniform() < 0.3) adj(i, j) = adj(j, i) = 1;
  Eigen::VectorXi deg = adj.rowwise().sum();
  Mat w = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (adj(i, j)) w(i, j) = 1.0 / (1.0 + std::max(deg(i), deg(j)));
  for (int i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

}  // namespace

TEST_CASE("paper ring spectrum") {
  const auto t = build_ring(30, 0.7, 0.15, 0.15);
  const auto sp = spectral_params(t);
  // numpy reference
  CHECK(sp.lambda2_modulus == doctest::Approx(0.9842059271341111).epsilon(1e-12));
  CHECK(sp.lambda2.real() == doctest::Approx(0.9837539587564597).epsilon(1e-12));
  CHECK(std::abs(sp.lambda2.imag()) == doctest::Approx(0.029823742838706035).epsilon(1e-9));
  CHECK(std::abs(sp.lambda2_modulus - 0.9838) < 1e-3);
  CHECK(sp.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("circulant spectrum matches closed form") {
  const int n = 30;
  const auto t = build_ring(n, 0.7, 0.15, 0.15);
  const CVec ev = general_eigenvalues(t.weights);
  for (int k = 0; k < n; ++k) {
    const double th = 2.0 * std::numbers::pi * k / n;
    const cplx expected = 0.7 + 0.15 * std::exp(cplx(0, -th)) + 0.15 * std::exp(cplx(0, 2 * th));
    double best = INFINITY;
    for (int j = 0; j < n; ++j) best = std::min(best, std::abs(ev(j) - expected));
    CHECK(best < 1e-10);
  }
}

TEST_CASE("averaging matrix has zero second eigenvalue") {
  // At three nodes both ring offsets name the same neighbor, so the ring
  // builder cannot produce uniform weights; it stacks them instead.
  const auto t = build_ring(3, 1.0 / 3, 1.0 / 3, 1.0 / 3);
  CHECK(t.weights(1, 0) == doctest::Approx(2.0 / 3));
  CHECK(t.weights(2, 0) == 0.0);
  CHECK(spectral_params(t).lambda2_modulus == doctest::Approx(1 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(spectral_params(make_topology(Mat::Constant(3, 3, 1.0 / 3))).lambda2_modulus < 1e-12);
  const auto full = make_topology(Mat::Constant(7, 7, 1.0 / 7));
  CHECK(spectral_params(full).lambda2_modulus < 1e-12);
  const auto est = power_estimate_lambda2(full, 1, 50);
  CHECK(est.collapsed);
  CHECK(est.lambda2.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("symmetric ring second eigenvalue") {
  const auto t = make_topology(symmetric_ring(30));
  CHECK(is_symmetric(t));
  const double expected = 0.5 + 0.5 * std::cos(2 * std::numbers::pi / 30);
  CHECK(std::abs(spectral_params(t).lambda2_modulus - expected) < 1e-10);
}

TEST_CASE("stochasticity and deflated radius") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto t = make_topology(random_metropolis(12, seed));
    const Vec ones = Vec::Ones(12);
    CHECK((t.weights * ones - ones).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((t.weights.transpose() * ones - ones).cwiseAbs().maxCoeff() < 1e-12);
    const Mat v = t.weights - Mat::Constant(12, 12, 1.0 / 12);
    const double rho = general_eigenvalues(v).cwiseAbs().maxCoeff();
    CHECK(std::abs(rho - spectral_params(t).lambda2_modulus) < 1e-8);
  }
}

TEST_CASE("static consensus decays at the second eigenvalue") {
  const auto t = build_ring(30, 0.7, 0.15, 0.15);
  const double l2 = spectral_params(t).lambda2_modulus;
  Rng rng(3, Stream::sampling);
  Vec x(30);
  for (int i = 0; i < 30; ++i) x(i) = rng.normal();
  const double mean = x.mean();
  double prev = 0.0, ratio = 0.0;
  for (int k = 0; k < 600; ++k) {
    x = t.weights * x;
    const double dev = (x.array() - mean).matrix().norm();
    if (k > 0) ratio = dev / prev;
    prev = dev;
  }
  CHECK(ratio <= l2 + 1e-3);
  CHECK(std::abs(x.mean() - mean) < 1e-12);
}

TEST_CASE("power estimate on symmetric ring") {
  const auto t = make_topology(symmetric_ring(30));
  const double direct = spectral_params(t).lambda2_modulus;
  const auto est = power_estimate_lambda2(t, 11, 500);
  CHECK(!est.collapsed);
  CHECK((est.lambda2.array() - direct).abs().maxCoeff() < 1e-3);
}

TEST_CASE("power estimate on random symmetric graphs") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t = make_topology(random_metropolis(10, 100 + seed));
    const double direct = spectral_params(t).lambda2_modulus;
    const auto est = power_estimate_lambda2(t, seed, 1000);
    CAPTURE(seed);
    CHECK(((est.lambda2.array() - direct).abs() / direct).maxCoeff() < 1e-2);
  }
}

TEST_CASE("validation names the broken invariant") {
  Mat w = symmetric_ring(4);
  w(1, 2) += 0.1;
  try {
    make_topology(w);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  Mat neg = symmetric_ring(4);
  neg(0, 0) = -0.5;
  neg(0, 1) = 1.0;
  neg(1, 1) = 0.0;
  neg(1, 0) = 1.0;
  neg(1, 2) = 0.0;
  CHECK_THROWS_AS(make_topology(neg), Error);
  // Two disconnected blocks: doubly stochastic but not primitive.
  Mat split = Mat::Zero(4, 4);
  split.topLeftCorner(2, 2).setConstant(0.5);
  split.bottomRightCorner(2, 2).setConstant(0.5);
  CHECK(!is_primitive(split));
  CHECK_THROWS_AS(make_topology(split), Error);
}

TEST_CASE("topology file round trip") {
  const auto t = build_ring(6, 0.6, 0.3, 0.1);
  const std::string path = "netgraph_roundtrip.txt";
  save_topology(t, path);
  const auto back = load_topology(path);
  CHECK((back.weights - t.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.in_neighbors == t.in_neighbors);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_topology("does_not_exist.txt"), Error);
}
