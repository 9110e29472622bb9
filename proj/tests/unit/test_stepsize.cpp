#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>

#include "errors.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "stepsize.hpp"

using namespace dnc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

void check_rel(double got, double want, double tol) {
  CAPTURE(got);
  CAPTURE(want);
  CHECK(std::abs(got - want) <= tol * std::max(1.0, std::abs(want)));
}

// Dense-grid oracle for the scheduler: smallest |F| among feasible steps.
double grid_best_norm(const StabilityConstants& k, const Eigen::Vector2d& chi) {
  double best = std::numeric_limits<double>::infinity();
  auto visit = [&](double a) {
    const Eigen::Vector2d y = F_map(k, chi, a).y;
    if (y(0) <= chi(0) && y(1) <= chi(1)) best = std::min(best, y.norm());
  };
  for (int i = 0; i <= 100000; ++i) visit(i * 1e-5);
  for (int i = 1; i <= 100000; ++i) visit(i * 1e-9);
  return best;
}

}  // namespace

TEST_CASE("offline criterion") {
  CHECK(std::abs(offline_alpha(0.81) - 0.1) <= 4 * std::numeric_limits<double>::epsilon());
  const double a = offline_alpha(0.9838);
  CHECK(a == 1 - std::sqrt(0.9838));
  CHECK(a == doctest::Approx(8.13e-3).epsilon(1e-3));
  CHECK(std::abs(criterion_residual(0.9838, 1.0, a)) <= 1e-12);
  CHECK(offline_alpha(0.0) == 1.0);
  CHECK_THROWS_AS(offline_alpha(1.0), Error);
}

TEST_CASE("criterion for complex second eigenvalues") {
  // numpy bisection references
  const auto sp = spectral_params(build_ring(30, 0.7, 0.15, 0.15));
  check_rel(offline_alpha(sp.lambda2), 0.006249875794749522, 1e-10);
  check_rel(offline_alpha(cplx(0.5, 0.3)), 0.22588942387570476, 1e-10);
  check_rel(adaptive_alpha(0.9838, 1.7), 0.007064252536298887, 1e-10);
}

TEST_CASE("adaptive criterion reduces to offline at s = 1") {
  for (int k = 1; k <= 99; ++k) {
    const double l = k / 100.0;
    CAPTURE(l);
    CHECK(std::abs(adaptive_alpha(l, 1.0) - offline_alpha(l)) <= 1e-10);
  }
  for (double l : {0.7, 0.95, 0.9838}) {
    const double s = 1.0 / l - 1e-3;
    const double a = adaptive_alpha(l, s);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    CHECK(std::abs(criterion_residual(l, s, a)) <= 1e-12);
  }
}

TEST_CASE("criterion roots") {
  const auto [up, down] = criterion_roots(0.9, 1.3, 0.02);
  // Same quadratic as mu^2 - l (2 - t) mu + l (l - t).
  for (cplx mu : {up, down}) CHECK(std::abs(mu * mu - 0.9 * (2 - 0.026) * mu + 0.9 * (0.9 - 0.026)) < 1e-14);
  CHECK(std::abs(up) >= std::abs(down));
}

TEST_CASE("s estimate") {
  CHECK(s_estimate(Mat::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s_estimate(Mat(v2(2, 0.5).asDiagonal())) == doctest::Approx(1.25).epsilon(1e-15));
  Rng rng(2, Stream::sampling);
  for (int t = 0; t < 10; ++t) {
    Mat a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = rng.normal();
    const Mat r = a * a.transpose() + 0.1 * Mat::Identity(3, 3);
    const auto e = jacobi_eig(r);
    CHECK(std::abs(s_estimate(r) - 0.5 * (e.values(0) + e.values(2))) <= 1e-10);
  }
  CHECK_THROWS_AS(s_estimate(Mat::Zero(2, 2)), Error);
}

TEST_CASE("ratio tracker with identical Hessians sums to identity") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  const auto sp = spectral_params(w);
  Mat q(2, 2);
  q << 3, 1, 1, 2;
  std::vector<std::shared_ptr<const LocalObjective>> locals(30, std::make_shared<QuadraticObjective>(q, v2(1, 1)));
  const ObjectiveSet objs(locals);
  const States s = init_states(objs, std::vector<Vec>(30, v2(0.3, -0.2)), 0.01);
  RTracker t = init_rtracker(sp, 30, 2);
  Mat sum = Mat::Zero(2, 2);
  for (int i = 0; i < 30; ++i) sum += r_input(objs[i], s.x[i], s.h[i], sp.weights(i), 30, 1.0) / 30.0;
  CHECK((sum - Mat::Identity(2, 2)).norm() < 1e-12);
  for (int k = 0; k < 1500; ++k) {
    t = r_step(w, objs, s, t, 1.0);
    CHECK((stack_mean(t.r) - Mat::Identity(2, 2)).norm() < 1e-10);
  }
  for (int i = 0; i < 30; ++i) CHECK((t.r[i] - Mat::Identity(2, 2)).norm() < 1e-8);
}

TEST_CASE("ratio tracker converges to the weighted ratio at the optimum") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  const auto sp = spectral_params(w);
  const auto inst = make_localization(30, v2(0, 0), 0.01, 1);
  const auto objs = localization_objectives(inst);
  const Vec xs = centralized_newton(objs, inst.x_true).x;
  States s = init_states(objs, initial_points(30, v2(0, 0), 1.0, 1), 0.006);
  RTracker t = init_rtracker(sp, 30, 2);
  for (int k = 0; k < 4000; ++k) {
    s = step(Variant::proposed, w, objs, s, 0.1);
    t = r_step(w, objs, s, t, 0.1);
    Mat local = Mat::Zero(2, 2);
    for (int i = 0; i < 30; ++i) local += r_input(objs[i], s.x[i], s.h[i], sp.weights(i), 30, 0.1) / 30.0;
    if (k % 500 == 0) CHECK((stack_mean(t.r) - local).norm() <= 1e-10 * std::max(1.0, local.norm()));
  }
  std::vector<Mat> hs;
  for (int i = 0; i < 30; ++i) hs.push_back(objs[i].hessian(xs));
  const Mat hstar = global_aggregate(objs, xs).hessian;
  const Mat r = rmatrix(hs, hstar, sp.u, sp.v).real();
  CHECK((stack_mean(t.r) - r).norm() <= 1e-6 * r.norm());
}

TEST_CASE("scalar Lyapunov equation") {
  const Eigen::Matrix3d p = solve_lyapunov(0.5 * Eigen::Matrix3d::Identity());
  CHECK((p - 4.0 / 3 * Eigen::Matrix3d::Identity()).norm() < 1e-14);
  CHECK_THROWS_AS(solve_lyapunov(Eigen::Matrix3d::Identity()), Error);
}

TEST_CASE("constants match the reference solver") {
  SUBCASE("rigorous") {
    const auto k = assemble_constants(0.9, 1.2, 1.1, 0.5, 0.8, 0.5, 2.0, 0.3, ConstantsForm::rigorous);
    // scipy solve_discrete_lyapunov references
    check_rel(k.p(0, 0), 306.153969033387, 1e-10);
    check_rel(k.p(1, 0), 26.326869806094194, 1e-10);
    check_rel(k.p(2, 0), 3.94903047091413, 1e-10);
    check_rel(k.p(1, 1), 5.263157894736843, 1e-10);
    check_rel(k.a, 0.5417446433634101, 1e-9);
    check_rel(k.b, 0.0375, 1e-14);
    check_rel(k.c, 0.24535464295340192, 1e-9);
    check_rel(k.d, 0.07346037390657568, 1e-9);
    check_rel(k.e, 0.0032415840701631245, 1e-9);
    check_rel(k.h, 146.1860384919085, 1e-9);
    check_rel(k.f(0.0), 8.243637826711009, 1e-9);
    check_rel(k.f(0.3), 18.44172928061063, 1e-9);
    check_rel(k.g(0.0), 24.139445368117272, 1e-9);
    check_rel(k.g(0.3), 58.64107430268277, 1e-9);
    CHECK(k.lyapunov_residual() <= 1e-10);
    CHECK(k.e <= 1.0);
  }
  SUBCASE("printed") {
    const auto k = assemble_constants(0.9, 1.2, 1.1, 0.5, 0.8, 0.5, 2.0, 0.3, ConstantsForm::printed);
    check_rel(k.p(0, 0), 253.93324974486094, 1e-10);
    check_rel(k.p(1, 0), 23.933518005540176, 1e-10);
    check_rel(k.a, 0.2849423884648562, 1e-9);
    check_rel(k.c, 0.05748929538160901, 1e-9);
    check_rel(k.d, 0.0745047458109019, 1e-9);
    check_rel(k.e, 0.3413297468986119, 1e-9);
    check_rel(k.h, 124.56740259513053, 1e-9);
    check_rel(k.f(0.0), 3.228041871414058, 1e-9);
    check_rel(k.f(0.3), 23.887952949668318, 1e-9);
    check_rel(k.g(0.0), 248.0501541465124, 1e-9);
    check_rel(k.g(0.3), 1145.5131524599042, 1e-9);
    CHECK(k.lyapunov_residual() <= 1e-10);
  }
}

TEST_CASE("constants on the paper ring") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  for (auto form : {ConstantsForm::rigorous, ConstantsForm::printed}) {
    const auto k = compute_constants(w, 1.0, 4.0, 0.0, form);
    CHECK(k.lyapunov_residual() <= 1e-10);
    CHECK(k.e > 0.0);
    CHECK(k.e <= 1.0);
    CHECK(k.b == 0.0);
    CHECK(k.nu(0) == 0.0);
    CHECK(k.nu(1) == 0.0);
    CHECK(k.nu(2) == doctest::Approx(k.sigma_c * 1.0).epsilon(1e-15));
    CHECK(k.phi(0, 1) == 0.0);
    CHECK(k.phi(0, 0) == k.lambda2);
    CHECK(k.phi(2, 2) == k.lambda2);
    // Circulant W is normal, so the transform is unitary.
    CHECK(k.tau == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("F map") {
  const auto k = compute_constants(build_ring(30, 0.7, 0.15, 0.15), 1.0, 4.0, 0.0);
  const Eigen::Vector2d chi(2.0, 3.0);
  const Eigen::Vector2d y = F_map(k, chi, 0.0).y;
  CHECK(y(0) == chi(0));
  CHECK(y(1) == doctest::Approx(std::sqrt(1 - k.e) * 3.0).epsilon(1e-15));
  CHECK(y(1) < chi(1));
  for (double a : {0.0, 0.3, 1.0}) CHECK(F_map(k, Eigen::Vector2d::Zero(), a).y.norm() == 0.0);
}

TEST_CASE("scheduler agrees with a dense grid") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  for (auto form : {ConstantsForm::rigorous, ConstantsForm::printed}) {
    const auto k = compute_constants(w, 1.0, 4.0, 0.0, form);
    for (const Eigen::Vector2d chi :
         {Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1e-3, 0.0), Eigen::Vector2d(1.0, 1e-2), Eigen::Vector2d(5.0, 1e-4),
          Eigen::Vector2d(1.0, 1e6)}) {
      const double a = schedule_alpha(k, chi);
      const Eigen::Vector2d y = F_map(k, chi, a).y;
      CAPTURE(chi.transpose());
      CHECK(y(0) <= chi(0));
      CHECK(y(1) <= chi(1));
      CHECK(y.norm() <= grid_best_norm(k, chi) * (1 + 1e-9));
    }
    // Nothing but consensus is affordable with a huge mismatch.
    CHECK(schedule_alpha(k, Eigen::Vector2d(1.0, 1e6)) == 0.0);
  }
}

TEST_CASE("scheduler with zero gradient bound takes no step") {
  // With chi1 = 0 the first component grows for any positive step.
  const auto k = compute_constants(build_ring(30, 0.7, 0.15, 0.15), 1.0, 4.0, 0.0);
  CHECK(schedule_alpha(k, Eigen::Vector2d(0.0, 0.5)) == 0.0);
}

TEST_CASE("certified run keeps the bound") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  const auto objs = random_quadratic_set(30, 2, 3, 1.0, 4.0, 1.0);
  const Vec xs = centralized_newton(objs, Vec::Zero(2)).x;
  const auto far = initial_points(30, Vec::Zero(2), 5.0, 3);
  const auto t = global_run(w, objs, 1.0, 4.0, 0.0, far, 400, xs);
  REQUIRE(t.certificate.size() == 400);
  CHECK(t.certificate_violation <= 0.0);
  CHECK(t.one_step_violation <= 1e-8);
  CHECK(t.certificate.front().alpha == 0.0);
  for (std::size_t k = 1; k < t.certificate.size(); ++k) CHECK(t.certificate[k].chi2 < t.certificate[k - 1].chi2);
  CHECK_THROWS_AS(global_run(w, objs, 1.0, 4.0, 0.0, far, 0, xs), Error);
}

TEST_CASE("certified run from exact consensus") {
  // Identical objectives and a common start: every disagreement is zero, so
  // the mismatch bound is zero and any positive step would raise it to
  // alpha sqrt(h) chi1. The scheduler can only mix.
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  Mat q(2, 2);
  q << 2, 0.3, 0.3, 1;
  std::vector<std::shared_ptr<const LocalObjective>> locals(30, std::make_shared<QuadraticObjective>(q, v2(1, -1)));
  const ObjectiveSet objs(locals);
  const Vec xs = centralized_newton(objs, Vec::Zero(2)).x;
  const auto t = global_run(w, objs, 1.0, 2.2, 0.0, std::vector<Vec>(30, xs + v2(30, -20)), 5, xs);
  const auto& first = t.certificate.front();
  CHECK(first.chi2 <= 1e-9 * first.chi1);  // rounding in the stack means
  CHECK(first.chi1 > 0.0);
  const auto k = compute_constants(w, 1.0, 2.2, 0.0);
  CHECK(k.h > 0.0);
  CHECK(F_map(k, Eigen::Vector2d(first.chi1, 0.0), 1e-9).y(1) > 0.0);
  for (const auto& row : t.certificate) CHECK(row.alpha == 0.0);
}
