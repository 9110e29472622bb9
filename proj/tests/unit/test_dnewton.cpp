#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "dnewton.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "rng.hpp"
#include "spectral.hpp"

using namespace dnc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Mat rotation(double th) {
  Mat r(2, 2);
  r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return r;
}

ObjectiveSet identical_quadratics(int n, const Mat& q, const Vec& c) {
  std::vector<std::shared_ptr<const LocalObjective>> locals;
  auto f = std::make_shared<QuadraticObjective>(q, -q * c);
  for (int i = 0; i < n; ++i) locals.push_back(f);
  return ObjectiveSet(locals);
}

std::vector<Vec> random_points(int n, std::uint64_t seed, double spread) {
  return initial_points(n, Vec::Zero(2), spread, seed);
}

Topology single_node() { return make_topology(Mat::Identity(1, 1)); }

const Variant kAll[] = {Variant::proposed, Variant::alg_a, Variant::alg_b, Variant::vzcps};

}  // namespace

TEST_CASE("hessian flooring") {
  Mat h(2, 2);
  h << 2, 0, 0, -1;
  const Mat b = floor_hessian(h, 1.0);
  CHECK((b - Mat(v2(2, 1).asDiagonal())).norm() < 1e-15);

  Mat ok(2, 2);
  ok << 3, 1, 1, 2;
  CHECK((floor_hessian(ok, 1.0) - ok).norm() == 0.0);
  CHECK(!floor_hessian_factors(ok, 1.0).floored);

  const Mat q = rotation(0.7);
  const Mat r = floor_hessian(q * Mat(v2(0.1, 5).asDiagonal()) * q.transpose(), 1.0);
  const auto e = jacobi_eig(r);
  CHECK(e.values(0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(e.values(1) == doctest::Approx(5.0).epsilon(1e-13));
  CHECK((r * q.col(0) - q.col(0)).norm() < 1e-13);
  CHECK((r * q.col(1) - 5 * q.col(1)).norm() < 1e-13);

  const auto f = floor_hessian_factors(h, 1.0);
  CHECK((f.solve(v2(4, 3)) - v2(2, 3)).norm() < 1e-15);
  Mat asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_THROWS_AS(floor_hessian(asym, 1.0), Error);
  CHECK_THROWS_AS(floor_hessian(ok, 0.0), Error);
}

TEST_CASE("single node reduces to damped Newton") {
  Mat q(2, 2);
  q << 3, 1, 1, 2;
  const Vec c = v2(1, -2);
  const auto objs = identical_quadratics(1, q, c);
  const auto w = single_node();
  for (Variant v : kAll) {
    States s = init_states(objs, {v2(7, 9)}, 1.0);
    s = step(v, w, objs, s, 1.0);
    CAPTURE(variant_name(v));
    CHECK((s.x[0] - c).norm() < 1e-12);
  }
  // Partial step: every variant takes x - alpha B^{-1} grad.
  for (Variant v : kAll) {
    const States s0 = init_states(objs, {v2(7, 9)}, 0.3);
    const States s1 = step(v, w, objs, s0, 1.0);
    const Vec expect = v2(7, 9) - 0.3 * q.ldlt().solve(objs[0].gradient(v2(7, 9)));
    CHECK((s1.x[0] - expect).norm() < 1e-12);
  }
}

TEST_CASE("identical quadratics converge at one minus alpha") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  const Vec c = v2(2, -1);
  const auto objs = identical_quadratics(30, Mat::Identity(2, 2), c);
  for (double alpha : {0.002, 0.005}) {
    StepSizeMode m;
    m.kind = StepMode::fixed;
    m.value = alpha;
    // beta = 2 keeps the unit Hessian unfloored.
    const auto t = run(Variant::proposed, w, objs, m, 3000, 2.0, random_points(30, 1, 3.0), c);
    const auto e = t.max_err();
    const double ratio = std::pow(e.back() / e[e.size() - 101], 1.0 / 100);
    CAPTURE(alpha);
    CHECK(ratio == doctest::Approx(1 - alpha).epsilon(1e-4));
  }
}

TEST_CASE("without mixing, identical states follow the proposed trajectory") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  Mat q(2, 2);
  q << 2, 0.5, 0.5, 1;
  const auto objs = identical_quadratics(30, q, v2(1, 1));
  States a = init_states(objs, std::vector<Vec>(30, v2(-4, 6)), 0.2);
  States p = a;
  for (int k = 0; k < 20; ++k) {
    a = step(Variant::alg_a, w, objs, a, 1.0);
    p = step(Variant::proposed, w, objs, p, 1.0);
  }
  for (int i = 0; i < 30; ++i) CHECK((a.x[i] - p.x[i]).norm() < 1e-12);
}

TEST_CASE("tracking means equal local means in every variant") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  const auto inst = make_localization(30, v2(0, 0), 0.01, 2);
  const auto objs = localization_objectives(inst);
  const auto xi = initial_points(30, v2(0, 0), 1.0, 2);
  for (Variant v : kAll) {
    StepSizeMode m;
    m.kind = StepMode::fixed;
    m.value = 0.006;
    const auto t = run(v, w, objs, m, 400, 0.1, xi, v2(0, 0));
    CAPTURE(variant_name(v));
    CHECK(t.tracking_gap_g <= 1e-10);
    CHECK(t.tracking_gap_h <= 1e-10);
    if (uses_ell(v)) CHECK(t.tracking_gap_l <= 1e-10);
  }
}

TEST_CASE("states stay symmetric and floored above the bound") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  const auto objs = localization_objectives(make_localization(30, v2(0, 0), 0.01, 4));
  States s = init_states(objs, initial_points(30, v2(0, 0), 1.0, 4), 0.006);
  for (int k = 0; k < 200; ++k) {
    s = step(Variant::proposed, w, objs, s, 0.1);
    for (int i = 0; i < 30; ++i) {
      CHECK((s.h[i] - s.h[i].transpose()).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(jacobi_eig(floor_hessian(s.h[i], 0.1)).values(0) >= 10.0 - 1e-10);
    }
  }
}

TEST_CASE("exact consensus fixed point is invariant") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  const auto inst = make_localization(30, v2(0, 0), 0.01, 0);
  const auto objs = localization_objectives(inst);
  const Vec xs = centralized_newton(objs, inst.x_true).x;
  States s = init_states(objs, std::vector<Vec>(30, xs), 0.006);
  const auto agg = global_aggregate(objs, xs);
  for (int i = 0; i < 30; ++i) {
    s.g[i] = agg.gradient;
    s.h[i] = agg.hessian;
  }
  const States n = step(Variant::proposed, w, objs, s, 0.1);
  for (int i = 0; i < 30; ++i) {
    CHECK((n.x[i] - xs).norm() <= 1e-10);
    CHECK((n.g[i] - s.g[i]).norm() <= 1e-10);
    CHECK((n.h[i] - s.h[i]).norm() <= 1e-10 * agg.hessian.norm());
  }
}

TEST_CASE("flooring stays inactive on well-conditioned quadratics") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  const auto objs = random_quadratic_set(30, 2, 3, 1.0, 4.0, 1.0);
  StepSizeMode m;
  m.kind = StepMode::fixed;
  m.value = 0.01;
  const auto t = run(Variant::proposed, w, objs, m, 300, 1.0, random_points(30, 3, 2.0), Vec::Zero(2));
  for (const auto& r : t.rows) CHECK(!r.floored);
}

TEST_CASE("relabeling nodes permutes trajectories") {
  const int n = 12;
  const auto w = build_ring(n, 0.6, 0.25, 0.15);
  const auto objs = localization_objectives(make_localization(n, v2(0, 0), 0.01, 6));
  const auto xi = initial_points(n, v2(0, 0), 1.0, 6);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = (5 * i + 3) % n;  // new index of node i
  Mat pw(n, n);
  std::vector<std::shared_ptr<const LocalObjective>> locals(n);
  std::vector<Vec> pxi(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) pw(perm[i], perm[j]) = w.weights(i, j);
    locals[perm[i]] = objs.locals()[i];
    pxi[perm[i]] = xi[i];
  }
  const auto pwt = make_topology(pw);
  const ObjectiveSet pobjs(locals);
  for (Variant v : kAll) {
    States a = init_states(objs, xi, 0.006);
    States b = init_states(pobjs, pxi, 0.006);
    for (int k = 0; k < 30; ++k) {
      a = step(v, w, objs, a, 0.1);
      b = step(v, pwt, pobjs, b, 0.1);
    }
    // Neighbor sums run in a different order after relabeling.
    for (int i = 0; i < n; ++i) CHECK((a.x[i] - b.x[perm[i]]).norm() <= 1e-12);
  }
}

TEST_CASE("divergence guard stops the run") {
  const auto w = build_ring(30, 0.7, 0.15, 0.15);
  const auto objs = localization_objectives(make_localization(30, v2(0, 0), 0.01, 0));
  StepSizeMode m;
  m.kind = StepMode::fixed;
  m.value = 1.0;
  RunOptions opts;
  opts.divergence_threshold = 50.0;
  const auto t = run(Variant::alg_b, w, objs, m, 100, 0.1, initial_points(30, v2(0, 0), 1.0, 0), v2(0, 0), opts);
  REQUIRE(t.diverged);
  CHECK(t.rounds_recorded == t.divergence_round);
  CHECK(t.rows.back().diverged);
  CHECK(static_cast<int>(t.rows.size()) == 30 * t.rounds_recorded);
}

TEST_CASE("run over the localization instance") {
  const auto e = preset("fig1");
  const auto w = build_topology(e.topology);
  const auto p = build_problem(e.runs.front().objective, 30);
  const auto scan = scan_alpha(w, p, 0.02, 200);
  StepSizeMode m;
  m.kind = StepMode::fixed;
  m.value = scan.alpha_opt;
  const auto prop = run(Variant::proposed, w, p.objs, m, 5000, 0.1, p.x_init, p.x_star);
  CHECK(static_cast<int>(prop.rows.size()) == 5000 * 30);
  CHECK(prop.max_err().back() < 1e-8);
  const double fitted = fitted_ratio(prop.max_err());
  CHECK(std::abs(fitted / scan.rate_opt - 1) < 0.05);

  const auto a = run(Variant::alg_a, w, p.objs, m, 5000, 0.1, p.x_init, p.x_star);
  CHECK(a.max_consensus_residual().back() > 1e-3);
}

TEST_CASE("step mode parsing") {
  CHECK(parse_step_mode("fixed:0.25").value == 0.25);
  CHECK(parse_step_mode("offline").kind == StepMode::offline);
  CHECK(parse_step_mode("adaptive").kind == StepMode::adaptive);
  CHECK(parse_step_mode("global").kind == StepMode::global);
  for (const char* bad : {"fixed:", "fixed:1.5", "fixed:abc", "fixed:0.1x", "newton"}) {
    CAPTURE(bad);
    try {
      parse_step_mode(bad);
      FAIL("accepted");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::config);
    }
  }
  CHECK(parse_variant("B") == Variant::alg_b);
  CHECK_THROWS_AS(parse_variant("newton"), Error);

  const auto w = build_ring(5, 0.6, 0.2, 0.2);
  const auto objs = random_quadratic_set(5, 2, 1, 1.0, 2.0, 1.0);
  StepSizeMode g;
  g.kind = StepMode::global;
  g.gamma = 2.0;
  CHECK_THROWS_AS(run(Variant::vzcps, w, objs, g, 10, 1.0, random_points(5, 0, 1.0), Vec::Zero(2)), Error);
}
