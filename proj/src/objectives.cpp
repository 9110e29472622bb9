#include "objectives.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace dnc {

LocalizationObjective::LocalizationObjective(Vec anchor, double measurement)
    : anchor_(std::move(anchor)), z_(measurement) {}

double LocalizationObjective::value(const Vec& x) const {
  const double r = (x - anchor_).squaredNorm() - z_;
  return r * r;
}

Vec LocalizationObjective::gradient(const Vec& x) const {
  const Vec d = x - anchor_;
  return 4.0 * (d.squaredNorm() - z_) * d;
}

Mat LocalizationObjective::hessian(const Vec& x) const {
  const Vec d = x - anchor_;
  const double r = d.squaredNorm() - z_;
  Mat h = 8.0 * d * d.transpose();
  h.diagonal().array() += 4.0 * r;
  return h;
}

QuadraticObjective::QuadraticObjective(Mat q, Vec c) : q_(std::move(q)), c_(std::move(c)) {
  require(q_.rows() == q_.cols() && q_.rows() == c_.size(), "QuadraticObjective: Q must be N x N and c length N");
  require(max_asymmetry(q_) <= 1e-12 * std::max(1.0, q_.cwiseAbs().maxCoeff()), "QuadraticObjective: Q must be symmetric");
}

double QuadraticObjective::value(const Vec& x) const { return 0.5 * x.dot(q_ * x) + c_.dot(x); }

Vec QuadraticObjective::gradient(const Vec& x) const { return q_ * x + c_; }

ObjectiveSet::ObjectiveSet(std::vector<std::shared_ptr<const LocalObjective>> locals) : locals_(std::move(locals)) {
  require(!locals_.empty(), "ObjectiveSet: need at least one local objective");
  dim_ = locals_.front()->dim();
  for (const auto& l : locals_) require(l && l->dim() == dim_, "ObjectiveSet: all local objectives must share one dimension");
}

LocalizationInstance make_localization(int nodes, const Vec& x_true, double noise_var, std::uint64_t seed,
                                       double anchor_var) {
  require(nodes >= 1, "make_localization: need at least one node");
  require(noise_var >= 0.0 && anchor_var >= 0.0, "make_localization: variances must be nonnegative");
  LocalizationInstance inst;
  inst.node_count = nodes;
  inst.dim = static_cast<int>(x_true.size());
  inst.noise_var = noise_var;
  inst.seed = seed;
  inst.x_true = x_true;
  Rng anchors(seed, Stream::anchors);
  Rng noise(seed, Stream::noise);
  const double as = std::sqrt(anchor_var);
  const double ns = std::sqrt(noise_var);
  inst.measurements.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    Vec a(inst.dim);
    for (int d = 0; d < inst.dim; ++d) a(d) = x_true(d) + as * anchors.normal();
    inst.measurements(i) = (x_true - a).squaredNorm() + ns * noise.normal();
    inst.anchors.push_back(a);
  }
  return inst;
}

ObjectiveSet localization_objectives(const LocalizationInstance& inst) {
  std::vector<std::shared_ptr<const LocalObjective>> locals;
  for (int i = 0; i < inst.node_count; ++i)
    locals.push_back(std::make_shared<LocalizationObjective>(inst.anchors[i], inst.measurements(i)));
  return ObjectiveSet(std::move(locals));
}

LocalEval localization_value_grad_hess(const LocalizationInstance& inst, int i, const Vec& x) {
  require(i >= 0 && i < inst.node_count, "localization_value_grad_hess: node index out of range");
  require(x.size() == inst.dim && x.allFinite(), "localization_value_grad_hess: x must be finite with matching dimension");
  const LocalizationObjective f(inst.anchors[i], inst.measurements(i));
  return {f.value(x), f.gradient(x), f.hessian(x)};
}

void save_instance(const LocalizationInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write instance file '" + path + "'");
  out << std::setprecision(17);
  out << inst.node_count << " " << inst.dim << " " << inst.noise_var << " " << inst.seed;
  for (int d = 0; d < inst.dim; ++d) out << " " << inst.x_true(d);
  out << "\n";
  for (int i = 0; i < inst.node_count; ++i) {
    for (int d = 0; d < inst.dim; ++d) out << inst.anchors[i](d) << " ";
    out << inst.measurements(i) << "\n";
  }
}

LocalizationInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config, "instance file '" + path + "' cannot be opened");
  LocalizationInstance inst;
  if (!(in >> inst.node_count >> inst.dim >> inst.noise_var >> inst.seed) || inst.node_count <= 0 || inst.dim <= 0)
    fail(ErrorCode::config, "instance file '" + path + "': malformed header");
  inst.x_true.resize(inst.dim);
  for (int d = 0; d < inst.dim; ++d)
    if (!(in >> inst.x_true(d))) fail(ErrorCode::config, "instance file '" + path + "': malformed x_true");
  inst.measurements.resize(inst.node_count);
  for (int i = 0; i < inst.node_count; ++i) {
    Vec a(inst.dim);
    for (int d = 0; d < inst.dim; ++d)
      if (!(in >> a(d))) fail(ErrorCode::config, "instance file '" + path + "': malformed anchor on node line " + std::to_string(i));
    if (!(in >> inst.measurements(i)))
      fail(ErrorCode::config, "instance file '" + path + "': malformed measurement on node line " + std::to_string(i));
    inst.anchors.push_back(a);
  }
  return inst;
}

std::vector<Vec> initial_points(int nodes, const Vec& center, double spread, std::uint64_t seed) {
  Rng rng(seed, Stream::init);
  std::vector<Vec> out;
  for (int i = 0; i < nodes; ++i) {
    Vec x(center.size());
    for (Eigen::Index d = 0; d < center.size(); ++d) x(d) = center(d) + spread * rng.normal();
    out.push_back(x);
  }
  return out;
}

ObjectiveSet random_quadratic_set(int nodes, int dim, std::uint64_t seed, double eig_lo, double eig_hi,
                                  double center_spread) {
  require(nodes >= 1 && dim >= 1, "random_quadratic_set: need positive node count and dimension");
  require(0.0 < eig_lo && eig_lo <= eig_hi, "random_quadratic_set: need 0 < eig_lo <= eig_hi");
  Rng rng(seed, Stream::quadratic);
  std::vector<std::shared_ptr<const LocalObjective>> locals;
  for (int i = 0; i < nodes; ++i) {
    Mat g(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) g(r, c) = rng.normal();
    const Mat q = Eigen::HouseholderQR<Mat>(g).householderQ() * Mat::Identity(dim, dim);
    Vec lam(dim);
    for (int d = 0; d < dim; ++d) lam(d) = eig_lo + (eig_hi - eig_lo) * rng.uniform();
    Mat h = q * lam.asDiagonal() * q.transpose();
    h = 0.5 * (h + h.transpose());
    Vec center(dim);
    for (int d = 0; d < dim; ++d) center(d) = center_spread * rng.normal();
    locals.push_back(std::make_shared<QuadraticObjective>(h, -(h * center)));
  }
  return ObjectiveSet(std::move(locals));
}

ObjectiveSet load_quadratic_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config, "quadratic set file '" + path + "' cannot be opened");
  int nodes = 0, dim = 0;
  if (!(in >> nodes >> dim) || nodes <= 0 || dim <= 0)
    fail(ErrorCode::config, "quadratic set file '" + path + "': first line must be 'I N'");
  std::vector<std::shared_ptr<const LocalObjective>> locals;
  for (int i = 0; i < nodes; ++i) {
    Mat q(dim, dim);
    Vec c(dim);
    for (int r = 0; r < dim; ++r)
      for (int k = 0; k < dim; ++k)
        if (!(in >> q(r, k))) fail(ErrorCode::config, "quadratic set file '" + path + "': malformed Q on node line " + std::to_string(i));
    for (int k = 0; k < dim; ++k)
      if (!(in >> c(k))) fail(ErrorCode::config, "quadratic set file '" + path + "': malformed c on node line " + std::to_string(i));
    if (max_asymmetry(q) > 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff()))
      fail(ErrorCode::config, "quadratic set file '" + path + "': Q on node line " + std::to_string(i) + " is not symmetric");
    locals.push_back(std::make_shared<QuadraticObjective>(q, c));
  }
  return ObjectiveSet(std::move(locals));
}

void save_quadratic_set(const ObjectiveSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write quadratic set file '" + path + "'");
  out << std::setprecision(17) << set.size() << " " << set.dim() << "\n";
  for (int i = 0; i < set.size(); ++i) {
    const auto* q = dynamic_cast<const QuadraticObjective*>(&set[i]);
    if (!q) fail(ErrorCode::invalid_argument, "save_quadratic_set: node " + std::to_string(i) + " is not quadratic");
    bool first = true;
    for (int r = 0; r < set.dim(); ++r)
      for (int k = 0; k < set.dim(); ++k) {
        out << (first ? "" : " ") << q->q()(r, k);
        first = false;
      }
    for (int k = 0; k < set.dim(); ++k) out << " " << q->c()(k);
    out << "\n";
  }
}

Vec ell_function(const LocalObjective& obj, const Vec& x) { return obj.hessian(x) * x - obj.gradient(x); }

Aggregate global_aggregate(const ObjectiveSet& objs, const Vec& x) {
  const int n = objs.dim();
  Aggregate a{0.0, Vec::Zero(n), Mat::Zero(n, n)};
  for (int i = 0; i < objs.size(); ++i) {
    a.value += objs[i].value(x);
    a.gradient += objs[i].gradient(x);
    a.hessian += objs[i].hessian(x);
  }
  const double inv = 1.0 / objs.size();
  a.value *= inv;
  a.gradient *= inv;
  a.hessian *= inv;
  return a;
}

NewtonResult centralized_newton(const ObjectiveSet& objs, const Vec& x0, double tol, int max_iter) {
  require(x0.size() == objs.dim() && x0.allFinite(), "centralized_newton: x0 must be finite with matching dimension");
  NewtonResult res;
  res.x = x0;
  for (int it = 0; it <= max_iter; ++it) {
    const Aggregate agg = global_aggregate(objs, res.x);
    res.grad_norm = agg.gradient.norm();
    res.iterations = it;
    if (res.grad_norm <= tol) return res;
    if (it == max_iter) break;
    const SymEig e = jacobi_eig(agg.hessian);
    const double amax = e.values.cwiseAbs().maxCoeff();
    const double amin = e.values.cwiseAbs().minCoeff();
    if (amin == 0.0 || amax / amin > 1e14)
      fail(ErrorCode::numerical, "centralized_newton: singular Hessian (condition estimate > 1e14)");
    const Vec step = e.vectors * (e.values.cwiseInverse().asDiagonal() * (e.vectors.transpose() * agg.gradient));
    res.x -= step;
    if (!res.x.allFinite()) fail(ErrorCode::numerical, "centralized_newton: iterate became non-finite");
    // Gradient can sit on a roundoff floor above tol when |x| is large.
    if (step.norm() <= 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + res.x.norm())) {
      res.grad_norm = global_aggregate(objs, res.x).gradient.norm();
      res.iterations = it + 1;
      return res;
    }
  }
  fail(ErrorCode::numerical, "centralized_newton: no convergence within " + std::to_string(max_iter) + " iterations");
}

AssumptionEstimate estimate_assumption_constants(const ObjectiveSet& objs, const Vec& lo, const Vec& hi, int samples,
                                                 std::uint64_t seed) {
  require(lo.size() == objs.dim() && hi.size() == objs.dim(), "estimate_assumption_constants: box dimension mismatch");
  require(samples >= 2, "estimate_assumption_constants: need at least 2 samples");
  Rng rng(seed, Stream::sampling);
  auto draw = [&]() {
    Vec x(lo.size());
    for (Eigen::Index d = 0; d < lo.size(); ++d) x(d) = lo(d) + (hi(d) - lo(d)) * rng.uniform();
    return x;
  };
  AssumptionEstimate est{0.0, 0.0, 0.0, true};
  for (int s = 0; s < samples; ++s) {
    const Vec x = draw();
    const Vec y = draw();
    const double dist = (x - y).norm();
    const SymEig e = jacobi_eig(global_aggregate(objs, x).hessian);
    if (e.values(0) <= 0.0)
      est.convex_on_box = false;
    else
      est.beta = std::max(est.beta, 1.0 / e.values(0));
    for (int i = 0; i < objs.size(); ++i) {
      const Mat hx = objs[i].hessian(x);
      est.gamma = std::max(est.gamma, spectral_norm(hx));
      if (dist > 0) est.delta = std::max(est.delta, (hx - objs[i].hessian(y)).norm() / dist);
    }
  }
  if (!est.convex_on_box) est.beta = std::numeric_limits<double>::infinity();
  return est;
}

}  // namespace dnc
