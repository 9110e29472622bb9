#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace dnc {

class LocalObjective {
 public:
  virtual ~LocalObjective() = default;
  virtual int dim() const = 0;
  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;
  virtual Mat hessian(const Vec& x) const = 0;
};

// (|x - a|^2 - z)^2
class LocalizationObjective final : public LocalObjective {
 public:
  LocalizationObjective(Vec anchor, double measurement);
  int dim() const override { return static_cast<int>(anchor_.size()); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  Mat hessian(const Vec& x) const override;

  const Vec& anchor() const { return anchor_; }
  double measurement() const { return z_; }

 private:
  Vec anchor_;
  double z_;
};

// 0.5 x^T Q x + c^T x
class QuadraticObjective final : public LocalObjective {
 public:
  QuadraticObjective(Mat q, Vec c);
  int dim() const override { return static_cast<int>(c_.size()); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  Mat hessian(const Vec&) const override { return q_; }

  const Mat& q() const { return q_; }
  const Vec& c() const { return c_; }

 private:
  Mat q_;
  Vec c_;
};

class ObjectiveSet {
 public:
  ObjectiveSet() = default;
  explicit ObjectiveSet(std::vector<std::shared_ptr<const LocalObjective>> locals);

  int size() const { return static_cast<int>(locals_.size()); }
  int dim() const { return dim_; }
  const LocalObjective& operator[](int i) const { return *locals_[static_cast<std::size_t>(i)]; }
  const std::vector<std::shared_ptr<const LocalObjective>>& locals() const { return locals_; }

 private:
  std::vector<std::shared_ptr<const LocalObjective>> locals_;
  int dim_ = 0;
};

struct LocalizationInstance {
  int node_count = 0;
  int dim = 2;
  double noise_var = 0.0;
  std::uint64_t seed = 0;
  Vec x_true;
  std::vector<Vec> anchors;
  Vec measurements;
};

// Anchors ~ N(x_true, anchor_var I), z = |x_true - a|^2 + N(0, noise_var).
LocalizationInstance make_localization(int nodes, const Vec& x_true, double noise_var, std::uint64_t seed,
                                       double anchor_var = 100.0);
ObjectiveSet localization_objectives(const LocalizationInstance& inst);

struct LocalEval {
  double value;
  Vec gradient;
  Mat hessian;
};
LocalEval localization_value_grad_hess(const LocalizationInstance& inst, int i, const Vec& x);

// Header line: I N sigma2 seed x_true..., then one line per node: a^i z^i.
void save_instance(const LocalizationInstance& inst, const std::string& path);
LocalizationInstance load_instance(const std::string& path);

// Initial points x^i ~ N(center, spread^2 I), drawn from the init substream.
std::vector<Vec> initial_points(int nodes, const Vec& center, double spread, std::uint64_t seed);

// Random strongly convex quadratics: Hessian eigenvalues uniform in
// [eig_lo, eig_hi] with random rotation, minimizers ~ N(0, center_spread^2 I).
ObjectiveSet random_quadratic_set(int nodes, int dim, std::uint64_t seed, double eig_lo, double eig_hi,
                                  double center_spread);
// First line "I N", then per node N*N entries of Q (row-major) followed by N entries of c.
ObjectiveSet load_quadratic_set(const std::string& path);
void save_quadratic_set(const ObjectiveSet& set, const std::string& path);

// hessian(x) x - gradient(x)
Vec ell_function(const LocalObjective& obj, const Vec& x);

struct Aggregate {
  double value;
  Vec gradient;
  Mat hessian;
};
Aggregate global_aggregate(const ObjectiveSet& objs, const Vec& x);

struct NewtonResult {
  Vec x;
  int iterations = 0;
  double grad_norm = 0.0;
};
NewtonResult centralized_newton(const ObjectiveSet& objs, const Vec& x0, double tol = 1e-10, int max_iter = 100);

// Sampled estimates of the three global-convergence constants over a box:
// beta >= sup |inv(grad^2 f)|, gamma >= sup |grad^2 f^i|, delta >= Hessian
// Lipschitz constant (Frobenius).
struct AssumptionEstimate {
  double beta;
  double gamma;
  double delta;
  bool convex_on_box;  // false when some sampled aggregate Hessian is not positive definite
};
AssumptionEstimate estimate_assumption_constants(const ObjectiveSet& objs, const Vec& lo, const Vec& hi, int samples,
                                                 std::uint64_t seed);

}  // namespace dnc
