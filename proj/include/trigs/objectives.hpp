#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace trigs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A convex function on R^n with optional first-order and proximal oracles.
//
// Instances are immutable after construction and every callable is pure, so
// one Objective can be shared by concurrent runs.
struct Objective {
  using Eval = std::function<double(const Vector&)>;
  using Grad = std::function<Vector(const Vector&)>;
  // prox(theta, x) = argmin_u f(u) + |u - x|^2 / (2 theta)
  using Prox = std::function<Vector(double, const Vector&)>;

  std::string name;
  int dim = 0;
  Eval eval;
  Grad grad;
  Prox prox;
  double strong_convexity = 0.0;
  std::optional<double> known_min_value;
  std::optional<Vector> known_min_norm_solution;

  bool smooth() const { return static_cast<bool>(grad); }
  bool has_prox() const { return static_cast<bool>(prox); }

  double operator()(const Vector& x) const { return eval(x); }

  // Throwing accessors used by algorithms that need the oracle.
  Vector gradient(const Vector& x) const;
  Vector proximal(double theta, const Vector& x) const;

  // f(x) - min f, or NaN when the minimum is unknown.
  double gap(const Vector& x) const;
  // |x - x*|, or NaN when x* is unknown.
  double dist_min_norm(const Vector& x) const;
};

/// f(x) = ½‖Ax − b‖². The minimum-norm solution comes from a complete
/// orthogonal decomposition of A, independent of the prox solve.
Objective make_least_squares(const Matrix& A, const Vector& b);

/// f(x) = Σ|x_i|; prox is the componentwise soft threshold.
Objective make_abs(int dim = 1);

/// f ≡ 0 on R^dim.
Objective make_zero(int dim);

/// g(x) = f(x + offset). Minimizer data is shifted; x* is only kept when it
/// stays the minimum-norm point, which holds for offset = 0 only, so it is
/// dropped otherwise.
Objective make_shifted(const Objective& f, const Vector& offset);

/// Soft threshold at level tau, componentwise.
Vector soft_threshold(const Vector& x, double tau);

/// Max over points and coordinate directions of
/// |central difference − ∂_i f| / (1 + |∂_i f|), step 1e-6.
double grad_check(const Objective& obj, std::span<const Vector> points,
                  double step = 1e-6);

/// ‖x − z − θ∇f(z)‖ with z = prox(θ, x); requires a smooth objective.
double prox_residual(const Objective& obj, double theta, const Vector& x);

/// Resolve a registry spec: "ls:<a>,<b>", "quad1d", "abs", "zero:<n>",
/// "matrix:<path>".
Objective resolve_problem(const std::string& spec);

/// Parse the plain-text matrix format: "m n", m rows of A, then one row b.
Objective load_matrix_problem(const std::string& path);

struct ProblemInfo {
  std::string pattern;
  std::string description;
};
std::vector<ProblemInfo> list_problems();

}  // namespace trigs
