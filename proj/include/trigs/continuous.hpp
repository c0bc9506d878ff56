#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "trigs/objectives.hpp"
#include "trigs/schedules.hpp"

namespace trigs {

// ẍ + δ√ε(t) ẋ + ∇f(x) + ε(t)(x − x_d) = 0
struct TrigsKind {
  double delta = 2.0;
  TikhonovSchedule schedule;
  std::optional<Vector> anchor;
};

// ẍ + (α/t) ẋ + ∇f(x) + ε(t) x = 0, ε ≡ 0 when no schedule is given
struct AvdKind {
  double alpha = 3.0;
  std::optional<TikhonovSchedule> schedule;
};

// ẍ + 2√μ ẋ + ∇f(x) = 0 for a μ-strongly convex f
struct HeavyBallKind {
  double mu = 1.0;
};

using DynamicsKind = std::variant<TrigsKind, AvdKind, HeavyBallKind>;

struct DynamicsSpec {
  DynamicsKind kind;
  Objective objective;

  static DynamicsSpec trigs(Objective f, double delta, TikhonovSchedule schedule,
                            std::optional<Vector> anchor = std::nullopt);
  static DynamicsSpec avd(Objective f, double alpha,
                          std::optional<TikhonovSchedule> schedule = std::nullopt);
  /// Requires mu > 0 and mu equal to the objective's strong-convexity modulus.
  static DynamicsSpec heavy_ball(Objective f, double mu);

  double damping(double t) const;
  /// ε(t), or 0 for dynamics without a Tikhonov term.
  double tikhonov(double t) const;
  /// Point the Tikhonov term pulls toward (zero unless anchored).
  Vector anchor() const;
  const TikhonovSchedule* schedule() const;
};

/// First-order field (ẋ, v̇) = (v, −γ(t)v − ∇f(x) − ε(t)(x − x_d)).
std::pair<Vector, Vector> vector_field(const DynamicsSpec& spec, double t, const Vector& x,
                                       const Vector& v);

struct Tolerances {
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step = 0.0;  // 0: (t_end − t0) / 50
};

struct Sample {
  double t = 0.0;
  Vector x;
  Vector v;
};

struct IntegratorStats {
  long steps = 0;
  long rejected = 0;
  long rhs_evals = 0;
  double rtol = 0.0;
  double atol = 0.0;
};

struct Trajectory {
  std::vector<Sample> samples;
  IntegratorStats stats;

  std::vector<double> times() const;
};

/// n log-spaced points from a to b inclusive (a > 0).
std::vector<double> log_grid(double a, double b, int n);
/// n equispaced points from a to b inclusive.
std::vector<double> linear_grid(double a, double b, int n);

/// Integrates the dynamic from (x0, v0) at t0 up to t_end with Dormand–Prince
/// 5(4) and samples it on `sample_grid` (default: 200 log-spaced points, or
/// linear when t0 ≤ 0). Deterministic for fixed inputs.
Trajectory integrate(const DynamicsSpec& spec, const Vector& x0, const Vector& v0, double t0,
                     double t_end, const Tolerances& tol = {},
                     std::span<const double> sample_grid = {});

struct EnergySeries {
  std::vector<double> t;
  std::vector<double> values;
  // max over consecutive samples of W(t_{i+1}) − W(t_i), floored at 0
  double max_upward_violation = 0.0;
};

/// W(t) = ½‖ẋ‖² + f(x) + ½ε(t)‖x − x_d‖², nonincreasing along exact trajectories.
double energy_W(const DynamicsSpec& spec, const Sample& s);
EnergySeries energy_W(const DynamicsSpec& spec, const Trajectory& traj);

/// Trajectory CSV: "t,x1..xn,v1..vn,f_gap,dist_min_norm,speed,grad_norm,eps,W".
void write_trajectory_csv(std::ostream& os, const DynamicsSpec& spec, const Trajectory& traj);

}  // namespace trigs
