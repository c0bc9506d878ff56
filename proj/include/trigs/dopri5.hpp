#pragma once

#include <functional>
#include <span>

#include <Eigen/Dense>

namespace trigs {

/// Dormand–Prince 5(4) embedded Runge–Kutta pair with PI step-size control
/// and the 4th-order continuous extension for dense output.
class DormandPrince5 {
 public:
  using State = Eigen::VectorXd;
  using Rhs = std::function<void(double t, const State& y, State& dydt)>;
  using Observer = std::function<void(double t, const State& y)>;

  struct Options {
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_step = 0.0;      // 0: no limit beyond the integration span
    double initial_step = 0.0;  // 0: automatic
    long max_steps = 10'000'000;
  };

  struct Stats {
    long steps = 0;     // accepted
    long rejected = 0;
    long rhs_evals = 0;
  };

  explicit DormandPrince5(Options options) : opt_(options) {}

  /// Integrates y' = f(t, y) from t0 to t_end and calls `observe` at every
  /// time in `outputs` (ascending, inside [t0, t_end]) with the interpolated
  /// state. Throws IntegrationError on step underflow, non-finite state or
  /// exhausted step budget.
  Stats solve(const Rhs& f, double t0, const State& y0, double t_end,
              std::span<const double> outputs, const Observer& observe) const;

 private:
  double initial_step(const Rhs& f, double t0, const State& y0, const State& f0,
                      double max_step, Stats& stats) const;

  Options opt_;
};

}  // namespace trigs
