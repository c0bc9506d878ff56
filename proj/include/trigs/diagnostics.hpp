#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trigs/continuous.hpp"
#include "trigs/discrete.hpp"
#include "trigs/objectives.hpp"
#include "trigs/schedules.hpp"

namespace trigs {

// ---------------------------------------------------------------------------
// Lyapunov energies

struct LyapunovSeries {
  std::vector<double> t;
  std::vector<double> values;
  /// Centered-difference estimate of ℰ' + μℰ − (K‖x*‖²/2)ε^{3/2} at interior
  /// samples; nonpositive for the exact flow.
  std::vector<double> residual;
  double gronwall_residual = 0.0;  // max of residual
};

/// ℰ(t) = f(x) − f* + (ε/2)‖x‖² + ½‖K√ε (x − x*) + ẋ‖², sampled for t ≥ t1.
LyapunovSeries lyapunov_general(const Trajectory& traj, const Objective& f,
                                const TikhonovSchedule& schedule, const Certificate& cert,
                                const Vector& x_star);

/// K for the critical Lyapunov function: K = 2 when α = 3; for α > 3, the
/// midpoint of the feasible members among 64 equispaced candidates in
/// ((α+1)/2, α−1) satisfying (α−K−1)K² − Kc ≤ 0. Throws when none is feasible.
double select_critical_K(double alpha, double c);

struct CriticalLyapunov {
  double K = 0.0;
  std::vector<double> t;
  std::vector<double> values;
  /// sup over the trailing half (log time) of t²ℰ (α > 3) or t²ℰ/ln t (α = 3).
  double tail_statistic = 0.0;
};

/// ℰ(t) = f(x) − f* + (c/2t²)‖x‖² + ½‖(K/t)(x − x*) + ẋ‖² for ε = c/t².
CriticalLyapunov lyapunov_critical(const Trajectory& traj, const Objective& f, double alpha,
                                   double c, double K, const Vector& x_star);

struct DiscreteEnergy {
  std::vector<long> k;
  std::vector<double> values;
  double sup = 0.0;
};

/// E_k = ‖a_{k−1}(x_{k−1} − x*) + b_{k−1}(x_k − x_{k−1} + ∇f(x_k))‖² + d_{k−1}‖x_{k−1}‖²
/// with a_k = a k^{r−1}, b_k = k^r, d_{k−1} = ½ α_k b_k² c/k². Needs 2 < a < α−1,
/// r ∈ [½, 1] and a log with consecutive iterates.
DiscreteEnergy discrete_energy(const IterateLog& log, const Objective& f, double a, double r,
                               double alpha, double c, const Vector& x_star);

// ---------------------------------------------------------------------------
// Rate estimation

struct RateReport {
  std::string quantity;
  double slope = 0.0;
  double intercept = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double rms = 0.0;
  int points = 0;
  int nonpositive = 0;  // dropped from the window
  bool log_correction = false;
  bool exponential = false;  // ln y against t rather than ln t
  std::optional<double> target_slope;
  std::optional<double> margin;
  std::optional<bool> pass;

  /// pass = slope ≤ target + margin (decay at least as fast as the target).
  void judge(double target, double margin_);
};

/// Least-squares line through (ln t, ln y) over the trailing window_fraction
/// of the ln t range. With log_correction y is divided by ln t first.
RateReport rate_fit(std::span<const double> t, std::span<const double> y,
                    double window_fraction = 0.5, bool log_correction = false,
                    std::string quantity = {});

/// Least-squares line through (t, ln y) over the trailing window_fraction of
/// the t range; slope is the exponential rate.
RateReport exp_rate_fit(std::span<const double> t, std::span<const double> y,
                        double window_fraction = 0.5, std::string quantity = {});

// ---------------------------------------------------------------------------
// Distance to the minimum-norm solution

enum class BallRegime { Inside, Outside, Crossing };
std::string to_string(BallRegime r);

struct MinNormGap {
  double final_distance = 0.0;
  double tail_min = 0.0;
  double tail_start = 0.0;
  /// Position of the tail relative to the ball B(0, ‖x*‖).
  BallRegime regime = BallRegime::Crossing;
};

/// Distance at the last point and minimum over the trailing tail_fraction of
/// the ln t range.
MinNormGap min_norm_gap(std::span<const double> t, std::span<const Vector> xs,
                        const Vector& x_star, double tail_fraction = 0.5);
MinNormGap min_norm_gap(const Trajectory& traj, const Vector& x_star, double tail_fraction = 0.5);
MinNormGap min_norm_gap(const IterateLog& log, const Vector& x_star, double tail_fraction = 0.5);

// ---------------------------------------------------------------------------
// Tail statistics for finite-horizon surrogates of o(·)/O(·) claims

/// First index i with t[i] ≥ t_lo (t ascending).
std::size_t lower_index(std::span<const double> t, double t_lo);

/// sup of y over t ∈ [lo, hi].
double window_sup(std::span<const double> t, std::span<const double> y, double lo, double hi);

/// max_j y_j / min_{i<j} y_i − 1, floored at 0: the relative jitter needed
/// for y to count as nonincreasing. Infinite when a positive value follows a zero.
double max_rebound(std::span<const double> y);

/// (Σ_all − Σ_{t < from}) / Σ_all for nonnegative terms; 0 when the total is 0.
double partial_sum_growth(std::span<const double> t, std::span<const double> terms, double from);

}  // namespace trigs
