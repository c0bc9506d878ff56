#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace trigs {

// ε(t) = c / t^r, r ∈ (0, 2]
struct PowerFamily {
  double c = 1.0;
  double r = 2.0;
};

// ε(t) = 1 / (M t + C)²
struct RationalFamily {
  double M = 1.0;
  double C = 0.0;
};

// ε(t) = c; does not vanish, intended for tests
struct ConstantFamily {
  double c = 1.0;
};

using ScheduleFamily = std::variant<PowerFamily, RationalFamily, ConstantFamily>;

/// A Tikhonov parameter t ↦ ε(t) on [t0, ∞): positive, C¹ and nonincreasing.
class TikhonovSchedule {
 public:
  static TikhonovSchedule power(double c, double r, double t0 = 1.0);
  static TikhonovSchedule rational(double M, double C, double t0 = 1.0);
  static TikhonovSchedule constant(double c, double t0 = 1.0);

  const ScheduleFamily& family() const { return family_; }
  double t0() const { return t0_; }

  double eps(double t) const;
  double eps_dot(double t) const;
  /// (1/√ε)'(t) = −ε̇ / (2 ε^{3/2}), in closed form per family.
  double inv_sqrt_eps_slope(double t) const;

  bool vanishing() const { return !std::holds_alternative<ConstantFamily>(family_); }

  /// Spec string accepted by parse_schedule.
  std::string spec() const;

 private:
  TikhonovSchedule(ScheduleFamily family, double t0) : family_(family), t0_(t0) {}
  void require_domain(double t) const;

  ScheduleFamily family_;
  double t0_;
};

/// "power:c=<v>,r=<v>", "rational:M=<v>,C=<v>" (C defaults to 0), "const:c=<v>".
TikhonovSchedule parse_schedule(const std::string& spec, double t0 = 1.0);

/// Damping scale δ, Lyapunov parameter K and the time t1 from which the
/// controlled-decay bound is checked.
struct Certificate {
  double delta = 2.0;
  double K = 1.5;
  double t1 = 1.0;
};

// Open interval (lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v > lo && v < hi; }
  bool empty() const { return !(lo < hi); }
};

/// (δ/2, δ) for δ ≤ 2, ((δ + √(δ² − 4))/2, δ) for δ > 2.
Interval admissible_K_range(double delta);

/// min(2K − δ, δ − K)
double cd_slope_bound(double delta, double K);

struct CdVerdict {
  bool satisfied = false;
  bool nonincreasing = true;
  double bound = 0.0;         // min(2K − δ, δ − K)
  double max_slope = 0.0;     // max of (1/√ε)' on the grid
  double worst_margin = 0.0;  // min over the grid of bound − slope
  double worst_t = 0.0;
  int grid_size = 0;
};

/// Controlled-decay check on a log-spaced grid over [t1, horizon].
/// Throws InvalidArgument when K is outside admissible_K_range(δ).
CdVerdict cd_check(const TikhonovSchedule& schedule, const Certificate& cert, double horizon,
                   int grid_size = 256);

/// μ(t) = −ε̇/(2ε) + (δ − K)√ε
double mu(const TikhonovSchedule& schedule, const Certificate& cert, double t);

/// ln 𝔐(t) = ∫_{t1}^t μ, closed form for every shipped family.
double log_big_m(const TikhonovSchedule& schedule, const Certificate& cert, double t);
double big_m(const TikhonovSchedule& schedule, const Certificate& cert, double t);
/// 𝔐(t) by adaptive Gauss–Kronrod quadrature of μ; cross-checks the closed forms.
double big_m_quadrature(const TikhonovSchedule& schedule, const Certificate& cert, double t);

enum class BoundIntegration { Auto, Quadrature };

struct RateBound {
  double value = 0.0;          // integral_term + initial_term
  double integral_term = 0.0;  // (K‖x*‖²/2) ∫ ε^{3/2} 𝔐 / 𝔐(t)
  double initial_term = 0.0;   // E(t1) / 𝔐(t)
  bool closed_form = false;
};

/// Value bound f(x(t)) − min f ≤ (K‖x*‖²/2)(1/𝔐(t))∫_{t1}^t ε^{3/2}𝔐 + E(t1)/𝔐(t).
/// Closed form for the rational family unless Quadrature is forced.
RateBound rate_bound(const TikhonovSchedule& schedule, const Certificate& cert,
                     double x_star_norm, double energy_t1, double t,
                     BoundIntegration method = BoundIntegration::Auto);

/// rate_bound on an ascending grid of times ≥ t1, accumulating the integral
/// panel by panel.
std::vector<double> rate_bound_series(const TikhonovSchedule& schedule, const Certificate& cert,
                                      double x_star_norm, double energy_t1,
                                      std::span<const double> times);

/// 1/(M₁t + C₁)² with M₁ = min(2K − δ, δ − K), C₁ = 1/√ε(t1) − M₁t1; a lower
/// envelope of ε for any schedule that passes cd_check.
double eps_lower_envelope(const TikhonovSchedule& schedule, const Certificate& cert, double t);

/// Scans 64 equispaced candidates inside admissible_K_range(δ) and returns the
/// midpoint of those passing cd_check on [t1, horizon], if any.
std::optional<double> select_K(const TikhonovSchedule& schedule, double delta, double t1,
                               double horizon);

}  // namespace trigs
