#include "trigs/dopri5.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trigs/errors.hpp"

namespace trigs {

namespace {

// Butcher tableau (Hairer, Nørsett & Wanner, DOPRI5).
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// dense output
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// PI controller constants
constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;
constexpr double kExpo = 0.2 - kBeta * 0.75;
constexpr double kShrinkMax = 5.0;  // h_new >= h / 5
constexpr double kGrowMax = 10.0;  // h_new <= 10 h

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                  const Eigen::VectorXd& y1, double rtol, double atol) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sk = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sk;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(err.size()));
}

}  // namespace

double DormandPrince5::initial_step(const Rhs& f, double t0, const State& y0, const State& f0,
                                    double max_step, Stats& stats) const {
  const auto n = static_cast<double>(y0.size());
  State sk = (opt_.atol + opt_.rtol * y0.array().abs()).matrix();
  const double dnf = std::sqrt((f0.array() / sk.array()).square().sum() / n);
  const double dny = std::sqrt((y0.array() / sk.array()).square().sum() / n);
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
  h = std::min(h, max_step);
  State y1 = y0 + h * f0;
  State f1(y0.size());
  f(t0 + h, y1, f1);
  ++stats.rhs_evals;
  const double der2 = std::sqrt(((f1 - f0).array() / sk.array()).square().sum() / n) / h;
  const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
  // A zero component with tiny atol can push the estimate below what t can
  // resolve; error control shrinks from the floor if it is too large.
  const double floor = 100.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t0), max_step);
  return std::max(std::min({100.0 * h, h1, max_step}), floor);
}

DormandPrince5::Stats DormandPrince5::solve(const Rhs& f, double t0, const State& y0,
                                            double t_end, std::span<const double> outputs,
                                            const Observer& observe) const {
  Stats stats;
  const auto n = y0.size();
  const double span = t_end - t0;
  if (!(span > 0.0)) throw InvalidArgument("integration span must be positive");
  const double max_step = opt_.max_step > 0.0 ? std::min(opt_.max_step, span) : span;

  State y = y0;
  State k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
  f(t0, y, k1);
  ++stats.rhs_evals;
  if (!k1.allFinite()) throw IntegrationError("non-finite derivative at t0", t0, y);

  std::size_t next_out = 0;
  while (next_out < outputs.size() && outputs[next_out] <= t0) {
    observe(outputs[next_out], y);
    ++next_out;
  }

  double t = t0;
  double h = opt_.initial_step > 0.0 ? std::min(opt_.initial_step, max_step)
                                     : initial_step(f, t0, y, k1, max_step, stats);
  double fac_old = 1e-4;
  bool last_rejected = false;
  const double uround = std::numeric_limits<double>::epsilon();

  while (t < t_end) {
    if (stats.steps + stats.rejected >= opt_.max_steps) {
      throw IntegrationError("step budget exhausted", t, y);
    }
    if (0.1 * std::abs(h) <= std::abs(t) * uround) {
      throw IntegrationError("step size underflow", t, y);
    }
    bool final_step = false;
    if (t + 1.01 * h >= t_end) {
      h = t_end - t;
      final_step = true;
    }

    ytmp = y + h * a21 * k1;
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    const double t_new = final_step ? t_end : t + h;
    f(t_new, ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t_new, ynew, k7);
    stats.rhs_evals += 6;

    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, y, ynew, opt_.rtol, opt_.atol);
    if (!std::isfinite(en) || !ynew.allFinite()) {
      if (!ynew.allFinite() && !y.allFinite()) throw IntegrationError("non-finite state", t, y);
      // Treat as a hard rejection and retry with a much smaller step.
      h *= 0.1;
      ++stats.rejected;
      last_rejected = true;
      continue;
    }

    const double fac11 = std::pow(en, kExpo);
    double fac = fac11 / std::pow(fac_old, kBeta);
    fac = std::clamp(fac / kSafety, 1.0 / kGrowMax, kShrinkMax);
    double h_new = h / fac;

    if (en <= 1.0) {
      fac_old = std::max(en, 1e-4);
      ++stats.steps;

      if (next_out < outputs.size() && outputs[next_out] <= t_new) {
        const State r1 = y;
        const State r2 = ynew - y;
        const State r3 = h * k1 - r2;
        const State r4 = r2 - h * k7 - r3;
        const State r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        while (next_out < outputs.size() && outputs[next_out] <= t_new) {
          const double s = (outputs[next_out] - t) / h;
          const double s1 = 1.0 - s;
          if (outputs[next_out] == t_new) {
            observe(outputs[next_out], ynew);
          } else {
            observe(outputs[next_out], r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5))));
          }
          ++next_out;
        }
      }

      k1 = k7;
      y = ynew;
      t = t_new;
      if (!y.allFinite()) throw IntegrationError("non-finite state", t, y);
      h_new = std::min(h_new, max_step);
      if (last_rejected) h_new = std::min(h_new, h);
      last_rejected = false;
      h = h_new;
    } else {
      h_new = h / std::min(kShrinkMax, fac11 / kSafety);
      ++stats.rejected;
      last_rejected = true;
      h = h_new;
    }
  }
  return stats;
}

}  // namespace trigs
