#include "trigs/schedules.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "quadrature.hpp"
#include "text_util.hpp"
#include "trigs/errors.hpp"

namespace trigs {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void require_t0(double t0) {
  if (!(t0 > 0.0) || !std::isfinite(t0)) throw InvalidArgument("schedule: t0 must be > 0");
}

}  // namespace

TikhonovSchedule TikhonovSchedule::power(double c, double r, double t0) {
  require_t0(t0);
  if (!(c > 0.0)) throw InvalidArgument("power schedule: c must be > 0");
  if (!(r > 0.0 && r <= 2.0)) throw InvalidArgument("power schedule: r out of (0,2]");
  return {PowerFamily{c, r}, t0};
}

TikhonovSchedule TikhonovSchedule::rational(double M, double C, double t0) {
  require_t0(t0);
  if (!(M > 0.0)) throw InvalidArgument("rational schedule: M must be > 0");
  if (!(C >= 0.0)) throw InvalidArgument("rational schedule: C must be >= 0");
  return {RationalFamily{M, C}, t0};
}

TikhonovSchedule TikhonovSchedule::constant(double c, double t0) {
  require_t0(t0);
  if (!(c > 0.0)) throw InvalidArgument("constant schedule: c must be > 0");
  return {ConstantFamily{c}, t0};
}

void TikhonovSchedule::require_domain(double t) const {
  if (!(t >= t0_)) {
    throw InvalidArgument("schedule evaluated at t = " + fmt_num(t) + " < t0 = " + fmt_num(t0_));
  }
}

double TikhonovSchedule::eps(double t) const {
  require_domain(t);
  return std::visit(Overloaded{
                        [t](const PowerFamily& p) { return p.c / std::pow(t, p.r); },
                        [t](const RationalFamily& q) {
                          const double s = q.M * t + q.C;
                          return 1.0 / (s * s);
                        },
                        [](const ConstantFamily& k) { return k.c; },
                    },
                    family_);
}

double TikhonovSchedule::eps_dot(double t) const {
  require_domain(t);
  return std::visit(Overloaded{
                        [t](const PowerFamily& p) { return -p.r * p.c / std::pow(t, p.r + 1.0); },
                        [t](const RationalFamily& q) {
                          const double s = q.M * t + q.C;
                          return -2.0 * q.M / (s * s * s);
                        },
                        [](const ConstantFamily&) { return 0.0; },
                    },
                    family_);
}

double TikhonovSchedule::inv_sqrt_eps_slope(double t) const {
  require_domain(t);
  return std::visit(Overloaded{
                        [t](const PowerFamily& p) {
                          return 0.5 * p.r * std::pow(t, 0.5 * p.r - 1.0) / std::sqrt(p.c);
                        },
                        [](const RationalFamily& q) { return q.M; },
                        [](const ConstantFamily&) { return 0.0; },
                    },
                    family_);
}

std::string TikhonovSchedule::spec() const {
  return std::visit(
      Overloaded{
          [](const PowerFamily& p) { return "power:c=" + fmt_num(p.c) + ",r=" + fmt_num(p.r); },
          [](const RationalFamily& q) {
            return "rational:M=" + fmt_num(q.M) + ",C=" + fmt_num(q.C);
          },
          [](const ConstantFamily& k) { return "const:c=" + fmt_num(k.c); },
      },
      family_);
}

TikhonovSchedule parse_schedule(const std::string& spec, double t0) {
  const std::string_view s = detail::trim(spec);
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) {
    throw InvalidArgument("schedule '" + std::string(s) + "': expected <family>:<params>");
  }
  const auto family = s.substr(0, colon);
  double c = std::nan(""), r = std::nan(""), M = std::nan(""), C = 0.0;
  for (auto kv : detail::split(s.substr(colon + 1), ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("schedule '" + std::string(s) + "': expected key=value, got '" +
                            std::string(kv) + "'");
    }
    const auto key = detail::trim(kv.substr(0, eq));
    const auto val = detail::parse_double(kv.substr(eq + 1));
    if (!val) throw InvalidArgument("schedule '" + std::string(s) + "': bad value for " + std::string(key));
    if (key == "c" && family != "rational") {
      c = *val;
    } else if (key == "r" && family == "power") {
      r = *val;
    } else if (key == "M" && family == "rational") {
      M = *val;
    } else if (key == "C" && family == "rational") {
      C = *val;
    } else {
      throw InvalidArgument("schedule '" + std::string(s) + "': unknown parameter '" +
                            std::string(key) + "'");
    }
  }
  if (family == "power") {
    if (std::isnan(c) || std::isnan(r)) throw InvalidArgument("power schedule needs c and r");
    return TikhonovSchedule::power(c, r, t0);
  }
  if (family == "rational") {
    if (std::isnan(M)) throw InvalidArgument("rational schedule needs M");
    return TikhonovSchedule::rational(M, C, t0);
  }
  if (family == "const") {
    if (std::isnan(c)) throw InvalidArgument("const schedule needs c");
    return TikhonovSchedule::constant(c, t0);
  }
  throw InvalidArgument("unknown schedule family '" + std::string(family) + "'");
}

Interval admissible_K_range(double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("delta must be > 0");
  if (delta <= 2.0) return {delta / 2.0, delta};
  return {(delta + std::sqrt(delta * delta - 4.0)) / 2.0, delta};
}

double cd_slope_bound(double delta, double K) { return std::min(2.0 * K - delta, delta - K); }

CdVerdict cd_check(const TikhonovSchedule& schedule, const Certificate& cert, double horizon,
                   int grid_size) {
  const auto range = admissible_K_range(cert.delta);
  if (!range.contains(cert.K)) {
    throw InvalidArgument("K = " + fmt_num(cert.K) + " outside admissible interval (" +
                          fmt_num(range.lo) + ", " + fmt_num(range.hi) + ") for delta = " +
                          fmt_num(cert.delta));
  }
  if (cert.t1 < schedule.t0()) throw InvalidArgument("cd_check: t1 < t0");
  if (!(horizon > cert.t1)) throw InvalidArgument("cd_check: horizon must exceed t1");
  if (grid_size < 2) throw InvalidArgument("cd_check: grid_size must be >= 2");

  CdVerdict v;
  v.bound = cd_slope_bound(cert.delta, cert.K);
  v.grid_size = grid_size;
  v.worst_margin = std::numeric_limits<double>::infinity();
  v.max_slope = -std::numeric_limits<double>::infinity();
  double prev_eps = std::numeric_limits<double>::infinity();
  const double ratio = std::log(horizon / cert.t1);
  for (int i = 0; i < grid_size; ++i) {
    const double t = (i == grid_size - 1)
                         ? horizon
                         : cert.t1 * std::exp(ratio * static_cast<double>(i) / (grid_size - 1));
    const double slope = schedule.inv_sqrt_eps_slope(t);
    const double margin = v.bound - slope;
    if (margin < v.worst_margin) {
      v.worst_margin = margin;
      v.worst_t = t;
    }
    v.max_slope = std::max(v.max_slope, slope);
    const double e = schedule.eps(t);
    if (schedule.eps_dot(t) > 0.0 || e > prev_eps) v.nonincreasing = false;
    prev_eps = e;
  }
  v.satisfied = v.nonincreasing && v.worst_margin >= 0.0;
  return v;
}

double mu(const TikhonovSchedule& schedule, const Certificate& cert, double t) {
  const double e = schedule.eps(t);
  return -schedule.eps_dot(t) / (2.0 * e) + (cert.delta - cert.K) * std::sqrt(e);
}

double log_big_m(const TikhonovSchedule& schedule, const Certificate& cert, double t) {
  const double t1 = cert.t1;
  const double dk = cert.delta - cert.K;
  return std::visit(
      Overloaded{
          [&](const PowerFamily& p) {
            const double sc = std::sqrt(p.c);
            if (p.r == 2.0) return (1.0 + dk * sc) * std::log(t / t1);
            const double q = 1.0 - 0.5 * p.r;
            return 0.5 * p.r * std::log(t / t1) +
                   dk * sc / q * (std::pow(t, q) - std::pow(t1, q));
          },
          [&](const RationalFamily& q) {
            const double p = (q.M + dk) / q.M;
            return p * std::log((q.M * t + q.C) / (q.M * t1 + q.C));
          },
          [&](const ConstantFamily& k) { return dk * std::sqrt(k.c) * (t - t1); },
      },
      schedule.family());
}

double big_m(const TikhonovSchedule& schedule, const Certificate& cert, double t) {
  return std::exp(log_big_m(schedule, cert, t));
}

double big_m_quadrature(const TikhonovSchedule& schedule, const Certificate& cert, double t) {
  const double integral =
      detail::integrate([&](double s) { return mu(schedule, cert, s); }, cert.t1, t);
  return std::exp(integral);
}

namespace {

// ∫_a^b ε^{3/2}(s) 𝔐(s)/𝔐(b) ds by quadrature, in log space to avoid overflow.
double weighted_eps_integral(const TikhonovSchedule& schedule, const Certificate& cert, double a,
                             double b) {
  const double lb = log_big_m(schedule, cert, b);
  return detail::integrate(
      [&](double s) {
        const double e = schedule.eps(s);
        return e * std::sqrt(e) * std::exp(log_big_m(schedule, cert, s) - lb);
      },
      a, b);
}

// Closed form of the same integral over [t1, t] for the rational family.
double rational_integral(const RationalFamily& q, const Certificate& cert, double t) {
  const double p = (q.M + cert.delta - cert.K) / q.M;
  const double st = q.M * t + q.C;
  const double s1 = q.M * cert.t1 + q.C;
  if (std::abs(p - 2.0) < 1e-12) return std::log(st / s1) / (q.M * st * st);
  return (1.0 / (st * st) - std::pow(s1, p - 2.0) * std::pow(st, -p)) / (q.M * (p - 2.0));
}

}  // namespace

RateBound rate_bound(const TikhonovSchedule& schedule, const Certificate& cert,
                     double x_star_norm, double energy_t1, double t, BoundIntegration method) {
  if (t < cert.t1) throw InvalidArgument("rate_bound: t < t1");
  RateBound out;
  double integral = 0.0;
  const auto* rational = std::get_if<RationalFamily>(&schedule.family());
  if (rational != nullptr && method == BoundIntegration::Auto) {
    integral = rational_integral(*rational, cert, t);
    out.closed_form = true;
  } else {
    integral = weighted_eps_integral(schedule, cert, cert.t1, t);
  }
  out.integral_term = 0.5 * cert.K * x_star_norm * x_star_norm * integral;
  out.initial_term = energy_t1 * std::exp(-log_big_m(schedule, cert, t));
  out.value = out.integral_term + out.initial_term;
  if (!std::isfinite(out.value)) throw Error("rate_bound: non-finite bound");
  return out;
}

std::vector<double> rate_bound_series(const TikhonovSchedule& schedule, const Certificate& cert,
                                      double x_star_norm, double energy_t1,
                                      std::span<const double> times) {
  std::vector<double> out;
  out.reserve(times.size());
  const double weight = 0.5 * cert.K * x_star_norm * x_star_norm;
  const auto* rational = std::get_if<RationalFamily>(&schedule.family());
  double prev_t = cert.t1;
  double integral = 0.0;  // ∫_{t1}^{prev_t} ε^{3/2}𝔐 / 𝔐(prev_t)
  for (const double t : times) {
    if (t < prev_t) throw InvalidArgument("rate_bound_series: times must be ascending and >= t1");
    if (rational != nullptr) {
      integral = rational_integral(*rational, cert, t);
    } else if (weight > 0.0) {
      integral = integral * std::exp(log_big_m(schedule, cert, prev_t) - log_big_m(schedule, cert, t)) +
                 weighted_eps_integral(schedule, cert, prev_t, t);
    }
    out.push_back(weight * integral + energy_t1 * std::exp(-log_big_m(schedule, cert, t)));
    prev_t = t;
  }
  return out;
}

double eps_lower_envelope(const TikhonovSchedule& schedule, const Certificate& cert, double t) {
  const double m1 = cd_slope_bound(cert.delta, cert.K);
  const double c1 = 1.0 / std::sqrt(schedule.eps(cert.t1)) - m1 * cert.t1;
  const double s = m1 * t + c1;
  return 1.0 / (s * s);
}

std::optional<double> select_K(const TikhonovSchedule& schedule, double delta, double t1,
                               double horizon) {
  const auto range = admissible_K_range(delta);
  constexpr int kCandidates = 64;
  std::optional<double> first;
  std::optional<double> last;
  for (int i = 0; i < kCandidates; ++i) {
    const double K = range.lo + (range.hi - range.lo) * (i + 1) / (kCandidates + 1);
    if (cd_check(schedule, {delta, K, t1}, horizon).satisfied) {
      if (!first) first = K;
      last = K;
    }
  }
  if (!first) return std::nullopt;
  return 0.5 * (*first + *last);
}

}  // namespace trigs
