#include "trigs/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trigs/errors.hpp"

namespace trigs {

namespace {

double require_min_value(const Objective& f) {
  if (!f.known_min_value) throw InvalidArgument("'" + f.name + "' has no known minimum value");
  return *f.known_min_value;
}

void require_dim(const Vector& x_star, const Objective& f) {
  if (x_star.size() != f.dim) throw InvalidArgument("x_star dimension mismatch");
}

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

Line fit_line(const std::vector<double>& u, const std::vector<double>& w) {
  const auto n = static_cast<double>(u.size());
  double mu = 0.0, mw = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mw += w[i];
  }
  mu /= n;
  mw /= n;
  double suu = 0.0, suw = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suu += (u[i] - mu) * (u[i] - mu);
    suw += (u[i] - mu) * (w[i] - mw);
  }
  Line l;
  l.slope = suw / suu;
  l.intercept = mw - l.slope * mu;
  double ss = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = w[i] - (l.intercept + l.slope * u[i]);
    ss += r * r;
  }
  l.rms = std::sqrt(ss / n);
  return l;
}

// Shared driver: abscissa map `ax` (ln t or t), trailing window of its range.
template <class Abscissa>
RateReport fit_window(std::span<const double> t, std::span<const double> y, double window_fraction,
                      bool log_correction, std::string quantity, Abscissa ax) {
  if (t.size() != y.size()) throw InvalidArgument("rate_fit: t and y lengths differ");
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
    throw InvalidArgument("rate_fit: window_fraction must be in (0, 1]");
  }
  if (t.size() < 10) throw InvalidArgument("rate_fit: at least 10 points required");
  const double a_lo = ax(t.front());
  const double a_hi = ax(t.back());
  const double cut = a_hi - window_fraction * (a_hi - a_lo);

  RateReport rep;
  rep.quantity = std::move(quantity);
  rep.log_correction = log_correction;
  std::vector<double> u, w;
  bool first = true;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double a = ax(t[i]);
    if (a < cut) continue;
    if (first) {
      rep.window_lo = t[i];
      first = false;
    }
    rep.window_hi = t[i];
    double v = y[i];
    if (log_correction) v = t[i] > 1.0 ? v / std::log(t[i]) : std::nan("");
    if (!(v > 0.0) || !std::isfinite(v)) {
      ++rep.nonpositive;
      continue;
    }
    u.push_back(a);
    w.push_back(std::log(v));
  }
  if (u.size() < 10) {
    throw InvalidArgument("rate_fit: " + std::to_string(u.size()) +
                          " positive points in window (need 10; " +
                          std::to_string(rep.nonpositive) + " nonpositive)");
  }
  const auto line = fit_line(u, w);
  rep.slope = line.slope;
  rep.intercept = line.intercept;
  rep.rms = line.rms;
  rep.points = static_cast<int>(u.size());
  return rep;
}

}  // namespace

LyapunovSeries lyapunov_general(const Trajectory& traj, const Objective& f,
                                const TikhonovSchedule& schedule, const Certificate& cert,
                                const Vector& x_star) {
  const double fstar = require_min_value(f);
  require_dim(x_star, f);
  LyapunovSeries out;
  for (const auto& s : traj.samples) {
    if (s.t < cert.t1) continue;
    const double e = schedule.eps(s.t);
    const double val = (f(s.x) - fstar) + 0.5 * e * s.x.squaredNorm() +
                       0.5 * (cert.K * std::sqrt(e) * (s.x - x_star) + s.v).squaredNorm();
    out.t.push_back(s.t);
    out.values.push_back(val);
  }
  if (out.t.size() < 3) throw InvalidArgument("lyapunov_general: need 3 samples at or after t1");
  const double forcing = 0.5 * cert.K * x_star.squaredNorm();
  out.gronwall_residual = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < out.t.size(); ++i) {
    const double t = out.t[i];
    const double e = schedule.eps(t);
    const double deriv = (out.values[i + 1] - out.values[i - 1]) / (out.t[i + 1] - out.t[i - 1]);
    const double r = deriv + mu(schedule, cert, t) * out.values[i] - forcing * e * std::sqrt(e);
    out.residual.push_back(r);
    out.gronwall_residual = std::max(out.gronwall_residual, r);
  }
  return out;
}

double select_critical_K(double alpha, double c) {
  if (!(c > 0.0)) throw InvalidArgument("critical Lyapunov: c must be > 0");
  if (alpha == 3.0) return 2.0;
  if (!(alpha > 3.0)) throw InvalidArgument("critical Lyapunov: no feasible K for alpha < 3");
  const double lo = 0.5 * (alpha + 1.0);
  const double hi = alpha - 1.0;
  constexpr int kCandidates = 64;
  std::optional<double> first, last;
  for (int i = 0; i < kCandidates; ++i) {
    const double K = lo + (hi - lo) * (i + 1) / (kCandidates + 1);
    if ((alpha - K - 1.0) * K * K - K * c <= 0.0) {
      if (!first) first = K;
      last = K;
    }
  }
  if (!first) throw InvalidArgument("critical Lyapunov: no feasible K");
  return 0.5 * (*first + *last);
}

CriticalLyapunov lyapunov_critical(const Trajectory& traj, const Objective& f, double alpha,
                                   double c, double K, const Vector& x_star) {
  const double fstar = require_min_value(f);
  require_dim(x_star, f);
  if (alpha == 3.0) {
    if (K != 2.0) throw InvalidArgument("critical Lyapunov: alpha = 3 requires K = 2");
  } else if (!(alpha > 3.0) || !(K > 0.5 * (alpha + 1.0) && K < alpha - 1.0) ||
             (alpha - K - 1.0) * K * K - K * c > 0.0) {
    throw InvalidArgument("critical Lyapunov: K infeasible for the given alpha and c");
  }
  CriticalLyapunov out;
  out.K = K;
  for (const auto& s : traj.samples) {
    const double t = s.t;
    const double val = (f(s.x) - fstar) + c / (2.0 * t * t) * s.x.squaredNorm() +
                       0.5 * ((K / t) * (s.x - x_star) + s.v).squaredNorm();
    out.t.push_back(t);
    out.values.push_back(val);
  }
  if (out.t.empty()) return out;
  const double l_lo = std::log(out.t.front());
  const double l_hi = std::log(out.t.back());
  const double cut = std::exp(l_hi - 0.5 * (l_hi - l_lo));
  for (std::size_t i = 0; i < out.t.size(); ++i) {
    const double t = out.t[i];
    if (t < cut) continue;
    double scaled = t * t * out.values[i];
    if (alpha == 3.0) scaled /= std::log(t);
    out.tail_statistic = std::max(out.tail_statistic, scaled);
  }
  return out;
}

DiscreteEnergy discrete_energy(const IterateLog& log, const Objective& f, double a, double r,
                               double alpha, double c, const Vector& x_star) {
  if (!(a > 2.0 && a < alpha - 1.0)) throw InvalidArgument("discrete_energy: need 2 < a < alpha - 1");
  if (!(r >= 0.5 && r <= 1.0)) throw InvalidArgument("discrete_energy: need r in [1/2, 1]");
  if (!f.smooth()) throw MissingCapability("discrete_energy: gradient absent");
  require_dim(x_star, f);
  DiscreteEnergy out;
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    const auto& prev = log.records[i - 1];
    const auto& cur = log.records[i];
    if (cur.k != prev.k + 1) throw InvalidArgument("discrete_energy: iterates must be consecutive");
    const double k = static_cast<double>(cur.k);
    const double km1 = k - 1.0;
    const double a_km1 = a * std::pow(km1, r - 1.0);
    const double b_km1 = std::pow(km1, r);
    const double b_k = std::pow(k, r);
    const double d_km1 = 0.5 * momentum_coefficient(alpha, cur.k) * b_k * b_k * c / (k * k);
    const Vector inner = a_km1 * (prev.x - x_star) + b_km1 * (cur.x - prev.x + f.grad(cur.x));
    const double e = inner.squaredNorm() + d_km1 * prev.x.squaredNorm();
    out.k.push_back(cur.k);
    out.values.push_back(e);
    out.sup = out.k.size() == 1 ? e : std::max(out.sup, e);
  }
  return out;
}

void RateReport::judge(double target, double margin_) {
  target_slope = target;
  margin = margin_;
  pass = slope <= target + margin_;
}

RateReport rate_fit(std::span<const double> t, std::span<const double> y, double window_fraction,
                    bool log_correction, std::string quantity) {
  for (const double v : t) {
    if (!(v > 0.0)) throw InvalidArgument("rate_fit: abscissa must be positive");
  }
  return fit_window(t, y, window_fraction, log_correction, std::move(quantity),
                    [](double v) { return std::log(v); });
}

RateReport exp_rate_fit(std::span<const double> t, std::span<const double> y,
                        double window_fraction, std::string quantity) {
  auto rep = fit_window(t, y, window_fraction, false, std::move(quantity),
                        [](double v) { return v; });
  rep.exponential = true;
  return rep;
}

std::string to_string(BallRegime r) {
  switch (r) {
    case BallRegime::Inside:
      return "inside";
    case BallRegime::Outside:
      return "outside";
    case BallRegime::Crossing:
      return "crossing";
  }
  return "crossing";
}

MinNormGap min_norm_gap(std::span<const double> t, std::span<const Vector> xs,
                        const Vector& x_star, double tail_fraction) {
  if (t.size() != xs.size() || t.empty()) throw InvalidArgument("min_norm_gap: empty or mismatched series");
  MinNormGap out;
  out.final_distance = (xs.back() - x_star).norm();
  std::size_t start = 0;
  if (t.front() > 0.0) {
    const double l_lo = std::log(t.front());
    const double l_hi = std::log(t.back());
    start = lower_index(t, std::exp(l_hi - tail_fraction * (l_hi - l_lo)));
  } else {
    start = static_cast<std::size_t>(std::floor((1.0 - tail_fraction) * (t.size() - 1)));
  }
  start = std::min(start, t.size() - 1);
  out.tail_start = t[start];
  out.tail_min = std::numeric_limits<double>::infinity();
  const double radius = x_star.norm();
  bool any_inside = false, any_outside = false;
  for (std::size_t i = start; i < t.size(); ++i) {
    out.tail_min = std::min(out.tail_min, (xs[i] - x_star).norm());
    (xs[i].norm() < radius ? any_inside : any_outside) = true;
  }
  out.regime = any_inside && any_outside ? BallRegime::Crossing
               : any_inside             ? BallRegime::Inside
                                        : BallRegime::Outside;
  return out;
}

MinNormGap min_norm_gap(const Trajectory& traj, const Vector& x_star, double tail_fraction) {
  std::vector<double> t;
  std::vector<Vector> xs;
  for (const auto& s : traj.samples) {
    t.push_back(s.t);
    xs.push_back(s.x);
  }
  return min_norm_gap(t, xs, x_star, tail_fraction);
}

MinNormGap min_norm_gap(const IterateLog& log, const Vector& x_star, double tail_fraction) {
  std::vector<double> t;
  std::vector<Vector> xs;
  for (const auto& r : log.records) {
    t.push_back(static_cast<double>(r.k));
    xs.push_back(r.x);
  }
  return min_norm_gap(t, xs, x_star, tail_fraction);
}

std::size_t lower_index(std::span<const double> t, double t_lo) {
  return static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), t_lo) - t.begin());
}

double window_sup(std::span<const double> t, std::span<const double> y, double lo, double hi) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = lower_index(t, lo); i < t.size() && t[i] <= hi; ++i) best = std::max(best, y[i]);
  return best;
}

double max_rebound(std::span<const double> y) {
  double worst = 0.0;
  double running_min = std::numeric_limits<double>::infinity();
  for (const double v : y) {
    if (running_min < std::numeric_limits<double>::infinity()) {
      if (running_min > 0.0) {
        worst = std::max(worst, v / running_min - 1.0);
      } else if (v > 0.0) {
        return std::numeric_limits<double>::infinity();
      }
    }
    running_min = std::min(running_min, v);
  }
  return worst;
}

double partial_sum_growth(std::span<const double> t, std::span<const double> terms, double from) {
  double total = 0.0, before = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    total += terms[i];
    if (t[i] < from) before += terms[i];
  }
  return total > 0.0 ? (total - before) / total : 0.0;
}

}  // namespace trigs
