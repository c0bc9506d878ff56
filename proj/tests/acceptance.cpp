// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "trigs/diagnostics.hpp"
#include "trigs/discrete.hpp"
#include "trigs/harness.hpp"
#include "trigs/objectives.hpp"
#include "trigs/schedules.hpp"

using namespace trigs;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double metric(const RunReport& r, const std::string& key) {
  const auto it = r.metrics.find(key);
  return it == r.metrics.end() ? std::nan("") : it->second;
}

RunReport run_text(const std::string& text) {
  auto rep = run(parse_config(text));
  if (rep.error) std::fprintf(stderr, "  run error: %s\n", rep.error->c_str());
  return rep;
}

const std::string kDegenerate = "problem = ls:2,1\nx0 = 1, 1\natol = 1e-20\n";

// TRIGS runs are kept for the energy and certificate criteria.
std::vector<RunReport> trigs_runs;

Outcome heavy_ball() {
  Outcome o;
  const auto r = run_text(
      "problem = quad1d\nalgorithm = heavy_ball\nmu = 1\nt_end = 25\nx0 = 1\natol = 1e-16\n");
  const double s = metric(r, "gap_exp_slope");
  o.require(s <= -0.8, "ln gap slope " + fmt(s) + " <= -0.8");
  return o;
}

Outcome rational_alpha10() {
  Outcome o;
  const auto r = run_text(kDegenerate +
                          "algorithm = trigs\ndelta = 2\nschedule = rational:M=0.2,C=0\nt_end = 1000\n");
  trigs_runs.push_back(r);
  const double s = metric(r, "gap_slope");
  o.require(s >= -2.3 && s <= -1.8, "gap slope " + fmt(s) + " in [-2.3, -1.8]");
  const double g = metric(r, "speed_tail_growth");
  o.require(g <= 1.0, "t|v| last-decade growth " + fmt(g) + " <= 1");
  const double x = metric(r, "x_sup");
  o.require(std::isfinite(x), "sup |x| " + fmt(x) + " finite");
  return o;
}

Outcome rational_alpha3() {
  Outcome o;
  const auto r = run_text(kDegenerate +
                          "algorithm = trigs\ndelta = 0.6\nschedule = rational:M=0.2,C=0\nt_end = 1000\n");
  trigs_runs.push_back(r);
  const double s = metric(r, "gap_slope_log");
  o.require(s >= -2.3 && s <= -1.8, "log-corrected gap slope " + fmt(s) + " in [-2.3, -1.8]");
  return o;
}

Outcome power_r1() {
  Outcome o;
  const auto r = run_text(kDegenerate + "algorithm = trigs\ndelta = 2\nschedule = power:c=1,r=1\nt_end = 1000\n");
  trigs_runs.push_back(r);
  const double s = metric(r, "gap_slope");
  o.require(s <= -0.35, "gap slope " + fmt(s) + " <= -0.35");
  return o;
}

Outcome min_norm() {
  Outcome o;
  const auto r = run_text(kDegenerate +
                          "algorithm = trigs\ndelta = 2\nschedule = rational:M=0.2,C=0\nt_end = 10000\n");
  trigs_runs.push_back(r);
  const auto avd = run_text("problem = ls:2,1\nx0 = 1, 1\nalgorithm = avd\nalpha = 10\nt_end = 10000\n");
  const double tail = metric(r, "dist_tail_min");
  o.require(tail < 0.05, "trigs tail-min distance " + fmt(tail) + " < 0.05");
  const double mine = metric(r, "dist_final");
  const double base = metric(avd, "dist_final");
  o.require(base >= 5.0 * mine, "avd final distance " + fmt(base) + " >= 5 x " + fmt(mine));
  return o;
}

Outcome energy() {
  Outcome o;
  for (const auto& r : trigs_runs) {
    const double w = metric(r, "w_violation");
    o.require(w <= 1e-6, "W violation " + fmt(w) + " <= 1e-6");
  }
  o.require(trigs_runs.size() == 4, std::to_string(trigs_runs.size()) + " trigs runs");
  return o;
}

Outcome certificate() {
  Outcome o;
  int certified = 0;
  for (const auto& r : trigs_runs) {
    if (!r.certificate || !r.certificate->satisfied) continue;
    ++certified;
    const double g = metric(r, "gronwall_residual");
    o.require(g <= 1e-4, "residual " + fmt(g) + " <= 1e-4");
    const double m = metric(r, "bound_margin");
    o.require(m >= 0.0, "bound - gap " + fmt(m) + " >= 0");
  }
  o.require(certified > 0, std::to_string(certified) + " certified runs");
  return o;
}

Outcome ipatre_rates() {
  Outcome o;
  const std::pair<std::string, std::string> problems[] = {{"quad1d", "1"}, {"ls:2,1", "1, 1"}};
  for (const auto& [problem, x0] : problems) {
    const auto r = run_text("problem = " + problem + "\nx0 = " + x0 +
                            "\nalgorithm = ipatre\nalpha = 4\nc = 1\niters = 100000\ns = 0.9\n");
    const std::string tag = problem + ": ";
    const double j = metric(r, "scaled_gap_jitter");
    o.require(j <= 0.05, tag + "k^2s gap rebound " + fmt(j) + " <= 0.05");
    const double a = metric(r, "step_sum_growth");
    o.require(a <= 0.01, tag + "step sum growth " + fmt(a) + " <= 0.01");
    const double b = metric(r, "resid_sum_growth");
    o.require(b <= 0.01, tag + "resid sum growth " + fmt(b) + " <= 0.01");
  }
  return o;
}

Outcome ipatre_strong() {
  Outcome o;
  const auto r = run_text("problem = ls:2,1\nx0 = 1, 1\nalgorithm = ipatre\nalpha = 4\nc = 1\niters = 100000\n");
  const double d = metric(r, "dist_tail_min");
  o.require(d < 0.05, "tail-min distance " + fmt(d) + " < 0.05");
  return o;
}

Vector scalar(double x) { return Vector::Constant(1, x); }

Outcome moreau() {
  Outcome o;
  const auto quad = resolve_problem("quad1d");
  const auto abs = make_abs();
  double worst = 0.0;
  for (double lambda : {0.3, 1.0, 2.5}) {
    for (double theta : {0.2, 1.0, 4.0}) {
      for (int i = -50; i <= 50; ++i) {
        const double x = 0.1 * i;
        const auto X = scalar(x);
        const double huber = std::abs(x) <= lambda ? x * x / (2 * lambda) : std::abs(x) - lambda / 2;
        const double hgrad = std::abs(x) <= lambda ? x / lambda : std::copysign(1.0, x);
        const double p = prox_of_envelope(abs, lambda, theta, X)[0];
        const double hp = std::abs(p) <= lambda ? p / lambda : std::copysign(1.0, p);
        worst = std::max({worst,
                          std::abs(moreau_value(quad, lambda, X) - x * x / (2 * (1 + lambda))),
                          std::abs(moreau_grad(quad, lambda, X)[0] - x / (1 + lambda)),
                          std::abs(prox_of_envelope(quad, lambda, theta, X)[0] - (1 + lambda) * x / (1 + lambda + theta)),
                          std::abs(moreau_value(abs, lambda, X) - huber),
                          std::abs(moreau_grad(abs, lambda, X)[0] - hgrad),
                          std::abs(p + theta * hp - x)});
      }
    }
  }
  o.require(worst <= 1e-10, "formula error " + fmt(worst) + " <= 1e-10");

  IpatreParams p;
  p.alpha = 4.0;
  p.c = 1.0;
  p.iters = 1000;
  double gap = 0.0;
  for (const auto& f : {abs, quad}) {
    p.x0 = scalar(1.0);
    const auto ns = ipatre_ns_run(f, MoreauParams{1.0}, p);
    const auto env = ipatre_run(moreau_envelope(f, 1.0), p);
    if (ns.records.size() != env.records.size()) gap = INFINITY;
    for (std::size_t i = 0; i < std::min(ns.records.size(), env.records.size()); ++i) {
      gap = std::max(gap, (ns.records[i].x - env.records[i].x).norm());
    }
  }
  o.require(gap <= 1e-12, "ns vs envelope " + fmt(gap) + " <= 1e-12");
  return o;
}

Outcome properties() {
  Outcome o;
  std::vector<Vector> pts;
  for (int i = 0; i < 12; ++i) {
    Vector v(2);
    v << std::sin(1.7 * i) * 3.0, std::cos(0.9 * i) * 2.0 - 0.5;
    pts.push_back(v);
  }
  std::vector<Vector> pts1;
  for (const auto& v : pts) pts1.push_back(v.head(1));
  const double g = std::max({grad_check(resolve_problem("ls:2,1"), pts), grad_check(resolve_problem("quad1d"), pts1),
                             grad_check(make_zero(2), pts)});
  o.require(g <= 1e-5, "gradient fd error " + fmt(g) + " <= 1e-5");

  double pr = 0.0;
  for (double theta : {0.1, 1.0, 10.0}) {
    for (const auto& v : pts) {
      pr = std::max({pr, prox_residual(resolve_problem("ls:2,1"), theta, v),
                     prox_residual(resolve_problem("quad1d"), theta, v.head(1))});
    }
  }
  o.require(pr <= 1e-10, "prox residual " + fmt(pr) + " <= 1e-10");

  double fit = 0.0;
  for (double p : {-0.5, -1.0, -2.0, -3.7}) {
    std::vector<double> t, y, yl;
    for (int i = 0; i <= 400; ++i) {
      const double tt = std::pow(10.0, 0.01 * i);
      t.push_back(tt);
      y.push_back(2.5 * std::pow(tt, p));
      yl.push_back(2.5 * std::log(tt) * std::pow(tt, p));
    }
    fit = std::max({fit, std::abs(rate_fit(t, y).slope - p), std::abs(rate_fit(t, yl, 0.5, true).slope - p)});
  }
  o.require(fit <= 1e-12, "power-law slope error " + fmt(fit) + " <= 1e-12");

  // sup (1/sqrt eps)' on [1, 1e3]: power c,r gives (r/2) t^(r/2-1)/sqrt c, rational gives M, const 0
  struct Case {
    TikhonovSchedule s;
    double sup;
  };
  const std::vector<Case> cases = {
      {TikhonovSchedule::power(1.0, 1.0), 0.5},
      {TikhonovSchedule::power(16.0, 2.0), 0.25},
      {TikhonovSchedule::power(2.0, 1.5), 0.75 / std::sqrt(2.0)},
      {TikhonovSchedule::power(0.04, 2.0), 5.0},
      {TikhonovSchedule::rational(0.2, 0.0), 0.2},
      {TikhonovSchedule::rational(0.9, 1.5), 0.9},
      {TikhonovSchedule::constant(0.7), 0.0},
  };
  int mismatches = 0, checks = 0;
  for (double delta : {1.0, 2.0, 3.0}) {
    const auto range = admissible_K_range(delta);
    for (int i = 1; i < 8; ++i) {
      const double K = range.lo + (range.hi - range.lo) * i / 8.0;
      for (const auto& c : cases) {
        const bool expect = c.sup <= cd_slope_bound(delta, K);
        mismatches += cd_check(c.s, Certificate{delta, K, 1.0}, 1e3).satisfied != expect;
        ++checks;
      }
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + "/" + std::to_string(checks) + " cd verdict mismatches");
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;  // 0: no runtime limit
  std::function<Outcome()> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "heavy ball exponential rate", 1, heavy_ball},
      {2, "trigs rational, alpha = 10", 10, rational_alpha10},
      {3, "trigs rational, alpha = 3", 10, rational_alpha3},
      {4, "trigs power r = 1", 10, power_r1},
      {5, "strong convergence to x*", 30, min_norm},
      {6, "W nonincreasing", 0, energy},
      {7, "Lyapunov certificate", 0, certificate},
      {8, "ipatre rates", 30, ipatre_rates},
      {9, "ipatre strong convergence", 30, ipatre_strong},
      {10, "Moreau identities", 0, moreau},
      {11, "property suites", 0, properties},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o = c.body();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0) o.require(secs < c.budget_s, "runtime " + fmt(secs) + " s < " + fmt(c.budget_s) + " s");
    failed += !o.pass;
    std::printf("criterion %2d  %s  %-28s %s\n", c.id, o.pass ? "PASS" : "FAIL", c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
