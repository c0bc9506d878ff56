#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "trigs/continuous.hpp"
#include "trigs/dopri5.hpp"
#include "trigs/errors.hpp"

using namespace trigs;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

Objective quad(int n) { return make_least_squares(Matrix::Identity(n, n), Vector::Zero(n)); }

// Frozen from tests/oracles/reference_runs.py (scipy DOP853, rtol 1e-12).
constexpr double kQuad1dTrigsX100 = 0.0018124257413610289;
constexpr double kHeavyBallSlope = -1.826127361306066;

}  // namespace

TEST_CASE("dopri5: exponential decay and dense output") {
  DormandPrince5 solver({1e-10, 1e-12});
  const auto f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -y; };
  const auto ts = linear_grid(0.0, 5.0, 41);
  double worst = 0.0;
  const auto stats = solver.solve(f, 0.0, Eigen::VectorXd::Ones(1), 5.0, ts,
                                  [&](double t, const Eigen::VectorXd& y) {
                                    worst = std::max(worst, std::abs(y[0] - std::exp(-t)));
                                  });
  CHECK(worst < 1e-9);
  CHECK(stats.steps > 0);
  CHECK(stats.rhs_evals >= 6 * stats.steps);
}

TEST_CASE("dopri5: harmonic oscillator over many periods") {
  DormandPrince5 solver({1e-10, 1e-12});
  const auto f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(2);
    dy << y[1], -y[0];
  };
  const std::vector<double> out = {20.0 * M_PI};
  Eigen::VectorXd last;
  solver.solve(f, 0.0, vec({1.0, 0.0}), 20.0 * M_PI, out,
               [&](double, const Eigen::VectorXd& y) { last = y; });
  CHECK(std::abs(last[0] - 1.0) < 1e-7);
  CHECK(std::abs(last[1]) < 1e-7);
}

TEST_CASE("dopri5: blow-up reports the last good state") {
  DormandPrince5 solver({1e-8, 1e-10});
  const auto f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = y.array().square(); };
  const std::vector<double> out = {2.0};
  try {
    solver.solve(f, 0.0, Eigen::VectorXd::Ones(1), 2.0, out, [](double, const Eigen::VectorXd&) {});
    FAIL("expected an integration error");
  } catch (const IntegrationError& e) {
    CHECK(e.time() < 1.01);
    CHECK(e.time() > 0.99);
    CHECK(std::isfinite(e.last_state()[0]));
  }
}

TEST_CASE("dopri5: step budget") {
  DormandPrince5::Options opt;
  opt.max_steps = 5;
  DormandPrince5 solver(opt);
  const auto f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(2);
    dy << y[1], -y[0];
  };
  const std::vector<double> out = {100.0};
  CHECK_THROWS_AS(solver.solve(f, 0.0, vec({1.0, 0.0}), 100.0, out, [](double, const Eigen::VectorXd&) {}),
                  IntegrationError);
}

TEST_CASE("vector field examples") {
  const auto f = quad(1);
  const auto trigs = DynamicsSpec::trigs(f, 2.0, TikhonovSchedule::power(1.0, 2.0));
  auto [dx, dv] = vector_field(trigs, 1.0, vec({0.0}), vec({0.0}));
  CHECK(dx[0] == 0.0);
  CHECK(dv[0] == 0.0);
  std::tie(dx, dv) = vector_field(trigs, 1.0, vec({1.0}), vec({0.0}));
  CHECK(dx[0] == 0.0);
  CHECK(dv[0] == doctest::Approx(-2.0));
  const auto hb = DynamicsSpec::heavy_ball(f, 1.0);
  std::tie(dx, dv) = vector_field(hb, 3.0, vec({1.0}), vec({1.0}));
  CHECK(dx[0] == 1.0);
  CHECK(dv[0] == doctest::Approx(-3.0));
  const auto avd = DynamicsSpec::avd(f, 3.0);
  std::tie(dx, dv) = vector_field(avd, 2.0, vec({1.0}), vec({1.0}));
  CHECK(dv[0] == doctest::Approx(-1.5 - 1.0));
}

TEST_CASE("dynamics validation") {
  CHECK_THROWS_AS(DynamicsSpec::trigs(make_abs(), 2.0, TikhonovSchedule::power(1.0, 2.0)), MissingCapability);
  CHECK_THROWS_AS(DynamicsSpec::trigs(quad(1), 0.0, TikhonovSchedule::power(1.0, 2.0)), InvalidArgument);
  CHECK_THROWS_AS(DynamicsSpec::heavy_ball(quad(1), 2.0), InvalidArgument);
  CHECK_THROWS_AS(DynamicsSpec::heavy_ball(resolve_problem("ls:2,1"), 1.0), InvalidArgument);
  const auto spec = DynamicsSpec::trigs(quad(1), 2.0, TikhonovSchedule::power(1.0, 2.0));
  CHECK_THROWS_AS(integrate(spec, vec({1}), vec({0}), 0.0, 10.0), InvalidArgument);
  CHECK_THROWS_AS(integrate(spec, vec({1}), vec({0}), 5.0, 2.0), InvalidArgument);
  CHECK_THROWS_AS(integrate(spec, vec({1, 2}), vec({0}), 1.0, 2.0), InvalidArgument);
}

TEST_CASE("trigs on the 1-D quadratic matches the reference run") {
  const auto spec = DynamicsSpec::trigs(quad(1), 2.0, TikhonovSchedule::power(1.0, 2.0));
  const auto traj = integrate(spec, vec({1}), vec({0}), 1.0, 100.0);
  CHECK(traj.samples.size() == 200);
  const double x100 = traj.samples.back().x[0];
  CHECK(std::abs(x100) < 0.05);
  CHECK(std::abs(std::abs(x100) - kQuad1dTrigsX100) < 1e-6);
  const auto W = energy_W(spec, traj);
  CHECK(W.values.back() < W.values.front());
  CHECK(W.max_upward_violation <= 1e-6 * (1.0 + W.values.front()));
}

TEST_CASE("equilibrium is preserved") {
  const auto spec = DynamicsSpec::trigs(quad(2), 2.0, TikhonovSchedule::rational(0.2, 0.0));
  const auto traj = integrate(spec, Vector::Zero(2), Vector::Zero(2), 1.0, 1e3);
  for (const auto& s : traj.samples) CHECK(s.x.norm() <= 1e-8);
  const auto W = energy_W(spec, traj);
  for (double w : W.values) CHECK(w == 0.0);
}

TEST_CASE("heavy ball decays exponentially at the reference rate") {
  const auto spec = DynamicsSpec::heavy_ball(quad(1), 1.0);
  Tolerances tol;
  tol.atol = 1e-16;
  const auto grid = linear_grid(5.0, 20.0, 301);
  const auto traj = integrate(spec, vec({1}), vec({0}), 1.0, 20.0, tol, grid);
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(grid.size());
  for (const auto& s : traj.samples) {
    const double y = std::log(0.5 * s.x[0] * s.x[0]);
    st += s.t;
    sy += y;
    stt += s.t * s.t;
    sty += s.t * y;
  }
  const double slope = (n * sty - st * sy) / (n * stt - st * st);
  CHECK(slope <= -0.8);
  CHECK(slope == doctest::Approx(kHeavyBallSlope).epsilon(1e-3));
}

TEST_CASE("halving tolerances changes states by less than ten times the looser tolerance") {
  const auto f = resolve_problem("ls:2,1");
  const auto spec = DynamicsSpec::trigs(f, 2.0, TikhonovSchedule::power(1.0, 1.0));
  Tolerances loose, tight;
  loose.rtol = 1e-6;
  loose.atol = 1e-8;
  tight.rtol = 0.5e-6;
  tight.atol = 0.5e-8;
  const auto a = integrate(spec, vec({1, 1}), vec({0, 0}), 1.0, 100.0, loose);
  const auto b = integrate(spec, vec({1, 1}), vec({0, 0}), 1.0, 100.0, tight);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double scale = loose.atol + loose.rtol * a.samples[i].x.lpNorm<Eigen::Infinity>();
    CHECK((a.samples[i].x - b.samples[i].x).lpNorm<Eigen::Infinity>() < 10.0 * scale + 10.0 * loose.rtol);
  }
}

TEST_CASE("anchored trigs is the shifted problem") {
  Matrix A(2, 2);
  A << 1, 2, 0, 1;
  const auto f = make_least_squares(A, vec({1, -1}));
  const Vector xd = vec({0.5, -1.5});
  const auto sch = TikhonovSchedule::power(1.0, 1.0);
  const auto anchored = DynamicsSpec::trigs(f, 2.0, sch, xd);
  const auto shifted = DynamicsSpec::trigs(make_shifted(f, xd), 2.0, sch);
  Tolerances tol;
  tol.rtol = 1e-10;
  tol.atol = 1e-12;
  const Vector x0 = vec({2, 1});
  const auto a = integrate(anchored, x0, vec({0, 0}), 1.0, 50.0, tol);
  const auto b = integrate(shifted, x0 - xd, vec({0, 0}), 1.0, 50.0, tol);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK((a.samples[i].x - xd - b.samples[i].x).norm() < 1e-7);
  }
}

TEST_CASE("trigs with eps = 1/(Mt)^2 equals the critical avd form") {
  const auto f = resolve_problem("ls:2,1");
  const double M = 0.2, alpha = 10.0;
  const auto trigs = DynamicsSpec::trigs(f, alpha * M, TikhonovSchedule::rational(M, 0.0));
  const auto avd = DynamicsSpec::avd(f, alpha, TikhonovSchedule::power(1.0 / (M * M), 2.0));
  for (double t : {1.0, 3.0, 40.0}) {
    CHECK(trigs.damping(t) == doctest::Approx(avd.damping(t)));
    CHECK(trigs.tikhonov(t) == doctest::Approx(avd.tikhonov(t)));
  }
  Tolerances tol;
  tol.rtol = 1e-10;
  tol.atol = 1e-12;
  const auto a = integrate(trigs, vec({1, 1}), vec({0, 0}), 1.0, 100.0, tol);
  const auto b = integrate(avd, vec({1, 1}), vec({0, 0}), 1.0, 100.0, tol);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK((a.samples[i].x - b.samples[i].x).norm() < 1e-8);
  }
}

TEST_CASE("avd without schedule is the alpha/t dynamic") {
  const auto f = resolve_problem("ls:2,1");
  const auto avd = DynamicsSpec::avd(f, 3.0);
  const Vector x = vec({0.3, -0.2}), v = vec({1.0, 2.0});
  const auto [dx, dv] = vector_field(avd, 4.0, x, v);
  CHECK((dx - v).norm() == 0.0);
  CHECK((dv - (-(3.0 / 4.0) * v - f.gradient(x))).norm() < 1e-15);
  CHECK(avd.tikhonov(4.0) == 0.0);
}

TEST_CASE("trajectory csv header and rows") {
  const auto spec = DynamicsSpec::trigs(resolve_problem("ls:2,1"), 2.0, TikhonovSchedule::power(1.0, 2.0));
  const auto traj = integrate(spec, vec({1, 1}), vec({0, 0}), 1.0, 10.0, {}, linear_grid(1.0, 10.0, 12));
  std::ostringstream os;
  write_trajectory_csv(os, spec, traj);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x1,x2,v1,v2,f_gap,dist_min_norm,speed,grad_norm,eps,W");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 12);
}

TEST_CASE("integration is deterministic") {
  const auto spec = DynamicsSpec::trigs(resolve_problem("ls:2,1"), 2.0, TikhonovSchedule::power(1.0, 1.0));
  const auto a = integrate(spec, vec({1, 1}), vec({0, 0}), 1.0, 50.0);
  const auto b = integrate(spec, vec({1, 1}), vec({0, 0}), 1.0, 50.0);
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].x == b.samples[i].x);
  CHECK(a.stats.steps == b.stats.steps);
}
