#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "trigs/discrete.hpp"
#include "trigs/errors.hpp"

using namespace trigs;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

IpatreParams params(Vector x0, long iters, double alpha = 4.0, double c = 1.0) {
  IpatreParams p;
  p.alpha = alpha;
  p.c = c;
  p.iters = iters;
  p.x0 = std::move(x0);
  return p;
}

Objective quad1d() { return resolve_problem("quad1d"); }

Objective gradient_only() {
  auto f = quad1d();
  f.prox = nullptr;
  return f;
}

}  // namespace

TEST_CASE("ipatre step examples") {
  const auto p = params(vec({1.0}), 10);
  CHECK(ipatre_step(make_zero(1), vec({1.0}), vec({1.0}), 1, p)[0] == doctest::Approx(0.0));
  CHECK(ipatre_step(quad1d(), vec({1.0}), vec({1.0}), 10, p)[0] == doctest::Approx(0.495));
  CHECK(ipatre_step(resolve_problem("ls:2,1"), Vector::Zero(2), Vector::Zero(2), 7, p).norm() == 0.0);
  CHECK(momentum_coefficient(4.0, 1) == -3.0);
  CHECK_THROWS_AS(ipatre_step(gradient_only(), vec({1.0}), vec({1.0}), 1, p), MissingCapability);
  CHECK_THROWS_AS(ipatre_step(quad1d(), vec({1.0}), vec({1.0}), 0, p), InvalidArgument);
}

TEST_CASE("ipatre run validation") {
  CHECK_THROWS_AS(ipatre_run(gradient_only(), params(vec({1.0}), 10)), MissingCapability);
  CHECK_THROWS_AS(ipatre_run(quad1d(), params(vec({1.0}), 1)), InvalidArgument);
  CHECK_THROWS_AS(ipatre_run(quad1d(), params(vec({1.0}), 10, 4.0, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(ipatre_run(quad1d(), params(vec({1.0, 2.0}), 10)), InvalidArgument);
}

TEST_CASE("ipatre log layout") {
  auto p = params(vec({1.0}), 50);
  p.x1 = vec({0.5});
  const auto log = ipatre_run(quad1d(), p);
  REQUIRE(log.records.size() == 50);
  CHECK(log.records.front().k == 1);
  CHECK(log.records.front().x[0] == 0.5);
  CHECK(log.records.front().step_norm == doctest::Approx(0.5));
  for (std::size_t i = 1; i < log.records.size(); ++i) CHECK(log.records[i].k == log.records[i - 1].k + 1);
  CHECK(log.algorithm == "ipatre");
}

TEST_CASE("ipatre iterates satisfy the implicit gradient form") {
  const auto f = resolve_problem("ls:2,1");
  const auto p = params(vec({1.0, -0.3}), 2000);
  const auto log = ipatre_run(f, p);
  for (std::size_t i = 1; i + 1 < log.records.size(); ++i) {
    const auto k = log.records[i].k;
    const Vector& xk = log.records[i].x;
    const Vector& xkm1 = log.records[i - 1].x;
    const Vector& xk1 = log.records[i + 1].x;
    const double kk = static_cast<double>(k);
    const Vector r = xk1 - momentum_coefficient(p.alpha, k) * (xk - xkm1) + f.gradient(xk1) -
                     (1.0 - p.c / (kk * kk)) * xk;
    CHECK(r.norm() <= 1e-10 * (1.0 + xk.norm()));
    CHECK(log.records[i + 1].resid_norm == doctest::Approx(f.gradient(xk1).norm()));
  }
}

TEST_CASE("ipatre on the zero objective matches a hand loop") {
  const auto p = params(vec({1.0, -2.0}), 40, 4.0, 0.7);
  const auto log = ipatre_run(make_zero(2), p);
  Vector prev = p.x0, x = p.x0;
  for (long k = 1; k < p.iters; ++k) {
    const double kk = static_cast<double>(k);
    const Vector next = x + (1.0 - 4.0 / kk) * (x - prev) - (0.7 / (kk * kk)) * x;
    prev = x;
    x = next;
    CHECK((log.records[static_cast<std::size_t>(k)].x - x).norm() <= 1e-14 * (1.0 + x.norm()));
  }
  const auto longer = ipatre_run(make_zero(2), params(vec({1.0, -2.0}), 20000));
  for (const auto& r : longer.records) CHECK(r.x.allFinite());
  CHECK(longer.records.back().step_norm < 1e-3 * longer.records[10].step_norm);
}

TEST_CASE("moreau envelope formulas") {
  const auto a = make_abs();
  CHECK(moreau_value(a, 1.0, vec({2.0})) == doctest::Approx(1.5));
  CHECK(moreau_grad(a, 1.0, vec({2.0}))[0] == doctest::Approx(1.0));
  CHECK(moreau_grad(a, 1.0, vec({0.0}))[0] == 0.0);
  CHECK(moreau_value(quad1d(), 1.0, vec({2.0})) == doctest::Approx(1.0));
  CHECK(prox_of_envelope(a, 1.0, 1.0, vec({3.0}))[0] == doctest::Approx(2.0));
  CHECK(prox_of_envelope(quad1d(), 1.0, 1.0, vec({2.0}))[0] == doctest::Approx(4.0 / 3.0));
  CHECK(prox_of_envelope(a, 1.0, 1e-8, vec({3.0}))[0] == doctest::Approx(3.0).epsilon(1e-7));
  CHECK_THROWS_AS(moreau_value(a, 0.0, vec({1.0})), InvalidArgument);
  CHECK_THROWS_AS(prox_of_envelope(a, 1.0, 0.0, vec({1.0})), InvalidArgument);
  CHECK_THROWS_AS(moreau_value(gradient_only(), 1.0, vec({1.0})), MissingCapability);
}

TEST_CASE("moreau gradient is 1/lambda Lipschitz and min f_lambda = min f") {
  for (double lambda : {0.5, 1.0, 3.0}) {
    for (const auto& f : {make_abs(), quad1d()}) {
      double best = 1e300;
      for (int i = -300; i <= 300; ++i) {
        const double x = i * 0.01, y = x + 0.37;
        const double g = std::abs(moreau_grad(f, lambda, vec({x}))[0] - moreau_grad(f, lambda, vec({y}))[0]);
        CHECK(g <= std::abs(x - y) / lambda + 1e-12);
        best = std::min(best, moreau_value(f, lambda, vec({x})));
      }
      CHECK(best == doctest::Approx(*f.known_min_value));
    }
  }
}

TEST_CASE("moreau identities hold on a grid to 1e-10") {
  // f = ½x²: f_λ(x) = x²/(2(1+λ)), ∇f_λ = x/(1+λ), prox_{θf_λ}(x) = (1+λ)x/(1+λ+θ)
  // f = |x|: f_λ is the Huber function
  for (double lambda : {0.3, 1.0, 2.5}) {
    for (double theta : {0.2, 1.0, 4.0}) {
      for (int i = -40; i <= 40; ++i) {
        const double x = 0.1 * i;
        const Vector X = vec({x});
        CHECK(std::abs(moreau_value(quad1d(), lambda, X) - x * x / (2 * (1 + lambda))) <= 1e-10);
        CHECK(std::abs(moreau_grad(quad1d(), lambda, X)[0] - x / (1 + lambda)) <= 1e-10);
        CHECK(std::abs(prox_of_envelope(quad1d(), lambda, theta, X)[0] -
                       (1 + lambda) * x / (1 + lambda + theta)) <= 1e-10);
        const double huber = std::abs(x) <= lambda ? x * x / (2 * lambda) : std::abs(x) - lambda / 2;
        CHECK(std::abs(moreau_value(make_abs(), lambda, X) - huber) <= 1e-10);
        const double hgrad = std::abs(x) <= lambda ? x / lambda : (x > 0 ? 1.0 : -1.0);
        CHECK(std::abs(moreau_grad(make_abs(), lambda, X)[0] - hgrad) <= 1e-10);
        // prox of the Huber function by its own optimality condition
        const double p = prox_of_envelope(make_abs(), lambda, theta, X)[0];
        const double hg = std::abs(p) <= lambda ? p / lambda : (p > 0 ? 1.0 : -1.0);
        CHECK(std::abs(p + theta * hg - x) <= 1e-10);
      }
    }
  }
}

TEST_CASE("ipatre-ns equals ipatre on the envelope") {
  for (double lambda : {1.0, 0.4}) {
    const auto f = make_abs();
    const auto p = params(vec({1.0}), 1000);
    const auto ns = ipatre_ns_run(f, MoreauParams{lambda}, p);
    const auto env = ipatre_run(moreau_envelope(f, lambda), p);
    REQUIRE(ns.records.size() == env.records.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < ns.records.size(); ++i) {
      worst = std::max(worst, (ns.records[i].x - env.records[i].x).norm());
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("ipatre-ns collapses on the zero objective") {
  auto p = params(vec({2.0}), 200);
  for (double lambda : {0.1, 1.0, 9.0}) {
    const auto ns = ipatre_ns_run(make_zero(1), MoreauParams{lambda}, p);
    const auto plain = ipatre_run(make_zero(1), p);
    for (std::size_t i = 0; i < ns.records.size(); ++i) {
      CHECK(ns.records[i].x[0] == doctest::Approx(plain.records[i].x[0]).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(ipatre_ns_run(make_abs(), MoreauParams{0.0}, p), InvalidArgument);
}

TEST_CASE("ipatre-ns on |x|: scaled prox residual vanishes") {
  const auto log = ipatre_ns_run(make_abs(), MoreauParams{1.0}, params(vec({1.0}), 100000));
  double early = 0.0, late = 0.0;
  for (const auto& r : log.records) {
    const double v = std::pow(static_cast<double>(r.k), 0.9) * r.resid_norm;
    if (r.k >= 1000 && r.k < 10000) early = std::max(early, v);
    if (r.k >= 10000) late = std::max(late, v);
  }
  CHECK(late <= early);
  CHECK(late < 1e-6);
}

TEST_CASE("tail distance to x* shrinks as the budget grows") {
  const auto f = resolve_problem("ls:2,1");
  double prev = 1e300;
  for (long iters : {1000L, 10000L, 100000L}) {
    const auto log = ipatre_run(f, params(vec({1.0, 1.0}), iters));
    double tail = 1e300;
    for (const auto& r : log.records) {
      if (r.k * 10 >= iters) tail = std::min(tail, r.dist_min_norm);
    }
    CHECK(tail < prev);
    prev = tail;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("iterate csv header and decimation") {
  const auto log = ipatre_run(resolve_problem("ls:2,1"), params(vec({1.0, 1.0}), 100000));
  std::ostringstream os;
  write_iterate_csv(os, log);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,x1,x2,f_gap,step_norm,resid_norm,dist_min_norm");
  long rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows <= 10000);
  CHECK(rows == 10000);
  CHECK(default_decimation(100000) == 10);
  CHECK(default_decimation(5) == 1);
  std::ostringstream every;
  write_iterate_csv(every, ipatre_run(quad1d(), params(vec({1.0}), 25)), 7);
  const std::string text = every.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 4);
}
