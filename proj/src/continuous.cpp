#include "trigs/continuous.hpp"

#include <cmath>
#include <ostream>

#include "text_util.hpp"
#include "trigs/dopri5.hpp"
#include "trigs/errors.hpp"

namespace trigs {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_grad(const Objective& f) {
  if (!f.smooth()) throw MissingCapability("dynamics need a gradient; '" + f.name + "' has none");
}

}  // namespace

DynamicsSpec DynamicsSpec::trigs(Objective f, double delta, TikhonovSchedule schedule,
                                 std::optional<Vector> anchor) {
  require_grad(f);
  if (!(delta > 0.0)) throw InvalidArgument("trigs: delta must be > 0");
  if (anchor && anchor->size() != f.dim) throw InvalidArgument("trigs: anchor dimension mismatch");
  return {TrigsKind{delta, schedule, std::move(anchor)}, std::move(f)};
}

DynamicsSpec DynamicsSpec::avd(Objective f, double alpha, std::optional<TikhonovSchedule> schedule) {
  require_grad(f);
  if (!(alpha > 0.0)) throw InvalidArgument("avd: alpha must be > 0");
  return {AvdKind{alpha, schedule}, std::move(f)};
}

DynamicsSpec DynamicsSpec::heavy_ball(Objective f, double mu) {
  require_grad(f);
  if (!(mu > 0.0)) throw InvalidArgument("heavy ball: mu must be > 0");
  if (std::abs(mu - f.strong_convexity) > 1e-8 * std::max(1.0, mu)) {
    throw InvalidArgument("heavy ball: mu = " + detail::fmt17(mu) +
                          " differs from the objective's strong convexity " +
                          detail::fmt17(f.strong_convexity));
  }
  return {HeavyBallKind{mu}, std::move(f)};
}

double DynamicsSpec::damping(double t) const {
  return std::visit(Overloaded{
                        [t](const TrigsKind& k) { return k.delta * std::sqrt(k.schedule.eps(t)); },
                        [t](const AvdKind& k) { return k.alpha / t; },
                        [](const HeavyBallKind& k) { return 2.0 * std::sqrt(k.mu); },
                    },
                    kind);
}

double DynamicsSpec::tikhonov(double t) const {
  const auto* s = schedule();
  return s != nullptr ? s->eps(t) : 0.0;
}

Vector DynamicsSpec::anchor() const {
  if (const auto* k = std::get_if<TrigsKind>(&kind); k != nullptr && k->anchor) return *k->anchor;
  return Vector::Zero(objective.dim);
}

const TikhonovSchedule* DynamicsSpec::schedule() const {
  if (const auto* k = std::get_if<TrigsKind>(&kind)) return &k->schedule;
  if (const auto* k = std::get_if<AvdKind>(&kind); k != nullptr && k->schedule) return &*k->schedule;
  return nullptr;
}

std::pair<Vector, Vector> vector_field(const DynamicsSpec& spec, double t, const Vector& x,
                                       const Vector& v) {
  Vector a = -spec.damping(t) * v - spec.objective.gradient(x);
  if (const double e = spec.tikhonov(t); e != 0.0) a -= e * (x - spec.anchor());
  return {v, std::move(a)};
}

std::vector<double> Trajectory::times() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.t);
  return out;
}

std::vector<double> log_grid(double a, double b, int n) {
  if (!(a > 0.0) || !(b > a) || n < 2) throw InvalidArgument("log_grid: need 0 < a < b, n >= 2");
  std::vector<double> g(n);
  const double r = std::log(b / a);
  for (int i = 0; i < n; ++i) g[i] = a * std::exp(r * i / (n - 1));
  g.front() = a;
  g.back() = b;
  return g;
}

std::vector<double> linear_grid(double a, double b, int n) {
  if (!(b > a) || n < 2) throw InvalidArgument("linear_grid: need a < b, n >= 2");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = a + (b - a) * i / (n - 1);
  g.back() = b;
  return g;
}

Trajectory integrate(const DynamicsSpec& spec, const Vector& x0, const Vector& v0, double t0,
                     double t_end, const Tolerances& tol, std::span<const double> sample_grid) {
  const auto n = spec.objective.dim;
  if (x0.size() != n || v0.size() != n) throw InvalidArgument("integrate: initial state dimension mismatch");
  if (!(t_end > t0)) throw InvalidArgument("integrate: t_end must exceed t0");
  if (!std::holds_alternative<HeavyBallKind>(spec.kind) && !(t0 > 0.0)) {
    throw InvalidArgument("integrate: t0 must be > 0 for time-dependent damping");
  }
  if (const auto* s = spec.schedule(); s != nullptr && t0 < s->t0()) {
    throw InvalidArgument("integrate: t0 precedes the schedule's t0");
  }

  std::vector<double> grid;
  if (sample_grid.empty()) {
    grid = t0 > 0.0 ? log_grid(t0, t_end, 200) : linear_grid(t0, t_end, 200);
    sample_grid = grid;
  }
  for (std::size_t i = 0; i < sample_grid.size(); ++i) {
    if (sample_grid[i] < t0 || sample_grid[i] > t_end || (i > 0 && sample_grid[i] <= sample_grid[i - 1])) {
      throw InvalidArgument("integrate: sample grid must be strictly increasing inside [t0, t_end]");
    }
  }

  DormandPrince5::Options opt;
  opt.rtol = tol.rtol;
  opt.atol = tol.atol;
  opt.max_step = tol.max_step > 0.0 ? tol.max_step : (t_end - t0) / 50.0;

  const Vector anchor = spec.anchor();
  const auto rhs = [&](double t, const Vector& y, Vector& dy) {
    const auto x = y.head(n);
    const auto v = y.tail(n);
    dy.head(n) = v;
    Vector acc = -spec.damping(t) * v - spec.objective.grad(x);
    if (const double e = spec.tikhonov(t); e != 0.0) acc -= e * (x - anchor);
    dy.tail(n) = acc;
  };

  Trajectory traj;
  traj.samples.reserve(sample_grid.size());
  Vector y0(2 * n);
  y0 << x0, v0;
  const auto stats = DormandPrince5(opt).solve(
      rhs, t0, y0, t_end, sample_grid, [&](double t, const Vector& y) {
        traj.samples.push_back({t, y.head(n), y.tail(n)});
      });
  traj.stats = {stats.steps, stats.rejected, stats.rhs_evals, tol.rtol, tol.atol};
  return traj;
}

double energy_W(const DynamicsSpec& spec, const Sample& s) {
  return 0.5 * s.v.squaredNorm() + spec.objective(s.x) +
         0.5 * spec.tikhonov(s.t) * (s.x - spec.anchor()).squaredNorm();
}

EnergySeries energy_W(const DynamicsSpec& spec, const Trajectory& traj) {
  EnergySeries out;
  out.t.reserve(traj.samples.size());
  out.values.reserve(traj.samples.size());
  for (const auto& s : traj.samples) {
    out.t.push_back(s.t);
    out.values.push_back(energy_W(spec, s));
  }
  for (std::size_t i = 1; i < out.values.size(); ++i) {
    out.max_upward_violation = std::max(out.max_upward_violation, out.values[i] - out.values[i - 1]);
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const DynamicsSpec& spec, const Trajectory& traj) {
  const int n = spec.objective.dim;
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",x" << i;
  for (int i = 1; i <= n; ++i) os << ",v" << i;
  os << ",f_gap,dist_min_norm,speed,grad_norm,eps,W\n";
  for (const auto& s : traj.samples) {
    os << detail::fmt17(s.t);
    for (int i = 0; i < n; ++i) os << ',' << detail::fmt17(s.x[i]);
    for (int i = 0; i < n; ++i) os << ',' << detail::fmt17(s.v[i]);
    os << ',' << detail::fmt17(spec.objective.gap(s.x)) << ','
       << detail::fmt17(spec.objective.dist_min_norm(s.x)) << ',' << detail::fmt17(s.v.norm())
       << ',' << detail::fmt17(spec.objective.grad(s.x).norm()) << ','
       << detail::fmt17(spec.tikhonov(s.t)) << ',' << detail::fmt17(energy_W(spec, s)) << '\n';
  }
}

}  // namespace trigs
