#include "trigs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "text_util.hpp"
#include "trigs/errors.hpp"

namespace trigs {

namespace {

using json = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string vector_text(const Vector& x) {
  std::string out;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) out += ", ";
    out += shortest(x[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quantities

const std::vector<std::string> kContinuous = {
    "gap_slope",  "gap_slope_log",     "gap_exp_slope", "dist_final",     "dist_tail_min",
    "x_sup",      "speed_tail_growth", "w_violation",   "gronwall_residual", "bound_margin",
    "lyapunov_tail"};
const std::vector<std::string> kDiscrete = {
    "gap_slope",        "scaled_gap_jitter", "scaled_gap_sup", "step_sum_growth",
    "resid_sum_growth", "resid_scaled_ratio", "energy_sup",    "dist_final",
    "dist_tail_min"};
// Quantities backed by the convergence-rate theorems.
const std::set<std::string> kRateQuantities = {
    "gap_slope",       "gap_slope_log",    "scaled_gap_jitter", "scaled_gap_sup",
    "step_sum_growth", "resid_sum_growth", "resid_scaled_ratio", "energy_sup"};
const std::vector<std::string> kSlopeQuantities = {"gap_slope", "gap_slope_log", "gap_exp_slope"};

// ---------------------------------------------------------------------------
// Config parsing

std::optional<Algorithm> parse_algorithm(std::string_view s) {
  if (s == "trigs") return Algorithm::Trigs;
  if (s == "avd") return Algorithm::Avd;
  if (s == "heavy_ball" || s == "heavy-ball") return Algorithm::HeavyBall;
  if (s == "ipatre") return Algorithm::Ipatre;
  if (s == "ipatre-ns" || s == "ipatre_ns") return Algorithm::IpatreNs;
  return std::nullopt;
}

std::optional<Vector> parse_vector(std::string_view s) {
  std::string tmp(s);
  std::replace(tmp.begin(), tmp.end(), ',', ' ');
  const auto parts = detail::split_ws(tmp);
  if (parts.empty()) return std::nullopt;
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto d = detail::parse_double(parts[i]);
    if (!d) return std::nullopt;
    v[static_cast<Eigen::Index>(i)] = *d;
  }
  return v;
}

const std::set<std::string> kKeys = {
    "name",  "problem", "algorithm", "delta", "alpha", "mu",      "c",         "lambda", "schedule",
    "K",     "t0",      "t_end",     "iters", "x0",    "v0",      "x1",        "anchor", "rtol",
    "atol",  "samples", "window",    "s",     "a",     "log_every", "assert"};

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Trigs:
      return "trigs";
    case Algorithm::Avd:
      return "avd";
    case Algorithm::HeavyBall:
      return "heavy_ball";
    case Algorithm::Ipatre:
      return "ipatre";
    case Algorithm::IpatreNs:
      return "ipatre-ns";
  }
  return "trigs";
}

bool is_continuous(Algorithm a) {
  return a == Algorithm::Trigs || a == Algorithm::Avd || a == Algorithm::HeavyBall;
}

std::vector<std::string> known_quantities(Algorithm a) {
  return is_continuous(a) ? kContinuous : kDiscrete;
}

std::string Assertion::text() const {
  std::string out = quantity;
  switch (op) {
    case Comparison::Less:
      out += " < " + shortest(target);
      break;
    case Comparison::LessEq:
      out += " <= " + shortest(target);
      break;
    case Comparison::Greater:
      out += " > " + shortest(target);
      break;
    case Comparison::GreaterEq:
      out += " >= " + shortest(target);
      break;
    case Comparison::InRange:
      out += " in [" + shortest(lower) + ", " + shortest(target) + "]";
      break;
  }
  if (margin != 0.0) out += " margin " + shortest(margin);
  return out;
}

bool Assertion::holds(double m) const {
  if (std::isnan(m)) return false;
  switch (op) {
    case Comparison::Less:
      return m < target + margin;
    case Comparison::LessEq:
      return m <= target + margin;
    case Comparison::Greater:
      return m > target - margin;
    case Comparison::GreaterEq:
      return m >= target - margin;
    case Comparison::InRange:
      return m >= lower - margin && m <= target + margin;
  }
  return false;
}

Assertion parse_assertion(const std::string& text, int line) {
  Assertion a;
  a.line = line;
  std::string_view s = detail::trim(text);
  const auto bad = [&](const std::string& why) { return ConfigError(line, "assertion '" + text + "': " + why); };

  // Optional trailing "margin <m>".
  if (const auto pos = s.rfind(" margin "); pos != std::string_view::npos) {
    const auto m = detail::parse_double(s.substr(pos + 8));
    if (!m || *m < 0.0) throw bad("margin must be a nonnegative number");
    a.margin = *m;
    s = detail::trim(s.substr(0, pos));
  }
  const auto parts = detail::split_ws(s);
  if (parts.size() < 3) throw bad("expected '<quantity> <op> <value>'");
  a.quantity = std::string(parts[0]);
  const std::string_view op = parts[1];
  if (op == "in") {
    const auto open = s.find('[');
    const auto close = s.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
      throw bad("expected 'in [lo, hi]'");
    }
    const auto bounds = detail::split(s.substr(open + 1, close - open - 1), ',');
    if (bounds.size() != 2) throw bad("expected 'in [lo, hi]'");
    const auto lo = detail::parse_double(bounds[0]);
    const auto hi = detail::parse_double(bounds[1]);
    if (!lo || !hi || *lo > *hi) throw bad("bad interval");
    a.op = Comparison::InRange;
    a.lower = *lo;
    a.target = *hi;
    return a;
  }
  if (parts.size() != 3) throw bad("trailing text");
  if (op == "<") {
    a.op = Comparison::Less;
  } else if (op == "<=") {
    a.op = Comparison::LessEq;
  } else if (op == ">") {
    a.op = Comparison::Greater;
  } else if (op == ">=") {
    a.op = Comparison::GreaterEq;
  } else {
    throw bad("unknown operator '" + std::string(op) + "'");
  }
  const auto v = detail::parse_double(parts[2]);
  if (!v) throw bad("bad target value");
  a.target = *v;
  return a;
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("name", name);
  out.emplace_back("problem", problem);
  out.emplace_back("algorithm", to_string(algorithm));
  const int dim = objective ? objective->dim : 0;
  const Vector start = x0 ? *x0 : Vector::Ones(dim);
  switch (algorithm) {
    case Algorithm::Trigs:
      out.emplace_back("delta", shortest(delta));
      out.emplace_back("schedule", schedule ? *schedule : "power:c=1,r=2");
      if (anchor) out.emplace_back("anchor", vector_text(*anchor));
      break;
    case Algorithm::Avd:
      out.emplace_back("alpha", shortest(alpha));
      out.emplace_back("schedule", schedule ? *schedule : "none");
      break;
    case Algorithm::HeavyBall:
      out.emplace_back("mu", shortest(mu ? *mu : (objective ? objective->strong_convexity : kNaN)));
      break;
    case Algorithm::Ipatre:
    case Algorithm::IpatreNs:
      out.emplace_back("alpha", shortest(alpha));
      out.emplace_back("c", shortest(c));
      if (algorithm == Algorithm::IpatreNs) out.emplace_back("lambda", shortest(lambda));
      break;
  }
  if (is_continuous(algorithm)) {
    if (K) out.emplace_back("K", shortest(*K));
    out.emplace_back("t0", shortest(t0));
    out.emplace_back("t_end", shortest(t_end));
    out.emplace_back("x0", vector_text(start));
    out.emplace_back("v0", vector_text(v0 ? *v0 : Vector::Zero(dim)));
    out.emplace_back("rtol", shortest(rtol));
    out.emplace_back("atol", shortest(atol));
    out.emplace_back("samples", std::to_string(samples));
  } else {
    out.emplace_back("iters", std::to_string(iters));
    out.emplace_back("x0", vector_text(start));
    out.emplace_back("x1", vector_text(x1 ? *x1 : start));
    out.emplace_back("s", shortest(s));
    out.emplace_back("a", shortest(a ? *a : 0.5 * (alpha + 1.0)));
    out.emplace_back("log_every", std::to_string(log_every > 0 ? log_every
                                                               : default_decimation(iters)));
  }
  out.emplace_back("window", shortest(window));
  for (std::size_t i = 0; i < assertions.size(); ++i) {
    out.emplace_back("assert", assertions[i].text());
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  ExperimentConfig cfg;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;

  const auto number = [&](std::string_view v, const std::string& key) {
    const auto d = detail::parse_double(v);
    if (!d || !std::isfinite(*d)) throw ConfigError(lineno, "'" + key + "' needs a number");
    return *d;
  };
  const auto integer = [&](std::string_view v, const std::string& key) {
    const auto d = detail::parse_int(v);
    if (!d) throw ConfigError(lineno, "'" + key + "' needs an integer");
    return *d;
  };
  const auto vec = [&](std::string_view v, const std::string& key) {
    auto x = parse_vector(v);
    if (!x) throw ConfigError(lineno, "'" + key + "' needs a list of numbers");
    return *x;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(lineno, "malformed section header");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(lineno, "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (!kKeys.contains(key)) throw ConfigError(lineno, "unknown key '" + key + "'");
    if (key != "assert" && seen.contains(key)) {
      throw ConfigError(lineno, "duplicate key '" + key + "' (first on line " +
                                    std::to_string(seen[key]) + ")");
    }
    seen[key] = lineno;
    if (value.empty()) throw ConfigError(lineno, "empty value for '" + key + "'");

    if (key == "name") {
      cfg.name = std::string(value);
    } else if (key == "problem") {
      cfg.problem = std::string(value);
    } else if (key == "algorithm") {
      const auto alg = parse_algorithm(value);
      if (!alg) throw ConfigError(lineno, "unknown algorithm '" + std::string(value) + "'");
      cfg.algorithm = *alg;
    } else if (key == "delta") {
      cfg.delta = number(value, key);
    } else if (key == "alpha") {
      cfg.alpha = number(value, key);
    } else if (key == "mu") {
      cfg.mu = number(value, key);
    } else if (key == "c") {
      cfg.c = number(value, key);
    } else if (key == "lambda") {
      cfg.lambda = number(value, key);
    } else if (key == "schedule") {
      cfg.schedule = std::string(value);
    } else if (key == "K") {
      cfg.K = number(value, key);
    } else if (key == "t0") {
      cfg.t0 = number(value, key);
    } else if (key == "t_end") {
      cfg.t_end = number(value, key);
    } else if (key == "iters") {
      cfg.iters = static_cast<long>(integer(value, key));
    } else if (key == "x0") {
      cfg.x0 = vec(value, key);
    } else if (key == "v0") {
      cfg.v0 = vec(value, key);
    } else if (key == "x1") {
      cfg.x1 = vec(value, key);
    } else if (key == "anchor") {
      cfg.anchor = vec(value, key);
    } else if (key == "rtol") {
      cfg.rtol = number(value, key);
    } else if (key == "atol") {
      cfg.atol = number(value, key);
    } else if (key == "samples") {
      cfg.samples = static_cast<int>(integer(value, key));
    } else if (key == "window") {
      cfg.window = number(value, key);
    } else if (key == "s") {
      cfg.s = number(value, key);
    } else if (key == "a") {
      cfg.a = number(value, key);
    } else if (key == "log_every") {
      cfg.log_every = static_cast<long>(integer(value, key));
    } else if (key == "assert") {
      cfg.assertions.push_back(parse_assertion(std::string(value), lineno));
    }
  }

  const auto line_of = [&](const std::string& key) { return seen.contains(key) ? seen[key] : 0; };
  const auto require = [&](bool ok, const std::string& key, const std::string& why) {
    if (!ok) throw ConfigError(line_of(key), "'" + key + "' " + why);
  };

  if (!seen.contains("problem")) throw ConfigError(0, "missing required key 'problem'");
  if (!seen.contains("algorithm")) throw ConfigError(0, "missing required key 'algorithm'");
  const bool continuous = is_continuous(cfg.algorithm);
  if (continuous && !seen.contains("t_end")) throw ConfigError(0, "missing required key 't_end'");
  if (!continuous && !seen.contains("iters")) throw ConfigError(0, "missing required key 'iters'");

  std::string problem = cfg.problem;
  if (problem.starts_with("matrix:") && !base_dir.empty()) {
    const std::filesystem::path p(problem.substr(7));
    if (p.is_relative()) problem = "matrix:" + (std::filesystem::path(base_dir) / p).string();
  }
  try {
    cfg.objective = std::make_shared<const Objective>(resolve_problem(problem));
  } catch (const Error& e) {
    throw ConfigError(line_of("problem"), e.what());
  }
  const Objective& f = *cfg.objective;

  if (cfg.schedule) {
    try {
      (void)parse_schedule(*cfg.schedule, cfg.t0);
    } catch (const Error& e) {
      throw ConfigError(line_of("schedule"), e.what());
    }
  }

  require(cfg.delta > 0.0, "delta", "must be > 0");
  require(cfg.alpha > 0.0, "alpha", "must be > 0");
  require(cfg.c > 0.0, "c", "must be > 0");
  require(cfg.lambda > 0.0, "lambda", "must be > 0");
  require(cfg.rtol > 0.0, "rtol", "must be > 0");
  require(cfg.atol > 0.0, "atol", "must be > 0");
  require(cfg.samples >= 10, "samples", "must be at least 10");
  require(cfg.window > 0.0 && cfg.window <= 1.0, "window", "must be in (0, 1]");
  require(cfg.s >= 0.5 && cfg.s < 1.0, "s", "must be in [1/2, 1)");
  require(cfg.log_every >= 0, "log_every", "must be >= 0");
  if (cfg.mu) require(*cfg.mu > 0.0, "mu", "must be > 0");
  if (cfg.K) require(*cfg.K > 0.0, "K", "must be > 0");

  if (continuous) {
    if (cfg.algorithm == Algorithm::HeavyBall) {
      require(cfg.t0 >= 0.0, "t0", "must be >= 0");
      if (!(f.strong_convexity > 0.0)) {
        throw ConfigError(line_of("algorithm"), "heavy_ball needs a strongly convex problem");
      }
    } else {
      require(cfg.t0 > 0.0, "t0", "must be > 0 for trigs and avd");
    }
    require(cfg.t_end > cfg.t0, "t_end", "must exceed t0");
    if (!f.smooth()) throw ConfigError(line_of("problem"), "continuous dynamics need a gradient");
  } else {
    require(cfg.iters >= 2, "iters", "must be at least 2");
    if (!f.has_prox()) throw ConfigError(line_of("problem"), "discrete algorithms need a prox");
  }

  const auto check_dim = [&](const std::optional<Vector>& v, const std::string& key) {
    if (v && v->size() != f.dim) {
      throw ConfigError(line_of(key), "'" + key + "' has " + std::to_string(v->size()) +
                                          " entries; problem dimension is " + std::to_string(f.dim));
    }
  };
  check_dim(cfg.x0, "x0");
  check_dim(cfg.v0, "v0");
  check_dim(cfg.x1, "x1");
  check_dim(cfg.anchor, "anchor");

  const auto allowed = known_quantities(cfg.algorithm);
  bool rate_asserted = false;
  for (const auto& a : cfg.assertions) {
    if (std::find(allowed.begin(), allowed.end(), a.quantity) == allowed.end()) {
      throw ConfigError(a.line, "quantity '" + a.quantity + "' is not produced by " +
                                    to_string(cfg.algorithm) + " runs");
    }
    rate_asserted = rate_asserted || kRateQuantities.contains(a.quantity);
  }
  if (rate_asserted) {
    if ((cfg.algorithm == Algorithm::Ipatre || cfg.algorithm == Algorithm::IpatreNs) &&
        cfg.alpha <= 3.0) {
      cfg.warnings.push_back("asserted rates require alpha > 3 (alpha = " + shortest(cfg.alpha) + ")");
    }
    if (cfg.algorithm == Algorithm::Avd && cfg.alpha < 3.0) {
      cfg.warnings.push_back("asserted rates require alpha >= 3 (alpha = " + shortest(cfg.alpha) + ")");
    }
    if (cfg.algorithm == Algorithm::Trigs && cfg.schedule) {
      const auto sch = parse_schedule(*cfg.schedule, cfg.t0);
      if (const auto* p = std::get_if<PowerFamily>(&sch.family())) {
        if (p->r < 2.0 && !(p->r > 2.0 / 3.0)) {
          cfg.warnings.push_back("asserted rates for power schedules require r in (2/3, 2)");
        }
      }
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::filesystem::path p(path);
  auto cfg = parse_config(buf.str(), p.parent_path().string());
  if (!std::filesystem::path(path).stem().empty() && cfg.name == "run") cfg.name = p.stem().string();
  return cfg;
}

// ---------------------------------------------------------------------------
// Running

namespace {

// Critical schedule ε = c/t² together with the damping α/t it induces.
struct Critical {
  double alpha;
  double c;
};

// δ/M and δ√c rarely land exactly on 3 in floating point.
double snap_alpha(double alpha) { return std::abs(alpha - 3.0) <= 1e-12 ? 3.0 : alpha; }

std::optional<Critical> critical_form(const DynamicsSpec& spec) {
  if (const auto* k = std::get_if<TrigsKind>(&spec.kind)) {
    if (const auto* p = std::get_if<PowerFamily>(&k->schedule.family()); p && p->r == 2.0) {
      return Critical{snap_alpha(k->delta * std::sqrt(p->c)), p->c};
    }
    if (const auto* q = std::get_if<RationalFamily>(&k->schedule.family()); q && q->C == 0.0) {
      return Critical{snap_alpha(k->delta / q->M), 1.0 / (q->M * q->M)};
    }
  }
  if (const auto* k = std::get_if<AvdKind>(&spec.kind); k && k->schedule) {
    if (const auto* p = std::get_if<PowerFamily>(&k->schedule->family()); p && p->r == 2.0) {
      return Critical{snap_alpha(k->alpha), p->c};
    }
  }
  return std::nullopt;
}

double sup_ratio(std::span<const double> t, std::span<const double> y, double t_start) {
  const double T = t.back();
  if (!(T / 10.0 > t_start)) return kNaN;
  const double last = window_sup(t, y, T / 10.0, T);
  const double prev = window_sup(t, y, std::max(t_start, T / 100.0), T / 10.0);
  return last / prev;
}

void record(RunReport& rep, const std::string& quantity, double value) {
  rep.metrics[quantity] = value;
}

// Why a quantity could not be measured; reported when an assertion needs it.
using Notes = std::map<std::string, std::string>;

// Runs `f`, recording a failure so one missing quantity does not sink the
// rest of the report.
template <class F>
void attempt(Notes& notes, const std::string& what, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    notes[what] = e.what();
  }
}

void run_continuous(const ExperimentConfig& cfg, RunReport& rep,
                    std::map<std::string, RateReport>& rates, Notes& notes) {
  const Objective& f = *cfg.objective;
  const int n = f.dim;
  const Vector x0 = cfg.x0 ? *cfg.x0 : Vector::Ones(n);
  const Vector v0 = cfg.v0 ? *cfg.v0 : Vector::Zero(n);

  std::shared_ptr<const DynamicsSpec> spec;
  switch (cfg.algorithm) {
    case Algorithm::Trigs:
      spec = std::make_shared<const DynamicsSpec>(DynamicsSpec::trigs(
          f, cfg.delta, parse_schedule(cfg.schedule.value_or("power:c=1,r=2"), cfg.t0), cfg.anchor));
      break;
    case Algorithm::Avd: {
      std::optional<TikhonovSchedule> sch;
      if (cfg.schedule) sch = parse_schedule(*cfg.schedule, cfg.t0);
      spec = std::make_shared<const DynamicsSpec>(DynamicsSpec::avd(f, cfg.alpha, sch));
      break;
    }
    default:
      spec = std::make_shared<const DynamicsSpec>(
          DynamicsSpec::heavy_ball(f, cfg.mu.value_or(f.strong_convexity)));
      break;
  }
  const auto grid = cfg.algorithm == Algorithm::HeavyBall
                        ? linear_grid(cfg.t0, cfg.t_end, cfg.samples)
                        : log_grid(cfg.t0, cfg.t_end, cfg.samples);
  Tolerances tol;
  tol.rtol = cfg.rtol;
  tol.atol = cfg.atol;
  auto traj = std::make_shared<Trajectory>(integrate(*spec, x0, v0, cfg.t0, cfg.t_end, tol, grid));
  rep.dynamics = spec;
  rep.trajectory = traj;

  const auto t = traj->times();
  std::vector<double> gap, speed_t, xnorm;
  for (const auto& s : traj->samples) {
    gap.push_back(f.gap(s.x));
    speed_t.push_back(s.t * s.v.norm());
    xnorm.push_back(s.x.norm());
  }
  const auto& last = traj->samples.back();
  rep.summary["samples"] = static_cast<double>(t.size());
  rep.summary["t_final"] = last.t;
  rep.summary["f_gap_final"] = gap.back();
  rep.summary["dist_min_norm_final"] = f.dist_min_norm(last.x);
  rep.summary["speed_final"] = last.v.norm();
  rep.summary["steps"] = static_cast<double>(traj->stats.steps);
  rep.summary["rejected_steps"] = static_cast<double>(traj->stats.rejected);
  rep.summary["rhs_evals"] = static_cast<double>(traj->stats.rhs_evals);

  if (f.known_min_value) {
    attempt(notes, "gap_slope", [&] {
      rates.emplace("gap_slope", rate_fit(t, gap, cfg.window, false, "gap_slope"));
    });
    if (cfg.algorithm != Algorithm::HeavyBall) {
      attempt(notes, "gap_slope_log", [&] {
        rates.emplace("gap_slope_log", rate_fit(t, gap, cfg.window, true, "gap_slope_log"));
      });
    }
    attempt(notes, "gap_exp_slope", [&] {
      rates.emplace("gap_exp_slope", exp_rate_fit(t, gap, cfg.window, "gap_exp_slope"));
    });
  }
  for (const auto& [q, r] : rates) record(rep, q, r.slope);

  if (f.known_min_norm_solution) {
    const Vector& xs = *f.known_min_norm_solution;
    const auto g = min_norm_gap(*traj, xs, cfg.window);
    record(rep, "dist_final", g.final_distance);
    record(rep, "dist_tail_min", g.tail_min);
    rep.ball_regime = to_string(g.regime);
  }
  record(rep, "x_sup", *std::max_element(xnorm.begin(), xnorm.end()));
  if (const double r = sup_ratio(t, speed_t, cfg.t0); std::isfinite(r)) {
    record(rep, "speed_tail_growth", r);
  }
  const auto W = energy_W(*spec, *traj);
  record(rep, "w_violation", W.max_upward_violation / (1.0 + std::abs(W.values.front())));

  const auto* schedule = spec->schedule();
  if (cfg.algorithm == Algorithm::Trigs && f.known_min_value && f.known_min_norm_solution) {
    attempt(notes, "certificate", [&] {
      std::optional<double> K = cfg.K;
      if (!K) K = select_K(*schedule, cfg.delta, cfg.t0, cfg.t_end);
      if (!K) {
        notes["certificate"] = "no K in the admissible range satisfies the controlled-decay bound";
        return;
      }
      const Certificate cert{cfg.delta, *K, cfg.t0};
      const auto verdict = cd_check(*schedule, cert, cfg.t_end);
      rep.certificate = CertificateReport{cert.delta, cert.K,           cert.t1,
                                          verdict.satisfied, verdict.bound, verdict.max_slope,
                                          verdict.worst_margin};
      if (!verdict.satisfied) {
        notes["certificate"] = "controlled-decay bound violated for K = " + shortest(cert.K);
        return;
      }
      const Vector& xs = *f.known_min_norm_solution;
      const auto ly = lyapunov_general(*traj, f, *schedule, cert, xs);
      record(rep, "gronwall_residual", ly.gronwall_residual / (1.0 + std::abs(ly.values.front())));
      const auto bound = rate_bound_series(*schedule, cert, xs.norm(), ly.values.front(), ly.t);
      double margin = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < ly.t.size(); ++i) {
        const auto j = lower_index(t, ly.t[i]);
        margin = std::min(margin, bound[i] - gap[j]);
      }
      record(rep, "bound_margin", margin);
    });
  }
  if (const auto crit = critical_form(*spec); crit && f.known_min_value && f.known_min_norm_solution) {
    attempt(notes, "lyapunov_tail", [&] {
      const double K = select_critical_K(crit->alpha, crit->c);
      const auto ly = lyapunov_critical(*traj, f, crit->alpha, crit->c, K,
                                        *f.known_min_norm_solution);
      record(rep, "lyapunov_tail", ly.tail_statistic);
    });
  }
}

void run_discrete(const ExperimentConfig& cfg, RunReport& rep,
                  std::map<std::string, RateReport>& rates, Notes& notes) {
  const Objective& f = *cfg.objective;
  IpatreParams params;
  params.alpha = cfg.alpha;
  params.c = cfg.c;
  params.iters = cfg.iters;
  params.x0 = cfg.x0 ? *cfg.x0 : Vector::Ones(f.dim);
  params.x1 = cfg.x1;
  auto log = std::make_shared<IterateLog>(cfg.algorithm == Algorithm::Ipatre
                                              ? ipatre_run(f, params)
                                              : ipatre_ns_run(f, MoreauParams{cfg.lambda}, params));
  rep.iterates = log;
  rep.log_every = cfg.log_every > 0 ? cfg.log_every : default_decimation(log->records.size());

  const auto& recs = log->records;
  std::vector<double> k, gap, scaled_gap, step_terms, resid_terms, resid_scaled;
  const double s = cfg.s;
  for (const auto& r : recs) {
    const double kk = static_cast<double>(r.k);
    k.push_back(kk);
    gap.push_back(r.f_gap);
    scaled_gap.push_back(std::pow(kk, 2.0 * s) * r.f_gap);
    step_terms.push_back(std::pow(kk, 2.0 * s - 1.0) * r.step_norm * r.step_norm);
    const double resid = std::isfinite(r.resid_norm) ? r.resid_norm : 0.0;
    resid_terms.push_back(std::pow(kk, 2.0 * s) * resid * resid);
    resid_scaled.push_back(std::pow(kk, s) * resid);
  }
  const auto& last = recs.back();
  rep.summary["records"] = static_cast<double>(recs.size());
  rep.summary["k_final"] = static_cast<double>(last.k);
  rep.summary["f_gap_final"] = last.f_gap;
  rep.summary["dist_min_norm_final"] = last.dist_min_norm;
  rep.summary["step_norm_final"] = last.step_norm;

  const double k_tail = k.back() / 10.0;
  if (f.known_min_value) {
    attempt(notes, "gap_slope", [&] {
      rates.emplace("gap_slope", rate_fit(k, gap, cfg.window, false, "gap_slope"));
      record(rep, "gap_slope", rates.at("gap_slope").slope);
    });
    const auto tail = std::span<const double>(scaled_gap).subspan(lower_index(k, k_tail));
    record(rep, "scaled_gap_jitter", max_rebound(tail));
    record(rep, "scaled_gap_sup", *std::max_element(tail.begin(), tail.end()));
  }
  record(rep, "step_sum_growth", partial_sum_growth(k, step_terms, k_tail));
  record(rep, "resid_sum_growth", partial_sum_growth(k, resid_terms, k_tail));
  if (const double r = sup_ratio(k, resid_scaled, 1.0); std::isfinite(r)) {
    record(rep, "resid_scaled_ratio", r);
  }

  if (f.known_min_norm_solution) {
    const Vector& xs = *f.known_min_norm_solution;
    const double frac = k.back() > 10.0 ? std::log(10.0) / std::log(k.back()) : 1.0;
    const auto g = min_norm_gap(*log, xs, std::min(1.0, frac));
    record(rep, "dist_final", g.final_distance);
    record(rep, "dist_tail_min", g.tail_min);
    rep.ball_regime = to_string(g.regime);
    if (f.smooth() && cfg.algorithm == Algorithm::Ipatre) {
      attempt(notes, "energy_sup", [&] {
        const double a = cfg.a.value_or(0.5 * (cfg.alpha + 1.0));
        record(rep, "energy_sup", discrete_energy(*log, f, a, s, cfg.alpha, cfg.c, xs).sup);
      });
    }
  }
}

}  // namespace

RunReport run(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.name = cfg.name;
  rep.config = cfg.echo();
  rep.warnings = cfg.warnings;
  std::map<std::string, RateReport> rates;
  Notes notes;
  try {
    if (!cfg.objective) throw InvalidArgument("config has no resolved problem");
    if (is_continuous(cfg.algorithm)) {
      run_continuous(cfg, rep, rates, notes);
    } else {
      run_discrete(cfg, rep, rates, notes);
    }
  } catch (const std::exception& e) {
    rep.error = e.what();
  }

  std::set<std::string> shown;
  if (rates.contains("gap_slope") && cfg.algorithm != Algorithm::HeavyBall) shown.insert("gap_slope");
  if (rates.contains("gap_exp_slope") && cfg.algorithm == Algorithm::HeavyBall) {
    shown.insert("gap_exp_slope");
  }

  for (const auto& a : cfg.assertions) {
    AssertionResult res;
    res.quantity = a.quantity;
    res.expression = a.text();
    res.target = a.target;
    if (a.op == Comparison::InRange) res.lower = a.lower;
    res.margin = a.margin;
    if (const auto it = rep.metrics.find(a.quantity); it != rep.metrics.end() && !std::isnan(it->second)) {
      res.measured = it->second;
      res.pass = a.holds(it->second);
    } else if (!rep.error) {
      const bool cert = a.quantity == "gronwall_residual" || a.quantity == "bound_margin";
      const auto note = notes.find(cert ? "certificate" : a.quantity);
      rep.warnings.push_back(a.quantity + " not measured" +
                             (note != notes.end() ? ": " + note->second : std::string()));
    }
    if (auto it = rates.find(a.quantity); it != rates.end()) {
      it->second.judge(a.target, a.margin);
      it->second.pass = res.pass;
      shown.insert(a.quantity);
    }
    rep.pass = rep.pass && res.pass;
    rep.assertions.push_back(std::move(res));
  }
  for (const auto& q : kSlopeQuantities) {
    if (shown.contains(q)) rep.rates.push_back(rates.at(q));
  }
  if (rep.error) rep.pass = false;
  rep.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

int sweep_threads() {
  const char* env = std::getenv("TRIGS_THREADS");
  if (!env) return 1;
  const auto v = detail::parse_int(env);
  if (!v || *v < 1) return 1;
  return static_cast<int>(std::min<long long>(*v, 256));
}

std::vector<RunReport> sweep(const std::vector<ExperimentConfig>& configs) {
  std::vector<RunReport> out(configs.size());
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(sweep_threads()), configs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) out[i] = run(configs[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < configs.size(); i = next++) out[i] = run(configs[i]);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

bool all_passed(const std::vector<RunReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const RunReport& r) { return r.pass; });
}

// ---------------------------------------------------------------------------
// JSON

namespace {

// Non-finite values become strings so the output stays strict JSON.
json num(double v) {
  if (std::isfinite(v)) return v;
  return shortest(v);
}

double from_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return kNaN;
  }
  throw Error("report JSON: expected a number");
}

template <class T>
json opt(const std::optional<T>& v) {
  if (!v) return nullptr;
  if constexpr (std::is_same_v<T, double>) {
    return num(*v);
  } else {
    return *v;
  }
}

json rate_json(const RateReport& r) {
  json j;
  j["quantity"] = r.quantity;
  j["slope"] = num(r.slope);
  j["intercept"] = num(r.intercept);
  j["window"] = json::array({num(r.window_lo), num(r.window_hi)});
  j["rms"] = num(r.rms);
  j["target_slope"] = opt(r.target_slope);
  j["pass"] = opt(r.pass);
  return j;
}

RateReport rate_from(const json& j) {
  RateReport r;
  r.quantity = j.at("quantity").get<std::string>();
  r.slope = from_num(j.at("slope"));
  r.intercept = from_num(j.at("intercept"));
  r.window_lo = from_num(j.at("window").at(0));
  r.window_hi = from_num(j.at("window").at(1));
  r.rms = from_num(j.at("rms"));
  if (!j.at("target_slope").is_null()) r.target_slope = from_num(j.at("target_slope"));
  if (!j.at("pass").is_null()) r.pass = j.at("pass").get<bool>();
  return r;
}

json report_json(const RunReport& r) {
  json j;
  j["name"] = r.name;
  j["pass"] = r.pass;
  j["error"] = opt(r.error);
  json cfg = json::array();
  for (const auto& [k, v] : r.config) cfg.push_back(json::array({k, v}));
  j["config"] = cfg;
  j["warnings"] = r.warnings;
  json summary = json::object();
  for (const auto& [k, v] : r.summary) summary[k] = num(v);
  j["summary"] = summary;
  json metrics = json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = num(v);
  j["metrics"] = metrics;
  j["ball_regime"] = opt(r.ball_regime);
  if (r.certificate) {
    const auto& c = *r.certificate;
    j["certificate"] = {{"delta", num(c.delta)},         {"K", num(c.K)},
                        {"t1", num(c.t1)},               {"satisfied", c.satisfied},
                        {"bound", num(c.bound)},         {"max_slope", num(c.max_slope)},
                        {"worst_margin", num(c.worst_margin)}};
  } else {
    j["certificate"] = nullptr;
  }
  json rates = json::array();
  for (const auto& rate : r.rates) rates.push_back(rate_json(rate));
  j["rates"] = rates;
  json asserts = json::array();
  for (const auto& a : r.assertions) {
    asserts.push_back({{"quantity", a.quantity},
                       {"expression", a.expression},
                       {"target", num(a.target)},
                       {"lower", opt(a.lower)},
                       {"margin", num(a.margin)},
                       {"measured", opt(a.measured)},
                       {"pass", a.pass}});
  }
  j["assertions"] = asserts;
  return j;
}

RunReport report_from(const json& j) {
  RunReport r;
  r.name = j.at("name").get<std::string>();
  r.pass = j.at("pass").get<bool>();
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  for (const auto& kv : j.at("config")) {
    r.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
  }
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("summary").items()) r.summary[k] = from_num(v);
  for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = from_num(v);
  if (!j.at("ball_regime").is_null()) r.ball_regime = j.at("ball_regime").get<std::string>();
  if (const auto& c = j.at("certificate"); !c.is_null()) {
    r.certificate = CertificateReport{from_num(c.at("delta")), from_num(c.at("K")),
                                      from_num(c.at("t1")),    c.at("satisfied").get<bool>(),
                                      from_num(c.at("bound")), from_num(c.at("max_slope")),
                                      from_num(c.at("worst_margin"))};
  }
  for (const auto& rate : j.at("rates")) r.rates.push_back(rate_from(rate));
  for (const auto& a : j.at("assertions")) {
    AssertionResult res;
    res.quantity = a.at("quantity").get<std::string>();
    res.expression = a.at("expression").get<std::string>();
    res.target = from_num(a.at("target"));
    if (!a.at("lower").is_null()) res.lower = from_num(a.at("lower"));
    res.margin = from_num(a.at("margin"));
    if (!a.at("measured").is_null()) res.measured = from_num(a.at("measured"));
    res.pass = a.at("pass").get<bool>();
    r.assertions.push_back(std::move(res));
  }
  return r;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("report JSON: ") + e.what());
  }
}

}  // namespace

std::string to_json(const RunReport& report) { return report_json(report).dump(2) + "\n"; }

std::string to_json(const std::vector<RunReport>& reports) {
  json j;
  j["pass"] = all_passed(reports);
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  j["reports"] = arr;
  return j.dump(2) + "\n";
}

std::string to_json(const RateReport& rate) { return rate_json(rate).dump(2) + "\n"; }

RunReport report_from_json(const std::string& text) {
  try {
    return report_from(parse_json(text));
  } catch (const json::exception& e) {
    throw Error(std::string("report JSON: ") + e.what());
  }
}

std::vector<RunReport> reports_from_json(const std::string& text) {
  try {
    std::vector<RunReport> out;
    const auto doc = parse_json(text);
    for (const auto& r : doc.at("reports")) out.push_back(report_from(r));
    return out;
  } catch (const json::exception& e) {
    throw Error(std::string("report JSON: ") + e.what());
  }
}

void emit_csv(std::ostream& os, const RunReport& report) {
  if (report.trajectory && report.dynamics) {
    write_trajectory_csv(os, *report.dynamics, *report.trajectory);
  } else if (report.iterates) {
    write_iterate_csv(os, *report.iterates, report.log_every);
  }
}

void emit_files(const RunReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir + "': " + ec.message());
  const auto write = [](const fs::path& path, const auto& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    body(out);
    if (!out) throw Error("write failed for '" + path.string() + "'");
  };
  write(fs::path(dir) / (report.name + ".json"), [&](std::ostream& os) { os << to_json(report); });
  if (report.trajectory || report.iterates) {
    write(fs::path(dir) / (report.name + ".csv"), [&](std::ostream& os) { emit_csv(os, report); });
  }
}

}  // namespace trigs
