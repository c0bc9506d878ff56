#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "trigs/continuous.hpp"
#include "trigs/diagnostics.hpp"
#include "trigs/discrete.hpp"

namespace trigs {

// ---------------------------------------------------------------------------
// Configuration

enum class Algorithm { Trigs, Avd, HeavyBall, Ipatre, IpatreNs };
std::string to_string(Algorithm a);
bool is_continuous(Algorithm a);

enum class Comparison { Less, LessEq, Greater, GreaterEq, InRange };

// "<quantity> <op> <value> [margin <m>]" or "<quantity> in [<lo>, <hi>] [margin <m>]"
struct Assertion {
  std::string quantity;
  Comparison op = Comparison::LessEq;
  double target = 0.0;  // upper end for InRange
  double lower = 0.0;   // InRange only
  double margin = 0.0;
  int line = 0;

  std::string text() const;
  bool holds(double measured) const;
};

Assertion parse_assertion(const std::string& text, int line = 0);

struct ExperimentConfig {
  std::string name = "run";
  std::string problem;
  Algorithm algorithm = Algorithm::Trigs;

  double delta = 2.0;
  double alpha = 3.0;
  std::optional<double> mu;  // heavy ball; defaults to the problem's modulus
  double c = 1.0;            // discrete Tikhonov weight
  double lambda = 1.0;       // Moreau parameter for ipatre-ns
  std::optional<std::string> schedule;
  std::optional<double> K;

  double t0 = 1.0;
  double t_end = 0.0;
  long iters = 0;
  std::optional<Vector> x0;
  std::optional<Vector> v0;
  std::optional<Vector> x1;
  std::optional<Vector> anchor;

  double rtol = 1e-8;
  double atol = 1e-10;
  int samples = 200;
  double window = 0.5;  // rate-fit window, fraction of the ln t range
  double s = 0.9;       // discrete rate exponent
  std::optional<double> a;  // discrete energy parameter, default (α + 1)/2
  long log_every = 0;       // 0: default decimation

  std::vector<Assertion> assertions;
  std::vector<std::string> warnings;

  /// Resolved problem; filled by parse_config.
  std::shared_ptr<const Objective> objective;

  /// Effective settings after defaults, in a fixed order.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

/// Flat "key = value" text with '#' comments and optional [section] headers.
/// Relative "matrix:" paths resolve against base_dir. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = {});
ExperimentConfig load_config(const std::string& path);

/// Quantities an assertion may reference for the given algorithm.
std::vector<std::string> known_quantities(Algorithm a);

// ---------------------------------------------------------------------------
// Running

struct AssertionResult {
  std::string quantity;
  std::string expression;
  double target = 0.0;
  std::optional<double> lower;
  double margin = 0.0;
  std::optional<double> measured;  // empty when the run could not produce it
  bool pass = false;
};

struct CertificateReport {
  double delta = 0.0;
  double K = 0.0;
  double t1 = 0.0;
  bool satisfied = false;
  double bound = 0.0;
  double max_slope = 0.0;
  double worst_margin = 0.0;
};

struct RunReport {
  std::string name;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> warnings;
  std::optional<std::string> error;

  // Summary of the trajectory or iterate log.
  std::map<std::string, double> summary;
  // Every quantity the run could measure, keyed as in assertions.
  std::map<std::string, double> metrics;
  std::vector<RateReport> rates;
  std::optional<CertificateReport> certificate;
  // Where the tail sat relative to the ball B(0, ‖x*‖), when x* is known.
  std::optional<std::string> ball_regime;
  std::vector<AssertionResult> assertions;
  bool pass = true;

  // Not serialized: keeps JSON reports byte-stable across reruns.
  double wall_clock_s = 0.0;

  // Raw data for CSV emission; not serialized.
  std::shared_ptr<const DynamicsSpec> dynamics;
  std::shared_ptr<const Trajectory> trajectory;
  std::shared_ptr<const IterateLog> iterates;
  long log_every = 0;
};

RunReport run(const ExperimentConfig& config);

/// Runs every config, in parallel when TRIGS_THREADS > 1. Reports are in
/// config order and identical to sequential execution.
std::vector<RunReport> sweep(const std::vector<ExperimentConfig>& configs);
int sweep_threads();

/// True when every report passed.
bool all_passed(const std::vector<RunReport>& reports);

// ---------------------------------------------------------------------------
// Emission

std::string to_json(const RunReport& report);
std::string to_json(const std::vector<RunReport>& reports);
/// Rebuilds the serialized part of a report.
RunReport report_from_json(const std::string& text);
std::vector<RunReport> reports_from_json(const std::string& text);

std::string to_json(const RateReport& rate);

/// Trajectory or iterate CSV for a report that carries data.
void emit_csv(std::ostream& os, const RunReport& report);

/// Writes <dir>/<name>.json and, when data is present, <dir>/<name>.csv.
void emit_files(const RunReport& report, const std::string& dir);

}  // namespace trigs
