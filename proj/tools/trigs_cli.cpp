// trigs: command-line front end for the harness.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trigs/errors.hpp"
#include "trigs/harness.hpp"
#include "trigs/objectives.hpp"
#include "trigs/schedules.hpp"

namespace fs = std::filesystem;
using namespace trigs;

namespace {

// Human-readable lines; stderr when stdout carries JSON.
void print_summary(std::FILE* os, const RunReport& r) {
  std::fprintf(os, "%-24s %s", r.name.c_str(), r.pass ? "PASS" : "FAIL");
  if (r.error) std::fprintf(os, "  error: %s", r.error->c_str());
  std::fprintf(os, "  (%.2f s)\n", r.wall_clock_s);
  for (const auto& w : r.warnings) std::fprintf(os, "  warning: %s\n", w.c_str());
  for (const auto& a : r.assertions) {
    if (a.measured) {
      std::fprintf(os, "  [%s] %s  measured %.6g\n", a.pass ? "ok" : "FAIL", a.expression.c_str(), *a.measured);
    } else {
      std::fprintf(os, "  [FAIL] %s  not measured\n", a.expression.c_str());
    }
  }
}

int cmd_check_schedule(const std::string& spec, double delta, double K, std::optional<double> t1,
                       double horizon) {
  const auto schedule = parse_schedule(spec);
  const Certificate cert{delta, K, t1.value_or(schedule.t0())};
  const auto range = admissible_K_range(delta);
  std::printf("schedule      %s\n", schedule.spec().c_str());
  std::printf("admissible K  (%.17g, %.17g)\n", range.lo, range.hi);
  const auto v = cd_check(schedule, cert, horizon);
  std::printf("bound         %.17g\n", v.bound);
  std::printf("max slope     %.17g\n", v.max_slope);
  std::printf("worst margin  %.17g at t = %.17g\n", v.worst_margin, v.worst_t);
  std::printf("verdict       %s\n", v.satisfied ? "satisfied" : "violated");
  return v.satisfied ? 0 : 1;
}

int cmd_run(const std::string& path, const std::string& out) {
  const auto cfg = load_config(path);
  const auto rep = run(cfg);
  if (out.empty()) {
    std::cout << to_json(rep);
  } else {
    emit_files(rep, out);
  }
  print_summary(out.empty() ? stderr : stdout, rep);
  return rep.pass ? 0 : 1;
}

int cmd_sweep(const std::string& dir, const std::string& out) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".cfg") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ExperimentConfig> configs;
  for (const auto& f : files) {
    try {
      configs.push_back(load_config(f.string()));
    } catch (const ConfigError& e) {
      throw ConfigError(e.line(), f.filename().string() + ": " + e.what());
    }
  }
  const auto reports = sweep(configs);
  if (out.empty()) {
    std::cout << to_json(reports);
  } else {
    for (const auto& r : reports) emit_files(r, out);
    std::ofstream os(fs::path(out) / "sweep.json", std::ios::binary);
    if (!os) throw Error("cannot write sweep.json in '" + out + "'");
    os << to_json(reports);
  }
  for (const auto& r : reports) print_summary(out.empty() ? stderr : stdout, r);
  return all_passed(reports) ? 0 : 1;
}

int cmd_fit_rate(const std::string& input, const std::string& column, double window,
                 bool log_correction, bool exponential) {
  std::ifstream in(input);
  if (!in) throw Error("cannot read '" + input + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error("'" + input + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw Error("no column '" + column + "' in '" + input + "'");
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> t, y;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw Error("ragged row in '" + input + "'");
    t.push_back(std::stod(cells[0]));
    y.push_back(std::stod(cells[col]));
  }
  const auto rep = exponential ? exp_rate_fit(t, y, window, column)
                               : rate_fit(t, y, window, log_correction, column);
  std::cout << to_json(rep);
  if (rep.nonpositive > 0) {
    std::fprintf(stderr, "note: %d nonpositive values dropped from the window\n", rep.nonpositive);
  }
  return 0;
}

int cmd_list_problems() {
  for (const auto& p : list_problems()) std::printf("%-16s %s\n", p.pattern.c_str(), p.description.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tikhonov-regularized inertial dynamics and proximal algorithms"};
  app.require_subcommand(1);

  std::string schedule;
  double delta = 2.0, K = 1.5, horizon = 1e3;
  std::optional<double> t1;
  auto* check = app.add_subcommand("check-schedule", "Controlled-decay check for a schedule");
  check->add_option("--schedule", schedule, "power:c=,r= | rational:M=,C= | const:c=")->required();
  check->add_option("--delta", delta, "damping scale")->required();
  check->add_option("--K", K, "Lyapunov parameter")->required();
  check->add_option("--t1", t1, "start of the check (default t0)");
  check->add_option("--horizon", horizon, "end of the check")->capture_default_str();

  std::string config, out;
  auto* runc = app.add_subcommand("run", "Run one experiment config");
  runc->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  runc->add_option("--out", out, "output directory for JSON and CSV");

  std::string config_dir;
  auto* sweepc = app.add_subcommand("sweep", "Run every *.cfg in a directory");
  sweepc->add_option("--config-dir", config_dir, "directory of configs")->required()->check(CLI::ExistingDirectory);
  sweepc->add_option("--out", out, "output directory");

  std::string input, column;
  double window = 0.5;
  bool log_correction = false, exponential = false;
  auto* fit = app.add_subcommand("fit-rate", "Fit a log-log slope to a CSV column");
  fit->add_option("--input", input, "CSV file; first column is t or k")->required()->check(CLI::ExistingFile);
  fit->add_option("--column", column, "column name")->required();
  fit->add_option("--window", window, "trailing fraction of the ln t range")->capture_default_str();
  fit->add_flag("--log-correction", log_correction, "divide by ln t before fitting");
  fit->add_flag("--exponential", exponential, "fit ln y against t");

  auto* list = app.add_subcommand("list-problems", "Show the problem registry");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check) return cmd_check_schedule(schedule, delta, K, t1, horizon);
    if (*runc) return cmd_run(config, out);
    if (*sweepc) return cmd_sweep(config_dir, out);
    if (*fit) return cmd_fit_rate(input, column, window, log_correction, exponential);
    if (*list) return cmd_list_problems();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
