#pragma once

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "crowdbp/config.hpp"
#include "crowdbp/iteration.hpp"
#include "crowdbp/stats.hpp"
#include "crowdbp/theory.hpp"

namespace crowdbp {

enum class ExperimentKind {
  relative_error_vs_k,
  error_vs_r,
  series_moments,
  custom_sweep,
};

// Convergence checks for the relative-error experiment; presets choose the
// mode matching their crowd.
enum class CheckMode { none, converges, diverges };

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::relative_error_vs_k;
  int n_questions = 100;
  int n_users = 100;
  int r = 10;
  int s = 10;
  int iterations = 15;  // K; meta-task count for the series experiment
  int replications = 50;
  Variant variant = Variant::raw;
  ReliabilitySpec reliability;
  TruthPolicy truth = TruthPolicy::all_plus_one;
  Seed master_seed = 20240501;
  std::string output_path = "out";

  bool resample_graph = false;  // relative_error_vs_k: fresh graph per replication
  bool resample_init = true;    // relative_error_vs_k: fresh y(0) per replication
  CarryRule carry_rule = CarryRule::user_mean;
  Real init_mean = 1.0;
  Real init_variance = 1.0;
  Real magnitude_warn = 1e100;
  bool track_all_edges = false;

  // error_vs_r protocol
  std::vector<int> r_values = {2, 3, 4, 5, 6, 8, 10, 12};
  int steady_max_iterations = 50;
  Real steady_tol = 1e-6;

  // custom_sweep protocol
  std::string sweep_key = "r";
  std::vector<int> sweep_values;

  // Check thresholds (summary.txt pass/fail lines; exit code 2 on failure).
  CheckMode check_mode = CheckMode::none;
  Real check_rel_err_threshold = 0.2;
  Real check_diverge_floor = 0.5;
  int check_monotone_from = 4;
  int check_bump_low = 3;
  int check_bump_high = 8;
  Real check_mean_se = 4.0;
  Real check_mean_cell_fraction = 0.95;
  Real check_var_cell_fraction = 0.99;
  Real check_decision_agreement = 0.95;

  ConfigMap raw;  // as parsed, for provenance
};

/// Builds and validates an ExperimentConfig; unknown keys and infeasible
/// parameter combinations raise ConfigError. `phi_squared` (the squared
/// second moment of centered reliability) may be given instead of
/// `reliability_variance`; the variance is derived from it.
ExperimentConfig make_experiment_config(const ConfigMap& cfg);

struct CheckResult {
  std::string name;
  bool passed;
  std::string detail;
};

bool all_passed(const std::vector<CheckResult>& checks);

struct EdgeStatsRow {
  int k;
  Real mu_hat;
  Real var_hat;
  Real rel_err;          // sqrt(var_hat) / |mu_hat|
  bool rel_err_defined;  // false when |mu_hat| < 1e-12
};

struct RelativeErrorResult {
  ExperimentConfig cfg;
  int tracked_edge = 0;
  int tracked_user = 0;
  int tracked_question = 0;
  Real tracked_p = 0.0;
  Real ep_hat = 0.0;   // post-clip empirical crowd moments
  Real phi_hat = 0.0;
  std::optional<int> graph_girth;
  std::vector<EdgeStatsRow> tracked;  // k = 1..K
  struct QuantileRow {
    int k;
    Real q10, q50, q90;  // of rel_err over edges with defined values
    int n_defined, n_missing;
  };
  std::vector<QuantileRow> quantiles;
  MomentPrediction exact_k1{0, 0, 1, false};
  MomentPrediction approx_k1{0, 0, 1, false};
  std::vector<std::tuple<int, int, Real>> trajectory_rows;  // (k, edge, value)
  std::optional<int> magnitude_warning_k;
  std::vector<CheckResult> checks;
};

RelativeErrorResult run_relative_error_experiment(const ExperimentConfig& cfg);

struct ErrorVsRResult {
  ExperimentConfig cfg;
  struct Point {
    int r;
    int n_users;
    Real mean_percent_error;
    Real se;
    std::vector<Real> rep_percent_errors;
  };
  std::vector<Point> points;
  std::vector<std::string> warnings;  // skipped sweep values
  std::vector<CheckResult> checks;
};

ErrorVsRResult run_error_vs_r_experiment(const ExperimentConfig& cfg);

struct SeriesResult {
  ExperimentConfig cfg;
  Real ep_hat = 0.0;
  Real phi_hat = 0.0;
  bool condition_holds = false;
  struct Cell {
    int user;
    int k;
    Real mu_hat, se, mu_pred;
    Real var_hat, var_bound;
    bool mean_ok, var_ok;
  };
  std::vector<Cell> cells;  // user-major, k ascending
  Real mean_ok_fraction = 0.0;
  Real var_ok_fraction = 0.0;
  Real final_agreement = 0.0;  // decide() vs. limiting rule at k = K
  std::vector<CheckResult> checks;
};

SeriesResult run_series_experiment(const ExperimentConfig& cfg);

struct SweepResult {
  ExperimentConfig cfg;
  struct Row {
    int value;
    int k;
    Real mean_error_rate;
  };
  std::vector<Row> rows;
  std::vector<std::string> warnings;
  std::vector<CheckResult> checks;
};

SweepResult run_custom_sweep(const ExperimentConfig& cfg);

// ---- output files ----

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC-4180-style CSV with a header row, preceded by one metadata comment
/// line `# config_hash=<hex> seed=<seed>`. I/O failures carry the path.
void emit_csv(const CsvTable& table, const std::string& path,
              std::uint64_t config_hash_value, Seed seed);

std::string format_real(Real x);

// Writes the experiment's CSVs plus summary.txt under out_dir.
void write_outputs(const RelativeErrorResult& result, const std::string& out_dir);
void write_outputs(const ErrorVsRResult& result, const std::string& out_dir);
void write_outputs(const SeriesResult& result, const std::string& out_dir);
void write_outputs(const SweepResult& result, const std::string& out_dir);

// Runs the configured experiment and writes its outputs; returns true when
// all summary checks passed.
bool run_and_write(const ExperimentConfig& cfg, const std::string& out_dir);

// ---- presets ----

struct Preset {
  std::string name;
  std::string description;
  std::string text;
};

const std::vector<Preset>& builtin_presets();
const Preset* find_preset(const std::string& name);

}  // namespace crowdbp
