#pragma once

// Subcommand implementations shared by the C API and the command-line tool.
// Each returns an exit status (0 ok, 1 check failed) and throws sgdreg::Error
// for validation, numerical and I/O failures.

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sgdreg/analysis.hpp"
#include "sgdreg/config.hpp"
#include "sgdreg/mc.hpp"

namespace sgdreg {

struct CommandOptions {
  std::optional<std::uint64_t> seed;  // overrides mc.seed
  unsigned threads = 1;
  std::optional<std::string> out_dir;  // overrides output.dir
  std::ostream* out = nullptr;         // human-readable report, may be null
};

std::shared_ptr<const NonlinearSystem> make_system(const ProblemConfig& problem);
StepSchedule make_schedule(const SolverConfig& solver);
StoppingRule make_stopping_rule(const RunConfig& config);
/// "0.1:100, 0.01:1000" -> {(0.1, 100), (0.01, 1000)}
std::vector<std::pair<double, std::size_t>> parse_apriori_table(const std::string& text);
/// Source representer w for the pattern in `source`, scaled to source.w_norm.
HVector make_representer(const SourceConfig& source, const Weights& weights);

/// A config resolved into everything an ensemble needs.
struct PreparedRun {
  RunConfig config;
  Experiment experiment;
  PathPlan plan;
  StoppingRule rule;
  HVector w;
  SourceTruth truth;
  double deriv_bound = 0.0;
};

/// Builds the system, the manufactured solution x_dag = x_1 + B(x_dag)^nu w,
/// data, the stopping index and checkpoints. Validates eta0 against the
/// estimated derivative bound when solver.enforce_step_bound is set.
PreparedRun prepare_run(const RunConfig& config, const CommandOptions& options);

/// Writes <dir>/<prefix>_ensemble.csv and <prefix>_summary.txt.
int cmd_run(const RunConfig& config, const CommandOptions& options);

extern const std::vector<std::string> kVerifyChecks;

/// Runs the named checks (kVerifyChecks) and writes <prefix>_verify.csv,
/// plus <prefix>_ineq.csv and <prefix>_apriori.csv when those checks ran.
/// Returns 1 if any check fails.
int cmd_verify(const RunConfig& config, const std::vector<std::string>& checks,
               const CommandOptions& options);

/// One ensemble per value of `param` (delta | alpha | nu | M). Writes
/// <prefix>_sweep.csv (ensemble rows tagged by value) and
/// <prefix>_sweep_summary.csv. With `fit`, delta sweeps fit the stopping-time
/// mse against delta (target 4 nu / (2 nu + 1)) and the other parameters fit
/// mse against k per value (target -beta); returns 1 if a fit misses.
int cmd_sweep(const RunConfig& config, const std::string& param,
              const std::vector<double>& values, bool fit, const CommandOptions& options);

struct FitRequest {
  std::string csv_path;
  std::string column = "mse";  // mse | berr_mse | residual_mse
  double k_min = 0.0;          // 0: default window
  double k_max = 0.0;
  double target = 0.0;
  double tol = 0.15;
  std::string out_path;  // optional (log k, log y) CSV
};

/// Fits a column of an ensemble CSV; returns 1 when the slope misses the target.
int cmd_fit(const FitRequest& request, const CommandOptions& options);

/// Reads an ensemble CSV written by ensemble_csv.
std::vector<MCEstimate> read_ensemble_csv(const std::string& path);

/// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace sgdreg
