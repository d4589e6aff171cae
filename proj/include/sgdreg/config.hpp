#pragma once

// Run configuration: a sectioned key = value text file (INI syntax; '#' or ';'
// start a comment at the beginning of a line or after whitespace). Every key is optional and has the default shown in
// serialize_config(RunConfig{}).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sgdreg {

struct ProblemConfig {
  std::string type = "tp1";  // tp1 | tp2 | tp1_broken_adjoint (negative-path test double)
  std::size_t m = 64;
  std::size_t n = 4;
  std::string layout = "contiguous";  // contiguous | round_robin
  double s = 1.0;                     // tp1 singular value decay
  double kappa = 0.0;                 // tp1 quadratic perturbation
  double c_background = 1.0;          // tp2 initial guess / reference coefficient
  std::string forcing = "sine";       // tp2: sine | one | zero
  double forcing_scale = 1.0;         // tp2 forcing amplitude

  bool operator==(const ProblemConfig&) const = default;
};

struct SolverConfig {
  std::string variant = "sgd";         // sgd | landweber | sgd_projected
  std::string schedule = "polynomial";  // constant | polynomial
  double eta0 = 0.5;
  double alpha = 0.5;
  std::optional<double> box_lo;  // sgd_projected: componentwise bounds
  std::optional<double> box_hi;
  bool enforce_step_bound = true;

  bool operator==(const SolverConfig&) const = default;
};

struct SourceConfig {
  bool present = false;
  double nu = 0.5;
  std::string w = "power";  // power | e1 | ones | sine | file
  double w_decay = 0.5;     // power: w_j proportional to j^-w_decay
  double w_norm = 1.0;      // w is rescaled to this norm
  std::string w_file;       // file: whitespace separated values

  bool operator==(const SourceConfig&) const = default;
};

struct NoiseConfig {
  double delta = 0.0;
  std::uint64_t seed = 1;
  bool fresh = false;  // new noise draw per path

  bool operator==(const NoiseConfig&) const = default;
};

struct StoppingConfig {
  std::string rule = "max_iter";  // max_iter | apriori | kstar
  std::size_t max_iter = 1000;
  std::string apriori_table;  // "0.1:100, 0.01:1000"; empty uses the power law
  double apriori_scale = 1.0;  // k = ceil(scale * delta^-power)
  double apriori_power = 1.0;

  bool operator==(const StoppingConfig&) const = default;
};

struct McConfig {
  std::size_t M = 100;
  std::uint64_t seed = 1;
  std::string checkpoints = "log";  // log | comma separated k list
  std::size_t per_decade = 20;

  bool operator==(const McConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::string prefix = "run";

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  ProblemConfig problem;
  SolverConfig solver;
  SourceConfig source;
  NoiseConfig noise;
  StoppingConfig stopping;
  McConfig mc;
  OutputConfig output;

  bool operator==(const RunConfig&) const = default;
};

/// Parses config text. Unknown sections or keys and malformed values raise
/// ValidationError naming the field. Runs validate_config.
RunConfig parse_config(const std::string& text);
/// Reads and parses a file; IoError when unreadable.
RunConfig load_config(const std::string& path);
/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Sets one field from its text form ("section", "key", "value"), then
/// re-validates the whole config.
void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value);

/// Applies several "section.key=value" assignments, then validates once, so
/// that fields which depend on each other can change together.
void set_config_values(RunConfig& config, const std::vector<std::string>& assignments);

/// Cross-field checks that need no problem evaluation.
void validate_config(const RunConfig& config);

}  // namespace sgdreg
