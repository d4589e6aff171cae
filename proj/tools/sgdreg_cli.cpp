// sgdreg: run ensembles, sweeps, verifiers and rate fits from a config file.
//
// Exit codes: 0 success, 1 check failed, 2 validation or I/O error,
// 3 numerical failure, 4 internal error.

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "sgdreg/sgdreg.h"

namespace {

int exit_code(sgdreg_status s) {
  switch (s) {
    case SGDREG_OK:
      return 0;
    case SGDREG_CHECK_FAILED:
      return 1;
    case SGDREG_ERR_VALIDATION:
    case SGDREG_ERR_IO:
      return 2;
    case SGDREG_ERR_NUMERICAL:
      return 3;
    default:
      return 4;
  }
}

int report(sgdreg_status s) {
  if (s != SGDREG_OK && s != SGDREG_CHECK_FAILED) {
    std::fprintf(stderr, "error: %s\n", sgdreg_last_error());
  } else if (s == SGDREG_CHECK_FAILED) {
    std::fprintf(stderr, "check failed\n");
  }
  return exit_code(s);
}

struct ConfigHandle {
  sgdreg_config_t* ptr = nullptr;
  ~ConfigHandle() { sgdreg_config_destroy(ptr); }
};

// Loads the config and applies section.key=value overrides.
sgdreg_status load(const std::string& path, const std::vector<std::string>& overrides,
                   ConfigHandle& cfg) {
  sgdreg_status s = sgdreg_config_load(path.c_str(), &cfg.ptr);
  if (s != SGDREG_OK) return s;
  std::vector<const char*> list;
  for (const auto& o : overrides) list.push_back(o.c_str());
  return sgdreg_config_set_many(cfg.ptr, list.data(), list.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGD for nonlinear ill-posed systems: ensembles, sweeps, checks and rate fits"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sgdreg_version()));

  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out_dir;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides mc.seed)");
  app.add_option("--threads", threads, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber);
  auto* dir_opt = app.add_option("--out-dir", out_dir, "Output directory (overrides output.dir)");

  std::string config_path;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "Run a Monte Carlo ensemble");
  run->fallthrough();
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--set", overrides, "Override section.key=value");

  std::string checks = "adjoint,fd,cone,range_invariance,lemma_a1,lemma_a2,lemma_a3";
  auto* verify = app.add_subcommand("verify", "Run assumption verifiers and inequality checks");
  verify->fallthrough();
  verify->add_option("config", config_path, "Config file")->required();
  verify->add_option("--checks", checks,
                     "Comma separated: adjoint,fd,cone,range_invariance,lemma_a1,lemma_a2,"
                     "lemma_a3,apriori")
      ->capture_default_str();
  verify->add_option("--set", overrides, "Override section.key=value");

  std::string param;
  std::vector<double> values;
  bool fit = false;
  auto* sweep = app.add_subcommand("sweep", "One ensemble per parameter value");
  sweep->fallthrough();
  sweep->add_option("config", config_path, "Config file")->required();
  sweep->add_option("--param", param, "delta | alpha | nu | M")->required();
  sweep->add_option("--values", values, "Comma separated values")->required()->delimiter(',');
  sweep->add_flag("--fit", fit, "Fit rates and compare with the predicted exponents");
  sweep->add_option("--set", overrides, "Override section.key=value");

  std::string csv_path, column = "mse", points_out;
  double k_min = 0.0, k_max = 0.0, target = 0.0, tol = 0.15;
  auto* fitcmd = app.add_subcommand("fit", "Fit a log-log slope to an ensemble CSV");
  fitcmd->fallthrough();
  fitcmd->add_option("csv", csv_path, "Ensemble CSV")->required();
  fitcmd->add_option("--column", column, "mse | berr_mse | residual_mse")->capture_default_str();
  fitcmd->add_option("--kmin", k_min, "Window start (0: k_last/100)");
  fitcmd->add_option("--kmax", k_max, "Window end (0: k_last)");
  fitcmd->add_option("--target", target, "Target slope")->required();
  fitcmd->add_option("--tol", tol, "Slope tolerance")->capture_default_str();
  fitcmd->add_option("--points", points_out, "Write (log k, log y) pairs here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  sgdreg_options_t opts;
  sgdreg_options_init(&opts);
  opts.has_seed = seed_opt->count() > 0 ? 1 : 0;
  opts.seed = seed;
  opts.threads = threads;
  opts.out_dir = dir_opt->count() > 0 ? out_dir.c_str() : nullptr;

  if (*fitcmd) {
    return report(sgdreg_cmd_fit(csv_path.c_str(), column.c_str(), k_min, k_max, target, tol,
                                 points_out.empty() ? nullptr : points_out.c_str(), &opts));
  }

  ConfigHandle cfg;
  if (const sgdreg_status s = load(config_path, overrides, cfg); s != SGDREG_OK) return report(s);
  if (*run) return report(sgdreg_cmd_run(cfg.ptr, &opts));
  if (*verify) return report(sgdreg_cmd_verify(cfg.ptr, checks.c_str(), &opts));
  return report(sgdreg_cmd_sweep(cfg.ptr, param.c_str(), values.data(), values.size(),
                                 fit ? 1 : 0, &opts));
}
