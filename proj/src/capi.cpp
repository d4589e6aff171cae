#include "sgdreg/sgdreg.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "sgdreg/commands.hpp"
#include "sgdreg/error.hpp"

struct sgdreg_config {
  sgdreg::RunConfig config;
};

struct sgdreg_ensemble {
  std::vector<sgdreg::MCEstimate> rows;
};

namespace {

thread_local std::string last_error;

sgdreg_status fail(sgdreg_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class F>
sgdreg_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const sgdreg::Error& e) {
    switch (e.kind()) {
      case sgdreg::ErrorKind::Validation:
        return fail(SGDREG_ERR_VALIDATION, e.what());
      case sgdreg::ErrorKind::Numerical:
        return fail(SGDREG_ERR_NUMERICAL, e.what());
      case sgdreg::ErrorKind::Io:
        return fail(SGDREG_ERR_IO, e.what());
    }
    return fail(SGDREG_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SGDREG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SGDREG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SGDREG_ERR_INTERNAL, "unknown exception");
  }
}

sgdreg::CommandOptions to_options(const sgdreg_options_t* o) {
  sgdreg::CommandOptions out;
  out.out = &std::cout;
  if (!o) return out;
  if (o->has_seed) out.seed = o->seed;
  out.threads = o->threads == 0 ? 1 : o->threads;
  if (o->out_dir) out.out_dir = std::string(o->out_dir);
  if (o->quiet) out.out = nullptr;
  return out;
}

sgdreg_status from_exit(int code) {
  return code == 0 ? SGDREG_OK : fail(SGDREG_CHECK_FAILED, "check failed");
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

std::vector<std::string> split_list(const char* text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
  }
  return out;
}

}  // namespace

extern "C" {

void sgdreg_options_init(sgdreg_options_t* options) {
  if (!options) return;
  options->has_seed = 0;
  options->seed = 0;
  options->threads = 1;
  options->out_dir = nullptr;
  options->quiet = 0;
}

sgdreg_status sgdreg_config_default(sgdreg_config_t** out) {
  if (!out) return fail(SGDREG_ERR_NULL, "out is NULL");
  return guarded([&] {
    *out = new sgdreg_config{};
    return SGDREG_OK;
  });
}

sgdreg_status sgdreg_config_load(const char* path, sgdreg_config_t** out) {
  if (!path || !out) return fail(SGDREG_ERR_NULL, "path or out is NULL");
  return guarded([&] {
    *out = new sgdreg_config{sgdreg::load_config(path)};
    return SGDREG_OK;
  });
}

sgdreg_status sgdreg_config_parse(const char* text, sgdreg_config_t** out) {
  if (!text || !out) return fail(SGDREG_ERR_NULL, "text or out is NULL");
  return guarded([&] {
    *out = new sgdreg_config{sgdreg::parse_config(text)};
    return SGDREG_OK;
  });
}

sgdreg_status sgdreg_config_set(sgdreg_config_t* config, const char* section, const char* key,
                                const char* value) {
  if (!config || !section || !key || !value) return fail(SGDREG_ERR_NULL, "NULL argument");
  return guarded([&] {
    sgdreg::set_config_value(config->config, section, key, value);
    return SGDREG_OK;
  });
}

sgdreg_status sgdreg_config_set_many(sgdreg_config_t* config, const char* const* assignments,
                                     size_t count) {
  if (!config || (count > 0 && !assignments)) return fail(SGDREG_ERR_NULL, "NULL argument");
  return guarded([&] {
    std::vector<std::string> list;
    for (size_t i = 0; i < count; ++i) {
      if (!assignments[i]) return fail(SGDREG_ERR_NULL, "NULL assignment");
      list.emplace_back(assignments[i]);
    }
    sgdreg::set_config_values(config->config, list);
    return SGDREG_OK;
  });
}

sgdreg_status sgdreg_config_serialize(const sgdreg_config_t* config, char** out_text) {
  if (!config || !out_text) return fail(SGDREG_ERR_NULL, "NULL argument");
  return guarded([&] {
    *out_text = dup_string(sgdreg::serialize_config(config->config));
    return SGDREG_OK;
  });
}

void sgdreg_config_destroy(sgdreg_config_t* config) { delete config; }

void sgdreg_string_free(char* text) { std::free(text); }

sgdreg_status sgdreg_cmd_run(const sgdreg_config_t* config, const sgdreg_options_t* options) {
  if (!config) return fail(SGDREG_ERR_NULL, "config is NULL");
  return guarded([&] { return from_exit(sgdreg::cmd_run(config->config, to_options(options))); });
}

sgdreg_status sgdreg_cmd_verify(const sgdreg_config_t* config, const char* checks,
                                const sgdreg_options_t* options) {
  if (!config || !checks) return fail(SGDREG_ERR_NULL, "config or checks is NULL");
  return guarded([&] {
    return from_exit(sgdreg::cmd_verify(config->config, split_list(checks), to_options(options)));
  });
}

sgdreg_status sgdreg_cmd_sweep(const sgdreg_config_t* config, const char* param,
                               const double* values, size_t count, int fit,
                               const sgdreg_options_t* options) {
  if (!config || !param || (!values && count > 0)) return fail(SGDREG_ERR_NULL, "NULL argument");
  return guarded([&] {
    const std::vector<double> v(values, values + count);
    return from_exit(sgdreg::cmd_sweep(config->config, param, v, fit != 0, to_options(options)));
  });
}

sgdreg_status sgdreg_cmd_fit(const char* csv_path, const char* column, double k_min, double k_max,
                             double target, double tol, const char* points_out,
                             const sgdreg_options_t* options) {
  if (!csv_path || !column) return fail(SGDREG_ERR_NULL, "csv_path or column is NULL");
  return guarded([&] {
    sgdreg::FitRequest req;
    req.csv_path = csv_path;
    req.column = column;
    req.k_min = k_min;
    req.k_max = k_max;
    req.target = target;
    req.tol = tol;
    if (points_out) req.out_path = points_out;
    return from_exit(sgdreg::cmd_fit(req, to_options(options)));
  });
}

sgdreg_status sgdreg_ensemble_run(const sgdreg_config_t* config, const sgdreg_options_t* options,
                                  sgdreg_ensemble_t** out) {
  if (!config || !out) return fail(SGDREG_ERR_NULL, "config or out is NULL");
  return guarded([&] {
    const auto run = sgdreg::prepare_run(config->config, to_options(options));
    *out = new sgdreg_ensemble{sgdreg::run_ensemble(run.experiment, run.plan)};
    return SGDREG_OK;
  });
}

size_t sgdreg_ensemble_size(const sgdreg_ensemble_t* ensemble) {
  return ensemble ? ensemble->rows.size() : 0;
}

sgdreg_status sgdreg_ensemble_row(const sgdreg_ensemble_t* ensemble, size_t index,
                                  sgdreg_estimate_t* out) {
  if (!ensemble || !out) return fail(SGDREG_ERR_NULL, "ensemble or out is NULL");
  if (index >= ensemble->rows.size()) return fail(SGDREG_ERR_VALIDATION, "row index out of range");
  const auto& e = ensemble->rows[index];
  out->k = e.k;
  out->mse = e.mse;
  out->mse_stderr = e.mse_stderr;
  out->bias_sq = e.bias_sq;
  out->variance = e.variance;
  out->has_berr = e.berr_mse.has_value() ? 1 : 0;
  out->berr_mse = e.berr_mse.value_or(0.0);
  out->berr_stderr = e.berr_stderr.value_or(0.0);
  out->residual_mse = e.residual_mse;
  out->M = e.M;
  out->seed = e.seed;
  return SGDREG_OK;
}

sgdreg_status sgdreg_ensemble_csv(const sgdreg_ensemble_t* ensemble, char** out_text) {
  if (!ensemble || !out_text) return fail(SGDREG_ERR_NULL, "ensemble or out_text is NULL");
  return guarded([&] {
    *out_text = dup_string(sgdreg::ensemble_csv(ensemble->rows));
    return SGDREG_OK;
  });
}

void sgdreg_ensemble_destroy(sgdreg_ensemble_t* ensemble) { delete ensemble; }

sgdreg_status sgdreg_check_lemma(const char* lemma, size_t trials, uint64_t seed,
                                 double* max_violation) {
  if (!lemma || !max_violation) return fail(SGDREG_ERR_NULL, "lemma or max_violation is NULL");
  return guarded([&] {
    std::vector<sgdreg::IneqReport> reports;
    const std::string id = lemma;
    if (id == "a1") {
      reports.push_back(sgdreg::check_lemma_a1(trials, seed));
    } else if (id == "a2") {
      reports = sgdreg::check_lemma_a2(trials, seed);
    } else if (id == "a3") {
      reports = sgdreg::check_lemma_a3(trials, seed);
    } else {
      throw sgdreg::ValidationError("unknown lemma '" + id + "' (expected a1, a2 or a3)");
    }
    double worst = -1.0;
    bool ok = true;
    for (const auto& r : reports) {
      worst = std::max(worst, r.max_violation);
      ok = ok && r.pass();
    }
    *max_violation = worst;
    return ok ? SGDREG_OK : fail(SGDREG_CHECK_FAILED, "inequality violated");
  });
}

const char* sgdreg_last_error(void) { return last_error.c_str(); }

const char* sgdreg_version(void) { return "0.1.0"; }

}  // extern "C"
