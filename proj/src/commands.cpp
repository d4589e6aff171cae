#include "sgdreg/commands.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sgdreg/error.hpp"
#include "sgdreg/test_problems.hpp"

namespace sgdreg {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

double parse_double(const std::string& what, const std::string& text) {
  const std::string t = trim(text);
  try {
    std::size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(what + ": expected a number, got '" + text + "'");
}

// Test double for the negative path of the adjoint check: the adjoint is
// off by one percent.
class BrokenAdjoint final : public NonlinearSystem {
 public:
  explicit BrokenAdjoint(std::shared_ptr<const NonlinearSystem> inner) : inner_(std::move(inner)) {}
  std::size_t num_equations() const override { return inner_->num_equations(); }
  const Weights& x_weights() const override { return inner_->x_weights(); }
  const Weights& y_weights(std::size_t i) const override { return inner_->y_weights(i); }
  HVector apply(std::size_t i, const HVector& x) const override { return inner_->apply(i, x); }
  HVector deriv_apply(std::size_t i, const HVector& x, const HVector& h) const override {
    return inner_->deriv_apply(i, x, h);
  }
  HVector deriv_adjoint_apply(std::size_t i, const HVector& x, const HVector& g) const override {
    return 1.01 * inner_->deriv_adjoint_apply(i, x, g);
  }
  std::string name() const override { return "tp1_broken_adjoint"; }

 private:
  std::shared_ptr<const NonlinearSystem> inner_;
};

std::string out_dir(const RunConfig& config, const CommandOptions& options) {
  return options.out_dir ? *options.out_dir : config.output.dir;
}

std::string out_path(const RunConfig& config, const CommandOptions& options,
                     const std::string& suffix) {
  const fs::path dir(out_dir(config, options));
  return (dir / (config.output.prefix + suffix)).string();
}

void report(const CommandOptions& options, const std::string& text) {
  if (options.out) *options.out << text;
}

std::vector<std::size_t> resolve_checkpoints(const McConfig& mc, std::size_t updates) {
  if (mc.checkpoints == "log") return log_checkpoints(updates + 1, mc.per_decade);
  std::vector<std::size_t> ks;
  for (const auto& item : split(mc.checkpoints, ',')) {
    const double v = parse_double("mc.checkpoints", item);
    ks.push_back(static_cast<std::size_t>(v));
  }
  if (ks.back() > updates + 1) {
    throw ValidationError("mc.checkpoints: " + std::to_string(ks.back()) +
                          " exceeds the final iterate index " + std::to_string(updates + 1));
  }
  return ks;
}

MCEstimate final_estimate(const std::vector<MCEstimate>& rows) { return rows.back(); }

}  // namespace

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + target.parent_path().string());
  }
  const fs::path tmp =
      target.string() + ".tmp." + std::to_string(static_cast<long long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename temporary file onto " + path);
  }
}

std::shared_ptr<const NonlinearSystem> make_system(const ProblemConfig& p) {
  if (p.type == "tp2") {
    Tp2Params params;
    params.m = p.m;
    params.n = p.n;
    params.c_background = p.c_background;
    params.forcing = parse_forcing(p.forcing);
    params.forcing_scale = p.forcing_scale;
    params.layout = parse_block_layout(p.layout);
    return std::make_shared<Tp2PotentialBvp>(params);
  }
  Tp1Params params;
  params.m = p.m;
  params.n = p.n;
  params.s = p.s;
  params.kappa = p.kappa;
  params.layout = parse_block_layout(p.layout);
  auto tp1 = std::make_shared<Tp1Diagonal>(params);
  if (p.type == "tp1_broken_adjoint") return std::make_shared<BrokenAdjoint>(tp1);
  if (p.type != "tp1") throw ValidationError("problem.type: unknown problem '" + p.type + "'");
  return tp1;
}

StepSchedule make_schedule(const SolverConfig& solver) {
  StepSchedule s = solver.schedule == "constant" ? StepSchedule::constant(solver.eta0)
                                                 : StepSchedule::polynomial(solver.eta0, solver.alpha);
  validate_schedule_shape(s);
  return s;
}

std::vector<std::pair<double, std::size_t>> parse_apriori_table(const std::string& text) {
  std::vector<std::pair<double, std::size_t>> table;
  for (const auto& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) {
      throw ValidationError("stopping.apriori_table: expected delta:k pairs, got '" + item + "'");
    }
    const double delta = parse_double("stopping.apriori_table", parts[0]);
    const double k = parse_double("stopping.apriori_table", parts[1]);
    if (!(delta > 0.0) || !(k >= 1.0) || k != std::floor(k)) {
      throw ValidationError("stopping.apriori_table: invalid pair '" + trim(item) + "'");
    }
    table.emplace_back(delta, static_cast<std::size_t>(k));
  }
  return table;
}

StoppingRule make_stopping_rule(const RunConfig& config) {
  const auto& st = config.stopping;
  if (st.rule == "apriori") {
    if (!st.apriori_table.empty()) {
      return StoppingRule::apriori_table(parse_apriori_table(st.apriori_table));
    }
    return StoppingRule::apriori_power(st.apriori_scale, st.apriori_power);
  }
  if (st.rule == "kstar") {
    return StoppingRule::kstar(config.source.nu, config.solver.alpha, config.source.w_norm);
  }
  return StoppingRule::max_iterations(st.max_iter);
}

HVector make_representer(const SourceConfig& source, const Weights& weights) {
  const std::size_t m = weights->size();
  std::vector<double> w(m, 0.0);
  if (source.w == "power") {
    for (std::size_t j = 0; j < m; ++j) w[j] = std::pow(static_cast<double>(j + 1), -source.w_decay);
  } else if (source.w == "e1") {
    w[0] = 1.0;
  } else if (source.w == "ones") {
    std::fill(w.begin(), w.end(), 1.0);
  } else if (source.w == "sine") {
    for (std::size_t j = 0; j < m; ++j) {
      w[j] = std::sin(std::numbers::pi * static_cast<double>(j + 1) / static_cast<double>(m + 1));
    }
  } else if (source.w == "file") {
    std::ifstream in(source.w_file);
    if (!in) throw IoError("cannot read source.w_file " + source.w_file);
    std::vector<double> values;
    double v = 0.0;
    while (in >> v) values.push_back(v);
    if (!in.eof()) throw ValidationError("source.w_file: non-numeric entry in " + source.w_file);
    if (values.size() != m) {
      throw ValidationError("source.w_file has " + std::to_string(values.size()) +
                            " values, expected " + std::to_string(m));
    }
    w = std::move(values);
  } else {
    throw ValidationError("source.w: unknown pattern '" + source.w + "'");
  }
  HVector out(std::move(w), weights);
  const double nw = norm(out);
  if (!(nw > 0.0)) {
    if (source.w_norm == 0.0) return out;
    throw ValidationError("source.w: representer is zero and cannot be scaled");
  }
  out *= source.w_norm / nw;
  return out;
}

PreparedRun prepare_run(const RunConfig& config, const CommandOptions& options) {
  validate_config(config);
  PreparedRun run;
  run.config = config;
  if (options.seed) run.config.mc.seed = *options.seed;

  auto sys = make_system(config.problem);
  HVector x1 = HVector::zeros(sys->x_weights());
  if (const auto* tp2 = dynamic_cast<const Tp2PotentialBvp*>(sys.get())) x1 = tp2->background();

  run.w = make_representer(config.source, sys->x_weights());
  run.truth = build_source_truth(*sys, x1, SourceSpec{config.source.nu, run.w});

  const StepSchedule schedule = make_schedule(config.solver);
  const HVector probe[] = {x1, run.truth.x_dag};
  run.deriv_bound = estimate_deriv_bound(*sys, probe);
  if (config.solver.enforce_step_bound) validate_schedule(schedule, run.deriv_bound);

  run.rule = make_stopping_rule(config);
  const std::size_t updates = stopping_k(run.rule, config.noise.delta);

  Experiment& ex = run.experiment;
  ex.sys = sys;
  ex.x1 = x1;
  ex.x_dag = run.truth.x_dag;
  ex.y_true = apply_full(*sys, ex.x_dag);
  ex.noise = NoiseModel{config.noise.delta, config.noise.seed};
  ex.b_dag = std::make_shared<NormalForm>(*sys, ex.x_dag);
  ex.schedule = schedule;
  ex.variant = parse_variant(config.solver.variant);
  if (ex.variant == Variant::SgdProjected) {
    const std::size_t m = sys->dim_x();
    ex.box = Box{std::vector<double>(m, *config.solver.box_lo),
                 std::vector<double>(m, *config.solver.box_hi)};
  }
  ex.updates = updates;
  ex.fresh_noise = config.noise.fresh;

  run.plan.M = config.mc.M;
  run.plan.master_seed = run.config.mc.seed;
  run.plan.checkpoints = resolve_checkpoints(config.mc, updates);
  run.plan.threads = std::max(1u, options.threads);
  return run;
}

namespace {

std::string run_summary(const PreparedRun& run, const std::vector<MCEstimate>& rows) {
  const RunConfig& c = run.config;
  std::ostringstream os;
  os << "problem        " << c.problem.type << " m=" << c.problem.m << " n=" << c.problem.n << '\n'
     << "solver         " << c.solver.variant << ", " << c.solver.schedule
     << " eta0=" << short_num(c.solver.eta0);
  if (c.solver.schedule == "polynomial") os << " alpha=" << short_num(c.solver.alpha);
  os << '\n'
     << "deriv bound L  " << short_num(run.deriv_bound) << " (eta0 L^2 = "
     << short_num(c.solver.eta0 * run.deriv_bound * run.deriv_bound) << ")\n"
     << "source         nu=" << short_num(c.source.nu) << " w=" << c.source.w
     << " ||w||=" << short_num(norm(run.w)) << " sweeps=" << run.truth.sweeps
     << " residual=" << short_num(run.truth.residual) << '\n'
     << "noise          delta=" << short_num(c.noise.delta) << (c.noise.fresh ? " (fresh per path)" : "")
     << '\n'
     << "stopping       " << c.stopping.rule << ", updates K=" << run.experiment.updates << '\n'
     << "paths          M=" << run.plan.M << " seed=" << run.plan.master_seed << '\n';
  const MCEstimate& f = rows.back();
  os << "final k=" << f.k << "  mse=" << short_num(f.mse) << " +- " << short_num(f.mse_stderr)
     << "  bias_sq=" << short_num(f.bias_sq) << "  variance=" << short_num(f.variance);
  if (f.berr_mse) os << "  berr_mse=" << short_num(*f.berr_mse);
  os << "  residual_mse=" << short_num(f.residual_mse) << '\n';
  if (c.solver.schedule == "polynomial" && c.source.nu > 0.0 && c.source.nu <= 0.5 &&
      c.noise.delta == 0.0) {
    try {
      const TargetExponents t = target_exponents(c.source.nu, c.solver.alpha);
      const RateFit fit = fit_rate(rows, RateQuantity::Mse, 0.0, 0.0, -t.beta);
      os << "rate fit       slope=" << short_num(fit.slope) << " target=" << short_num(-t.beta)
         << " r2=" << short_num(fit.r2) << " points=" << fit.points
         << (fit.pass ? " (within tolerance)" : " (outside tolerance)") << '\n';
    } catch (const Error&) {
      // Too few checkpoints in the default window; nothing to report.
    }
  }
  return os.str();
}

}  // namespace

int cmd_run(const RunConfig& config, const CommandOptions& options) {
  const PreparedRun run = prepare_run(config, options);
  const auto rows = run_ensemble(run.experiment, run.plan);
  const std::string summary = run_summary(run, rows);
  write_file_atomic(out_path(run.config, options, "_ensemble.csv"), ensemble_csv(rows));
  write_file_atomic(out_path(run.config, options, "_summary.txt"), summary);
  report(options, summary);
  return 0;
}

const std::vector<std::string> kVerifyChecks = {"adjoint",  "fd",       "cone",     "range_invariance",
                                                "lemma_a1", "lemma_a2", "lemma_a3", "apriori"};

namespace {

constexpr std::size_t kVerifyPoints = 20;
constexpr std::size_t kConeSamples = 200;
constexpr std::size_t kLemmaTrials = 10000;

std::string row_summary(const std::string& name, const std::vector<VerifierRow>& rows) {
  std::size_t failed = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    failed += r.pass ? 0 : 1;
    worst = std::max(worst, r.value);
  }
  std::ostringstream os;
  os << name << ": " << (failed == 0 ? "pass" : "FAIL") << " (" << rows.size() << " rows, "
     << failed << " failed, max value " << short_num(worst) << ")\n";
  return os.str();
}

}  // namespace

int cmd_verify(const RunConfig& config, const std::vector<std::string>& checks,
               const CommandOptions& options) {
  for (const auto& c : checks) {
    if (std::find(kVerifyChecks.begin(), kVerifyChecks.end(), c) == kVerifyChecks.end()) {
      throw ValidationError("unknown check '" + c + "'");
    }
  }
  if (checks.empty()) throw ValidationError("no checks selected");
  const auto wants = [&](const char* name) {
    return std::find(checks.begin(), checks.end(), name) != checks.end();
  };
  const std::uint64_t seed = options.seed ? *options.seed : config.mc.seed;

  std::vector<VerifierRow> rows;
  std::vector<IneqReport> ineq;
  std::string apriori_text;
  std::ostringstream log;
  bool ok = true;

  const bool needs_system =
      wants("adjoint") || wants("fd") || wants("cone") || wants("range_invariance");
  if (needs_system) {
    auto sys = make_system(config.problem);
    HVector x1 = HVector::zeros(sys->x_weights());
    if (const auto* tp2 = dynamic_cast<const Tp2PotentialBvp*>(sys.get())) x1 = tp2->background();
    const HVector w = make_representer(config.source, sys->x_weights());
    const HVector x_dag = build_source_truth(*sys, x1, SourceSpec{config.source.nu, w}).x_dag;
    const double radius = std::max(norm(x_dag - x1), 0.1 * std::max(1.0, norm(x_dag)));

    std::vector<HVector> points = {x1, x_dag};
    Rng rng(substream_seed(seed, 1));
    while (points.size() < kVerifyPoints) points.push_back(random_ball_point(x_dag, radius, rng));

    const auto add = [&](const std::string& name, std::vector<VerifierRow> part) {
      for (const auto& r : part) ok = ok && r.pass;
      log << row_summary(name, part);
      rows.insert(rows.end(), part.begin(), part.end());
    };
    if (wants("adjoint")) add("adjoint", check_adjoint(*sys, points, substream_seed(seed, 2)));
    if (wants("fd")) add("fd", check_derivative_fd(*sys, points, substream_seed(seed, 3)));
    if (wants("cone")) {
      const ConeEstimate cone =
          estimate_cone_constant(*sys, x_dag, radius, kConeSamples, substream_seed(seed, 4));
      std::vector<VerifierRow> part = {
          {"cone", 0, 0, cone.eta_hat, 0.5, cone.eta_hat < 0.5}};
      const auto bounds = check_linearization_bounds(*sys, x_dag, radius, kConeSamples,
                                                     cone.eta_hat, substream_seed(seed, 4));
      part.insert(part.end(), bounds.begin(), bounds.end());
      log << "cone: eta_hat=" << short_num(cone.eta_hat) << " on radius " << short_num(radius)
          << " (" << cone.samples << " pairs, " << cone.skipped << " skipped)\n";
      add("linearization bounds", std::move(part));
    }
    if (wants("range_invariance")) {
      const auto rep = check_range_invariance(*sys, x_dag, points);
      log << "range_invariance: empirical c_R max " << short_num(rep.c_r_max) << '\n';
      add("range_invariance", range_invariance_rows(rep));
    }
  }

  const auto add_ineq = [&](const IneqReport& r) {
    ok = ok && r.pass();
    log << r.id << ": " << (r.pass() ? "pass" : "FAIL") << " (" << r.trials << " trials, "
        << r.evaluations << " evaluations, max violation " << short_num(r.max_violation) << ")\n";
    ineq.push_back(r);
  };
  if (wants("lemma_a1")) add_ineq(check_lemma_a1(kLemmaTrials, substream_seed(seed, 11)));
  if (wants("lemma_a2")) {
    for (const auto& r : check_lemma_a2(kLemmaTrials, substream_seed(seed, 12))) add_ineq(r);
  }
  if (wants("lemma_a3")) {
    for (const auto& r : check_lemma_a3(kLemmaTrials, substream_seed(seed, 13))) add_ineq(r);
  }

  if (wants("apriori")) {
    const StoppingRule rule = make_stopping_rule(config);
    const StepSchedule schedule = make_schedule(config.solver);
    std::vector<double> deltas;
    if (rule.kind == StoppingRule::Kind::APriori && !rule.table.empty()) {
      for (const auto& [d, k] : rule.table) deltas.push_back(d);
      std::sort(deltas.begin(), deltas.end(), std::greater<>());
    } else {
      const double d0 = config.noise.delta > 0.0 ? config.noise.delta : 0.1;
      for (int e = 0; e < 4; ++e) deltas.push_back(d0 * std::pow(10.0, -e));
    }
    const AprioriReport rep = validate_apriori(rule, schedule, deltas);
    ok = ok && rep.admissible;
    log << "apriori: " << (rep.admissible ? "admissible" : "NOT admissible") << " (decay slope "
        << short_num(rep.decay_slope) << (rep.reason.empty() ? "" : "; " + rep.reason) << ")\n";
    apriori_text = apriori_csv(rep);
  }

  if (!rows.empty()) write_file_atomic(out_path(config, options, "_verify.csv"), verifier_csv(rows));
  if (!ineq.empty()) write_file_atomic(out_path(config, options, "_ineq.csv"), ineq_csv(ineq));
  if (!apriori_text.empty()) {
    write_file_atomic(out_path(config, options, "_apriori.csv"), apriori_text);
  }
  report(options, log.str());
  return ok ? 0 : 1;
}

int cmd_sweep(const RunConfig& config, const std::string& param,
              const std::vector<double>& values, bool fit, const CommandOptions& options) {
  if (param != "delta" && param != "alpha" && param != "nu" && param != "M") {
    throw ValidationError("--param must be delta, alpha, nu or M (got '" + param + "')");
  }
  if (values.empty()) throw ValidationError("--values is empty");
  if (param == "delta") {
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (!(values[i] < values[i - 1])) {
        throw ValidationError("--values for delta must be strictly decreasing");
      }
    }
  }

  std::ostringstream combined;
  combined << "param,value," << kEnsembleCsvHeader << '\n';
  std::ostringstream summary;
  summary << "param,value,k_stop,mse,mse_stderr,bias_sq,variance,residual_mse,slope,target,r2,"
             "pass\n";
  std::ostringstream log;
  std::vector<double> fit_x, fit_y;
  bool ok = true;
  double nu = config.source.nu;

  for (double v : values) {
    RunConfig c = config;
    const std::string text = num(v);
    if (param == "delta") set_config_value(c, "noise", "delta", text);
    if (param == "alpha") set_config_value(c, "solver", "alpha", text);
    if (param == "nu") set_config_value(c, "source", "nu", text);
    if (param == "M") {
      if (v < 2.0 || v != std::floor(v)) throw ValidationError("M values must be integers >= 2");
      set_config_value(c, "mc", "M", std::to_string(static_cast<std::size_t>(v)));
    }
    const PreparedRun run = prepare_run(c, options);
    nu = run.config.source.nu;
    const auto rows = run_ensemble(run.experiment, run.plan);
    std::istringstream body(ensemble_csv(rows));
    std::string line;
    std::getline(body, line);  // header
    while (std::getline(body, line)) combined << param << ',' << text << ',' << line << '\n';

    const MCEstimate f = final_estimate(rows);
    summary << param << ',' << text << ',' << run.experiment.updates << ',' << num(f.mse) << ','
            << num(f.mse_stderr) << ',' << num(f.bias_sq) << ',' << num(f.variance) << ','
            << num(f.residual_mse);
    log << param << '=' << short_num(v) << "  K=" << run.experiment.updates
        << "  mse=" << short_num(f.mse) << " +- " << short_num(f.mse_stderr);
    if (fit && param != "delta") {
      const TargetExponents t = target_exponents(run.config.source.nu, run.config.solver.alpha);
      const RateFit r = fit_rate(rows, RateQuantity::Mse, 0.0, 0.0, -t.beta);
      ok = ok && r.pass;
      summary << ',' << num(r.slope) << ',' << num(-t.beta) << ',' << num(r.r2) << ','
              << (r.pass ? 1 : 0) << '\n';
      log << "  slope=" << short_num(r.slope) << " target=" << short_num(-t.beta)
          << (r.pass ? " ok" : " MISS");
    } else {
      summary << ",,,,\n";
    }
    log << '\n';
    fit_x.push_back(v);
    fit_y.push_back(f.mse);
  }

  if (fit && param == "delta") {
    const double target = delta_rate_exponent(nu);
    const RateFit r = fit_power_law(fit_x, fit_y, fit_x.back(), fit_x.front(), target, 0.2, 2);
    ok = ok && r.pass;
    summary << "delta_fit,," << ",,,,,," << num(r.slope) << ',' << num(target) << ','
            << num(r.r2) << ',' << (r.pass ? 1 : 0) << '\n';
    log << "delta fit: slope=" << short_num(r.slope) << " target=" << short_num(target)
        << " r2=" << short_num(r.r2) << (r.pass ? " ok" : " MISS") << '\n';
  }

  write_file_atomic(out_path(config, options, "_sweep.csv"), combined.str());
  write_file_atomic(out_path(config, options, "_sweep_summary.csv"), summary.str());
  report(options, log.str());
  return ok ? 0 : 1;
}

std::vector<MCEstimate> read_ensemble_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kEnsembleCsvHeader) {
    throw ValidationError(path + ": header is not an ensemble CSV header");
  }
  std::vector<MCEstimate> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 10) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 10 fields");
    }
    const std::string where = path + ":" + std::to_string(lineno);
    MCEstimate e;
    e.k = static_cast<std::size_t>(parse_double(where, f[0]));
    e.mse = parse_double(where, f[1]);
    e.mse_stderr = parse_double(where, f[2]);
    e.bias_sq = parse_double(where, f[3]);
    e.variance = parse_double(where, f[4]);
    if (!f[5].empty()) e.berr_mse = parse_double(where, f[5]);
    if (!f[6].empty()) e.berr_stderr = parse_double(where, f[6]);
    e.residual_mse = parse_double(where, f[7]);
    e.M = static_cast<std::size_t>(parse_double(where, f[8]));
    e.seed = static_cast<std::uint64_t>(std::stoull(trim(f[9])));
    rows.push_back(e);
  }
  if (rows.empty()) throw ValidationError(path + ": no data rows");
  return rows;
}

int cmd_fit(const FitRequest& request, const CommandOptions& options) {
  const auto rows = read_ensemble_csv(request.csv_path);
  RateQuantity q;
  if (request.column == "mse") {
    q = RateQuantity::Mse;
  } else if (request.column == "berr_mse") {
    q = RateQuantity::BerrMse;
  } else if (request.column == "residual_mse") {
    q = RateQuantity::ResidualMse;
  } else {
    throw ValidationError("--column must be mse, berr_mse or residual_mse");
  }
  const RateFit fit = fit_rate(rows, q, request.k_min, request.k_max, request.target, request.tol);
  if (!request.out_path.empty()) write_file_atomic(request.out_path, rate_fit_points_csv(fit));
  std::ostringstream os;
  os << request.column << " vs k on [" << short_num(fit.x_min) << ", " << short_num(fit.x_max)
     << "]: slope=" << short_num(fit.slope) << " intercept=" << short_num(fit.intercept)
     << " r2=" << short_num(fit.r2) << " points=" << fit.points << " target="
     << short_num(fit.target_slope) << " tol=" << short_num(fit.tol) << " -> "
     << (fit.pass ? "pass" : "FAIL") << '\n';
  report(options, os.str());
  return fit.pass ? 0 : 1;
}

}  // namespace sgdreg
