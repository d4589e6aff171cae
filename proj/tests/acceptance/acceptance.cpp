// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: acceptance [criterion numbers...]  (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "sgdreg/analysis.hpp"
#include "sgdreg/commands.hpp"
#include "sgdreg/config.hpp"
#include "sgdreg/error.hpp"
#include "sgdreg/mc.hpp"
#include "sgdreg/problem.hpp"
#include "sgdreg/rng.hpp"
#include "sgdreg/solvers.hpp"
#include "sgdreg/test_problems.hpp"

using namespace sgdreg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Shared across criteria: every ensemble is checked for the bias-variance
// identity (8) and rerun with another thread count (10).
struct EnsembleLog {
  std::size_t runs = 0;
  std::size_t rows = 0;
  double worst_gap = 0.0;
  std::size_t mismatches = 0;
} g_log;

std::vector<MCEstimate> ensemble(const RunConfig& c) {
  CommandOptions one;
  const PreparedRun a = prepare_run(c, one);
  const auto rows = run_ensemble(a.experiment, a.plan);
  CommandOptions three;
  three.threads = 3;
  const PreparedRun b = prepare_run(c, three);
  const auto again = run_ensemble(b.experiment, b.plan);
  ++g_log.runs;
  g_log.rows += rows.size();
  for (const auto& r : rows) g_log.worst_gap = std::max(g_log.worst_gap, decomposition_gap(r));
  if (ensemble_csv(rows) != ensemble_csv(again)) ++g_log.mismatches;
  return rows;
}

double combined_se(const MCEstimate& a, const MCEstimate& b) {
  return std::sqrt(a.mse_stderr * a.mse_stderr + b.mse_stderr * b.mse_stderr);
}

RunConfig tp1_config(std::size_t m, std::size_t n) {
  RunConfig c;
  c.problem.type = "tp1";
  c.problem.m = m;
  c.problem.n = n;
  c.source.present = true;
  return c;
}

RunConfig tp2_config(std::size_t m, std::size_t n) {
  RunConfig c;
  c.problem.type = "tp2";
  c.problem.m = m;
  c.problem.n = n;
  c.source.present = true;
  c.source.w = "sine";
  return c;
}

bool bitwise_equal(const HVector& a, const HVector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

Outcome degeneracy() {
  constexpr std::size_t kSteps = 10000;
  std::string detail;
  bool ok = true;
  for (RunConfig c : {tp1_config(64, 1), tp2_config(63, 1)}) {
    c.noise.delta = 1e-3;
    c.stopping.max_iter = kSteps;
    const PreparedRun p = prepare_run(c, {});
    const Experiment& ex = p.experiment;
    const StackedData y = make_noisy(ex.y_true, ex.noise);
    std::vector<std::size_t> every(kSteps + 1);
    for (std::size_t k = 0; k <= kSteps; ++k) every[k] = k + 1;

    std::vector<HVector> sgd, lw;
    PathSpec spec;
    spec.schedule = ex.schedule;
    spec.updates = kSteps;
    spec.seed = 99;
    spec.checkpoints = every;
    spec.variant = Variant::Sgd;
    run_path(*ex.sys, y, ex.x1, spec, [&](std::size_t, const HVector& x) { sgd.push_back(x); });
    spec.variant = Variant::Landweber;
    run_path(*ex.sys, y, ex.x1, spec, [&](std::size_t, const HVector& x) { lw.push_back(x); });

    std::size_t differ = sgd.size() == lw.size() ? 0 : 1;
    for (std::size_t k = 0; k < std::min(sgd.size(), lw.size()); ++k) {
      if (!bitwise_equal(sgd[k], lw[k])) ++differ;
    }
    ok = ok && differ == 0 && sgd.size() == kSteps + 1;
    detail += c.problem.type + ": " + std::to_string(sgd.size()) + " iterates, " +
              std::to_string(differ) + " differ; ";
  }
  return {ok, detail};
}

Outcome derivative_suite() {
  constexpr std::size_t kTrials = 20;
  std::string detail;
  bool ok = true;
  RunConfig perturbed = tp1_config(64, 4);
  perturbed.problem.kappa = 0.5;
  for (const RunConfig& c : {tp1_config(64, 4), perturbed, tp2_config(63, 4)}) {
    const auto sys = make_system(c.problem);
    HVector center = HVector::zeros(sys->x_weights());
    double radius = 1.0;
    if (const auto* tp2 = dynamic_cast<const Tp2PotentialBvp*>(sys.get())) {
      center = tp2->background();
      radius = 0.5;
    }
    Rng rng(substream_seed(2024, 1));
    std::vector<HVector> points;
    while (points.size() < kTrials) points.push_back(random_ball_point(center, radius, rng));
    const auto adj = check_adjoint(*sys, points, 7);
    const auto fd = check_derivative_fd(*sys, points, 8);
    double worst_adj = 0.0, worst_slope = 1e300;
    bool pass = true;
    for (const auto& r : adj) {
      worst_adj = std::max(worst_adj, r.value);
      pass = pass && r.pass;
    }
    std::size_t linear = 0;
    for (const auto& r : fd) {
      if (r.check == "fd_order") worst_slope = std::min(worst_slope, r.value);
      else ++linear;
      pass = pass && r.pass;
    }
    ok = ok && pass && adj.size() >= kTrials && fd.size() >= kTrials;
    detail += sys->name() + (c.problem.kappa > 0 ? "(kappa=0.5)" : "") + ": adjoint " +
              fmt("%.2g", worst_adj) + ", min fd slope " +
              (linear == fd.size() ? std::string("n/a") : fmt("%.3g", worst_slope)) + " (" +
              std::to_string(linear) + "/" + std::to_string(fd.size()) + " rows linear to round-off); ";
  }
  return {ok, detail};
}

RunConfig linear_exact(std::size_t updates) {
  RunConfig c = tp1_config(256, 4);
  c.problem.kappa = 0.0;
  c.solver.schedule = "constant";
  c.solver.eta0 = 0.9;
  c.mc.M = 500;
  c.mc.seed = 3;
  c.stopping.max_iter = updates;
  return c;
}

Outcome monotonicity() {
  const auto rows = ensemble(linear_exact(1000));
  std::size_t violations = 0;
  double worst = -1e300;
  for (std::size_t j = 1; j < rows.size(); ++j) {
    const double excess = (rows[j].mse - rows[j - 1].mse) / std::max(combined_se(rows[j], rows[j - 1]), 1e-300);
    worst = std::max(worst, excess);
    if (rows[j].mse > rows[j - 1].mse + 3.0 * combined_se(rows[j], rows[j - 1])) ++violations;
  }
  return {violations == 0, std::to_string(rows.size()) + " checkpoints to k=" +
                               std::to_string(rows.back().k) + ", mse " +
                               fmt("%.3g", rows.front().mse) + " -> " + fmt("%.3g", rows.back().mse) +
                               ", largest increase " + fmt("%.2g", worst) + " stderr"};
}

Outcome residual_decay() {
  const auto rows = ensemble(linear_exact(10000));
  const double ratio = rows.back().residual_mse / rows.front().residual_mse;
  return {ratio < 0.01, "residual mse " + fmt("%.3g", rows.front().residual_mse) + " -> " +
                            fmt("%.3g", rows.back().residual_mse) + " at k=" +
                            std::to_string(rows.back().k) + " (ratio " + fmt("%.2g", ratio) + ")"};
}

Outcome rate_exponent() {
  RunConfig c = tp1_config(256, 4);
  c.solver.alpha = 0.6;
  c.solver.eta0 = 1.0;
  c.source.nu = 0.5;
  c.source.w = "power";
  c.source.w_decay = 0.5;
  c.mc.M = 200;
  c.mc.seed = 5;
  c.stopping.max_iter = 100000;
  const auto rows = ensemble(c);
  const auto t = target_exponents(0.5, 0.6, 0.01);
  const auto mse = fit_rate(rows, RateQuantity::Mse, 1e3, 1e5, -t.beta, 0.15);
  const auto berr = fit_rate(rows, RateQuantity::BerrMse, 1e3, 1e5, -t.gamma, 0.2);
  return {mse.pass && berr.pass, "mse slope " + fmt("%.4f", mse.slope) + " (target " +
                                     fmt("%.2f", -t.beta) + " +-0.15), B-weighted slope " +
                                     fmt("%.4f", berr.slope) + " (target " + fmt("%.2f", -t.gamma) +
                                     " +-0.2)"};
}

Outcome regularizing() {
  const std::vector<double> deltas = {1e-1, 3e-2, 1e-2};
  RunConfig c = tp2_config(63, 4);
  // Amplitude 10 puts the data well above the largest noise level.
  c.problem.forcing_scale = 10.0;
  c.solver.eta0 = 1.0;
  c.solver.alpha = 0.5;
  c.source.nu = 0.5;
  c.stopping.rule = "apriori";
  c.stopping.apriori_scale = 1.0;
  c.stopping.apriori_power = 2.0;
  c.mc.M = 100;
  c.mc.seed = 11;
  c.noise.seed = 11;
  c.noise.delta = deltas.front();

  const PreparedRun base = prepare_run(c, {});
  const AprioriReport adm = validate_apriori(base.rule, base.experiment.schedule, deltas);
  std::vector<MCEstimate> finals;
  double initial = 0.0;
  for (double d : deltas) {
    RunConfig cd = c;
    cd.noise.delta = d;
    const auto rows = ensemble(cd);
    initial = rows.front().mse;
    finals.push_back(rows.back());
  }
  std::string detail = std::string("a priori rule ") + (adm.admissible ? "admissible" : "NOT admissible") +
           "; initial mse " + fmt("%.3g", initial) + "; stopping mse";
  bool ok = adm.admissible;
  for (std::size_t j = 0; j < finals.size(); ++j) {
    detail += " " + fmt("%.3g", finals[j].mse) + "+-" + fmt("%.1g", finals[j].mse_stderr) + " (k=" +
              std::to_string(finals[j].k) + ")";
    if (j > 0) ok = ok && finals[j - 1].mse - finals[j].mse > 3.0 * combined_se(finals[j - 1], finals[j]);
  }
  return {ok, detail};
}

Outcome delta_rate() {
  const std::vector<double> deltas = {1e-1, 3e-2, 1e-2, 3e-3};
  RunConfig c = tp1_config(2048, 4);
  c.solver.alpha = 0.35;
  c.solver.eta0 = 1.0;
  c.source.nu = 0.25;
  c.source.w = "power";
  c.source.w_decay = 0.5;
  c.stopping.rule = "kstar";
  c.mc.M = 100;
  c.mc.seed = 7;
  c.noise.seed = 7;
  std::vector<double> mse;
  std::string ks;
  for (double d : deltas) {
    c.noise.delta = d;
    const auto rows = ensemble(c);
    mse.push_back(rows.back().mse);
    ks += " " + std::to_string(rows.back().k - 1);
  }
  const double target = delta_rate_exponent(0.25);
  const auto fit = fit_power_law(deltas, mse, deltas.back(), deltas.front(), target, 0.2, 2);
  return {fit.pass, "slope " + fmt("%.4f", fit.slope) + " (target " + fmt("%.4f", target) +
                        " +-0.2), k* =" + ks};
}

Outcome bias_variance() {
  const bool ok = g_log.runs > 0 && g_log.worst_gap <= 1e-10;
  return {ok, std::to_string(g_log.runs) + " ensembles, " + std::to_string(g_log.rows) +
                  " checkpoints, max relative gap " + fmt("%.2g", g_log.worst_gap)};
}

Outcome inequalities() {
  constexpr std::size_t kTrials = 10000;
  std::vector<IneqReport> all = {check_lemma_a1(kTrials, 101)};
  for (auto& r : check_lemma_a2(kTrials, 102)) all.push_back(r);
  for (auto& r : check_lemma_a3(kTrials, 103)) all.push_back(r);
  bool ok = true;
  std::string detail;
  for (const auto& r : all) {
    ok = ok && r.pass() && r.trials == kTrials;
    detail += r.id + " max violation " + fmt("%.2g", r.max_violation) + "; ";
  }
  return {ok, detail};
}

Outcome determinism() {
  const bool ok = g_log.runs > 0 && g_log.mismatches == 0;
  return {ok, std::to_string(g_log.runs) + " ensembles rerun with 3 threads, " +
                  std::to_string(g_log.mismatches) + " CSV mismatches"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // runtime budget; 0 for criteria that only aggregate
  std::function<Outcome()> body;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "degeneracy n=1 SGD == Landweber", 5, degeneracy},
      {2, "adjoint and finite-difference suite", 10, derivative_suite},
      {3, "monotone mean squared error", 60, monotonicity},
      {4, "residual decay", 120, residual_decay},
      {5, "rate exponents", 600, rate_exponent},
      {6, "regularizing property", 600, regularizing},
      {7, "delta rate at k*", 600, delta_rate},
      {8, "bias-variance identity", 0, bias_variance},
      {9, "inequality suites", 60, inequalities},
      {10, "determinism across thread counts", 0, determinism},
  };
  std::set<int> selected;
  for (int a = 1; a < argc; ++a) selected.insert(std::atoi(argv[a]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // Time includes the 3-thread rerun used by criterion 10.
    const bool in_time = c.limit_s == 0 || secs < c.limit_s;
    if (!in_time) o.detail += " [over budget " + fmt("%.0f", c.limit_s) + " s]";
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("criterion %2d %s: %s (%.1f s) %s\n", c.id, pass ? "PASS" : "FAIL", c.name, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criterion(s) failed\n", failed);
  return failed == 0 ? 0 : 1;
}
