#pragma once

// Power-law rate fits, noise-level sweeps and randomized numeric checks of the
// step-size inequalities used in the convergence analysis.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sgdreg/mc.hpp"

namespace sgdreg {

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  std::size_t points = 0;
  double target_slope = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::vector<std::pair<double, double>> log_points;  // (log x, log y) inside the window
};

/// Least-squares line through (log x, log y) for x in [x_min, x_max].
/// Needs at least `min_points` points in the window and y > 0 there.
/// r2 is 1 when y is constant (zero total variation).
RateFit fit_power_law(std::span<const double> x, std::span<const double> y, double x_min,
                      double x_max, double target_slope, double tol, std::size_t min_points = 5);

enum class RateQuantity { Mse, BerrMse, ResidualMse };

/// Fits one column of an ensemble against k. A zero window selects
/// [k_total / 100, k_total] with k_total the last checkpoint.
RateFit fit_rate(std::span<const MCEstimate> estimates, RateQuantity quantity, double k_min,
                 double k_max, double target_slope, double tol = 0.15);

std::string rate_fit_points_csv(const RateFit& fit);

struct TargetExponents {
  double beta = 0.0;
  double gamma = 0.0;
};

/// beta = min(2 nu (1 - alpha), alpha - eps), gamma = min((1 + 2 nu)(1 - alpha), 1 - eps).
/// Requires nu in (0, 1/2], alpha in (0, 1), eps in (0, alpha / 2).
TargetExponents target_exponents(double nu, double alpha, double eps = 0.01);

/// Slope of log E||e||^2 against log delta at the a priori stopping index:
/// 4 nu / (2 nu + 1).
double delta_rate_exponent(double nu);

struct DeltaSweepRow {
  double delta = 0.0;
  std::size_t k = 0;
  MCEstimate final;
};

struct DeltaSweep {
  std::vector<DeltaSweepRow> rows;
  RateFit fit;  // log mse against log delta
};

/// One ensemble per delta (strictly decreasing), stopped at `rule`. `build`
/// makes the experiment for a noise level and stopping index.
DeltaSweep delta_sweep(const std::function<Experiment(double delta, std::size_t k)>& build,
                       std::span<const double> deltas, const StoppingRule& rule,
                       const PathPlan& plan, double target_slope, double tol = 0.2);

std::string delta_sweep_csv(const DeltaSweep& sweep);

/// B(a, b) = int_0^1 s^{a-1} (1-s)^{b-1} ds by adaptive
/// Gauss-Kronrod quadrature after removing the endpoint singularities with
/// s = u^{1/a} on [0, 1/2] and the mirrored substitution on [1/2, 1].
double beta_function(double a, double b);

struct IneqReport {
  std::string id;
  std::size_t trials = 0;
  std::size_t evaluations = 0;
  std::size_t skipped = 0;
  /// max over evaluations of (lhs - rhs) / max(|lhs|, |rhs|); <= 0 when all hold.
  double max_violation = -1.0;
  std::string worst_case;
  bool pass(double slack = 1e-12) const { return max_violation <= slack; }
};

/// Operator-polynomial bound on random diagonal PSD operators with ||B|| <= 1.
IneqReport check_lemma_a1(std::size_t trials, std::uint64_t seed);
/// Step-sum lower bound and the two weighted partial-sum bounds (r < 1 with
/// the Beta function, and r = 1) at k in {4, 16, 64, 256, 1024}.
std::vector<IneqReport> check_lemma_a2(std::size_t trials, std::uint64_t seed);
/// The two half-range double-sum bounds at k in {4, 16, 64, 256, 1024}.
std::vector<IneqReport> check_lemma_a3(std::size_t trials, std::uint64_t seed);

std::string ineq_csv(std::span<const IneqReport> reports);

}  // namespace sgdreg
