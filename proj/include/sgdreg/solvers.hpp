#pragma once

// SGD, Landweber and projected SGD for F_i(x) = y_i, i = 1..n, with step
// schedules and a priori stopping rules.
//
// Iterations are counted from k = 1: x_1 is the initial guess and update k
// maps x_k to x_{k+1} with step eta_k. A run of K updates ends at x_{K+1}.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgdreg/problem.hpp"
#include "sgdreg/rng.hpp"

namespace sgdreg {

struct StepSchedule {
  enum class Kind { Constant, Polynomial };

  Kind kind = Kind::Constant;
  double eta0 = 0.5;
  double alpha = 0.0;

  static StepSchedule constant(double eta0);
  static StepSchedule polynomial(double eta0, double alpha);

  /// eta_k for k >= 1.
  double eta(std::size_t k) const;
  /// sum_{i=1}^k eta_i. Exact summation up to 10^6 terms, Euler-Maclaurin
  /// with the zeta constant beyond.
  double partial_sum(std::size_t k) const;
};

/// Throws ValidationError unless the schedule is admissible for a derivative
/// bound L = max_i sup ||F_i'(x)||: constant steps need eta0 L^2 < 1,
/// polynomial steps need alpha in (0, 1) and eta0 L^2 <= 1.
void validate_schedule(const StepSchedule& schedule, double deriv_bound);
/// Range checks that do not need L.
void validate_schedule_shape(const StepSchedule& schedule);

struct StoppingRule {
  enum class Kind { MaxIter, APriori, KStar };

  Kind kind = Kind::MaxIter;
  std::size_t max_iter = 1000;
  // APriori: exact table lookup; without a table, k = ceil(scale * delta^-power).
  std::vector<std::pair<double, std::size_t>> table;
  double scale = 1.0;
  double power = 1.0;
  // KStar
  double nu = 0.5;
  double alpha = 0.5;
  double w_norm = 1.0;

  static StoppingRule max_iterations(std::size_t k);
  static StoppingRule apriori_table(std::vector<std::pair<double, std::size_t>> table);
  static StoppingRule apriori_power(double scale, double power);
  static StoppingRule kstar(double nu, double alpha, double w_norm);
};

/// Number of updates K prescribed by the rule at noise level delta.
/// KStar: floor((delta/||w||)^(-2/((2nu+1)(1-alpha)))), with values within
/// 1e-10 relative of an integer snapped to it; clamped to 1 (with a warning)
/// when delta >= ||w||.
std::size_t stopping_k(const StoppingRule& rule, double delta);

struct AprioriRow {
  double delta = 0.0;
  std::size_t k = 0;
  double delta_sq_sum = 0.0;  // delta^2 sum_{i<=k} eta_i
};

struct AprioriReport {
  std::vector<AprioriRow> rows;
  double decay_slope = 0.0;  // log-log slope of delta_sq_sum against delta
  bool admissible = false;
  std::string reason;
};

/// Tabulates k(delta) and delta^2 sum eta over a strictly decreasing delta
/// sequence. Admissible when k strictly increases, delta^2 sum eta strictly
/// decreases, and the latter decays at least like delta^0.1.
AprioriReport validate_apriori(const StoppingRule& rule, const StepSchedule& schedule,
                               std::span<const double> deltas);
std::string apriori_csv(const AprioriReport& report);

enum class Variant { Sgd, Landweber, SgdProjected };

Variant parse_variant(const std::string& name);
std::string to_string(Variant v);

struct IterState {
  std::size_t k = 1;
  HVector x;
  Rng rng;
};

struct StepInfo {
  std::size_t i = 0;  // 0-based equation index drawn (SGD only)
  double eta = 0.0;
};

/// Divergence threshold 1e12 (1 + ||x_1||).
double divergence_limit(const HVector& x1);
/// Throws NumericalError tagged with state.k when x is non-finite or beyond `limit`.
void guard_iterate(const IterState& state, double limit);

/// One SGD update: i_k uniform on {1..n}, x <- x - eta_k F_i'(x)^*(F_i(x) - y_i).
/// Evaluates exactly one equation. `limit` > 0 enables the divergence guard.
StepInfo sgd_step(const NonlinearSystem& sys, IterState& state, const StackedData& y,
                  const StepSchedule& schedule, double limit = 0.0);

/// One Landweber update with the full gradient (1/n) sum_i F_i'(x)^*(F_i(x) - y_i).
StepInfo landweber_step(const NonlinearSystem& sys, IterState& state, const StackedData& y,
                        const StepSchedule& schedule, double limit = 0.0);

HVector project_box(const HVector& x, const Box& box);
void project_box_inplace(HVector& x, const Box& box);

/// Log-spaced checkpoints in [1, last] (per_decade per factor 10), always
/// containing 1 and last, strictly increasing.
std::vector<std::size_t> log_checkpoints(std::size_t last, std::size_t per_decade = 20);

struct PathSpec {
  StepSchedule schedule;
  Variant variant = Variant::Sgd;
  std::size_t updates = 0;
  std::uint64_t seed = 0;
  std::optional<Box> box;          // required for SgdProjected
  std::vector<std::size_t> checkpoints;
  /// The guard runs every `guard_every` updates and at every checkpoint.
  std::size_t guard_every = 32;
};

/// Runs one path and calls `visit(k, x_k)` at each checkpoint k.
/// Checkpoints must be strictly increasing within [1, updates + 1].
/// Returns the final iterate x_{updates+1}.
HVector run_path(const NonlinearSystem& sys, const StackedData& y, const HVector& x1,
                 const PathSpec& spec,
                 const std::function<void(std::size_t, const HVector&)>& visit);

struct TraceSpec {
  std::vector<std::size_t> checkpoints;  // empty: log-spaced defaults
  const HVector* x_dag = nullptr;        // enables err_sq
  const NormalForm* b_dag = nullptr;     // enables berr_sq (B evaluated at x_dag)
  const StackedData* y_ref = nullptr;    // residual reference; defaults to y
  bool every_step = false;               // record every k instead of checkpoints
};

struct TrajectoryRow {
  std::size_t k = 0;
  std::optional<double> eta;         // step applied to x_k (absent at the final row)
  std::optional<std::size_t> i;      // 1-based index drawn at step k (SGD only)
  std::optional<double> err_sq;      // ||x_k - x_dag||^2
  std::optional<double> berr_sq;     // ||B^{1/2}(x_k - x_dag)||^2
  double residual_sq = 0.0;          // ||F(x_k) - y_ref||^2, product norm
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  HVector x_final;
  std::size_t updates = 0;
  Variant variant = Variant::Sgd;
};

/// Iterates until the stopping rule fires at noise level delta.
Trajectory run(const NonlinearSystem& sys, const StackedData& y, const HVector& x1,
               const StepSchedule& schedule, const StoppingRule& rule, double delta,
               Variant variant, std::uint64_t seed, const TraceSpec& trace,
               const std::optional<Box>& box = std::nullopt);

std::string trajectory_csv(const Trajectory& t);

}  // namespace sgdreg
