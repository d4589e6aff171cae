#pragma once

// Monte Carlo ensembles of independent solver paths and the per-checkpoint
// bias-variance decomposition E||e_k||^2 = ||E e_k||^2 + E||e_k - E e_k||^2.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgdreg/problem.hpp"
#include "sgdreg/solvers.hpp"

namespace sgdreg {

/// Everything a path needs besides its seed.
struct Experiment {
  std::shared_ptr<const NonlinearSystem> sys;
  HVector x1;
  HVector x_dag;
  StackedData y_true;
  NoiseModel noise;
  /// B at x_dag; null disables the berr columns.
  std::shared_ptr<const NormalForm> b_dag;
  StepSchedule schedule;
  Variant variant = Variant::Sgd;
  std::optional<Box> box;
  std::size_t updates = 0;
  /// Fresh noise draw per path (seeded by substream of noise.seed) instead of
  /// one datum shared by all paths.
  bool fresh_noise = false;
};

struct PathPlan {
  std::size_t M = 100;
  std::uint64_t master_seed = 0;
  /// Empty: log-spaced, 20 per decade, over [1, updates + 1].
  std::vector<std::size_t> checkpoints;
  /// Test hook: every path uses substream 0, so all paths coincide.
  bool identical_paths = false;
  unsigned threads = 1;
};

struct MCEstimate {
  std::size_t k = 0;
  double mse = 0.0;           // mean ||e_k||^2
  double mse_stderr = 0.0;
  double bias_sq = 0.0;       // ||mean e_k||^2
  double variance = 0.0;      // mean ||e_k - mean e_k||^2 (divide by M)
  std::optional<double> berr_mse;  // mean ||B^{1/2} e_k||^2
  std::optional<double> berr_stderr;
  double residual_mse = 0.0;  // mean ||F(x_k) - y_true||^2
  double residual_stderr = 0.0;
  std::size_t M = 0;
  std::uint64_t seed = 0;
};

/// Streaming per-checkpoint statistics over paths in the order they are added
/// (Welford updates for the mean error vector and every scalar).
class ErrorAccumulator {
 public:
  explicit ErrorAccumulator(Weights weights);

  /// e = x_k - x_dag for one path.
  void add(std::span<const double> e, double berr_sq = 0.0, double residual_sq = 0.0);
  std::size_t count() const noexcept { return err_.n; }
  MCEstimate estimate(std::size_t k, std::uint64_t seed, bool with_berr) const;

 private:
  struct Scalar {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double v);
    double standard_error() const;
  };

  Weights weights_;
  std::vector<double> mean_;
  double m2_ = 0.0;
  Scalar err_, berr_, res_;
};

/// Sample standard deviation (Bessel corrected) over sqrt(M).
double standard_error(std::span<const double> samples);

/// Runs plan.M paths and aggregates each checkpoint. Reduction happens in
/// path-index order, so results do not depend on plan.threads. Every estimate
/// is checked against mse == bias_sq + variance (1e-10 relative).
std::vector<MCEstimate> run_ensemble(const Experiment& ex, const PathPlan& plan);

std::string ensemble_csv(std::span<const MCEstimate> rows);
extern const char* const kEnsembleCsvHeader;

/// |mse - bias_sq - variance| / max(mse, tiny)
double decomposition_gap(const MCEstimate& e);

}  // namespace sgdreg
