#pragma once

// Systems of nonlinear equations F_i : X -> Y, i = 1..n, plus data generation
// and sampling-based checks of the structural assumptions used by the solvers.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgdreg/hilbert.hpp"
#include "sgdreg/rng.hpp"

namespace sgdreg {

/// Closed box lo <= x <= hi (componentwise).
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  bool contains(const HVector& x) const;
};

/// Equation indices are 0-based in code; reports print them 1-based.
class NonlinearSystem {
 public:
  virtual ~NonlinearSystem() = default;

  virtual std::size_t num_equations() const = 0;
  virtual const Weights& x_weights() const = 0;
  virtual const Weights& y_weights(std::size_t i) const = 0;

  std::size_t dim_x() const { return x_weights()->size(); }
  std::size_t dim_y(std::size_t i) const { return y_weights(i)->size(); }

  virtual HVector apply(std::size_t i, const HVector& x) const = 0;
  virtual HVector deriv_apply(std::size_t i, const HVector& x, const HVector& h) const = 0;
  virtual HVector deriv_adjoint_apply(std::size_t i, const HVector& x, const HVector& g) const = 0;

  /// F_i'(x)^*(F_i(x) - y_i)
  virtual HVector residual_gradient(std::size_t i, const HVector& x, const HVector& y_i) const;

  /// x <- x - step * F_i'(x)^*(F_i(x) - y_i). Implementations whose gradient
  /// touches few coordinates may override this with an in-place update.
  virtual void descend(std::size_t i, HVector& x, const HVector& y_i, double step) const;

  /// Entries of B(x) in the coordinate basis when B(x) is diagonal there.
  virtual std::optional<std::vector<double>> normal_diagonal(const HVector& x) const {
    (void)x;
    return std::nullopt;
  }

  virtual std::optional<Box> domain() const { return std::nullopt; }
  virtual std::string name() const = 0;
};

/// Stacks F_1(x), ..., F_n(x). Throws ValidationError outside a declared domain.
StackedData apply_full(const NonlinearSystem& sys, const HVector& x);

/// Dense matrix of F_i'(x) in coordinates (dim_y(i) x dim_x).
Eigen::MatrixXd jacobian(const NonlinearSystem& sys, std::size_t i, const HVector& x);

/// B(x) = (1/n) sum_i F_i'(x)^* F_i'(x).
SymOperator normal_operator(const NonlinearSystem& sys, const HVector& x);

/// B(x) evaluated once; uses the diagonal form when the system reports one and
/// the dense spectral decomposition otherwise.
class NormalForm {
 public:
  NormalForm(const NonlinearSystem& sys, const HVector& x);

  bool is_diagonal() const noexcept { return !dense_.has_value(); }
  /// <B e, e> = ||B^{1/2} e||^2
  double quadratic_form(const HVector& e) const;
  /// B^nu w with the conventions of frac_power.
  HVector power_apply(double nu, const HVector& w) const;
  double norm() const;

 private:
  Weights weights_;
  std::vector<double> diag_;
  std::optional<SymOperator> dense_;
};

// --- data -------------------------------------------------------------------

struct NoiseModel {
  double delta = 0.0;
  std::uint64_t seed = 0;
};

/// y_true + delta * d with d a seeded Gaussian direction normalized to unit
/// product norm, so stacked_norm(result - y_true) == delta.
StackedData make_noisy(const StackedData& y_true, const NoiseModel& noise);

struct SourceSpec {
  double nu = 0.25;
  HVector w;
};

struct SourceTruth {
  HVector x_dag;
  std::size_t sweeps = 0;
  /// ||B(x_dag)^nu w - (x_dag - x_1)||
  double residual = 0.0;
};

/// Manufactures x_dag with x_dag - x_1 = B(x_dag)^nu w through the fixed-point
/// sweep x <- x_1 + B(x)^nu w started at x_1.
SourceTruth build_source_truth(const NonlinearSystem& sys, const HVector& x1,
                               const SourceSpec& spec, std::size_t max_sweeps = 100,
                               double tol = 1e-10);

// --- assumption verifiers ---------------------------------------------------

/// One line of a verifier report.
struct VerifierRow {
  std::string check;
  std::size_t i = 0;  // 1-based equation index, 0 when not block specific
  std::size_t sample_id = 0;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

std::string verifier_csv(std::span<const VerifierRow> rows);

/// Point drawn uniformly in radius and direction within the ball around `center`.
HVector random_ball_point(const HVector& center, double radius, Rng& rng);

struct ConeEstimate {
  double eta_hat = 0.0;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  double ball_radius = 0.0;
};

/// max ||F(x) - F(x~) - F'(x~)(x - x~)|| / ||F(x) - F(x~)|| over sampled pairs in
/// the ball; pairs with denominator below 1e-14 are skipped.
ConeEstimate estimate_cone_constant(const NonlinearSystem& sys, const HVector& center,
                                    double radius, std::size_t samples, std::uint64_t seed);

/// Two-sided linearization bounds implied by a cone constant eta_hat:
/// ||F'(x)(x - x~)|| / (1 + eta) <= ||F(x) - F(x~)|| <= ||F'(x)(x - x~)|| / (1 - eta).
std::vector<VerifierRow> check_linearization_bounds(const NonlinearSystem& sys,
                                                    const HVector& center, double radius,
                                                    std::size_t samples, double eta_hat,
                                                    std::uint64_t seed);

/// ||F_i'(x)|| by power iteration on F_i'(x)^* F_i'(x).
double operator_norm(const NonlinearSystem& sys, std::size_t i, const HVector& x,
                     double rel_tol = 1e-6, std::size_t max_iter = 20000);

/// max over points and equations of ||F_i'(x)||.
double estimate_deriv_bound(const NonlinearSystem& sys, std::span<const HVector> points);

struct RangeInvarianceRow {
  std::size_t sample_id = 0;
  std::size_t i = 0;  // 1-based
  double distance = 0.0;       // ||x - x_dag||
  double fit_residual = 0.0;   // ||R K_i - F_i'(x)|| / ||F_i'(x)||, Frobenius, weighted
  double r_minus_identity = 0.0;
  double c_r = 0.0;            // ||R - I|| / ||x - x_dag||, 0 when x == x_dag
  bool rank_deficient = false;
};

struct RangeInvarianceReport {
  std::vector<RangeInvarianceRow> rows;
  double c_r_max = 0.0;
};

/// Least-squares factors R with F_i'(x) = R F_i'(x_dag) for every sample x.
RangeInvarianceReport check_range_invariance(const NonlinearSystem& sys, const HVector& x_dag,
                                             std::span<const HVector> points);

std::vector<VerifierRow> range_invariance_rows(const RangeInvarianceReport& report);

/// |<F_i'(x)h, g> - <h, F_i'(x)^* g>| / (||h|| ||g|| (1 + ||F_i'(x)||)) <= 1e-10.
std::vector<VerifierRow> check_adjoint(const NonlinearSystem& sys, std::span<const HVector> points,
                                       std::uint64_t seed);

/// Finite-difference order of ||(F_i(x+th) - F_i(x))/t - F_i'(x)h|| on
/// t in {1e-3, 1e-4, 1e-5}, fitted over the steps whose error exceeds
/// 30 sigma / t, where sigma is the evaluation noise of F_i (largest
/// t * error over t in {1e-6, 1e-7, 1e-8}). Passes at slope >= 0.9, or, with fewer than two such steps, when
/// every error is below the floor at the smallest step (maps that are linear
/// to round-off). Directions mix white noise with F_i'(x)^* g for random g.
std::vector<VerifierRow> check_derivative_fd(const NonlinearSystem& sys,
                                             std::span<const HVector> points, std::uint64_t seed);

/// Least-squares slope of log(errors) against log(steps).
double loglog_slope(std::span<const double> steps, std::span<const double> errors);

}  // namespace sgdreg
