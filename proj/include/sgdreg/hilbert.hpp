#pragma once

// Weighted finite-dimensional Hilbert spaces.
//
// A space is described by its quadrature weights w_j > 0; the inner product is
// <u, v> = sum_j w_j u_j v_j. Every adjoint in the library is taken with
// respect to these weighted inner products, never the Euclidean one.

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace sgdreg {

using Weights = std::shared_ptr<const std::vector<double>>;

/// Validates positivity and wraps the weights for sharing.
Weights make_weights(std::vector<double> w);
Weights uniform_weights(std::size_t m, double w = 1.0);
/// Composite trapezoid weights on `nodes` equispaced points of [a, b].
Weights trapezoid_weights(std::size_t nodes, double a, double b);

/// True if both refer to the same space (same object or identical contents).
bool same_space(const Weights& a, const Weights& b);

class HVector {
 public:
  HVector() = default;
  HVector(std::vector<double> values, Weights weights);

  static HVector zeros(const Weights& weights);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const Weights& weights() const noexcept { return weights_; }

  double operator[](std::size_t j) const { return values_[j]; }
  double& operator[](std::size_t j) { return values_[j]; }

  /// this += a * x
  HVector& axpy(double a, const HVector& x);
  HVector& operator*=(double a);
  HVector& operator+=(const HVector& x) { return axpy(1.0, x); }
  HVector& operator-=(const HVector& x) { return axpy(-1.0, x); }

  bool all_finite() const;

 private:
  std::vector<double> values_;
  Weights weights_;
};

HVector operator+(HVector a, const HVector& b);
HVector operator-(HVector a, const HVector& b);
HVector operator*(double s, HVector a);

double inner(const HVector& u, const HVector& v);
double norm_sq(const HVector& u);
double norm(const HVector& u);

/// Element of the product space Y^n. Blocks store the raw per-equation values;
/// the n^{-1/2} scaling lives in the norm.
class StackedData {
 public:
  StackedData() = default;
  explicit StackedData(std::vector<HVector> blocks) : blocks_(std::move(blocks)) {}

  std::size_t num_blocks() const noexcept { return blocks_.size(); }
  const HVector& operator[](std::size_t i) const { return blocks_[i]; }
  HVector& operator[](std::size_t i) { return blocks_[i]; }
  const std::vector<HVector>& blocks() const noexcept { return blocks_; }

 private:
  std::vector<HVector> blocks_;
};

StackedData operator-(const StackedData& a, const StackedData& b);

/// ((1/n) sum_i ||y_i||^2)^(1/2)
double stacked_norm(const StackedData& y);
double stacked_norm_sq(const StackedData& y);
double stacked_inner(const StackedData& a, const StackedData& b);

/// A map on X that is self-adjoint in the weighted inner product, with its
/// spectral decomposition computed once at construction.
class SymOperator {
 public:
  /// Throws ValidationError if `matrix` is not weighted-self-adjoint to 1e-10.
  SymOperator(Eigen::MatrixXd matrix, Weights weights);

  static SymOperator diagonal(std::span<const double> diag, const Weights& weights);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  const Weights& weights() const noexcept { return weights_; }

  /// Eigenvalues in descending order.
  std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }
  /// j-th eigenvector, orthonormal in the weighted inner product.
  HVector eigenvector(std::size_t j) const;

  HVector apply(const HVector& x) const;
  /// <A x, x>
  double quadratic_form(const HVector& x) const;
  /// Operator norm (largest |eigenvalue|).
  double norm() const;

  SymOperator scaled(double factor) const;

  /// Builds f(A) sharing the eigenbasis of *this.
  SymOperator spectral_map(const std::vector<double>& new_eigenvalues) const;

 private:
  SymOperator(Eigen::MatrixXd matrix, Weights weights, std::vector<double> eigenvalues,
              Eigen::MatrixXd basis);

  Eigen::MatrixXd matrix_;
  Weights weights_;
  std::vector<double> eigenvalues_;
  // Columns are Euclidean-orthonormal eigenvectors of W^{1/2} A W^{-1/2}.
  Eigen::MatrixXd basis_;
};

/// Eigenvalues of a positive semidefinite operator with the small ones
/// (|lambda| <= 1e-12 lambda_max) set to zero. Throws ValidationError when an
/// eigenvalue is below -1e-12 lambda_max.
std::vector<double> clamped_psd_spectrum(const SymOperator& b);

/// B^nu by spectral calculus. nu = 0 yields the orthogonal projector onto
/// range(B); 0^nu := 0.
SymOperator frac_power(const SymOperator& b, double nu);

/// ||prod_i (I - steps[i] B) B^p|| evaluated on the spectrum of B. An empty
/// `steps` is the identity product. Requires every step in (0, ||B||^{-1}].
double op_poly(const SymOperator& b, std::span<const double> steps, double p);

/// Factor s such that ||s B|| = 1 (1 for the zero operator). Never applied
/// implicitly.
double unit_norm_scale(const SymOperator& b);

}  // namespace sgdreg
