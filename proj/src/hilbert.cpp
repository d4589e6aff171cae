#include "sgdreg/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgdreg/error.hpp"

namespace sgdreg {

namespace {

void require_same_space(const HVector& u, const HVector& v, const char* op) {
  if (u.size() != v.size()) {
    throw ValidationError(std::string(op) + ": dimension mismatch (" + std::to_string(u.size()) +
                          " vs " + std::to_string(v.size()) + ")");
  }
  if (!same_space(u.weights(), v.weights())) {
    throw ValidationError(std::string(op) + ": vectors live in different weighted spaces");
  }
}

Eigen::VectorXd sqrt_weights(const Weights& w) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(w->size()));
  for (std::size_t j = 0; j < w->size(); ++j) {
    s[static_cast<Eigen::Index>(j)] = std::sqrt((*w)[j]);
  }
  return s;
}

}  // namespace

Weights make_weights(std::vector<double> w) {
  for (double x : w) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw ValidationError("quadrature weights must be positive and finite");
    }
  }
  return std::make_shared<const std::vector<double>>(std::move(w));
}

Weights uniform_weights(std::size_t m, double w) { return make_weights(std::vector<double>(m, w)); }

Weights trapezoid_weights(std::size_t nodes, double a, double b) {
  if (nodes < 2 || !(b > a)) {
    throw ValidationError("trapezoid_weights: need at least two nodes on a nonempty interval");
  }
  const double h = (b - a) / static_cast<double>(nodes - 1);
  std::vector<double> w(nodes, h);
  w.front() = 0.5 * h;
  w.back() = 0.5 * h;
  return make_weights(std::move(w));
}

bool same_space(const Weights& a, const Weights& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

HVector::HVector(std::vector<double> values, Weights weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
  if (!weights_) {
    throw ValidationError("HVector: missing weights");
  }
  if (values_.size() != weights_->size()) {
    throw ValidationError("HVector: values.length " + std::to_string(values_.size()) +
                          " != weights.length " + std::to_string(weights_->size()));
  }
}

HVector HVector::zeros(const Weights& weights) {
  return HVector(std::vector<double>(weights->size(), 0.0), weights);
}

HVector& HVector::axpy(double a, const HVector& x) {
  require_same_space(*this, x, "axpy");
  const double* xs = x.values_.data();
  double* ys = values_.data();
  for (std::size_t j = 0, m = values_.size(); j < m; ++j) ys[j] += a * xs[j];
  return *this;
}

HVector& HVector::operator*=(double a) {
  for (double& v : values_) v *= a;
  return *this;
}

bool HVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

HVector operator+(HVector a, const HVector& b) { return std::move(a.axpy(1.0, b)); }
HVector operator-(HVector a, const HVector& b) { return std::move(a.axpy(-1.0, b)); }
HVector operator*(double s, HVector a) { return std::move(a *= s); }

double inner(const HVector& u, const HVector& v) {
  require_same_space(u, v, "inner");
  const auto& w = *u.weights();
  double acc = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) acc += w[j] * u[j] * v[j];
  return acc;
}

double norm_sq(const HVector& u) {
  const auto& w = *u.weights();
  double acc = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) acc += w[j] * u[j] * u[j];
  return acc;
}

double norm(const HVector& u) { return std::sqrt(norm_sq(u)); }

StackedData operator-(const StackedData& a, const StackedData& b) {
  if (a.num_blocks() != b.num_blocks()) {
    throw ValidationError("StackedData: block count mismatch");
  }
  std::vector<HVector> out;
  out.reserve(a.num_blocks());
  for (std::size_t i = 0; i < a.num_blocks(); ++i) out.push_back(a[i] - b[i]);
  return StackedData(std::move(out));
}

double stacked_norm_sq(const StackedData& y) {
  if (y.num_blocks() == 0) {
    throw ValidationError("stacked_norm: no blocks");
  }
  double acc = 0.0;
  for (const auto& block : y.blocks()) acc += norm_sq(block);
  return acc / static_cast<double>(y.num_blocks());
}

double stacked_norm(const StackedData& y) { return std::sqrt(stacked_norm_sq(y)); }

double stacked_inner(const StackedData& a, const StackedData& b) {
  if (a.num_blocks() != b.num_blocks() || a.num_blocks() == 0) {
    throw ValidationError("stacked_inner: block count mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.num_blocks(); ++i) acc += inner(a[i], b[i]);
  return acc / static_cast<double>(a.num_blocks());
}

// --- SymOperator ------------------------------------------------------------

SymOperator::SymOperator(Eigen::MatrixXd matrix, Weights weights)
    : matrix_(std::move(matrix)), weights_(std::move(weights)) {
  if (!weights_ || matrix_.rows() != matrix_.cols() ||
      static_cast<std::size_t>(matrix_.rows()) != weights_->size()) {
    throw ValidationError("SymOperator: matrix must be square and match the weights");
  }
  const Eigen::VectorXd s = sqrt_weights(weights_);
  // S = W^{1/2} A W^{-1/2} is symmetric iff A is self-adjoint in <.,.>_W.
  Eigen::MatrixXd sym = s.asDiagonal() * matrix_ * s.cwiseInverse().asDiagonal();
  const double scale = sym.norm();
  const double asym = (sym - sym.transpose()).norm();
  if (asym > 1e-10 * std::max(scale, 1e-300) && asym > 0.0) {
    throw ValidationError("SymOperator: matrix is not self-adjoint in the weighted inner product");
  }
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("SymOperator: eigen-decomposition failed");
  }
  const auto m = sym.rows();
  eigenvalues_.resize(static_cast<std::size_t>(m));
  basis_.resize(m, m);
  // Eigen returns ascending order.
  for (Eigen::Index j = 0; j < m; ++j) {
    eigenvalues_[static_cast<std::size_t>(j)] = solver.eigenvalues()[m - 1 - j];
    basis_.col(j) = solver.eigenvectors().col(m - 1 - j);
  }
}

SymOperator::SymOperator(Eigen::MatrixXd matrix, Weights weights, std::vector<double> eigenvalues,
                         Eigen::MatrixXd basis)
    : matrix_(std::move(matrix)),
      weights_(std::move(weights)),
      eigenvalues_(std::move(eigenvalues)),
      basis_(std::move(basis)) {}

SymOperator SymOperator::diagonal(std::span<const double> diag, const Weights& weights) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(diag.size()),
                                            static_cast<Eigen::Index>(diag.size()));
  for (std::size_t j = 0; j < diag.size(); ++j) {
    a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = diag[j];
  }
  return SymOperator(std::move(a), weights);
}

HVector SymOperator::eigenvector(std::size_t j) const {
  const Eigen::VectorXd s = sqrt_weights(weights_);
  Eigen::VectorXd phi = basis_.col(static_cast<Eigen::Index>(j)).cwiseQuotient(s);
  return HVector(std::vector<double>(phi.data(), phi.data() + phi.size()), weights_);
}

HVector SymOperator::apply(const HVector& x) const {
  if (x.size() != dim()) {
    throw ValidationError("SymOperator::apply: dimension mismatch");
  }
  Eigen::Map<const Eigen::VectorXd> xv(x.values().data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd y = matrix_ * xv;
  return HVector(std::vector<double>(y.data(), y.data() + y.size()), weights_);
}

double SymOperator::quadratic_form(const HVector& x) const { return inner(apply(x), x); }

double SymOperator::norm() const {
  double n = 0.0;
  for (double l : eigenvalues_) n = std::max(n, std::abs(l));
  return n;
}

SymOperator SymOperator::scaled(double factor) const {
  std::vector<double> ev(eigenvalues_);
  for (double& l : ev) l *= factor;
  if (factor < 0.0) std::reverse(ev.begin(), ev.end());
  if (factor < 0.0) {
    Eigen::MatrixXd flipped = basis_.rowwise().reverse();
    return SymOperator(matrix_ * factor, weights_, std::move(ev), std::move(flipped));
  }
  return SymOperator(matrix_ * factor, weights_, std::move(ev), basis_);
}

SymOperator SymOperator::spectral_map(const std::vector<double>& new_eigenvalues) const {
  if (new_eigenvalues.size() != eigenvalues_.size()) {
    throw ValidationError("spectral_map: eigenvalue count mismatch");
  }
  const Eigen::VectorXd s = sqrt_weights(weights_);
  Eigen::Map<const Eigen::VectorXd> lam(new_eigenvalues.data(),
                                        static_cast<Eigen::Index>(new_eigenvalues.size()));
  Eigen::MatrixXd sym = basis_ * lam.asDiagonal() * basis_.transpose();
  Eigen::MatrixXd a = s.cwiseInverse().asDiagonal() * sym * s.asDiagonal();
  // The map may reorder eigenvalues; keep the stored spectrum descending.
  std::vector<std::size_t> order(new_eigenvalues.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return new_eigenvalues[x] > new_eigenvalues[y];
  });
  std::vector<double> ev(order.size());
  Eigen::MatrixXd basis(basis_.rows(), basis_.cols());
  for (std::size_t j = 0; j < order.size(); ++j) {
    ev[j] = new_eigenvalues[order[j]];
    basis.col(static_cast<Eigen::Index>(j)) = basis_.col(static_cast<Eigen::Index>(order[j]));
  }
  return SymOperator(std::move(a), weights_, std::move(ev), std::move(basis));
}

std::vector<double> clamped_psd_spectrum(const SymOperator& b) {
  std::vector<double> ev(b.eigenvalues().begin(), b.eigenvalues().end());
  const double lmax = ev.empty() ? 0.0 : std::max(ev.front(), 0.0);
  const double cut = 1e-12 * lmax;
  for (double& l : ev) {
    if (l < -cut && l < 0.0) {
      throw ValidationError("operator is not positive semidefinite (eigenvalue " +
                            std::to_string(l) + ")");
    }
    if (l <= cut) l = 0.0;
  }
  return ev;
}

SymOperator frac_power(const SymOperator& b, double nu) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw ValidationError("frac_power: exponent must be finite and >= 0");
  }
  std::vector<double> ev = clamped_psd_spectrum(b);
  for (double& l : ev) l = (l > 0.0) ? std::pow(l, nu) : 0.0;
  return b.spectral_map(ev);
}

double op_poly(const SymOperator& b, std::span<const double> steps, double p) {
  if (!(p >= 0.0) || !std::isfinite(p)) {
    throw ValidationError("op_poly: power must be finite and >= 0");
  }
  const std::vector<double> ev = clamped_psd_spectrum(b);
  const double bnorm = ev.empty() ? 0.0 : ev.front();
  for (double eta : steps) {
    if (!(eta > 0.0) || eta * bnorm > 1.0 + 1e-12) {
      throw ValidationError("op_poly: step size " + std::to_string(eta) +
                            " outside (0, 1/||B||]");
    }
  }
  double worst = 0.0;
  for (double lam : ev) {
    if (lam <= 0.0) continue;  // projector convention: B^p vanishes on the kernel
    double prod = 1.0;
    for (double eta : steps) prod *= (1.0 - eta * lam);
    worst = std::max(worst, std::abs(prod) * std::pow(lam, p));
  }
  return worst;
}

double unit_norm_scale(const SymOperator& b) {
  const double n = b.norm();
  return n > 0.0 ? 1.0 / n : 1.0;
}

}  // namespace sgdreg
