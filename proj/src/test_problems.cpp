#include "sgdreg/test_problems.hpp"

#include <cmath>
#include <numbers>

#include "sgdreg/error.hpp"

namespace sgdreg {

namespace {

void check_block(std::size_t i, std::size_t n) {
  if (i >= n) throw ValidationError("equation index out of range");
}

void check_size(const HVector& v, std::size_t expected, const char* what) {
  if (v.size() != expected) {
    throw ValidationError(std::string(what) + ": dimension mismatch");
  }
}

}  // namespace

BlockLayout parse_block_layout(const std::string& name) {
  if (name == "contiguous") return BlockLayout::Contiguous;
  if (name == "round_robin") return BlockLayout::RoundRobin;
  throw ValidationError("unknown block layout '" + name + "' (contiguous | round_robin)");
}

std::string to_string(BlockLayout layout) {
  return layout == BlockLayout::Contiguous ? "contiguous" : "round_robin";
}

std::vector<std::vector<std::size_t>> partition_indices(std::size_t m, std::size_t n,
                                                        BlockLayout layout) {
  if (n == 0) throw ValidationError("number of equations n must be >= 1");
  if (n > m) {
    throw ValidationError("number of equations n = " + std::to_string(n) +
                          " exceeds the dimension m = " + std::to_string(m));
  }
  std::vector<std::vector<std::size_t>> groups(n);
  if (layout == BlockLayout::RoundRobin) {
    for (std::size_t j = 0; j < m; ++j) groups[j % n].push_back(j);
    return groups;
  }
  const std::size_t base = m / n;
  const std::size_t extra = m % n;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    for (std::size_t r = 0; r < len; ++r) groups[i].push_back(j++);
  }
  return groups;
}

// --- TP1 ----------------------------------------------------------------------

Tp1Diagonal::Tp1Diagonal(const Tp1Params& params) : params_(params) {
  if (params.m == 0) throw ValidationError("tp1: m must be >= 1");
  if (!(params.s > 0.0)) throw ValidationError("tp1: decay exponent s must be > 0");
  if (!(params.kappa >= 0.0)) throw ValidationError("tp1: kappa must be >= 0");
  blocks_ = partition_indices(params.m, params.n, params.layout);
  sigma_.resize(params.m);
  for (std::size_t j = 0; j < params.m; ++j) {
    sigma_[j] = std::pow(static_cast<double>(j + 1), -params.s);
  }
  x_weights_ = uniform_weights(params.m);
  for (const auto& b : blocks_) y_weights_.push_back(uniform_weights(b.size()));
}

HVector Tp1Diagonal::apply(std::size_t i, const HVector& x) const {
  check_block(i, blocks_.size());
  check_size(x, params_.m, "tp1 apply");
  const auto& idx = blocks_[i];
  std::vector<double> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::size_t j = idx[r];
    out[r] = sigma_[j] * x[j] + params_.kappa * sigma_[j] * x[j] * x[j];
  }
  return HVector(std::move(out), y_weights_[i]);
}

HVector Tp1Diagonal::deriv_apply(std::size_t i, const HVector& x, const HVector& h) const {
  check_block(i, blocks_.size());
  check_size(x, params_.m, "tp1 deriv_apply");
  check_size(h, params_.m, "tp1 deriv_apply");
  const auto& idx = blocks_[i];
  std::vector<double> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::size_t j = idx[r];
    out[r] = (sigma_[j] + 2.0 * params_.kappa * sigma_[j] * x[j]) * h[j];
  }
  return HVector(std::move(out), y_weights_[i]);
}

HVector Tp1Diagonal::deriv_adjoint_apply(std::size_t i, const HVector& x, const HVector& g) const {
  check_block(i, blocks_.size());
  check_size(x, params_.m, "tp1 deriv_adjoint_apply");
  const auto& idx = blocks_[i];
  check_size(g, idx.size(), "tp1 deriv_adjoint_apply");
  HVector out = HVector::zeros(x_weights_);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::size_t j = idx[r];
    out[j] = (sigma_[j] + 2.0 * params_.kappa * sigma_[j] * x[j]) * g[r];
  }
  return out;
}

void Tp1Diagonal::descend(std::size_t i, HVector& x, const HVector& y_i, double step) const {
  check_block(i, blocks_.size());
  const auto& idx = blocks_[i];
  check_size(y_i, idx.size(), "tp1 descend");
  // Same operation order as residual_gradient followed by axpy(-step, .), so
  // both paths produce identical bits.
  const double a = -step;
  const double kappa = params_.kappa;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::size_t j = idx[r];
    const double xj = x[j];
    const double fj = sigma_[j] * xj + kappa * sigma_[j] * xj * xj;
    const double g = (sigma_[j] + 2.0 * kappa * sigma_[j] * xj) * (fj - y_i[r]);
    x[j] = xj + a * g;
  }
}

std::optional<std::vector<double>> Tp1Diagonal::normal_diagonal(const HVector& x) const {
  check_size(x, params_.m, "tp1 normal_diagonal");
  const double inv_n = 1.0 / static_cast<double>(blocks_.size());
  std::vector<double> d(params_.m);
  for (std::size_t j = 0; j < params_.m; ++j) {
    const double dj = sigma_[j] + 2.0 * params_.kappa * sigma_[j] * x[j];
    d[j] = dj * dj * inv_n;
  }
  return d;
}

// --- TP2 ----------------------------------------------------------------------

Forcing parse_forcing(const std::string& name) {
  if (name == "sine") return Forcing::Sine;
  if (name == "one") return Forcing::One;
  if (name == "zero") return Forcing::Zero;
  throw ValidationError("unknown forcing '" + name + "' (sine | one | zero)");
}

std::string to_string(Forcing forcing) {
  switch (forcing) {
    case Forcing::Sine: return "sine";
    case Forcing::One: return "one";
    case Forcing::Zero: return "zero";
  }
  return "sine";
}

std::vector<double> forcing_values(Forcing forcing, std::size_t m) {
  const double h = 1.0 / static_cast<double>(m + 1);
  std::vector<double> f(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double t = static_cast<double>(j + 1) * h;
    switch (forcing) {
      case Forcing::Sine:
        f[j] = std::numbers::pi * std::numbers::pi * std::sin(std::numbers::pi * t);
        break;
      case Forcing::One: f[j] = 1.0; break;
      case Forcing::Zero: f[j] = 0.0; break;
    }
  }
  return f;
}

std::vector<double> tp2_forward_solve(std::span<const double> c, std::span<const double> f) {
  const std::size_t m = c.size();
  if (m == 0 || f.size() != m) {
    throw ValidationError("tp2_forward_solve: coefficient and forcing sizes differ");
  }
  const double h = 1.0 / static_cast<double>(m + 1);
  const double off = -1.0 / (h * h);
  const double diag0 = 2.0 / (h * h);
  // Thomas algorithm: forward elimination with scratch pivots, back substitution.
  std::vector<double> pivot(m);
  std::vector<double> u(m);
  for (std::size_t j = 0; j < m; ++j) {
    double d = diag0 + c[j];
    double rhs = f[j];
    if (j > 0) {
      const double l = off / pivot[j - 1];
      d -= l * off;
      rhs -= l * u[j - 1];
    }
    if (!(d > 0.0)) {
      throw ValidationError("tp2: operator -u'' + c u is not positive definite at node " +
                            std::to_string(j + 1) + " (coefficient too negative)");
    }
    pivot[j] = d;
    u[j] = rhs;
  }
  for (std::size_t j = m; j-- > 0;) {
    const double upper = (j + 1 < m) ? off * u[j + 1] : 0.0;
    u[j] = (u[j] - upper) / pivot[j];
  }
  return u;
}

Tp2PotentialBvp::Tp2PotentialBvp(const Tp2Params& params) : params_(params) {
  if (params.m < 8) throw ValidationError("tp2: need m >= 8 interior nodes");
  if (!(std::isfinite(params.forcing_scale) && params.forcing_scale > 0.0)) {
    throw ValidationError("tp2: forcing_scale must be positive");
  }
  f_ = forcing_values(params.forcing, params.m);
  for (double& v : f_) v *= params.forcing_scale;
  groups_ = partition_indices(params.m, params.n, params.layout);
  weights_ = uniform_weights(params.m, h());
  for (const auto& g : groups_) y_weights_.push_back(uniform_weights(g.size(), h()));
  // Fails early when the background coefficient is inadmissible.
  (void)tp2_forward_solve(background().values(), f_);
}

HVector Tp2PotentialBvp::background() const {
  return HVector(std::vector<double>(params_.m, params_.c_background), weights_);
}

std::vector<double> Tp2PotentialBvp::state(const HVector& c) const {
  check_size(c, params_.m, "tp2 state");
  return tp2_forward_solve(c.values(), f_);
}

HVector Tp2PotentialBvp::apply(std::size_t i, const HVector& c) const {
  check_block(i, groups_.size());
  const std::vector<double> u = state(c);
  const auto& idx = groups_[i];
  std::vector<double> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = u[idx[r]];
  return HVector(std::move(out), y_weights_[i]);
}

HVector Tp2PotentialBvp::deriv_apply(std::size_t i, const HVector& c, const HVector& h) const {
  check_block(i, groups_.size());
  check_size(h, params_.m, "tp2 deriv_apply");
  const std::vector<double> u = state(c);
  std::vector<double> rhs(params_.m);
  for (std::size_t j = 0; j < params_.m; ++j) rhs[j] = -h[j] * u[j];
  const std::vector<double> v = tp2_forward_solve(c.values(), rhs);
  const auto& idx = groups_[i];
  std::vector<double> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = v[idx[r]];
  return HVector(std::move(out), y_weights_[i]);
}

HVector Tp2PotentialBvp::deriv_adjoint_apply(std::size_t i, const HVector& c,
                                             const HVector& g) const {
  check_block(i, groups_.size());
  const auto& idx = groups_[i];
  check_size(g, idx.size(), "tp2 deriv_adjoint_apply");
  const std::vector<double> u = state(c);
  std::vector<double> rhs(params_.m, 0.0);
  for (std::size_t r = 0; r < idx.size(); ++r) rhs[idx[r]] = g[r];
  const std::vector<double> z = tp2_forward_solve(c.values(), rhs);
  std::vector<double> out(params_.m);
  for (std::size_t j = 0; j < params_.m; ++j) out[j] = -u[j] * z[j];
  return HVector(std::move(out), weights_);
}

HVector Tp2PotentialBvp::residual_gradient(std::size_t i, const HVector& c,
                                           const HVector& y_i) const {
  check_block(i, groups_.size());
  const auto& idx = groups_[i];
  check_size(y_i, idx.size(), "tp2 residual_gradient");
  // One forward solve shared by the residual and the adjoint.
  const std::vector<double> u = state(c);
  std::vector<double> rhs(params_.m, 0.0);
  for (std::size_t r = 0; r < idx.size(); ++r) rhs[idx[r]] = u[idx[r]] - y_i[r];
  const std::vector<double> z = tp2_forward_solve(c.values(), rhs);
  std::vector<double> out(params_.m);
  for (std::size_t j = 0; j < params_.m; ++j) out[j] = -u[j] * z[j];
  return HVector(std::move(out), weights_);
}

}  // namespace sgdreg
