#include "sgdreg/problem.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sgdreg/error.hpp"

namespace sgdreg {

namespace {

HVector unit_vector(const Weights& w, std::size_t j) {
  HVector e = HVector::zeros(w);
  e[j] = 1.0;
  return e;
}

HVector random_normal(const Weights& w, Rng& rng) {
  std::vector<double> v(w->size());
  for (double& x : v) x = rng.normal();
  return HVector(std::move(v), w);
}

Eigen::VectorXd sqrt_of(const Weights& w) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(w->size()));
  for (std::size_t j = 0; j < w->size(); ++j) s[static_cast<Eigen::Index>(j)] = std::sqrt((*w)[j]);
  return s;
}

StackedData deriv_full(const NonlinearSystem& sys, const HVector& x, const HVector& h) {
  std::vector<HVector> blocks;
  blocks.reserve(sys.num_equations());
  for (std::size_t i = 0; i < sys.num_equations(); ++i) blocks.push_back(sys.deriv_apply(i, x, h));
  return StackedData(std::move(blocks));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool Box::contains(const HVector& x) const {
  if (lo.size() != x.size() || hi.size() != x.size()) return false;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] < lo[j] || x[j] > hi[j]) return false;
  }
  return true;
}

HVector NonlinearSystem::residual_gradient(std::size_t i, const HVector& x,
                                           const HVector& y_i) const {
  return deriv_adjoint_apply(i, x, apply(i, x) - y_i);
}

void NonlinearSystem::descend(std::size_t i, HVector& x, const HVector& y_i, double step) const {
  const HVector g = residual_gradient(i, x, y_i);
  x.axpy(-step, g);
}

StackedData apply_full(const NonlinearSystem& sys, const HVector& x) {
  if (auto box = sys.domain(); box && !box->contains(x)) {
    throw ValidationError("apply_full: point outside the declared domain of " + sys.name());
  }
  std::vector<HVector> blocks;
  blocks.reserve(sys.num_equations());
  for (std::size_t i = 0; i < sys.num_equations(); ++i) blocks.push_back(sys.apply(i, x));
  return StackedData(std::move(blocks));
}

Eigen::MatrixXd jacobian(const NonlinearSystem& sys, std::size_t i, const HVector& x) {
  const auto m = static_cast<Eigen::Index>(sys.dim_x());
  const auto my = static_cast<Eigen::Index>(sys.dim_y(i));
  Eigen::MatrixXd jac(my, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const HVector col = sys.deriv_apply(i, x, unit_vector(sys.x_weights(), static_cast<std::size_t>(j)));
    for (Eigen::Index r = 0; r < my; ++r) jac(r, j) = col[static_cast<std::size_t>(r)];
  }
  return jac;
}

SymOperator normal_operator(const NonlinearSystem& sys, const HVector& x) {
  // In coordinates K_i^* = W_x^{-1} J_i^T W_y, hence B = W_x^{-1} (1/n) sum J_i^T W_y J_i.
  const auto m = static_cast<Eigen::Index>(sys.dim_x());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = 0; i < sys.num_equations(); ++i) {
    const Eigen::MatrixXd jac = jacobian(sys, i, x);
    const auto& wy = *sys.y_weights(i);
    Eigen::Map<const Eigen::VectorXd> wyv(wy.data(), static_cast<Eigen::Index>(wy.size()));
    gram.noalias() += jac.transpose() * wyv.asDiagonal() * jac;
  }
  gram /= static_cast<double>(sys.num_equations());
  const auto& wx = *sys.x_weights();
  Eigen::Map<const Eigen::VectorXd> wxv(wx.data(), m);
  Eigen::MatrixXd b = wxv.cwiseInverse().asDiagonal() * gram;
  return SymOperator(std::move(b), sys.x_weights());
}

NormalForm::NormalForm(const NonlinearSystem& sys, const HVector& x) : weights_(sys.x_weights()) {
  if (auto d = sys.normal_diagonal(x)) {
    diag_ = std::move(*d);
    double lmax = 0.0;
    for (double l : diag_) lmax = std::max(lmax, l);
    const double cut = 1e-12 * lmax;
    for (double& l : diag_) {
      if (l < -cut && l < 0.0) {
        throw ValidationError("operator is not positive semidefinite (eigenvalue " +
                              format_double(l) + ")");
      }
      if (l <= cut) l = 0.0;
    }
  } else {
    dense_.emplace(normal_operator(sys, x));
  }
}

double NormalForm::quadratic_form(const HVector& e) const {
  if (dense_) return dense_->quadratic_form(e);
  const auto& w = *weights_;
  double s = 0.0;
  for (std::size_t j = 0; j < diag_.size(); ++j) s += w[j] * diag_[j] * e[j] * e[j];
  return s;
}

HVector NormalForm::power_apply(double nu, const HVector& w) const {
  if (dense_) return frac_power(*dense_, nu).apply(w);
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw ValidationError("frac_power: exponent must be finite and >= 0");
  }
  HVector out = HVector::zeros(weights_);
  for (std::size_t j = 0; j < diag_.size(); ++j) {
    out[j] = diag_[j] > 0.0 ? std::pow(diag_[j], nu) * w[j] : 0.0;
  }
  return out;
}

double NormalForm::norm() const {
  if (dense_) return dense_->norm();
  double n = 0.0;
  for (double l : diag_) n = std::max(n, l);
  return n;
}

StackedData make_noisy(const StackedData& y_true, const NoiseModel& noise) {
  if (!(noise.delta >= 0.0) || !std::isfinite(noise.delta)) {
    throw ValidationError("noise level delta must be finite and >= 0");
  }
  if (noise.delta == 0.0) return y_true;
  Rng rng(noise.seed);
  std::vector<HVector> dir;
  dir.reserve(y_true.num_blocks());
  for (const auto& block : y_true.blocks()) dir.push_back(random_normal(block.weights(), rng));
  StackedData direction(std::move(dir));
  const double scale = noise.delta / stacked_norm(direction);
  std::vector<HVector> out;
  out.reserve(y_true.num_blocks());
  for (std::size_t i = 0; i < y_true.num_blocks(); ++i) {
    HVector b = y_true[i];
    b.axpy(scale, direction[i]);
    out.push_back(std::move(b));
  }
  return StackedData(std::move(out));
}

SourceTruth build_source_truth(const NonlinearSystem& sys, const HVector& x1,
                               const SourceSpec& spec, std::size_t max_sweeps, double tol) {
  if (!(spec.nu >= 0.0)) {
    throw ValidationError("source condition exponent nu must be >= 0");
  }
  if (spec.w.size() != x1.size()) {
    throw ValidationError("source representer w has the wrong dimension");
  }
  const double wnorm = norm(spec.w);
  SourceTruth out{x1, 0, 0.0};
  if (wnorm == 0.0) return out;

  const double stop = tol * std::max(1.0, wnorm);
  HVector x = x1;
  double last_diff = std::numeric_limits<double>::infinity();
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    HVector next = x1 + NormalForm(sys, x).power_apply(spec.nu, spec.w);
    last_diff = norm(next - x);
    x = std::move(next);
    if (last_diff <= stop) {
      out.sweeps = sweep;
      out.x_dag = x;
      out.residual = norm(NormalForm(sys, x).power_apply(spec.nu, spec.w) - (x - x1));
      return out;
    }
  }
  throw NumericalError("source-condition fixed point did not converge in " +
                       std::to_string(max_sweeps) + " sweeps (last update " +
                       format_double(last_diff) + ")");
}

// --- verifiers ----------------------------------------------------------------

std::string verifier_csv(std::span<const VerifierRow> rows) {
  std::ostringstream os;
  os << "check,i,sample_id,value,threshold,pass\n";
  for (const auto& r : rows) {
    os << r.check << ',' << r.i << ',' << r.sample_id << ',' << format_double(r.value) << ','
       << format_double(r.threshold) << ',' << (r.pass ? 1 : 0) << '\n';
  }
  return os.str();
}

HVector random_ball_point(const HVector& center, double radius, Rng& rng) {
  HVector dir = random_normal(center.weights(), rng);
  const double n = norm(dir);
  const double r = radius * rng.uniform01();
  HVector out = center;
  out.axpy(n > 0.0 ? r / n : 0.0, dir);
  return out;
}

ConeEstimate estimate_cone_constant(const NonlinearSystem& sys, const HVector& center,
                                    double radius, std::size_t samples, std::uint64_t seed) {
  if (!(radius > 0.0) || samples == 0) {
    throw ValidationError("estimate_cone_constant: need radius > 0 and samples >= 1");
  }
  Rng rng(seed);
  ConeEstimate est;
  est.ball_radius = radius;
  for (std::size_t s = 0; s < samples; ++s) {
    const HVector x = random_ball_point(center, radius, rng);
    const HVector xt = random_ball_point(center, radius, rng);
    const StackedData diff = apply_full(sys, x) - apply_full(sys, xt);
    const double den = stacked_norm(diff);
    ++est.samples;
    if (den < 1e-14) {
      ++est.skipped;
      continue;
    }
    const double num = stacked_norm(diff - deriv_full(sys, xt, x - xt));
    est.eta_hat = std::max(est.eta_hat, num / den);
  }
  return est;
}

std::vector<VerifierRow> check_linearization_bounds(const NonlinearSystem& sys,
                                                    const HVector& center, double radius,
                                                    std::size_t samples, double eta_hat,
                                                    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<VerifierRow> rows;
  for (std::size_t s = 0; s < samples; ++s) {
    const HVector x = random_ball_point(center, radius, rng);
    const HVector xt = random_ball_point(center, radius, rng);
    // Bounds at the base point xt: compare F(x) - F(xt) with F'(xt)(x - xt).
    const double res = stacked_norm(apply_full(sys, x) - apply_full(sys, xt));
    if (res < 1e-14) continue;
    const double lin = stacked_norm(deriv_full(sys, xt, x - xt));
    const double slack = 1e-12 * (res + lin);
    const double lower = lin / (1.0 + eta_hat) - res;
    const double upper = eta_hat < 1.0 ? res - lin / (1.0 - eta_hat)
                                       : -std::numeric_limits<double>::infinity();
    rows.push_back({"linearization_lower", 0, s, lower, slack, lower <= slack});
    rows.push_back({"linearization_upper", 0, s, upper, slack, upper <= slack});
  }
  return rows;
}

double operator_norm(const NonlinearSystem& sys, std::size_t i, const HVector& x, double rel_tol,
                     std::size_t max_iter) {
  Rng rng(0x5eedULL + i);
  HVector v = random_normal(sys.x_weights(), rng);
  v *= 1.0 / norm(v);
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    HVector w = sys.deriv_adjoint_apply(i, x, sys.deriv_apply(i, x, v));
    const double next = inner(w, v);
    const double wn = norm(w);
    if (!std::isfinite(wn)) {
      throw NumericalError("operator_norm: non-finite power iterate");
    }
    if (wn == 0.0) return 0.0;
    if (it > 0 && std::abs(next - lambda) <= 1e-3 * rel_tol * std::abs(next)) {
      return std::sqrt(std::max(next, 0.0));
    }
    lambda = next;
    w *= 1.0 / wn;
    v = std::move(w);
  }
  throw NumericalError("operator_norm: power iteration stagnated after " +
                       std::to_string(max_iter) + " iterations");
}

double estimate_deriv_bound(const NonlinearSystem& sys, std::span<const HVector> points) {
  if (points.empty()) {
    throw ValidationError("estimate_deriv_bound: empty sample set");
  }
  double bound = 0.0;
  for (const auto& x : points) {
    for (std::size_t i = 0; i < sys.num_equations(); ++i) {
      bound = std::max(bound, operator_norm(sys, i, x));
    }
  }
  return bound;
}

RangeInvarianceReport check_range_invariance(const NonlinearSystem& sys, const HVector& x_dag,
                                             std::span<const HVector> points) {
  RangeInvarianceReport report;
  const Eigen::VectorXd sx = sqrt_of(sys.x_weights());
  for (std::size_t i = 0; i < sys.num_equations(); ++i) {
    const Eigen::VectorXd sy = sqrt_of(sys.y_weights(i));
    // Work in weighted-orthonormal coordinates so Euclidean norms are the
    // Hilbert norms.
    const Eigen::MatrixXd k =
        sy.asDiagonal() * jacobian(sys, i, x_dag) * sx.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(k, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index r = 0; r < sv.size(); ++r) {
      if (sv[r] > 1e-10 * smax) ++rank;
    }
    const bool deficient = rank < k.rows();
    if (deficient) {
      warn("range invariance: F_" + std::to_string(i + 1) +
           "'(x_dag) is rank deficient; the factor R is not unique");
    }
    Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(k.cols(), k.rows());
    for (Eigen::Index r = 0; r < rank; ++r) {
      pinv += svd.matrixV().col(r) * (1.0 / sv[r]) * svd.matrixU().col(r).transpose();
    }
    for (std::size_t s = 0; s < points.size(); ++s) {
      const Eigen::MatrixXd jx =
          sy.asDiagonal() * jacobian(sys, i, points[s]) * sx.cwiseInverse().asDiagonal();
      const Eigen::MatrixXd r = jx * pinv;
      RangeInvarianceRow row;
      row.sample_id = s;
      row.i = i + 1;
      row.distance = norm(points[s] - x_dag);
      const double jn = jx.norm();
      row.fit_residual = jn > 0.0 ? (r * k - jx).norm() / jn : 0.0;
      const Eigen::MatrixXd diff = r - Eigen::MatrixXd::Identity(r.rows(), r.cols());
      row.r_minus_identity =
          diff.size() > 0 ? Eigen::JacobiSVD<Eigen::MatrixXd>(diff).singularValues()[0] : 0.0;
      row.c_r = row.distance > 0.0 ? row.r_minus_identity / row.distance : 0.0;
      row.rank_deficient = deficient;
      report.c_r_max = std::max(report.c_r_max, row.c_r);
      report.rows.push_back(row);
    }
  }
  return report;
}

std::vector<VerifierRow> range_invariance_rows(const RangeInvarianceReport& report) {
  std::vector<VerifierRow> rows;
  for (const auto& r : report.rows) {
    // The factorization is exact only when the row space of F_i'(x) lies in
    // that of F_i'(x_dag); the residual is reported, not asserted.
    rows.push_back({"range_invariance_fit", r.i, r.sample_id, r.fit_residual,
                    std::numeric_limits<double>::infinity(), std::isfinite(r.fit_residual)});
    rows.push_back({"range_invariance_cR", r.i, r.sample_id, r.c_r,
                    std::numeric_limits<double>::infinity(), std::isfinite(r.c_r)});
  }
  return rows;
}

std::vector<VerifierRow> check_adjoint(const NonlinearSystem& sys, std::span<const HVector> points,
                                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<VerifierRow> rows;
  for (std::size_t s = 0; s < points.size(); ++s) {
    const HVector& x = points[s];
    for (std::size_t i = 0; i < sys.num_equations(); ++i) {
      const HVector h = random_normal(sys.x_weights(), rng);
      const HVector h2 = random_normal(sys.x_weights(), rng);
      const HVector g = random_normal(sys.y_weights(i), rng);
      const HVector dh = sys.deriv_apply(i, x, h);
      const double lhs = inner(dh, g);
      const double rhs = inner(h, sys.deriv_adjoint_apply(i, x, g));
      const double hn = norm(h);
      const double op = hn > 0.0 ? norm(dh) / hn : 0.0;
      const double value = std::abs(lhs - rhs) / (hn * norm(g) * (1.0 + op));
      rows.push_back({"adjoint", i + 1, s, value, 1e-10, value <= 1e-10});

      const double a = rng.normal();
      const double b = rng.normal();
      HVector combo = a * h;
      combo.axpy(b, h2);
      HVector expect = a * dh;
      expect.axpy(b, sys.deriv_apply(i, x, h2));
      const double gap = norm(sys.deriv_apply(i, x, combo) - expect);
      const double lin = gap / (std::max(norm(expect), 1e-300) + op * norm(combo));
      rows.push_back({"deriv_linearity", i + 1, s, lin, 1e-10, lin <= 1e-10});
    }
  }
  return rows;
}

double loglog_slope(std::span<const double> steps, std::span<const double> errors) {
  const std::size_t n = std::min(steps.size(), errors.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double lx = std::log(steps[j]);
    const double ly = std::log(errors[j]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

std::vector<VerifierRow> check_derivative_fd(const NonlinearSystem& sys,
                                             std::span<const HVector> points, std::uint64_t seed) {
  static constexpr double kSteps[] = {1e-3, 1e-4, 1e-5};
  static constexpr double kNoiseProbes[] = {1e-6, 1e-7, 1e-8};
  Rng rng(seed);
  std::vector<VerifierRow> rows;
  for (std::size_t s = 0; s < points.size(); ++s) {
    const HVector& x = points[s];
    for (std::size_t i = 0; i < sys.num_equations(); ++i) {
      // Half white noise, half a direction the derivative sees: smoothing maps
      // nearly annihilate white noise and leave no measurable Taylor term.
      HVector h = random_normal(sys.x_weights(), rng);
      h *= 1.0 / norm(h);
      const HVector fx = sys.apply(i, x);
      HVector seen = sys.deriv_adjoint_apply(i, x, random_normal(fx.weights(), rng));
      if (const double ns = norm(seen); ns > 0.0) h.axpy(1.0 / ns, seen);
      h *= 1.0 / norm(h);
      const HVector dh = sys.deriv_apply(i, x, h);
      const auto fd_error = [&](double t) {
        HVector xt = x;
        xt.axpy(t, h);
        HVector quotient = sys.apply(i, xt) - fx;
        quotient *= 1.0 / t;
        return norm(quotient - dh);
      };
      // Evaluation noise of F, measured at steps where the Taylor term is
      // negligible (largest of several, single probes scatter widely); steps
      // whose error is within 30x of noise / t carry no slope information.
      double noise = std::numeric_limits<double>::epsilon() * (1.0 + norm(fx));
      for (double t : kNoiseProbes) noise = std::max(noise, t * fd_error(t));
      const double scale = 30.0 * noise;
      std::vector<double> steps, errs;
      double worst = 0.0;
      for (double t : kSteps) {
        const double err = fd_error(t);
        worst = std::max(worst, err);
        if (err > scale / t) {
          steps.push_back(t);
          errs.push_back(err);
        }
      }
      if (steps.size() < 2) {
        const double floor = scale / kSteps[2];
        rows.push_back({"fd_roundoff", i + 1, s, worst, floor, worst <= floor});
        continue;
      }
      const double slope = loglog_slope(steps, errs);
      rows.push_back({"fd_order", i + 1, s, slope, 0.9, slope >= 0.9});
    }
  }
  return rows;
}

}  // namespace sgdreg
