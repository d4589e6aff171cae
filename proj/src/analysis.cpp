#include "sgdreg/analysis.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "sgdreg/error.hpp"
#include "sgdreg/hilbert.hpp"
#include "sgdreg/rng.hpp"

namespace sgdreg {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

constexpr std::size_t kSumLengths[] = {4, 16, 64, 256, 1024};

/// Relative violation of lhs <= rhs.
double violation(double lhs, double rhs) {
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return (lhs - rhs) / scale;
}

void record(IneqReport& rep, double v, const std::string& where) {
  ++rep.evaluations;
  if (v > rep.max_violation || rep.evaluations == 1) {
    rep.max_violation = v;
    rep.worst_case = where;
  }
}

bool near(double a, double b) { return std::abs(a - b) <= 1e-12; }

/// eta_j for j = 1..k (index 0 unused) and S_j = sum_{l=j+1}^k eta_l.
void step_sums(double eta0, double alpha, std::size_t k, std::vector<double>& eta,
               std::vector<double>& tail) {
  eta.assign(k + 1, 0.0);
  tail.assign(k + 1, 0.0);
  for (std::size_t j = 1; j <= k; ++j) eta[j] = eta0 * std::pow(static_cast<double>(j), -alpha);
  double s = 0.0;
  for (std::size_t j = k; j-- > 1;) {
    s += eta[j + 1];
    tail[j] = s;
  }
}

}  // namespace

// --- rate fits ----------------------------------------------------------------

RateFit fit_power_law(std::span<const double> x, std::span<const double> y, double x_min,
                      double x_max, double target_slope, double tol, std::size_t min_points) {
  if (x.size() != y.size()) throw ValidationError("fit: x and y differ in length");
  RateFit fit;
  fit.x_min = x_min;
  fit.x_max = x_max;
  fit.target_slope = target_slope;
  fit.tol = tol;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] < x_min || x[j] > x_max) continue;
    if (!(x[j] > 0.0) || !(y[j] > 0.0)) {
      throw ValidationError("fit: values in the window must be positive");
    }
    fit.log_points.emplace_back(std::log(x[j]), std::log(y[j]));
  }
  fit.points = fit.log_points.size();
  if (fit.points < std::max<std::size_t>(2, min_points)) {
    throw ValidationError("fit: window [" + short_fmt(x_min) + ", " + short_fmt(x_max) +
                          "] holds " + std::to_string(fit.points) + " points, need " +
                          std::to_string(std::max<std::size_t>(2, min_points)));
  }
  double mx = 0.0, my = 0.0;
  for (const auto& [lx, ly] : fit.log_points) {
    mx += lx;
    my += ly;
  }
  const double n = static_cast<double>(fit.points);
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [lx, ly] : fit.log_points) {
    sxx += (lx - mx) * (lx - mx);
    sxy += (lx - mx) * (ly - my);
    syy += (ly - my) * (ly - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("fit: window holds a single distinct x value");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy > 0.0) {
    double sse = 0.0;
    for (const auto& [lx, ly] : fit.log_points) {
      const double r = ly - (fit.intercept + fit.slope * lx);
      sse += r * r;
    }
    fit.r2 = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  } else {
    fit.r2 = 1.0;
  }
  fit.pass = std::abs(fit.slope - target_slope) <= tol;
  return fit;
}

RateFit fit_rate(std::span<const MCEstimate> estimates, RateQuantity quantity, double k_min,
                 double k_max, double target_slope, double tol) {
  if (estimates.empty()) throw ValidationError("fit_rate: no estimates");
  std::vector<double> ks, vs;
  for (const auto& e : estimates) {
    ks.push_back(static_cast<double>(e.k));
    switch (quantity) {
      case RateQuantity::Mse: vs.push_back(e.mse); break;
      case RateQuantity::BerrMse:
        if (!e.berr_mse) throw ValidationError("fit_rate: ensemble has no berr column");
        vs.push_back(*e.berr_mse);
        break;
      case RateQuantity::ResidualMse: vs.push_back(e.residual_mse); break;
    }
  }
  if (k_min <= 0.0 && k_max <= 0.0) {
    k_max = ks.back();
    k_min = k_max / 100.0;
  }
  return fit_power_law(ks, vs, k_min, k_max, target_slope, tol);
}

std::string rate_fit_points_csv(const RateFit& fit) {
  std::ostringstream os;
  os << "log_x,log_y\n";
  for (const auto& [lx, ly] : fit.log_points) os << fmt(lx) << ',' << fmt(ly) << '\n';
  return os.str();
}

TargetExponents target_exponents(double nu, double alpha, double eps) {
  if (!(nu > 0.0 && nu <= 0.5)) throw ValidationError("target_exponents: nu must be in (0, 1/2]");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("target_exponents: alpha must be in (0, 1)");
  }
  if (!(eps > 0.0 && eps < alpha / 2.0)) {
    throw ValidationError("target_exponents: eps must be in (0, alpha/2)");
  }
  return {std::min(2.0 * nu * (1.0 - alpha), alpha - eps),
          std::min((1.0 + 2.0 * nu) * (1.0 - alpha), 1.0 - eps)};
}

double delta_rate_exponent(double nu) {
  if (!(nu >= 0.0)) throw ValidationError("delta_rate_exponent: nu must be >= 0");
  return 4.0 * nu / (2.0 * nu + 1.0);
}

DeltaSweep delta_sweep(const std::function<Experiment(double, std::size_t)>& build,
                       std::span<const double> deltas, const StoppingRule& rule,
                       const PathPlan& plan, double target_slope, double tol) {
  if (deltas.empty()) throw ValidationError("delta_sweep: empty delta list");
  for (std::size_t j = 1; j < deltas.size(); ++j) {
    if (!(deltas[j] < deltas[j - 1])) {
      throw ValidationError("delta_sweep: deltas must be strictly decreasing");
    }
  }
  DeltaSweep sweep;
  std::vector<double> xs, ys;
  for (double d : deltas) {
    const std::size_t k = stopping_k(rule, d);
    const Experiment ex = build(d, k);
    PathPlan p = plan;
    p.checkpoints = {k + 1};
    const auto est = run_ensemble(ex, p);
    sweep.rows.push_back({d, k, est.back()});
    xs.push_back(d);
    ys.push_back(est.back().mse);
  }
  if (deltas.size() >= 2) {
    sweep.fit = fit_power_law(xs, ys, deltas.back(), deltas.front(), target_slope, tol, 2);
  }
  return sweep;
}

std::string delta_sweep_csv(const DeltaSweep& sweep) {
  std::ostringstream os;
  os << "delta,k,mse,mse_stderr,bias_sq,variance,residual_mse,M,seed\n";
  for (const auto& r : sweep.rows) {
    os << fmt(r.delta) << ',' << r.k << ',' << fmt(r.final.mse) << ','
       << fmt(r.final.mse_stderr) << ',' << fmt(r.final.bias_sq) << ','
       << fmt(r.final.variance) << ',' << fmt(r.final.residual_mse) << ',' << r.final.M << ','
       << r.final.seed << '\n';
  }
  return os.str();
}

// --- Beta function ------------------------------------------------------------

double beta_function(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw ValidationError("beta_function: a and b must be finite and > 0");
  }
  using boost::math::quadrature::gauss_kronrod;
  // int_0^{1/2} s^{a-1} (1-s)^{b-1} ds with s = u^{1/a}:
  //   (1/a) int_0^{2^{-a}} (1 - u^{1/a})^{b-1} du.
  // For p >= 1 the integrand is already bounded and is integrated directly.
  auto half = [](double p, double q) {
    double err = 0.0;
    if (p >= 1.0) {
      auto f = [p, q](double s) { return std::pow(s, p - 1.0) * std::pow(1.0 - s, q - 1.0); };
      return gauss_kronrod<double, 31>::integrate(f, 0.0, 0.5, 15, 1e-13, &err);
    }
    const double top = std::pow(0.5, p);
    auto f = [p, q](double u) { return std::pow(1.0 - std::pow(u, 1.0 / p), q - 1.0) / p; };
    return gauss_kronrod<double, 31>::integrate(f, 0.0, top, 15, 1e-13, &err);
  };
  return half(a, b) + half(b, a);
}

// --- inequality checks --------------------------------------------------------

IneqReport check_lemma_a1(std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw ValidationError("check_lemma_a1: trials must be >= 1");
  IneqReport rep;
  rep.id = "A.1";
  auto weights_cache = std::vector<Weights>(9);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(substream_seed(seed, t));
    const std::size_t d = 1 + rng.uniform_index(8);
    if (!weights_cache[d]) weights_cache[d] = uniform_weights(d);
    std::vector<double> lam(d);
    for (double& l : lam) l = rng.uniform01();
    const double mode = rng.uniform01();
    if (mode < 0.2) lam[0] = 1.0;
    if (mode > 0.8 && d > 1) lam[d - 1] = 0.0;
    const double lmax = *std::max_element(lam.begin(), lam.end());
    const std::size_t len = 2 + rng.uniform_index(49);
    std::vector<double> steps(len);
    const double eta_max = lmax > 0.0 ? 1.0 / lmax : 1.0;
    double total = 0.0;
    for (double& e : steps) {
      e = eta_max * (1.0 - rng.uniform01());  // in (0, eta_max]
      total += e;
    }
    double p = rng.uniform01();
    const double pmode = rng.uniform01();
    if (pmode < 0.1) p = 0.0;
    if (pmode > 0.9) p = 1.0;
    const SymOperator b = SymOperator::diagonal(lam, weights_cache[d]);
    const double lhs = op_poly(b, steps, p);
    const double rhs = p == 0.0 ? 1.0 : std::pow(p / (std::numbers::e * total), p);
    record(rep, violation(lhs, rhs),
           "dim=" + std::to_string(d) + " len=" + std::to_string(len) + " p=" + short_fmt(p) +
               " sum_eta=" + short_fmt(total));
  }
  rep.trials = trials;
  return rep;
}

std::vector<IneqReport> check_lemma_a2(std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw ValidationError("check_lemma_a2: trials must be >= 1");
  IneqReport lower, frac, unit;
  lower.id = "A.2.1";
  frac.id = "A.2.2";
  unit.id = "A.2.3";
  std::vector<double> eta, tail;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(substream_seed(seed, t));
    const double alpha = 0.01 + 0.98 * rng.uniform01();
    double beta = rng.uniform01();
    const double r = rng.uniform01();
    const double eta0 = 0.05 + 1.95 * rng.uniform01();
    const double mode = rng.uniform01();
    if (mode < 0.1) beta = 1.0 - alpha;
    if (mode > 0.9) beta = 0.0;
    const double gamma = alpha + beta;
    const bool frac_ok = r < 1.0 && gamma < 1.0 && !near(gamma, 1.0);
    const double beta_fn = frac_ok ? beta_function(1.0 - r, 1.0 - gamma) : 0.0;
    const std::string params = "alpha=" + short_fmt(alpha) + " beta=" + short_fmt(beta) +
                               " r=" + short_fmt(r) + " eta0=" + short_fmt(eta0);

    for (std::size_t k : kSumLengths) {
      step_sums(eta0, alpha, k, eta, tail);
      const double kk = static_cast<double>(k);
      const std::string where = params + " k=" + std::to_string(k);

      const double sum = tail[1] + eta[1];
      const double bound = (1.0 - std::pow(2.0, alpha - 1.0)) / (1.0 - alpha) * eta0 *
                           std::pow(kk + 1.0, 1.0 - alpha);
      record(lower, violation(bound, sum), where);

      if (frac_ok) {
        double lhs = 0.0;
        for (std::size_t j = 1; j < k; ++j) {
          lhs += eta[j] * std::pow(tail[j], -r) * std::pow(static_cast<double>(j), -beta);
        }
        const double rhs =
            std::pow(eta0, 1.0 - r) * beta_fn * std::pow(kk, r * alpha + 1.0 - r - gamma);
        record(frac, violation(lhs, rhs), where);
      } else {
        ++frac.skipped;
      }

      double lhs = 0.0;
      for (std::size_t j = 1; j < k; ++j) {
        lhs += eta[j] / tail[j] * std::pow(static_cast<double>(j), -beta);
      }
      double rhs;
      if (near(gamma, 1.0)) {
        rhs = 4.0 * std::pow(kk, alpha - 1.0) * std::log(kk);
      } else if (gamma < 1.0) {
        rhs = std::pow(2.0, gamma) / (1.0 - gamma) * std::pow(kk, -beta);
      } else {
        rhs = 2.0 * gamma / (gamma - 1.0) * std::pow(kk, alpha - 1.0);
      }
      rhs += std::pow(2.0, 1.0 + gamma) * std::pow(kk, -beta) * std::log(kk);
      record(unit, violation(lhs, rhs), where);
    }
  }
  lower.trials = frac.trials = unit.trials = trials;
  return {lower, frac, unit};
}

std::vector<IneqReport> check_lemma_a3(std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw ValidationError("check_lemma_a3: trials must be >= 1");
  IneqReport first, second;
  first.id = "A.3.1";
  second.id = "A.3.2";
  std::vector<double> eta, tail;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(substream_seed(seed, t));
    double alpha = 0.01 + 0.98 * rng.uniform01();
    double beta = rng.uniform01();
    double r = 3.0 * rng.uniform01();
    const double eta0 = 0.05 + 1.95 * rng.uniform01();
    const double mode = rng.uniform01();
    if (mode < 0.1) {
      alpha = 0.01 + 0.48 * rng.uniform01();
      beta = 1.0 - 2.0 * alpha;
    } else if (mode < 0.2) {
      r = 1.0;
    } else if (mode < 0.3) {
      r = 0.0;
    }
    const double g = 2.0 * alpha + beta;
    const bool g_unit = near(g, 1.0);
    const bool r_unit = near(r, 1.0);
    double c = std::pow(2.0, r) * std::pow(eta0, 2.0 - r);
    if (g_unit) {
      c *= 2.0;
    } else if (g > 1.0) {
      c *= g / (g - 1.0);
    } else {
      c *= std::pow(2.0, g - 1.0) / (1.0 - g);
    }
    double c2 = std::pow(2.0, g) * std::pow(eta0, 2.0 - r);
    if (r_unit) {
      c2 *= 2.0;
    } else if (r > 1.0) {
      c2 *= r / (r - 1.0);
    } else {
      c2 *= std::pow(2.0, r - 1.0) / (1.0 - r);
    }
    const std::string params = "alpha=" + short_fmt(alpha) + " beta=" + short_fmt(beta) +
                               " r=" + short_fmt(r) + " eta0=" + short_fmt(eta0);

    for (std::size_t k : kSumLengths) {
      step_sums(eta0, alpha, k, eta, tail);
      const double kk = static_cast<double>(k);
      const std::size_t half = k / 2;
      const std::string where = params + " k=" + std::to_string(k);

      double lhs1 = 0.0;
      for (std::size_t j = 1; j <= half; ++j) {
        lhs1 += eta[j] * eta[j] * std::pow(tail[j], -r) * std::pow(static_cast<double>(j), -beta);
      }
      double rhs1 = c * std::pow(kk, -r * (1.0 - alpha));
      rhs1 *= g_unit ? std::log(kk) : std::pow(kk, std::max(0.0, 1.0 - g));
      record(first, violation(lhs1, rhs1), where);

      double lhs2 = 0.0;
      for (std::size_t j = half + 1; j < k; ++j) {
        lhs2 += eta[j] * eta[j] * std::pow(tail[j], -r) * std::pow(static_cast<double>(j), -beta);
      }
      double rhs2 = c2 * std::pow(kk, -((2.0 - r) * alpha + beta));
      rhs2 *= r_unit ? std::log(kk) : std::pow(kk, std::max(0.0, 1.0 - r));
      record(second, violation(lhs2, rhs2), where);
    }
  }
  first.trials = second.trials = trials;
  return {first, second};
}

std::string ineq_csv(std::span<const IneqReport> reports) {
  std::ostringstream os;
  os << "lemma,trials,evaluations,skipped,max_violation,pass,worst_case\n";
  for (const auto& r : reports) {
    os << r.id << ',' << r.trials << ',' << r.evaluations << ',' << r.skipped << ','
       << fmt(r.max_violation) << ',' << (r.pass() ? 1 : 0) << ",\"" << r.worst_case << "\"\n";
  }
  return os.str();
}

}  // namespace sgdreg
