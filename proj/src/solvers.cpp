#include "sgdreg/solvers.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sgdreg/error.hpp"

namespace sgdreg {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

constexpr std::size_t kExactSumLimit = 1000000;

}  // namespace

// --- schedules ----------------------------------------------------------------

StepSchedule StepSchedule::constant(double eta0) {
  StepSchedule s;
  s.kind = Kind::Constant;
  s.eta0 = eta0;
  s.alpha = 0.0;
  return s;
}

StepSchedule StepSchedule::polynomial(double eta0, double alpha) {
  StepSchedule s;
  s.kind = Kind::Polynomial;
  s.eta0 = eta0;
  s.alpha = alpha;
  return s;
}

double StepSchedule::eta(std::size_t k) const {
  if (k == 0) throw ValidationError("step index k starts at 1");
  if (kind == Kind::Constant) return eta0;
  return eta0 * std::pow(static_cast<double>(k), -alpha);
}

double StepSchedule::partial_sum(std::size_t k) const {
  if (kind == Kind::Constant) return eta0 * static_cast<double>(k);
  if (k <= kExactSumLimit) {
    double s = 0.0;
    for (std::size_t i = 1; i <= k; ++i) s += std::pow(static_cast<double>(i), -alpha);
    return eta0 * s;
  }
  const double kk = static_cast<double>(k);
  const double s = boost::math::zeta(alpha) + std::pow(kk, 1.0 - alpha) / (1.0 - alpha) +
                   0.5 * std::pow(kk, -alpha) - alpha / 12.0 * std::pow(kk, -alpha - 1.0);
  return eta0 * s;
}

void validate_schedule_shape(const StepSchedule& schedule) {
  if (!(schedule.eta0 > 0.0) || !std::isfinite(schedule.eta0)) {
    throw ValidationError("solver.eta0 must be finite and > 0 (got " + short_fmt(schedule.eta0) +
                          ")");
  }
  if (schedule.kind == StepSchedule::Kind::Polynomial &&
      !(schedule.alpha > 0.0 && schedule.alpha < 1.0)) {
    throw ValidationError("solver.alpha = " + short_fmt(schedule.alpha) +
                          " is outside (0, 1) required for the polynomial schedule "
                          "eta_k = eta0 k^-alpha");
  }
}

void validate_schedule(const StepSchedule& schedule, double deriv_bound) {
  validate_schedule_shape(schedule);
  const double l2 = deriv_bound * deriv_bound;
  if (schedule.kind == StepSchedule::Kind::Constant) {
    if (!(schedule.eta0 * l2 < 1.0)) {
      throw ValidationError("solver.eta0 = " + short_fmt(schedule.eta0) +
                            " violates eta0 * L^2 < 1 for the constant schedule (L = " +
                            short_fmt(deriv_bound) + ")");
    }
  } else if (!(schedule.eta0 * l2 <= 1.0 + 1e-12)) {
    throw ValidationError("solver.eta0 = " + short_fmt(schedule.eta0) +
                          " violates eta0 <= L^-2 for the polynomial schedule (L = " +
                          short_fmt(deriv_bound) + ")");
  }
}

// --- stopping rules -----------------------------------------------------------

StoppingRule StoppingRule::max_iterations(std::size_t k) {
  StoppingRule r;
  r.kind = Kind::MaxIter;
  r.max_iter = k;
  return r;
}

StoppingRule StoppingRule::apriori_table(std::vector<std::pair<double, std::size_t>> table) {
  StoppingRule r;
  r.kind = Kind::APriori;
  r.table = std::move(table);
  return r;
}

StoppingRule StoppingRule::apriori_power(double scale, double power) {
  StoppingRule r;
  r.kind = Kind::APriori;
  r.scale = scale;
  r.power = power;
  return r;
}

StoppingRule StoppingRule::kstar(double nu, double alpha, double w_norm) {
  StoppingRule r;
  r.kind = Kind::KStar;
  r.nu = nu;
  r.alpha = alpha;
  r.w_norm = w_norm;
  return r;
}

std::size_t stopping_k(const StoppingRule& rule, double delta) {
  switch (rule.kind) {
    case StoppingRule::Kind::MaxIter:
      return rule.max_iter;
    case StoppingRule::Kind::APriori: {
      if (!rule.table.empty()) {
        for (const auto& [d, k] : rule.table) {
          if (std::abs(d - delta) <= 1e-12 * std::max(std::abs(d), std::abs(delta))) return k;
        }
        throw ValidationError("a priori table has no entry for delta = " + short_fmt(delta));
      }
      if (!(delta > 0.0)) throw ValidationError("a priori rule needs delta > 0");
      const long double v =
          static_cast<long double>(rule.scale) * std::pow(static_cast<long double>(delta),
                                                          -static_cast<long double>(rule.power));
      if (!(v < 1e15L)) throw ValidationError("a priori stopping index overflows");
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v - 1e-10L * v)));
    }
    case StoppingRule::Kind::KStar: {
      if (!(delta > 0.0)) throw ValidationError("k* needs delta > 0");
      if (!(rule.w_norm > 0.0)) throw ValidationError("k* needs ||w|| > 0");
      if (!(rule.alpha > 0.0 && rule.alpha < 1.0) || !(rule.nu >= 0.0)) {
        throw ValidationError("k* needs alpha in (0, 1) and nu >= 0");
      }
      const long double expo = -2.0L / ((2.0L * rule.nu + 1.0L) * (1.0L - rule.alpha));
      const long double v = std::pow(static_cast<long double>(delta) / rule.w_norm, expo);
      if (v < 1.0L) {
        warn("k* < 1 because delta >= ||w||; clamped to 1");
        return 1;
      }
      if (!(v < 1e15L)) throw ValidationError("k* overflows (delta too small)");
      const long double nearest = std::round(v);
      const long double k = std::abs(v - nearest) <= 1e-10L * v ? nearest : std::floor(v);
      return static_cast<std::size_t>(k);
    }
  }
  return 0;
}

AprioriReport validate_apriori(const StoppingRule& rule, const StepSchedule& schedule,
                               std::span<const double> deltas) {
  if (deltas.size() < 2) throw ValidationError("validate_apriori needs at least two deltas");
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    if (!(deltas[j] > 0.0)) throw ValidationError("validate_apriori: deltas must be > 0");
    if (j > 0 && !(deltas[j] < deltas[j - 1])) {
      throw ValidationError("validate_apriori: deltas must be strictly decreasing");
    }
  }
  AprioriReport rep;
  for (double d : deltas) {
    const std::size_t k = stopping_k(rule, d);
    rep.rows.push_back({d, k, d * d * schedule.partial_sum(k)});
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rep.rows) {
    const double lx = std::log(r.delta);
    const double ly = std::log(r.delta_sq_sum);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(rep.rows.size());
  rep.decay_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);

  rep.admissible = true;
  for (std::size_t j = 1; j < rep.rows.size(); ++j) {
    if (!(rep.rows[j].k > rep.rows[j - 1].k)) {
      rep.admissible = false;
      rep.reason = "k(delta) does not increase as delta decreases";
      return rep;
    }
  }
  for (std::size_t j = 1; j < rep.rows.size(); ++j) {
    if (!(rep.rows[j].delta_sq_sum < rep.rows[j - 1].delta_sq_sum)) {
      rep.admissible = false;
      rep.reason = "delta^2 * sum eta does not decrease as delta decreases";
      return rep;
    }
  }
  if (!(rep.decay_slope >= 0.1)) {
    rep.admissible = false;
    rep.reason = "delta^2 * sum eta decays too slowly (slope " + short_fmt(rep.decay_slope) + ")";
  }
  return rep;
}

std::string apriori_csv(const AprioriReport& report) {
  std::ostringstream os;
  os << "delta,k,delta_sq_sum_eta\n";
  for (const auto& r : report.rows) {
    os << fmt(r.delta) << ',' << r.k << ',' << fmt(r.delta_sq_sum) << '\n';
  }
  return os.str();
}

// --- iterations ---------------------------------------------------------------

Variant parse_variant(const std::string& name) {
  if (name == "sgd") return Variant::Sgd;
  if (name == "landweber") return Variant::Landweber;
  if (name == "sgd_projected") return Variant::SgdProjected;
  throw ValidationError("unknown solver variant '" + name + "' (sgd | landweber | sgd_projected)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Sgd: return "sgd";
    case Variant::Landweber: return "landweber";
    case Variant::SgdProjected: return "sgd_projected";
  }
  return "sgd";
}

double divergence_limit(const HVector& x1) { return 1e12 * (1.0 + norm(x1)); }

void guard_iterate(const IterState& state, double limit) {
  if (!state.x.all_finite()) {
    throw NumericalError("non-finite iterate at k = " + std::to_string(state.k), state.k);
  }
  const double nx = norm(state.x);
  if (nx > limit) {
    throw NumericalError("iterate diverged at k = " + std::to_string(state.k) + " (||x|| = " +
                             short_fmt(nx) + " > " + short_fmt(limit) + ")",
                         state.k);
  }
}

StepInfo sgd_step(const NonlinearSystem& sys, IterState& state, const StackedData& y,
                  const StepSchedule& schedule, double limit) {
  const std::size_t n = sys.num_equations();
  if (y.num_blocks() != n) throw ValidationError("data has the wrong number of blocks");
  StepInfo info;
  info.i = state.rng.uniform_index(n);
  info.eta = schedule.eta(state.k);
  sys.descend(info.i, state.x, y[info.i], info.eta);
  ++state.k;
  if (limit > 0.0) guard_iterate(state, limit);
  return info;
}

StepInfo landweber_step(const NonlinearSystem& sys, IterState& state, const StackedData& y,
                        const StepSchedule& schedule, double limit) {
  const std::size_t n = sys.num_equations();
  if (y.num_blocks() != n) throw ValidationError("data has the wrong number of blocks");
  StepInfo info;
  info.eta = schedule.eta(state.k);
  HVector grad = HVector::zeros(sys.x_weights());
  for (std::size_t i = 0; i < n; ++i) grad += sys.residual_gradient(i, state.x, y[i]);
  grad *= 1.0 / static_cast<double>(n);
  state.x.axpy(-info.eta, grad);
  ++state.k;
  if (limit > 0.0) guard_iterate(state, limit);
  return info;
}

void project_box_inplace(HVector& x, const Box& box) {
  if (box.lo.size() != x.size() || box.hi.size() != x.size()) {
    throw ValidationError("project_box: box dimension mismatch");
  }
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], box.lo[j], box.hi[j]);
}

HVector project_box(const HVector& x, const Box& box) {
  for (std::size_t j = 0; j < box.lo.size() && j < box.hi.size(); ++j) {
    if (box.lo[j] > box.hi[j]) throw ValidationError("project_box: lo > hi");
  }
  HVector out = x;
  project_box_inplace(out, box);
  return out;
}

std::vector<std::size_t> log_checkpoints(std::size_t last, std::size_t per_decade) {
  if (last == 0) throw ValidationError("log_checkpoints: last must be >= 1");
  if (per_decade == 0) throw ValidationError("log_checkpoints: per_decade must be >= 1");
  std::vector<std::size_t> out{1};
  const double top = std::log10(static_cast<double>(last));
  for (std::size_t j = 1;; ++j) {
    const double e = static_cast<double>(j) / static_cast<double>(per_decade);
    if (e >= top) break;
    const auto k = static_cast<std::size_t>(std::llround(std::pow(10.0, e)));
    if (k > out.back() && k < last) out.push_back(k);
  }
  if (last > out.back()) out.push_back(last);
  return out;
}

namespace {

void check_path_spec(const NonlinearSystem& sys, const HVector& x1, const PathSpec& spec) {
  if (x1.size() != sys.dim_x()) throw ValidationError("initial guess has the wrong dimension");
  if (spec.variant == Variant::SgdProjected && !spec.box) {
    throw ValidationError("the projected variant needs a box");
  }
  for (std::size_t j = 0; j < spec.checkpoints.size(); ++j) {
    const std::size_t k = spec.checkpoints[j];
    if (k < 1 || k > spec.updates + 1 || (j > 0 && k <= spec.checkpoints[j - 1])) {
      throw ValidationError("checkpoints must be strictly increasing within [1, K+1]");
    }
  }
}

StepInfo advance(const NonlinearSystem& sys, IterState& state, const StackedData& y,
                 const PathSpec& spec, double limit) {
  StepInfo info = spec.variant == Variant::Landweber
                      ? landweber_step(sys, state, y, spec.schedule, limit)
                      : sgd_step(sys, state, y, spec.schedule, limit);
  if (spec.variant == Variant::SgdProjected) project_box_inplace(state.x, *spec.box);
  return info;
}

}  // namespace

HVector run_path(const NonlinearSystem& sys, const StackedData& y, const HVector& x1,
                 const PathSpec& spec,
                 const std::function<void(std::size_t, const HVector&)>& visit) {
  check_path_spec(sys, x1, spec);
  const double limit = divergence_limit(x1);
  const std::size_t every = std::max<std::size_t>(1, spec.guard_every);
  IterState state{1, x1, Rng(spec.seed)};
  std::size_t next = 0;
  const auto& cps = spec.checkpoints;
  for (;;) {
    if (next < cps.size() && cps[next] == state.k) {
      guard_iterate(state, limit);
      visit(state.k, state.x);
      ++next;
    }
    if (state.k > spec.updates) break;
    advance(sys, state, y, spec, (state.k % every == 0) ? limit : 0.0);
  }
  guard_iterate(state, limit);
  return std::move(state.x);
}

Trajectory run(const NonlinearSystem& sys, const StackedData& y, const HVector& x1,
               const StepSchedule& schedule, const StoppingRule& rule, double delta,
               Variant variant, std::uint64_t seed, const TraceSpec& trace,
               const std::optional<Box>& box) {
  validate_schedule_shape(schedule);
  PathSpec spec;
  spec.schedule = schedule;
  spec.variant = variant;
  spec.updates = stopping_k(rule, delta);
  spec.seed = seed;
  spec.box = box;
  if (!trace.every_step) {
    spec.checkpoints =
        trace.checkpoints.empty() ? log_checkpoints(spec.updates + 1) : trace.checkpoints;
  }
  check_path_spec(sys, x1, spec);
  const StackedData& y_ref = trace.y_ref ? *trace.y_ref : y;
  const double limit = divergence_limit(x1);

  Trajectory out;
  out.updates = spec.updates;
  out.variant = variant;
  IterState state{1, x1, Rng(seed)};
  std::size_t next = 0;
  for (;;) {
    const bool record = trace.every_step ||
                        (next < spec.checkpoints.size() && spec.checkpoints[next] == state.k);
    TrajectoryRow* row = nullptr;
    if (record) {
      guard_iterate(state, limit);
      TrajectoryRow r;
      r.k = state.k;
      if (trace.x_dag) {
        const HVector e = state.x - *trace.x_dag;
        r.err_sq = norm_sq(e);
        if (trace.b_dag) r.berr_sq = trace.b_dag->quadratic_form(e);
      }
      r.residual_sq = stacked_norm_sq(apply_full(sys, state.x) - y_ref);
      out.rows.push_back(r);
      row = &out.rows.back();
      ++next;
    }
    if (state.k > spec.updates) break;
    const StepInfo info =
        advance(sys, state, y, spec, (state.k % spec.guard_every == 0) ? limit : 0.0);
    if (row) {
      row->eta = info.eta;
      if (variant != Variant::Landweber) row->i = info.i + 1;
    }
  }
  guard_iterate(state, limit);
  out.x_final = std::move(state.x);
  return out;
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream os;
  os << "k,eta_k,i_k,err_sq,berr_sq,residual_sq\n";
  for (const auto& r : t.rows) {
    os << r.k << ',';
    if (r.eta) os << fmt(*r.eta);
    os << ',';
    if (r.i) os << *r.i;
    os << ',';
    if (r.err_sq) os << fmt(*r.err_sq);
    os << ',';
    if (r.berr_sq) os << fmt(*r.berr_sq);
    os << ',' << fmt(r.residual_sq) << '\n';
  }
  return os.str();
}

}  // namespace sgdreg
