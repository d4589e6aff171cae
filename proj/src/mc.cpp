#include "sgdreg/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "sgdreg/error.hpp"

namespace sgdreg {

const char* const kEnsembleCsvHeader =
    "k,mse,mse_stderr,bias_sq,variance,berr_mse,berr_stderr,residual_mse,M,seed";

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct PathRecord {
  std::vector<double> err;    // C * m, checkpoint-major
  std::vector<double> berr_sq;
  std::vector<double> res_sq;
};

PathRecord run_one(const Experiment& ex, const PathPlan& plan,
                   const std::vector<std::size_t>& cps, const StackedData& shared_y,
                   std::size_t path) {
  const std::size_t m = ex.x1.size();
  PathRecord rec;
  rec.err.resize(cps.size() * m);
  rec.berr_sq.resize(cps.size());
  rec.res_sq.resize(cps.size());

  std::optional<StackedData> own_y;
  if (ex.fresh_noise) {
    own_y = make_noisy(ex.y_true, {ex.noise.delta, substream_seed(ex.noise.seed, path)});
  }
  const StackedData& y = own_y ? *own_y : shared_y;

  PathSpec spec;
  spec.schedule = ex.schedule;
  spec.variant = ex.variant;
  spec.updates = ex.updates;
  spec.seed = substream_seed(plan.master_seed, plan.identical_paths ? 0 : path);
  spec.box = ex.box;
  spec.checkpoints = cps;

  std::size_t c = 0;
  run_path(*ex.sys, y, ex.x1, spec, [&](std::size_t, const HVector& x) {
    const HVector e = x - ex.x_dag;
    std::copy(e.values().begin(), e.values().end(), rec.err.begin() + static_cast<long>(c * m));
    rec.berr_sq[c] = ex.b_dag ? ex.b_dag->quadratic_form(e) : 0.0;
    rec.res_sq[c] = stacked_norm_sq(apply_full(*ex.sys, x) - ex.y_true);
    ++c;
  });
  return rec;
}

}  // namespace

void ErrorAccumulator::Scalar::add(double v) {
  ++n;
  const double d = v - mean;
  mean += d / static_cast<double>(n);
  m2 += d * (v - mean);
}

double ErrorAccumulator::Scalar::standard_error() const {
  if (n < 2) return 0.0;
  return std::sqrt(std::max(m2, 0.0) / static_cast<double>(n - 1) / static_cast<double>(n));
}

ErrorAccumulator::ErrorAccumulator(Weights weights)
    : weights_(std::move(weights)), mean_(weights_->size(), 0.0) {}

void ErrorAccumulator::add(std::span<const double> e, double berr_sq, double residual_sq) {
  if (e.size() != mean_.size()) throw ValidationError("ErrorAccumulator: dimension mismatch");
  const auto& w = *weights_;
  double sq = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j) sq += w[j] * e[j] * e[j];
  err_.add(sq);
  berr_.add(berr_sq);
  res_.add(residual_sq);
  const double n = static_cast<double>(err_.n);
  double m2 = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    const double d = e[j] - mean_[j];
    mean_[j] += d / n;
    m2 += w[j] * d * (e[j] - mean_[j]);
  }
  m2_ += m2;
}

MCEstimate ErrorAccumulator::estimate(std::size_t k, std::uint64_t seed, bool with_berr) const {
  if (err_.n == 0) throw ValidationError("ErrorAccumulator: no samples");
  const auto& w = *weights_;
  MCEstimate e;
  e.k = k;
  e.mse = err_.mean;
  e.mse_stderr = err_.standard_error();
  double b = 0.0;
  for (std::size_t j = 0; j < mean_.size(); ++j) b += w[j] * mean_[j] * mean_[j];
  e.bias_sq = b;
  e.variance = std::max(m2_, 0.0) / static_cast<double>(err_.n);
  if (with_berr) {
    e.berr_mse = berr_.mean;
    e.berr_stderr = berr_.standard_error();
  }
  e.residual_mse = res_.mean;
  e.residual_stderr = res_.standard_error();
  e.M = err_.n;
  e.seed = seed;
  return e;
}

double standard_error(std::span<const double> samples) {
  if (samples.size() < 2) throw ValidationError("standard_error needs at least two samples");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double n = static_cast<double>(samples.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

double decomposition_gap(const MCEstimate& e) {
  const double scale = std::max(e.mse, 1e-300);
  return std::abs(e.mse - e.bias_sq - e.variance) / scale;
}

std::vector<MCEstimate> run_ensemble(const Experiment& ex, const PathPlan& plan) {
  if (!ex.sys) throw ValidationError("experiment has no system");
  if (plan.M < 2) throw ValidationError("mc.M must be >= 2");
  if (ex.x_dag.size() != ex.x1.size()) throw ValidationError("x_dag has the wrong dimension");
  const std::vector<std::size_t> cps =
      plan.checkpoints.empty() ? log_checkpoints(ex.updates + 1) : plan.checkpoints;
  const std::size_t m = ex.x1.size();

  const StackedData shared_y = ex.fresh_noise ? ex.y_true : make_noisy(ex.y_true, ex.noise);

  std::vector<ErrorAccumulator> acc(cps.size(), ErrorAccumulator(ex.x1.weights()));

  const std::size_t batch = std::max(1u, plan.threads);
  for (std::size_t start = 0; start < plan.M; start += batch) {
    const std::size_t count = std::min(batch, plan.M - start);
    std::vector<PathRecord> records(count);
    std::vector<std::exception_ptr> failures(count);
    auto work = [&](std::size_t slot) {
      try {
        records[slot] = run_one(ex, plan, cps, shared_y, start + slot);
      } catch (...) {
        failures[slot] = std::current_exception();
      }
    };
    if (count == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(count);
      for (std::size_t s = 0; s < count; ++s) pool.emplace_back(work, s);
      for (auto& t : pool) t.join();
    }
    for (std::size_t s = 0; s < count; ++s) {
      if (!failures[s]) continue;
      const std::string where = "path " + std::to_string(start + s) + ": ";
      try {
        std::rethrow_exception(failures[s]);
      } catch (const NumericalError& e) {
        throw NumericalError(where + e.what(), e.step());
      } catch (const ValidationError& e) {
        throw ValidationError(where + e.what());
      }
    }
    // Fixed path order for the reduction.
    for (std::size_t s = 0; s < count; ++s) {
      const PathRecord& r = records[s];
      for (std::size_t c = 0; c < cps.size(); ++c) {
        acc[c].add(std::span<const double>(r.err.data() + c * m, m), r.berr_sq[c], r.res_sq[c]);
      }
    }
  }

  std::vector<MCEstimate> out;
  out.reserve(cps.size());
  for (std::size_t c = 0; c < cps.size(); ++c) {
    const MCEstimate e = acc[c].estimate(cps[c], plan.master_seed, ex.b_dag != nullptr);
    if (decomposition_gap(e) > 1e-10 && e.mse > 1e-280) {
      throw NumericalError("bias-variance identity violated at k = " + std::to_string(e.k) +
                           " (mse " + fmt(e.mse) + ", bias^2 + variance " +
                           fmt(e.bias_sq + e.variance) + ")",
                           e.k);
    }
    out.push_back(e);
  }
  return out;
}

std::string ensemble_csv(std::span<const MCEstimate> rows) {
  std::ostringstream os;
  os << kEnsembleCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.k << ',' << fmt(r.mse) << ',' << fmt(r.mse_stderr) << ',' << fmt(r.bias_sq) << ','
       << fmt(r.variance) << ',';
    if (r.berr_mse) os << fmt(*r.berr_mse);
    os << ',';
    if (r.berr_stderr) os << fmt(*r.berr_stderr);
    os << ',' << fmt(r.residual_mse) << ',' << r.M << ',' << r.seed << '\n';
  }
  return os.str();
}

}  // namespace sgdreg
