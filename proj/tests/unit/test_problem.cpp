#include <gtest/gtest.h>

#include <cmath>

#include "sgdreg/error.hpp"
#include "sgdreg/problem.hpp"
#include "sgdreg/test_problems.hpp"
#include "test_support.hpp"

using namespace sgdreg;
using sgdtest::ScaledIdentity;

namespace {

Tp1Diagonal tp1(std::size_t m, std::size_t n, double kappa = 0.0, double s = 1.0) {
  Tp1Params p;
  p.m = m;
  p.n = n;
  p.kappa = kappa;
  p.s = s;
  return Tp1Diagonal(p);
}

std::vector<HVector> ball_points(const HVector& center, double r, std::size_t count,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<HVector> pts;
  for (std::size_t i = 0; i < count; ++i) pts.push_back(random_ball_point(center, r, rng));
  return pts;
}

bool all_pass(const std::vector<VerifierRow>& rows) {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return !rows.empty();
}

}  // namespace

TEST(Noise, ExactLevel) {
  const auto sys = tp1(40, 4);
  const auto y = apply_full(sys, HVector(std::vector<double>(40, 1.0), sys.x_weights()));
  // y + delta d rounds at ulp(y), so the relative match needs delta well above 1e-4 ||y||.
  for (double delta : {1e-2, 0.1, 0.5, 7.0}) {
    const auto yd = make_noisy(y, NoiseModel{delta, 99});
    EXPECT_LE(std::abs(stacked_norm(yd - y) - delta), 1e-12 * delta);
  }
}

TEST(Noise, ZeroDeltaReturnsInput) {
  const auto sys = tp1(8, 2);
  const auto y = apply_full(sys, HVector(std::vector<double>(8, 0.3), sys.x_weights()));
  const auto yd = make_noisy(y, NoiseModel{0.0, 5});
  EXPECT_EQ(stacked_norm(yd - y), 0.0);
}

TEST(Noise, IndependentSeedsGiveWeaklyCorrelatedDirections) {
  const auto sys = tp1(100, 1);
  const auto y = apply_full(sys, HVector::zeros(sys.x_weights()));
  const auto a = make_noisy(y, NoiseModel{1.0, 1});
  const auto b = make_noisy(y, NoiseModel{1.0, 2});
  EXPECT_LT(std::abs(stacked_inner(a, b)), 0.2 * stacked_norm(a) * stacked_norm(b));
  EXPECT_GT(stacked_norm(a - y), 0.0);
}

TEST(SourceTruth, DiagonalUnitRepresenter) {
  const auto sys = tp1(3, 1);
  HVector w(std::vector<double>{1.0, 0.0, 0.0}, sys.x_weights());
  const auto t = build_source_truth(sys, HVector::zeros(sys.x_weights()), SourceSpec{0.5, w});
  EXPECT_NEAR(t.x_dag[0], 1.0, 1e-15);
  EXPECT_EQ(t.x_dag[1], 0.0);
}

TEST(SourceTruth, ZeroRepresenterKeepsInitialGuess) {
  const auto sys = tp1(4, 2);
  const HVector x1(std::vector<double>{1, 2, 3, 4}, sys.x_weights());
  const auto t = build_source_truth(sys, x1, SourceSpec{0.25, HVector::zeros(sys.x_weights())});
  EXPECT_EQ(norm(t.x_dag - x1), 0.0);
}

TEST(SourceTruth, ScalarPowers) {
  // B = diag(1, 1/4) for sigma = (1, 1/2) and one equation.
  const auto sys = tp1(2, 1);
  HVector w(std::vector<double>{1.0, 1.0}, sys.x_weights());
  const auto t = build_source_truth(sys, HVector::zeros(sys.x_weights()), SourceSpec{0.25, w});
  EXPECT_NEAR(t.x_dag[0], 1.0, 1e-14);
  EXPECT_NEAR(t.x_dag[1], std::pow(0.25, 0.25), 1e-14);
  EXPECT_NEAR(t.x_dag[1], 0.70711, 1e-5);
}

TEST(SourceTruth, NonlinearFixedPointResidual) {
  Tp2Params p;
  p.m = 31;
  const Tp2PotentialBvp sys(p);
  std::vector<double> wv(31);
  for (std::size_t j = 0; j < 31; ++j) wv[j] = std::sin(3.14159 * (j + 1) / 32.0);
  HVector w(wv, sys.x_weights());
  w *= 20.0 / norm(w);
  const auto t = build_source_truth(sys, sys.background(), SourceSpec{0.5, w});
  EXPECT_GT(t.sweeps, 1u);
  const HVector lhs = NormalForm(sys, t.x_dag).power_apply(0.5, w);
  EXPECT_LE(norm(lhs - (t.x_dag - sys.background())), 1e-9);
}

TEST(NormalForm, DiagonalMatchesDense) {
  const auto sys = tp1(12, 3, 0.3);
  HVector x(std::vector<double>(12, 0.2), sys.x_weights());
  const NormalForm nf(sys, x);
  EXPECT_TRUE(nf.is_diagonal());
  const SymOperator dense = normal_operator(sys, x);
  HVector e(std::vector<double>{1, -1, 2, 0, 0.5, 3, 1, 1, -2, 0, 1, 0.1}, sys.x_weights());
  EXPECT_NEAR(nf.quadratic_form(e), dense.quadratic_form(e), 1e-13);
  EXPECT_NEAR(nf.norm(), dense.norm(), 1e-13);
  const HVector a = nf.power_apply(0.3, e);
  const HVector b = frac_power(dense, 0.3).apply(e);
  EXPECT_LE(norm(a - b), 1e-12);
}

TEST(Cone, LinearSystemIsZero) {
  const ScaledIdentity sys(uniform_weights(5), 3, 2.0);
  const auto c = estimate_cone_constant(sys, HVector::zeros(sys.x_weights()), 1.0, 50, 1);
  EXPECT_LE(c.eta_hat, 1e-10);
}

TEST(Cone, Tp1LinearCaseIsZero) {
  const auto sys = tp1(16, 4);
  const auto c = estimate_cone_constant(sys, HVector::zeros(sys.x_weights()), 1.0, 100, 2);
  EXPECT_LE(c.eta_hat, 1e-10);
  EXPECT_EQ(c.samples, 100u);
}

TEST(Cone, Tp1QuadraticBoundedByBallDiameter) {
  const double kappa = 0.05, r = 0.5;
  const auto sys = tp1(16, 4, kappa);
  const auto c = estimate_cone_constant(sys, HVector::zeros(sys.x_weights()), r, 200, 3);
  EXPECT_GT(c.eta_hat, 0.0);
  EXPECT_LE(c.eta_hat, kappa * 2.0 * r * 2.0);
}

TEST(Cone, Tp2BallAroundBackground) {
  Tp2Params p;
  const Tp2PotentialBvp sys(p);
  const auto c = estimate_cone_constant(sys, sys.background(), 0.5, 100, 4);
  EXPECT_LT(c.eta_hat, 0.5);
}

TEST(Cone, LinearizationBoundsHold) {
  const auto sys = tp1(16, 4, 0.1);
  const HVector x0 = HVector::zeros(sys.x_weights());
  const auto c = estimate_cone_constant(sys, x0, 0.5, 200, 5);
  EXPECT_TRUE(all_pass(check_linearization_bounds(sys, x0, 0.5, 200, c.eta_hat, 5)));
}

TEST(DerivBound, Identity) {
  const ScaledIdentity sys(make_weights({0.3, 0.5, 2.0}), 2);
  const HVector x[] = {HVector::zeros(sys.x_weights())};
  EXPECT_NEAR(estimate_deriv_bound(sys, x), 1.0, 1e-6);
}

TEST(DerivBound, Tp1TopSingularValue) {
  const auto sys = tp1(32, 4);
  const HVector x[] = {HVector::zeros(sys.x_weights())};
  EXPECT_NEAR(estimate_deriv_bound(sys, x), 1.0, 1e-6);
}

TEST(DerivBound, Homogeneous) {
  const auto w = make_weights({1.0, 0.25, 4.0});
  const HVector x[] = {HVector::zeros(w)};
  const double a = estimate_deriv_bound(ScaledIdentity(w, 2, 0.7), x);
  const double b = estimate_deriv_bound(ScaledIdentity(w, 2, 1.4), x);
  EXPECT_NEAR(b, 2.0 * a, 1e-6 * b);
}

TEST(RangeInvariance, LinearSystemHasIdentityFactor) {
  const auto sys = tp1(10, 2);
  const HVector xd = HVector::zeros(sys.x_weights());
  const auto pts = ball_points(xd, 1.0, 5, 6);
  const auto rep = check_range_invariance(sys, xd, pts);
  for (const auto& r : rep.rows) {
    EXPECT_LE(r.r_minus_identity, 1e-10);
    EXPECT_LE(r.fit_residual, 1e-10);
  }
  EXPECT_LE(rep.c_r_max, 1e-9);
}

TEST(RangeInvariance, AtTruthFactorIsIdentity) {
  Tp2Params p;
  p.m = 15;
  const Tp2PotentialBvp sys(p);
  const HVector xd = sys.background();
  const HVector pts[] = {xd};
  const auto rep = check_range_invariance(sys, xd, pts);
  for (const auto& r : rep.rows) EXPECT_LE(r.r_minus_identity, 1e-8);
}

TEST(RangeInvariance, Tp2FiniteTable) {
  Tp2Params p;
  p.m = 31;
  const Tp2PotentialBvp sys(p);
  const auto pts = ball_points(sys.background(), 0.3, 6, 7);
  const auto rep = check_range_invariance(sys, sys.background(), pts);
  EXPECT_EQ(rep.rows.size(), 6u * sys.num_equations());
  EXPECT_TRUE(std::isfinite(rep.c_r_max));
  EXPECT_TRUE(all_pass(range_invariance_rows(rep)));
}

TEST(Adjoint, BuiltInSystemsPass) {
  const auto a = tp1(20, 4, 0.3);
  EXPECT_TRUE(all_pass(check_adjoint(a, ball_points(HVector::zeros(a.x_weights()), 1.0, 20, 8), 1)));
  Tp2Params p;
  const Tp2PotentialBvp b(p);
  EXPECT_TRUE(all_pass(check_adjoint(b, ball_points(b.background(), 0.5, 20, 9), 2)));
}

namespace {
class WrongAdjoint final : public NonlinearSystem {
 public:
  WrongAdjoint() : w_(uniform_weights(3)) {}
  std::size_t num_equations() const override { return 1; }
  const Weights& x_weights() const override { return w_; }
  const Weights& y_weights(std::size_t) const override { return w_; }
  HVector apply(std::size_t, const HVector& x) const override { return 2.0 * x; }
  HVector deriv_apply(std::size_t, const HVector&, const HVector& h) const override {
    return 2.0 * h;
  }
  HVector deriv_adjoint_apply(std::size_t, const HVector&, const HVector& g) const override {
    return 2.001 * g;
  }
  std::string name() const override { return "wrong_adjoint"; }

 private:
  Weights w_;
};
}  // namespace

TEST(Adjoint, BrokenDoubleFails) {
  const WrongAdjoint sys;
  const auto rows = check_adjoint(sys, ball_points(HVector::zeros(sys.x_weights()), 1.0, 5, 10), 3);
  EXPECT_FALSE(all_pass(rows));
}

TEST(FiniteDifference, BuiltInSystemsPass) {
  const auto a = tp1(20, 4, 0.3);
  EXPECT_TRUE(all_pass(
      check_derivative_fd(a, ball_points(HVector::zeros(a.x_weights()), 1.0, 20, 11), 4)));
  Tp2Params p;
  const Tp2PotentialBvp b(p);
  EXPECT_TRUE(all_pass(check_derivative_fd(b, ball_points(b.background(), 0.5, 20, 12), 5)));
}

namespace {
// F(x) = x^2 componentwise with the derivative scaled by (1 + bias).
class BiasedSquare final : public NonlinearSystem {
 public:
  explicit BiasedSquare(double bias) : w_(uniform_weights(6)), bias_(bias) {}
  std::size_t num_equations() const override { return 1; }
  const Weights& x_weights() const override { return w_; }
  const Weights& y_weights(std::size_t) const override { return w_; }
  HVector apply(std::size_t, const HVector& x) const override {
    HVector y = x;
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = x[j] * x[j];
    return y;
  }
  HVector deriv_apply(std::size_t, const HVector& x, const HVector& h) const override {
    HVector d = h;
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = (1.0 + bias_) * 2.0 * x[j] * h[j];
    return d;
  }
  HVector deriv_adjoint_apply(std::size_t i, const HVector& x, const HVector& g) const override {
    return deriv_apply(i, x, g);
  }
  std::string name() const override { return "biased_square"; }

 private:
  Weights w_;
  double bias_;
};
}  // namespace

TEST(FiniteDifference, WrongDerivativeFails) {
  const BiasedSquare exact(0.0);
  const auto points = ball_points(HVector::zeros(exact.x_weights()), 1.0, 20, 13);
  EXPECT_TRUE(all_pass(check_derivative_fd(exact, points, 6)));
  for (double bias : {1e-2, 1e-3}) {
    const BiasedSquare wrong(bias);
    EXPECT_FALSE(all_pass(check_derivative_fd(wrong, points, 6))) << bias;
  }
}

TEST(FiniteDifference, Tp2RowsFitAnOrder) {
  const Tp2PotentialBvp b(Tp2Params{});
  const auto rows = check_derivative_fd(b, ball_points(b.background(), 0.5, 20, 12), 5);
  for (const auto& r : rows) EXPECT_EQ(r.check, "fd_order");
}

TEST(FiniteDifference, LoglogSlopeOfExactPowerLaw) {
  const double t[] = {1e-3, 1e-4, 1e-5};
  const double e[] = {3e-6, 3e-8, 3e-10};
  EXPECT_NEAR(loglog_slope(t, e), 2.0, 1e-12);
}

TEST(Domain, ApplyFullOutsideBoxThrows) {
  class Boxed final : public NonlinearSystem {
   public:
    Boxed() : w_(uniform_weights(1)) {}
    std::size_t num_equations() const override { return 1; }
    const Weights& x_weights() const override { return w_; }
    const Weights& y_weights(std::size_t) const override { return w_; }
    HVector apply(std::size_t, const HVector& x) const override { return x; }
    HVector deriv_apply(std::size_t, const HVector&, const HVector& h) const override { return h; }
    HVector deriv_adjoint_apply(std::size_t, const HVector&, const HVector& g) const override {
      return g;
    }
    std::optional<Box> domain() const override { return Box{{0.0}, {1.0}}; }
    std::string name() const override { return "boxed"; }

   private:
    Weights w_;
  } sys;
  EXPECT_NO_THROW(apply_full(sys, HVector({0.5}, sys.x_weights())));
  EXPECT_THROW(apply_full(sys, HVector({1.5}, sys.x_weights())), ValidationError);
}
