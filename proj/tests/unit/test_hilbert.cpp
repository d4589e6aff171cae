#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sgdreg/error.hpp"
#include "sgdreg/hilbert.hpp"
#include "sgdreg/rng.hpp"

using namespace sgdreg;

namespace {

HVector vec(std::vector<double> v, const Weights& w) { return HVector(std::move(v), w); }

Eigen::MatrixXd random_weighted_symmetric(std::size_t m, const Weights& w, Rng& rng, bool psd) {
  Eigen::MatrixXd a(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd s = psd ? Eigen::MatrixXd(a * a.transpose()) : Eigen::MatrixXd(a + a.transpose());
  // W^{-1} S is self-adjoint in the weighted inner product.
  for (std::size_t i = 0; i < m; ++i) s.row(i) /= (*w)[i];
  return s;
}

}  // namespace

TEST(Inner, TrapezoidUnitConstant) {
  const auto w = make_weights({0.5, 0.5});
  EXPECT_DOUBLE_EQ(inner(vec({1, 1}, w), vec({1, 1}, w)), 1.0);
}

TEST(Inner, DisjointSupport) {
  const auto w = make_weights({0.3, 1.7});
  EXPECT_EQ(inner(vec({1, 0}, w), vec({0, 1}, w)), 0.0);
}

TEST(Inner, HandSum) {
  const auto w = make_weights({0.25, 0.75});
  EXPECT_DOUBLE_EQ(inner(vec({2, 3}, w), vec({1, 1}, w)), 2.75);
}

TEST(Inner, DimensionMismatchThrows) {
  const auto w2 = uniform_weights(2);
  const auto w3 = uniform_weights(3);
  EXPECT_THROW(inner(HVector::zeros(w2), HVector::zeros(w3)), ValidationError);
}

TEST(Weights, RejectNonPositive) {
  EXPECT_THROW(make_weights({1.0, 0.0}), ValidationError);
  EXPECT_THROW(make_weights({1.0, -2.0}), ValidationError);
}

TEST(Weights, TrapezoidSumsToLength) {
  const auto w = trapezoid_weights(11, 0.0, 2.0);
  double s = 0.0;
  for (double x : *w) s += x;
  EXPECT_NEAR(s, 2.0, 1e-15);
  EXPECT_DOUBLE_EQ((*w)[0], 0.1);
}

TEST(StackedNorm, UniformBlocks) {
  const auto w = uniform_weights(1);
  StackedData y({vec({2}, w), vec({-2}, w), vec({2}, w), vec({2}, w)});
  EXPECT_DOUBLE_EQ(stacked_norm(y), 2.0);
}

TEST(StackedNorm, SingleBlockIsPlainNorm) {
  const auto w = make_weights({0.5, 2.0});
  StackedData y({vec({3, 4}, w)});
  EXPECT_DOUBLE_EQ(stacked_norm(y), norm(y[0]));
}

TEST(StackedNorm, HandEvaluation) {
  const auto w = uniform_weights(1);
  StackedData y({vec({0}, w), vec({2}, w)});
  EXPECT_NEAR(stacked_norm(y), std::sqrt(2.0), 1e-15);
}

TEST(StackedNorm, EmptyThrows) { EXPECT_THROW(stacked_norm(StackedData{}), ValidationError); }

TEST(SymOperator, RejectsNonSelfAdjoint) {
  const auto w = make_weights({1.0, 2.0});
  Eigen::MatrixXd a(2, 2);
  a << 1, 1, 1, 1;  // symmetric in the Euclidean sense only
  EXPECT_THROW(SymOperator(a, w), ValidationError);
}

TEST(FracPower, ScalarSquareRoot) {
  const auto w = uniform_weights(1);
  const double d[] = {4.0};
  const auto r = frac_power(SymOperator::diagonal(d, w), 0.5);
  EXPECT_NEAR(r.matrix()(0, 0), 2.0, 1e-15);
}

TEST(FracPower, ZeroPowerIsRangeProjector) {
  const auto w = uniform_weights(3);
  const double d[] = {2.0, 0.0, 0.5};
  const auto p = frac_power(SymOperator::diagonal(d, w), 0.0);
  EXPECT_NEAR(p.matrix()(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p.matrix()(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(p.matrix()(2, 2), 1.0, 1e-15);
  EXPECT_NEAR((p.matrix() * p.matrix() - p.matrix()).norm(), 0.0, 1e-14);
}

TEST(FracPower, QuarterPowerWithKernel) {
  const auto w = uniform_weights(2);
  const double d[] = {9.0, 0.0};
  const auto r = frac_power(SymOperator::diagonal(d, w), 0.25);
  EXPECT_NEAR(r.matrix()(0, 0), std::pow(9.0, 0.25), 1e-14);
  EXPECT_NEAR(r.matrix()(0, 0), 1.73205, 1e-5);
  EXPECT_EQ(r.matrix()(1, 1), 0.0);
}

TEST(FracPower, NegativeEigenvalueThrows) {
  const auto w = uniform_weights(2);
  const double d[] = {1.0, -0.1};
  EXPECT_THROW(frac_power(SymOperator::diagonal(d, w), 0.5), ValidationError);
}

TEST(FracPower, SemigroupOnRandomPsd) {
  Rng rng(7);
  const auto w = make_weights({0.2, 0.5, 1.0, 1.5, 0.8, 0.3});
  for (int t = 0; t < 20; ++t) {
    const SymOperator b(random_weighted_symmetric(6, w, rng, true), w);
    const double a = rng.uniform01(), c = rng.uniform01();
    const Eigen::MatrixXd prod = frac_power(b, a).matrix() * frac_power(b, c).matrix();
    const Eigen::MatrixXd direct = frac_power(b, a + c).matrix();
    EXPECT_LE((prod - direct).norm(), 1e-8 * direct.norm());
  }
}

TEST(SymOperator, ParsevalInEigenbasis) {
  Rng rng(11);
  const auto w = make_weights({0.1, 0.4, 2.0, 0.7, 1.1});
  for (int t = 0; t < 20; ++t) {
    const SymOperator a(random_weighted_symmetric(5, w, rng, false), w);
    std::vector<double> u(5);
    for (auto& x : u) x = rng.normal();
    const HVector hu(u, w);
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) s += std::pow(inner(hu, a.eigenvector(j)), 2);
    EXPECT_NEAR(s, norm_sq(hu), 1e-8 * norm_sq(hu));
  }
}

TEST(SymOperator, WeightedSelfAdjointness) {
  Rng rng(3);
  const auto w = make_weights({0.3, 1.0, 2.5, 0.9});
  const SymOperator a(random_weighted_symmetric(4, w, rng, false), w);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> u(4), v(4);
    for (auto& x : u) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const HVector hu(u, w), hv(v, w);
    EXPECT_LE(std::abs(inner(a.apply(hu), hv) - inner(hu, a.apply(hv))),
              1e-10 * a.norm() * norm(hu) * norm(hv));
  }
}

TEST(SymOperator, EigenvaluesDescending) {
  const auto w = uniform_weights(4);
  const double d[] = {0.5, 3.0, 1.0, 2.0};
  const auto b = SymOperator::diagonal(d, w);
  const auto ev = b.eigenvalues();
  EXPECT_DOUBLE_EQ(ev[0], 3.0);
  EXPECT_DOUBLE_EQ(ev[3], 0.5);
  EXPECT_DOUBLE_EQ(b.norm(), 3.0);
  EXPECT_DOUBLE_EQ(unit_norm_scale(b), 1.0 / 3.0);
}

TEST(OpPoly, TwoHalfStepsNoPower) {
  const auto w = uniform_weights(1);
  const double d[] = {1.0};
  const double steps[] = {0.5, 0.5};
  EXPECT_DOUBLE_EQ(op_poly(SymOperator::diagonal(d, w), steps, 0.0), 0.25);
}

TEST(OpPoly, EmptyProductIsIdentityOnRange) {
  const auto w = uniform_weights(2);
  const double d[] = {0.7, 0.2};
  EXPECT_DOUBLE_EQ(op_poly(SymOperator::diagonal(d, w), {}, 0.0), 1.0);
}

TEST(OpPoly, WorkedBoundCase) {
  const auto w = uniform_weights(1);
  const double d[] = {1.0};
  const double steps[] = {0.5, 0.5};
  const double v = op_poly(SymOperator::diagonal(d, w), steps, 1.0);
  EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_LE(v, 1.0 / (std::numbers::e * 1.0));
}

TEST(OpPoly, StepAboveInverseNormThrows) {
  const auto w = uniform_weights(1);
  const double d[] = {2.0};
  const double steps[] = {0.6};
  EXPECT_THROW(op_poly(SymOperator::diagonal(d, w), steps, 0.0), ValidationError);
}

TEST(OpPoly, NeverExceedsOperatorPolynomialBound) {
  Rng rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 1 + rng.uniform_index(6);
    std::vector<double> d(m);
    for (auto& x : d) x = rng.uniform01();
    d[0] = 1.0;
    const auto b = SymOperator::diagonal(d, uniform_weights(m));
    std::vector<double> steps(1 + rng.uniform_index(30));
    double sum = 0.0;
    for (auto& s : steps) {
      s = 0.01 + 0.99 * rng.uniform01();
      sum += s;
    }
    const double p = rng.uniform01();
    const double bound = p == 0.0 ? 1.0 : std::pow(p, p) / (std::exp(p) * std::pow(sum, p));
    EXPECT_LE(op_poly(b, steps, p), bound * (1.0 + 1e-12));
  }
}
