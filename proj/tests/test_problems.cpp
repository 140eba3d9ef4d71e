#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "aogd/problems/dsm.hpp"
#include "aogd/problems/elasticnet.hpp"

using namespace aogd;

namespace {

Vector random_in_ball(std::mt19937_64& rng, std::size_t dim, double R) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = n(rng);
  return v.normalized() * R * std::pow(u(rng), 1.0 / static_cast<double>(dim));
}

Vector random_on_sphere(std::mt19937_64& rng, std::size_t dim, double R) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = n(rng);
  return v.normalized() * R;
}

/// Central finite difference of a scalar function.
template <typename F>
Vector central_difference(F&& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

struct Synthetic {
  Matrix U;
  Vector y;
};

Synthetic synthetic(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Synthetic s{Matrix(n, d), Vector(n)};
  for (auto& v : s.U.reshaped()) v = g(rng);
  for (auto& v : s.y) v = g(rng) > 0.0 ? 1.0 : -1.0;
  return s;
}

}  // namespace

TEST(DsmLoss, Examples) {
  const Matrix I = Matrix::Identity(2, 2);
  auto e = dsm_loss_grad(I, I);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.grad, Matrix::Zero(2, 2));
  e = dsm_loss_grad(I, Matrix::Zero(2, 2));
  EXPECT_EQ(e.value, 1.0);
  EXPECT_EQ(e.grad, -I);
  EXPECT_THROW(dsm_loss_grad(I, Matrix::Zero(3, 3)), InputError);
}

TEST(DsmLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const Matrix Y = permutation_stream(4, 100 + k, 1).front();
    const Vector x = random_in_ball(rng, 16, 2.0);
    auto f = [&](const Vector& z) { return dsm_loss_grad(Y, unflatten(z, 4)).value; };
    const Vector fd = central_difference(f, x);
    const Vector g = flatten(dsm_loss_grad(Y, unflatten(x, 4)).grad);
    EXPECT_LE((fd - g).norm(), 1e-6 * std::max(1.0, g.norm()));
  }
}

TEST(DsmProblem, FlattenedLossAgreesWithMatrixForm) {
  const DsmProblem prob(3, 5, 10);
  std::mt19937_64 rng(2);
  for (std::size_t t = 1; t <= 10; ++t) {
    const Vector x = random_in_ball(rng, 9, prob.constants().R);
    const auto m = dsm_loss_grad(prob.target(t), unflatten(x, 3));
    const auto e = prob.loss(t, x);
    EXPECT_NEAR(e.value, m.value, 1e-13);
    EXPECT_TRUE(e.grad.isApprox(flatten(m.grad)));
    EXPECT_EQ(prob.loss_value(t, x), e.value);
  }
}

TEST(DsmConstraints, Examples) {
  const auto cs = dsm_constraints(2);
  EXPECT_EQ(cs.size(), 12u);
  EXPECT_EQ(dsm_constraints(8).size(), 64u + 32u);

  Matrix X(2, 2);
  X << 0.3, 0.7, 0.7, 0.3;
  EXPECT_LE(g_max(cs, flatten(X)).value, 1e-15);
  const auto z = g_max(cs, Vector::Zero(4));
  EXPECT_EQ(z.value, 1.0);
  EXPECT_EQ(z.active_index, 4u + 2u);  // first "row sum >= 1" component
  EXPECT_THROW(dsm_constraints(1), InputError);
}

TEST(PermutationStream, ValidDeterministicAndUniform) {
  const auto a = permutation_stream(5, 77, 50), b = permutation_stream(5, 77, 50);
  ASSERT_EQ(a.size(), 50u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(is_permutation_matrix(a[i]));
    EXPECT_EQ(a[i], b[i]);
  }
  const auto p2 = permutation_stream(2, 123, 10000);
  int identity = 0;
  for (const auto& Y : p2) identity += Y(0, 0) == 1.0;
  EXPECT_NEAR(identity / 10000.0, 0.5, 0.05);
  EXPECT_THROW(permutation_stream(1, 0, 3), InputError);
}

TEST(DsmConstants, DerivedValues) {
  const auto c = dsm_constants(8);
  EXPECT_DOUBLE_EQ(c.R, std::sqrt(8.0));
  EXPECT_DOUBLE_EQ(c.G, 2.0 * std::sqrt(8.0));
  EXPECT_DOUBLE_EQ(c.D, 9.0);
  EXPECT_DOUBLE_EQ(c.F, 16.0);
  EXPECT_EQ(c.sigma, 1.0);
}

TEST(LogLoss, Examples) {
  Vector u(3);
  u << 1.0, -2.0, 0.5;
  for (double y : {-1.0, 1.0}) {
    const auto e = logloss_grad(y, u, Vector::Zero(3));
    EXPECT_DOUBLE_EQ(e.value, std::log(2.0));
    EXPECT_TRUE(e.grad.isApprox(-y * u / 2.0));
  }
  Vector x = u * (50.0 / u.squaredNorm());  // margin y x.u = 50
  const auto sat = logloss_grad(1.0, u, x);
  EXPECT_GE(sat.value, 0.0);
  EXPECT_LT(sat.value, 1e-20);
  const auto big = logloss_grad(-1.0, u, 100.0 * x);  // margin -5000
  EXPECT_NEAR(big.value, 5000.0, 1e-9);
  EXPECT_TRUE(big.grad.allFinite());
  EXPECT_THROW(logloss_grad(0.0, u, x), InputError);
}

TEST(LogLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    Vector u(6), x(6);
    for (auto& v : u) v = n(rng);
    for (auto& v : x) v = n(rng);
    const double y = k % 2 ? 1.0 : -1.0;
    auto f = [&](const Vector& z) { return logloss_grad(y, u, z).value; };
    const Vector fd = central_difference(f, x);
    const Vector g = logloss_grad(y, u, x).grad;
    EXPECT_LE((fd - g).norm(), 1e-6 * std::max(1.0, g.norm()));
  }
}

TEST(ElasticNetConstants, Examples) {
  Matrix U = Matrix::Zero(3, 4);
  U(0, 0) = 10.0;
  U(1, 1) = 0.5;
  const auto c = elasticnet_constants(4.0, U);
  EXPECT_DOUBLE_EQ(c.R, 2.0);
  EXPECT_DOUBLE_EQ(c.D, 6.0);
  EXPECT_DOUBLE_EQ(c.G, 10.0);
  EXPECT_EQ(c.sigma, 0.0);
  EXPECT_DOUBLE_EQ(elasticnet_constants(4.0, U.bottomRows(2)).G, 4.0);  // sqrt(d) + R
  const auto s = synthetic(40, 5, 3);
  const auto cs = elasticnet_constants(1.0, s.U);
  for (Eigen::Index r = 0; r < s.U.rows(); ++r) EXPECT_GE(cs.G, s.U.row(r).norm());
  EXPECT_THROW(elasticnet_constants(0.0, U), InputError);
}

// Declared constants bound |g|, ||grad f|| and ||grad g|| over B, and F bounds
// the loss range.
template <typename Problem>
void check_declared_constants(const Problem& prob, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto c = prob.constants();
  std::uniform_int_distribution<std::size_t> round(1, prob.horizon());
  double fmin = INFINITY, fmax = -INFINITY;
  for (int i = 0; i < 10000; ++i) {
    const Vector x = i % 2 ? random_in_ball(rng, prob.dim(), c.R) : random_on_sphere(rng, prob.dim(), c.R);
    const auto g = g_max(prob.constraints(), x);
    ASSERT_LE(std::abs(g.value), c.D);
    ASSERT_LE(g_subgradient(prob.constraints(), x).norm(), c.G);
    const std::size_t t = round(rng);
    const auto f = prob.loss(t, x);
    ASSERT_LE(f.grad.norm(), c.G);
    fmin = std::min(fmin, f.value);
    fmax = std::max(fmax, f.value);
  }
  EXPECT_LE(fmax - fmin, c.F);
}

TEST(ProblemConstantsProperty, DsmDeclaredBoundsHold) {
  check_declared_constants(DsmProblem(2, 1, 50), 10);
  check_declared_constants(DsmProblem(8, 2, 50), 11);
}

TEST(ProblemConstantsProperty, DsmRowSumBoundIsAttained) {
  // Every row entry at -R/p puts row sum - 1 at -(p + 1) = -D.
  const std::size_t p = 4;
  const auto c = dsm_constants(p);
  Vector x = Vector::Zero(16);
  for (std::size_t j = 0; j < p; ++j) x[static_cast<Eigen::Index>(j)] = -c.R / std::sqrt(double(p));
  EXPECT_NEAR(x.norm(), c.R, 1e-12);
  EXPECT_NEAR(g_max(dsm_constraints(p), x).value, c.D, 1e-12);
}

TEST(ProblemConstantsProperty, ElasticNetDeclaredBoundsHold) {
  const auto s = synthetic(60, 8, 9);
  check_declared_constants(ElasticNetProblem(s.U, s.y, 2.0, 3, 100), 12);
  check_declared_constants(ElasticNetProblem(s.U * 0.1, s.y, 0.5, 3, 100), 13);
}

TEST(ProblemConstantsProperty, ElasticNetRadiusEnclosesFeasibleSet) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double rho : {0.1, 1.0, 4.0, 25.0}) {
    const double R = std::sqrt(1.0 + 2.0 * rho) - 1.0;
    double best = 0.0;
    for (int i = 0; i < 5000; ++i) {
      Vector v(5);
      for (auto& x : v) x = n(rng) * (i % 3 == 0 ? 0.01 : 3.0);
      if (i % 7 == 0) {  // sparse directions push ||x||_2 toward R
        v.setZero();
        v[i % 5] = 100.0;
      }
      const Vector x = project_elasticnet_ball(v, rho);
      ASSERT_LE(elastic_net_value(x), rho + 1e-9);
      best = std::max(best, x.norm());
      ASSERT_LE(x.norm(), R + 1e-9);
    }
    EXPECT_NEAR(best, R, 1e-6);  // attained by 1-sparse vectors
  }
}

TEST(ElasticNetProblem, SamplingIsDeterministicAndCoversRows) {
  const auto s = synthetic(10, 3, 1);
  const ElasticNetProblem a(s.U, s.y, 1.0, 5, 2000), b(s.U, s.y, 1.0, 5, 2000);
  std::vector<int> hits(10, 0);
  for (std::size_t t = 1; t <= 2000; ++t) {
    ASSERT_EQ(a.row(t), b.row(t));
    ++hits[a.row(t)];
  }
  for (int h : hits) EXPECT_GT(h, 100);
  const ElasticNetProblem c(s.U, s.y, 1.0, 6, 2000);
  int same = 0;
  for (std::size_t t = 1; t <= 2000; ++t) same += a.row(t) == c.row(t);
  EXPECT_LT(same, 400);
}

TEST(ElasticNetProblem, RejectsBadLabels) {
  auto s = synthetic(5, 2, 1);
  s.y[0] = 0.0;
  EXPECT_THROW(ElasticNetProblem(s.U, s.y, 1.0, 1, 1), InputError);
}

TEST(ElasticNetProblem, MaxNormScaling) {
  const auto s = synthetic(20, 4, 2);
  const Matrix V = scale_to_unit_max_norm(s.U);
  EXPECT_NEAR(V.rowwise().norm().maxCoeff(), 1.0, 1e-15);
}
