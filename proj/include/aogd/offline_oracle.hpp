#pragma once

// Offline comparators for regret curves: exact Euclidean projections onto the
// two benchmark feasible sets, and a projected-gradient solver for the best
// fixed point in hindsight over a prefix of the loss stream.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>

#include "aogd/core.hpp"
#include "aogd/problems/problem.hpp"
#include "aogd/projections.hpp"

namespace aogd {

struct BirkhoffProjection {
  Matrix matrix;
  std::size_t iterations = 0;
  bool tolerance_met = false;
};

/// Projection onto {X1 = 1, X^T 1 = 1} (closed form).
inline Matrix project_doubly_affine(const Matrix& X) {
  const auto p = static_cast<double>(X.rows());
  const Eigen::VectorXd r = X.rowwise().sum().array() - 1.0;
  const Eigen::RowVectorXd c = X.colwise().sum().array() - 1.0;
  const double s = X.sum() - p;
  Matrix Y = X;
  Y.colwise() -= r / p;
  Y.rowwise() -= c / p;
  Y.array() += s / (p * p);
  return Y;
}

/// Frobenius projection onto the Birkhoff polytope by Dykstra's algorithm,
/// alternating the affine row/column-sum set and the nonnegative orthant.
/// Stops once successive iterates move less than tol and the two half-steps
/// agree to tol.
inline BirkhoffProjection project_birkhoff(const Matrix& A, double tol, std::size_t max_iter) {
  if (A.rows() != A.cols() || A.rows() < 1) throw InputError("project_birkhoff: matrix must be square");
  if (!A.allFinite()) throw InputError("project_birkhoff: matrix must be finite");
  if (!(tol > 0.0)) throw InputError("project_birkhoff: tol must be positive");

  Matrix x = A;
  Matrix p = Matrix::Zero(A.rows(), A.cols());
  Matrix q = Matrix::Zero(A.rows(), A.cols());
  BirkhoffProjection out;
  for (std::size_t k = 1; k <= max_iter; ++k) {
    const Matrix y = project_doubly_affine(x + p);
    p += x - y;
    const Matrix x_next = (y + q).cwiseMax(0.0);
    q += y - x_next;
    const double move = (x_next - x).norm();
    const double gap = (y - x_next).norm();
    x = x_next;
    out.iterations = k;
    if (move < tol && gap < tol) {
      out.tolerance_met = true;
      break;
    }
  }
  out.matrix = std::move(x);
  return out;
}

inline Vector soft_threshold(const Vector& v, double tau) {
  return v.unaryExpr([tau](double a) {
    return a > tau ? a - tau : (a < -tau ? a + tau : 0.0);
  });
}

/// Euclidean projection onto {||x||_1 + 0.5||x||_2^2 <= rho}. Outside the set
/// the projection is soft_threshold(v, nu) / (1 + nu) for the nu > 0 that puts
/// it on the boundary; nu is found by bisection.
inline Vector project_elasticnet_ball(const Vector& v, double rho, double tol = 1e-12) {
  if (!(rho > 0.0)) throw InputError("project_elasticnet_ball: rho must be positive");
  if (!v.allFinite()) throw InputError("project_elasticnet_ball: input must be finite");
  if (elastic_net_value(v) <= rho) return v;

  auto point = [&](double nu) -> Vector { return soft_threshold(v, nu) / (1.0 + nu); };
  auto h = [&](double nu) { return elastic_net_value(point(nu)) - rho; };

  double lo = 0.0;
  double hi = v.cwiseAbs().maxCoeff();
  if (!(h(lo) > 0.0) || !(h(hi) < 0.0))
    throw std::logic_error("project_elasticnet_ball: bisection bracket does not straddle zero");
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double hm = h(mid);
    if (std::abs(hm) < tol) return point(mid);
    (hm > 0.0 ? lo : hi) = mid;
  }
  // Interval collapsed to adjacent doubles; hi is always on the feasible side.
  return point(hi);
}

struct OfflineSolution {
  Vector x_star;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool tolerance_met = false;
};

/// (1/t) sum_{s <= t} f_s(x) and its gradient.
template <OnlineProblem P>
LossEval prefix_objective(const P& problem, std::size_t t, const Vector& x) {
  LossEval acc{0.0, Vector::Zero(x.size())};
  for (std::size_t s = 1; s <= t; ++s) {
    LossEval e = problem.loss(s, x);
    acc.value += e.value;
    acc.grad += e.grad;
  }
  const double inv = 1.0 / static_cast<double>(t);
  acc.value *= inv;
  acc.grad *= inv;
  return acc;
}

template <OnlineProblem P>
double prefix_objective_value(const P& problem, std::size_t t, const Vector& x) {
  double v = 0.0;
  for (std::size_t s = 1; s <= t; ++s) v += problem.loss_value(s, x);
  return v / static_cast<double>(t);
}

/// Minimizes the prefix-average loss over X by projected gradient descent with
/// backtracking. Terminates when the gradient mapping ||x - x+|| / step < tol.
template <FeasibleProjectable P>
OfflineSolution solve_offline(const P& problem, std::size_t t, double tol, std::size_t max_iter,
                              const std::optional<Vector>& warm_start = std::nullopt) {
  if (t < 1 || t > problem.horizon())
    throw InputError("solve_offline: prefix length outside the materialized stream");
  if (!(tol > 0.0)) throw InputError("solve_offline: tol must be positive");

  const auto n = static_cast<Eigen::Index>(problem.dim());
  Vector x = problem.project_feasible(warm_start.value_or(Vector::Zero(n)));
  LossEval cur = prefix_objective(problem, t, x);
  double step = 1.0;

  OfflineSolution out;
  for (std::size_t k = 1; k <= max_iter; ++k) {
    out.iterations = k;
    Vector x_next;
    double f_next = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      x_next = problem.project_feasible(x - step * cur.grad);
      f_next = prefix_objective_value(problem, t, x_next);
      const Vector d = x_next - x;
      if (f_next <= cur.value + cur.grad.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-15) break;
      step *= 0.5;
    }
    const double mapping = (x_next - x).norm() / step;
    x = std::move(x_next);
    cur = prefix_objective(problem, t, x);
    if (mapping < tol) {
      out.tolerance_met = true;
      break;
    }
    step *= 1.25;
  }
  out.x_star = std::move(x);
  out.objective = cur.value;
  return out;
}

}  // namespace aogd
