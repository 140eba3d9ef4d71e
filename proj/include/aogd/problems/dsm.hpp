#pragma once

// Online estimation of a doubly-stochastic matrix from a stream of random
// permutation matrices. Iterates are p x p matrices flattened row-major.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "aogd/core.hpp"
#include "aogd/offline_oracle.hpp"
#include "aogd/problems/problem.hpp"
#include "aogd/projections.hpp"

namespace aogd {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// perm[i] is the column holding the 1 in row i.
using Permutation = std::vector<std::size_t>;

inline Matrix permutation_matrix(const Permutation& perm) {
  const auto p = static_cast<Eigen::Index>(perm.size());
  Matrix Y = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) Y(i, static_cast<Eigen::Index>(perm[i])) = 1.0;
  return Y;
}

inline bool is_permutation_matrix(const Matrix& Y) {
  if (Y.rows() != Y.cols()) return false;
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    for (Eigen::Index j = 0; j < Y.cols(); ++j)
      if (Y(i, j) != 0.0 && Y(i, j) != 1.0) return false;
  return (Y.rowwise().sum().array() == 1.0).all() && (Y.colwise().sum().array() == 1.0).all();
}

/// T uniformly random permutations by seeded Fisher-Yates.
inline std::vector<Permutation> permutation_indices(std::size_t p, std::uint64_t seed,
                                                    std::size_t T) {
  if (p < 2) throw InputError("permutation side length must be >= 2");
  std::mt19937_64 rng(seed);
  std::vector<Permutation> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Permutation perm(p);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = p - 1; i > 0; --i) std::swap(perm[i], perm[uniform_below(rng, i + 1)]);
    out.push_back(std::move(perm));
  }
  return out;
}

inline std::vector<Matrix> permutation_stream(std::size_t p, std::uint64_t seed, std::size_t T) {
  std::vector<Matrix> out;
  out.reserve(T);
  for (const auto& perm : permutation_indices(p, seed, T)) out.push_back(permutation_matrix(perm));
  return out;
}

struct MatrixLossEval {
  double value = 0.0;
  Matrix grad;
};

/// f(X) = 0.5 ||Y - X||_F^2, gradient X - Y.
inline MatrixLossEval dsm_loss_grad(const Matrix& Y, const Matrix& X) {
  if (Y.rows() != X.rows() || Y.cols() != X.cols())
    throw InputError("dsm_loss_grad: shape mismatch");
  Matrix diff = X - Y;
  return {0.5 * diff.squaredNorm(), diff};
}

/// The p^2 nonnegativity constraints followed by row sums <= 1, row sums >= 1,
/// column sums <= 1, column sums >= 1 (4p inequalities for 2p equalities).
inline ConstraintSet dsm_constraints(std::size_t p) {
  if (p < 2) throw InputError("dsm_constraints: p must be >= 2");
  const std::size_t dim = p * p;
  std::vector<ConstraintFunction> cs;
  cs.reserve(dim + 4 * p);
  for (std::size_t k = 0; k < dim; ++k) cs.push_back(linear_constraint(dim, {k}, {-1.0}, 0.0));

  auto row = [&](std::size_t i) {
    std::vector<std::size_t> idx(p);
    for (std::size_t j = 0; j < p; ++j) idx[j] = i * p + j;
    return idx;
  };
  auto col = [&](std::size_t j) {
    std::vector<std::size_t> idx(p);
    for (std::size_t i = 0; i < p; ++i) idx[i] = i * p + j;
    return idx;
  };
  const std::vector<double> ones(p, 1.0), minus_ones(p, -1.0);
  for (std::size_t i = 0; i < p; ++i) cs.push_back(linear_constraint(dim, row(i), ones, 1.0));
  for (std::size_t i = 0; i < p; ++i) cs.push_back(linear_constraint(dim, row(i), minus_ones, -1.0));
  for (std::size_t j = 0; j < p; ++j) cs.push_back(linear_constraint(dim, col(j), ones, 1.0));
  for (std::size_t j = 0; j < p; ++j) cs.push_back(linear_constraint(dim, col(j), minus_ones, -1.0));
  return ConstraintSet(std::move(cs));
}

/// Constants over the ball of radius sqrt(p):
///   R = sqrt(p), G = 2R, sigma = 1,
///   D = sqrt(p) R + 1 (largest |row sum - 1| over B),
///   F = 0.5 (sqrt(p) + R)^2 (largest 0.5||Y - X||^2 over B; the minimum is 0).
inline ProblemConstants dsm_constants(std::size_t p) {
  const double sp = std::sqrt(static_cast<double>(p));
  ProblemConstants c;
  c.R = sp;
  c.G = 2.0 * c.R;
  c.D = sp * c.R + 1.0;
  c.F = 0.5 * (sp + c.R) * (sp + c.R);
  c.sigma = 1.0;
  return c;
}

class DsmProblem {
 public:
  DsmProblem(std::size_t p, std::uint64_t seed, std::size_t T)
      : p_(p), seed_(seed), perms_(permutation_indices(p, seed, T)),
        constraints_(dsm_constraints(p)), constants_(dsm_constants(p)) {}

  /// Replays a fixed list of permutations as the target stream.
  DsmProblem(std::vector<Permutation> perms, std::uint64_t seed = 0)
      : p_(perms.empty() ? 0 : perms.front().size()), seed_(seed), perms_(std::move(perms)),
        constraints_(dsm_constraints(p_)), constants_(dsm_constants(p_)) {
    for (const auto& perm : perms_)
      if (perm.size() != p_ || !is_permutation_matrix(permutation_matrix(perm)))
        throw InputError("dsm: stream entry is not a permutation of the common size");
  }

  std::size_t side() const { return p_; }
  std::size_t dim() const { return p_ * p_; }
  std::size_t horizon() const { return perms_.size(); }
  std::uint64_t seed() const { return seed_; }
  const ProblemConstants& constants() const { return constants_; }
  const ConstraintSet& constraints() const { return constraints_; }
  std::string id() const { return "dsm_p" + std::to_string(p_) + "_seed" + std::to_string(seed_); }

  const Permutation& permutation(std::size_t t) const { return perms_.at(t - 1); }
  Matrix target(std::size_t t) const { return permutation_matrix(permutation(t)); }

  double loss_value(std::size_t t, const Vector& x) const { return loss(t, x).value; }

  LossEval loss(std::size_t t, const Vector& x) const {
    check_dim(x);
    Vector grad = x;
    const auto& perm = permutation(t);
    for (std::size_t i = 0; i < p_; ++i) grad[static_cast<Eigen::Index>(i * p_ + perm[i])] -= 1.0;
    return {0.5 * grad.squaredNorm(), std::move(grad)};
  }

  /// Mean of the first t targets, flattened row-major.
  Vector running_mean(std::size_t t) const {
    Vector m = Vector::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t s = 1; s <= t; ++s) {
      const auto& perm = permutation(s);
      for (std::size_t i = 0; i < p_; ++i) m[static_cast<Eigen::Index>(i * p_ + perm[i])] += 1.0;
    }
    return m / static_cast<double>(t);
  }

  Vector project_feasible(const Vector& x) const {
    check_dim(x);
    const auto p = static_cast<Eigen::Index>(p_);
    Matrix A = Eigen::Map<const RowMajorMatrix>(x.data(), p, p);
    const auto proj = project_birkhoff(A, 1e-12, 100000);
    RowMajorMatrix out = proj.matrix;
    return Eigen::Map<const Vector>(out.data(), out.size());
  }

 private:
  void check_dim(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != dim()) throw InputError("dsm: iterate has wrong dimension");
  }

  std::size_t p_;
  std::uint64_t seed_;
  std::vector<Permutation> perms_;
  ConstraintSet constraints_;
  ProblemConstants constants_;
};

/// Row-major flattening used for DSM iterates.
inline Vector flatten(const Matrix& X) {
  RowMajorMatrix r = X;
  return Eigen::Map<const Vector>(r.data(), r.size());
}

inline Matrix unflatten(const Vector& x, std::size_t p) {
  const auto n = static_cast<Eigen::Index>(p);
  if (x.size() != n * n) throw InputError("unflatten: size is not p^2");
  return Eigen::Map<const RowMajorMatrix>(x.data(), n, n);
}

}  // namespace aogd
