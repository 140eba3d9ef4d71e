#pragma once

// Sparse online binary classification: log-loss on (y_t, u_t) pairs drawn
// with replacement from a dataset, under ||x||_1 + 0.5||x||_2^2 <= rho.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "aogd/core.hpp"
#include "aogd/ingest.hpp"
#include "aogd/offline_oracle.hpp"
#include "aogd/problems/problem.hpp"
#include "aogd/projections.hpp"

namespace aogd {

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// f(x) = log(1 + exp(-y x.u)), gradient -y u sigmoid(-y x.u).
inline LossEval logloss_grad(double y, const Vector& u, const Vector& x) {
  if (y != 1.0 && y != -1.0) throw InputError("logloss_grad: label must be -1 or +1");
  if (u.size() != x.size()) throw InputError("logloss_grad: dimension mismatch");
  const double z = -y * x.dot(u);
  return {softplus(z), (-y * sigmoid(z)) * u};
}

/// R = sqrt(1 + 2 rho) - 1, G = max(sqrt(d) + R, max_t ||u_t||),
/// D = sqrt(d) R + R^2/2, F = log(1 + exp(G R)), sigma = 0.
inline ProblemConstants elasticnet_constants(double rho, const Matrix& U) {
  if (!(rho > 0.0)) throw InputError("elasticnet: rho must be positive");
  if (U.rows() == 0 || U.cols() == 0) throw InputError("elasticnet: dataset is empty");
  const double d = static_cast<double>(U.cols());
  ProblemConstants c;
  c.R = std::sqrt(1.0 + 2.0 * rho) - 1.0;
  c.G = std::max(std::sqrt(d) + c.R, U.rowwise().norm().maxCoeff());
  c.D = std::sqrt(d) * c.R + 0.5 * c.R * c.R;
  c.F = softplus(c.G * c.R);
  c.sigma = 0.0;
  return c;
}

/// Divides every feature vector by the largest row norm.
inline Matrix scale_to_unit_max_norm(const Matrix& U) {
  const double m = U.rowwise().norm().maxCoeff();
  return m > 0.0 ? Matrix(U / m) : U;
}

class ElasticNetProblem {
 public:
  /// Rounds draw rows of U uniformly with replacement from a seeded stream.
  ElasticNetProblem(Matrix U, Vector y, double rho, std::uint64_t seed, std::size_t T,
                    std::string name = "elasticnet")
      : U_(std::move(U)), y_(std::move(y)), rho_(rho), seed_(seed), name_(std::move(name)),
        constraints_({elastic_net_constraint(rho)}), constants_(elasticnet_constants(rho, U_)) {
    check_data();
    std::mt19937_64 rng(seed);
    rows_.reserve(T);
    for (std::size_t t = 0; t < T; ++t)
      rows_.push_back(static_cast<std::size_t>(uniform_below(rng, static_cast<std::uint64_t>(U_.rows()))));
  }

  /// One round per dataset row, in file order.
  static ElasticNetProblem full_pass(Matrix U, Vector y, double rho, std::string name = "elasticnet") {
    ElasticNetProblem p(std::move(U), std::move(y), rho, 0, 0, std::move(name));
    p.rows_.resize(static_cast<std::size_t>(p.U_.rows()));
    for (std::size_t r = 0; r < p.rows_.size(); ++r) p.rows_[r] = r;
    return p;
  }

  std::size_t dim() const { return static_cast<std::size_t>(U_.cols()); }
  std::size_t horizon() const { return rows_.size(); }
  double rho() const { return rho_; }
  std::uint64_t seed() const { return seed_; }
  const ProblemConstants& constants() const { return constants_; }
  const ConstraintSet& constraints() const { return constraints_; }
  std::string id() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", rho_);
    return name_ + "_rho" + buf + "_seed" + std::to_string(seed_);
  }

  std::size_t row(std::size_t t) const { return rows_.at(t - 1); }
  const Matrix& features() const { return U_; }
  const Vector& labels() const { return y_; }

  LossEval loss(std::size_t t, const Vector& x) const {
    const auto r = static_cast<Eigen::Index>(row(t));
    return logloss_grad(y_[r], U_.row(r).transpose(), x);
  }

  double loss_value(std::size_t t, const Vector& x) const {
    const auto r = static_cast<Eigen::Index>(row(t));
    return softplus(-y_[r] * U_.row(r).dot(x));
  }

  Vector project_feasible(const Vector& x) const { return project_elasticnet_ball(x, rho_); }

 private:
  void check_data() const {
    if (U_.rows() != y_.size()) throw InputError("elasticnet: labels and features disagree in length");
    for (Eigen::Index i = 0; i < y_.size(); ++i)
      if (y_[i] != 1.0 && y_[i] != -1.0) throw InputError("elasticnet: labels must be -1 or +1");
    if (!U_.allFinite()) throw InputError("elasticnet: features must be finite");
  }

  Matrix U_;
  Vector y_;
  double rho_;
  std::uint64_t seed_;
  std::string name_;
  std::vector<std::size_t> rows_;
  ConstraintSet constraints_;
  ProblemConstants constants_;
};

inline double nonzero_fraction(const Vector& x, double eps = 0.0) {
  if (x.size() == 0) return 0.0;
  return static_cast<double>((x.array().abs() > eps).count()) / static_cast<double>(x.size());
}

struct RhoSearchResult {
  double rho = 0.0;
  double nonzero_fraction = 0.0;
};

/// Bisects rho on a log scale until the full-dataset offline solution has
/// approximately the requested fraction of nonzero weights.
inline RhoSearchResult search_rho_for_sparsity(const Matrix& U, const Vector& y, double target,
                                               double rho_lo = 1e-4, double rho_hi = 1e3,
                                               int max_steps = 40) {
  if (!(target > 0.0 && target <= 1.0)) throw InputError("target sparsity must lie in (0, 1]");
  const double step = 1.0 / static_cast<double>(U.cols());
  RhoSearchResult best{rho_hi, 1.0};
  double best_err = INFINITY;
  std::optional<Vector> warm;
  for (int k = 0; k < max_steps; ++k) {
    const double rho = std::sqrt(rho_lo * rho_hi);
    const auto prob = ElasticNetProblem::full_pass(U, y, rho);
    const auto sol = solve_offline(prob, prob.horizon(), 1e-7, 20000, warm);
    const double frac = nonzero_fraction(sol.x_star);
    warm = sol.x_star;
    if (std::abs(frac - target) < best_err) {
      best_err = std::abs(frac - target);
      best = {rho, frac};
    }
    if (best_err < 0.5 * step) break;
    (frac < target ? rho_lo : rho_hi) = rho;
  }
  return best;
}

}  // namespace aogd
