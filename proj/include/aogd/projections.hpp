#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "aogd/core.hpp"

namespace aogd {

/// Euclidean projection onto the ball of radius R centred at the origin.
inline Vector project_ball(const Vector& x, double R) {
  if (!(R > 0.0)) throw InputError("ball radius must be positive");
  const double n = x.norm();
  if (n <= R) return x;
  Vector y = x * (R / n);
  // Guard against the rescaled norm landing one ulp above R.
  while (y.norm() > R) y *= std::nextafter(1.0, 0.0);
  return y;
}

inline double project_nonneg(double lambda) { return std::max(0.0, lambda); }

/// One convex constraint component g_j(x) <= 0.
struct ConstraintFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> subgradient;
};

/// g_j(x) = a . x - b with a stored sparsely.
inline ConstraintFunction linear_constraint(std::size_t dim, std::vector<std::size_t> indices,
                                            std::vector<double> coeffs, double b) {
  if (indices.size() != coeffs.size()) throw InputError("linear constraint size mismatch");
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= dim) throw InputError("linear constraint index out of range");
    grad[static_cast<Eigen::Index>(indices[k])] += coeffs[k];
  }
  auto value = [idx = std::move(indices), c = std::move(coeffs), b](const Vector& x) {
    double s = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) s += c[k] * x[static_cast<Eigen::Index>(idx[k])];
    return s - b;
  };
  return {std::move(value), [grad](const Vector&) { return grad; }};
}

/// Subgradient of ||x||_1 + 0.5 ||x||_2^2 with coordinate 0 chosen at each kink.
inline Vector elastic_net_subgradient(const Vector& x) {
  return x.unaryExpr([](double v) { return (v > 0.0) - (v < 0.0) + v; });
}

inline double elastic_net_value(const Vector& x) {
  return x.lpNorm<1>() + 0.5 * x.squaredNorm();
}

/// g(x) = ||x||_1 + 0.5 ||x||_2^2 - rho.
inline ConstraintFunction elastic_net_constraint(double rho) {
  return {[rho](const Vector& x) { return elastic_net_value(x) - rho; },
          [](const Vector& x) { return elastic_net_subgradient(x); }};
}

/// Ordered list of components aggregated as g(x) = max_j g_j(x).
class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::vector<ConstraintFunction> components)
      : components_(std::move(components)) {
    if (components_.empty()) throw InputError("constraint set needs at least one component");
  }

  std::size_t size() const { return components_.size(); }
  const ConstraintFunction& operator[](std::size_t j) const { return components_.at(j); }

  /// Constant added to every component.
  ConstraintSet shifted(double gamma) const {
    std::vector<ConstraintFunction> out;
    out.reserve(components_.size());
    for (const auto& c : components_)
      out.push_back({[v = c.value, gamma](const Vector& x) { return v(x) + gamma; }, c.subgradient});
    return ConstraintSet(std::move(out));
  }

 private:
  std::vector<ConstraintFunction> components_;
};

struct ConstraintValue {
  double value = 0.0;
  std::size_t active_index = 0;
};

/// max_j g_j(x) and the smallest index attaining it.
inline ConstraintValue g_max(const ConstraintSet& cs, const Vector& x) {
  if (cs.size() == 0) throw InputError("empty constraint set");
  ConstraintValue out{-INFINITY, 0};
  for (std::size_t j = 0; j < cs.size(); ++j) {
    const double v = cs[j].value(x);
    if (!std::isfinite(v))
      throw EvaluationError("constraint component " + std::to_string(j) + " is not finite");
    if (v > out.value) out = {v, j};
  }
  return out;
}

inline Vector g_subgradient(const ConstraintSet& cs, const Vector& x, std::size_t active_index) {
  Vector s = cs[active_index].subgradient(x);
  if (!s.allFinite())
    throw EvaluationError("subgradient of component " + std::to_string(active_index) +
                          " is not finite");
  return s;
}

/// Subgradient of g at x: that of the component selected by g_max.
inline Vector g_subgradient(const ConstraintSet& cs, const Vector& x) {
  return g_subgradient(cs, x, g_max(cs, x).active_index);
}

}  // namespace aogd
