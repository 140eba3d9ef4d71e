#pragma once

// Adaptive step-size sequences for the primal-dual online learner, the
// sufficient conditions they must satisfy, and the closed-form regret bounds
// they imply. All rounds are 1-indexed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aogd/core.hpp"

namespace aogd {

/// Adaptive schedule: theta_t, eta_t, mu_t decay as powers of t controlled by
/// the trade-off exponent beta.
struct ScheduleParams {
  double beta = 2.0 / 3.0;
  Regime regime = Regime::Convex;
  ProblemConstants constants;

  void validate() const {
    if (!(beta > 0.0 && beta < 1.0))
      throw InputError("beta must lie in the open interval (0, 1)");
    constants.validate();
    if (regime == Regime::StronglyConvex && !(constants.sigma > 0.0))
      throw InputError("strongly convex regime requires sigma > 0");
  }
};

/// Constant-parameter baseline.
struct FixedScheduleParams {
  double eta = 0.0;
  double theta = 0.0;
  double mu = 0.0;

  void validate() const {
    if (!(eta > 0.0) || !(theta > 0.0) || !(mu > 0.0))
      throw InputError("fixed schedule eta, theta, mu must all be positive");
  }
};

namespace detail {
inline void require_round(std::size_t t) {
  if (t < 1) throw InputError("round index t must be >= 1");
}
}  // namespace detail

inline double theta_at(const ScheduleParams& p, std::size_t t) {
  detail::require_round(t);
  const auto& c = p.constants;
  const double tb = std::pow(static_cast<double>(t), p.beta);
  if (p.regime == Regime::Convex) return 6.0 * c.R * c.G / tb;
  return 6.0 * c.G * c.G / (c.sigma * tb);
}

inline double eta_at(const ScheduleParams& p, std::size_t t) {
  detail::require_round(t);
  const auto& c = p.constants;
  if (p.regime == Regime::Convex)
    return c.R / (c.G * std::pow(static_cast<double>(t), p.beta));
  return 1.0 / (c.sigma * static_cast<double>(t));
}

inline double mu_at(const ScheduleParams& p, std::size_t t) {
  return 1.0 / (theta_at(p, t) * (static_cast<double>(t) + 1.0));
}

/// theta, eta, mu for rounds 1..T stored contiguously; index t-1 holds round t.
struct MaterializedSchedule {
  std::vector<double> theta;
  std::vector<double> eta;
  std::vector<double> mu;

  std::size_t horizon() const { return theta.size(); }
  double theta_at(std::size_t t) const { return theta.at(t - 1); }
  double eta_at(std::size_t t) const { return eta.at(t - 1); }
  double mu_at(std::size_t t) const { return mu.at(t - 1); }
};

/// mu_scale rescales every mu_t (2/3 for the gamma-shifted variant).
inline MaterializedSchedule materialize(const ScheduleParams& p, std::size_t T,
                                        double mu_scale = 1.0) {
  p.validate();
  MaterializedSchedule s;
  s.theta.reserve(T);
  s.eta.reserve(T);
  s.mu.reserve(T);
  for (std::size_t t = 1; t <= T; ++t) {
    s.theta.push_back(theta_at(p, t));
    s.eta.push_back(eta_at(p, t));
    s.mu.push_back(mu_scale * mu_at(p, t));
  }
  return s;
}

inline MaterializedSchedule materialize(const FixedScheduleParams& p, std::size_t T,
                                        double mu_scale = 1.0) {
  p.validate();
  return MaterializedSchedule{std::vector<double>(T, p.theta), std::vector<double>(T, p.eta),
                              std::vector<double>(T, mu_scale * p.mu)};
}

/// Absolute slack granted to each C1/C2 inequality before it counts as violated.
inline constexpr double kConditionTolerance = 1e-12;

struct ConditionReport {
  bool c1_ok = true;
  bool c2_ok = true;
  double c3_slack = 0.0;
  // Sum of |1/eta_t - 1/eta_{t-1}| + sigma over the same range; scales the
  // rounding noise accumulated in c3_slack.
  double c3_magnitude = 0.0;
  std::size_t first_c1_violation = 0;  // 0 when none
  std::size_t first_c2_violation = 0;
  double max_c1 = -INFINITY;
  double max_c2 = -INFINITY;

  /// True when c3_slack <= u_eta up to accumulated rounding.
  bool c3_within(double u_eta) const {
    return c3_slack <= u_eta + kConditionTolerance * std::max(1.0, c3_magnitude);
  }
};

/// Evaluates C1 and C2 for every 2 <= t <= T and accumulates the C3 sum.
/// c2_mu_factor multiplies the mu_t * theta_t^2 term (3/2 under a gamma shift).
inline ConditionReport check_conditions(std::span<const double> theta, std::span<const double> eta,
                                        std::span<const double> mu, double sigma, double G,
                                        std::size_t T, double c2_mu_factor = 1.0) {
  if (theta.size() < T || eta.size() < T || mu.size() < T)
    throw InputError("schedule sequences are shorter than the horizon T");
  for (std::size_t i = 0; i < T; ++i) {
    if (!(theta[i] > 0.0) || !(eta[i] > 0.0) || !(mu[i] > 0.0))
      throw InputError("schedule entries must be strictly positive");
  }

  ConditionReport r;
  for (std::size_t t = 2; t <= T; ++t) {
    const std::size_t i = t - 1;
    const double c1 = 1.0 / mu[i] - 1.0 / mu[i - 1] - theta[i];
    const double c2 = eta[i] * G * G + c2_mu_factor * mu[i] * theta[i] * theta[i] - 0.5 * theta[i];
    r.max_c1 = std::max(r.max_c1, c1);
    r.max_c2 = std::max(r.max_c2, c2);
    if (c1 > kConditionTolerance && r.c1_ok) {
      r.c1_ok = false;
      r.first_c1_violation = t;
    }
    if (c2 > kConditionTolerance && r.c2_ok) {
      r.c2_ok = false;
      r.first_c2_violation = t;
    }
    const double d = 1.0 / eta[i] - 1.0 / eta[i - 1];
    r.c3_slack += d - sigma;
    r.c3_magnitude += std::abs(d) + sigma;
  }
  return r;
}

inline ConditionReport check_conditions(const MaterializedSchedule& s, double sigma, double G,
                                        std::size_t T, double c2_mu_factor = 1.0) {
  return check_conditions(s.theta, s.eta, s.mu, sigma, G, T, c2_mu_factor);
}

/// Loss regret bound
///   [RG + D^2/(6 beta R G)] T^beta + (2RG/(1-beta)) T^(1-beta).
/// Stated for the convex regime; for the strongly convex regime the same
/// expression is returned and bound_is_conservative() reports it.
inline double loss_regret_bound(const ScheduleParams& p, double T) {
  if (!(T >= 1.0)) throw InputError("horizon T must be >= 1");
  const auto& c = p.constants;
  const double rg = c.R * c.G;
  const double b = p.beta;
  return (rg + c.D * c.D / (6.0 * b * rg)) * std::pow(T, b) +
         (2.0 * rg / (1.0 - b)) * std::pow(T, 1.0 - b);
}

inline double constraint_regret_bound(const ScheduleParams& p, double T) {
  const auto& c = p.constants;
  const double lb = loss_regret_bound(p, T);
  const double scale = 24.0 * c.R * c.G / (1.0 - p.beta);
  return std::sqrt(scale * (lb + c.F * T) * std::pow(T, 1.0 - p.beta));
}

inline bool bound_is_conservative(const ScheduleParams& p) {
  return p.regime == Regime::StronglyConvex;
}

/// Exact partial sums of the schedule next to their closed-form upper bounds.
struct ScheduleSums {
  double S_theta = 0.0;
  double S_eta = 0.0;
  double S_mu = 0.0;
  double S_theta_bound = 0.0;
  double S_eta_bound = 0.0;
  double S_mu_bound = 0.0;
  double U_eta = 0.0;
  double delta_mu = 0.0;   // 1/mu_1 - theta_1
  double delta_eta = 0.0;  // 1/eta_1 - sigma
};

inline ScheduleSums schedule_sums(const ScheduleParams& p, std::size_t T) {
  p.validate();
  detail::require_round(T);
  const auto& c = p.constants;
  const double b = p.beta;
  const double Td = static_cast<double>(T);

  ScheduleSums s;
  for (std::size_t t = 1; t <= T; ++t) {
    s.S_theta += theta_at(p, t);
    s.S_eta += eta_at(p, t);
    s.S_mu += mu_at(p, t);
  }
  s.delta_mu = 1.0 / mu_at(p, 1) - theta_at(p, 1);
  s.delta_eta = 1.0 / eta_at(p, 1) - (p.regime == Regime::Convex ? 0.0 : c.sigma);

  if (p.regime == Regime::Convex) {
    s.S_theta_bound = 6.0 * c.R * c.G / (1.0 - b) * std::pow(Td, 1.0 - b);
    s.S_eta_bound = c.R / (c.G * (1.0 - b)) * std::pow(Td, 1.0 - b);
    s.S_mu_bound = std::pow(Td, b) / (6.0 * b * c.R * c.G);
    s.U_eta = c.G / c.R * std::pow(Td, b);
  } else {
    s.S_theta_bound = 6.0 * c.G * c.G / (c.sigma * (1.0 - b)) * std::pow(Td, 1.0 - b);
    s.S_eta_bound = (1.0 + std::log(Td)) / c.sigma;
    s.S_mu_bound = c.sigma / (6.0 * b * c.G * c.G) * std::pow(Td, b);
    s.U_eta = 0.0;
  }
  return s;
}

/// Table value of U_eta without summing the series.
inline double u_eta_bound(const ScheduleParams& p, std::size_t T) {
  if (p.regime == Regime::StronglyConvex) return 0.0;
  return p.constants.G / p.constants.R * std::pow(static_cast<double>(T), p.beta);
}

}  // namespace aogd
