#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aogd/core.hpp"
#include "aogd/learner.hpp"
#include "aogd/offline_oracle.hpp"
#include "aogd/problems/problem.hpp"
#include "aogd/schedules.hpp"

namespace aogd {

struct RegretCheckpoint {
  std::size_t t = 0;
  double loss_regret = 0.0;     // sum_{s<=t} f_s(x_s) - f_s(x*_t)
  double constraint_cum = 0.0;  // sum_{s<=t} g(x_s), signed
  double loss_bound = 0.0;
  double constraint_bound = 0.0;
};

struct RegretReport {
  std::vector<RegretCheckpoint> rows;
};

/// `count` strictly increasing integers in [1, T], roughly log-spaced, ending at T.
inline std::vector<std::size_t> log_checkpoints(std::size_t T, std::size_t count) {
  if (count < 1 || count > T) throw InputError("checkpoint count must lie in [1, T]");
  if (count == 1) return {T};
  std::vector<std::size_t> pts(count);
  const double logT = std::log(static_cast<double>(T));
  for (std::size_t k = 0; k < count; ++k) {
    const double v = std::exp(logT * static_cast<double>(k) / static_cast<double>(count - 1));
    pts[k] = static_cast<std::size_t>(std::llround(v));
  }
  pts[0] = 1;
  for (std::size_t k = 1; k < count; ++k) pts[k] = std::max(pts[k], pts[k - 1] + 1);
  pts[count - 1] = T;
  for (std::size_t k = count - 1; k-- > 0;) pts[k] = std::min(pts[k], pts[k + 1] - 1);
  return pts;
}

/// Cumulative loss regret against the per-checkpoint comparator x*_t, the
/// running constraint sum, and the theoretical bounds at each checkpoint.
template <OnlineProblem P>
RegretReport accumulate(std::span<const RoundRecord> records, std::span<const std::size_t> checkpoints,
                        const std::map<std::size_t, OfflineSolution>& offline, const P& problem,
                        const ScheduleParams& bounds) {
  RegretReport rep;
  double loss_cum = 0.0;
  double g_cum = 0.0;
  std::size_t s = 0;
  std::size_t prev = 0;
  for (const std::size_t t : checkpoints) {
    if (t <= prev) throw InputError("checkpoints must be strictly increasing");
    if (t > records.size()) throw InputError("checkpoint beyond the recorded rounds");
    const auto it = offline.find(t);
    if (it == offline.end())
      throw InputError("no offline solution for checkpoint t=" + std::to_string(t));
    for (; s < t; ++s) {
      loss_cum += records[s].loss;
      g_cum += records[s].constraint;
    }
    double comparator = 0.0;
    for (std::size_t u = 1; u <= t; ++u) comparator += problem.loss_value(u, it->second.x_star);

    const double Td = static_cast<double>(t);
    rep.rows.push_back({t, loss_cum - comparator, g_cum, loss_regret_bound(bounds, Td),
                        constraint_regret_bound(bounds, Td)});
    prev = t;
  }
  return rep;
}

/// Least-squares slope of log(value) against log(t) over the last half of the
/// curve; values are clamped below at 1e-12.
inline double fit_rate_exponent(std::span<const std::pair<double, double>> curve) {
  if (curve.size() < 5) throw InputError("rate fit needs at least 5 checkpoints");
  const std::size_t start = curve.size() / 2;
  const auto n = static_cast<double>(curve.size() - start);
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = start; i < curve.size(); ++i) {
    sx += std::log(curve[i].first);
    sy += std::log(std::max(curve[i].second, 1e-12));
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = start; i < curve.size(); ++i) {
    const double dx = std::log(curve[i].first) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(std::max(curve[i].second, 1e-12)) - my);
  }
  if (!(sxx > 0.0)) throw InputError("rate fit is degenerate: all checkpoints share one t");
  return sxy / sxx;
}

enum class Column { LossRegret, ConstraintCum, ConstraintPositive, LossBound, ConstraintBound };

inline std::vector<std::pair<double, double>> curve(const RegretReport& rep, Column c) {
  std::vector<std::pair<double, double>> out;
  out.reserve(rep.rows.size());
  for (const auto& r : rep.rows) {
    double v = 0.0;
    switch (c) {
      case Column::LossRegret: v = r.loss_regret; break;
      case Column::ConstraintCum: v = r.constraint_cum; break;
      case Column::ConstraintPositive: v = std::max(0.0, r.constraint_cum); break;
      case Column::LossBound: v = r.loss_bound; break;
      case Column::ConstraintBound: v = r.constraint_bound; break;
    }
    out.emplace_back(static_cast<double>(r.t), v);
  }
  return out;
}

struct BoundCompliance {
  bool loss_ok = true;
  bool constraint_ok = true;
  double max_ratio = 0.0;
};

/// Checks measured columns against the closed-form bounds at every checkpoint.
inline BoundCompliance bound_compliance(const RegretReport& rep, const ScheduleParams& params) {
  BoundCompliance out;
  out.max_ratio = -INFINITY;
  for (const auto& r : rep.rows) {
    const double Td = static_cast<double>(r.t);
    const double lb = loss_regret_bound(params, Td);
    const double cb = constraint_regret_bound(params, Td);
    if (!(r.loss_regret <= lb)) out.loss_ok = false;
    if (!(r.constraint_cum <= cb)) out.constraint_ok = false;
    out.max_ratio = std::max({out.max_ratio, r.loss_regret / lb, r.constraint_cum / cb});
  }
  if (rep.rows.empty()) out.max_ratio = 0.0;
  return out;
}

}  // namespace aogd
