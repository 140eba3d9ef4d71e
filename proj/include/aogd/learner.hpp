#pragma once

// Adaptive primal-dual online gradient descent. Each round the learner plays
// x_t, observes f_t, and updates on the saddle function
//   L_t(x, lambda) = f_t(x) + lambda g(x) - (theta_t / 2) lambda^2
// with a projected descent step on x (onto the ball B) and a projected ascent
// step on lambda (onto R+). Both steps use gradients taken at (x_t, lambda_t).

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aogd/core.hpp"
#include "aogd/problems/problem.hpp"
#include "aogd/projections.hpp"
#include "aogd/schedules.hpp"

namespace aogd {

struct LearnerState {
  Vector x;
  double lambda = 0.0;
  std::size_t t = 1;

  static LearnerState initial(std::size_t dim) {
    return {Vector::Zero(static_cast<Eigen::Index>(dim)), 0.0, 1};
  }
};

/// Gradient of L_t in x: f_grad + lambda * g_sub.
inline Vector primal_gradient(const Vector& f_grad, double lambda, const Vector& g_sub) {
  return f_grad + lambda * g_sub;
}

/// Gradient of L_t in lambda: g(x) - theta_t * lambda.
inline double dual_gradient(double g_value, double theta_t, double lambda) {
  return g_value - theta_t * lambda;
}

inline LearnerState step(const LearnerState& s, const Vector& f_grad, double g_value,
                         const Vector& g_sub, double eta_t, double mu_t, double theta_t, double R) {
  if (!f_grad.allFinite() || !g_sub.allFinite() || !std::isfinite(g_value))
    throw EvaluationError("non-finite gradient at round t=" + std::to_string(s.t));
  if (f_grad.size() != s.x.size() || g_sub.size() != s.x.size())
    throw InputError("gradient dimension does not match the iterate");
  LearnerState next;
  next.x = project_ball(s.x - eta_t * primal_gradient(f_grad, s.lambda, g_sub), R);
  next.lambda = project_nonneg(s.lambda + mu_t * dual_gradient(g_value, theta_t, s.lambda));
  next.t = s.t + 1;
  if (!next.x.allFinite() || !std::isfinite(next.lambda))
    throw EvaluationError("non-finite iterate after round t=" + std::to_string(s.t));
  return next;
}

/// What the learner saw and played in one round.
struct RoundRecord {
  std::size_t t = 0;
  double loss = 0.0;        // f_t(x_t)
  double constraint = 0.0;  // g(x_t), never shifted
  Vector x;                 // empty unless iterates are kept
  double lambda = 0.0;
  double eta = 0.0;
  double theta = 0.0;
  double mu = 0.0;
};

/// Constraint tightening g -> g + gamma with gamma = c1 T^(-beta/2).
/// r is the lower bound on ||grad g|| over the shifted level set; c0 the
/// horizon from which no violation is expected (0 when unknown).
struct GammaShift {
  double gamma = 0.0;
  double r = 1.0;
  double c1 = 1.0;
  std::size_t c0 = 0;

  static GammaShift for_horizon(double c1, double beta, std::size_t T, double r = 1.0) {
    GammaShift s;
    s.c1 = c1;
    s.r = r;
    s.gamma = c1 * std::pow(static_cast<double>(T), -beta / 2.0);
    s.validate();
    return s;
  }

  void validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InputError("gamma shift must be >= 0");
    if (!(r > 0.0)) throw InputError("gamma shift gradient bound r must be positive");
  }
};

/// Reports g + gamma to the learner and D + gamma as the constraint bound,
/// while raw_constraints() still exposes the unshifted g for accounting.
template <OnlineProblem P>
class GammaShifted {
 public:
  GammaShifted(const P& base, GammaShift shift)
      : base_(&base), shift_(shift), shifted_(base.constraints().shifted(shift.gamma)),
        constants_(base.constants()) {
    shift_.validate();
    constants_.D += shift_.gamma;
  }

  std::size_t dim() const { return base_->dim(); }
  std::size_t horizon() const { return base_->horizon(); }
  const ProblemConstants& constants() const { return constants_; }
  const ConstraintSet& constraints() const { return shifted_; }
  const ConstraintSet& raw_constraints() const { return base_->constraints(); }
  double constraint_shift() const { return shift_.gamma; }
  const GammaShift& shift() const { return shift_; }
  std::string id() const { return base_->id(); }
  LossEval loss(std::size_t t, const Vector& x) const { return base_->loss(t, x); }
  double loss_value(std::size_t t, const Vector& x) const { return base_->loss_value(t, x); }
  const P& base() const { return *base_; }

 private:
  const P* base_;
  GammaShift shift_;
  ConstraintSet shifted_;
  ProblemConstants constants_;
};

template <OnlineProblem P>
GammaShifted<P> gamma_shifted(const P& problem, GammaShift shift) {
  return GammaShifted<P>(problem, shift);
}

namespace detail {
template <typename P>
const ConstraintSet& unshifted_constraints(const P& p) {
  if constexpr (requires { p.raw_constraints(); }) return p.raw_constraints();
  else return p.constraints();
}

template <typename P>
double constraint_shift(const P& p) {
  if constexpr (requires { p.constraint_shift(); }) return p.constraint_shift();
  else return 0.0;
}
}  // namespace detail

struct RunOptions {
  bool keep_iterates = true;
};

/// Plays T rounds against the problem's loss stream. f_t is queried exactly
/// once per round, at x_t.
template <OnlineProblem P>
std::vector<RoundRecord> run(const P& problem, const MaterializedSchedule& schedule, std::size_t T,
                             RunOptions opts = {}) {
  if (T < 1) throw InputError("run: horizon must be >= 1");
  if (schedule.horizon() < T) throw InputError("run: schedule shorter than horizon");
  if (problem.horizon() < T) throw InputError("run: problem stream shorter than horizon");

  const double R = problem.constants().R;
  const ConstraintSet& cs = detail::unshifted_constraints(problem);
  const double shift = detail::constraint_shift(problem);

  std::vector<RoundRecord> records;
  records.reserve(T);
  LearnerState state = LearnerState::initial(problem.dim());
  for (std::size_t t = 1; t <= T; ++t) {
    const LossEval f = problem.loss(t, state.x);
    const ConstraintValue g = g_max(cs, state.x);

    RoundRecord rec;
    rec.t = t;
    rec.loss = f.value;
    rec.constraint = g.value;
    if (opts.keep_iterates) rec.x = state.x;
    rec.lambda = state.lambda;
    rec.eta = schedule.eta_at(t);
    rec.theta = schedule.theta_at(t);
    rec.mu = schedule.mu_at(t);
    records.push_back(std::move(rec));

    if (t == T) break;
    const Vector g_sub = g_subgradient(cs, state.x, g.active_index);
    state = step(state, f.grad, g.value + shift, g_sub, schedule.eta_at(t), schedule.mu_at(t),
                 schedule.theta_at(t), R);
  }
  return records;
}

/// mu_t is scaled by 2/3 whenever a positive gamma shift is active.
template <OnlineProblem P>
double mu_scale_for(const P& problem) {
  return detail::constraint_shift(problem) > 0.0 ? 2.0 / 3.0 : 1.0;
}

using AnySchedule = std::variant<ScheduleParams, FixedScheduleParams>;

template <OnlineProblem P>
std::vector<RoundRecord> run(const P& problem, const AnySchedule& schedule, std::size_t T,
                             RunOptions opts = {}) {
  const double scale = mu_scale_for(problem);
  const auto materialized =
      std::visit([&](const auto& s) { return materialize(s, T, scale); }, schedule);
  return run(problem, materialized, T, opts);
}

}  // namespace aogd
