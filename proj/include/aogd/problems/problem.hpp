#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "aogd/core.hpp"
#include "aogd/projections.hpp"

namespace aogd {

struct LossEval {
  double value = 0.0;
  Vector grad;
};

/// An online problem: a stream of convex losses f_1, f_2, ... revealed one per
/// round, a fixed constraint set, and the constants bounding both over B.
/// Rounds are 1-indexed; loss(t, x) must be deterministic in (t, x).
template <typename P>
concept OnlineProblem = requires(const P& p, std::size_t t, const Vector& x) {
  { p.dim() } -> std::convertible_to<std::size_t>;
  { p.horizon() } -> std::convertible_to<std::size_t>;
  { p.constants() } -> std::convertible_to<ProblemConstants>;
  { p.constraints() } -> std::convertible_to<const ConstraintSet&>;
  { p.loss(t, x) } -> std::same_as<LossEval>;
  { p.loss_value(t, x) } -> std::convertible_to<double>;
  { p.id() } -> std::convertible_to<std::string>;
};

/// Problems that can also project onto their feasible set X (offline use only).
template <typename P>
concept FeasibleProjectable = OnlineProblem<P> && requires(const P& p, const Vector& x) {
  { p.project_feasible(x) } -> std::same_as<Vector>;
};

/// Uniform integer in [0, n) from a 64-bit engine, by rejection. Unlike
/// std::uniform_int_distribution the mapping is identical on every platform.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw InputError("uniform_below needs n > 0");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

}  // namespace aogd
