#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace aogd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Caller supplied malformed or inconsistent input.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A function or gradient evaluated to a non-finite value.
struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Text input could not be parsed; the message carries the line context.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Regime { Convex, StronglyConvex };

inline const char* to_string(Regime r) {
  return r == Regime::Convex ? "convex" : "strongly_convex";
}

/// Bounds characterizing a problem instance over the enclosing ball B:
///   radius R of B, (sub)gradient bound G for every f_t and g_j,
///   constraint-value bound D, loss-range bound F, strong-convexity
///   modulus sigma of every f_t.
struct ProblemConstants {
  double R = 1.0;
  double G = 1.0;
  double D = 1.0;
  double F = 1.0;
  double sigma = 0.0;

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(R) || !positive(G) || !positive(D) || !positive(F))
      throw InputError("problem constants R, G, D, F must be finite and positive");
    if (!std::isfinite(sigma) || sigma < 0.0)
      throw InputError("strong-convexity modulus sigma must be nonnegative");
  }
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace aogd
