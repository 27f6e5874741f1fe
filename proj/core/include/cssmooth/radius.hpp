#pragma once

#include <span>
#include <vector>

#include "cssmooth/cost_model.hpp"
#include "cssmooth/types.hpp"

namespace cssmooth {

/// Clamp applied before the normal quantile on exact-probability paths.
inline constexpr double kExactClampEps = 1e-12;

/// Per-class probabilities of the smoothed classifier at one input.
class ProbVector {
 public:
  /// Throws std::domain_error for entries outside [0, 1] or NaN.
  explicit ProbVector(std::vector<double> probs);

  std::size_t m() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }
  std::span<const double> values() const noexcept { return probs_; }

  /// Index of the largest entry, lowest index on ties.
  Label argmax() const;
  /// Largest entry over `classes` (must be nonempty).
  double max_over(std::span<const Label> classes) const;

 private:
  std::vector<double> probs_;
};

struct RadiusResult {
  /// Signed radius; only meaningful as a certificate when `applicable`.
  double radius = 0.0;
  Label top_class = 0;
  bool applicable = false;
};

/// (sigma / 2) * (phi_inv(clip(pa)) - phi_inv(clip(pb))), clip to [eps, 1 - eps].
double clamped_phi_inv_gap(double pa, double pb, double sigma, double clamp_eps = kExactClampEps);

/// Standard l2 radius of the smoothed classifier for label y. Applicable only
/// when the top class is y; otherwise the signed expression is still returned.
RadiusResult standard_radius(const ProbVector& p, Label y, double sigma);

/// Cost-sensitive radius: (sigma / 2) * (phi_inv(max_k p_k) - phi_inv(max_{k in omega} p_k)).
/// Applicable iff the top class is outside omega. Throws std::domain_error on empty omega.
RadiusResult cost_sensitive_radius(const ProbVector& p, const SensitiveTargets& omega, double sigma);

}  // namespace cssmooth
