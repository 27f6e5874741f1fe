#pragma once

#include <cstdint>

namespace cssmooth {

/// Standard normal CDF. Throws std::domain_error on NaN.
double phi(double z);

/// Standard normal quantile for 0 < p < 1. Throws std::domain_error otherwise.
double phi_inv(double p);

/// Standard normal density.
double phi_density(double z) noexcept;

enum class BoundSide { Lower, Upper };

/// One-sided exact (Clopper-Pearson) bound on a binomial proportion.
struct ConfidenceBound {
  double value = 0.0;
  double confidence = 0.0;
  BoundSide side = BoundSide::Lower;
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
};

/// Largest p with P[Binomial(n, p) >= k] <= 1 - confidence, i.e. the
/// (1 - confidence) quantile of Beta(k, n - k + 1). Zero when k == 0.
/// Throws std::domain_error for k > n, n == 0, or confidence outside (0, 1).
ConfidenceBound binom_lower(std::uint64_t k, std::uint64_t n, double confidence);

/// Smallest p with P[Binomial(n, p) <= k] <= 1 - confidence, i.e. the
/// confidence quantile of Beta(k + 1, n - k). One when k == n.
ConfidenceBound binom_upper(std::uint64_t k, std::uint64_t n, double confidence);

}  // namespace cssmooth
