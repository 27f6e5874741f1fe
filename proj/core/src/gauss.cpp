#include "cssmooth/gauss.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/beta.hpp>

namespace cssmooth {

namespace {

// Acklam's rational approximation of the lower-tail quantile, relative
// error about 1.15e-9 before refinement. Valid for 0 < q <= 0.5.
double quantile_seed(double q) {
  constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                          1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                          6.680131188771972e+01, -1.328068155288572e+01};
  constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                          -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                          3.754408661907416e+00};
  constexpr double kLowRegion = 0.02425;
  if (q < kLowRegion) {
    const double t = std::sqrt(-2.0 * std::log(q));
    return (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
           ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  }
  const double u = q - 0.5;
  const double r = u * u;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Lower-tail quantile, 0 < q <= 0.5, refined with Halley steps against phi.
double lower_quantile(double q) {
  double x = quantile_seed(q);
  for (int step = 0; step < 2; ++step) {
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - q;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

void check_counts(std::uint64_t k, std::uint64_t n, double confidence) {
  if (n == 0 || k > n) {
    throw std::domain_error("binomial bound needs 0 <= k <= n and n >= 1 (k=" + std::to_string(k) +
                            ", n=" + std::to_string(n) + ")");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::domain_error("binomial bound confidence must lie in (0, 1)");
  }
}

// Smallest p in [0, 1] with I_p(a, b) >= target, by bisection to full
// double resolution (interval width well below 1e-12).
double beta_quantile(double a, double b, double target) {
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (boost::math::ibeta(a, b, mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double phi(double z) {
  if (std::isnan(z)) throw std::domain_error("phi: NaN input");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double phi_density(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double phi_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("phi_inv: probability must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  // 1 - p is exact for p in [0.5, 1), which makes the quantile exactly odd.
  return p < 0.5 ? lower_quantile(p) : -lower_quantile(1.0 - p);
}

ConfidenceBound binom_lower(std::uint64_t k, std::uint64_t n, double confidence) {
  check_counts(k, n, confidence);
  ConfidenceBound out{0.0, confidence, BoundSide::Lower, k, n};
  if (k == 0) return out;
  if (k == n) {
    out.value = std::pow(1.0 - confidence, 1.0 / double(n));
    return out;
  }
  out.value = beta_quantile(double(k), double(n - k + 1), 1.0 - confidence);
  return out;
}

ConfidenceBound binom_upper(std::uint64_t k, std::uint64_t n, double confidence) {
  check_counts(k, n, confidence);
  ConfidenceBound out{1.0, confidence, BoundSide::Upper, k, n};
  if (k == n) return out;
  if (k == 0) {
    out.value = 1.0 - std::pow(1.0 - confidence, 1.0 / double(n));
    return out;
  }
  out.value = beta_quantile(double(k + 1), double(n - k), confidence);
  return out;
}

}  // namespace cssmooth
