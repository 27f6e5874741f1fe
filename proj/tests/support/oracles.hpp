#pragma once

// Test-only reference computations. Nothing here calls into the library's
// numeric kernels, so agreement with them is meaningful.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace cssmooth::testing {

/// log C(n, k) p^k (1-p)^(n-k) in long double.
inline long double binom_log_pmf(std::uint64_t k, std::uint64_t n, long double p) {
  const long double lc = std::lgamma((long double)n + 1) - std::lgamma((long double)k + 1) -
                         std::lgamma((long double)(n - k) + 1);
  long double lp = lc;
  if (k > 0) lp += (long double)k * std::log(p);
  if (n > k) lp += (long double)(n - k) * std::log1p(-p);
  return lp;
}

/// Sum of the pmf over [lo, hi], stepping term to term by the pmf ratio.
inline long double binom_pmf_sum(std::uint64_t lo, std::uint64_t hi, std::uint64_t n, long double p) {
  const long double odds = p / (1.0L - p);
  long double term = std::exp(binom_log_pmf(lo, n, p));
  long double s = 0.0L;
  for (std::uint64_t i = lo; i <= hi; ++i) {
    s += term;
    term *= (long double)(n - i) / (long double)(i + 1) * odds;
  }
  return s;
}

/// P[Binomial(n, p) >= k] by direct summation.
inline long double binom_tail_ge(std::uint64_t k, std::uint64_t n, long double p) {
  if (k == 0) return 1.0L;
  if (p <= 0.0L) return 0.0L;
  if (p >= 1.0L) return 1.0L;
  return binom_pmf_sum(k, n, n, p);
}

/// P[Binomial(n, p) <= k] by direct summation.
inline long double binom_tail_le(std::uint64_t k, std::uint64_t n, long double p) {
  if (k >= n) return 1.0L;
  if (p <= 0.0L) return 1.0L;
  if (p >= 1.0L) return 0.0L;
  return binom_pmf_sum(0, k, n, p);
}

/// Clopper-Pearson lower bound by bisection on the exact upper tail.
inline double oracle_lower(std::uint64_t k, std::uint64_t n, double confidence) {
  if (k == 0) return 0.0;
  long double lo = 0.0L, hi = 1.0L;
  for (int it = 0; it < 64; ++it) {
    const long double mid = 0.5L * (lo + hi);
    if (binom_tail_ge(k, n, mid) < 1.0L - confidence) lo = mid; else hi = mid;
  }
  return double(0.5L * (lo + hi));
}

/// Clopper-Pearson upper bound by bisection on the exact lower tail.
inline double oracle_upper(std::uint64_t k, std::uint64_t n, double confidence) {
  if (k == n) return 1.0;
  long double lo = 0.0L, hi = 1.0L;
  for (int it = 0; it < 64; ++it) {
    const long double mid = 0.5L * (lo + hi);
    if (binom_tail_le(k, n, mid) > 1.0L - confidence) lo = mid; else hi = mid;
  }
  return double(0.5L * (lo + hi));
}

/// Central finite differences of f at `params` with step h.
inline std::vector<double> central_differences(std::span<double> params, const std::function<double()>& f,
                                               double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f();
    params[i] = saved - h;
    const double down = f();
    params[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace cssmooth::testing
