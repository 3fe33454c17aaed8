#pragma once

// Probability kernels and small numeric helpers used by every likelihood.
// All densities are returned on the log scale; impossible outcomes map to -inf.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "episynth/core/error.hpp"

namespace episynth {

using Count = std::int64_t;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Thread-safe log-gamma (glibc's lgamma writes the global signgam).
inline double log_gamma(double x) { return boost::math::lgamma(x); }

inline double log_factorial(Count n) { return log_gamma(static_cast<double>(n) + 1.0); }

inline double log_choose(Count n, Count k) {
  if (k < 0 || k > n) return kNegInf;
  if (k == 0 || k == n) return 0.0;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

/// Exact binomial log pmf. Requires 0 <= y <= n and p in [0,1].
inline double binomial_logpmf(Count y, Count n, double p) {
  if (n < 0 || y < 0) throw DomainError("binomial_logpmf: negative count");
  if (y > n) throw DomainError("binomial_logpmf: y=" + std::to_string(y) + " exceeds n=" + std::to_string(n));
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial_logpmf: p outside [0,1]");
  if (p == 0.0) return y == 0 ? 0.0 : kNegInf;
  if (p == 1.0) return y == n ? 0.0 : kNegInf;
  return log_choose(n, y) + static_cast<double>(y) * std::log(p) + static_cast<double>(n - y) * std::log1p(-p);
}

/// Binomial log likelihood that never throws: out-of-domain arguments give -inf so samplers can reject.
inline double binomial_loglik(Count y, Count n, double p) {
  if (n < 0 || y < 0 || y > n || !(p >= 0.0 && p <= 1.0)) return kNegInf;
  return binomial_logpmf(y, n, p);
}

inline double poisson_logpmf(Count y, double mean) {
  if (y < 0) return kNegInf;
  if (!(mean >= 0.0)) throw DomainError("poisson_logpmf: negative mean");
  if (mean == 0.0) return y == 0 ? 0.0 : kNegInf;
  if (std::isinf(mean)) return kNegInf;
  return static_cast<double>(y) * std::log(mean) - mean - log_factorial(y);
}

inline constexpr double kNegBinSumThreshold = 1e4;

/// Negative binomial with mean `mean` and size `size`; variance mean + mean^2/size.
/// size = +inf is the Poisson limit.
inline double negbin_logpmf(Count y, double mean, double size) {
  if (!(mean > 0.0)) throw DomainError("negbin_logpmf: mean must be positive");
  if (!(size > 0.0)) throw DomainError("negbin_logpmf: size must be positive");
  if (y < 0) return kNegInf;
  if (std::isinf(size)) return poisson_logpmf(y, mean);
  const double yd = static_cast<double>(y);
  // Near the Poisson limit lgamma(y + size) - lgamma(size) cancels badly; sum the log ratios instead.
  if (size > kNegBinSumThreshold && y < 10000) {
    double acc = 0.0;
    const double denom = size + mean;
    for (Count i = 0; i < y; ++i) acc += std::log1p((static_cast<double>(i) - mean) / denom);
    return acc + yd * std::log(mean) - log_factorial(y) - size * std::log1p(mean / size);
  }
  return log_gamma(yd + size) - log_gamma(size) - log_factorial(y) + size * (std::log(size) - std::log(size + mean)) +
         yd * (std::log(mean) - std::log(size + mean));
}

inline double normal_logpdf(double x, double mean, double sd) {
  if (!(sd > 0.0)) throw DomainError("normal_logpdf: sd must be positive");
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

inline double beta_logpdf(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("beta_logpdf: shape parameters must be positive");
  if (x < 0.0 || x > 1.0) return kNegInf;
  const double lb = log_gamma(a) + log_gamma(b) - log_gamma(a + b);
  if (x == 0.0) return a == 1.0 ? -lb : (a < 1.0 ? kInf : kNegInf);
  if (x == 1.0) return b == 1.0 ? -lb : (b < 1.0 ? kInf : kNegInf);
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - lb;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Nearest-integer count from a double that is supposed to hold one.
inline Count to_count(double v) { return static_cast<Count>(std::llround(v)); }

}  // namespace episynth
