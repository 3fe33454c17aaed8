#pragma once

#include <vector>

#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/gamma.hpp>

#include "episynth/core/error.hpp"
#include "episynth/core/log.hpp"

namespace episynth::transmission {

/// Delay distributions for infection -> health-care event, discretised on the dt grid.
struct DelaySpec {
  double incubation_mean = 2.0;  // gamma, days
  double incubation_sd = 1.0;
  double report_mean = 2.0;  // exponential, days
  std::size_t max_steps = 28;
};

/// f(j) = P(j dt <= D < (j+1) dt) for a continuous delay with cdf F.
template <class Dist>
std::vector<double> discretize(const Dist& d, double dt, std::size_t steps) {
  std::vector<double> f(steps);
  for (std::size_t j = 0; j < steps; ++j)
    f[j] = cdf(d, static_cast<double>(j + 1) * dt) - cdf(d, static_cast<double>(j) * dt);
  return f;
}

inline std::vector<double> renormalize(std::vector<double> f) {
  double total = 0.0;
  for (double v : f) total += v;
  if (!(total > 0.0)) throw DomainError("delay pmf has no mass");
  for (double& v : f) v /= total;
  return f;
}

/// Discretised gamma incubation convolved with a discretised exponential reporting delay,
/// truncated at max_steps and renormalised.
inline std::vector<double> delay_pmf(const DelaySpec& s, double dt) {
  if (!(s.incubation_mean > 0.0 && s.incubation_sd > 0.0 && s.report_mean > 0.0 && dt > 0.0))
    throw DomainError("delay means and sds must be positive");
  if (s.max_steps == 0) throw DomainError("delay support must have at least one step");
  const double shape = (s.incubation_mean / s.incubation_sd) * (s.incubation_mean / s.incubation_sd);
  const double scale = s.incubation_sd * s.incubation_sd / s.incubation_mean;
  const auto g = discretize(boost::math::gamma_distribution<double>(shape, scale), dt, s.max_steps);
  const auto e = discretize(boost::math::exponential_distribution<double>(1.0 / s.report_mean), dt, s.max_steps);
  std::vector<double> f(s.max_steps, 0.0);
  for (std::size_t i = 0; i < s.max_steps; ++i)
    for (std::size_t j = 0; i + j < s.max_steps; ++j) f[i + j] += g[i] * e[j];
  return renormalize(std::move(f));
}

/// out[v] = scale[v] * sum_{k<=v} series[k] f(v-k). `scale` may have length 1 (constant).
inline std::vector<double> convolve_endpoint(const std::vector<double>& series, std::vector<double> f,
                                             const std::vector<double>& scale) {
  if (scale.size() != 1 && scale.size() != series.size())
    throw ConfigurationError("scale must be a constant or one value per step");
  if (f.size() > series.size() && !series.empty()) {
    log::warn("event=delay_truncated support={} series={}", f.size(), series.size());
    f.resize(series.size());
    f = renormalize(std::move(f));
  }
  std::vector<double> out(series.size(), 0.0);
  for (std::size_t v = 0; v < series.size(); ++v) {
    double acc = 0.0;
    const std::size_t first = v + 1 > f.size() ? v + 1 - f.size() : 0;
    for (std::size_t k = first; k <= v; ++k) acc += series[k] * f[v - k];
    out[v] = acc * (scale.size() == 1 ? scale[0] : scale[v]);
  }
  return out;
}

/// Sums consecutive blocks of `width` steps, starting at `offset`.
inline std::vector<double> aggregate(const std::vector<double>& series, std::size_t width, std::size_t offset = 0) {
  if (width == 0) throw ConfigurationError("aggregation width must be positive");
  std::vector<double> out;
  for (std::size_t start = offset; start + width <= series.size(); start += width) {
    double acc = 0.0;
    for (std::size_t k = start; k < start + width; ++k) acc += series[k];
    out.push_back(acc);
  }
  return out;
}

}  // namespace episynth::transmission
