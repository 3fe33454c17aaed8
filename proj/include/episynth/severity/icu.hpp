#pragma once

// ICU occupancy as a linear immigration-death process: admissions at rate
// lambda_t, independent exits at rate mu. Starting from a Poisson occupancy the
// occupancy stays Poisson with mean nu solving d nu/dt = lambda_t - mu nu.

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "episynth/core/error.hpp"
#include "episynth/core/math.hpp"
#include "episynth/core/random.hpp"
#include "episynth/core/types.hpp"
#include "episynth/mcmc/posterior.hpp"

namespace episynth::severity {

struct IcuProcessParams {
  std::vector<double> lambda;  // admissions per day, constant on each step
  double mu = 0.1;             // exits per day
  double nu0 = 0.0;            // mean occupancy at t = 0
  double delta_t = 1.0;
  double d_ICU = 1.0;

  void validate() const {
    if (!(mu > 0.0)) throw DomainError("ICU exit rate mu must be positive");
    if (!(delta_t > 0.0)) throw DomainError("ICU step must be positive");
    if (!(nu0 >= 0.0)) throw DomainError("initial ICU occupancy mean must be nonnegative");
    for (double l : lambda)
      if (!(l >= 0.0)) throw DomainError("ICU admission rate must be nonnegative");
    if (!(d_ICU >= 0.0 && d_ICU <= 1.0)) throw DomainError("d_ICU must lie in [0,1]");
  }

  double expected_length_of_stay() const { return 1.0 / mu; }
};

/// nu_0 .. nu_T for T = lambda.size() steps (exact for piecewise-constant lambda).
inline std::vector<double> icu_mean_trajectory(const IcuProcessParams& p) {
  p.validate();
  const double decay = std::exp(-p.mu * p.delta_t);
  std::vector<double> nu{p.nu0};
  nu.reserve(p.lambda.size() + 1);
  for (double l : p.lambda) nu.push_back(nu.back() * decay + l / p.mu * (1.0 - decay));
  return nu;
}

inline double cumulative_admissions(const IcuProcessParams& p) {
  double total = 0.0;
  for (double l : p.lambda) total += l * p.delta_t;
  return total;
}

/// Sum of Poisson(nu_t) marginal log pmfs over the observed prevalent counts.
inline double icu_immigration_death_loglik(const IcuProcessParams& p, const DataStream& prevalence) {
  const auto nu = icu_mean_trajectory(p);
  double ll = 0.0;
  for (const auto& o : prevalence.observations) {
    if (o.time_index >= nu.size())
      throw ConfigurationError("ICU observation at t=" + std::to_string(o.time_index) + " beyond the admission series");
    ll += poisson_logpmf(to_count(o.value), nu[o.time_index]);
    if (ll == kNegInf) return ll;
  }
  return ll;
}

/// Stage-one sub-model: log lambda on segments of `segment_steps` steps with a Gaussian
/// random-walk prior, log mu with a Normal prior, occupancy started at stationarity.
struct IcuSubmodelConfig {
  std::size_t steps = 0;
  std::size_t segment_steps = 1;
  double delta_t = 1.0;
  double log_lambda0_mean = 0.0;
  double log_lambda0_sd = 2.0;
  double random_walk_sd = 0.3;
  double log_mu_mean = std::log(0.1);
  double log_mu_sd = 0.5;

  std::size_t segments() const { return (steps + segment_steps - 1) / segment_steps; }
  void validate() const {
    if (steps == 0) throw ConfigurationError("ICU sub-model needs at least one step");
    if (segment_steps == 0) throw ConfigurationError("segment length must be positive");
    if (!(log_lambda0_sd > 0.0 && random_walk_sd > 0.0 && log_mu_sd > 0.0))
      throw ConfigurationError("ICU prior sds must be positive");
  }
};

class IcuSubmodel {
 public:
  IcuSubmodel(IcuSubmodelConfig cfg, DataStream prevalence) : cfg_(cfg), data_(std::move(prevalence)) {
    cfg_.validate();
  }

  std::size_t dimension() const { return cfg_.segments() + 1; }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> n;
    for (std::size_t j = 0; j < cfg_.segments(); ++j) n.push_back("lambda." + std::to_string(j));
    n.push_back("mu");
    return n;
  }

  std::vector<double> to_natural(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]);
    return out;
  }
  std::vector<double> to_unconstrained(std::span<const double> theta) const {
    std::vector<double> out(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = std::log(theta[i]);
    return out;
  }

  IcuProcessParams process(std::span<const double> theta) const {
    IcuProcessParams p;
    p.delta_t = cfg_.delta_t;
    p.mu = theta.back();
    p.lambda.resize(cfg_.steps);
    for (std::size_t k = 0; k < cfg_.steps; ++k) p.lambda[k] = theta[k / cfg_.segment_steps];
    p.nu0 = p.lambda.front() / p.mu;
    return p;
  }

  /// Prior on (log lambda, log mu) plus the occupancy likelihood.
  double log_density(std::span<const double> x) const {
    const std::size_t J = cfg_.segments();
    double lp = normal_logpdf(x[0], cfg_.log_lambda0_mean, cfg_.log_lambda0_sd);
    for (std::size_t j = 1; j < J; ++j) lp += normal_logpdf(x[j], x[j - 1], cfg_.random_walk_sd);
    lp += normal_logpdf(x[J], cfg_.log_mu_mean, cfg_.log_mu_sd);
    const auto theta = to_natural(x);
    return lp + icu_immigration_death_loglik(process(theta), data_);
  }

  std::vector<double> initial_natural(Rng& rng) const {
    std::normal_distribution<double> z;
    std::vector<double> x(dimension());
    x[0] = cfg_.log_lambda0_mean + cfg_.log_lambda0_sd * z(rng);
    for (std::size_t j = 1; j + 1 < x.size(); ++j) x[j] = x[j - 1] + cfg_.random_walk_sd * z(rng);
    x.back() = cfg_.log_mu_mean + cfg_.log_mu_sd * z(rng);
    return to_natural(x);
  }

  /// Posterior mean and sd of log cumulative admissions, scaled by `fraction` (e.g. positivity).
  std::pair<double, double> log_admissions_estimate(const PosteriorSample& s, double fraction = 1.0) const {
    std::vector<double> v;
    v.reserve(s.size());
    for (const auto& d : s.draws) v.push_back(std::log(fraction * cumulative_admissions(process(d))));
    return {stats::mean(v), stats::sd(v)};
  }

  const IcuSubmodelConfig& config() const noexcept { return cfg_; }

 private:
  IcuSubmodelConfig cfg_;
  DataStream data_;
};

}  // namespace episynth::severity
