#pragma once

#include <cmath>
#include <optional>

#include "episynth/core/math.hpp"
#include "episynth/severity/pyramid.hpp"

namespace episynth::severity {

struct BinomialObs {
  Count y = 0;
  Count n = 0;
};

struct PointEstimate {
  double value = 0.0;  // log scale
  double sd = 1.0;
};

/// Observations for one age group in the first wave. Absent entries contribute nothing.
struct Wave1Data {
  std::optional<BinomialObs> sero_base;
  std::optional<BinomialObs> sero_post;
  std::optional<PointEstimate> y_S_hat;  // used instead of y_S when present
  std::optional<Count> y_S;
  std::optional<Count> y_H;
  std::optional<Count> y_D;
  std::optional<BinomialObs> y_ICU_H;
  std::optional<BinomialObs> y_D_H;
};

struct Wave1Terms {
  double sero_base = 0.0;
  double sero_post = 0.0;
  double y_S = 0.0;
  double y_H = 0.0;
  double y_D = 0.0;
  double y_ICU_H = 0.0;
  double y_D_H = 0.0;

  double total() const noexcept { return sero_base + sero_post + y_S + y_H + y_D + y_ICU_H + y_D_H; }
};

/// Normal density of a log-scale point estimate at mean log(N).
inline double lognormal_point_estimate_term(double N, double y_hat, double sigma_hat) {
  if (!(sigma_hat > 0.0)) throw DomainError("point-estimate sd must be positive");
  if (!(N > 0.0)) return kNegInf;
  return normal_logpdf(y_hat, std::log(N), sigma_hat);
}

/// N* ~ Binomial(N_ICU, d_ICU).
inline double icu_lower_bound_term(Count N_ICU, Count N_star, double d_ICU) {
  if (N_star > N_ICU || N_star < 0) return kNegInf;
  return binomial_loglik(N_star, N_ICU, d_ICU);
}

/// Density of logit(p_wave3) under Normal(logit(p_wave2), sd), on the logit scale.
inline double wave3_hierarchical_prior(double p_wave3, double p_wave2, double sd) {
  if (!(sd > 0.0)) throw DomainError("hierarchical sd must be positive");
  if (!(p_wave3 > 0.0 && p_wave3 < 1.0) || !(p_wave2 > 0.0 && p_wave2 < 1.0)) return kNegInf;
  return normal_logpdf(logit(p_wave3), logit(p_wave2), sd);
}

/// Detection model for a reported symptomatic point estimate: log(d_S N_S) is its mean.
inline double detected_point_estimate_term(Count N_S, double d_S, const PointEstimate& e) {
  return lognormal_point_estimate_term(d_S * static_cast<double>(N_S), e.value, e.sd);
}

inline Wave1Terms severity_terms_wave1(const SeverityParams& p, const SeverityState& s, const Wave1Data& d) {
  Wave1Terms t;
  if (d.sero_base) t.sero_base = binomial_loglik(d.sero_base->y, d.sero_base->n, p.pi_baseline);
  if (d.sero_post) t.sero_post = p.pi() > 1.0 ? kNegInf : binomial_loglik(d.sero_post->y, d.sero_post->n, p.pi());
  if (d.y_S_hat)
    t.y_S = detected_point_estimate_term(s.N_S, p.d_S, *d.y_S_hat);
  else if (d.y_S)
    t.y_S = binomial_loglik(*d.y_S, s.N_S, p.d_S);
  if (d.y_H) t.y_H = binomial_loglik(*d.y_H, s.N_H, p.d_H);
  if (d.y_D) t.y_D = binomial_loglik(*d.y_D, s.N_D, p.d_D);
  if (d.y_ICU_H) t.y_ICU_H = binomial_loglik(d.y_ICU_H->y, d.y_ICU_H->n, p.p_ICU_H);
  if (d.y_D_H) t.y_D_H = binomial_loglik(d.y_D_H->y, d.y_D_H->n, p.p_D_H);
  return t;
}

inline double severity_loglik_wave1(const SeverityParams& p, const SeverityState& s, const Wave1Data& d) {
  return severity_terms_wave1(p, s, d).total();
}

}  // namespace episynth::severity
