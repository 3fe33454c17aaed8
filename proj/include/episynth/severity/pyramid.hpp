#pragma once

// Severity pyramid: infection -> symptoms -> hospitalisation -> ICU / death.

#include <cmath>
#include <random>

#include "episynth/core/error.hpp"
#include "episynth/core/math.hpp"

namespace episynth::severity {

/// Conditional and detection probabilities for one age group in one wave.
/// The attack rate p_I|Pop is the sero-prevalence increment pi - pi_baseline.
struct SeverityParams {
  double pi_baseline = 0.0;
  double p_I_Pop = 0.0;
  double p_S_I = 1.0;
  double p_H_S = 1.0;
  double p_ICU_H = 1.0;
  double p_D_H = 1.0;
  double d_S = 1.0;
  double d_H = 1.0;
  double d_D = 1.0;
  double d_ICU = 1.0;

  double pi() const noexcept { return pi_baseline + p_I_Pop; }

  void validate() const {
    auto check = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(name) + " must lie in [0,1]");
    };
    check(pi_baseline, "pi_baseline");
    check(p_I_Pop, "p_I|Pop");
    check(p_S_I, "p_S|I");
    check(p_H_S, "p_H|S");
    check(p_ICU_H, "p_ICU|H");
    check(p_D_H, "p_D|H");
    check(d_S, "d_S");
    check(d_H, "d_H");
    check(d_D, "d_D");
    check(d_ICU, "d_ICU");
    if (pi() > 1.0) throw DomainError("pi_baseline + p_I|Pop exceeds 1");
  }
};

struct SeverityState {
  Count N_Pop = 0;
  Count N_I = 0;
  Count N_S = 0;
  Count N_H = 0;
  Count N_ICU = 0;
  Count N_D = 0;

  bool monotone() const noexcept {
    return N_Pop >= N_I && N_I >= N_S && N_S >= N_H && N_H >= N_ICU && N_H >= N_D && N_ICU >= 0 && N_D >= 0;
  }
};

struct CaseSeverityRisks {
  double CHR = 0.0;
  double CIR = 0.0;
  double CFR = 0.0;
  double sCFR = 0.0;
};

inline Count floor_count(double p, Count n) { return static_cast<Count>(std::floor(p * static_cast<double>(n))); }

/// Mean parameterisation N_l = floor(p_{l|m} N_m).
inline SeverityState pyramid_counts(const SeverityParams& p, Count N_Pop) {
  if (N_Pop < 0) throw DomainError("population must be nonnegative");
  SeverityState s;
  s.N_Pop = N_Pop;
  s.N_I = floor_count(p.p_I_Pop, N_Pop);
  s.N_S = floor_count(p.p_S_I, s.N_I);
  s.N_H = floor_count(p.p_H_S, s.N_S);
  s.N_ICU = floor_count(p.p_ICU_H, s.N_H);
  s.N_D = floor_count(p.p_D_H, s.N_H);
  return s;
}

/// Nested binomial variant N_l ~ Binomial(N_m, p_{l|m}).
template <class Rng>
SeverityState pyramid_counts_nested(const SeverityParams& p, Count N_Pop, Rng& rng) {
  auto draw = [&](Count n, double q) { return std::binomial_distribution<Count>(n, q)(rng); };
  SeverityState s;
  s.N_Pop = N_Pop;
  s.N_I = draw(N_Pop, p.p_I_Pop);
  s.N_S = draw(s.N_I, p.p_S_I);
  s.N_H = draw(s.N_S, p.p_H_S);
  s.N_ICU = draw(s.N_H, p.p_ICU_H);
  s.N_D = draw(s.N_H, p.p_D_H);
  return s;
}

/// Log probability of a state under the nested binomial structure.
inline double nested_pyramid_logpmf(const SeverityParams& p, const SeverityState& s) {
  return binomial_loglik(s.N_I, s.N_Pop, p.p_I_Pop) + binomial_loglik(s.N_S, s.N_I, p.p_S_I) +
         binomial_loglik(s.N_H, s.N_S, p.p_H_S) + binomial_loglik(s.N_ICU, s.N_H, p.p_ICU_H) +
         binomial_loglik(s.N_D, s.N_H, p.p_D_H);
}

inline CaseSeverityRisks case_severity_risks(const SeverityParams& p) {
  CaseSeverityRisks r;
  r.CHR = p.p_H_S * p.p_S_I;
  r.CIR = p.p_ICU_H * r.CHR;
  r.CFR = p.p_D_H * r.CHR;
  r.sCFR = p.p_D_H * p.p_H_S;
  return r;
}

}  // namespace episynth::severity
