#pragma once

// Discrete-time age-structured SEIR with a Reed-Frost force of infection.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "episynth/core/error.hpp"

namespace episynth::transmission {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// R0 = (1 + phi d_L)(1 + phi d_I); exponential growth rate phi per day.
inline double R0_from_growth_rate(double phi, double d_L, double d_I) {
  if (!(d_L >= 0.0) || !(d_I > 0.0)) throw DomainError("need d_L >= 0 and d_I > 0");
  const double floor_rate = -1.0 / (d_L > 0.0 ? std::min(d_L, d_I) : d_I);
  if (!(phi > floor_rate)) throw DomainError("growth rate below the SEIR domain");
  return (1.0 + phi * d_L) * (1.0 + phi * d_I);
}

/// Inverse of R0_from_growth_rate on its domain (positive root of the quadratic).
inline double growth_rate_from_R0(double R0, double d_L, double d_I) {
  if (!(R0 > 0.0) || !(d_I > 0.0) || !(d_L >= 0.0)) throw DomainError("need R0 > 0, d_I > 0, d_L >= 0");
  if (d_L == 0.0) return (R0 - 1.0) / d_I;
  const double a = d_L * d_I, b = d_L + d_I, c = 1.0 - R0;
  return (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
}

/// Scales a contact matrix so that diag(N) M has spectral radius 1, making R0 the
/// dominant eigenvalue of the next-generation matrix in a fully susceptible population.
inline Mat normalize_mixing(const Mat& M, const Vec& N) {
  if (M.rows() != M.cols() || M.rows() != N.size()) throw ConfigurationError("mixing matrix must be A x A");
  if ((M.array() < 0.0).any()) throw ConfigurationError("mixing matrix entries must be nonnegative");
  const Mat K = N.asDiagonal() * M;
  const double rho = Eigen::EigenSolver<Mat>(K, false).eigenvalues().cwiseAbs().maxCoeff();
  if (!(rho > 0.0)) throw ConfigurationError("mixing matrix has zero spectral radius");
  return M / rho;
}

/// Piecewise-constant multipliers of a baseline contact matrix. Segment 0 has multiplier 1;
/// segment j starts at breakpoints[j-1] (days).
struct MixingSchedule {
  Mat baseline;
  std::vector<double> breakpoints;

  std::size_t segments() const { return breakpoints.size() + 1; }

  std::size_t segment_at(double t) const {
    return static_cast<std::size_t>(std::upper_bound(breakpoints.begin(), breakpoints.end(), t) - breakpoints.begin());
  }

  /// multipliers[j-1] scales segment j.
  double multiplier_at(double t, std::span<const double> multipliers) const {
    const auto j = segment_at(t);
    return j == 0 ? 1.0 : multipliers[j - 1];
  }
};

enum class FoiPlacement {
  Inside,   // lambda = 1 - prod_b (1 - dt M R0 / d_I)^{I_b}
  Outside,  // lambda = dt (1 - prod_b (1 - M R0 / d_I)^{I_b})
};

/// Per-interval infection probability for each age group.
inline Vec force_of_infection(const Vec& I, const Mat& M, double R0, double d_I, double dt,
                              FoiPlacement placement = FoiPlacement::Inside) {
  const double c = (placement == FoiPlacement::Inside ? dt : 1.0) * R0 / d_I;
  const auto A = I.size();
  Vec lambda(A);
  for (Eigen::Index a = 0; a < A; ++a) {
    double log_escape = 0.0;
    for (Eigen::Index b = 0; b < A; ++b) {
      if (I[b] == 0.0) continue;
      const double x = c * M(a, b);
      if (!(x < 1.0))
        throw ParameterRegimeError("Reed-Frost escape probability 1 - M R0/d_I is not positive; reduce R0 or dt");
      log_escape += I[b] * std::log1p(-x);
    }
    lambda[a] = -std::expm1(log_escape);
    if (placement == FoiPlacement::Outside) lambda[a] *= dt;
  }
  return lambda;
}

struct SeirState {
  Vec S, E, I;
};

struct StepResult {
  SeirState next;
  Vec delta;  // new infections during the step
};

/// One Euler step given the interval infection probability lambda.
inline StepResult step_dynamics(const SeirState& s, const Vec& lambda, double d_L, double d_I, double dt) {
  StepResult r;
  r.delta = lambda.cwiseProduct(s.S);
  const Vec leave_E = (dt / d_L) * s.E;
  const Vec leave_I = (dt / d_I) * s.I;
  r.next.S = s.S - r.delta;
  r.next.E = s.E + r.delta - leave_E;
  r.next.I = s.I + leave_E - leave_I;
  constexpr double tol = -1e-9;
  if (r.next.S.minCoeff() < tol || r.next.E.minCoeff() < tol || r.next.I.minCoeff() < tol)
    throw StepSizeError("negative compartment after an Euler step; use a smaller dt");
  return r;
}

/// I0 split by `weights`; E from the exponential-growth ratio E/I = (d_L/d_I)(1 + phi d_I).
inline SeirState initialize_state(double I0, double phi, double d_L, double d_I, const Vec& N, Vec weights) {
  if (!(I0 > 0.0)) throw DomainError("initial infectious mass I0 must be positive");
  if (weights.size() == 0) weights = N;
  if (weights.size() != N.size() || (weights.array() < 0.0).any() || !(weights.sum() > 0.0))
    throw ConfigurationError("initial age weights must be nonnegative with positive sum, one per age group");
  weights /= weights.sum();
  SeirState s;
  s.I = I0 * weights;
  s.E = s.I * (d_L / d_I) * (1.0 + phi * d_I);
  s.S = N - s.E - s.I;
  if (s.S.minCoeff() < 0.0) throw DomainError("initial infections exceed the population of an age group");
  return s;
}

/// Series indexed by step k = 0..K (rows) and age (columns).
struct Trajectory {
  Mat S, E, I, delta;  // delta(k) = infections in [t_{k-1}, t_k); delta(0) = 0
  Vec N;

  std::size_t steps() const { return static_cast<std::size_t>(S.rows()) - 1; }
  std::size_t ages() const { return static_cast<std::size_t>(S.cols()); }
};

struct DynamicsInputs {
  double R0 = 1.0;
  double phi = 0.0;
  double I0 = 1.0;
  double d_I = 2.0;
  double d_L = 2.0;
  double dt = 0.5;
  double t0 = 0.0;
  std::size_t steps = 1;
  Vec N;
  Vec initial_weights;  // empty = population share
  MixingSchedule mixing;
  std::vector<double> multipliers;
  FoiPlacement placement = FoiPlacement::Inside;
};

inline Trajectory simulate_trajectory(const DynamicsInputs& in) {
  if (!(in.d_L > 0.0)) throw DomainError("dynamics need a positive latent period");
  if (in.multipliers.size() + 1 != in.mixing.segments())
    throw ConfigurationError("need one mixing multiplier per breakpoint");
  const auto A = in.N.size();
  const auto K = static_cast<Eigen::Index>(in.steps);
  Trajectory tr;
  tr.N = in.N;
  tr.S.resize(K + 1, A);
  tr.E.resize(K + 1, A);
  tr.I.resize(K + 1, A);
  tr.delta = Mat::Zero(K + 1, A);
  SeirState s = initialize_state(in.I0, in.phi, in.d_L, in.d_I, in.N, in.initial_weights);
  tr.S.row(0) = s.S;
  tr.E.row(0) = s.E;
  tr.I.row(0) = s.I;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double t = in.t0 + static_cast<double>(k) * in.dt;
    const double m = in.mixing.multiplier_at(t, in.multipliers);
    const Vec lambda = force_of_infection(s.I, m * in.mixing.baseline, in.R0, in.d_I, in.dt, in.placement);
    auto r = step_dynamics(s, lambda, in.d_L, in.d_I, in.dt);
    s = std::move(r.next);
    tr.S.row(k + 1) = s.S;
    tr.E.row(k + 1) = s.E;
    tr.I.row(k + 1) = s.I;
    tr.delta.row(k + 1) = r.delta;
  }
  return tr;
}

}  // namespace episynth::transmission
