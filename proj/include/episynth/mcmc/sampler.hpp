#pragma once

// Adaptive random-walk Metropolis on the unconstrained scale.
//
// Burn-in runs in two phases: a diagonal proposal whose global scale follows
// Robbins-Monro toward the target acceptance rate, then (after the adaptation
// window) a proposal covariance (2.38^2/d)(Sigma_t + eps I) from the running
// empirical covariance, still globally rescaled. Everything is frozen once
// burn-in ends, so stored draws come from a fixed Markov kernel.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "episynth/core/error.hpp"
#include "episynth/core/log.hpp"
#include "episynth/core/parallel.hpp"
#include "episynth/core/random.hpp"
#include "episynth/mcmc/posterior.hpp"

namespace episynth::mcmc {

/// A differentiable-free target on R^d: log density in unconstrained coordinates
/// (Jacobian included) plus the map back to natural parameters.
template <class M>
concept LogDensityModel = requires(const M& m, std::span<const double> x) {
  { m.dimension() } -> std::convertible_to<std::size_t>;
  { m.log_density(x) } -> std::convertible_to<double>;
  { m.to_natural(x) } -> std::convertible_to<std::vector<double>>;
  { m.to_unconstrained(x) } -> std::convertible_to<std::vector<double>>;
  { m.parameter_names() } -> std::convertible_to<std::vector<std::string>>;
};

template <class M>
concept HasInitialPoint = requires(const M& m, Rng& rng) {
  { m.initial_natural(rng) } -> std::convertible_to<std::vector<double>>;
};

template <class M>
concept HasNodeLikelihoods = requires(const M& m, std::span<const double> theta) {
  { m.node_log_likelihoods(theta) } -> std::convertible_to<std::vector<double>>;
  { m.data_node_names() } -> std::convertible_to<std::vector<std::string>>;
};

struct ChainConfig {
  std::size_t iterations = 20000;  // total, including burn-in
  std::size_t burn_in = 5000;
  std::size_t thinning = 1;
  std::uint64_t seed = 1;
  std::size_t adaptation_window = 500;  // iterations before covariance adaptation starts
  double target_acceptance = 0.234;
  double initial_scale = 0.1;
  std::size_t initialization_tries = 200;
  std::size_t initial_candidates = 20;  // finite starting draws compared by log posterior
  std::optional<std::vector<double>> initial;  // natural scale
  bool record_node_likelihoods = true;

  void validate() const {
    if (!(iterations > burn_in)) throw ConfigurationError("chain needs iterations > burn-in");
    if (thinning < 1) throw ConfigurationError("thinning must be >= 1");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
      throw ConfigurationError("target acceptance must lie in (0,1)");
    if (!(initial_scale > 0.0)) throw ConfigurationError("initial proposal scale must be positive");
    if (initial_candidates < 1) throw ConfigurationError("need at least one initial candidate");
  }
};

namespace detail {

class RunningCovariance {
 public:
  explicit RunningCovariance(std::size_t d) : mean_(Eigen::VectorXd::Zero(d)), m2_(Eigen::MatrixXd::Zero(d, d)) {}
  void add(const Eigen::VectorXd& x) {
    ++n_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_).transpose();
  }
  std::size_t count() const noexcept { return n_; }
  Eigen::MatrixXd covariance() const {
    return n_ > 1 ? Eigen::MatrixXd(m2_ / static_cast<double>(n_ - 1)) : Eigen::MatrixXd::Zero(mean_.size(), mean_.size());
  }

 private:
  std::size_t n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
};

// Joint prior draws rarely satisfy every data constraint at once when the model
// has many independent blocks. Redraw one coordinate at a time and keep moves
// that do not increase the number of infeasible data nodes.
template <LogDensityModel M, class Finite>
std::optional<std::vector<double>> repair_start(const M& model, const ChainConfig& cfg, Rng& rng, const Finite& finite_at) {
  auto infeasible = [&](const std::vector<double>& natural) {
    std::size_t bad = 0;
    try {
      for (double v : model.node_log_likelihoods(natural))
        if (!std::isfinite(v)) ++bad;
    } catch (const Error&) {
      return std::numeric_limits<std::size_t>::max();
    }
    return bad;
  };
  std::vector<double> cur = model.initial_natural(rng);
  std::size_t bad = infeasible(cur);
  const std::size_t d = cur.size();
  for (std::size_t round = 0; round < cfg.initialization_tries; ++round) {
    if (bad == 0 && finite_at(cur)) return cur;
    for (std::size_t i = 0; i < d; ++i) {
      auto trial = cur;
      trial[i] = model.initial_natural(rng)[i];
      const auto b = infeasible(trial);
      if (b <= bad) {
        cur = std::move(trial);
        bad = b;
      }
    }
  }
  if (bad == 0 && finite_at(cur)) return cur;
  return std::nullopt;
}

// Coordinate-wise stochastic climb from the chosen start toward the bulk of
// the posterior, so adaptation does not begin far out in a flat tail.
template <LogDensityModel M>
std::vector<double> climb(const M& model, std::vector<double> x, Rng& rng) {
  std::normal_distribution<double> z;
  double lp = model.log_density(x);
  for (double step : {1.0, 0.3, 0.1, 0.03})
    for (int round = 0; round < 50; ++round)
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double old = x[i];
        x[i] += step * z(rng);
        const double trial = model.log_density(x);
        if (trial > lp)
          lp = trial;
        else
          x[i] = old;
      }
  return x;
}

template <LogDensityModel M>
std::vector<double> find_start(const M& model, const ChainConfig& cfg, Rng& rng) {
  auto finite_at = [&](const std::vector<double>& natural) {
    const auto x = model.to_unconstrained(natural);
    for (double v : x)
      if (!std::isfinite(v)) return false;
    return std::isfinite(model.log_density(x));
  };
  if (cfg.initial) {
    if (cfg.initial->size() != model.dimension()) throw InitializationError("initial point has wrong dimension");
    if (!finite_at(*cfg.initial)) throw InitializationError("supplied initial point has non-finite posterior density");
    return model.to_unconstrained(*cfg.initial);
  }
  if constexpr (HasInitialPoint<M>) {
    // best of the first few finite draws
    std::vector<double> best;
    double best_lp = kNegInf;
    std::size_t found = 0;
    for (std::size_t k = 0; k < cfg.initialization_tries && found < cfg.initial_candidates; ++k) {
      auto natural = model.initial_natural(rng);
      if (!finite_at(natural)) continue;
      ++found;
      auto x = model.to_unconstrained(natural);
      const double lp = model.log_density(x);
      if (lp > best_lp) {
        best_lp = lp;
        best = std::move(x);
      }
    }
    if (found > 0) return climb(model, std::move(best), rng);
    if constexpr (HasNodeLikelihoods<M>)
      if (auto repaired = repair_start(model, cfg, rng, finite_at)) return climb(model, model.to_unconstrained(*repaired), rng);
    throw InitializationError("no finite-posterior starting point after " + std::to_string(cfg.initialization_tries) +
                              " prior draws");
  } else {
    std::normal_distribution<double> z;
    for (std::size_t k = 0; k < cfg.initialization_tries; ++k) {
      std::vector<double> x(model.dimension());
      for (auto& v : x) v = z(rng);
      if (std::isfinite(model.log_density(x))) return x;
    }
    throw InitializationError("no finite-posterior starting point found");
  }
}

}  // namespace detail

template <LogDensityModel M>
PosteriorSample run_chain(const M& model, const ChainConfig& cfg) {
  cfg.validate();
  const std::size_t d = model.dimension();
  if (d == 0) throw ConfigurationError("model has no parameters");
  Rng rng = make_rng(cfg.seed);
  std::normal_distribution<double> normal;

  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(detail::find_start(model, cfg, rng).data(), d);
  auto log_density = [&](const Eigen::VectorXd& v) {
    return model.log_density(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  };
  double lp = log_density(x);

  PosteriorSample out;
  out.names = model.parameter_names();
  if constexpr (HasNodeLikelihoods<M>)
    if (cfg.record_node_likelihoods) out.data_nodes = model.data_node_names();

  detail::RunningCovariance history(d);
  const double base = 2.38 * 2.38 / static_cast<double>(d);
  double log_scale = 0.0;
  Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(d, d) * cfg.initial_scale;
  bool covariance_phase = false;
  std::size_t accepted_after_burn = 0;

  auto refresh_cholesky = [&] {
    Eigen::MatrixXd cov = history.covariance();
    const double eps = 1e-10 + 1e-6 * cov.trace() / static_cast<double>(d);
    cov = base * (cov + eps * Eigen::MatrixXd::Identity(d, d));
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) chol = llt.matrixL();
  };

  Eigen::VectorXd z(d), proposal(d);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const bool adapting = t < cfg.burn_in;
    for (std::size_t i = 0; i < d; ++i) z[static_cast<Eigen::Index>(i)] = normal(rng);
    proposal = x + std::exp(log_scale) * (chol * z);
    const double lp_new = log_density(proposal);
    const double log_alpha = lp_new - lp;
    const bool accept = std::isfinite(lp_new) && (log_alpha >= 0.0 || std::log(uniform01(rng)) < log_alpha);
    if (accept) {
      x = proposal;
      lp = lp_new;
    }
    if (adapting) {
      const double alpha = std::isfinite(lp_new) ? std::min(1.0, std::exp(std::min(0.0, log_alpha))) : 0.0;
      log_scale += (alpha - cfg.target_acceptance) / std::pow(static_cast<double>(t) + 1.0, 0.6);
      log_scale = std::clamp(log_scale, -20.0, 20.0);
      // The first half of the window is treated as transient and kept out of the covariance.
      if (t >= cfg.adaptation_window / 2) history.add(x);
      if (t + 1 >= cfg.adaptation_window && history.count() > d) {
        if (!covariance_phase) {
          covariance_phase = true;
          log_scale = 0.0;
        }
        if ((t + 1) % 20 == 0 || d <= 3) refresh_cholesky();
      }
    } else {
      if (accept) ++accepted_after_burn;
      if ((t - cfg.burn_in) % cfg.thinning == 0) {
        const std::span<const double> xs(x.data(), d);
        auto natural = model.to_natural(xs);
        if constexpr (HasNodeLikelihoods<M>)
          if (cfg.record_node_likelihoods) out.node_log_likelihood.push_back(model.node_log_likelihoods(natural));
        out.draws.push_back(std::move(natural));
        out.log_posterior.push_back(lp);
      }
    }
  }
  out.acceptance_rate = static_cast<double>(accepted_after_burn) / static_cast<double>(cfg.iterations - cfg.burn_in);
  log::info("event=chain_done seed={} draws={} acceptance={:.3f}", cfg.seed, out.size(), out.acceptance_rate);
  return out;
}

/// Independent chains with seeds derived from cfg.seed; run `threads` at a time.
template <LogDensityModel M>
std::vector<PosteriorSample> run_chains(const M& model, const ChainConfig& cfg, std::size_t chains,
                                        std::size_t threads = default_threads()) {
  std::vector<PosteriorSample> out(chains);
  parallel_for(chains, threads, [&](std::size_t c) {
    ChainConfig local = cfg;
    local.seed = make_rng(cfg.seed, 0x5eed, c)();
    out[c] = run_chain(model, local);
  });
  return out;
}

/// Concatenate chains (same parameter layout).
inline PosteriorSample pool_chains(const std::vector<PosteriorSample>& chains) {
  if (chains.empty()) throw DomainError("no chains to pool");
  PosteriorSample out = chains.front();
  double acc = chains.front().acceptance_rate * static_cast<double>(chains.front().size());
  for (std::size_t c = 1; c < chains.size(); ++c) {
    const auto& s = chains[c];
    out.draws.insert(out.draws.end(), s.draws.begin(), s.draws.end());
    out.log_posterior.insert(out.log_posterior.end(), s.log_posterior.begin(), s.log_posterior.end());
    out.node_log_likelihood.insert(out.node_log_likelihood.end(), s.node_log_likelihood.begin(), s.node_log_likelihood.end());
    acc += s.acceptance_rate * static_cast<double>(s.size());
  }
  out.acceptance_rate = acc / static_cast<double>(out.size());
  return out;
}

/// Split-R-hat per parameter over a set of chains.
inline std::vector<double> convergence_rhat(const std::vector<PosteriorSample>& chains) {
  std::vector<double> out;
  if (chains.empty()) return out;
  for (std::size_t j = 0; j < chains.front().dimension(); ++j) {
    std::vector<std::vector<double>> cols;
    for (const auto& c : chains) cols.push_back(c.column(j));
    out.push_back(stats::split_rhat(cols));
  }
  return out;
}

}  // namespace episynth::mcmc
