#pragma once

// Resample-move SMC over data batches with optional likelihood tempering.
// Particles live on the natural scale; jitter moves run on the unconstrained scale.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "episynth/core/error.hpp"
#include "episynth/core/io.hpp"
#include "episynth/core/log.hpp"
#include "episynth/core/parallel.hpp"
#include "episynth/core/random.hpp"
#include "episynth/mcmc/graph_posterior.hpp"
#include "episynth/mcmc/posterior.hpp"

namespace episynth::smc {

using Batch = std::vector<DataStream>;

inline double effective_sample_size(std::span<const double> w) {
  double s2 = 0.0;
  for (double v : w) s2 += v * v;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

/// Normalizes log weights in place and returns the weights. Throws when every weight is zero.
inline std::vector<double> normalize_log_weights(std::vector<double>& logw) {
  const double m = *std::max_element(logw.begin(), logw.end());
  if (!std::isfinite(m))
    throw DegenerateEnsembleError("all particle weights are zero; temper the batch (more steps) or add particles");
  double total = 0.0;
  for (double v : logw) total += std::exp(v - m);
  const double lse = m + std::log(total);
  std::vector<double> w(logw.size());
  for (std::size_t j = 0; j < logw.size(); ++j) {
    logw[j] -= lse;
    w[j] = std::exp(logw[j]);
  }
  return w;
}

/// Systematic resampling: one uniform, n evenly spaced pointers.
inline std::vector<std::size_t> systematic_resample(std::span<const double> w, Rng& rng) {
  const std::size_t n = w.size();
  std::vector<std::size_t> idx(n);
  const double u = uniform01(rng) / static_cast<double>(n);
  double cum = w[0];
  std::size_t i = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double p = u + static_cast<double>(j) / static_cast<double>(n);
    while (p > cum && i + 1 < n) cum += w[++i];
    idx[j] = i;
  }
  return idx;
}

struct ParticleEnsemble {
  std::vector<std::vector<double>> particles;  // natural scale
  std::vector<double> log_weights;             // normalized
  std::vector<double> weights;
  std::vector<double> loglik_past;  // absorbed batches
  std::vector<double> loglik_new;   // full log likelihood of the batch being introduced
  double gamma = 1.0;               // tempering exponent on loglik_new
  std::size_t batch_index = 0;      // batches fully absorbed

  std::size_t size() const noexcept { return particles.size(); }
  double ess() const { return effective_sample_size(weights); }
  std::size_t distinct() const {
    auto p = particles;
    std::sort(p.begin(), p.end());
    return static_cast<std::size_t>(std::unique(p.begin(), p.end()) - p.begin());
  }
};

struct SmcConfig {
  std::size_t particles = 1000;
  double resample_threshold = 0.5;  // resample when ESS < threshold * n
  std::size_t jitter_moves = 5;
  double jitter_scale = 2.38;       // proposal = (scale^2 / d) * ensemble covariance
  std::size_t temper_steps = 1;
  bool adaptive_temper = false;
  double adaptive_ess_fraction = 0.5;  // conditional ESS target for the adaptive ladder
  std::uint64_t seed = 1;
  std::size_t threads = default_threads();

  void validate() const {
    if (particles < 2) throw ConfigurationError("SMC needs at least 2 particles");
    if (!(resample_threshold >= 0.0 && resample_threshold <= 1.0))
      throw ConfigurationError("resample threshold must lie in [0,1]");
    if (temper_steps < 1) throw ConfigurationError("temper steps must be >= 1");
    if (!(adaptive_ess_fraction > 0.0 && adaptive_ess_fraction < 1.0))
      throw ConfigurationError("adaptive ESS fraction must lie in (0,1)");
  }
};

/// ESS recorded after each reweighting sub-step.
struct EssRecord {
  std::size_t batch = 0;
  double gamma = 0.0;
  double ess = 0.0;
  bool resampled = false;
  double jitter_acceptance = 0.0;
};

class SmcSampler {
 public:
  SmcSampler(ModelGraph graph, SmcConfig cfg) : target_(std::move(graph), {}), cfg_(cfg) { cfg_.validate(); }

  const mcmc::GraphPosterior& target() const noexcept { return target_; }
  const SmcConfig& config() const noexcept { return cfg_; }
  const std::vector<EssRecord>& trace() const noexcept { return trace_; }
  const std::vector<DataStream>& absorbed() const noexcept { return absorbed_; }

  ParticleEnsemble initialize() {
    const std::size_t n = cfg_.particles;
    ParticleEnsemble e;
    e.particles.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      auto rng = make_rng(cfg_.seed, 0, j);
      e.particles[j] = target_.graph().sample_prior(rng);
    }
    e.log_weights.assign(n, -std::log(static_cast<double>(n)));
    e.weights.assign(n, 1.0 / static_cast<double>(n));
    e.loglik_past.assign(n, 0.0);
    e.loglik_new.assign(n, 0.0);
    absorbed_.clear();
    trace_.clear();
    step_ = 0;
    return e;
  }

  /// Multiplies weights by exp(increment) and renormalizes.
  static void reweight(ParticleEnsemble& e, std::span<const double> increment) {
    for (std::size_t j = 0; j < e.size(); ++j) e.log_weights[j] += increment[j];
    e.weights = normalize_log_weights(e.log_weights);
  }

  /// Plain reweighting by a whole batch (no resampling).
  void reweight(ParticleEnsemble& e, const Batch& batch) {
    check_bindings(batch);
    const auto ll = batch_loglik(e, batch);
    reweight(e, ll);
    for (std::size_t j = 0; j < e.size(); ++j) e.loglik_past[j] += ll[j];
    absorb(e, batch);
    log::info("event=reweight batch={} ess={:.1f} n={}", e.batch_index, e.ess(), e.size());
  }

  /// Resamples when ESS < threshold * n (or always when forced), then jitters. Returns whether it resampled.
  bool resample_and_jitter(ParticleEnsemble& e, bool force = false) {
    const double ess = e.ess();
    if (!force && !(ess < cfg_.resample_threshold * static_cast<double>(e.size()))) return false;
    auto rng = make_rng(cfg_.seed, 1, step_++);
    const auto idx = systematic_resample(e.weights, rng);
    ParticleEnsemble r = e;
    for (std::size_t j = 0; j < e.size(); ++j) {
      r.particles[j] = e.particles[idx[j]];
      r.loglik_past[j] = e.loglik_past[idx[j]];
      r.loglik_new[j] = e.loglik_new[idx[j]];
    }
    const double n = static_cast<double>(e.size());
    r.log_weights.assign(e.size(), -std::log(n));
    r.weights.assign(e.size(), 1.0 / n);
    e = std::move(r);
    last_acceptance_ = jitter(e);
    return true;
  }

  /// Introduces a batch through a ladder of exponents, resampling and jittering between rungs.
  void temper_batch(ParticleEnsemble& e, const Batch& batch, std::size_t steps) {
    if (steps < 1) throw ConfigurationError("temper steps must be >= 1");
    check_bindings(batch);
    e.loglik_new = batch_loglik(e, batch);
    pending_ = &batch;
    double gamma = 0.0;
    for (std::size_t s = 1; gamma < 1.0; ++s) {
      const double next = cfg_.adaptive_temper ? next_gamma(e, gamma) : static_cast<double>(s) / static_cast<double>(steps);
      std::vector<double> inc(e.size());
      for (std::size_t j = 0; j < e.size(); ++j) inc[j] = (next - gamma) * e.loglik_new[j];
      reweight(e, inc);
      gamma = e.gamma = next;
      EssRecord rec{e.batch_index + 1, gamma, e.ess(), false, 0.0};
      // the adaptive ladder assumes equal weights at each rung
      rec.resampled = resample_and_jitter(e, cfg_.adaptive_temper);
      rec.jitter_acceptance = rec.resampled ? last_acceptance_ : 0.0;
      log::info("event=temper batch={} gamma={:.4f} ess={:.1f} resampled={} acc={:.3f}", rec.batch, gamma, rec.ess,
                rec.resampled, rec.jitter_acceptance);
      trace_.push_back(rec);
    }
    pending_ = nullptr;
    for (std::size_t j = 0; j < e.size(); ++j) {
      e.loglik_past[j] += e.loglik_new[j];
      e.loglik_new[j] = 0.0;
    }
    e.gamma = 1.0;
    absorb(e, batch);
  }

  /// Runs every batch in order with the configured ladder.
  ParticleEnsemble run(const std::vector<Batch>& batches) {
    auto e = initialize();
    for (const auto& b : batches) temper_batch(e, b, cfg_.temper_steps);
    return e;
  }

  /// log target at tempering exponent gamma for the pending batch: prior + past + gamma * new.
  double tempered_log_density(std::span<const double> x, double gamma, double* ll_past, double* ll_new) const {
    const auto theta = target_.to_natural(x);
    const double lp = target_.graph().log_prior(theta);
    if (!std::isfinite(lp)) return kNegInf;
    double past = 0.0, fresh = 0.0;
    try {
      auto ev = target_.graph().evaluate(theta);
      past = ev.log_likelihood(absorbed_);
      if (pending_ && gamma > 0.0) fresh = ev.log_likelihood(*pending_);
    } catch (const DomainError&) {
      return kNegInf;
    } catch (const ParameterRegimeError&) {
      return kNegInf;
    } catch (const StepSizeError&) {
      return kNegInf;
    }
    if (!std::isfinite(past) || !std::isfinite(fresh)) return kNegInf;
    if (ll_past) *ll_past = past;
    if (ll_new) *ll_new = fresh;
    return lp + past + gamma * fresh + target_.log_jacobian(x);
  }

 private:
  void check_bindings(const Batch& batch) const {
    for (const auto& s : batch)
      if (!target_.graph().data_node_for_stream(s.name))
        throw ConfigurationError("stream '" + s.name + "' is not bound to any data node");
  }

  std::vector<double> batch_loglik(const ParticleEnsemble& e, const Batch& batch) const {
    std::vector<double> ll(e.size());
    parallel_for(e.size(), cfg_.threads, [&](std::size_t j) { ll[j] = target_.log_likelihood(e.particles[j], batch); });
    return ll;
  }

  void absorb(ParticleEnsemble& e, const Batch& batch) {
    absorbed_.insert(absorbed_.end(), batch.begin(), batch.end());
    ++e.batch_index;
  }

  /// Largest gamma in (current, 1] whose incremental weights keep conditional ESS >= fraction * n.
  double next_gamma(const ParticleEnsemble& e, double current) const {
    auto cess = [&](double g) {
      std::vector<double> lw(e.size());
      for (std::size_t j = 0; j < e.size(); ++j) lw[j] = (g - current) * e.loglik_new[j];
      const double m = *std::max_element(lw.begin(), lw.end());
      if (!std::isfinite(m)) return 0.0;
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < e.size(); ++j) {
        const double v = std::exp(lw[j] - m);
        num += e.weights[j] * v;
        den += e.weights[j] * v * v;
      }
      return num * num / den;  // fraction of n
    };
    const double target = cfg_.adaptive_ess_fraction;
    if (cess(1.0) >= target) return 1.0;
    double lo = current, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cess(mid) >= target ? lo : hi) = mid;
    }
    return std::max(lo, current + 1e-6);
  }

  /// cfg.jitter_moves random-walk MH moves per particle; proposal from the ensemble covariance.
  double jitter(ParticleEnsemble& e) {
    const std::size_t n = e.size(), d = target_.dimension();
    if (cfg_.jitter_moves == 0 || d == 0) return 0.0;
    std::vector<std::vector<double>> x(n);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < n; ++j) {
      x[j] = target_.to_unconstrained(e.particles[j]);
      mean += Eigen::Map<const Eigen::VectorXd>(x[j].data(), static_cast<Eigen::Index>(d));
    }
    mean /= static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < n; ++j) {
      const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(x[j].data(), static_cast<Eigen::Index>(d)) - mean;
      cov += c * c.transpose();
    }
    cov /= static_cast<double>(n - 1);
    cov += 1e-10 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    cov *= cfg_.jitter_scale * cfg_.jitter_scale / static_cast<double>(d);
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw ConfigurationError("ensemble covariance is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    const double gamma = e.gamma;
    const std::uint64_t step = step_++;
    std::vector<std::size_t> accepted(n, 0);
    parallel_for(n, cfg_.threads, [&](std::size_t j) {
      auto rng = make_rng(cfg_.seed, 2 + step, j);
      std::normal_distribution<double> z;
      double past = 0.0, fresh = 0.0;
      double lp = tempered_log_density(x[j], gamma, &past, &fresh);
      Eigen::VectorXd cur = Eigen::Map<const Eigen::VectorXd>(x[j].data(), static_cast<Eigen::Index>(d));
      for (std::size_t m = 0; m < cfg_.jitter_moves; ++m) {
        Eigen::VectorXd eps(static_cast<Eigen::Index>(d));
        for (auto& v : eps) v = z(rng);
        const Eigen::VectorXd prop = cur + L * eps;
        double pp = 0.0, pf = 0.0;
        const double lq = tempered_log_density(std::span<const double>(prop.data(), d), gamma, &pp, &pf);
        if (std::log(uniform01(rng)) < lq - lp) {
          cur = prop;
          lp = lq;
          past = pp;
          fresh = pf;
          ++accepted[j];
        }
      }
      e.particles[j] = target_.to_natural(std::span<const double>(cur.data(), d));
      e.loglik_past[j] = past;
      if (pending_) e.loglik_new[j] = fresh;
    });
    const double rate = static_cast<double>(std::accumulate(accepted.begin(), accepted.end(), std::size_t{0})) /
                        static_cast<double>(n * cfg_.jitter_moves);
    if (rate < 0.01) log::warn("event=jitter_stuck acceptance={:.4f} proposal_scale={} hint=reduce_jitter_scale", rate, cfg_.jitter_scale);
    return rate;
  }

  mcmc::GraphPosterior target_;
  SmcConfig cfg_;
  std::vector<DataStream> absorbed_;
  const Batch* pending_ = nullptr;
  std::vector<EssRecord> trace_;
  std::uint64_t step_ = 0;
  double last_acceptance_ = 0.0;
};

struct WeightedSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
  double mcse = 0.0;  // sd / sqrt(ESS)
};

inline std::vector<WeightedSummary> summarize(const ParticleEnsemble& e, const std::vector<std::string>& names) {
  std::vector<WeightedSummary> out;
  const double ess = e.ess();
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<double> col(e.size());
    for (std::size_t j = 0; j < e.size(); ++j) col[j] = e.particles[j][i];
    WeightedSummary s;
    s.name = names[i];
    s.mean = stats::weighted_mean(col, e.weights);
    double v = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) v += e.weights[j] * (col[j] - s.mean) * (col[j] - s.mean);
    s.sd = std::sqrt(v);
    s.q025 = stats::weighted_quantile(col, e.weights, 0.025);
    s.median = stats::weighted_quantile(col, e.weights, 0.5);
    s.q975 = stats::weighted_quantile(col, e.weights, 0.975);
    s.mcse = s.sd / std::sqrt(ess);
    out.push_back(s);
  }
  return out;
}

inline std::string summary_to_csv(const std::vector<WeightedSummary>& rows) {
  std::string out = "parameter,mean,sd,q2.5,median,q97.5,mcse\n";
  for (const auto& r : rows)
    out += r.name + "," + io::format_double(r.mean) + "," + io::format_double(r.sd) + "," + io::format_double(r.q025) + "," +
           io::format_double(r.median) + "," + io::format_double(r.q975) + "," + io::format_double(r.mcse) + "\n";
  return out;
}

inline std::string trace_to_csv(const std::vector<EssRecord>& trace) {
  std::string out = "batch,gamma,ess,resampled,jitter_acceptance\n";
  for (const auto& r : trace)
    out += std::to_string(r.batch) + "," + io::format_double(r.gamma) + "," + io::format_double(r.ess) + "," +
           (r.resampled ? "1" : "0") + "," + io::format_double(r.jitter_acceptance) + "\n";
  return out;
}

}  // namespace episynth::smc
