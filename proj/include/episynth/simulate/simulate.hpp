#pragma once

// Forward simulation of both case studies plus an event-level immigration-death
// oracle. Every generator is a pure function of its seed.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "episynth/core/error.hpp"
#include "episynth/core/io.hpp"
#include "episynth/core/math.hpp"
#include "episynth/core/parallel.hpp"
#include "episynth/core/random.hpp"
#include "episynth/core/types.hpp"
#include "episynth/severity/model.hpp"
#include "episynth/severity/pyramid.hpp"
#include "episynth/transmission/model.hpp"

namespace episynth::simulate {

inline constexpr const char* kFixtureVersion = "1";

/// Streams together with the parameters that generated them.
struct SyntheticData {
  std::vector<DataStream> streams;
  io::json truth;

  const DataStream& stream(const std::string& name) const {
    for (const auto& s : streams)
      if (s.name == name) return s;
    throw ConfigurationError("no simulated stream named '" + name + "'");
  }
};

inline Count draw_binomial(Count n, double p, Rng& rng) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<Count>(n, p)(rng);
}

/// Negative binomial with the given mean and size (gamma-Poisson mixture); inf size is Poisson.
inline Count draw_negbin(double mean, double size, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  double rate = mean;
  if (std::isfinite(size)) rate = std::gamma_distribution<double>(size, mean / size)(rng);
  return rate > 0.0 ? std::poisson_distribution<Count>(rate)(rng) : 0;
}

// ---- severity ---------------------------------------------------------------

struct SeveritySimulationConfig {
  std::vector<Count> population;
  /// params[wave - 1][age]; waves without an entry are not simulated.
  std::map<int, std::vector<severity::SeverityParams>> params;
  Count sero_tested = 500;
  double outcome_fraction = 1.0;  // share of detected hospitalisations with a known outcome
  std::optional<double> y_S_log_sd;  // if set, y_S is a log-scale point estimate with this sd
  double y_ICU_log_sd = 0.2;         // wave 3 ICU point estimate sd
  bool nested_binomial = false;
};

inline io::json params_to_json(const severity::SeverityParams& p) {
  return {{"pi_base", p.pi_baseline}, {"p_I|Pop", p.p_I_Pop}, {"p_S|I", p.p_S_I}, {"p_H|S", p.p_H_S},
          {"p_ICU|H", p.p_ICU_H},     {"p_D|H", p.p_D_H},     {"d_S", p.d_S},       {"d_H", p.d_H},
          {"d_D", p.d_D},             {"d_ICU", p.d_ICU}};
}

/// Per-age streams named like the severity data nodes ("y_H.a0.w1").
inline SyntheticData simulate_severity(const SeveritySimulationConfig& cfg, std::uint64_t seed) {
  SyntheticData out;
  out.truth["seed"] = seed;
  out.truth["population"] = cfg.population;
  if (!(cfg.outcome_fraction >= 0.0 && cfg.outcome_fraction <= 1.0))
    throw ConfigurationError("outcome fraction must lie in [0,1]");
  for (const auto& [w, per_age] : cfg.params) {
    if (per_age.size() != cfg.population.size())
      throw ConfigurationError("wave " + std::to_string(w) + " needs one parameter set per age group");
    for (std::size_t a = 0; a < per_age.size(); ++a) {
      const auto& p = per_age[a];
      p.validate();
      Rng rng = make_rng(seed, static_cast<std::uint64_t>(w), a);
      const auto s = cfg.nested_binomial ? severity::pyramid_counts_nested(p, cfg.population[a], rng)
                                         : severity::pyramid_counts(p, cfg.population[a]);
      auto name = [&](const std::string& role) { return severity::node_name(role, a, w); };
      auto emit = [&](const std::string& role, StreamKind kind, double value, std::optional<double> denom) {
        out.streams.push_back(DataStream{name(role), kind, {{0, a, value, denom}}});
      };
      auto point_estimate = [&](const std::string& role, double N, double sd) {
        if (!(N > 0.0)) throw DomainError("cannot draw a log-scale estimate of a zero count (" + name(role) + ")");
        emit(role, StreamKind::PointEstimateLogScale, std::normal_distribution<double>(std::log(N), sd)(rng), sd);
      };
      if (w == 1) {
        emit("sero_base", StreamKind::SeroPrevalence, static_cast<double>(draw_binomial(cfg.sero_tested, p.pi_baseline, rng)),
             static_cast<double>(cfg.sero_tested));
        emit("sero_post", StreamKind::SeroPrevalence, static_cast<double>(draw_binomial(cfg.sero_tested, p.pi(), rng)),
             static_cast<double>(cfg.sero_tested));
      }
      if (w == 3) point_estimate("y_S", static_cast<double>(s.N_S), cfg.y_S_log_sd.value_or(0.3));
      else if (cfg.y_S_log_sd) point_estimate("y_S", p.d_S * static_cast<double>(s.N_S), *cfg.y_S_log_sd);
      else emit("y_S", StreamKind::GPConsultations, static_cast<double>(draw_binomial(s.N_S, p.d_S, rng)), std::nullopt);
      const Count y_H = draw_binomial(s.N_H, p.d_H, rng);
      emit("y_H", StreamKind::HospAdmissions, static_cast<double>(y_H), std::nullopt);
      emit("y_D", StreamKind::Deaths, static_cast<double>(draw_binomial(s.N_D, p.d_D, rng)), std::nullopt);
      const Count outcome = static_cast<Count>(std::floor(cfg.outcome_fraction * static_cast<double>(y_H)));
      emit("y_ICU|H", StreamKind::HospAdmissions, static_cast<double>(draw_binomial(outcome, p.p_ICU_H, rng)),
           static_cast<double>(outcome));
      emit("y_D|H", StreamKind::Deaths, static_cast<double>(draw_binomial(outcome, p.p_D_H, rng)),
           static_cast<double>(outcome));
      if (w == 3) point_estimate("y_ICU_hat", std::floor(p.d_ICU * static_cast<double>(s.N_ICU)), cfg.y_ICU_log_sd);

      auto& t = out.truth["waves"][std::to_string(w)][a];
      t["params"] = params_to_json(p);
      t["counts"] = {{"N_I", s.N_I}, {"N_S", s.N_S}, {"N_H", s.N_H}, {"N_ICU", s.N_ICU}, {"N_D", s.N_D}};
    }
  }
  return out;
}

// ---- transmission -----------------------------------------------------------

struct TransmissionSimulationOptions {
  double viro_tested = 100.0;  // swabs per interval and age
  double sero_tested = 200.0;  // sera per sampled interval and age
  std::vector<std::size_t> sero_intervals;  // empty: every interval
  std::size_t first_interval = 0;
  std::optional<std::size_t> last_interval;  // exclusive; default all
};

/// Deterministic trajectory plus stochastic observations of every stream the model binds.
inline SyntheticData simulate_transmission(const transmission::TransmissionModel& model, std::span<const double> theta,
                                           const TransmissionSimulationOptions& opt, std::uint64_t seed) {
  const auto& cfg = model.config();
  const auto e = model.endpoints(theta);
  const std::size_t A = cfg.A(), V = cfg.intervals();
  const std::size_t last = std::min(opt.last_interval.value_or(V), V);
  Rng rng = make_rng(seed, 0x7a);
  DataStream yC{"y_C", StreamKind::ConfirmedCases, {}}, yG{"y_G", StreamKind::GPConsultations, {}},
      yP{"y_P", StreamKind::ViroPositivity, {}}, yS{"y_S", StreamKind::SeroPrevalence, {}};
  const std::vector<std::size_t> sero = opt.sero_intervals;
  for (std::size_t v = opt.first_interval; v < last; ++v) {
    const double eta = cfg.eta.at(cfg.interval_start(v));
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t i = v * A + a;
      if (cfg.confirmed_cases)
        yC.observations.push_back({v, a, static_cast<double>(draw_negbin(e.N_C[i], eta, rng)), std::nullopt});
      yG.observations.push_back({v, a, static_cast<double>(draw_negbin(e.psi_G[i], eta, rng)), std::nullopt});
      const double pP = e.psi_P[i] < 0.0 ? 0.0 : e.psi_P[i];
      const double nP = e.psi_P[i] < 0.0 ? 0.0 : opt.viro_tested;
      yP.observations.push_back({v, a, static_cast<double>(draw_binomial(to_count(nP), pP, rng)), nP});
      if (sero.empty() || std::find(sero.begin(), sero.end(), v) != sero.end())
        yS.observations.push_back(
            {v, a, static_cast<double>(draw_binomial(to_count(opt.sero_tested), e.psi_S[i], rng)), opt.sero_tested});
    }
  }
  SyntheticData out;
  if (cfg.confirmed_cases) out.streams.push_back(std::move(yC));
  out.streams.push_back(std::move(yG));
  out.streams.push_back(std::move(yP));
  out.streams.push_back(std::move(yS));
  out.truth["seed"] = seed;
  const auto names = model.graph().parameter_names();
  for (std::size_t k = 0; k < names.size(); ++k) out.truth["theta"][names[k]] = theta[k];
  out.truth["R0"] = transmission::R0_from_growth_rate(model.get(theta, "phi"), cfg.d_L, model.get(theta, "d_I"));
  out.truth["expected"] = {{"psi_G", e.psi_G}, {"psi_P", e.psi_P}, {"psi_S", e.psi_S}, {"N_B", e.N_B}};
  return out;
}

// ---- immigration-death oracle -------------------------------------------------

struct ImmigrationDeathSample {
  /// occupancy[r][k] at t = k * delta_t, k = 0..lambda.size()
  std::vector<std::vector<Count>> occupancy;
  /// first time occupancy reached zero (NaN if it never did within the horizon)
  std::vector<double> extinction_time;
};

struct ImmigrationDeathStart {
  std::optional<Count> fixed;  // exact starting occupancy
  double poisson_mean = 0.0;   // otherwise Poisson(poisson_mean)
};

/// Exact event-driven simulation: exponential waiting times with total rate lambda_t + mu n.
inline ImmigrationDeathSample brute_force_immigration_death(const std::vector<double>& lambda, double delta_t, double mu,
                                                            std::size_t replicates, std::uint64_t seed,
                                                            ImmigrationDeathStart start = {},
                                                            std::size_t threads = default_threads()) {
  if (replicates < 10000) throw ConfigurationError("the immigration-death oracle needs at least 1e4 replicates");
  if (!(mu > 0.0)) throw DomainError("exit rate mu must be positive");
  if (!(delta_t > 0.0)) throw DomainError("step must be positive");
  for (double l : lambda)
    if (!(l >= 0.0)) throw DomainError("admission rate must be nonnegative");
  ImmigrationDeathSample out;
  out.occupancy.assign(replicates, std::vector<Count>(lambda.size() + 1));
  out.extinction_time.assign(replicates, std::numeric_limits<double>::quiet_NaN());
  parallel_for(replicates, threads, [&](std::size_t r) {
    Rng rng = make_rng(seed, 0x1d, r);
    Count n = start.fixed ? *start.fixed
                          : (start.poisson_mean > 0.0 ? std::poisson_distribution<Count>(start.poisson_mean)(rng) : 0);
    auto& occ = out.occupancy[r];
    occ[0] = n;
    if (n == 0) out.extinction_time[r] = 0.0;
    for (std::size_t k = 0; k < lambda.size(); ++k) {
      double t = static_cast<double>(k) * delta_t;
      const double end = t + delta_t;
      for (;;) {
        const double rate = lambda[k] + mu * static_cast<double>(n);
        if (rate <= 0.0) break;
        t += std::exponential_distribution<double>(rate)(rng);
        if (t >= end) break;
        if (uniform01(rng) * rate < lambda[k]) ++n;
        else {
          --n;
          if (n == 0 && std::isnan(out.extinction_time[r])) out.extinction_time[r] = t;
        }
      }
      occ[k + 1] = n;
    }
  });
  return out;
}

/// Pearson chi-square goodness of fit of counts against Poisson(mean); cells pooled so
/// each expected count is at least 5. Returns the upper-tail p-value.
inline double poisson_gof_pvalue(std::span<const Count> draws, double mean) {
  if (draws.empty()) throw ConfigurationError("goodness of fit needs draws");
  const double n = static_cast<double>(draws.size());
  std::map<Count, double> observed;
  for (Count c : draws) observed[c] += 1.0;
  // cells 0..K-1 then a pooled upper tail [K, inf)
  std::vector<double> obs, expct;
  double cdf = 0.0, acc_obs = 0.0, acc_exp = 0.0;
  for (Count k = 0;; ++k) {
    const double pk = std::exp(poisson_logpmf(k, mean));
    acc_exp += n * pk;
    acc_obs += observed.count(k) ? observed[k] : 0.0;
    cdf += pk;
    if (acc_exp >= 5.0) {
      obs.push_back(acc_obs);
      expct.push_back(acc_exp);
      acc_obs = acc_exp = 0.0;
    }
    if (n * (1.0 - cdf) < 5.0) {
      double tail_obs = 0.0;
      for (const auto& [c, m] : observed)
        if (c > k) tail_obs += m;
      const double tail_exp = n * std::max(0.0, 1.0 - cdf);
      if (obs.empty()) {
        obs.push_back(0.0);
        expct.push_back(0.0);
      }
      obs.back() += acc_obs + tail_obs;
      expct.back() += acc_exp + tail_exp;
      break;
    }
  }
  if (obs.size() < 2) throw ConfigurationError("too few cells for a chi-square test");
  double x2 = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) x2 += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
  boost::math::chi_squared dist(static_cast<double>(obs.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, x2));
}

// ---- fixtures -----------------------------------------------------------------

/// Writes one CSV per stream, truth.json and manifest.json (with per-file and overall SHA-256).
inline std::string write_fixture(const std::filesystem::path& dir, const SyntheticData& data, const io::json& config = {}) {
  std::filesystem::create_directories(dir);
  io::json manifest;
  manifest["fixture_version"] = kFixtureVersion;
  if (!config.is_null()) manifest["config"] = config;
  auto add = [&](const std::string& file, const std::string& text) {
    io::write_text(dir / file, text);
    manifest["files"][file] = io::sha256_hex(text);
  };
  for (const auto& s : data.streams) {
    add(s.name + ".csv", io::stream_to_csv(s));
    manifest["streams"].push_back({{"name", s.name}, {"kind", std::string(to_string(s.kind))}, {"file", s.name + ".csv"}});
  }
  add("truth.json", data.truth.dump(2) + "\n");
  std::string digest_input;  // files are keyed in sorted order
  for (const auto& [file, h] : manifest["files"].items()) digest_input += file + ":" + h.get<std::string>() + "\n";
  manifest["hash"] = io::sha256_hex(digest_input);
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest["hash"];
}

/// Reads a fixture back; throws IoError when any file no longer matches its recorded hash.
inline SyntheticData read_fixture(const std::filesystem::path& dir) {
  const auto manifest = io::parse_json_file(dir / "manifest.json");
  std::string digest_input;
  for (const auto& [file, h] : io::require(manifest, "files", "manifest").items()) {
    const auto text = io::read_text(dir / file);
    if (io::sha256_hex(text) != h.get<std::string>()) throw IoError((dir / file).string(), "fixture file changed since it was written");
    digest_input += file + ":" + h.get<std::string>() + "\n";
  }
  if (io::sha256_hex(digest_input) != io::get_as<std::string>(manifest, "hash", "manifest"))
    throw IoError((dir / "manifest.json").string(), "fixture manifest hash mismatch");
  SyntheticData out;
  for (const auto& s : manifest.value("streams", io::json::array()))
    out.streams.push_back(io::read_stream_csv(dir / s.at("file").get<std::string>(), s.at("name").get<std::string>(),
                                              stream_kind_from_string(s.at("kind").get<std::string>())));
  out.truth = io::parse_json_file(dir / "truth.json");
  return out;
}

}  // namespace episynth::simulate
