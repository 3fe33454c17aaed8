#pragma once

// Transmission evidence synthesis: SEIR dynamics -> delayed health-care endpoints ->
// four observation streams (confirmed cases, GP consultations, positivity, sero-prevalence).
//
// Observation time_index is the reporting interval v (report_steps dt-steps wide); the
// sero stream at v refers to the susceptibles at the end of interval v.

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "episynth/core/graph.hpp"
#include "episynth/core/io.hpp"
#include "episynth/core/math.hpp"
#include "episynth/transmission/delay.hpp"
#include "episynth/transmission/dynamics.hpp"

namespace episynth::transmission {

/// Values on [breakpoints[j-1], breakpoints[j]) days.
struct PiecewiseConstant {
  std::vector<double> breakpoints;
  std::vector<double> values{1.0};

  double at(double t) const {
    const auto j = static_cast<std::size_t>(std::upper_bound(breakpoints.begin(), breakpoints.end(), t) - breakpoints.begin());
    return values.at(j);
  }
  void validate(const std::string& what) const {
    if (values.size() != breakpoints.size() + 1)
      throw ConfigurationError(what + ": need one value per segment (breakpoints + 1)");
    if (!std::is_sorted(breakpoints.begin(), breakpoints.end())) throw ConfigurationError(what + ": breakpoints must increase");
  }
};

struct TransmissionConfig {
  AgeStructure ages = AgeStructure::numbered(1);
  Vec population;
  double t0 = 0.0;
  double dt = 0.5;
  std::size_t steps = 240;
  std::size_t report_steps = 2;
  double d_L = 2.0;
  Mat mixing_baseline;             // A x A; empty = homogeneous
  std::vector<double> mixing_breakpoints;
  bool normalize_mixing = true;
  Vec initial_weights;             // empty = population share
  DelaySpec gp_delay;
  DelaySpec confirmation_delay;
  std::vector<double> p_G_breakpoints;
  PiecewiseConstant eta{{}, {std::numeric_limits<double>::infinity()}};
  int background_degree = 1;       // time polynomial degree for log N_B (age intercepts + shared trend)
  std::optional<std::vector<double>> fixed_background;  // coefficients; if set, beta_B is not estimated
  bool confirmed_cases = true;
  FoiPlacement placement = FoiPlacement::Inside;
  std::map<std::string, PriorSpec> priors;
  std::map<std::string, double> known;  // held fixed, not sampled: d_I, p_Sym, p_C, I0

  std::size_t A() const { return ages.size(); }
  std::size_t intervals() const { return steps / report_steps; }
  std::size_t background_size() const { return A() + static_cast<std::size_t>(background_degree); }
  double interval_start(std::size_t v) const { return t0 + static_cast<double>(v * report_steps) * dt; }

  void validate() const {
    ages.require_length(static_cast<std::size_t>(population.size()), "population");
    if ((population.array() <= 0.0).any()) throw ConfigurationError("population sizes must be positive");
    if (!(dt > 0.0)) throw ConfigurationError("dt must be positive");
    if (steps == 0 || report_steps == 0 || steps % report_steps != 0)
      throw ConfigurationError("steps must be a positive multiple of report_steps");
    if (!(d_L > 0.0)) throw ConfigurationError("latent period must be positive");
    if (mixing_baseline.size() != 0 && (mixing_baseline.rows() != population.size() || mixing_baseline.cols() != population.size()))
      throw ConfigurationError("mixing baseline must be A x A");
    if (background_degree < 0) throw ConfigurationError("background degree must be nonnegative");
    if (fixed_background && fixed_background->size() != background_size())
      throw ConfigurationError("fixed background needs A + degree coefficients");
    eta.validate("eta");
    for (double v : eta.values)
      if (!(v > 0.0)) throw ConfigurationError("overdispersion size must be positive");
    for (const auto& [name, v] : known) {
      if (name != "d_I" && name != "p_Sym" && name != "p_C" && name != "I0")
        throw ConfigurationError("only d_I, p_Sym, p_C and I0 can be held known, not '" + name + "'");
      if (!std::isfinite(v) || v <= 0.0) throw ConfigurationError("known value for '" + name + "' must be positive");
      if ((name == "p_Sym" || name == "p_C") && v > 1.0) throw ConfigurationError("known probability '" + name + "' exceeds 1");
    }
  }
};

/// Default priors; overridden by TransmissionConfig::priors (exact name, then base before '.').
inline PriorSpec default_transmission_prior(const std::string& name) {
  if (name == "phi") return PriorSpec::uniform(0.0, 1.0);
  if (name == "I0") return PriorSpec::log_normal(std::log(10.0), 1.5);
  if (name == "d_I") return PriorSpec::uniform(0.5, 10.0);
  if (name.rfind("m.", 0) == 0) return PriorSpec::log_normal(0.0, 0.5);
  if (name.rfind("beta_B.", 0) == 0) return PriorSpec::normal(0.0, 5.0);
  return PriorSpec::uniform();
}

/// Background ILI consultations N_B(v, a) = exp(beta_a + sum_j gamma_j tau_v^j), tau_v in (-1, 1).
inline double background_count(std::span<const double> beta, std::size_t A, std::size_t v, std::size_t a,
                               std::size_t intervals) {
  const double tau = 2.0 * (static_cast<double>(v) + 0.5) / static_cast<double>(intervals) - 1.0;
  double eta = beta[a], pw = 1.0;
  for (std::size_t j = A; j < beta.size(); ++j) {
    pw *= tau;
    eta += beta[j] * pw;
  }
  return std::exp(eta);
}

/// psi_P = N_G / (N_B + N_G), i.e. 1 - N_B / (N_B + N_G).
inline double positivity_probability(double N_B, double N_G) {
  const double total = N_B + N_G;
  if (!(total > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return N_G / total;
}

inline double sero_probability(double S, double N) { return std::clamp(1.0 - S / N, 0.0, 1.0); }

/// Negative binomial count with a possibly zero mean.
inline double count_loglik(double y, double mean, double size) {
  const Count yc = to_count(y);
  if (mean <= 0.0) return yc == 0 ? 0.0 : kNegInf;
  return negbin_logpmf(yc, mean, size);
}

/// Names of the parameter vector, in graph order.
inline std::vector<std::string> transmission_parameter_names(const TransmissionConfig& c) {
  std::vector<std::string> n;
  for (const char* base : {"phi", "I0", "d_I", "p_Sym", "p_C"})
    if (!c.known.contains(base) && (c.confirmed_cases || std::string_view(base) != "p_C")) n.push_back(base);
  for (std::size_t j = 0; j <= c.p_G_breakpoints.size(); ++j) n.push_back("p_G." + std::to_string(j));
  for (std::size_t j = 1; j <= c.mixing_breakpoints.size(); ++j) n.push_back("m." + std::to_string(j));
  if (!c.fixed_background) {
    for (std::size_t a = 0; a < c.A(); ++a) n.push_back("beta_B.a" + std::to_string(a));
    for (int j = 1; j <= c.background_degree; ++j) n.push_back("beta_B.t" + std::to_string(j));
  }
  return n;
}

/// Endpoint series on the reporting grid, laid out v * A + a.
struct Endpoints {
  std::vector<double> N_C, N_G, N_B, psi_G, psi_P, psi_S;
};

class TransmissionModel {
 public:
  explicit TransmissionModel(TransmissionConfig cfg) : cfg_(std::make_shared<const TransmissionConfig>(prepare(std::move(cfg)))) {
    gp_pmf_ = delay_pmf(cfg_->gp_delay, cfg_->dt);
    confirm_pmf_ = delay_pmf(cfg_->confirmation_delay, cfg_->dt);
    graph_ = build_graph();
  }

  const TransmissionConfig& config() const noexcept { return *cfg_; }
  const ModelGraph& graph() const noexcept { return graph_; }
  const std::vector<double>& gp_delay() const noexcept { return gp_pmf_; }

  /// Named view of a parameter vector (graph order).
  double get(std::span<const double> theta, const std::string& name) const {
    if (auto it = cfg_->known.find(name); it != cfg_->known.end()) return it->second;
    return theta[graph_.node(graph_.index_of(name)).parameter_index];
  }

  DynamicsInputs dynamics_inputs(double phi, double R0, double I0, double d_I, std::span<const double> multipliers) const {
    return make_inputs(*cfg_, phi, R0, I0, d_I, multipliers);
  }

  static DynamicsInputs make_inputs(const TransmissionConfig& c, double phi, double R0, double I0, double d_I,
                                    std::span<const double> multipliers) {
    DynamicsInputs in;
    in.R0 = R0;
    in.phi = phi;
    in.I0 = I0;
    in.d_I = d_I;
    in.d_L = c.d_L;
    in.dt = c.dt;
    in.t0 = c.t0;
    in.steps = c.steps;
    in.N = c.population;
    in.initial_weights = c.initial_weights;
    in.mixing = MixingSchedule{c.mixing_baseline, c.mixing_breakpoints};
    in.multipliers.assign(multipliers.begin(), multipliers.end());
    in.placement = c.placement;
    return in;
  }

  Trajectory trajectory(std::span<const double> theta) const {
    std::vector<double> m;
    for (std::size_t j = 1; j <= cfg_->mixing_breakpoints.size(); ++j) m.push_back(get(theta, "m." + std::to_string(j)));
    const double phi = get(theta, "phi"), d_I = get(theta, "d_I");
    return simulate_trajectory(dynamics_inputs(phi, R0_from_growth_rate(phi, cfg_->d_L, d_I), get(theta, "I0"), d_I, m));
  }

  /// All endpoint functionals at theta, through the graph.
  Endpoints endpoints(std::span<const double> theta) const {
    auto ev = graph_.evaluate(theta);
    auto vec = [&](const char* n) {
      auto s = ev.value(n);
      return std::vector<double>(s.begin(), s.end());
    };
    Endpoints e;
    if (cfg_->confirmed_cases) e.N_C = vec("N_C");
    e.N_G = vec("N_G");
    e.N_B = cfg_->fixed_background ? fixed_background_series() : vec("N_B");
    e.psi_G = vec("psi_G");
    e.psi_P = vec("psi_P");
    e.psi_S = vec("psi_S");
    return e;
  }

  /// Infections per reporting interval summed over ages.
  std::vector<double> incidence(std::span<const double> theta) const {
    const auto tr = trajectory(theta);
    std::vector<double> total(cfg_->steps + 1, 0.0);
    for (std::size_t k = 0; k <= cfg_->steps; ++k) total[k] = tr.delta.row(static_cast<Eigen::Index>(k)).sum();
    return aggregate(total, cfg_->report_steps, 1);
  }

 private:
  static TransmissionConfig prepare(TransmissionConfig c) {
    c.validate();
    const auto A = static_cast<Eigen::Index>(c.A());
    if (c.mixing_baseline.size() == 0) c.mixing_baseline = Mat::Ones(A, A);
    if (c.normalize_mixing) c.mixing_baseline = normalize_mixing(c.mixing_baseline, c.population);
    return c;
  }

  PriorSpec prior(const std::string& name) const {
    if (auto it = cfg_->priors.find(name); it != cfg_->priors.end()) return it->second;
    const auto dot = name.find('.');
    if (dot != std::string::npos)
      if (auto it = cfg_->priors.find(name.substr(0, dot)); it != cfg_->priors.end()) return it->second;
    return default_transmission_prior(name);
  }

  std::vector<double> fixed_background_series() const {
    const auto A = cfg_->A(), V = cfg_->intervals();
    std::vector<double> out(V * A);
    for (std::size_t v = 0; v < V; ++v)
      for (std::size_t a = 0; a < A; ++a) out[v * A + a] = background_count(*cfg_->fixed_background, A, v, a, V);
    return out;
  }

  /// Convolves each age's infections with f and sums into reporting intervals; scale per interval.
  static std::vector<double> reported(const TransmissionConfig& c, std::span<const double> delta,
                                      const std::vector<double>& f, const std::vector<double>& scale) {
    const auto A = c.A(), K = c.steps, V = c.intervals();
    std::vector<double> out(V * A);
    std::vector<double> series(K + 1);
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t k = 0; k <= K; ++k) series[k] = delta[k * A + a];
      const auto conv = aggregate(convolve_endpoint(series, f, {1.0}), c.report_steps, 1);
      for (std::size_t v = 0; v < V; ++v) out[v * A + a] = conv[v] * scale[v];
    }
    return out;
  }

  /// Maps wanted inputs to graph parents; known constants are not edges.
  struct Inputs {
    std::vector<std::string> parents;
    std::vector<std::optional<double>> fixed;
    std::vector<std::size_t> slot;

    Inputs(const TransmissionConfig& c, const std::vector<std::string>& wanted) {
      for (const auto& w : wanted) {
        auto it = c.known.find(w);
        fixed.push_back(it == c.known.end() ? std::nullopt : std::optional<double>(it->second));
        slot.push_back(parents.size());
        if (!fixed.back()) parents.push_back(w);
      }
    }
    double scalar(const NodeInputs& in, std::size_t i) const { return fixed[i] ? *fixed[i] : in.scalar(slot[i]); }
    std::span<const double> vec(const NodeInputs& in, std::size_t i) const { return in.vec(slot[i]); }
  };

  ModelGraph build_graph() const {
    const auto cfg = cfg_;
    const auto A = cfg->A(), K = cfg->steps, V = cfg->intervals();
    const std::size_t G = cfg->p_G_breakpoints.size() + 1;
    const std::size_t J = cfg->mixing_breakpoints.size();
    GraphBuilder b;
    for (const auto& n : transmission_parameter_names(*cfg)) b.add_basic(n, prior(n), NodeTag{n.substr(0, n.find('.'))});

    const Inputs r0_in(*cfg, {"phi", "d_I"});
    b.add_functional("R0", r0_in.parents, [cfg, r0_in](const NodeInputs& in) {
      return std::vector<double>{R0_from_growth_rate(r0_in.scalar(in, 0), cfg->d_L, r0_in.scalar(in, 1))};
    });

    // Packed [S (K+1) x A | delta (K+1) x A], row-major in step.
    std::vector<std::string> dyn_parents{"phi", "R0", "I0", "d_I"};
    for (std::size_t j = 1; j <= J; ++j) dyn_parents.push_back("m." + std::to_string(j));
    const Inputs dyn_in(*cfg, dyn_parents);
    b.add_functional("dynamics", dyn_in.parents, [cfg, dyn_in, A, K, J](const NodeInputs& in) {
      std::vector<double> m(J);
      for (std::size_t j = 0; j < J; ++j) m[j] = dyn_in.scalar(in, 4 + j);
      const auto tr = simulate_trajectory(
          make_inputs(*cfg, dyn_in.scalar(in, 0), dyn_in.scalar(in, 1), dyn_in.scalar(in, 2), dyn_in.scalar(in, 3), m));
      std::vector<double> out(2 * (K + 1) * A);
      for (std::size_t k = 0; k <= K; ++k)
        for (std::size_t a = 0; a < A; ++a) {
          out[k * A + a] = tr.S(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a));
          out[(K + 1) * A + k * A + a] = tr.delta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a));
        }
      return out;
    });

    const auto gp_f = gp_pmf_;
    std::vector<std::string> gp_parents{"dynamics", "p_Sym"};
    for (std::size_t j = 0; j < G; ++j) gp_parents.push_back("p_G." + std::to_string(j));
    const Inputs gp_in(*cfg, gp_parents);
    b.add_functional("N_G", gp_in.parents, [cfg, gp_f, gp_in, A, K, V, G](const NodeInputs& in) {
      PiecewiseConstant pG{cfg->p_G_breakpoints, std::vector<double>(G)};
      for (std::size_t j = 0; j < G; ++j) pG.values[j] = gp_in.scalar(in, 2 + j);
      std::vector<double> scale(V);
      for (std::size_t v = 0; v < V; ++v) scale[v] = gp_in.scalar(in, 1) * pG.at(cfg->interval_start(v));
      return reported(*cfg, gp_in.vec(in, 0).subspan((K + 1) * A), gp_f, scale);
    });

    if (cfg->confirmed_cases) {
      const auto cf = confirm_pmf_;
      const Inputs c_in(*cfg, {"dynamics", "p_Sym", "p_C"});
      b.add_functional("N_C", c_in.parents, [cfg, cf, c_in, A, K, V](const NodeInputs& in) {
        return reported(*cfg, c_in.vec(in, 0).subspan((K + 1) * A), cf,
                        std::vector<double>(V, c_in.scalar(in, 1) * c_in.scalar(in, 2)));
      });
    }

    std::vector<std::string> psi_g_parents{"N_G"};
    if (!cfg->fixed_background) {
      std::vector<std::string> beta_names;
      for (const auto& n : transmission_parameter_names(*cfg))
        if (n.rfind("beta_B.", 0) == 0) beta_names.push_back(n);
      b.add_functional("N_B", beta_names, [A, V](const NodeInputs& in) {
        std::vector<double> beta(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) beta[i] = in.scalar(i);
        std::vector<double> out(V * A);
        for (std::size_t v = 0; v < V; ++v)
          for (std::size_t a = 0; a < A; ++a) out[v * A + a] = background_count(beta, A, v, a, V);
        return out;
      });
      psi_g_parents.push_back("N_B");
    }
    const auto fixed_nb = cfg->fixed_background ? fixed_background_series() : std::vector<double>{};
    auto background = [fixed_nb](const NodeInputs& in, std::size_t i) {
      return fixed_nb.empty() ? in.vec(1)[i] : fixed_nb[i];
    };
    b.add_functional("psi_G", psi_g_parents, [background](const NodeInputs& in) {
      std::vector<double> out(in.vec(0).size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = in.vec(0)[i] + background(in, i);
      return out;
    });
    b.add_functional("psi_P", psi_g_parents, [background](const NodeInputs& in) {
      std::vector<double> out(in.vec(0).size());
      // 0/0 is flagged as -1 and rejected by the likelihood when tests were taken
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double p = positivity_probability(background(in, i), in.vec(0)[i]);
        out[i] = std::isnan(p) ? -1.0 : p;
      }
      return out;
    });
    b.add_functional("psi_S", {"dynamics"}, [cfg, A, V](const NodeInputs& in) {
      std::vector<double> out(V * A);
      for (std::size_t v = 0; v < V; ++v)
        for (std::size_t a = 0; a < A; ++a)
          out[v * A + a] = sero_probability(in.vec(0)[((v + 1) * cfg->report_steps) * A + a],
                                            cfg->population[static_cast<Eigen::Index>(a)]);
      return out;
    });

    auto at = [A, V](std::span<const double> psi, const Observation& o, const DataStream& s) {
      if (o.time_index >= V || o.age_index >= A)
        throw ConfigurationError("stream '" + s.name + "' observation outside the reporting grid");
      return psi[o.time_index * A + o.age_index];
    };
    auto negbin_lik = [cfg, at](std::span<const double> psi, const DataStream& s) {
      double ll = 0.0;
      for (const auto& o : s.observations) {
        ll += count_loglik(o.value, at(psi, o, s), cfg->eta.at(cfg->interval_start(o.time_index)));
        if (ll == kNegInf) break;
      }
      return ll;
    };
    auto binomial_lik = [at](std::span<const double> psi, const DataStream& s) {
      double ll = 0.0;
      for (const auto& o : s.observations) {
        if (!o.denominator) throw ConfigurationError("stream '" + s.name + "' needs denominators");
        const double p = at(psi, o, s);
        if (p < 0.0) {
          if (*o.denominator > 0.0) return kNegInf;
          continue;
        }
        ll += binomial_loglik(to_count(o.value), to_count(*o.denominator), p);
        if (ll == kNegInf) break;
      }
      return ll;
    };
    if (cfg->confirmed_cases) b.add_data("y_C", "N_C", "y_C", negbin_lik);
    b.add_data("y_G", "psi_G", "y_G", negbin_lik);
    b.add_data("y_P", "psi_P", "y_P", binomial_lik);
    b.add_data("y_S", "psi_S", "y_S", binomial_lik);
    return b.build();
  }

  std::shared_ptr<const TransmissionConfig> cfg_;
  std::vector<double> gp_pmf_;
  std::vector<double> confirm_pmf_;
  ModelGraph graph_;
};

inline double transmission_loglik(const TransmissionModel& model, std::span<const double> theta,
                                  std::span<const DataStream> data) {
  return log_likelihood_product(model.graph(), theta, data);
}

inline DelaySpec delay_from_json(const io::json& j, const std::string& ctx) {
  DelaySpec d;
  d.incubation_mean = io::get_or<double>(j, "incubation_mean", d.incubation_mean, ctx);
  d.incubation_sd = io::get_or<double>(j, "incubation_sd", d.incubation_sd, ctx);
  d.report_mean = io::get_or<double>(j, "report_mean", d.report_mean, ctx);
  d.max_steps = io::get_or<std::size_t>(j, "max_steps", d.max_steps, ctx);
  return d;
}

/// Scenario JSON -> config. See scenarios/*.json for the full schema.
inline TransmissionConfig transmission_config_from_json(const io::json& j) {
  TransmissionConfig c;
  c.ages = AgeStructure(io::get_as<std::vector<std::string>>(j, "age_groups"));
  const auto pop = io::get_as<std::vector<double>>(j, "population");
  c.population = Eigen::Map<const Vec>(pop.data(), static_cast<Eigen::Index>(pop.size()));
  c.t0 = io::get_or<double>(j, "t0", 0.0);
  c.dt = io::get_or<double>(j, "dt", 0.5);
  const double horizon = io::get_as<double>(j, "horizon_days");
  const double report_days = io::get_or<double>(j, "report_every_days", 1.0);
  c.steps = static_cast<std::size_t>(std::llround(horizon / c.dt));
  c.report_steps = static_cast<std::size_t>(std::llround(report_days / c.dt));
  c.d_L = io::get_or<double>(j, "d_L", 2.0);
  if (j.contains("mixing")) {
    const auto& m = j.at("mixing");
    if (m.contains("baseline")) {
      const auto rows = io::get_as<std::vector<std::vector<double>>>(m, "baseline", "mixing");
      c.mixing_baseline.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) throw SchemaError("mixing.baseline", "must be square");
        for (std::size_t s = 0; s < rows.size(); ++s)
          c.mixing_baseline(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) = rows[r][s];
      }
    }
    c.mixing_breakpoints = io::get_or<std::vector<double>>(m, "breakpoints", {}, "mixing");
    c.normalize_mixing = io::get_or<bool>(m, "normalize", true, "mixing");
  }
  if (j.contains("initial_weights")) {
    const auto w = io::get_as<std::vector<double>>(j, "initial_weights");
    c.initial_weights = Eigen::Map<const Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
  }
  if (j.contains("delay")) c.gp_delay = delay_from_json(j.at("delay"), "delay");
  c.confirmation_delay = j.contains("confirmation_delay") ? delay_from_json(j.at("confirmation_delay"), "confirmation_delay")
                                                          : c.gp_delay;
  c.p_G_breakpoints = io::get_or<std::vector<double>>(j, "p_G_breakpoints", {});
  if (j.contains("eta")) {
    if (j.at("eta").is_null()) c.eta.values = {std::numeric_limits<double>::infinity()};
    else c.eta.values = {io::get_as<double>(j, "eta")};
  }
  if (j.contains("eta_values")) {
    c.eta.values = io::get_as<std::vector<double>>(j, "eta_values");
    c.eta.breakpoints = io::get_or<std::vector<double>>(j, "eta_breakpoints", {});
  }
  if (j.contains("background")) {
    const auto& bg = j.at("background");
    c.background_degree = io::get_or<int>(bg, "degree", 1, "background");
    if (bg.contains("fixed")) c.fixed_background = io::get_as<std::vector<double>>(bg, "fixed", "background");
  }
  c.confirmed_cases = io::get_or<bool>(j, "confirmed_cases", true);
  const auto placement = io::get_or<std::string>(j, "foi_placement", "inside");
  if (placement == "inside") c.placement = FoiPlacement::Inside;
  else if (placement == "outside") c.placement = FoiPlacement::Outside;
  else throw SchemaError("foi_placement", "must be 'inside' or 'outside'");
  if (j.contains("known")) c.known = io::get_as<std::map<std::string, double>>(j, "known");
  if (j.contains("priors")) c.priors = io::priors_from_json(j.at("priors"), "priors");
  try {
    c.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const ConfigurationError& e) {
    throw SchemaError("scenario", e.what());
  }
  return c;
}

}  // namespace episynth::transmission
