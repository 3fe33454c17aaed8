#pragma once

// Severity evidence-synthesis graph for waves 1-3.
//
// Node names are "<base>.a<age>.w<wave>". Data nodes and their streams share that
// name; manifests may instead supply one stream per role and wave ("y_H.w1") with
// one observation per age, which split_severity_streams() splits by age.

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "episynth/core/graph.hpp"
#include "episynth/core/io.hpp"
#include "episynth/core/log.hpp"
#include "episynth/severity/likelihood.hpp"
#include "episynth/severity/pyramid.hpp"

namespace episynth::severity {

struct SeverityModelConfig {
  AgeStructure ages = AgeStructure::standard_seven();
  std::vector<Count> population;  // N_Pop per age
  std::vector<int> waves{1};
  bool naive_ds = false;          // d_S fixed at 1
  bool nested_binomial = false;   // simulation only; graphs use the floor parameterisation
  double hierarchical_sd = 1.0;   // logit-scale sd centring wave-3 probabilities on wave 2
  /// Prior overrides keyed by full node name ("p_H|S.a2.w1") or base name ("p_H|S").
  std::map<std::string, PriorSpec> priors;

  void validate() const {
    ages.require_length(population.size(), "population");
    for (auto n : population)
      if (n < 0) throw ConfigurationError("population counts must be nonnegative");
    if (waves.empty()) throw ConfigurationError("at least one wave is required");
    for (int w : waves)
      if (w < 1 || w > 3) throw ConfigurationError("waves are numbered 1 to 3");
    if (!(hierarchical_sd > 0.0)) throw ConfigurationError("hierarchical sd must be positive");
  }

  bool has_wave(int w) const { return std::find(waves.begin(), waves.end(), w) != waves.end(); }
};

inline std::string node_name(const std::string& base, std::size_t age, int wave) {
  return base + ".a" + std::to_string(age) + ".w" + std::to_string(wave);
}

namespace detail {

inline Count as_count(double v) { return static_cast<Count>(std::llround(v)); }

inline double probability_likelihood(std::span<const double> psi, const DataStream& s) {
  double ll = 0.0;
  for (const auto& o : s.observations) {
    if (!o.denominator) throw ConfigurationError("stream '" + s.name + "' needs a denominator column");
    ll += binomial_loglik(as_count(o.value), as_count(*o.denominator), psi[0]);
  }
  return ll;
}

/// psi = (N, d): counts are Binomial(N, d); log-scale point estimates are Normal(log(d N), sd).
inline double count_likelihood(std::span<const double> psi, const DataStream& s) {
  const double N = psi[0], d = psi[1];
  double ll = 0.0;
  for (const auto& o : s.observations) {
    if (s.kind == StreamKind::PointEstimateLogScale)
      ll += lognormal_point_estimate_term(d * N, o.value, *o.denominator);
    else
      ll += binomial_loglik(as_count(o.value), as_count(N), d);
    if (ll == kNegInf) return ll;
  }
  return ll;
}

inline Evaluator floor_product() {
  return [](const NodeInputs& in) {
    return std::vector<double>{std::floor(in.scalar(0) * in.scalar(1))};
  };
}

inline Evaluator product() {
  return [](const NodeInputs& in) { return std::vector<double>{in.scalar(0) * in.scalar(1)}; };
}

inline Evaluator pair() {
  return [](const NodeInputs& in) { return std::vector<double>{in.scalar(0), in.size() > 1 ? in.scalar(1) : 1.0}; };
}

}  // namespace detail

class SeverityGraphBuilder {
 public:
  explicit SeverityGraphBuilder(SeverityModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  ModelGraph build() const {
    if (cfg_.nested_binomial)
      throw ConfigurationError("nested-binomial mode is available for simulation only; fit with the floor parameterisation");
    if (cfg_.has_wave(3) && !cfg_.has_wave(2))
      log::warn("event=severity_build note=\"wave 3 without wave 2: wave-3 probabilities get flat priors\"");
    GraphBuilder b;
    for (std::size_t a = 0; a < cfg_.ages.size(); ++a)
      for (int w : std::set<int>(cfg_.waves.begin(), cfg_.waves.end())) add_wave(b, a, w);
    return b.build();
  }

 private:
  PriorSpec prior_for(const std::string& base, const std::string& full, std::optional<PriorSpec> fallback = {}) const {
    if (auto it = cfg_.priors.find(full); it != cfg_.priors.end()) return it->second;
    if (auto it = cfg_.priors.find(base); it != cfg_.priors.end()) return it->second;
    return fallback ? *fallback : PriorSpec::uniform();
  }

  void add_wave(GraphBuilder& b, std::size_t a, int w) const {
    auto n = [&](const std::string& base) { return node_name(base, a, w); };
    auto tag = [&](const std::string& base) { return NodeTag{base, static_cast<int>(a), w}; };
    auto basic = [&](const std::string& base, std::optional<PriorSpec> fallback = {}) {
      b.add_basic(n(base), prior_for(base, n(base), fallback), tag(base));
    };
    const double N_Pop = static_cast<double>(cfg_.population[a]);
    const bool centred = w == 3 && cfg_.has_wave(2);
    auto conditional = [&](const std::string& base) {
      if (centred) basic(base, PriorSpec::logit_normal_centered(node_name(base, a, 2), cfg_.hierarchical_sd));
      else basic(base);
    };

    if (w == 1) basic("pi_base");
    conditional("p_I|Pop");
    conditional("p_S|I");
    conditional("p_H|S");
    conditional("p_ICU|H");
    conditional("p_D|H");
    const bool detect_S = w != 3 && !cfg_.naive_ds;
    if (detect_S) basic("d_S");
    basic("d_H");
    basic("d_D");
    if (w == 3) basic("d_ICU");

    if (w == 1)
      b.add_functional(n("pi"), {n("pi_base"), n("p_I|Pop")},
                       [](const NodeInputs& in) { return std::vector<double>{in.scalar(0) + in.scalar(1)}; }, tag("pi"));
    b.add_functional(n("N_I"), {n("p_I|Pop")},
                     [N_Pop](const NodeInputs& in) { return std::vector<double>{std::floor(in.scalar(0) * N_Pop)}; },
                     tag("N_I"));
    b.add_functional(n("N_S"), {n("p_S|I"), n("N_I")}, detail::floor_product(), tag("N_S"));
    b.add_functional(n("N_H"), {n("p_H|S"), n("N_S")}, detail::floor_product(), tag("N_H"));
    b.add_functional(n("N_ICU"), {n("p_ICU|H"), n("N_H")}, detail::floor_product(), tag("N_ICU"));
    b.add_functional(n("N_D"), {n("p_D|H"), n("N_H")}, detail::floor_product(), tag("N_D"));
    b.add_functional(n("CHR"), {n("p_H|S"), n("p_S|I")}, detail::product(), tag("CHR"));
    b.add_functional(n("CIR"), {n("p_ICU|H"), n("CHR")}, detail::product(), tag("CIR"));
    b.add_functional(n("CFR"), {n("p_D|H"), n("CHR")}, detail::product(), tag("CFR"));
    if (w == 3) b.add_functional(n("N*_ICU"), {n("d_ICU"), n("N_ICU")}, detail::floor_product(), tag("N*_ICU"));

    // Observation links: one functional parent per data node.
    auto link = [&](const std::string& role, std::vector<std::string> parents, Likelihood lik) {
      const auto ln = n("link." + role);
      b.add_functional(ln, std::move(parents), detail::pair(), tag("link." + role));
      b.add_data(n(role), ln, n(role), std::move(lik), tag(role));
    };
    if (w == 1) {
      link("sero_base", {n("pi_base")}, detail::probability_likelihood);
      link("sero_post", {n("pi")}, detail::probability_likelihood);
    }
    if (detect_S) link("y_S", {n("N_S"), n("d_S")}, detail::count_likelihood);
    else link("y_S", {n("N_S")}, detail::count_likelihood);
    link("y_H", {n("N_H"), n("d_H")}, detail::count_likelihood);
    link("y_D", {n("N_D"), n("d_D")}, detail::count_likelihood);
    link("y_ICU|H", {n("p_ICU|H")}, detail::probability_likelihood);
    link("y_D|H", {n("p_D|H")}, detail::probability_likelihood);
    if (w == 3) link("y_ICU_hat", {n("N*_ICU")}, detail::count_likelihood);
  }

  SeverityModelConfig cfg_;
};

inline ModelGraph build_severity_graph(const SeverityModelConfig& cfg) { return SeverityGraphBuilder(cfg).build(); }

/// Splits "<role>.w<wave>" streams into per-age streams "<role>.a<age>.w<wave>".
/// Streams already named per age pass through unchanged.
inline std::vector<DataStream> split_severity_streams(const std::vector<DataStream>& streams) {
  static const std::regex per_wave(R"((.+)\.w([0-9]+))");
  static const std::regex per_age(R"(.+\.a[0-9]+\.w[0-9]+)");
  std::vector<DataStream> out;
  for (const auto& s : streams) {
    std::smatch m;
    if (std::regex_match(s.name, per_age) || !std::regex_match(s.name, m, per_wave)) {
      out.push_back(s);
      continue;
    }
    std::map<std::size_t, DataStream> by_age;
    for (const auto& o : s.observations) {
      auto [it, inserted] = by_age.try_emplace(o.age_index);
      if (inserted) it->second = DataStream{m[1].str() + ".a" + std::to_string(o.age_index) + ".w" + m[2].str(), s.kind, {}};
      it->second.observations.push_back(o);
    }
    for (auto& [a, part] : by_age) out.push_back(std::move(part));
  }
  return out;
}

/// {"age_groups": [...], "population": [...], "waves": [1], "naive_ds": false,
///  "hierarchical_sd": 1.0, "priors": {"p_H|S": {"family": "beta", "a": 2, "b": 50}}}
inline SeverityModelConfig severity_config_from_json(const io::json& j) {
  SeverityModelConfig c;
  if (j.contains("age_groups")) c.ages = AgeStructure(io::get_as<std::vector<std::string>>(j, "age_groups"));
  c.population = io::get_as<std::vector<Count>>(j, "population");
  c.waves = io::get_or<std::vector<int>>(j, "waves", c.waves);
  c.naive_ds = io::get_or<bool>(j, "naive_ds", false);
  c.nested_binomial = io::get_or<bool>(j, "nested_binomial", false);
  c.hierarchical_sd = io::get_or<double>(j, "hierarchical_sd", 1.0);
  if (j.contains("priors")) c.priors = io::priors_from_json(j.at("priors"), "priors");
  try {
    c.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const ConfigurationError& e) {
    throw SchemaError("population", e.what());
  }
  return c;
}

}  // namespace episynth::severity
