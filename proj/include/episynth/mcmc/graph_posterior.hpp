#pragma once

#include <span>
#include <string>
#include <vector>

#include "episynth/core/graph.hpp"
#include "episynth/core/log.hpp"
#include "episynth/core/random.hpp"
#include "episynth/mcmc/posterior.hpp"

namespace episynth::mcmc {

/// Posterior p(theta | data) of a ModelGraph, exposed on the unconstrained scale.
class GraphPosterior {
 public:
  GraphPosterior(ModelGraph graph, std::vector<DataStream> data)
      : graph_(std::move(graph)), data_(std::move(data)), supports_(graph_.supports()) {
    // Surface unbound streams now rather than on the first likelihood call.
    for (const auto& s : data_)
      if (!graph_.data_node_for_stream(s.name))
        throw ConfigurationError("stream '" + s.name + "' is not bound to any data node");
  }

  const ModelGraph& graph() const noexcept { return graph_; }
  const std::vector<DataStream>& data() const noexcept { return data_; }

  std::size_t dimension() const noexcept { return graph_.dimension(); }
  std::vector<std::string> parameter_names() const { return graph_.parameter_names(); }
  std::vector<std::string> data_node_names() const { return graph_.data_node_names(); }

  std::vector<double> to_natural(std::span<const double> x) const {
    std::vector<double> theta(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) theta[i] = supports_[i].to_natural(x[i]);
    return theta;
  }
  std::vector<double> to_unconstrained(std::span<const double> theta) const {
    std::vector<double> x(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) x[i] = supports_[i].to_unconstrained(theta[i]);
    return x;
  }

  double log_jacobian(std::span<const double> x) const {
    double lj = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) lj += supports_[i].log_jacobian(x[i]);
    return lj;
  }

  /// log prior + log likelihood + log Jacobian. Parameter-regime failures count as -inf.
  double log_density(std::span<const double> x) const {
    const auto theta = to_natural(x);
    const double lp = graph_.log_prior(theta);
    if (!std::isfinite(lp)) return kNegInf;
    const double ll = log_likelihood(theta);
    if (!std::isfinite(ll)) return kNegInf;
    return lp + ll + log_jacobian(x);
  }

  double log_likelihood(std::span<const double> theta) const { return log_likelihood(theta, data_); }

  double log_likelihood(std::span<const double> theta, std::span<const DataStream> data) const {
    try {
      return graph_.evaluate(theta).log_likelihood(data);
    } catch (const DomainError& e) {
      log::debug("event=reject reason=domain what=\"{}\"", e.what());
    } catch (const ParameterRegimeError& e) {
      log::debug("event=reject reason=regime what=\"{}\"", e.what());
    } catch (const StepSizeError& e) {
      log::debug("event=reject reason=step_size what=\"{}\"", e.what());
    }
    return kNegInf;
  }

  std::vector<double> node_log_likelihoods(std::span<const double> theta) const {
    return graph_.evaluate(theta).node_log_likelihoods(data_);
  }

  std::vector<double> initial_natural(Rng& rng) const { return graph_.sample_prior(rng); }

 private:
  ModelGraph graph_;
  std::vector<DataStream> data_;
  std::vector<Support> supports_;
};

struct NodeSummary {
  std::string node;
  std::string age;  // label, empty when off the age plate
  int wave = -1;
  double mean = 0.0;
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

/// Posterior summaries of every basic and scalar functional node (links excluded).
inline std::vector<NodeSummary> node_summaries(const ModelGraph& g, const PosteriorSample& s,
                                               const AgeStructure* ages = nullptr) {
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (g.node(i).kind != NodeKind::Data && g.node(i).tag.base.rfind("link.", 0) != 0) nodes.push_back(i);
  std::vector<std::vector<double>> values(nodes.size());
  for (const auto& d : s.draws) {
    auto ev = g.evaluate(d);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      auto v = ev.value(nodes[k]);
      if (v.size() == 1) values[k].push_back(v[0]);
    }
  }
  std::vector<NodeSummary> out;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (values[k].size() != s.size() || values[k].empty()) continue;
    const auto& n = g.node(nodes[k]);
    NodeSummary r;
    r.node = n.name;
    if (n.tag.age >= 0) r.age = ages ? ages->label(static_cast<std::size_t>(n.tag.age)) : std::to_string(n.tag.age);
    r.wave = n.tag.wave;
    r.mean = stats::mean(values[k]);
    r.median = stats::quantile(values[k], 0.5);
    r.q025 = stats::quantile(values[k], 0.025);
    r.q975 = stats::quantile(values[k], 0.975);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string node_summaries_to_csv(const std::vector<NodeSummary>& rows) {
  std::string out = "node,age,wave,mean,median,q2.5,q97.5\n";
  for (const auto& r : rows)
    out += r.node + "," + r.age + "," + (r.wave >= 0 ? std::to_string(r.wave) : "") + "," + io::format_double(r.mean) +
           "," + io::format_double(r.median) + "," + io::format_double(r.q025) + "," + io::format_double(r.q975) + "\n";
  return out;
}

}  // namespace episynth::mcmc
