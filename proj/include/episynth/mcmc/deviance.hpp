#pragma once

// Posterior mean deviance, plug-in deviance, effective number of parameters and DIC.

#include <string>
#include <vector>

#include "episynth/mcmc/posterior.hpp"
#include "episynth/mcmc/sampler.hpp"

namespace episynth::mcmc {

struct DevianceRow {
  std::string node;
  double mean_deviance = 0.0;     // D-bar
  double plugin_deviance = 0.0;   // D(theta-bar)
  double effective_parameters = 0.0;  // p_D
  double dic = 0.0;
};

inline DevianceRow deviance_row(std::string node, double mean_deviance, double plugin_deviance) {
  const double pd = mean_deviance - plugin_deviance;
  return {std::move(node), mean_deviance, plugin_deviance, pd, mean_deviance + pd};
}

/// One row per data node plus a "total" row. D = -2 log-likelihood; theta-bar is the
/// posterior mean on the unconstrained scale, mapped back to natural parameters.
template <LogDensityModel M>
  requires HasNodeLikelihoods<M>
std::vector<DevianceRow> deviance_summary(const PosteriorSample& sample, const M& model) {
  if (sample.size() == 0) throw DomainError("deviance summary of an empty sample");
  const auto names = model.data_node_names();
  const std::size_t nodes = names.size();

  std::vector<double> dbar(nodes, 0.0);
  std::vector<double> xbar(model.dimension(), 0.0);
  const bool cached = sample.node_log_likelihood.size() == sample.size();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto ll = cached ? sample.node_log_likelihood[i] : model.node_log_likelihoods(sample.draws[i]);
    for (std::size_t k = 0; k < nodes; ++k) dbar[k] += -2.0 * ll[k] / static_cast<double>(sample.size());
    const auto x = model.to_unconstrained(sample.draws[i]);
    for (std::size_t j = 0; j < x.size(); ++j) xbar[j] += x[j] / static_cast<double>(sample.size());
  }
  const auto theta_bar = model.to_natural(xbar);
  const auto plug = model.node_log_likelihoods(theta_bar);

  std::vector<DevianceRow> rows;
  double total_bar = 0.0, total_hat = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    rows.push_back(deviance_row(names[k], dbar[k], -2.0 * plug[k]));
    total_bar += dbar[k];
    total_hat += -2.0 * plug[k];
  }
  rows.push_back(deviance_row("total", total_bar, total_hat));
  return rows;
}

inline std::string deviance_to_csv(const std::vector<DevianceRow>& rows) {
  std::string out = "node,Dbar,Dhat,pD,DIC\n";
  for (const auto& r : rows)
    out += r.node + "," + io::format_double(r.mean_deviance) + "," + io::format_double(r.plugin_deviance) + "," +
           io::format_double(r.effective_parameters) + "," + io::format_double(r.dic) + "\n";
  return out;
}

}  // namespace episynth::mcmc
