#pragma once

// Node-splitting conflict diagnostics.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "episynth/core/error.hpp"
#include "episynth/core/graph.hpp"
#include "episynth/core/io.hpp"
#include "episynth/core/log.hpp"
#include "episynth/core/parallel.hpp"
#include "episynth/core/random.hpp"
#include "episynth/melding/melding.hpp"
#include "episynth/mcmc/graph_posterior.hpp"
#include "episynth/mcmc/sampler.hpp"

namespace episynth::conflict {

enum class Scale { Identity, Log10, Logit };
enum class Side { Parent, Child };
enum class PValueMethod { Quantile, Density };

inline Scale scale_from_string(const std::string& s) {
  if (s == "identity") return Scale::Identity;
  if (s == "log10") return Scale::Log10;
  if (s == "logit") return Scale::Logit;
  throw SchemaError("scale", "must be identity, log10 or logit");
}

inline PValueMethod method_from_string(const std::string& s) {
  if (s == "quantile") return PValueMethod::Quantile;
  if (s == "density") return PValueMethod::Density;
  throw SchemaError("method", "must be quantile or density");
}

inline double apply_scale(Scale h, double v) {
  switch (h) {
    case Scale::Identity: return v;
    case Scale::Log10:
      if (!(v > 0.0)) throw DomainError("log10 scale needs positive values");
      return std::log10(v);
    case Scale::Logit:
      if (!(v > 0.0 && v < 1.0)) throw DomainError("logit scale needs values in (0,1)");
      return logit(v);
  }
  return v;
}

/// Parent partitions keep the separator's upstream model; child partitions see the
/// separator as a founder with `cut_prior`.
struct Partition {
  std::string name;
  Side side = Side::Child;
  std::vector<std::string> streams;
};

struct NodeSplit {
  std::string separator;
  std::vector<Partition> partitions;
  Scale scale = Scale::Identity;
  PriorSpec cut_prior = PriorSpec::normal(0.0, 1e3);
};

namespace detail {

inline std::size_t data_node_of(const ModelGraph& g, const std::string& stream, const std::string& partition) {
  auto d = g.data_node_for_stream(stream);
  if (!d) throw SplitDesignError("partition '" + partition + "': stream '" + stream + "' is not bound to any data node");
  return *d;
}

}  // namespace detail

/// Disjointness and identifiability of every partition. Throws SplitDesignError.
inline void check_split(const ModelGraph& g, const NodeSplit& split) {
  const auto sep = g.index_of(split.separator);
  if (g.node(sep).kind == NodeKind::Data) throw SplitDesignError("separator '" + split.separator + "' is a data node");
  if (split.partitions.size() < 2) throw SplitDesignError("a split needs at least two partitions");
  std::set<std::string> seen;
  for (const auto& p : split.partitions)
    for (const auto& s : p.streams)
      if (!seen.insert(s).second) throw SplitDesignError("stream '" + s + "' is assigned to more than one partition");

  const auto desc = g.descendants(sep);
  const std::set<std::size_t> below(desc.begin(), desc.end());
  auto up = g.ancestors(sep);
  if (g.node(sep).kind == NodeKind::Basic) up.push_back(sep);
  const std::set<std::size_t> above(up.begin(), up.end());

  for (const auto& p : split.partitions) {
    bool informed = false;
    for (const auto& s : p.streams) {
      const auto d = detail::data_node_of(g, s, p.name);
      if (p.side == Side::Child) {
        informed = informed || below.count(d);
      } else {
        for (auto a : g.ancestors(d))
          if (above.count(a) && !below.count(d)) informed = true;
      }
    }
    if (p.side == Side::Parent)
      for (auto a : above)
        if (g.node(a).kind == NodeKind::Basic && g.node(a).prior.is_informative()) informed = true;
    if (!informed) {
      const std::string missing = p.side == Side::Child ? "no data downstream of the separator"
                                                        : "no data or informative prior upstream of the separator";
      throw SplitDesignError("partition '" + p.name + "' cannot identify '" + split.separator + "': " + missing);
    }
  }
}

/// Model graph and data of one partition.
inline std::pair<ModelGraph, std::vector<DataStream>> partition_model(const ModelGraph& g, const std::vector<DataStream>& data,
                                                                      const NodeSplit& split, const Partition& p) {
  std::vector<DataStream> mine;
  for (const auto& s : data)
    if (std::find(p.streams.begin(), p.streams.end(), s.name) != p.streams.end()) mine.push_back(s);
  if (p.side == Side::Parent) return {g, mine};
  return {g.with_cut(split.separator, split.cut_prior), mine};
}

/// Separator value at every draw of a graph's posterior.
inline std::vector<double> node_draws(const ModelGraph& g, const PosteriorSample& s, const std::string& node) {
  const auto idx = g.index_of(node);
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& d : s.draws) {
    if (g.node(idx).kind == NodeKind::Basic) out.push_back(d[g.node(idx).parameter_index]);
    else out.push_back(g.evaluate(d).value(idx).front());
  }
  return out;
}

struct PartitionFit {
  std::string name;
  PosteriorSample sample;
  std::vector<double> separator;  // natural scale
};

/// Fits every partition independently (seed offset by partition index).
inline std::vector<PartitionFit> split_and_fit(const ModelGraph& g, const std::vector<DataStream>& data, const NodeSplit& split,
                                               const mcmc::ChainConfig& cfg, std::size_t threads = default_threads()) {
  check_split(g, split);
  std::set<std::string> assigned;
  for (const auto& p : split.partitions) assigned.insert(p.streams.begin(), p.streams.end());
  for (const auto& s : data)
    if (!assigned.count(s.name)) log::warn("event=split_unassigned stream={} separator={}", s.name, split.separator);
  std::vector<PartitionFit> fits(split.partitions.size());
  parallel_for(fits.size(), threads, [&](std::size_t k) {
    const auto& p = split.partitions[k];
    auto [pg, pd] = partition_model(g, data, split, p);
    mcmc::GraphPosterior post(pg, pd);
    auto c = cfg;
    c.seed = cfg.seed + 1000003 * (k + 1);
    c.record_node_likelihoods = false;
    fits[k].name = p.name;
    fits[k].sample = mcmc::run_chain(post, c);
    fits[k].separator = node_draws(pg, fits[k].sample, split.separator);
  });
  return fits;
}

/// Full-model posterior of the separator.
inline std::vector<double> fit_full(const ModelGraph& g, const std::vector<DataStream>& data, const std::string& separator,
                                    const mcmc::ChainConfig& cfg) {
  mcmc::GraphPosterior post(g, data);
  auto c = cfg;
  c.record_node_likelihoods = false;
  const auto s = mcmc::run_chain(post, c);
  return node_draws(g, s, separator);
}

/// delta = h(a) - h(b) from independently permuted, equal-length draws.
inline std::vector<double> difference_sample(std::vector<double> a, std::vector<double> b, Scale h, Rng& rng) {
  if (a.empty() || b.empty()) throw DomainError("difference needs draws from both partitions");
  std::shuffle(a.begin(), a.end(), rng);
  std::shuffle(b.begin(), b.end(), rng);
  const std::size_t n = std::min(a.size(), b.size());
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = apply_scale(h, a[i]) - apply_scale(h, b[i]);
  return d;
}

/// Two-sided conflict p-value for H0: delta = 0.
inline double conflict_pvalue(std::span<const double> delta, PValueMethod method = PValueMethod::Quantile) {
  if (delta.empty()) throw UndefinedPValueError("empty difference sample");
  if (delta.size() < 1000) log::warn("event=few_draws draws={} recommended=1000", delta.size());
  const auto [mn, mx] = std::minmax_element(delta.begin(), delta.end());
  if (*mn == *mx) throw UndefinedPValueError("difference sample has zero variance");
  const double n = static_cast<double>(delta.size());
  if (method == PValueMethod::Quantile) {
    double below = 0.0, above = 0.0;
    for (double d : delta) {
      if (d < 0.0) below += 1.0;
      else if (d > 0.0) above += 1.0;
      else {
        below += 0.5;
        above += 0.5;
      }
    }
    return std::min(1.0, 2.0 * std::min(below, above) / n);
  }
  const melding::GaussianKde kde(std::vector<double>(delta.begin(), delta.end()));
  const double at_zero = kde.log_density(0.0);
  double count = 0.0;
  for (double d : delta)
    if (kde.log_density(d) <= at_zero) count += 1.0;
  return count / n;
}

/// Pairwise conflict p-values between partitions (symmetric, unit diagonal).
inline std::vector<std::vector<double>> pairwise_conflicts(const std::vector<PartitionFit>& fits, Scale h, PValueMethod method,
                                                           std::uint64_t seed) {
  const std::size_t k = fits.size();
  std::vector<std::vector<double>> c(k, std::vector<double>(k, 1.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      auto rng = make_rng(seed, i, j);
      c[i][j] = c[j][i] = conflict_pvalue(difference_sample(fits[i].separator, fits[j].separator, h, rng), method);
    }
  return c;
}

// ---- uniformity under the null --------------------------------------------------

/// Kolmogorov distribution tail P(K > x), alternating series.
inline double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;  // series converges slowly; the tail is 1 to double precision here
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS against Uniform(0,1), with Stephens' small-sample correction.
inline KsResult ks_uniform(std::vector<double> x) {
  if (x.empty()) throw DomainError("KS test needs at least one value");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double D = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = std::clamp(x[i], 0.0, 1.0);
    D = std::max({D, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {D, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * D)};
}

struct UniformityResult {
  std::vector<double> pvalues;  // sorted
  KsResult ks;

  /// Empirical CDF of the replicated p-values.
  double ecdf(double c) const {
    return static_cast<double>(std::upper_bound(pvalues.begin(), pvalues.end(), c) - pvalues.begin()) /
           static_cast<double>(pvalues.size());
  }
};

/// `generator(rep, rng)` simulates data from the model, refits the split and returns c.
template <class Generator>
UniformityResult uniformity_check(Generator&& generator, std::size_t replicates, std::uint64_t seed,
                                  std::size_t threads = default_threads()) {
  if (replicates == 0) throw ConfigurationError("uniformity check needs at least one replicate");
  UniformityResult r;
  r.pvalues.resize(replicates);
  parallel_for(replicates, threads, [&](std::size_t i) {
    auto rng = make_rng(seed, 11, i);
    r.pvalues[i] = generator(i, rng);
  });
  std::sort(r.pvalues.begin(), r.pvalues.end());
  r.ks = ks_uniform(r.pvalues);
  return r;
}

// ---- reports -----------------------------------------------------------------------

struct InfluenceRow {
  std::string model;
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

inline InfluenceRow influence_row(std::string model, const std::vector<double>& draws) {
  return {std::move(model), stats::quantile(draws, 0.5), stats::quantile(draws, 0.025), stats::quantile(draws, 0.975)};
}

inline std::string influence_to_csv(const std::vector<InfluenceRow>& rows) {
  std::string out = "model,median,q2.5,q97.5\n";
  for (const auto& r : rows)
    out += r.model + "," + io::format_double(r.median) + "," + io::format_double(r.q025) + "," + io::format_double(r.q975) + "\n";
  return out;
}

/// Histogram of delta with the conflict p-value in a trailing comment line.
inline std::string difference_histogram_csv(std::span<const double> delta, std::size_t bins, double c) {
  const auto [mn, mx] = std::minmax_element(delta.begin(), delta.end());
  const double lo = *mn, width = (*mx - *mn) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double d : delta) counts[std::min(bins - 1, static_cast<std::size_t>(width > 0.0 ? (d - lo) / width : 0.0))]++;
  std::string out = "bin_lower,bin_upper,count,density\n";
  for (std::size_t b = 0; b < bins; ++b) {
    const double l = lo + width * static_cast<double>(b);
    const double dens = width > 0.0 ? static_cast<double>(counts[b]) / (static_cast<double>(delta.size()) * width) : 0.0;
    out += io::format_double(l) + "," + io::format_double(l + width) + "," + std::to_string(counts[b]) + "," + io::format_double(dens) + "\n";
  }
  out += "# c=" + io::format_double(c) + "\n";
  return out;
}

/// KDE overlays of several posterior samples on a shared grid (scale h applied first).
inline std::string overlay_density_csv(const std::vector<std::pair<std::string, std::vector<double>>>& series, Scale h,
                                       std::size_t points = 200) {
  std::vector<std::vector<double>> scaled;
  double lo = kInf, hi = -kInf;
  for (const auto& [name, v] : series) {
    std::vector<double> s;
    for (double x : v) s.push_back(apply_scale(h, x));
    lo = std::min(lo, *std::min_element(s.begin(), s.end()));
    hi = std::max(hi, *std::max_element(s.begin(), s.end()));
    scaled.push_back(std::move(s));
  }
  std::vector<melding::GaussianKde> kdes;
  for (auto& s : scaled) kdes.emplace_back(s);
  std::string out = "x";
  for (const auto& [name, v] : series) out += "," + name;
  out += "\n";
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    out += io::format_double(x);
    for (const auto& k : kdes) out += "," + io::format_double(std::exp(k.log_density(x)));
    out += "\n";
  }
  return out;
}

/// Split manifest: separator, partitions [{name, side, streams}], scale, cut_prior.
inline NodeSplit split_from_json(const io::json& j) {
  NodeSplit s;
  s.separator = io::get_as<std::string>(j, "separator");
  s.scale = scale_from_string(io::get_or<std::string>(j, "scale", "identity"));
  if (j.contains("cut_prior")) s.cut_prior = io::prior_from_json(j.at("cut_prior"), "cut_prior");
  const auto& parts = io::require(j, "partitions");
  if (!parts.is_array()) throw SchemaError("partitions", "must be an array");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string ctx = "partitions[" + std::to_string(i) + "]";
    Partition p;
    p.name = io::get_as<std::string>(parts[i], "name", ctx);
    const auto side = io::get_as<std::string>(parts[i], "side", ctx);
    if (side == "parent") p.side = Side::Parent;
    else if (side == "child") p.side = Side::Child;
    else throw SchemaError(ctx + ".side", "must be parent or child");
    p.streams = io::get_as<std::vector<std::string>>(parts[i], "streams", ctx);
    s.partitions.push_back(std::move(p));
  }
  return s;
}

}  // namespace episynth::conflict
