#pragma once

// Markov melding of submodels that share a scalar link parameter phi:
//   p_meld(phi, psi_1..psi_M) = p_pool(phi) * prod_m p_m(phi, psi_m, y_m) / p_m(phi)

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "episynth/core/error.hpp"
#include "episynth/core/graph.hpp"
#include "episynth/core/io.hpp"
#include "episynth/core/math.hpp"
#include "episynth/core/prior.hpp"
#include "episynth/core/random.hpp"
#include "episynth/mcmc/graph_posterior.hpp"
#include "episynth/mcmc/posterior.hpp"
#include "episynth/mcmc/sampler.hpp"

namespace episynth::melding {

using LogDensity1D = std::function<double(double)>;

/// 0.9 min(sd, IQR/1.34) n^(-1/5)
inline double silverman_bandwidth(std::span<const double> x) {
  if (x.size() < 2) throw DomainError("bandwidth needs at least two samples");
  std::vector<double> v(x.begin(), x.end());
  const double s = stats::sd(v);
  const double iqr = stats::quantile(v, 0.75) - stats::quantile(v, 0.25);
  double spread = std::min(s, iqr / 1.34);
  if (!(spread > 0.0)) spread = s;
  if (!(spread > 0.0)) throw DomainError("bandwidth of a constant sample is zero");
  return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

/// Gaussian KDE evaluated from a binned grid (linear binning, direct truncated convolution).
/// With log_embedding the kernel smooths log(x) and the density is mapped back with 1/x.
class GaussianKde {
 public:
  explicit GaussianKde(std::vector<double> samples, std::optional<double> bandwidth = std::nullopt, bool log_embedding = false)
      : log_embedding_(log_embedding) {
    if (samples.size() < 2) throw DomainError("KDE needs at least two samples");
    if (log_embedding_)
      for (double& v : samples) {
        if (!(v > 0.0)) throw DomainError("log-embedded KDE needs positive samples");
        v = std::log(v);
      }
    h_ = bandwidth ? *bandwidth : silverman_bandwidth(samples);
    if (!(h_ > 0.0)) throw DomainError("KDE bandwidth must be positive");
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    lo_ = *mn - 6.0 * h_;
    const double hi = *mx + 6.0 * h_;
    std::size_t g = static_cast<std::size_t>(std::ceil((hi - lo_) / (h_ / 20.0))) + 1;
    g = std::clamp<std::size_t>(g, 512, std::size_t{1} << 20);
    step_ = (hi - lo_) / static_cast<double>(g - 1);
    std::vector<double> bins(g, 0.0);
    for (double v : samples) {
      const double pos = (v - lo_) / step_;
      const auto i = std::min(static_cast<std::size_t>(pos), g - 2);
      const double frac = pos - static_cast<double>(i);
      bins[i] += 1.0 - frac;
      bins[i + 1] += frac;
    }
    const auto reach = static_cast<std::size_t>(std::ceil(6.0 * h_ / step_));
    std::vector<double> kernel(reach + 1);
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h_ * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t k = 0; k <= reach; ++k) {
      const double z = static_cast<double>(k) * step_ / h_;
      kernel[k] = norm * std::exp(-0.5 * z * z);
    }
    density_.assign(g, 0.0);
    for (std::size_t i = 0; i < g; ++i) {
      if (bins[i] == 0.0) continue;
      const std::size_t a = i > reach ? i - reach : 0, b = std::min(g - 1, i + reach);
      for (std::size_t j = a; j <= b; ++j) density_[j] += bins[i] * kernel[i > j ? i - j : j - i];
    }
  }

  double bandwidth() const noexcept { return h_; }
  bool log_embedding() const noexcept { return log_embedding_; }

  /// Support on the natural scale outside of which the estimate is zero.
  double lower() const { return log_embedding_ ? std::exp(lo_) : lo_; }
  double upper() const {
    const double hi = lo_ + step_ * static_cast<double>(density_.size() - 1);
    return log_embedding_ ? std::exp(hi) : hi;
  }

  double log_density(double x) const {
    double y = x;
    if (log_embedding_) {
      if (!(x > 0.0)) return kNegInf;
      y = std::log(x);
    }
    const double pos = (y - lo_) / step_;
    if (!(pos >= 0.0) || pos > static_cast<double>(density_.size() - 1)) return kNegInf;
    const auto i = std::min(static_cast<std::size_t>(pos), density_.size() - 2);
    const double frac = pos - static_cast<double>(i);
    const double d = (1.0 - frac) * density_[i] + frac * density_[i + 1];
    if (!(d > 0.0)) return kNegInf;
    return std::log(d) - (log_embedding_ ? y : 0.0);
  }

 private:
  bool log_embedding_ = false;
  double h_ = 0.0;
  double lo_ = 0.0;
  double step_ = 1.0;
  std::vector<double> density_;
};

/// A marginal prior density p_m(phi) and the interval it is integrated over.
struct Marginal {
  std::string name;
  LogDensity1D log_pdf;
  double lower = -kInf;
  double upper = kInf;
};

inline Marginal prior_marginal(std::string name, const PriorSpec& p) {
  if (p.reference()) throw ConfigurationError("centred priors have no standalone marginal");
  const auto s = p.support();
  Marginal m{std::move(name), [p](double v) { return p.log_density(v); }, -kInf, kInf};
  if (s.kind == Support::Kind::Positive) m.lower = 0.0;
  if (s.kind == Support::Kind::Interval) {
    m.lower = s.lower;
    m.upper = s.upper;
  }
  return m;
}

inline Marginal kde_marginal(std::string name, std::vector<double> samples, bool log_embedding = false,
                             std::optional<double> bandwidth = std::nullopt) {
  auto kde = std::make_shared<GaussianKde>(std::move(samples), bandwidth, log_embedding);
  return Marginal{std::move(name), [kde](double v) { return kde->log_density(v); }, kde->lower(), kde->upper()};
}

/// Prior draws of any scalar node (basic or functional) of a graph.
inline std::vector<double> simulate_node_prior(const ModelGraph& g, const std::string& node, std::size_t n, std::uint64_t seed) {
  const auto idx = g.index_of(node);
  std::vector<double> out;
  out.reserve(n);
  auto rng = make_rng(seed, 7);
  for (std::size_t i = 0; i < n; ++i) {
    const auto theta = g.sample_prior(rng);
    if (g.node(idx).kind == NodeKind::Basic) {
      out.push_back(theta[g.node(idx).parameter_index]);
    } else {
      out.push_back(g.evaluate(theta).value(idx).front());
    }
  }
  return out;
}

enum class PoolingRule { Linear, Logarithmic, Dictatorial };

inline PoolingRule pooling_rule_from_string(const std::string& s) {
  if (s == "linear") return PoolingRule::Linear;
  if (s == "log" || s == "logarithmic") return PoolingRule::Logarithmic;
  if (s == "dictatorial") return PoolingRule::Dictatorial;
  throw SchemaError("pooling", "must be linear, log or dictatorial");
}

inline std::string to_string(PoolingRule r) {
  switch (r) {
    case PoolingRule::Linear: return "linear";
    case PoolingRule::Logarithmic: return "log";
    case PoolingRule::Dictatorial: return "dictatorial";
  }
  return "?";
}

/// g(p_1..p_M): normalized pooled density.
class PooledPrior {
 public:
  PooledPrior(std::vector<Marginal> marginals, PoolingRule rule, std::vector<double> weights, std::size_t dictator = 0)
      : marginals_(std::move(marginals)), rule_(rule), weights_(std::move(weights)), dictator_(dictator) {
    const std::size_t M = marginals_.size();
    if (M == 0) throw ConfigurationError("pooling needs at least one marginal");
    if (weights_.empty()) weights_.assign(M, 1.0 / static_cast<double>(M));
    if (weights_.size() != M) throw ConfigurationError("one pooling weight per marginal");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw ConfigurationError("pooling weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigurationError("pooling weights must sum to 1");
    if (dictator_ >= M) throw ConfigurationError("dictator index out of range");
    // linear: union of supports; logarithmic: intersection
    lower_ = marginals_[0].lower;
    upper_ = marginals_[0].upper;
    for (const auto& m : marginals_) {
      if (rule_ == PoolingRule::Linear) {
        lower_ = std::min(lower_, m.lower);
        upper_ = std::max(upper_, m.upper);
      } else {
        lower_ = std::max(lower_, m.lower);
        upper_ = std::min(upper_, m.upper);
      }
    }
    if (rule_ == PoolingRule::Dictatorial) {
      lower_ = marginals_[dictator_].lower;
      upper_ = marginals_[dictator_].upper;
    }
    if (rule_ == PoolingRule::Logarithmic) {
      if (!(upper_ > lower_)) throw EmptyPoolError("marginal supports do not overlap; logarithmic pool is empty");
      const double Z = integrate([this](double v) { return std::exp(unnormalized(v)); });
      if (!(Z > 0.0) || !std::isfinite(Z)) throw EmptyPoolError("logarithmic pool integrates to zero");
      log_z_ = std::log(Z);
    }
  }

  PoolingRule rule() const noexcept { return rule_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Marginal>& marginals() const noexcept { return marginals_; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  double log_normalizer() const noexcept { return log_z_; }

  double log_density(double phi) const {
    if (!(phi >= lower_ && phi <= upper_)) return kNegInf;
    return unnormalized(phi) - log_z_;
  }

  /// Integral of f over the pooled support (adaptive Gauss-Kronrod; infinite ends allowed).
  double integrate(const std::function<double(double)>& f) const {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lower_, upper_, 15, 1e-12);
  }

 private:
  double unnormalized(double phi) const {
    switch (rule_) {
      case PoolingRule::Dictatorial: return marginals_[dictator_].log_pdf(phi);
      case PoolingRule::Logarithmic: {
        double acc = 0.0;
        for (std::size_t m = 0; m < marginals_.size(); ++m) {
          if (weights_[m] == 0.0) continue;
          const double l = marginals_[m].log_pdf(phi);
          if (l == kNegInf) return kNegInf;
          acc += weights_[m] * l;
        }
        return acc;
      }
      case PoolingRule::Linear: {
        std::vector<double> terms;
        for (std::size_t m = 0; m < marginals_.size(); ++m)
          if (weights_[m] > 0.0) terms.push_back(std::log(weights_[m]) + marginals_[m].log_pdf(phi));
        return log_sum_exp(terms);
      }
    }
    return kNegInf;
  }

  std::vector<Marginal> marginals_;
  PoolingRule rule_;
  std::vector<double> weights_;
  std::size_t dictator_ = 0;
  double lower_ = -kInf;
  double upper_ = kInf;
  double log_z_ = 0.0;
};

inline PooledPrior pool_marginals(std::vector<Marginal> marginals, PoolingRule rule, std::vector<double> weights = {},
                                  std::size_t dictator = 0) {
  return PooledPrior(std::move(marginals), rule, std::move(weights), dictator);
}

/// One submodel: its joint density p_m(phi, psi_m, y_m) and prior marginal p_m(phi).
struct Submodel {
  std::string name;
  std::vector<std::string> psi_names;
  std::vector<Support> psi_supports;
  std::function<double(double phi, std::span<const double> psi)> log_joint;
  Marginal marginal;
  std::function<std::pair<double, std::vector<double>>(Rng&)> initial;  // (phi, psi) from the prior
};

/// Submodel from a graph whose basic node `link` is the shared parameter.
inline Submodel graph_submodel(const std::string& name, ModelGraph graph, std::vector<DataStream> data, const std::string& link) {
  const auto li = graph.index_of(link);
  if (graph.node(li).kind != NodeKind::Basic) throw ConfigurationError("link '" + link + "' must be a basic node");
  const auto pos = graph.node(li).parameter_index;
  auto post = std::make_shared<mcmc::GraphPosterior>(std::move(graph), std::move(data));
  Submodel s;
  s.name = name;
  const auto names = post->parameter_names();
  const auto supports = post->graph().supports();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (i != pos) {
      s.psi_names.push_back(names[i]);
      s.psi_supports.push_back(supports[i]);
    }
  auto assemble = [pos](double phi, std::span<const double> psi) {
    std::vector<double> theta;
    theta.reserve(psi.size() + 1);
    theta.insert(theta.end(), psi.begin(), psi.begin() + static_cast<long>(pos));
    theta.push_back(phi);
    theta.insert(theta.end(), psi.begin() + static_cast<long>(pos), psi.end());
    return theta;
  };
  s.log_joint = [post, assemble](double phi, std::span<const double> psi) {
    const auto theta = assemble(phi, psi);
    const double lp = post->graph().log_prior(theta);
    if (!std::isfinite(lp)) return kNegInf;
    return lp + post->log_likelihood(theta);
  };
  s.marginal = prior_marginal(name, post->graph().node(li).prior);
  s.initial = [post, pos](Rng& rng) {
    auto theta = post->graph().sample_prior(rng);
    const double phi = theta[pos];
    theta.erase(theta.begin() + static_cast<long>(pos));
    return std::make_pair(phi, theta);
  };
  return s;
}

/// log p_pool(phi) + sum_m [log p_m(phi, psi_m, y_m) - log p_m(phi)]
inline double meld_log_density(const std::vector<Submodel>& subs, const PooledPrior& pool, double phi,
                               const std::vector<std::span<const double>>& psi) {
  if (psi.size() != subs.size()) throw ConfigurationError("one psi block per submodel");
  double acc = pool.log_density(phi);
  if (acc == kNegInf) return kNegInf;
  for (std::size_t m = 0; m < subs.size(); ++m) {
    const double marg = subs[m].marginal.log_pdf(phi);
    if (marg == kNegInf) return kNegInf;
    const double j = subs[m].log_joint(phi, psi[m]);
    if (j == kNegInf) return kNegInf;
    acc += j - marg;
  }
  return acc;
}

/// Melded posterior as a LogDensityModel over (phi, psi_1, ..., psi_M).
class MeldTarget {
 public:
  MeldTarget(std::vector<Submodel> subs, PooledPrior pool, std::string link_name, Support link_support)
      : subs_(std::move(subs)), pool_(std::move(pool)), link_(std::move(link_name)), link_support_(link_support) {
    offsets_.push_back(1);
    for (const auto& s : subs_) {
      if (s.psi_names.size() != s.psi_supports.size()) throw ConfigurationError("submodel '" + s.name + "' supports mismatch");
      offsets_.push_back(offsets_.back() + s.psi_names.size());
    }
  }

  const std::vector<Submodel>& submodels() const noexcept { return subs_; }
  const PooledPrior& pool() const noexcept { return pool_; }

  std::size_t dimension() const noexcept { return offsets_.back(); }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> n{link_};
    for (const auto& s : subs_)
      for (const auto& p : s.psi_names) n.push_back(s.name + "." + p);
    return n;
  }

  Support support(std::size_t i) const {
    if (i == 0) return link_support_;
    for (std::size_t m = 0; m < subs_.size(); ++m)
      if (i < offsets_[m + 1]) return subs_[m].psi_supports[i - offsets_[m]];
    throw DomainError("parameter index out of range");
  }

  std::vector<double> to_natural(std::span<const double> x) const {
    std::vector<double> t(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) t[i] = support(i).to_natural(x[i]);
    return t;
  }
  std::vector<double> to_unconstrained(std::span<const double> t) const {
    std::vector<double> x(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) x[i] = support(i).to_unconstrained(t[i]);
    return x;
  }

  double log_density_natural(std::span<const double> t) const {
    std::vector<std::span<const double>> psi;
    for (std::size_t m = 0; m < subs_.size(); ++m) psi.push_back(t.subspan(offsets_[m], offsets_[m + 1] - offsets_[m]));
    return meld_log_density(subs_, pool_, t[0], psi);
  }

  double log_density(std::span<const double> x) const {
    const auto t = to_natural(x);
    const double l = log_density_natural(t);
    if (l == kNegInf) return l;
    double lj = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) lj += support(i).log_jacobian(x[i]);
    return l + lj;
  }

  std::vector<double> initial_natural(Rng& rng) const {
    std::vector<double> t{0.0};
    bool have_phi = false;
    for (const auto& s : subs_) {
      if (!s.initial) throw InitializationError("submodel '" + s.name + "' has no initial-value sampler");
      auto [phi, psi] = s.initial(rng);
      if (!have_phi) t[0] = phi;
      have_phi = true;
      t.insert(t.end(), psi.begin(), psi.end());
    }
    return t;
  }

 private:
  std::vector<Submodel> subs_;
  PooledPrior pool_;
  std::string link_;
  Support link_support_;
  std::vector<std::size_t> offsets_;
};

inline PosteriorSample meld_posterior(const MeldTarget& target, const mcmc::ChainConfig& cfg) {
  return mcmc::run_chain(target, cfg);
}

/// Density table: phi, each marginal, then each pooled prior.
inline std::string pooled_density_csv(const std::vector<Marginal>& marginals,
                                      const std::vector<std::pair<std::string, const PooledPrior*>>& pools,
                                      std::span<const double> grid) {
  std::string out = "phi";
  for (const auto& m : marginals) out += "," + m.name;
  for (const auto& [name, p] : pools) out += ",pool_" + name;
  out += "\n";
  for (double v : grid) {
    out += io::format_double(v);
    for (const auto& m : marginals) out += "," + io::format_double(std::exp(m.log_pdf(v)));
    for (const auto& [name, p] : pools) out += "," + io::format_double(std::exp(p->log_density(v)));
    out += "\n";
  }
  return out;
}

}  // namespace episynth::melding
