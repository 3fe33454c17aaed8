#pragma once

// First-stage joint regression of GP consultations and virological positivity.
//
// Consultations C_{a,t} ~ Poisson (or NegBin) with mean G_{a,t} + B_{a,t}, positives
// ~ Binomial(n_{a,t}, G/(G+B)). log G and log B are linear in age intercepts plus a
// Legendre time basis on tau in [-1,1]; the background coefficients beta_B enter both
// streams. Influenza-attributable consultations divided by the consultation
// probability give the log number symptomatic, summarised as a normal on log scale.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/legendre.hpp>
#include <Eigen/Dense>

#include "episynth/core/error.hpp"
#include "episynth/core/io.hpp"
#include "episynth/core/log.hpp"
#include "episynth/core/math.hpp"
#include "episynth/core/parallel.hpp"
#include "episynth/core/random.hpp"
#include "episynth/core/types.hpp"
#include "episynth/mcmc/posterior.hpp"
#include "episynth/mcmc/sampler.hpp"

namespace episynth::regression {

/// Probability of consulting a GP given symptoms over one time segment.
struct ConsultProbability {
  double alpha = 1.0;
  double beta = 1.0;
  std::optional<double> fixed;

  double draw(Rng& rng) const {
    if (fixed) return *fixed;
    const double x = std::gamma_distribution<double>(alpha, 1.0)(rng);
    const double y = std::gamma_distribution<double>(beta, 1.0)(rng);
    return x / (x + y);
  }
  void validate() const {
    if (fixed && !(*fixed > 0.0 && *fixed <= 1.0)) throw ConfigurationError("fixed consultation probability must lie in (0,1]");
    if (!fixed && !(alpha > 0.0 && beta > 0.0)) throw ConfigurationError("consultation probability beta parameters must be positive");
  }
};

struct JointRegressionSpec {
  std::size_t ages = 1;
  std::size_t degree = 3;
  bool shared_time = false;  // false: a separate polynomial per age group
  double prior_sd = 10.0;
  double eta = kInf;  // NegBin size for consultations; inf = Poisson
  std::vector<std::size_t> p_G_breakpoints;  // time indices starting segments 1..
  std::vector<ConsultProbability> p_G{ConsultProbability{}};
  std::size_t draws_per_sample = 1;  // p_G draws per posterior draw

  void validate() const {
    if (ages == 0) throw ConfigurationError("regression needs at least one age group");
    if (p_G.size() != p_G_breakpoints.size() + 1)
      throw ConfigurationError("consultation probability needs one segment per breakpoint plus one");
    if (!std::is_sorted(p_G_breakpoints.begin(), p_G_breakpoints.end()))
      throw ConfigurationError("consultation probability breakpoints must be increasing");
    for (const auto& p : p_G) p.validate();
    if (!(prior_sd > 0.0)) throw ConfigurationError("coefficient prior sd must be positive");
    if (!(eta > 0.0)) throw ConfigurationError("eta must be positive");
  }

  const ConsultProbability& p_G_at(std::size_t t) const {
    const auto it = std::upper_bound(p_G_breakpoints.begin(), p_G_breakpoints.end(), t);
    return p_G[static_cast<std::size_t>(it - p_G_breakpoints.begin())];
  }
};

struct Cell {
  std::size_t age = 0;
  std::size_t time = 0;
  std::optional<double> consultations;
  std::optional<double> positives, tested;
};

/// Design for one jointly fitted set of ages: intercept per age + shared time basis.
class BlockModel {
 public:
  BlockModel(std::vector<std::size_t> ages, std::vector<Cell> cells, const JointRegressionSpec& spec, double t_min,
             double t_max)
      : ages_(std::move(ages)), cells_(std::move(cells)), degree_(spec.degree), prior_sd_(spec.prior_sd), eta_(spec.eta),
        t_min_(t_min), t_max_(t_max) {
    for (std::size_t a : ages_) names_.push_back(ages_.size() == 1 ? "beta_G.0" : "beta_G.a" + std::to_string(a));
    for (std::size_t k = 1; k <= degree_; ++k) names_.push_back("beta_G.t" + std::to_string(k));
    for (std::size_t a : ages_) names_.push_back(ages_.size() == 1 ? "beta_B.0" : "beta_B.a" + std::to_string(a));
    for (std::size_t k = 1; k <= degree_; ++k) names_.push_back("beta_B.t" + std::to_string(k));
    check_rank();
  }

  std::size_t dimension() const noexcept { return names_.size(); }
  std::vector<std::string> parameter_names() const { return names_; }
  std::vector<double> to_natural(std::span<const double> x) const { return {x.begin(), x.end()}; }
  std::vector<double> to_unconstrained(std::span<const double> x) const { return {x.begin(), x.end()}; }
  const std::vector<std::size_t>& ages() const noexcept { return ages_; }
  std::size_t half() const noexcept { return ages_.size() + degree_; }

  double tau(double t) const { return t_max_ > t_min_ ? 2.0 * (t - t_min_) / (t_max_ - t_min_) - 1.0 : 0.0; }

  /// Design row for (age slot, time): indicator of the age, then P_1..P_degree(tau).
  std::vector<double> row(std::size_t slot, double t) const {
    std::vector<double> r(half(), 0.0);
    r[slot] = 1.0;
    const double x = tau(t);
    for (std::size_t k = 1; k <= degree_; ++k) r[ages_.size() + k - 1] = boost::math::legendre_p(static_cast<int>(k), x);
    return r;
  }

  std::size_t slot_of(std::size_t age) const {
    return static_cast<std::size_t>(std::find(ages_.begin(), ages_.end(), age) - ages_.begin());
  }

  double linear(std::span<const double> beta, const std::vector<double>& r) const {
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += beta[i] * r[i];
    return s;
  }

  /// (G, B) at a cell.
  std::pair<double, double> components(std::span<const double> theta, std::size_t age, double t) const {
    const auto r = row(slot_of(age), t);
    return {std::exp(linear(theta.first(half()), r)), std::exp(linear(theta.subspan(half()), r))};
  }

  double log_likelihood(std::span<const double> theta) const {
    double ll = 0.0;
    for (const auto& c : cells_) {
      const auto [G, B] = components(theta, c.age, static_cast<double>(c.time));
      if (!std::isfinite(G) || !std::isfinite(B) || !(G + B > 0.0)) return kNegInf;
      if (c.consultations) ll += negbin_logpmf(to_count(*c.consultations), G + B, eta_);
      if (c.positives) ll += binomial_loglik(to_count(*c.positives), to_count(*c.tested), G / (G + B));
    }
    return ll;
  }

  double log_density(std::span<const double> x) const {
    double lp = 0.0;
    for (double v : x) lp += normal_logpdf(v, 0.0, prior_sd_);
    const double ll = log_likelihood(x);
    return std::isfinite(ll) ? lp + ll : kNegInf;
  }

  /// Log-linear least squares on the empirical split of consultations.
  std::vector<double> initial_natural(Rng& rng) const {
    const std::size_t h = half();
    std::vector<std::vector<double>> rows;
    std::vector<double> yg, yb;
    for (const auto& c : cells_) {
      if (!c.consultations || !c.positives || !(*c.tested > 0.0)) continue;
      const double share = (*c.positives + 0.5) / (*c.tested + 1.0);
      rows.push_back(row(slot_of(c.age), static_cast<double>(c.time)));
      yg.push_back(std::log(*c.consultations * share + 0.5));
      yb.push_back(std::log(*c.consultations * (1.0 - share) + 0.5));
    }
    std::vector<double> out(2 * h, 0.0);
    if (rows.size() >= h) {
      Eigen::MatrixXd X(rows.size(), h);
      Eigen::VectorXd g(rows.size()), b(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < h; ++j) X(i, j) = rows[i][j];
        g[i] = yg[i];
        b[i] = yb[i];
      }
      const auto qr = X.colPivHouseholderQr();
      const Eigen::VectorXd bg = qr.solve(g), bb = qr.solve(b);
      for (std::size_t j = 0; j < h; ++j) {
        out[j] = bg[j];
        out[h + j] = bb[j];
      }
    }
    std::normal_distribution<double> jitter(0.0, 0.01);
    for (auto& v : out) v += jitter(rng);
    return out;
  }

 private:
  void check_rank() const {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<std::vector<double>> rows;
    for (const auto& c : cells_)
      if (seen.insert({c.age, c.time}).second) rows.push_back(row(slot_of(c.age), static_cast<double>(c.time)));
    const std::size_t h = half();
    Eigen::MatrixXd X(rows.size(), h);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < h; ++j) X(i, j) = rows[i][j];
    if (rows.size() < h || static_cast<std::size_t>(X.colPivHouseholderQr().rank()) < h)
      throw ConfigurationError("regression design matrix is rank deficient (" + std::to_string(rows.size()) +
                               " distinct cells for " + std::to_string(h) + " columns per component)");
  }

  std::vector<std::size_t> ages_;
  std::vector<Cell> cells_;
  std::vector<std::string> names_;
  std::size_t degree_;
  double prior_sd_, eta_, t_min_, t_max_;
};

struct LogEstimate {
  std::size_t age = 0;
  double y_hat = 0.0;      // posterior mean of log N_S
  double sigma_hat = 0.0;  // posterior sd of log N_S
  double influenza = 0.0;  // posterior mean of total influenza consultations
  double background = 0.0;
  double observed = 0.0;  // observed total consultations
};

struct RegressionFit {
  std::vector<BlockModel> blocks;
  std::vector<PosteriorSample> samples;  // one per block
  std::vector<LogEstimate> estimates;    // one per age
  bool background_only = false;

  /// Stage-one output as a log-scale point-estimate stream (time index 0, one row per age).
  DataStream to_stream(const std::string& name) const {
    DataStream s{name, StreamKind::PointEstimateLogScale, {}};
    for (const auto& e : estimates) s.observations.push_back({0, e.age, e.y_hat, e.sigma_hat});
    return s;
  }
};

inline std::vector<Cell> collect_cells(const DataStream& consultations, const DataStream& positivity) {
  std::map<std::pair<std::size_t, std::size_t>, Cell> cells;
  for (const auto& o : consultations.observations) {
    auto& c = cells[{o.age_index, o.time_index}];
    c.age = o.age_index;
    c.time = o.time_index;
    if (c.consultations) throw ConfigurationError("duplicate consultation count at t=" + std::to_string(o.time_index));
    c.consultations = o.value;
  }
  for (const auto& o : positivity.observations) {
    if (!o.denominator || !(*o.denominator > 0.0))
      throw ConfigurationError("positivity denominators must be positive (t=" + std::to_string(o.time_index) + ")");
    auto& c = cells[{o.age_index, o.time_index}];
    c.age = o.age_index;
    c.time = o.time_index;
    c.positives = o.value;
    c.tested = *o.denominator;
  }
  std::vector<Cell> out;
  for (auto& [_, c] : cells) out.push_back(c);
  return out;
}

inline RegressionFit fit_joint_regression(const JointRegressionSpec& spec, const DataStream& consultations,
                                          const DataStream& positivity, const mcmc::ChainConfig& chain,
                                          std::size_t threads = default_threads()) {
  spec.validate();
  consultations.validate(std::nullopt, spec.ages);
  positivity.validate(std::nullopt, spec.ages);
  const auto cells = collect_cells(consultations, positivity);

  std::set<std::size_t> ct, pt;
  for (const auto& o : consultations.observations) ct.insert(o.time_index);
  for (const auto& o : positivity.observations) pt.insert(o.time_index);
  if (ct.empty() || pt.empty() || *ct.rbegin() < *pt.begin() || *pt.rbegin() < *ct.begin())
    throw ConfigurationError("consultation and positivity streams do not overlap in time");
  const double t_min = static_cast<double>(std::min(*ct.begin(), *pt.begin()));
  const double t_max = static_cast<double>(std::max(*ct.rbegin(), *pt.rbegin()));

  RegressionFit fit;
  double total_pos = 0.0, total_cons = 0.0;
  for (const auto& c : cells) {
    total_pos += c.positives.value_or(0.0);
    total_cons += c.consultations.value_or(0.0);
  }
  if (total_pos == 0.0 && total_cons > 0.0) {
    fit.background_only = true;
    log::warn("event=degenerate_positivity detail=\"all positivity zero; consultations are background only\"");
  }

  std::vector<std::vector<std::size_t>> groups;
  if (spec.shared_time) {
    groups.emplace_back();
    for (std::size_t a = 0; a < spec.ages; ++a) groups.back().push_back(a);
  } else {
    for (std::size_t a = 0; a < spec.ages; ++a) groups.push_back({a});
  }
  for (const auto& g : groups) {
    std::vector<Cell> mine;
    for (const auto& c : cells)
      if (std::find(g.begin(), g.end(), c.age) != g.end()) mine.push_back(c);
    fit.blocks.emplace_back(g, std::move(mine), spec, t_min, t_max);
  }

  fit.samples.resize(fit.blocks.size());
  parallel_for(fit.blocks.size(), threads, [&](std::size_t b) {
    mcmc::ChainConfig local = chain;
    local.seed = make_rng(chain.seed, 0x7e9, b)();
    fit.samples[b] = mcmc::run_chain(fit.blocks[b], local);
  });

  // log N_S per draw: sum over observed consultation times of G / p_G.
  for (std::size_t b = 0; b < fit.blocks.size(); ++b) {
    const auto& block = fit.blocks[b];
    const auto& sample = fit.samples[b];
    for (std::size_t a : block.ages()) {
      std::vector<std::size_t> times;
      double observed = 0.0;
      for (const auto& o : consultations.observations)
        if (o.age_index == a) {
          times.push_back(o.time_index);
          observed += o.value;
        }
      if (times.empty()) throw ConfigurationError("no consultations for age group " + std::to_string(a));
      Rng rng = make_rng(chain.seed, 0x9a, a);
      std::vector<double> log_ns;
      double flu = 0.0, bg = 0.0;
      for (const auto& d : sample.draws) {
        double g_sum = 0.0, b_sum = 0.0;
        std::vector<double> g_t;
        for (std::size_t t : times) {
          const auto [G, B] = block.components(d, a, static_cast<double>(t));
          g_t.push_back(G);
          g_sum += G;
          b_sum += B;
        }
        flu += g_sum;
        bg += b_sum;
        for (std::size_t r = 0; r < spec.draws_per_sample; ++r) {
          std::map<const ConsultProbability*, double> segment;
          double ns = 0.0;
          for (std::size_t i = 0; i < times.size(); ++i) {
            const auto* seg = &spec.p_G_at(times[i]);
            auto it = segment.find(seg);
            if (it == segment.end()) it = segment.emplace(seg, seg->draw(rng)).first;
            ns += g_t[i] / it->second;
          }
          log_ns.push_back(std::log(ns));
        }
      }
      const double n = static_cast<double>(sample.size());
      fit.estimates.push_back({a, stats::mean(log_ns), stats::sd(log_ns), flu / n, bg / n, observed});
    }
  }
  std::sort(fit.estimates.begin(), fit.estimates.end(), [](const auto& x, const auto& y) { return x.age < y.age; });
  return fit;
}

inline std::string estimates_to_csv(const RegressionFit& fit) {
  std::string out = "age_index,y_hat,sigma_hat,influenza_consultations,background_consultations,observed_consultations\n";
  for (const auto& e : fit.estimates)
    out += std::to_string(e.age) + "," + io::format_double(e.y_hat) + "," + io::format_double(e.sigma_hat) + "," +
           io::format_double(e.influenza) + "," + io::format_double(e.background) + "," + io::format_double(e.observed) +
           "\n";
  return out;
}

inline JointRegressionSpec regression_spec_from_json(const io::json& j) {
  JointRegressionSpec s;
  s.ages = io::get_as<std::size_t>(j, "age_groups", "regression");
  s.degree = io::get_or<std::size_t>(j, "degree", 3);
  s.shared_time = io::get_or<bool>(j, "shared_time", false);
  s.prior_sd = io::get_or<double>(j, "prior_sd", 10.0);
  if (j.contains("eta") && !j["eta"].is_null()) s.eta = io::get_as<double>(j, "eta", "regression");
  s.draws_per_sample = io::get_or<std::size_t>(j, "draws_per_sample", 1);
  if (j.contains("p_G")) {
    s.p_G.clear();
    const auto& pg = j["p_G"];
    auto one = [](const io::json& e) {
      ConsultProbability c;
      if (e.contains("fixed")) c.fixed = io::get_as<double>(e, "fixed", "p_G");
      else {
        c.alpha = io::get_as<double>(e, "alpha", "p_G");
        c.beta = io::get_as<double>(e, "beta", "p_G");
      }
      return c;
    };
    if (pg.is_array())
      for (const auto& e : pg) s.p_G.push_back(one(e));
    else
      s.p_G.push_back(one(pg));
  }
  s.p_G_breakpoints = io::get_or<std::vector<std::size_t>>(j, "p_G_breakpoints", {});
  try {
    s.validate();
  } catch (const ConfigurationError& e) {
    throw SchemaError("regression", e.what());
  }
  return s;
}

}  // namespace episynth::regression
