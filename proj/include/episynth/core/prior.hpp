#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <variant>

#include "episynth/core/error.hpp"
#include "episynth/core/math.hpp"

namespace episynth {

/// Support of a basic parameter; determines the unconstrained transform used by samplers.
struct Support {
  enum class Kind { Real, Positive, Interval };
  Kind kind = Kind::Real;
  double lower = 0.0;
  double upper = 1.0;

  static Support real() { return {Kind::Real, 0.0, 0.0}; }
  static Support positive() { return {Kind::Positive, 0.0, 0.0}; }
  static Support interval(double lo, double hi) {
    if (!(hi > lo)) throw DomainError("interval support needs lower < upper");
    return {Kind::Interval, lo, hi};
  }
  static Support unit() { return interval(0.0, 1.0); }

  bool contains(double v) const {
    switch (kind) {
      case Kind::Real: return std::isfinite(v);
      case Kind::Positive: return v > 0.0 && std::isfinite(v);
      case Kind::Interval: return v >= lower && v <= upper;
    }
    return false;
  }

  double to_unconstrained(double v) const {
    switch (kind) {
      case Kind::Real: return v;
      case Kind::Positive: return std::log(v);
      case Kind::Interval: return logit((v - lower) / (upper - lower));
    }
    return v;
  }

  double to_natural(double x) const {
    switch (kind) {
      case Kind::Real: return x;
      case Kind::Positive: return std::exp(x);
      case Kind::Interval: return lower + (upper - lower) * inv_logit(x);
    }
    return x;
  }

  /// log |d natural / d x|
  double log_jacobian(double x) const {
    switch (kind) {
      case Kind::Real: return 0.0;
      case Kind::Positive: return x;
      case Kind::Interval: return std::log(upper - lower) - log1p_exp(-x) - log1p_exp(x);
    }
    return 0.0;
  }
};

namespace prior {

struct Uniform {
  double lower = 0.0;
  double upper = 1.0;
};
struct Beta {
  double a = 1.0;
  double b = 1.0;
};
struct Normal {
  double mean = 0.0;
  double sd = 1.0;
};
struct LogNormal {
  double meanlog = 0.0;
  double sdlog = 1.0;
};
/// logit(p) ~ Normal(logit(p_reference), sd), with p_reference another basic node.
struct LogitNormalCentered {
  std::string reference;
  double sd = 1.0;
};

}  // namespace prior

class PriorSpec {
 public:
  using Family = std::variant<prior::Uniform, prior::Beta, prior::Normal, prior::LogNormal, prior::LogitNormalCentered>;

  PriorSpec() : family_(prior::Uniform{}) {}
  PriorSpec(Family family) : family_(std::move(family)) { validate(); }  // NOLINT(implicit)

  static PriorSpec uniform(double lo = 0.0, double hi = 1.0) { return PriorSpec(prior::Uniform{lo, hi}); }
  static PriorSpec beta(double a, double b) { return PriorSpec(prior::Beta{a, b}); }
  static PriorSpec normal(double mean, double sd) { return PriorSpec(prior::Normal{mean, sd}); }
  static PriorSpec log_normal(double meanlog, double sdlog) { return PriorSpec(prior::LogNormal{meanlog, sdlog}); }
  static PriorSpec logit_normal_centered(std::string reference, double sd) {
    return PriorSpec(prior::LogitNormalCentered{std::move(reference), sd});
  }

  const Family& family() const noexcept { return family_; }

  /// Name of the node this prior is centred on, if hierarchical.
  std::optional<std::string> reference() const {
    if (const auto* c = std::get_if<prior::LogitNormalCentered>(&family_)) return c->reference;
    return std::nullopt;
  }

  /// Flat priors carry no information for identifiability checks.
  bool is_informative() const { return !std::holds_alternative<prior::Uniform>(family_); }

  Support support() const {
    return std::visit(
        [](const auto& f) -> Support {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, prior::Uniform>) return Support::interval(f.lower, f.upper);
          else if constexpr (std::is_same_v<F, prior::Beta>) return Support::unit();
          else if constexpr (std::is_same_v<F, prior::Normal>) return Support::real();
          else if constexpr (std::is_same_v<F, prior::LogNormal>) return Support::positive();
          else return Support::unit();
        },
        family_);
  }

  /// Log density at `value`; `reference_value` is required for centred priors.
  double log_density(double value, std::optional<double> reference_value = std::nullopt) const {
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, prior::Uniform>) {
            return (value >= f.lower && value <= f.upper) ? -std::log(f.upper - f.lower) : kNegInf;
          } else if constexpr (std::is_same_v<F, prior::Beta>) {
            return beta_logpdf(value, f.a, f.b);
          } else if constexpr (std::is_same_v<F, prior::Normal>) {
            return normal_logpdf(value, f.mean, f.sd);
          } else if constexpr (std::is_same_v<F, prior::LogNormal>) {
            if (!(value > 0.0)) return kNegInf;
            return normal_logpdf(std::log(value), f.meanlog, f.sdlog) - std::log(value);
          } else {
            if (!reference_value) throw ConfigurationError("centred prior needs the value of '" + f.reference + "'");
            if (!(value > 0.0 && value < 1.0) || !(*reference_value > 0.0 && *reference_value < 1.0)) return kNegInf;
            // density of p, including the Jacobian of the logit transform
            return normal_logpdf(logit(value), logit(*reference_value), f.sd) - std::log(value) - std::log1p(-value);
          }
        },
        family_);
  }

  template <class Rng>
  double sample(Rng& rng, std::optional<double> reference_value = std::nullopt) const {
    return std::visit(
        [&](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, prior::Uniform>) {
            return std::uniform_real_distribution<double>(f.lower, f.upper)(rng);
          } else if constexpr (std::is_same_v<F, prior::Beta>) {
            const double x = std::gamma_distribution<double>(f.a, 1.0)(rng);
            const double y = std::gamma_distribution<double>(f.b, 1.0)(rng);
            return x / (x + y);
          } else if constexpr (std::is_same_v<F, prior::Normal>) {
            return std::normal_distribution<double>(f.mean, f.sd)(rng);
          } else if constexpr (std::is_same_v<F, prior::LogNormal>) {
            return std::exp(std::normal_distribution<double>(f.meanlog, f.sdlog)(rng));
          } else {
            if (!reference_value) throw ConfigurationError("centred prior needs the value of '" + f.reference + "'");
            return inv_logit(std::normal_distribution<double>(logit(*reference_value), f.sd)(rng));
          }
        },
        family_);
  }

  std::string describe() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, prior::Uniform>)
            return "uniform(" + std::to_string(f.lower) + "," + std::to_string(f.upper) + ")";
          else if constexpr (std::is_same_v<F, prior::Beta>)
            return "beta(" + std::to_string(f.a) + "," + std::to_string(f.b) + ")";
          else if constexpr (std::is_same_v<F, prior::Normal>)
            return "normal(" + std::to_string(f.mean) + "," + std::to_string(f.sd) + ")";
          else if constexpr (std::is_same_v<F, prior::LogNormal>)
            return "lognormal(" + std::to_string(f.meanlog) + "," + std::to_string(f.sdlog) + ")";
          else
            return "logitnormal(" + f.reference + "," + std::to_string(f.sd) + ")";
        },
        family_);
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, prior::Uniform>) {
            if (!(f.upper > f.lower)) throw DomainError("uniform prior needs lower < upper");
          } else if constexpr (std::is_same_v<F, prior::Beta>) {
            if (!(f.a > 0.0 && f.b > 0.0)) throw DomainError("beta prior needs positive shapes");
          } else if constexpr (std::is_same_v<F, prior::Normal>) {
            if (!(f.sd > 0.0)) throw DomainError("normal prior needs sd > 0");
          } else if constexpr (std::is_same_v<F, prior::LogNormal>) {
            if (!(f.sdlog > 0.0)) throw DomainError("lognormal prior needs sdlog > 0");
          } else {
            if (!(f.sd > 0.0)) throw DomainError("centred prior needs sd > 0");
            if (f.reference.empty()) throw ConfigurationError("centred prior needs a reference node");
          }
        },
        family_);
  }

  Family family_;
};

}  // namespace episynth
