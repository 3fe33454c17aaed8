#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "episynth/core/error.hpp"

namespace episynth {

/// Named age bands. Every age-indexed vector in the system has size() entries.
class AgeStructure {
 public:
  AgeStructure() = default;
  explicit AgeStructure(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw ConfigurationError("age structure needs at least one age group");
    std::set<std::string> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size()) throw ConfigurationError("age-group labels must be unique");
  }

  /// The seven bands used for the 2009 pandemic analyses.
  static AgeStructure standard_seven() { return AgeStructure({"<1", "1-4", "5-14", "15-24", "25-44", "45-64", "65+"}); }

  static AgeStructure numbered(std::size_t count) {
    std::vector<std::string> labels;
    for (std::size_t a = 0; a < count; ++a) labels.push_back("age" + std::to_string(a));
    return AgeStructure(std::move(labels));
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(std::size_t a) const { return labels_.at(a); }

  void require_length(std::size_t n, std::string_view what) const {
    if (n != labels_.size())
      throw ConfigurationError(std::string(what) + " has " + std::to_string(n) + " entries, expected " +
                               std::to_string(labels_.size()) + " (one per age group)");
  }

  bool operator==(const AgeStructure&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// Regular grid t_k = t0 + k * delta_t, k = 0..steps.
struct TimeGrid {
  double t0 = 0.0;
  double delta_t = 1.0;
  std::size_t steps = 1;

  TimeGrid() = default;
  TimeGrid(double start, double step, std::size_t count) : t0(start), delta_t(step), steps(count) { validate(); }

  void validate() const {
    if (!(delta_t > 0.0)) throw ConfigurationError("time grid step must be positive");
    if (steps < 1) throw ConfigurationError("time grid needs at least one step");
  }
  double time(std::size_t k) const noexcept { return t0 + static_cast<double>(k) * delta_t; }
  std::size_t points() const noexcept { return steps + 1; }
};

enum class StreamKind {
  ConfirmedCases,
  GPConsultations,
  ViroPositivity,
  SeroPrevalence,
  HospAdmissions,
  Deaths,
  ICUPrevalence,
  PointEstimateLogScale,
};

inline constexpr std::array<std::pair<StreamKind, std::string_view>, 8> kStreamKindNames{{
    {StreamKind::ConfirmedCases, "ConfirmedCases"},
    {StreamKind::GPConsultations, "GPConsultations"},
    {StreamKind::ViroPositivity, "ViroPositivity"},
    {StreamKind::SeroPrevalence, "SeroPrevalence"},
    {StreamKind::HospAdmissions, "HospAdmissions"},
    {StreamKind::Deaths, "Deaths"},
    {StreamKind::ICUPrevalence, "ICUPrevalence"},
    {StreamKind::PointEstimateLogScale, "PointEstimateLogScale"},
}};

inline std::string_view to_string(StreamKind kind) {
  for (const auto& [k, name] : kStreamKindNames)
    if (k == kind) return name;
  return "Unknown";
}

inline StreamKind stream_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kStreamKindNames)
    if (n == name) return k;
  throw ConfigurationError("unknown stream kind '" + std::string(name) + "'");
}

/// Binomial-type streams carry a sample-size denominator.
inline bool has_binomial_denominator(StreamKind kind) {
  return kind == StreamKind::ViroPositivity || kind == StreamKind::SeroPrevalence;
}

/// One observation. For PointEstimateLogScale streams `value` is the log-scale point
/// estimate and `denominator` carries its standard deviation.
struct Observation {
  std::size_t time_index = 0;
  std::size_t age_index = 0;
  double value = 0.0;
  std::optional<double> denominator;

  bool operator==(const Observation&) const = default;
};

struct DataStream {
  std::string name;
  StreamKind kind = StreamKind::GPConsultations;
  std::vector<Observation> observations;

  bool operator==(const DataStream&) const = default;

  /// Checks counts, denominators and (when given) index ranges.
  void validate(std::optional<std::size_t> time_points = std::nullopt,
                std::optional<std::size_t> age_groups = std::nullopt) const {
    for (const auto& obs : observations) {
      const std::string where = "stream '" + name + "' at t=" + std::to_string(obs.time_index);
      if (time_points && obs.time_index >= *time_points) throw ConfigurationError(where + ": time index outside grid");
      if (age_groups && obs.age_index >= *age_groups) throw ConfigurationError(where + ": age index out of range");
      if (kind == StreamKind::PointEstimateLogScale) {
        if (!obs.denominator || !(*obs.denominator > 0.0))
          throw ConfigurationError(where + ": point estimate needs a positive sd in the denominator column");
        continue;
      }
      if (obs.value < 0.0) throw ConfigurationError(where + ": negative count");
      if (has_binomial_denominator(kind)) {
        if (!obs.denominator) throw ConfigurationError(where + ": binomial stream needs a denominator");
        if (*obs.denominator < obs.value) throw ConfigurationError(where + ": denominator below count");
      }
    }
  }

  /// Observations whose time index lies in [first, last).
  DataStream window(std::size_t first, std::size_t last) const {
    DataStream out{name, kind, {}};
    std::copy_if(observations.begin(), observations.end(), std::back_inserter(out.observations),
                 [&](const Observation& o) { return o.time_index >= first && o.time_index < last; });
    return out;
  }
};

}  // namespace episynth
