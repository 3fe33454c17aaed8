#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "episynth/core/error.hpp"
#include "episynth/core/io.hpp"

namespace episynth {

/// Posterior draws (natural scale), one row per stored draw.
struct PosteriorSample {
  std::vector<std::string> names;
  std::vector<std::vector<double>> draws;
  std::vector<double> log_posterior;
  /// Optional: per-draw log likelihood of each data node (same order as data_nodes).
  std::vector<std::string> data_nodes;
  std::vector<std::vector<double>> node_log_likelihood;
  double acceptance_rate = 0.0;

  std::size_t size() const noexcept { return draws.size(); }
  std::size_t dimension() const noexcept { return names.size(); }

  std::size_t column_index(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ConfigurationError("no parameter named '" + name + "' in sample");
    return static_cast<std::size_t>(it - names.begin());
  }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(draws.size());
    for (const auto& d : draws) out.push_back(d.at(j));
    return out;
  }
  std::vector<double> column(const std::string& name) const { return column(column_index(name)); }
};

namespace stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw DomainError("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size() - 1);
}

inline double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

/// Linear-interpolated empirical quantile (type 7).
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw DomainError("quantile of empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

/// Weighted quantile for particle summaries (weights need not be normalised).
inline double weighted_quantile(std::span<const double> x, std::span<const double> w, double q) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double acc = 0.0;
  for (auto i : idx) {
    acc += w[i] / total;
    if (acc >= q) return x[i];
  }
  return x[idx.back()];
}

inline double weighted_mean(std::span<const double> x, std::span<const double> w) {
  double s = 0.0, tw = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += w[i] * x[i];
    tw += w[i];
  }
  return s / tw;
}

/// Monte Carlo standard error of the mean by non-overlapping batch means (batch size ~ sqrt(n)).
inline double batch_means_mcse(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return std::sqrt(variance(x) / std::max<std::size_t>(n, 1));
  const auto b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t batches = n / b;
  std::vector<double> means;
  means.reserve(batches);
  for (std::size_t k = 0; k < batches; ++k) means.push_back(mean(x.subspan(k * b, b)));
  return std::sqrt(variance(means) / static_cast<double>(batches));
}

/// Split-R-hat over two or more chains of equal length.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) n = std::min(n, c.size() / 2);
  if (chains.empty() || n < 2) throw DomainError("split_rhat needs chains with at least 4 draws");
  for (const auto& c : chains) {
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(n), c.end());
  }
  std::vector<double> means, vars;
  for (const auto& h : halves) {
    means.push_back(mean(h));
    vars.push_back(variance(h));
  }
  const double w = mean(vars);
  const double b = static_cast<double>(n) * variance(means);
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b / static_cast<double>(n);
  return w > 0.0 ? std::sqrt(var_plus / w) : 1.0;
}

}  // namespace stats

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double mcse = 0.0;
};

inline std::vector<ParameterSummary> summarize(const PosteriorSample& s) {
  std::vector<ParameterSummary> out;
  for (std::size_t j = 0; j < s.dimension(); ++j) {
    const auto col = s.column(j);
    out.push_back({s.names[j], stats::mean(col), stats::sd(col), stats::quantile(col, 0.5), stats::quantile(col, 0.025),
                   stats::quantile(col, 0.975), stats::batch_means_mcse(col)});
  }
  return out;
}

inline std::string summaries_to_csv(const std::vector<ParameterSummary>& rows) {
  std::string out = "parameter,mean,sd,q2.5,median,q97.5,mcse\n";
  for (const auto& r : rows)
    out += r.name + "," + io::format_double(r.mean) + "," + io::format_double(r.sd) + "," + io::format_double(r.q025) + "," +
           io::format_double(r.median) + "," + io::format_double(r.q975) + "," + io::format_double(r.mcse) + "\n";
  return out;
}

/// Draw matrix as CSV: header row of parameter names then log_posterior.
inline std::string draws_to_csv(const PosteriorSample& s) {
  std::string out;
  for (const auto& n : s.names) out += n + ",";
  out += "log_posterior\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (double v : s.draws[i]) out += io::format_double(v) + ",";
    out += io::format_double(s.log_posterior.empty() ? 0.0 : s.log_posterior[i]) + "\n";
  }
  return out;
}

inline PosteriorSample draws_from_csv(const std::string& text, const std::string& path = "<memory>") {
  PosteriorSample s;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = io::split_csv_line(line);
    if (s.names.empty()) {
      if (f.empty() || f.back() != "log_posterior") throw IoError(path, "draws file must end with a log_posterior column");
      f.pop_back();
      s.names = f;
      continue;
    }
    if (f.size() != s.names.size() + 1) throw IoError(path, "line " + std::to_string(lineno) + ": wrong column count");
    std::vector<double> row;
    for (std::size_t j = 0; j < s.names.size(); ++j) row.push_back(io::parse_double(f[j], path, lineno));
    s.draws.push_back(std::move(row));
    s.log_posterior.push_back(io::parse_double(f.back(), path, lineno));
  }
  return s;
}

}  // namespace episynth
