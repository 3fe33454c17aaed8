#pragma once

// CSV ingestion/emission of data streams and the JSON data manifest.
//
// Stream CSV layout:
//   # kind=<StreamKind>            (optional file-level header; else taken from the manifest)
//   time_index,age_index,value,denominator
//   3,0,17,                        (blank denominator where not applicable)
//
// Batch CSV layout (sequential updating) adds a leading `stream` column naming the stream.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "episynth/core/error.hpp"
#include "episynth/core/prior.hpp"
#include "episynth/core/types.hpp"

namespace episynth::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Shortest decimal text that round-trips a double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& text, const std::string& path, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw IoError(path, "line " + std::to_string(line) + ": cannot parse number '" + text + "'");
  }
}

inline std::size_t parse_index(const std::string& text, const std::string& path, std::size_t line) {
  const double v = parse_double(text, path, line);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
    throw IoError(path, "line " + std::to_string(line) + ": index must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot write file");
  out << text;
}

inline Observation parse_observation(const std::vector<std::string>& f, std::size_t offset, const std::string& path,
                                     std::size_t line) {
  if (f.size() < offset + 3)
    throw IoError(path, "line " + std::to_string(line) + ": expected time_index,age_index,value,denominator");
  Observation o;
  o.time_index = parse_index(f[offset], path, line);
  o.age_index = parse_index(f[offset + 1], path, line);
  o.value = parse_double(f[offset + 2], path, line);
  if (f.size() > offset + 3 && !f[offset + 3].empty()) o.denominator = parse_double(f[offset + 3], path, line);
  return o;
}

/// Parse one stream CSV. `kind` overrides/provides the stream kind when the file has no header comment.
inline DataStream parse_stream_csv(const std::string& text, const std::string& name, std::optional<StreamKind> kind,
                                   const std::string& path = "<memory>") {
  DataStream s;
  s.name = name;
  std::optional<StreamKind> file_kind;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto pos = line.find("kind=");
      if (pos != std::string::npos) {
        auto k = line.substr(pos + 5);
        while (!k.empty() && k.back() == ' ') k.pop_back();
        file_kind = stream_kind_from_string(k);
      }
      continue;
    }
    if (!header_seen) {
      const auto f = split_csv_line(line);
      if (f.size() < 3 || f[0] != "time_index" || f[1] != "age_index" || f[2] != "value")
        throw IoError(path, "expected header time_index,age_index,value,denominator");
      header_seen = true;
      continue;
    }
    s.observations.push_back(parse_observation(split_csv_line(line), 0, path, lineno));
  }
  if (kind && file_kind && *kind != *file_kind)
    throw IoError(path, "stream kind in file (" + std::string(to_string(*file_kind)) + ") disagrees with manifest");
  if (!kind && !file_kind) throw IoError(path, "stream kind not given in file header or manifest");
  s.kind = kind ? *kind : *file_kind;
  s.validate();
  return s;
}

inline std::string stream_to_csv(const DataStream& s) {
  std::string out = "# kind=" + std::string(to_string(s.kind)) + "\ntime_index,age_index,value,denominator\n";
  for (const auto& o : s.observations) {
    out += std::to_string(o.time_index) + "," + std::to_string(o.age_index) + "," + format_double(o.value) + ",";
    if (o.denominator) out += format_double(*o.denominator);
    out += "\n";
  }
  return out;
}

inline DataStream read_stream_csv(const fs::path& path, const std::string& name,
                                  std::optional<StreamKind> kind = std::nullopt) {
  return parse_stream_csv(read_text(path), name, kind, path.string());
}

inline void write_stream_csv(const fs::path& path, const DataStream& s) { write_text(path, stream_to_csv(s)); }

/// Batch file: rows tagged by stream name; kinds come from `kinds`.
inline std::vector<DataStream> parse_batch_csv(const std::string& text, const std::map<std::string, StreamKind>& kinds,
                                               const std::string& path = "<memory>") {
  std::map<std::string, DataStream> by_name;
  std::vector<std::string> order;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_csv_line(line);
    if (!header_seen) {
      if (f.size() < 4 || f[0] != "stream") throw IoError(path, "expected header stream,time_index,age_index,value,denominator");
      header_seen = true;
      continue;
    }
    if (f.empty()) continue;
    auto k = kinds.find(f[0]);
    if (k == kinds.end()) throw IoError(path, "line " + std::to_string(lineno) + ": unknown stream '" + f[0] + "'");
    auto [it, inserted] = by_name.try_emplace(f[0], DataStream{f[0], k->second, {}});
    if (inserted) order.push_back(f[0]);
    it->second.observations.push_back(parse_observation(f, 1, path, lineno));
  }
  std::vector<DataStream> out;
  for (const auto& n : order) {
    by_name[n].validate();
    out.push_back(std::move(by_name[n]));
  }
  return out;
}

inline std::string batch_to_csv(const std::vector<DataStream>& streams) {
  std::string out = "stream,time_index,age_index,value,denominator\n";
  for (const auto& s : streams)
    for (const auto& o : s.observations) {
      out += s.name + "," + std::to_string(o.time_index) + "," + std::to_string(o.age_index) + "," +
             format_double(o.value) + ",";
      if (o.denominator) out += format_double(*o.denominator);
      out += "\n";
    }
  return out;
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

// ---- JSON helpers ---------------------------------------------------------

inline const json& require(const json& j, const std::string& key, const std::string& context = "") {
  const std::string field = context.empty() ? key : context + "." + key;
  if (!j.is_object() || !j.contains(key)) throw SchemaError(field, "missing required field");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& key, const std::string& context = "") {
  const std::string field = context.empty() ? key : context + "." + key;
  const auto& v = require(j, key, context);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(field, std::string("wrong type (") + e.what() + ")");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& context = "") {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get_as<T>(j, key, context);
}

inline json parse_json_file(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(path.string(), std::string("malformed JSON (") + e.what() + ")");
  }
}

/// {"family": "uniform"|"beta"|"normal"|"lognormal"|"logitnormal", ...hyperparameters}
inline PriorSpec prior_from_json(const json& j, const std::string& context) {
  const auto family = get_as<std::string>(j, "family", context);
  try {
    if (family == "uniform") return PriorSpec::uniform(get_or<double>(j, "lower", 0.0, context), get_or<double>(j, "upper", 1.0, context));
    if (family == "beta") return PriorSpec::beta(get_as<double>(j, "a", context), get_as<double>(j, "b", context));
    if (family == "normal") return PriorSpec::normal(get_as<double>(j, "mean", context), get_as<double>(j, "sd", context));
    if (family == "lognormal")
      return PriorSpec::log_normal(get_as<double>(j, "meanlog", context), get_as<double>(j, "sdlog", context));
    if (family == "logitnormal")
      return PriorSpec::logit_normal_centered(get_as<std::string>(j, "reference", context), get_as<double>(j, "sd", context));
  } catch (const DomainError& e) {
    throw SchemaError(context, e.what());
  }
  throw SchemaError(context + ".family", "unknown prior family '" + family + "'");
}

inline std::map<std::string, PriorSpec> priors_from_json(const json& j, const std::string& context) {
  std::map<std::string, PriorSpec> out;
  if (!j.is_object()) throw SchemaError(context, "must be an object of node name -> prior");
  for (const auto& [k, v] : j.items()) out.emplace(k, prior_from_json(v, context + "." + k));
  return out;
}

/// Streams, grid and age structure listed by a data manifest.
struct DataManifest {
  AgeStructure ages;
  TimeGrid grid;
  std::vector<DataStream> streams;
};

/// {"age_groups": [...], "grid": {"t0":0,"delta_t":1,"steps":K},
///  "streams": [{"name":..., "kind":..., "file":...}]}
/// Relative file paths resolve against `base_dir`.
inline DataManifest parse_data_manifest(const json& j, const fs::path& base_dir) {
  DataManifest m;
  m.ages = AgeStructure(get_as<std::vector<std::string>>(j, "age_groups"));
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    m.grid = TimeGrid(get_or<double>(g, "t0", 0.0, "grid"), get_as<double>(g, "delta_t", "grid"),
                      get_as<std::size_t>(g, "steps", "grid"));
  }
  if (j.contains("streams")) {
    const auto& arr = j.at("streams");
    if (!arr.is_array()) throw SchemaError("streams", "must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string ctx = "streams[" + std::to_string(i) + "]";
      const auto name = get_as<std::string>(arr[i], "name", ctx);
      std::optional<StreamKind> kind;
      if (arr[i].contains("kind")) {
        try {
          kind = stream_kind_from_string(get_as<std::string>(arr[i], "kind", ctx));
        } catch (const SchemaError&) {
          throw;
        } catch (const ConfigurationError& e) {
          throw SchemaError(ctx + ".kind", e.what());
        }
      }
      const fs::path file = base_dir / get_as<std::string>(arr[i], "file", ctx);
      auto stream = read_stream_csv(file, name, kind);
      stream.validate(j.contains("grid") ? std::optional<std::size_t>(m.grid.points()) : std::nullopt, m.ages.size());
      m.streams.push_back(std::move(stream));
    }
  }
  return m;
}

}  // namespace episynth::io
