#pragma once

// Plain-text listing of a ModelGraph, parseable back into the same document.
//
//   # episynth-dag 1
//   # nodes=3 edges=2
//   node "theta" kind=founder plate=- age=- wave=- prior="uniform(0, 1)"
//   node "psi" kind=functional plate=- age=- wave=-
//   node "y" kind=data plate=- age=- wave=- stream="y"
//   edge "theta" -> "psi" kind=deterministic
//   edge "psi" -> "y" kind=stochastic
//
// Nodes are listed by depth (longest path from a root), ties broken by name;
// edges by child position, then parent position.

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "episynth/core/error.hpp"
#include "episynth/core/graph.hpp"
#include "episynth/core/io.hpp"

namespace episynth::report {

inline constexpr const char* kDagHeader = "# episynth-dag 1";

struct DagNode {
  std::string name;
  std::string kind;  // founder | functional | data
  std::string plate;
  int age = -1;
  int wave = -1;
  std::string prior;   // founders only
  std::string stream;  // data only
  bool operator==(const DagNode&) const = default;
};

struct DagEdge {
  std::string from, to;
  std::string kind;  // deterministic | stochastic
  bool operator==(const DagEdge&) const = default;
};

struct DagDocument {
  std::vector<DagNode> nodes;
  std::vector<DagEdge> edges;
  bool operator==(const DagDocument&) const = default;

  std::size_t count(const std::string& kind) const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [&](const auto& n) { return n.kind == kind; }));
  }
};

inline std::string kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Basic: return "founder";
    case NodeKind::Functional: return "functional";
    case NodeKind::Data: return "data";
  }
  return "unknown";
}

inline std::string kind_name(EdgeKind k) { return k == EdgeKind::Deterministic ? "deterministic" : "stochastic"; }

inline DagDocument to_document(const ModelGraph& g) {
  const auto es = g.edges();
  std::vector<std::size_t> depth(g.node_count(), 0);
  for (auto j : g.topological_order())
    for (const auto& e : es)
      if (e.to == j) depth[j] = std::max(depth[j], depth[e.from] + 1);
  std::vector<std::size_t> order(g.node_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(depth[a], g.node(a).name) < std::tie(depth[b], g.node(b).name);
  });
  std::vector<std::size_t> position(g.node_count());
  for (std::size_t p = 0; p < order.size(); ++p) position[order[p]] = p;

  DagDocument doc;
  for (auto i : order) {
    const auto& n = g.node(i);
    DagNode d{n.name, kind_name(n.kind), n.tag.plate(), n.tag.age, n.tag.wave, {}, {}};
    if (n.kind == NodeKind::Basic) d.prior = n.prior.describe();
    if (n.kind == NodeKind::Data) d.stream = n.stream;
    doc.nodes.push_back(std::move(d));
  }
  auto sorted = es;
  std::sort(sorted.begin(), sorted.end(), [&](const GraphEdge& a, const GraphEdge& b) {
    return std::pair(position[a.to], position[a.from]) < std::pair(position[b.to], position[b.from]);
  });
  for (const auto& e : sorted) doc.edges.push_back({g.node(e.from).name, g.node(e.to).name, kind_name(e.kind)});
  return doc;
}

inline std::string quoted(const std::string& s) { return io::json(s).dump(); }

inline std::string render(const DagDocument& doc) {
  std::string out = std::string(kDagHeader) + "\n# nodes=" + std::to_string(doc.nodes.size()) +
                    " edges=" + std::to_string(doc.edges.size()) + "\n";
  auto idx = [](int v) { return v < 0 ? std::string("-") : std::to_string(v); };
  for (const auto& n : doc.nodes) {
    out += "node " + quoted(n.name) + " kind=" + n.kind + " plate=" + (n.plate.empty() ? "-" : n.plate) +
           " age=" + idx(n.age) + " wave=" + idx(n.wave);
    if (n.kind == "founder") out += " prior=" + quoted(n.prior);
    if (n.kind == "data") out += " stream=" + quoted(n.stream);
    out += "\n";
  }
  for (const auto& e : doc.edges) out += "edge " + quoted(e.from) + " -> " + quoted(e.to) + " kind=" + e.kind + "\n";
  return out;
}

inline std::string export_dag(const ModelGraph& g) { return render(to_document(g)); }

namespace detail {

/// Reads a JSON string literal starting at `pos`; advances past it.
inline std::string read_quoted(const std::string& line, std::size_t& pos, std::size_t lineno) {
  while (pos < line.size() && line[pos] == ' ') ++pos;
  if (pos >= line.size() || line[pos] != '"') throw IoError("<dag>", "line " + std::to_string(lineno) + ": expected a quoted name");
  std::size_t end = pos + 1;
  while (end < line.size() && line[end] != '"') end += line[end] == '\\' ? 2 : 1;
  if (end >= line.size()) throw IoError("<dag>", "line " + std::to_string(lineno) + ": unterminated string");
  const auto s = io::json::parse(line.substr(pos, end - pos + 1)).get<std::string>();
  pos = end + 1;
  return s;
}

/// key=value attributes; values may be quoted.
inline std::map<std::string, std::string> read_attributes(const std::string& line, std::size_t pos, std::size_t lineno) {
  std::map<std::string, std::string> out;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    const auto eq = line.find('=', pos);
    if (eq == std::string::npos) throw IoError("<dag>", "line " + std::to_string(lineno) + ": expected key=value");
    const auto key = line.substr(pos, eq - pos);
    pos = eq + 1;
    if (pos < line.size() && line[pos] == '"') out[key] = read_quoted(line, pos, lineno);
    else {
      const auto sp = line.find(' ', pos);
      out[key] = line.substr(pos, sp == std::string::npos ? std::string::npos : sp - pos);
      pos = sp == std::string::npos ? line.size() : sp;
    }
  }
  return out;
}

}  // namespace detail

inline DagDocument parse_dag(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  DagDocument doc;
  bool header = false;
  auto index = [](const std::string& v) { return v == "-" ? -1 : std::stoi(v); };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.front() == '#') {
      header = header || line == kDagHeader;
      continue;
    }
    if (!header) throw IoError("<dag>", "missing '" + std::string(kDagHeader) + "' header");
    std::size_t pos = 0;
    if (line.rfind("node ", 0) == 0) {
      pos = 5;
      DagNode n;
      n.name = detail::read_quoted(line, pos, lineno);
      auto a = detail::read_attributes(line, pos, lineno);
      n.kind = a["kind"];
      n.plate = a["plate"] == "-" ? "" : a["plate"];
      n.age = index(a["age"]);
      n.wave = index(a["wave"]);
      n.prior = a["prior"];
      n.stream = a["stream"];
      doc.nodes.push_back(std::move(n));
    } else if (line.rfind("edge ", 0) == 0) {
      pos = 5;
      DagEdge e;
      e.from = detail::read_quoted(line, pos, lineno);
      while (pos < line.size() && line[pos] == ' ') ++pos;
      if (line.compare(pos, 2, "->") != 0) throw IoError("<dag>", "line " + std::to_string(lineno) + ": expected '->'");
      pos += 2;
      e.to = detail::read_quoted(line, pos, lineno);
      e.kind = detail::read_attributes(line, pos, lineno)["kind"];
      doc.edges.push_back(std::move(e));
    } else {
      throw IoError("<dag>", "line " + std::to_string(lineno) + ": unknown record");
    }
  }
  if (!header) throw IoError("<dag>", "missing '" + std::string(kDagHeader) + "' header");
  return doc;
}

/// Graphviz rendering: boxes for data, double circles for founders, circles otherwise;
/// dashed arrows are deterministic.
inline std::string to_dot(const DagDocument& doc) {
  std::string out = "digraph episynth {\n";
  for (const auto& n : doc.nodes) {
    const char* shape = n.kind == "data" ? "box" : (n.kind == "founder" ? "doublecircle" : "circle");
    out += "  " + quoted(n.name) + " [shape=" + shape + "];\n";
  }
  for (const auto& e : doc.edges)
    out += "  " + quoted(e.from) + " -> " + quoted(e.to) + (e.kind == "deterministic" ? " [style=dashed]" : "") + ";\n";
  return out + "}\n";
}

}  // namespace episynth::report
