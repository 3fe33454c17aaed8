#pragma once

// Directed acyclic evidence-synthesis graph: basic parameters with priors,
// deterministic functional parameters, and data nodes whose likelihoods are
// conditionally independent given their functional parent.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "episynth/core/error.hpp"
#include "episynth/core/math.hpp"
#include "episynth/core/prior.hpp"
#include "episynth/core/types.hpp"

namespace episynth {

/// Plate membership of a node. Negative index = not on that plate.
struct NodeTag {
  std::string base;
  int age = -1;
  int wave = -1;

  std::string plate() const {
    std::string p;
    if (age >= 0) p += "age";
    if (wave >= 0) p += p.empty() ? "wave" : ",wave";
    return p;
  }
  bool operator==(const NodeTag&) const = default;
};

/// Read-only view of the values of a functional node's parents, in declaration order.
class NodeInputs {
 public:
  explicit NodeInputs(std::vector<std::span<const double>> values) : values_(std::move(values)) {}
  std::size_t size() const noexcept { return values_.size(); }
  double scalar(std::size_t i) const { return values_.at(i).front(); }
  std::span<const double> vec(std::size_t i) const { return values_.at(i); }

 private:
  std::vector<std::span<const double>> values_;
};

using Evaluator = std::function<std::vector<double>(const NodeInputs&)>;
using Likelihood = std::function<double(std::span<const double> psi, const DataStream&)>;

enum class NodeKind { Basic, Functional, Data };
enum class EdgeKind { Deterministic, Stochastic };

struct GraphNode {
  NodeKind kind = NodeKind::Basic;
  std::string name;
  NodeTag tag;
  PriorSpec prior;                  // basic
  std::vector<std::size_t> parents;  // functional: inputs; data: single functional parent
  Evaluator evaluate;               // functional
  std::string stream;               // data: bound stream name
  Likelihood likelihood;            // data
  std::size_t parameter_index = 0;  // basic: position in theta
};

struct GraphEdge {
  std::size_t from;
  std::size_t to;
  EdgeKind kind;
};

class GraphEvaluation;

class ModelGraph {
 public:
  ModelGraph() = default;

  std::size_t node_count() const noexcept { return nodes_.size(); }
  const GraphNode& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<GraphNode>& nodes() const noexcept { return nodes_; }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index_of(std::string_view name) const {
    auto i = find(name);
    if (!i) throw ConfigurationError("unknown node '" + std::string(name) + "'");
    return *i;
  }

  /// Basic parameters in theta order.
  std::size_t dimension() const noexcept { return basic_.size(); }
  const std::vector<std::size_t>& basic_nodes() const noexcept { return basic_; }
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (auto i : basic_) out.push_back(nodes_[i].name);
    return out;
  }
  std::vector<Support> supports() const {
    std::vector<Support> out;
    for (auto i : basic_) out.push_back(nodes_[i].prior.support());
    return out;
  }
  const std::vector<std::size_t>& data_nodes() const noexcept { return data_; }
  std::vector<std::string> data_node_names() const {
    std::vector<std::string> out;
    for (auto i : data_) out.push_back(nodes_[i].name);
    return out;
  }
  /// Data node bound to `stream`, if any.
  std::optional<std::size_t> data_node_for_stream(std::string_view stream) const {
    auto it = by_stream_.find(std::string(stream));
    if (it == by_stream_.end()) return std::nullopt;
    return it->second;
  }

  /// All nodes in a topological order (parents before children).
  const std::vector<std::size_t>& topological_order() const noexcept { return topo_; }

  std::vector<GraphEdge> edges() const {
    std::vector<GraphEdge> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.kind == NodeKind::Basic) {
        if (auto ref = n.prior.reference()) out.push_back({index_of(*ref), i, EdgeKind::Stochastic});
        continue;
      }
      const auto kind = n.kind == NodeKind::Data ? EdgeKind::Stochastic : EdgeKind::Deterministic;
      for (auto p : n.parents) out.push_back({p, i, kind});
    }
    return out;
  }

  /// Indices of every node downstream of `i` (excluding i).
  std::vector<std::size_t> descendants(std::size_t i) const {
    std::vector<char> mark(nodes_.size(), 0);
    const auto es = edges();
    mark[i] = 1;
    for (auto j : topo_) {
      if (j == i || mark[j]) continue;
      for (const auto& e : es)
        if (e.to == j && mark[e.from]) {
          mark[j] = 1;
          break;
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < nodes_.size(); ++j)
      if (mark[j] && j != i) out.push_back(j);
    return out;
  }

  /// Indices of every node upstream of `i` (excluding i).
  std::vector<std::size_t> ancestors(std::size_t i) const {
    std::vector<char> mark(nodes_.size(), 0);
    const auto es = edges();
    mark[i] = 1;
    for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
      const auto j = *it;
      if (!mark[j]) continue;
      for (const auto& e : es)
        if (e.to == j) mark[e.from] = 1;
    }
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < nodes_.size(); ++j)
      if (mark[j] && j != i) out.push_back(j);
    return out;
  }

  /// Joint log prior of theta (natural scale). -inf outside support.
  double log_prior(std::span<const double> theta) const {
    check_theta(theta);
    double lp = 0.0;
    for (auto i : basic_) {
      const auto& n = nodes_[i];
      std::optional<double> ref;
      if (auto r = n.prior.reference()) ref = theta[nodes_[index_of(*r)].parameter_index];
      lp += n.prior.log_density(theta[n.parameter_index], ref);
      if (lp == kNegInf) return lp;
    }
    return lp;
  }

  /// Draw theta from the prior (references resolved in topological order).
  template <class Rng>
  std::vector<double> sample_prior(Rng& rng) const {
    std::vector<double> theta(basic_.size(), 0.0);
    for (auto i : topo_) {
      const auto& n = nodes_[i];
      if (n.kind != NodeKind::Basic) continue;
      std::optional<double> ref;
      if (auto r = n.prior.reference()) ref = theta[nodes_[index_of(*r)].parameter_index];
      theta[n.parameter_index] = n.prior.sample(rng, ref);
    }
    return theta;
  }

  GraphEvaluation evaluate(std::span<const double> theta) const;

  /// Copy with the prior of basic node `name` replaced.
  ModelGraph with_prior(std::string_view name, PriorSpec prior) const;

  /// Copy in which functional node `name` no longer depends on its parents: it
  /// becomes the identity of a new basic node `<name>.cut` with `prior`.
  /// Upstream nodes that no longer feed any data node are dropped.
  ModelGraph with_cut(std::string_view name, PriorSpec prior) const;

  void check_theta(std::span<const double> theta) const {
    if (theta.size() != basic_.size())
      throw ConfigurationError("parameter vector has " + std::to_string(theta.size()) + " entries, graph has " +
                               std::to_string(basic_.size()) + " basic nodes");
  }

 private:
  friend class GraphBuilder;
  friend class GraphEvaluation;

  void finalize();

  std::vector<GraphNode> nodes_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<std::string, std::size_t> by_stream_;
  std::vector<std::size_t> basic_;
  std::vector<std::size_t> data_;
  std::vector<std::size_t> topo_;
};

/// Lazily evaluated functional values for one theta. Not thread-safe; create one per worker.
class GraphEvaluation {
 public:
  GraphEvaluation(const ModelGraph& graph, std::span<const double> theta)
      : graph_(&graph), theta_(theta.begin(), theta.end()), cache_(graph.node_count()) {
    graph.check_theta(theta);
  }

  std::span<const double> theta() const noexcept { return theta_; }

  std::span<const double> value(std::size_t i) {
    const auto& n = graph_->nodes_.at(i);
    switch (n.kind) {
      case NodeKind::Basic: return std::span<const double>(&theta_[n.parameter_index], 1);
      case NodeKind::Data: throw ConfigurationError("data node '" + n.name + "' has no parameter value");
      case NodeKind::Functional: break;
    }
    if (!cache_[i]) {
      std::vector<std::span<const double>> inputs;
      inputs.reserve(n.parents.size());
      for (auto p : n.parents) inputs.push_back(value(p));
      auto v = n.evaluate(NodeInputs(std::move(inputs)));
      for (double x : v)
        if (std::isnan(x)) throw EvaluationError(n.name, "NaN value");
      cache_[i] = std::move(v);
    }
    return *cache_[i];
  }
  std::span<const double> value(std::string_view name) { return value(graph_->index_of(name)); }

  double log_prior() const { return graph_->log_prior(theta_); }

  /// Log likelihood of one stream through its bound data node.
  double stream_log_likelihood(const DataStream& stream) {
    auto node = graph_->data_node_for_stream(stream.name);
    if (!node) throw ConfigurationError("stream '" + stream.name + "' is not bound to any data node");
    const auto& n = graph_->nodes_[*node];
    const double ll = n.likelihood(value(n.parents.front()), stream);
    if (std::isnan(ll)) throw EvaluationError(n.name, "NaN log likelihood");
    return ll;
  }

  /// Sum of stream log likelihoods; data nodes without a supplied stream contribute nothing.
  double log_likelihood(std::span<const DataStream> data) {
    double total = 0.0;
    for (const auto& s : data) {
      total += stream_log_likelihood(s);
      if (total == kNegInf) return total;
    }
    return total;
  }

  /// Per-data-node log likelihood in graph data-node order (0 for nodes with no stream).
  std::vector<double> node_log_likelihoods(std::span<const DataStream> data) {
    std::vector<double> out(graph_->data_.size(), 0.0);
    for (const auto& s : data) {
      auto node = graph_->data_node_for_stream(s.name);
      if (!node) throw ConfigurationError("stream '" + s.name + "' is not bound to any data node");
      auto pos = std::find(graph_->data_.begin(), graph_->data_.end(), *node) - graph_->data_.begin();
      out[static_cast<std::size_t>(pos)] = stream_log_likelihood(s);
    }
    return out;
  }

 private:
  const ModelGraph* graph_;
  std::vector<double> theta_;
  std::vector<std::optional<std::vector<double>>> cache_;
};

inline GraphEvaluation ModelGraph::evaluate(std::span<const double> theta) const { return GraphEvaluation(*this, theta); }

/// Sum over streams of their log likelihood under theta.
inline double log_likelihood_product(const ModelGraph& graph, std::span<const double> theta,
                                     std::span<const DataStream> data) {
  return graph.evaluate(theta).log_likelihood(data);
}

class GraphBuilder {
 public:
  GraphBuilder& add_basic(std::string name, PriorSpec prior, NodeTag tag = {}) {
    GraphNode n;
    n.kind = NodeKind::Basic;
    n.name = std::move(name);
    n.prior = std::move(prior);
    n.tag = std::move(tag);
    pending_.push_back({std::move(n), {}});
    return *this;
  }

  GraphBuilder& add_functional(std::string name, std::vector<std::string> parents, Evaluator fn, NodeTag tag = {}) {
    if (parents.empty()) throw ConfigurationError("functional node '" + name + "' needs at least one parent");
    GraphNode n;
    n.kind = NodeKind::Functional;
    n.name = std::move(name);
    n.evaluate = std::move(fn);
    n.tag = std::move(tag);
    pending_.push_back({std::move(n), std::move(parents)});
    return *this;
  }

  /// Scalar functional equal to its (scalar) parent.
  GraphBuilder& add_identity(std::string name, std::string parent, NodeTag tag = {}) {
    return add_functional(
        std::move(name), {std::move(parent)}, [](const NodeInputs& in) { return std::vector<double>{in.scalar(0)}; },
        std::move(tag));
  }

  GraphBuilder& add_data(std::string name, std::string functional_parent, std::string stream, Likelihood lik,
                         NodeTag tag = {}) {
    GraphNode n;
    n.kind = NodeKind::Data;
    n.name = std::move(name);
    n.stream = std::move(stream);
    n.likelihood = std::move(lik);
    n.tag = std::move(tag);
    pending_.push_back({std::move(n), {std::move(functional_parent)}});
    return *this;
  }

  ModelGraph build() const {
    ModelGraph g;
    for (const auto& p : pending_) {
      if (p.node.name.empty()) throw ConfigurationError("node with empty name");
      if (!g.by_name_.emplace(p.node.name, g.nodes_.size()).second)
        throw ConfigurationError("duplicate node name '" + p.node.name + "'");
      g.nodes_.push_back(p.node);
    }
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      auto& n = g.nodes_[i];
      for (const auto& parent : pending_[i].parents) {
        auto it = g.by_name_.find(parent);
        if (it == g.by_name_.end())
          throw ConfigurationError("node '" + n.name + "' references unknown parent '" + parent + "'");
        n.parents.push_back(it->second);
      }
    }
    g.finalize();
    return g;
  }

 private:
  struct Pending {
    GraphNode node;
    std::vector<std::string> parents;
  };
  std::vector<Pending> pending_;
};

inline void ModelGraph::finalize() {
  basic_.clear();
  data_.clear();
  by_stream_.clear();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& n = nodes_[i];
    switch (n.kind) {
      case NodeKind::Basic:
        n.parameter_index = basic_.size();
        basic_.push_back(i);
        if (auto ref = n.prior.reference()) {
          auto r = find(*ref);
          if (!r) throw ConfigurationError("prior of '" + n.name + "' references unknown node '" + *ref + "'");
          if (nodes_[*r].kind != NodeKind::Basic)
            throw ConfigurationError("prior of '" + n.name + "' must reference a basic node");
        }
        break;
      case NodeKind::Functional:
        for (auto p : n.parents)
          if (nodes_[p].kind == NodeKind::Data)
            throw ConfigurationError("functional node '" + n.name + "' cannot depend on a data node");
        break;
      case NodeKind::Data:
        if (n.parents.size() != 1 || nodes_[n.parents.front()].kind != NodeKind::Functional)
          throw ConfigurationError("data node '" + n.name + "' needs exactly one functional parent");
        if (!by_stream_.emplace(n.stream, i).second)
          throw ConfigurationError("stream '" + n.stream + "' is bound to more than one data node");
        data_.push_back(i);
        break;
    }
  }
  // Kahn's algorithm over all edges, stable in declaration order.
  const auto es = edges();
  std::vector<std::size_t> indegree(nodes_.size(), 0);
  for (const auto& e : es) ++indegree[e.to];
  topo_.clear();
  std::vector<char> done(nodes_.size(), 0);
  while (topo_.size() < nodes_.size()) {
    bool progressed = false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (done[i] || indegree[i] != 0) continue;
      done[i] = 1;
      topo_.push_back(i);
      for (const auto& e : es)
        if (e.from == i) --indegree[e.to];
      progressed = true;
    }
    if (!progressed) {
      std::string cyc;
      for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (!done[i]) cyc += (cyc.empty() ? "" : ", ") + nodes_[i].name;
      throw CycleError("model graph has a cycle through: " + cyc);
    }
  }
}

inline ModelGraph ModelGraph::with_prior(std::string_view name, PriorSpec prior) const {
  ModelGraph g = *this;
  auto& n = g.nodes_.at(index_of(name));
  if (n.kind != NodeKind::Basic) throw ConfigurationError("'" + n.name + "' is not a basic node");
  n.prior = std::move(prior);
  g.finalize();
  return g;
}

inline ModelGraph ModelGraph::with_cut(std::string_view name, PriorSpec prior) const {
  const auto cut = index_of(name);
  if (nodes_[cut].kind == NodeKind::Basic) return with_prior(name, std::move(prior));
  if (nodes_[cut].kind != NodeKind::Functional) throw ConfigurationError("cannot cut data node '" + nodes_[cut].name + "'");

  // Keep every node that still matters once `cut` stops depending on its parents.
  std::vector<char> keep(nodes_.size(), 0);
  std::vector<char> needed(nodes_.size(), 0);
  for (auto i : data_) needed[i] = 1;
  for (auto it = topo_.rbegin(); it != topo_.rend(); ++it) {
    const auto i = *it;
    if (!needed[i]) continue;
    keep[i] = 1;
    if (i == cut) continue;
    const auto& n = nodes_[i];
    for (auto p : n.parents) needed[p] = 1;
    if (n.kind == NodeKind::Basic)
      if (auto ref = n.prior.reference()) needed[index_of(*ref)] = 1;
  }
  keep[cut] = 1;

  GraphBuilder b;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!keep[i]) continue;
    const auto& n = nodes_[i];
    if (i == cut) {
      // The separator keeps its name as an identity functional so bound data nodes stay valid.
      b.add_basic(n.name + ".cut", prior, n.tag);
      b.add_identity(n.name, n.name + ".cut", n.tag);
      continue;
    }
    std::vector<std::string> parents;
    for (auto p : n.parents) parents.push_back(nodes_[p].name);
    switch (n.kind) {
      case NodeKind::Basic: b.add_basic(n.name, n.prior, n.tag); break;
      case NodeKind::Functional: b.add_functional(n.name, parents, n.evaluate, n.tag); break;
      case NodeKind::Data: b.add_data(n.name, parents.front(), n.stream, n.likelihood, n.tag); break;
    }
  }
  return b.build();
}

}  // namespace episynth
