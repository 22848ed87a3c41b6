// Copyright 2026 The DMDK Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Chest knowledge graphs. A static base graph (root, organs, findings) is
// loaded from JSON and specialized per sample with anatomy -> finding
// relations mined from its entity sequence. The graph is encoded with a
// Kipf-Welling GCN over the symmetrically normalized, self-looped adjacency.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dmdk/attention.hpp"
#include "dmdk/entity.hpp"
#include "dmdk/knowledge.hpp"
#include "json.hpp"

namespace dmdk {

enum class NodeKind { kRoot, kOrgan, kFinding };

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::kRoot: return "root";
    case NodeKind::kOrgan: return "organ";
    case NodeKind::kFinding: return "finding";
  }
  return "finding";
}

inline std::optional<NodeKind> parse_node_kind(std::string_view s) {
  if (s == "root") return NodeKind::kRoot;
  if (s == "organ") return NodeKind::kOrgan;
  if (s == "finding") return NodeKind::kFinding;
  return std::nullopt;
}

struct GraphNode {
  std::string name;
  NodeKind kind;
  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

// Undirected edge; (source, target) keeps the orientation it was added with.
struct GraphEdge {
  std::size_t source;
  std::size_t target;
  std::optional<EntityType> relation;  // unset for base-graph edges
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

class KnowledgeGraph {
 public:
  std::size_t add_node(std::string name, NodeKind kind) {
    if (name.empty()) throw ValidationError("graph node name is empty");
    if (index_.count(name)) throw ValidationError("duplicate graph node '" + name + "'");
    index_.emplace(name, nodes_.size());
    nodes_.push_back({std::move(name), kind});
    return nodes_.size() - 1;
  }

  // Adds the edge, or overwrites the relation of an existing edge between
  // the same two nodes. Self-loops are ignored.
  void set_edge(std::size_t a, std::size_t b, std::optional<EntityType> relation) {
    if (a >= nodes_.size() || b >= nodes_.size()) {
      throw ValidationError("edge endpoint out of range: " + std::to_string(a) + "-" +
                            std::to_string(b));
    }
    if (a == b) return;
    for (auto& e : edges_) {
      if ((e.source == a && e.target == b) || (e.source == b && e.target == a)) {
        e.relation = relation;
        return;
      }
    }
    edges_.push_back({a, b, relation});
  }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  std::size_t node_count() const { return nodes_.size(); }

  std::size_t degree(std::size_t i) const {
    std::size_t d = 0;
    for (const auto& e : edges_) d += (e.source == i || e.target == i) ? 1 : 0;
    return d;
  }

  std::vector<std::size_t> neighbors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (const auto& e : edges_) {
      if (e.source == i) out.push_back(e.target);
      if (e.target == i) out.push_back(e.source);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // Symmetric 0/1 matrix with a zero diagonal.
  Matrix adjacency() const {
    Matrix a(nodes_.size(), nodes_.size());
    for (const auto& e : edges_) {
      a(e.source, e.target) = 1.0;
      a(e.target, e.source) = 1.0;
    }
    return a;
  }

  void validate() const {
    const auto roots = std::count_if(nodes_.begin(), nodes_.end(),
                                     [](const GraphNode& n) { return n.kind == NodeKind::kRoot; });
    if (roots != 1) {
      throw ValidationError("graph must have exactly one root node, found " + std::to_string(roots));
    }
  }

  std::vector<std::string> non_root_names() const {
    std::vector<std::string> out;
    for (const auto& n : nodes_)
      if (n.kind != NodeKind::kRoot) out.push_back(n.name);
    return out;
  }

  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Accepts `{"nodes": [{"name", "kind"}], "edges": [[src, dst] | [src, dst, TYPE]]}`
// plus an optional `expected_node_count` checked against the node list.
inline KnowledgeGraph parse_graph_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array()) {
    throw ValidationError("graph config needs a \"nodes\" array");
  }
  KnowledgeGraph g;
  for (const auto& n : j["nodes"]) {
    if (!n.is_object() || !n.contains("name") || !n["name"].is_string()) {
      throw ValidationError("graph node needs a string \"name\"");
    }
    const std::string kind_str = n.value("kind", std::string("finding"));
    auto kind = parse_node_kind(kind_str);
    if (!kind) throw ValidationError("unknown node kind '" + kind_str + "'");
    g.add_node(n["name"].get<std::string>(), *kind);
  }
  if (j.contains("edges")) {
    if (!j["edges"].is_array()) throw ValidationError("graph \"edges\" must be an array");
    for (const auto& e : j["edges"]) {
      if (!e.is_array() || e.size() < 2 || e.size() > 3 || !e[0].is_string() || !e[1].is_string()) {
        throw ValidationError("graph edge must be [source, target] or [source, target, TYPE]");
      }
      const auto s = g.find(e[0].get<std::string>());
      const auto t = g.find(e[1].get<std::string>());
      if (!s) throw ValidationError("edge references unknown node '" + e[0].get<std::string>() + "'");
      if (!t) throw ValidationError("edge references unknown node '" + e[1].get<std::string>() + "'");
      std::optional<EntityType> rel;
      if (e.size() == 3) {
        if (!e[2].is_string() || !(rel = parse_entity_type(e[2].get<std::string>()))) {
          throw ValidationError("edge relation must be an entity type name");
        }
      }
      g.set_edge(*s, *t, rel);
    }
  }
  if (j.contains("expected_node_count")) {
    const auto want = j["expected_node_count"].get<std::size_t>();
    if (want != g.node_count()) {
      throw ValidationError("graph declares " + std::to_string(want) + " nodes but lists " +
                            std::to_string(g.node_count()));
    }
  }
  g.validate();
  return g;
}

inline KnowledgeGraph load_base_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open base graph " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed graph JSON (" + e.what() + ")");
  }
  try {
    return parse_graph_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

struct RelationTriples {
  std::vector<std::string> source;
  std::vector<std::string> target;
  std::vector<EntityType> relations;

  std::size_t size() const { return source.size(); }
  bool empty() const { return source.empty(); }
};

// Same scan as the topic-label search: each ANATOMY entity followed by a
// non-ANATOMY entity yields (anatomy, finding, finding's type).
inline RelationTriples extract_relations(const EntitySequence& entities) {
  RelationTriples out;
  for (std::size_t i : anatomy_pair_starts(entities)) {
    out.source.push_back(entities[i].text);
    out.target.push_back(entities[i + 1].text);
    out.relations.push_back(entities[i + 1].type);
  }
  return out;
}

// Copies the base graph, adds each tag that is missing from it but takes
// part in some triple as a finding node, then writes every triple as an
// edge labelled with its relation (last write wins).
inline KnowledgeGraph build_specific_graph(const KnowledgeGraph& base, const DiseaseTopicLabels& tags,
                                           const RelationTriples& triples) {
  KnowledgeGraph g = base;
  std::set<std::string> associated(triples.source.begin(), triples.source.end());
  associated.insert(triples.target.begin(), triples.target.end());
  for (const auto& tag : tags.tags) {
    if (!g.contains(tag) && associated.count(tag)) g.add_node(tag, NodeKind::kFinding);
  }
  for (std::size_t k = 0; k < triples.size(); ++k) {
    const auto s = g.find(triples.source[k]);
    const auto t = g.find(triples.target[k]);
    if (s && t) g.set_edge(*s, *t, triples.relations[k]);
  }
  return g;
}

// Names of graph nodes mapped to embedding rows. Row 0 is UNK.
class NodeVocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::string_view kUnkName = "<unk-node>";

  NodeVocabulary() { names_.emplace_back(kUnkName); }

  explicit NodeVocabulary(const std::vector<std::string>& names) : NodeVocabulary() {
    for (const auto& n : names) add(n);
  }

  void add(const std::string& name) {
    if (index_.count(name) || name == kUnkName) return;
    index_.emplace(name, names_.size());
    names_.push_back(name);
  }

  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? kUnk : it->second;
  }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct GcnParams {
  NodeVocabulary nodes;
  Var embeddings;           // nodes.size() x d
  std::vector<Var> layers;  // each d x d

  static GcnParams init(NodeVocabulary nodes, std::size_t dim, std::size_t num_layers, Rng& rng) {
    if (num_layers < 1) throw ValidationError("GCN needs at least one layer");
    GcnParams p;
    p.embeddings =
        parameter(normal_matrix(nodes.size(), dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng));
    p.nodes = std::move(nodes);
    for (std::size_t l = 0; l < num_layers; ++l) p.layers.push_back(parameter(xavier_uniform(dim, dim, rng)));
    return p;
  }
};

// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
inline Matrix normalized_adjacency(const KnowledgeGraph& g) {
  const std::size_t n = g.node_count();
  Matrix a = g.adjacency();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (a(i, j) != 0.0) a(i, j) = inv_sqrt[i] * inv_sqrt[j];
  return a;
}

// a_hat * h for a symmetric a_hat. Each output entry sums its neighbor
// terms in ascending order, so relabeling the nodes permutes the result
// without changing a single bit.
inline Var propagate(const Matrix& a_hat, const Var& h) {
  const Matrix& x = h->value;
  if (a_hat.cols() != x.rows()) {
    throw ShapeError("propagate: adjacency " + a_hat.shape_string() + " for features " +
                     x.shape_string());
  }
  Matrix out(a_hat.rows(), x.cols());
  std::vector<double> terms;
  for (std::size_t i = 0; i < a_hat.rows(); ++i) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      terms.clear();
      for (std::size_t j = 0; j < a_hat.cols(); ++j)
        if (a_hat(i, j) != 0.0) terms.push_back(a_hat(i, j) * x(j, c));
      std::sort(terms.begin(), terms.end());
      double s = 0.0;
      for (double t : terms) s += t;
      out(i, c) = s;
    }
  }
  return detail::make_node(std::move(out), {h}, "propagate", [a_hat](Node& self) {
    self.parents[0]->accumulate(kernel::matmul_tn(a_hat, self.grad));
  });
}

// H0 = node embeddings; H(l+1) = ReLU(A_hat H(l) W(l)).
inline Var gcn_encode(const KnowledgeGraph& g, const GcnParams& params) {
  std::vector<std::size_t> ids;
  ids.reserve(g.node_count());
  for (const auto& n : g.nodes()) ids.push_back(params.nodes.index(n.name));
  const Matrix a_hat = normalized_adjacency(g);
  Var h = gather_rows(params.embeddings, ids);
  for (const auto& w : params.layers) h = relu(matmul(propagate(a_hat, h), w));
  return h;
}

// Visual features attend over graph node features: MHA(X, M).
inline Var graph_attend(const Var& visual, const Var& nodes, const MhaParams& params) {
  if (visual->value.cols() != nodes->value.cols()) {
    throw ShapeError("graph_attend: visual width " + std::to_string(visual->value.cols()) +
                     " differs from node width " + std::to_string(nodes->value.cols()));
  }
  return multi_head_attention(visual, nodes, params);
}

enum class GraphFormat { kDot, kJson };

inline nlohmann::json graph_to_json(const KnowledgeGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : g.nodes()) nodes.push_back({{"name", n.name}, {"kind", std::string(to_string(n.kind))}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges()) {
    nlohmann::json edge = {g.nodes()[e.source].name, g.nodes()[e.target].name};
    if (e.relation) edge.push_back(std::string(to_string(*e.relation)));
    edges.push_back(std::move(edge));
  }
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string export_graph(const KnowledgeGraph& g, GraphFormat format) {
  if (format == GraphFormat::kJson) return graph_to_json(g).dump(2) + "\n";
  std::ostringstream os;
  os << "graph knowledge {\n";
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto& n = g.nodes()[i];
    os << "  n" << i << " [label=" << dot_quote(n.name) << ", kind=" << to_string(n.kind) << "];\n";
  }
  for (const auto& e : g.edges()) {
    os << "  n" << e.source << " -- n" << e.target;
    if (e.relation) os << " [label=" << to_string(*e.relation) << "]";
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace dmdk
