#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dssddi/ddigraph.hpp"
#include "json.hpp"

namespace dssddi::medsupport {

using EdgeKey = std::pair<DrugId, DrugId>;  // first < second

EdgeKey edge_key(DrugId a, DrugId b);

/// Unsigned simple graph over a subset of drug ids.
class Graph {
 public:
  Graph() = default;
  /// Every edge of `g` regardless of sign, every drug as a node.
  explicit Graph(const DdiGraph& g);

  void add_node(DrugId v);
  void add_edge(DrugId u, DrugId v);
  void remove_edge(DrugId u, DrugId v);
  void remove_node(DrugId v);

  bool has_node(DrugId v) const { return adj_.count(v) > 0; }
  bool has_edge(DrugId u, DrugId v) const;
  const std::set<DrugId>& neighbors(DrugId v) const;
  std::vector<DrugId> nodes() const;
  std::vector<EdgeKey> edges() const;
  std::size_t node_count() const { return adj_.size(); }
  std::size_t edge_count() const;

  /// Triangles containing edge (u, v).
  std::size_t support(DrugId u, DrugId v) const;
  /// Hop distances from `source` to every reachable node.
  std::map<DrugId, std::size_t> distances(DrugId source) const;
  /// Node set of the connected component holding `v`.
  std::set<DrugId> component(DrugId v) const;
  bool connects(std::span<const DrugId> q) const;
  Graph induced(const std::set<DrugId>& keep) const;
  /// Longest shortest path between any two nodes; requires a connected graph.
  std::size_t diameter() const;
  /// max over nodes v of max over q in Q of dist(v, q).
  std::size_t query_distance(std::span<const DrugId> q) const;

 private:
  std::map<DrugId, std::set<DrugId>> adj_;
};

struct TrussIndex {
  std::map<EdgeKey, int> truss;
  int max_truss = 0;

  int at(DrugId u, DrugId v) const;
};

/// Peels the minimum-support edge (lowest key on ties) until none remain.
/// An edge's truss number is its support at deletion + 2, never below the
/// level already reached.
TrussIndex truss_decomposition(const Graph& g);
TrussIndex truss_decomposition(const DdiGraph& g);

/// Edges whose support stays >= p - 2 after repeatedly deleting violators.
Graph p_truss(const Graph& g, int p);

/// Edge weight used for Steiner trees: 1 / (truss - 1).
double truss_distance(int truss);

struct SteinerTree {
  std::vector<DrugId> nodes;
  std::vector<EdgeKey> edges;
  double weight = 0.0;
  /// Set when the query drugs span several components; the tree is then a
  /// forest with one tree per component.
  bool multi_component = false;
};

/// Complete truss-distance graph over Q, its MST, shortest-path expansion, a
/// second MST and pruning of non-query leaves.
SteinerTree steiner_tree(const Graph& g, const TrussIndex& truss, std::span<const DrugId> q);

struct ExplanationSubgraph {
  std::vector<DrugId> nodes;
  std::vector<DrugId> query;
  std::vector<DdiEdge> edges;         // signed, from the source graph
  std::map<EdgeKey, int> edge_truss;  // truss numbers in the source graph
  int p = 2;
  std::size_t diameter = 0;
  std::size_t query_distance = 0;
  double ss = 0.0;
  bool multi_component = false;
};

/// n0 = 0 selects max(4 |Q|, 30).
std::size_t default_expansion_size(std::size_t query_size);

/// Closest truss community of Q in `graph` (signs ignored). Throws
/// QueryError naming the separated drugs when Q is disconnected.
ExplanationSubgraph closest_truss_community(const DdiGraph& graph, const TrussIndex& truss,
                                            std::span<const DrugId> q, std::size_t n0 = 0);

inline constexpr double kDefaultAlpha = 0.5;

/// SS from edge counts. The second term is 0 when n' = k.
double suggestion_satisfaction(std::size_t k, std::size_t n_prime, std::size_t r_in_pos,
                               std::size_t r_in_neg, std::size_t r_out_neg, double alpha);

/// SS over the subgraph's signed edges with Q = `suggested`.
double suggestion_satisfaction(const ExplanationSubgraph& sub, std::span<const DrugId> suggested,
                               double alpha = kDefaultAlpha);

/// CTC over the synergy/antagonism edges plus SS. A disconnected query yields
/// the union of per-component communities with multi_component set.
ExplanationSubgraph explain(const DdiGraph& graph, std::span<const DrugId> q,
                            double alpha = kDefaultAlpha, std::size_t n0 = 0);

/// Same, reusing a truss index of graph.signed_only().
ExplanationSubgraph explain(const DdiGraph& signed_graph, const TrussIndex& truss,
                            std::span<const DrugId> q, double alpha = kDefaultAlpha,
                            std::size_t n0 = 0);

/// {nodes:[{id,name,suggested}], edges:[{u,v,sign,truss}], p, diameter, ss, ...}
nlohmann::json explanation_to_json(const ExplanationSubgraph& sub, const DdiGraph& graph);

}  // namespace dssddi::medsupport
