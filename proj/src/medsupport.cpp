#include "dssddi/medsupport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <tuple>

#include "dssddi/errors.hpp"

namespace dssddi::medsupport {

EdgeKey edge_key(DrugId a, DrugId b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

// ---- Graph ----

Graph::Graph(const DdiGraph& g) {
  for (DrugId v = 0; v < g.num_drugs(); ++v) add_node(v);
  for (const auto& e : g.edges()) add_edge(e.u, e.v);
}

void Graph::add_node(DrugId v) { adj_[v]; }

void Graph::add_edge(DrugId u, DrugId v) {
  if (u == v) throw ArgumentError("self-loop on drug " + std::to_string(u));
  adj_[u].insert(v);
  adj_[v].insert(u);
}

void Graph::remove_edge(DrugId u, DrugId v) {
  auto a = adj_.find(u);
  auto b = adj_.find(v);
  if (a != adj_.end()) a->second.erase(v);
  if (b != adj_.end()) b->second.erase(u);
}

void Graph::remove_node(DrugId v) {
  auto it = adj_.find(v);
  if (it == adj_.end()) return;
  for (DrugId w : it->second) adj_[w].erase(v);
  adj_.erase(it);
}

bool Graph::has_edge(DrugId u, DrugId v) const {
  auto it = adj_.find(u);
  return it != adj_.end() && it->second.count(v) > 0;
}

const std::set<DrugId>& Graph::neighbors(DrugId v) const {
  auto it = adj_.find(v);
  if (it == adj_.end()) throw ArgumentError("drug " + std::to_string(v) + " not in subgraph");
  return it->second;
}

std::vector<DrugId> Graph::nodes() const {
  std::vector<DrugId> out;
  out.reserve(adj_.size());
  for (const auto& [v, _] : adj_) out.push_back(v);
  return out;
}

std::vector<EdgeKey> Graph::edges() const {
  std::vector<EdgeKey> out;
  for (const auto& [u, nb] : adj_)
    for (DrugId v : nb)
      if (u < v) out.emplace_back(u, v);
  return out;
}

std::size_t Graph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& [_, nb] : adj_) twice += nb.size();
  return twice / 2;
}

std::size_t Graph::support(DrugId u, DrugId v) const {
  const auto& a = neighbors(u);
  const auto& b = neighbors(v);
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  std::size_t n = 0;
  for (DrugId w : small) n += large.count(w);
  return n;
}

std::map<DrugId, std::size_t> Graph::distances(DrugId source) const {
  std::map<DrugId, std::size_t> dist;
  if (!has_node(source)) return dist;
  std::deque<DrugId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    DrugId x = queue.front();
    queue.pop_front();
    for (DrugId y : adj_.at(x)) {
      if (dist.count(y)) continue;
      dist[y] = dist[x] + 1;
      queue.push_back(y);
    }
  }
  return dist;
}

std::set<DrugId> Graph::component(DrugId v) const {
  std::set<DrugId> out;
  for (const auto& [w, _] : distances(v)) out.insert(w);
  return out;
}

bool Graph::connects(std::span<const DrugId> q) const {
  if (q.empty()) return true;
  if (!has_node(q.front())) return false;
  auto comp = component(q.front());
  return std::all_of(q.begin(), q.end(), [&](DrugId v) { return comp.count(v) > 0; });
}

Graph Graph::induced(const std::set<DrugId>& keep) const {
  Graph out;
  for (DrugId v : keep) {
    auto it = adj_.find(v);
    if (it == adj_.end()) continue;
    out.add_node(v);
    for (DrugId w : it->second)
      if (keep.count(w)) out.add_edge(v, w);
  }
  return out;
}

std::size_t Graph::diameter() const {
  std::size_t best = 0;
  for (const auto& [v, _] : adj_) {
    auto d = distances(v);
    if (d.size() != adj_.size()) throw ArgumentError("diameter of a disconnected graph");
    for (const auto& [w, len] : d) best = std::max(best, len);
  }
  return best;
}

std::size_t Graph::query_distance(std::span<const DrugId> q) const {
  std::size_t best = 0;
  for (DrugId s : q) {
    auto d = distances(s);
    if (d.size() != adj_.size()) throw ArgumentError("query distance of a disconnected graph");
    for (const auto& [w, len] : d) best = std::max(best, len);
  }
  return best;
}

// ---- truss ----

int TrussIndex::at(DrugId u, DrugId v) const {
  auto it = truss.find(edge_key(u, v));
  if (it == truss.end())
    throw ArgumentError("no edge (" + std::to_string(u) + ", " + std::to_string(v) + ")");
  return it->second;
}

TrussIndex truss_decomposition(const Graph& g) {
  TrussIndex out;
  Graph work = g;
  std::map<EdgeKey, std::size_t> sup;
  std::set<std::pair<std::size_t, EdgeKey>> order;
  for (const auto& e : work.edges()) {
    sup[e] = work.support(e.first, e.second);
    order.emplace(sup[e], e);
  }
  int level = 2;
  auto lower = [&](DrugId a, DrugId b) {
    EdgeKey k = edge_key(a, b);
    auto& s = sup.at(k);
    order.erase({s, k});
    if (s > 0) --s;
    order.emplace(s, k);
  };
  while (!order.empty()) {
    auto [s, e] = *order.begin();
    order.erase(order.begin());
    level = std::max(level, static_cast<int>(s) + 2);
    out.truss[e] = level;
    sup.erase(e);
    const auto& a = work.neighbors(e.first);
    const auto& b = work.neighbors(e.second);
    std::vector<DrugId> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    for (DrugId w : common) {
      lower(e.first, w);
      lower(e.second, w);
    }
    work.remove_edge(e.first, e.second);
  }
  out.max_truss = 0;
  for (const auto& [_, t] : out.truss) out.max_truss = std::max(out.max_truss, t);
  return out;
}

TrussIndex truss_decomposition(const DdiGraph& g) { return truss_decomposition(Graph(g)); }

Graph p_truss(const Graph& g, int p) {
  Graph work = g;
  const std::size_t need = p > 2 ? static_cast<std::size_t>(p - 2) : 0;
  std::deque<EdgeKey> pending;
  for (const auto& e : work.edges())
    if (work.support(e.first, e.second) < need) pending.push_back(e);
  while (!pending.empty()) {
    EdgeKey e = pending.front();
    pending.pop_front();
    if (!work.has_edge(e.first, e.second)) continue;
    const auto& a = work.neighbors(e.first);
    const auto& b = work.neighbors(e.second);
    std::vector<DrugId> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    work.remove_edge(e.first, e.second);
    for (DrugId w : common) {
      for (DrugId x : {e.first, e.second}) {
        if (work.support(x, w) < need) pending.push_back(edge_key(x, w));
      }
    }
  }
  Graph out;
  for (DrugId v : work.nodes())
    if (!work.neighbors(v).empty()) out.add_node(v);
  for (const auto& e : work.edges()) out.add_edge(e.first, e.second);
  return out;
}

double truss_distance(int truss) {
  if (truss < 2) throw ArgumentError("truss number below 2");
  return 1.0 / static_cast<double>(truss - 1);
}

// ---- Steiner tree ----

namespace {

struct ShortestPaths {
  std::map<DrugId, double> dist;
  std::map<DrugId, DrugId> pred;
};

ShortestPaths dijkstra(const Graph& g, const TrussIndex& truss, DrugId source) {
  ShortestPaths sp;
  using Item = std::pair<double, DrugId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  sp.dist[source] = 0.0;
  heap.emplace(0.0, source);
  std::set<DrugId> done;
  while (!heap.empty()) {
    auto [d, x] = heap.top();
    heap.pop();
    if (!done.insert(x).second) continue;
    for (DrugId y : g.neighbors(x)) {
      double nd = d + truss_distance(truss.at(x, y));
      auto it = sp.dist.find(y);
      if (it == sp.dist.end() || nd < it->second) {
        sp.dist[y] = nd;
        sp.pred[y] = x;
        heap.emplace(nd, y);
      }
    }
  }
  return sp;
}

// Union-find for Kruskal.
struct Dsu {
  std::map<DrugId, DrugId> parent;
  DrugId find(DrugId x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent[x] = x;
      return x;
    }
    if (it->second == x) return x;
    DrugId root = find(it->second);
    parent[x] = root;
    return root;
  }
  bool unite(DrugId a, DrugId b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

struct WeightedEdge {
  double w;
  EdgeKey e;
  bool operator<(const WeightedEdge& o) const { return std::tie(w, e) < std::tie(o.w, o.e); }
};

std::vector<EdgeKey> kruskal(std::vector<WeightedEdge> edges) {
  std::sort(edges.begin(), edges.end());
  Dsu dsu;
  std::vector<EdgeKey> out;
  for (const auto& we : edges)
    if (dsu.unite(we.e.first, we.e.second)) out.push_back(we.e);
  return out;
}

// KMB on one connected group of terminals.
Graph steiner_component(const Graph& g, const TrussIndex& truss, const std::vector<DrugId>& terms) {
  Graph tree;
  if (terms.size() == 1) {
    tree.add_node(terms.front());
    return tree;
  }
  std::vector<ShortestPaths> sp;
  sp.reserve(terms.size());
  for (DrugId t : terms) sp.push_back(dijkstra(g, truss, t));

  std::vector<WeightedEdge> closure;
  for (std::size_t i = 0; i < terms.size(); ++i)
    for (std::size_t j = i + 1; j < terms.size(); ++j)
      closure.push_back({sp[i].dist.at(terms[j]), {i, j}});
  std::vector<EdgeKey> mst1 = kruskal(closure);

  Graph expanded;
  for (const auto& [i, j] : mst1) {
    DrugId x = terms[j];
    expanded.add_node(x);
    while (x != terms[i]) {
      DrugId y = sp[i].pred.at(x);
      expanded.add_edge(x, y);
      x = y;
    }
  }
  std::vector<WeightedEdge> h;
  for (const auto& e : expanded.edges()) h.push_back({truss_distance(truss.at(e.first, e.second)), e});
  for (DrugId v : expanded.nodes()) tree.add_node(v);
  for (const auto& e : kruskal(h)) tree.add_edge(e.first, e.second);

  std::set<DrugId> terminal(terms.begin(), terms.end());
  bool pruned = true;
  while (pruned) {
    pruned = false;
    for (DrugId v : tree.nodes()) {
      if (!terminal.count(v) && tree.neighbors(v).size() <= 1) {
        tree.remove_node(v);
        pruned = true;
      }
    }
  }
  return tree;
}

void check_query(const Graph& g, std::span<const DrugId> q) {
  if (q.empty()) throw ArgumentError("empty query");
  std::set<DrugId> seen;
  for (DrugId v : q) {
    if (!g.has_node(v)) throw QueryError("unknown drug id " + std::to_string(v));
    if (!seen.insert(v).second) throw ArgumentError("duplicate query drug " + std::to_string(v));
  }
}

// Query drugs grouped by connected component, in query order.
std::vector<std::vector<DrugId>> query_groups(const Graph& g, std::span<const DrugId> q) {
  std::vector<std::vector<DrugId>> groups;
  std::vector<std::set<DrugId>> comps;
  for (DrugId v : q) {
    std::size_t k = 0;
    while (k < comps.size() && !comps[k].count(v)) ++k;
    if (k == comps.size()) {
      comps.push_back(g.component(v));
      groups.emplace_back();
    }
    groups[k].push_back(v);
  }
  return groups;
}

}  // namespace

SteinerTree steiner_tree(const Graph& g, const TrussIndex& truss, std::span<const DrugId> q) {
  check_query(g, q);
  auto groups = query_groups(g, q);
  SteinerTree out;
  out.multi_component = groups.size() > 1;
  std::set<DrugId> nodes;
  for (auto& grp : groups) {
    std::sort(grp.begin(), grp.end());
    Graph t = steiner_component(g, truss, grp);
    for (DrugId v : t.nodes()) nodes.insert(v);
    for (const auto& e : t.edges()) {
      out.edges.push_back(e);
      out.weight += truss_distance(truss.at(e.first, e.second));
    }
  }
  out.nodes.assign(nodes.begin(), nodes.end());
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

// ---- closest truss community ----

std::size_t default_expansion_size(std::size_t query_size) {
  return std::max<std::size_t>(4 * query_size, 30);
}

namespace {

bool is_p_truss(const Graph& g, int p) {
  const std::size_t need = p > 2 ? static_cast<std::size_t>(p - 2) : 0;
  for (const auto& e : g.edges())
    if (g.support(e.first, e.second) < need) return false;
  return true;
}

bool holds_query(const Graph& g, std::span<const DrugId> q) {
  return std::all_of(q.begin(), q.end(), [&](DrugId v) { return g.has_node(v); }) && g.connects(q);
}

struct Rank {
  std::size_t query_distance;
  std::size_t diameter;
  std::size_t size;
  bool operator<(const Rank& o) const {
    return std::tie(query_distance, diameter, size) < std::tie(o.query_distance, o.diameter, o.size);
  }
};

Rank rank_of(const Graph& g, std::span<const DrugId> q) {
  return {g.query_distance(q), g.diameter(), g.node_count()};
}

// Lines 1-7: Steiner seed grown by adjacent edges with truss >= p'.
Graph seed_expansion(const Graph& g, const TrussIndex& truss, std::span<const DrugId> q,
                     std::size_t n0) {
  SteinerTree st = steiner_tree(g, truss, q);
  int p_prime = std::numeric_limits<int>::max();
  for (const auto& e : st.edges) p_prime = std::min(p_prime, truss.at(e.first, e.second));
  if (st.edges.empty()) {
    p_prime = 2;
    for (DrugId w : g.neighbors(q.front())) p_prime = std::max(p_prime, truss.at(q.front(), w));
  }

  Graph g0;
  for (DrugId v : st.nodes) g0.add_node(v);
  for (const auto& e : st.edges) g0.add_edge(e.first, e.second);
  std::deque<DrugId> frontier(st.nodes.begin(), st.nodes.end());
  while (!frontier.empty()) {
    DrugId x = frontier.front();
    frontier.pop_front();
    for (DrugId y : g.neighbors(x)) {
      if (truss.at(x, y) < p_prime) continue;
      if (!g0.has_node(y)) {
        if (g0.node_count() >= n0) continue;
        g0.add_node(y);
        frontier.push_back(y);
      }
      g0.add_edge(x, y);
    }
  }
  // close over qualifying edges among the chosen nodes
  for (DrugId x : g0.nodes())
    for (DrugId y : g.neighbors(x))
      if (x < y && g0.has_node(y) && truss.at(x, y) >= p_prime) g0.add_edge(x, y);
  return g0;
}

// Lines 8-9: maximum connected p-truss of g0 containing Q.
std::pair<Graph, int> max_truss_community(const Graph& g0, std::span<const DrugId> q) {
  TrussIndex local = truss_decomposition(g0);
  for (int p = local.max_truss; p >= 2; --p) {
    Graph h;
    for (const auto& [e, t] : local.truss)
      if (t >= p) h.add_edge(e.first, e.second);
    if (holds_query(h, q)) return {h.induced(h.component(q.front())), p};
  }
  // a lone query drug with no usable edge
  Graph single;
  single.add_node(q.front());
  return {single, 2};
}

// Lines 10-14: delete the furthest nodes while Q stays connected.
std::vector<Graph> shrink(Graph cur, int p, std::span<const DrugId> q) {
  std::set<DrugId> query(q.begin(), q.end());
  std::vector<Graph> iterates{cur};
  while (true) {
    std::map<DrugId, std::size_t> far;
    for (DrugId s : q)
      for (const auto& [v, d] : cur.distances(s)) far[v] = std::max(far[v], d);
    std::size_t worst = 0;
    for (const auto& [_, d] : far) worst = std::max(worst, d);
    if (worst == 0) break;
    std::vector<DrugId> drop;
    bool hits_query = false;
    for (const auto& [v, d] : far) {
      if (d != worst) continue;
      drop.push_back(v);
      hits_query = hits_query || query.count(v);
    }
    if (hits_query) break;
    Graph next = cur;
    for (DrugId v : drop) next.remove_node(v);
    next = p_truss(next, p);
    if (!holds_query(next, q)) break;
    cur = next.induced(next.component(q.front()));
    iterates.push_back(cur);
  }
  return iterates;
}

// Drop nodes one at a time while Q stays connected inside a p-truss.
Graph make_minimal(Graph cur, int p, std::span<const DrugId> q) {
  std::set<DrugId> query(q.begin(), q.end());
  while (true) {
    std::optional<std::pair<Rank, Graph>> best;
    for (DrugId v : cur.nodes()) {
      if (query.count(v)) continue;
      Graph h = cur;
      h.remove_node(v);
      if (!holds_query(h, q)) continue;
      h = h.induced(h.component(q.front()));
      if (!is_p_truss(h, p)) continue;
      Rank r = rank_of(h, q);
      if (!best || r < best->first) best.emplace(r, std::move(h));
    }
    if (!best) return cur;
    cur = std::move(best->second);
  }
}

ExplanationSubgraph to_subgraph(const Graph& h, const DdiGraph& graph, const TrussIndex& truss,
                                std::span<const DrugId> q, int p) {
  ExplanationSubgraph out;
  out.nodes = h.nodes();
  out.query.assign(q.begin(), q.end());
  for (const auto& e : h.edges()) {
    out.edges.push_back({e.first, e.second, graph.sign(e.first, e.second).value_or(kNoInteraction)});
    out.edge_truss[e] = truss.at(e.first, e.second);
  }
  out.p = p;
  out.diameter = h.diameter();
  out.query_distance = h.query_distance(q);
  return out;
}

std::string name_list(const DdiGraph& graph, const std::vector<DrugId>& ids) {
  std::string s = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ", ";
    const auto& name = graph.drug(ids[i]).name;
    s += name.empty() ? std::to_string(ids[i]) : name;
  }
  return s + "}";
}

}  // namespace

ExplanationSubgraph closest_truss_community(const DdiGraph& graph, const TrussIndex& truss,
                                            std::span<const DrugId> q, std::size_t n0) {
  Graph g(graph);
  check_query(g, q);
  auto groups = query_groups(g, q);
  if (groups.size() > 1) {
    std::string msg = "query drugs are not connected:";
    for (std::size_t i = 0; i < groups.size(); ++i) msg += (i ? " | " : " ") + name_list(graph, groups[i]);
    throw QueryError(msg);
  }
  if (n0 == 0) n0 = default_expansion_size(q.size());

  Graph g0 = seed_expansion(g, truss, q, n0);
  auto [community, p] = max_truss_community(g0, q);
  auto iterates = shrink(community, p, q);

  std::size_t pick = 0;
  Rank best = rank_of(iterates[0], q);
  for (std::size_t i = 1; i < iterates.size(); ++i) {
    Rank r = rank_of(iterates[i], q);
    if (r < best) {
      best = r;
      pick = i;
    }
  }
  Graph result = make_minimal(iterates[pick], p, q);
  return to_subgraph(result, graph, truss, q, p);
}

// ---- suggestion satisfaction ----

double suggestion_satisfaction(std::size_t k, std::size_t n_prime, std::size_t r_in_pos,
                               std::size_t r_in_neg, std::size_t r_out_neg, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  if (k < 2) throw ArgumentError("SS needs at least 2 suggested drugs");
  if (n_prime < k) throw ArgumentError("subgraph smaller than the suggestion set");
  const double kd = static_cast<double>(k);
  double internal = 2.0 * static_cast<double>(r_in_pos + 1) /
                    (static_cast<double>(r_in_neg + 1) * (kd * (kd - 1.0) + 2.0));
  double external = 0.0;
  if (n_prime > k)
    external = static_cast<double>(r_out_neg) / (kd * static_cast<double>(n_prime - k));
  return alpha * internal + (1.0 - alpha) * external;
}

double suggestion_satisfaction(const ExplanationSubgraph& sub, std::span<const DrugId> suggested,
                               double alpha) {
  std::set<DrugId> in(suggested.begin(), suggested.end());
  if (in.size() != suggested.size()) throw ArgumentError("duplicate suggested drug");
  for (DrugId v : in)
    if (!std::binary_search(sub.nodes.begin(), sub.nodes.end(), v))
      throw ArgumentError("suggested drug " + std::to_string(v) + " missing from subgraph");
  std::size_t in_pos = 0, in_neg = 0, out_neg = 0;
  for (const auto& e : sub.edges) {
    const bool a = in.count(e.u) > 0;
    const bool b = in.count(e.v) > 0;
    if (a && b) {
      in_pos += e.sign == kSynergy;
      in_neg += e.sign == kAntagonism;
    } else if (a != b) {
      out_neg += e.sign == kAntagonism;
    }
  }
  return suggestion_satisfaction(in.size(), sub.nodes.size(), in_pos, in_neg, out_neg, alpha);
}

// ---- explain ----

ExplanationSubgraph explain(const DdiGraph& graph, std::span<const DrugId> q, double alpha,
                            std::size_t n0) {
  DdiGraph signed_graph = graph.signed_only();
  TrussIndex truss = truss_decomposition(signed_graph);
  return explain(signed_graph, truss, q, alpha, n0);
}

ExplanationSubgraph explain(const DdiGraph& signed_graph, const TrussIndex& truss,
                            std::span<const DrugId> q, double alpha, std::size_t n0) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  Graph g(signed_graph);
  check_query(g, q);
  auto groups = query_groups(g, q);
  ExplanationSubgraph out;
  if (groups.size() == 1) {
    out = closest_truss_community(signed_graph, truss, q, n0);
  } else {
    out.multi_component = true;
    out.query.assign(q.begin(), q.end());
    out.p = std::numeric_limits<int>::max();
    std::set<DrugId> nodes;
    for (const auto& grp : groups) {
      auto part = closest_truss_community(signed_graph, truss, grp, n0);
      nodes.insert(part.nodes.begin(), part.nodes.end());
      out.edges.insert(out.edges.end(), part.edges.begin(), part.edges.end());
      out.edge_truss.insert(part.edge_truss.begin(), part.edge_truss.end());
      out.p = std::min(out.p, part.p);
      out.diameter = std::max(out.diameter, part.diameter);
      out.query_distance = std::max(out.query_distance, part.query_distance);
    }
    out.nodes.assign(nodes.begin(), nodes.end());
    std::sort(out.edges.begin(), out.edges.end(),
              [](const DdiEdge& a, const DdiEdge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
  }
  out.ss = q.size() >= 2 ? suggestion_satisfaction(out, q, alpha)
                         : std::numeric_limits<double>::quiet_NaN();
  return out;
}

nlohmann::json explanation_to_json(const ExplanationSubgraph& sub, const DdiGraph& graph) {
  std::set<DrugId> query(sub.query.begin(), sub.query.end());
  nlohmann::json nodes = nlohmann::json::array();
  for (DrugId v : sub.nodes)
    nodes.push_back({{"id", v}, {"name", graph.drug(v).name}, {"suggested", query.count(v) > 0}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : sub.edges) {
    auto it = sub.edge_truss.find(edge_key(e.u, e.v));
    edges.push_back({{"u", e.u}, {"v", e.v}, {"sign", e.sign},
                     {"truss", it == sub.edge_truss.end() ? 2 : it->second}});
  }
  nlohmann::json doc = {{"nodes", nodes},
                        {"edges", edges},
                        {"p", sub.p},
                        {"diameter", sub.diameter},
                        {"query_distance", sub.query_distance},
                        {"multi_component", sub.multi_component}};
  // nlohmann writes NaN as null already; be explicit
  doc["ss"] = std::isfinite(sub.ss) ? nlohmann::json(sub.ss) : nlohmann::json(nullptr);
  return doc;
}

}  // namespace dssddi::medsupport
