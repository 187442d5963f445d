#pragma once

// Directed acyclic graphs over named variables, with the graph-level causal
// machinery: validation/topological order, moralization, d-separation, and
// the augmented form that carries regime (intervention-indicator) nodes.

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coelab/errors.hpp"
#include "coelab/factor.hpp"

namespace coelab {

// Edge style is metadata: dashed marks arrows that vanish under an
// interventional regime at the head node.  It never affects d-separation
// or inference on the unmutilated graph.
enum class EdgeStyle { solid, dashed };

struct Edge {
  std::string from;
  std::string to;
  EdgeStyle style = EdgeStyle::solid;
};

// Validated on construction: ids unique, endpoints exist, no self loops or
// duplicate arrows, acyclic.  Immutable afterwards.
class Dag {
 public:
  Dag() = default;

  Dag(std::vector<Variable> nodes, std::vector<Edge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Variable& v = nodes_[i];
      if (v.card < 2)
        throw ModelError("variable " + v.id + " must have cardinality >= 2");
      if (!index_.emplace(v.id, i).second)
        throw ModelError("duplicate node id " + v.id);
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (const Edge& e : edges_) {
      if (!index_.count(e.from) || !index_.count(e.to))
        throw ModelError("edge endpoint not declared: " + e.from + " -> " +
                         e.to);
      if (e.from == e.to) throw ModelError("self loop at " + e.from);
      if (!seen.emplace(e.from, e.to).second)
        throw ModelError("duplicate edge " + e.from + " -> " + e.to);
      parents_[e.to].push_back(e.from);
      children_[e.from].push_back(e.to);
    }
    for (auto& [id, ps] : parents_) std::sort(ps.begin(), ps.end());
    for (auto& [id, cs] : children_) std::sort(cs.begin(), cs.end());
    topo_ = kahn_order();
  }

  const std::vector<Variable>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool has_node(std::string_view id) const {
    return index_.count(std::string(id)) > 0;
  }

  const Variable& node(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end())
      throw ModelError("unknown variable " + std::string(id));
    return nodes_[it->second];
  }

  // Parents/children in lexicographic order.
  const std::vector<std::string>& parents(const std::string& id) const {
    require(id);
    static const std::vector<std::string> empty;
    auto it = parents_.find(id);
    return it == parents_.end() ? empty : it->second;
  }

  const std::vector<std::string>& children(const std::string& id) const {
    require(id);
    static const std::vector<std::string> empty;
    auto it = children_.find(id);
    return it == children_.end() ? empty : it->second;
  }

  // A topological order (Kahn's algorithm, lexicographic tie-breaking,
  // so the order is deterministic).
  const std::vector<std::string>& topological_order() const { return topo_; }

  // `seed` together with all its ancestors.
  std::set<std::string> ancestral_set(const VarSet& seed) const {
    for (const auto& id : seed) require(id);
    std::set<std::string> out(seed.begin(), seed.end());
    std::deque<std::string> queue(seed.begin(), seed.end());
    while (!queue.empty()) {
      std::string v = queue.front();
      queue.pop_front();
      for (const auto& p : parents(v))
        if (out.insert(p).second) queue.push_back(p);
    }
    return out;
  }

  // Proper descendants (not including `id` itself).
  std::set<std::string> descendants(const std::string& id) const {
    require(id);
    std::set<std::string> out;
    std::deque<std::string> queue{id};
    while (!queue.empty()) {
      std::string v = queue.front();
      queue.pop_front();
      for (const auto& c : children(v))
        if (out.insert(c).second) queue.push_back(c);
    }
    return out;
  }

  Dag without_edges_into(const VarSet& heads) const {
    std::vector<Edge> kept;
    for (const Edge& e : edges_)
      if (!heads.count(e.to)) kept.push_back(e);
    return Dag(nodes_, std::move(kept));
  }

  Dag without_edges_out_of(const VarSet& tails) const {
    std::vector<Edge> kept;
    for (const Edge& e : edges_)
      if (!tails.count(e.from)) kept.push_back(e);
    return Dag(nodes_, std::move(kept));
  }

  Dag induced(const std::set<std::string>& keep) const {
    std::vector<Variable> ns;
    for (const Variable& v : nodes_)
      if (keep.count(v.id)) ns.push_back(v);
    std::vector<Edge> es;
    for (const Edge& e : edges_)
      if (keep.count(e.from) && keep.count(e.to)) es.push_back(e);
    return Dag(std::move(ns), std::move(es));
  }

 private:
  void require(const std::string& id) const {
    if (!index_.count(id)) throw ModelError("unknown variable " + id);
  }

  std::vector<std::string> kahn_order() const {
    std::map<std::string, int> indeg;
    for (const Variable& v : nodes_) indeg[v.id] = 0;
    for (const Edge& e : edges_) ++indeg[e.to];
    std::set<std::string> ready;
    for (const auto& [id, d] : indeg)
      if (d == 0) ready.insert(id);
    std::vector<std::string> order;
    while (!ready.empty()) {
      std::string v = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(v);
      for (const auto& c : children(v))
        if (--indeg[c] == 0) ready.insert(c);
    }
    if (order.size() != nodes_.size())
      throw CycleDetectedError("graph contains a directed cycle");
    return order;
  }

  std::vector<Variable> nodes_;
  std::vector<Edge> edges_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<std::string>> parents_;
  std::map<std::string, std::vector<std::string>> children_;
  std::vector<std::string> topo_;
};

struct UndirectedGraph {
  std::set<std::string> nodes;
  // Each edge stored once as an ordered (lexicographically) pair.
  std::set<std::pair<std::string, std::string>> edges;

  void add_edge(const std::string& a, const std::string& b) {
    if (a == b) return;
    edges.emplace(std::min(a, b), std::max(a, b));
  }

  bool adjacent(const std::string& a, const std::string& b) const {
    return edges.count({std::min(a, b), std::max(a, b)}) > 0;
  }
};

// Moral graph: skeleton plus an edge between every pair of co-parents.
inline UndirectedGraph moralize(const Dag& g) {
  UndirectedGraph m;
  for (const Variable& v : g.nodes()) m.nodes.insert(v.id);
  for (const Edge& e : g.edges()) m.add_edge(e.from, e.to);
  for (const Variable& v : g.nodes()) {
    const auto& ps = g.parents(v.id);
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t j = i + 1; j < ps.size(); ++j) m.add_edge(ps[i], ps[j]);
  }
  return m;
}

// d-separation of A from B given C, by the ancestral-moralization method:
// restrict to the ancestral set of A∪B∪C, moralize, delete C, and test
// undirected reachability.  Regime nodes take part like any other node.
inline bool d_separated(const Dag& g, const VarSet& a, const VarSet& b,
                        const VarSet& c) {
  for (const auto& id : a)
    if (b.count(id)) return false;  // shared variable is trivially connected
  VarSet all;
  all.insert(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  all.insert(c.begin(), c.end());
  if (a.empty() || b.empty())
    return true;
  for (const auto& id : c)
    if (a.count(id) || b.count(id))
      throw ModelError("conditioning set overlaps the separated sets");
  Dag anc = g.induced(g.ancestral_set(all));
  UndirectedGraph m = moralize(anc);

  std::set<std::string> visited(c.begin(), c.end());
  std::deque<std::string> queue;
  for (const auto& id : a)
    if (visited.insert(id).second) queue.push_back(id);
  while (!queue.empty()) {
    std::string v = queue.front();
    queue.pop_front();
    if (b.count(v)) return false;
    for (const auto& n : m.nodes) {
      if (!visited.count(n) && m.adjacent(v, n)) {
        visited.insert(n);
        queue.push_back(n);
      }
    }
  }
  return true;
}

// Back-door admissibility of adjustment set S for the effect of x on y:
// no element of S is a descendant of x, and S blocks every path from x to y
// in the graph with x's outgoing edges removed.
inline bool satisfies_back_door(const Dag& g, const std::string& x,
                                const std::string& y, const VarSet& s) {
  if (s.count(x) || s.count(y)) return false;
  std::set<std::string> de = g.descendants(x);
  for (const auto& id : s)
    if (de.count(id)) return false;
  return d_separated(g.without_edges_out_of({x}), {x}, {y}, s);
}

// A DAG whose regime nodes obey the structural rules: parentless, exactly
// one child, and that child is stochastic.
class AugmentedDag {
 public:
  AugmentedDag() = default;

  explicit AugmentedDag(Dag g) : dag_(std::move(g)) {
    for (const Variable& v : dag_.nodes()) {
      if (v.kind != VarKind::regime) continue;
      if (!dag_.parents(v.id).empty())
        throw ModelError("regime node " + v.id + " must be parentless");
      const auto& cs = dag_.children(v.id);
      if (cs.size() != 1)
        throw ModelError("regime node " + v.id +
                         " must have exactly one child");
      const Variable& child = dag_.node(cs[0]);
      if (child.kind != VarKind::stochastic)
        throw ModelError("regime node " + v.id +
                         " must point at a stochastic node");
      if (v.card != child.card + 1)
        throw ModelError("regime node " + v.id + " needs " +
                         std::to_string(child.card + 1) +
                         " states (one per target value plus idle)");
      target_of_[v.id] = child.id;
      regime_of_[child.id] = v.id;
    }
  }

  // Add a regime parent F_t for each listed target.  Existing arrows into a
  // target are re-tagged dashed: they are the ones an intervention removes.
  static AugmentedDag augment(const Dag& base, const VarSet& targets) {
    std::vector<Variable> nodes = base.nodes();
    std::vector<Edge> edges = base.edges();
    for (const auto& t : targets) {
      const Variable& tv = base.node(t);
      if (tv.kind != VarKind::stochastic)
        throw ModelError("intervention target " + t + " must be stochastic");
      Variable f = regime_for(tv);
      if (base.has_node(f.id))
        throw ModelError("node id " + f.id + " already taken");
      nodes.push_back(f);
      for (Edge& e : edges)
        if (e.to == t) e.style = EdgeStyle::dashed;
      edges.push_back({f.id, t, EdgeStyle::solid});
    }
    return AugmentedDag(Dag(std::move(nodes), std::move(edges)));
  }

  const Dag& dag() const { return dag_; }

  bool is_regime(const std::string& id) const {
    return target_of_.count(id) > 0;
  }

  const std::map<std::string, std::string>& regime_targets() const {
    return target_of_;
  }

  // Regime node controlling `target`, if it has one.
  std::optional<std::string> regime_of(const std::string& target) const {
    auto it = regime_of_.find(target);
    if (it == regime_of_.end()) return std::nullopt;
    return it->second;
  }

  std::string target_of(const std::string& regime) const {
    auto it = target_of_.find(regime);
    if (it == target_of_.end())
      throw ModelError(regime + " is not a regime node");
    return it->second;
  }

 private:
  Dag dag_;
  std::map<std::string, std::string> target_of_;
  std::map<std::string, std::string> regime_of_;
};

}  // namespace coelab
