#pragma once

// Causal Bayesian networks: a regime-augmented DAG with one CPT per
// stochastic node, plus the query machinery (variable elimination),
// interventions, average/specific causal effects, and back-door adjustment.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "coelab/errors.hpp"
#include "coelab/factor.hpp"
#include "coelab/graph.hpp"

namespace coelab {

// Scope must be exactly {v} ∪ parents(v), and every column (fixed parent
// assignment) must sum to 1 within kNormalizationTol.
inline void validate_cpt_shape(const Dag& g, const Variable& v,
                               const Factor& f) {
  std::set<std::string> want(g.parents(v.id).begin(), g.parents(v.id).end());
  want.insert(v.id);
  std::set<std::string> got;
  for (const Variable& s : f.scope()) {
    got.insert(s.id);
    if (!(g.node(s.id) == s))
      throw ModelError("CPT scope variable " + s.id +
                       " disagrees with graph declaration");
  }
  if (got != want)
    throw ModelError("CPT scope for " + v.id +
                     " must be the node and its parents");
  VarSet parents;
  for (const auto& p : want)
    if (p != v.id) parents.insert(p);
  Factor col_sums = f.marginalize(parents);
  for (double m : col_sums.values())
    if (std::fabs(m - 1.0) > kNormalizationTol)
      throw ModelError("CPT for " + v.id + " has a column summing to " +
                       std::to_string(m));
}

// CPT semantics for a node X with regime parent F_X:
//   F_X = idle      -> the observational conditional P(X | other parents)
//   F_X = x (set)   -> point mass at X = x, other parents ignored
// Both branches live in one factor over {X} ∪ parents(X) ∪ {F_X}; the
// "other parents ignored" branch is constant across the dashed parents.
class Cbn {
 public:
  Cbn() = default;

  Cbn(AugmentedDag graph, std::map<std::string, Factor> cpts)
      : graph_(std::move(graph)), cpts_(std::move(cpts)) {
    validate();
  }

  // Build from an observational network: augment the DAG with a regime node
  // for each intervenable target and extend that target's CPT accordingly.
  static Cbn from_observational(const Dag& base,
                                const std::map<std::string, Factor>& cpts,
                                const VarSet& intervenable) {
    AugmentedDag g = AugmentedDag::augment(base, intervenable);
    std::map<std::string, Factor> full = cpts;
    for (const auto& t : intervenable) {
      auto it = full.find(t);
      if (it == full.end()) throw ModelError("missing CPT for " + t);
      it->second = extend_with_regime(it->second, base.node(t));
    }
    return Cbn(std::move(g), std::move(full));
  }

  const AugmentedDag& graph() const { return graph_; }
  const Dag& dag() const { return graph_.dag(); }

  const Factor& cpt(const std::string& id) const {
    auto it = cpts_.find(id);
    if (it == cpts_.end()) throw ModelError("no CPT for variable " + id);
    return it->second;
  }

  // Regime settings baked in by intervene(); queries may not contradict them.
  const Assignment& fixed_regimes() const { return fixed_regimes_; }

  std::vector<std::string> stochastic_nodes() const {
    std::vector<std::string> out;
    for (const Variable& v : dag().nodes())
      if (v.kind == VarKind::stochastic) out.push_back(v.id);
    return out;
  }

  // The target's CPT extended with a regime parent (see class comment).
  static Factor extend_with_regime(const Factor& obs_cpt,
                                   const Variable& target) {
    Variable f = regime_for(target);
    std::vector<Variable> scope = obs_cpt.scope();
    scope.push_back(f);  // constructor re-sorts
    std::vector<double> values;
    values.reserve(obs_cpt.size() * static_cast<std::size_t>(f.card));
    // Lay out with F last (fastest) over the existing canonical scope.
    for (std::size_t i = 0; i < obs_cpt.size(); ++i) {
      std::vector<int> digits = obs_cpt.digits_of(i);
      int x = 0;
      for (std::size_t k = 0; k < obs_cpt.scope().size(); ++k)
        if (obs_cpt.scope()[k].id == target.id) x = digits[k];
      for (int fv = 0; fv < f.card; ++fv) {
        if (fv == idle_state(f))
          values.push_back(obs_cpt.values()[i]);
        else
          values.push_back(fv == x ? 1.0 : 0.0);
      }
    }
    return Factor(std::move(scope), std::move(values));
  }

  friend Cbn intervene(const Cbn&, const Assignment&);

 private:
  void validate() {
    for (const Variable& v : dag().nodes()) {
      if (v.kind == VarKind::regime) {
        if (cpts_.count(v.id))
          throw ModelError("regime node " + v.id + " must not carry a CPT");
        continue;
      }
      auto it = cpts_.find(v.id);
      if (it == cpts_.end()) throw ModelError("missing CPT for " + v.id);
      check_cpt(v, it->second);
    }
    for (const auto& [id, f] : cpts_)
      if (!dag().has_node(id))
        throw ModelError("CPT for undeclared variable " + id);
  }

  void check_cpt(const Variable& v, const Factor& f) const {
    validate_cpt_shape(dag(), v, f);

    // Regime branch: point mass at the commanded value.
    if (auto reg = graph_.regime_of(v.id)) {
      const Variable& fvar = dag().node(*reg);
      detail::Odometer od(f.scope());
      do {
        const auto& d = od.digits();
        int fv = -1, x = -1;
        for (std::size_t k = 0; k < f.scope().size(); ++k) {
          if (f.scope()[k].id == fvar.id) fv = d[k];
          if (f.scope()[k].id == v.id) x = d[k];
        }
        if (fv >= 0 && fv != idle_state(fvar)) {
          double expect = (fv == x) ? 1.0 : 0.0;
          if (std::fabs(f.values()[f.flat_of(d)] - expect) > kNormalizationTol)
            throw ModelError("CPT for " + v.id +
                             " must be a point mass when " + fvar.id +
                             " commands a value");
        }
      } while (od.advance());
    }
  }

  AugmentedDag graph_;
  std::map<std::string, Factor> cpts_;
  Assignment fixed_regimes_;
};

// Conditional query under an explicit regime.  Regime keys are regime-node
// ids; any regime node not mentioned is idle.
struct Query {
  VarSet targets;
  Assignment evidence;  // stochastic variables only
  Assignment regime;    // regime nodes only
};

namespace detail {

// Interaction-graph min-fill elimination order, smallest id on ties.
inline std::vector<std::string> min_fill_order(
    const std::vector<Factor>& factors, const VarSet& keep) {
  std::map<std::string, std::set<std::string>> adj;
  for (const Factor& f : factors) {
    for (const Variable& a : f.scope()) {
      adj.try_emplace(a.id);
      for (const Variable& b : f.scope())
        if (a.id != b.id) adj[a.id].insert(b.id);
    }
  }
  std::set<std::string> pending;
  for (const auto& [id, nbrs] : adj)
    if (!keep.count(id)) pending.insert(id);

  std::vector<std::string> order;
  while (!pending.empty()) {
    std::string best;
    std::size_t best_fill = 0;
    for (const auto& v : pending) {
      std::vector<std::string> nbrs(adj[v].begin(), adj[v].end());
      std::size_t fill = 0;
      for (std::size_t i = 0; i < nbrs.size(); ++i)
        for (std::size_t j = i + 1; j < nbrs.size(); ++j)
          if (!adj[nbrs[i]].count(nbrs[j])) ++fill;
      if (best.empty() || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    order.push_back(best);
    std::vector<std::string> nbrs(adj[best].begin(), adj[best].end());
    for (std::size_t i = 0; i < nbrs.size(); ++i)
      for (std::size_t j = i + 1; j < nbrs.size(); ++j) {
        adj[nbrs[i]].insert(nbrs[j]);
        adj[nbrs[j]].insert(nbrs[i]);
      }
    for (const auto& n : nbrs) adj[n].erase(best);
    adj.erase(best);
    pending.erase(best);
  }
  return order;
}

// Full regime assignment: defaults to idle, then fixed settings from
// intervene(), then the query's explicit settings.  Conflicts are errors.
inline Assignment effective_regime(const Cbn& m, const Assignment& query_regime) {
  Assignment full;
  for (const auto& [fid, target] : m.graph().regime_targets())
    full[fid] = idle_state(m.dag().node(fid));
  for (const auto& [fid, v] : m.fixed_regimes()) full[fid] = v;
  for (const auto& [fid, v] : query_regime) {
    if (!m.graph().is_regime(fid))
      throw ModelError(fid + " is not a regime node");
    if (v < 0 || v >= m.dag().node(fid).card)
      throw ModelError("regime state out of range for " + fid);
    auto fixed = m.fixed_regimes().find(fid);
    if (fixed != m.fixed_regimes().end() && fixed->second != v)
      throw ModelError("query regime for " + fid +
                       " contradicts an intervention already applied");
    full[fid] = v;
  }
  return full;
}

}  // namespace detail

// Unnormalized joint over `targets` with evidence and regime sliced in:
// each table entry is P(targets = t, evidence | regime).
inline Factor unnormalized_query(const Cbn& m, const Query& q) {
  if (q.targets.empty()) throw ModelError("query needs at least one target");
  for (const auto& t : q.targets) {
    if (!m.dag().has_node(t)) throw ModelError("unknown query target " + t);
    if (m.dag().node(t).kind != VarKind::stochastic)
      throw ModelError("query target " + t + " is not stochastic");
    if (q.evidence.count(t))
      throw ModelError("query target " + t + " is also evidence");
  }
  for (const auto& [id, v] : q.evidence) {
    const Variable& var = m.dag().node(id);
    if (var.kind != VarKind::stochastic)
      throw ModelError("evidence variable " + id + " is not stochastic");
    if (v < 0 || v >= var.card)
      throw ModelError("evidence state out of range for " + id);
  }
  Assignment slice = detail::effective_regime(m, q.regime);
  for (const auto& [id, v] : q.evidence) slice[id] = v;

  std::vector<Factor> factors;
  for (const auto& id : m.stochastic_nodes())
    factors.push_back(m.cpt(id).condition(slice));

  for (const auto& v : detail::min_fill_order(factors, q.targets)) {
    std::vector<Factor> bucket;
    std::vector<Factor> rest;
    for (Factor& f : factors) {
      if (f.has(v))
        bucket.push_back(std::move(f));
      else
        rest.push_back(std::move(f));
    }
    Factor prod = Factor::unit();
    for (const Factor& f : bucket) prod = prod.multiply(f);
    rest.push_back(prod.sum_out(v));
    factors = std::move(rest);
  }

  Factor joint = Factor::unit();
  for (const Factor& f : factors) joint = joint.multiply(f);
  // Regime variables queried as targets keep the sliced regime out of scope;
  // all remaining scope variables are exactly the targets.
  return joint;
}

// P(targets | evidence; regime).  ZeroMass if the evidence has no support.
inline Distribution joint_query(const Cbn& m, const Query& q) {
  return normalize(unnormalized_query(m, q));
}

// Fix the regime nodes of the given targets at the given values.  The graph
// is untouched; the setting is recorded and applied to every later query.
// Targets must have been declared intervenable (carry a regime parent).
inline Cbn intervene(const Cbn& m, const Assignment& set_values) {
  Cbn out = m;
  for (const auto& [target, value] : set_values) {
    const Variable& tv = m.dag().node(target);
    auto reg = m.graph().regime_of(target);
    if (!reg)
      throw ModelError("cannot intervene on " + target +
                       ": no regime node declared for it");
    if (value < 0 || value >= tv.card)
      throw ModelError("intervention value out of range for " + target);
    out.fixed_regimes_[*reg] = value;
  }
  return out;
}

// Graph-surgery form of the same intervention: drop all arrows into each
// target (including its regime node, which disappears), and replace its CPT
// by a point mass.  Equivalent to intervene() for every query.
inline Cbn mutilate(const Cbn& m, const Assignment& set_values) {
  std::set<std::string> dropped_regimes;
  for (const auto& [target, value] : set_values) {
    const Variable& tv = m.dag().node(target);
    if (value < 0 || value >= tv.card)
      throw ModelError("intervention value out of range for " + target);
    if (auto reg = m.graph().regime_of(target)) dropped_regimes.insert(*reg);
  }
  std::vector<Variable> nodes;
  for (const Variable& v : m.dag().nodes())
    if (!dropped_regimes.count(v.id)) nodes.push_back(v);
  std::vector<Edge> edges;
  for (const Edge& e : m.dag().edges())
    if (!set_values.count(e.to) && !dropped_regimes.count(e.from))
      edges.push_back(e);
  std::map<std::string, Factor> cpts;
  for (const Variable& v : nodes) {
    if (v.kind != VarKind::stochastic) continue;
    auto it = set_values.find(v.id);
    if (it != set_values.end())
      cpts.emplace(v.id, Factor::point_mass(v, it->second));
    else
      cpts.emplace(v.id, m.cpt(v.id));
  }
  return Cbn(AugmentedDag(Dag(std::move(nodes), std::move(edges))),
             std::move(cpts));
}

// E[y | set x] as a function of the commanded value.
inline double interventional_mean(const Cbn& m, const std::string& x,
                                  const std::string& y, int value,
                                  const Assignment& given = {}) {
  auto reg = m.graph().regime_of(x);
  if (!reg)
    throw ModelError("no regime node declared for " + x);
  Query q;
  q.targets = {y};
  q.evidence = given;
  q.regime[*reg] = value;
  return expectation(joint_query(m, q), y);
}

// Average causal effect of binary x on y: E(y | set 1) - E(y | set 0).
inline double ace(const Cbn& m, const std::string& x, const std::string& y) {
  if (m.dag().node(x).card != 2)
    throw ModelError("average causal effect needs a binary cause, " + x +
                     " is not binary");
  return interventional_mean(m, x, y, 1) - interventional_mean(m, x, y, 0);
}

// Specific causal effect given context u (usually exogenous variables).
inline double sce(const Cbn& m, const std::string& x, const std::string& y,
                  const Assignment& u) {
  if (m.dag().node(x).card != 2)
    throw ModelError("specific causal effect needs a binary cause, " + x +
                     " is not binary");
  return interventional_mean(m, x, y, 1, u) -
         interventional_mean(m, x, y, 0, u);
}

// Back-door adjustment: P(y | set x) = Σ_s P(y | x, s) P(s), one
// distribution per commanded value x, computed from idle-regime queries.
// Strata with (numerically) zero mass are skipped; a stratum with mass but
// without exposure arm x is a positivity violation.
inline std::vector<Distribution> back_door(const Cbn& m, const std::string& x,
                                           const std::string& y,
                                           const VarSet& s) {
  const Variable& xv = m.dag().node(x);
  const Variable& yv = m.dag().node(y);
  if (s.count(x) || s.count(y))
    throw ModelError("adjustment set must exclude the cause and the outcome");
  for (const auto& id : s)
    if (m.dag().node(id).kind != VarKind::stochastic)
      throw ModelError("adjustment variable " + id + " is not stochastic");

  Query q;
  q.targets = s;
  q.targets.insert(x);
  q.targets.insert(y);
  Factor joint = joint_query(m, q).factor();

  std::vector<Variable> svars;
  for (const Variable& v : joint.scope())
    if (s.count(v.id)) svars.push_back(v);

  std::vector<std::vector<double>> result(
      static_cast<std::size_t>(xv.card),
      std::vector<double>(static_cast<std::size_t>(yv.card), 0.0));
  detail::Odometer od(svars);
  do {
    Assignment sa;
    for (std::size_t k = 0; k < svars.size(); ++k)
      sa[svars[k].id] = od.digits()[k];
    Factor slice = joint.condition(sa);  // over {x, y}
    double p_s = slice.total_mass();
    if (p_s <= kZeroMassTol) continue;
    for (int xi = 0; xi < xv.card; ++xi) {
      Factor col = slice.condition({{x, xi}});
      double p_xs = col.total_mass();
      if (p_xs <= kZeroMassTol)
        throw PositivityViolationError(
            "stratum with positive mass never receives " + x + "=" +
            std::to_string(xi) + "; adjustment formula undefined");
      for (int yi = 0; yi < yv.card; ++yi)
        result[xi][yi] += col.values()[static_cast<std::size_t>(yi)] / p_xs * p_s;
    }
  } while (!svars.empty() && od.advance());

  std::vector<Distribution> out;
  for (int xi = 0; xi < xv.card; ++xi) {
    Variable yc = yv;
    out.push_back(Distribution(Factor({yc}, result[static_cast<std::size_t>(xi)])));
  }
  return out;
}

}  // namespace coelab
