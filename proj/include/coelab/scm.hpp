#pragma once

// Structural and stochastic causal models, and the counterfactual machinery
// built on them: twin networks, exact probability of causation, and joint
// potential-outcome distributions.
//
// An Scm is fully deterministic given its exogenous variables: each
// endogenous node is a total function of its listed arguments plus (at most)
// one exogenous input.  An StCm keeps explicit exogenous variables but lets
// each node be stochastic given its parents.  Counterfactual queries need
// the shared set: variables held in common between the factual world and
// its mirror.  Exogenous variables are always shared; mirror-copy noise is
// drawn independently across worlds.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "coelab/cbn.hpp"
#include "coelab/errors.hpp"
#include "coelab/factor.hpp"
#include "coelab/graph.hpp"

namespace coelab {

inline std::string mirror_id(const std::string& id) { return id + "'"; }

struct StructuralEquation {
  std::string node;
  std::vector<std::string> args;         // parent variables, in table order
  std::optional<std::string> exogenous;  // appended after args in the table
  std::vector<int> table;                // node value, last argument fastest
};

class Scm {
 public:
  Scm(std::vector<Variable> variables,
      std::vector<StructuralEquation> equations, Distribution exogenous_joint,
      VarSet shared = {}, bool ignorable = false)
      : variables_(std::move(variables)),
        exo_dist_(std::move(exogenous_joint)),
        shared_(std::move(shared)),
        ignorable_(ignorable) {
    for (const Variable& v : variables_) {
      if (v.kind != VarKind::stochastic)
        throw ModelError("structural models use stochastic variables only");
      vars_by_id_.emplace(v.id, v);
    }
    for (const Variable& v : exo_dist_.scope()) {
      auto it = vars_by_id_.find(v.id);
      if (it == vars_by_id_.end() || !(it->second == v))
        throw ModelError("exogenous variable " + v.id +
                         " not declared consistently");
      exogenous_.insert(v.id);
    }
    for (StructuralEquation& e : equations) {
      if (exogenous_.count(e.node))
        throw ModelError("exogenous variable " + e.node +
                         " cannot have an equation");
      if (!vars_by_id_.count(e.node))
        throw ModelError("equation for undeclared variable " + e.node);
      if (equations_.count(e.node))
        throw ModelError("duplicate equation for " + e.node);
      std::string id = e.node;
      equations_.emplace(std::move(id), std::move(e));
    }
    for (const Variable& v : variables_)
      if (!exogenous_.count(v.id) && !equations_.count(v.id))
        throw ModelError("endogenous variable " + v.id + " has no equation");

    for (auto& [id, e] : equations_) check_equation(e);

    if (shared_.empty()) shared_ = exogenous_;
    for (const auto& id : shared_)
      if (!vars_by_id_.count(id))
        throw ModelError("shared variable " + id + " not declared");
    for (const auto& id : exogenous_)
      if (!shared_.count(id))
        throw ModelError("exogenous variable " + id +
                         " must be in the shared set");

    graph_ = build_graph();
  }

  const std::vector<Variable>& variables() const { return variables_; }
  const VarSet& exogenous() const { return exogenous_; }
  const VarSet& shared() const { return shared_; }
  bool ignorable() const { return ignorable_; }
  const Distribution& exogenous_dist() const { return exo_dist_; }
  const Dag& graph() const { return graph_; }

  const Variable& variable(const std::string& id) const {
    auto it = vars_by_id_.find(id);
    if (it == vars_by_id_.end()) throw ModelError("unknown variable " + id);
    return it->second;
  }

  bool is_endogenous(const std::string& id) const {
    return equations_.count(id) > 0;
  }

  const StructuralEquation& equation(const std::string& id) const {
    auto it = equations_.find(id);
    if (it == equations_.end())
      throw ModelError("no equation for variable " + id);
    return it->second;
  }

  // Evaluate one equation in an environment holding all its inputs.
  int evaluate(const StructuralEquation& e, const Assignment& env) const {
    std::size_t idx = 0;
    auto push = [&](const std::string& id) {
      auto it = env.find(id);
      if (it == env.end())
        throw ModelError("equation input " + id + " not available");
      idx = idx * static_cast<std::size_t>(variable(id).card) +
            static_cast<std::size_t>(it->second);
    };
    for (const auto& a : e.args) push(a);
    if (e.exogenous) push(*e.exogenous);
    return e.table[idx];
  }

 private:
  void check_equation(const StructuralEquation& e) const {
    std::size_t size = 1;
    std::set<std::string> seen;
    auto check_input = [&](const std::string& id) {
      if (!vars_by_id_.count(id))
        throw ModelError("equation for " + e.node +
                         " references undeclared variable " + id);
      if (id == e.node)
        throw ModelError("equation for " + e.node + " references itself");
      if (!seen.insert(id).second)
        throw ModelError("equation for " + e.node + " repeats input " + id);
      size *= static_cast<std::size_t>(variable(id).card);
    };
    for (const auto& a : e.args) check_input(a);
    if (e.exogenous) {
      if (!exogenous_.count(*e.exogenous))
        throw ModelError("equation for " + e.node +
                         " names non-exogenous noise " + *e.exogenous);
      check_input(*e.exogenous);
    }
    if (e.table.size() != size)
      throw ModelError("equation table for " + e.node + " has " +
                       std::to_string(e.table.size()) + " entries, needs " +
                       std::to_string(size));
    int card = variable(e.node).card;
    for (int v : e.table)
      if (v < 0 || v >= card)
        throw ModelError("equation table for " + e.node +
                         " contains out-of-range value");
  }

  Dag build_graph() const {
    std::vector<Edge> edges;
    for (const auto& [id, e] : equations_) {
      for (const auto& a : e.args) edges.push_back({a, id, EdgeStyle::solid});
      if (e.exogenous)
        edges.push_back({*e.exogenous, id, EdgeStyle::solid});
    }
    return Dag(variables_, std::move(edges));  // throws on cycles
  }

  std::vector<Variable> variables_;
  std::map<std::string, Variable> vars_by_id_;
  std::map<std::string, StructuralEquation> equations_;
  Distribution exo_dist_;
  VarSet exogenous_;
  VarSet shared_;
  bool ignorable_;
  Dag graph_;
};

// Solve the system for one exogenous configuration, with optional
// interventions overriding equations.  Returns every variable's value.
inline Assignment solve(const Scm& s, const Assignment& exogenous_values,
                        const Assignment& interventions = {}) {
  Assignment env;
  for (const auto& id : s.exogenous()) {
    auto it = exogenous_values.find(id);
    if (it == exogenous_values.end())
      throw ModelError("missing exogenous value for " + id);
    env[id] = it->second;
  }
  for (const auto& [id, v] : interventions) {
    if (!s.is_endogenous(id))
      throw ModelError("can only intervene on endogenous variables, not " +
                       id);
    if (v < 0 || v >= s.variable(id).card)
      throw ModelError("intervention value out of range for " + id);
  }
  for (const auto& id : s.graph().topological_order()) {
    if (env.count(id)) continue;
    auto it = interventions.find(id);
    env[id] = it != interventions.end() ? it->second
                                        : s.evaluate(s.equation(id), env);
  }
  return env;
}

// Visit every exogenous configuration with positive mass: fn(p, u) where p
// is the configuration's probability and u the full exogenous assignment.
template <typename F>
void for_each_exogenous(const Scm& s, F&& fn) {
  const Factor& exo = s.exogenous_dist().factor();
  for (std::size_t i = 0; i < exo.size(); ++i) {
    double p = exo.values()[i];
    if (p == 0.0) continue;
    Assignment u;
    std::vector<int> d = exo.digits_of(i);
    for (std::size_t k = 0; k < exo.scope().size(); ++k)
      u[exo.scope()[k].id] = d[k];
    fn(p, u);
  }
}

// A stochastic causal model: explicit exogenous variables, CPTs elsewhere.
class StCm {
 public:
  StCm(Dag graph, std::map<std::string, Factor> cpts, VarSet exogenous,
       VarSet shared = {}, bool ignorable = false)
      : graph_(std::move(graph)),
        cpts_(std::move(cpts)),
        exogenous_(std::move(exogenous)),
        shared_(std::move(shared)),
        ignorable_(ignorable) {
    for (const auto& id : exogenous_) {
      for (const auto& p : graph_.parents(id))
        if (!exogenous_.count(p))
          throw ModelError("exogenous variable " + id +
                           " cannot depend on endogenous " + p);
    }
    for (const Variable& v : graph_.nodes()) {
      if (v.kind != VarKind::stochastic)
        throw ModelError("stochastic causal models take stochastic nodes");
      auto it = cpts_.find(v.id);
      if (it == cpts_.end()) throw ModelError("missing CPT for " + v.id);
      validate_cpt_shape(graph_, v, it->second);
    }
    for (const auto& [id, f] : cpts_)
      if (!graph_.has_node(id))
        throw ModelError("CPT for undeclared variable " + id);
    if (shared_.empty()) shared_ = exogenous_;
    for (const auto& id : shared_)
      if (!graph_.has_node(id))
        throw ModelError("shared variable " + id + " not declared");
    for (const auto& id : exogenous_) {
      if (!graph_.has_node(id))
        throw ModelError("exogenous variable " + id + " not declared");
      if (!shared_.count(id))
        throw ModelError("exogenous variable " + id +
                         " must be in the shared set");
    }
  }

  const Dag& graph() const { return graph_; }
  const std::map<std::string, Factor>& cpts() const { return cpts_; }
  const VarSet& exogenous() const { return exogenous_; }
  const VarSet& shared() const { return shared_; }
  bool ignorable() const { return ignorable_; }

  bool is_endogenous(const std::string& id) const {
    return graph_.has_node(id) && !exogenous_.count(id);
  }

 private:
  Dag graph_;
  std::map<std::string, Factor> cpts_;
  VarSet exogenous_;
  VarSet shared_;
  bool ignorable_;
};

// Express the equations as degenerate CPTs.  A dependent exogenous joint is
// factored along the lexicographic chain; an independent one keeps its
// variables parentless.
inline StCm scm_to_stcm(const Scm& s) {
  std::map<std::string, Factor> cpts;
  std::vector<Edge> edges = s.graph().edges();

  // Exogenous block.
  const Factor& joint = s.exogenous_dist().factor();
  std::vector<Variable> exo = joint.scope();
  bool independent = true;
  {
    Factor prod = Factor::unit();
    for (const Variable& u : exo)
      prod = prod.multiply(joint.marginalize({u.id}));
    independent = approx_equal(prod, joint, 1e-12);
  }
  for (std::size_t k = 0; k < exo.size(); ++k) {
    if (independent || k == 0) {
      cpts.emplace(exo[k].id, joint.marginalize({exo[k].id}));
      continue;
    }
    VarSet prefix;
    for (std::size_t j = 0; j < k; ++j) prefix.insert(exo[j].id);
    VarSet upto = prefix;
    upto.insert(exo[k].id);
    Factor num = joint.marginalize(upto);
    Factor den = joint.marginalize(prefix);
    // Conditional table; zero-mass columns get a uniform filler so the
    // factor still normalizes column-wise.
    std::vector<Variable> scope = num.scope();
    std::vector<double> vals(num.size());
    for (std::size_t i = 0; i < num.size(); ++i) {
      std::vector<int> d = num.digits_of(i);
      Assignment pa;
      for (std::size_t t = 0; t < scope.size(); ++t)
        if (prefix.count(scope[t].id)) pa[scope[t].id] = d[t];
      double dm = den.at(pa);
      vals[i] = dm <= kZeroMassTol ? 1.0 / exo[k].card
                                   : num.values()[i] / dm;
    }
    cpts.emplace(exo[k].id, Factor(scope, std::move(vals)));
    for (const auto& p : prefix)
      edges.push_back({p, exo[k].id, EdgeStyle::solid});
  }

  // Endogenous block: indicator tables.
  for (const Variable& v : s.variables()) {
    if (s.exogenous().count(v.id)) continue;
    const StructuralEquation& e = s.equation(v.id);
    std::vector<Variable> scope;
    for (const auto& a : e.args) scope.push_back(s.variable(a));
    if (e.exogenous) scope.push_back(s.variable(*e.exogenous));
    std::vector<Variable> full = scope;
    full.push_back(v);
    std::vector<double> vals;
    vals.reserve(e.table.size() * static_cast<std::size_t>(v.card));
    for (int out : e.table)
      for (int x = 0; x < v.card; ++x) vals.push_back(x == out ? 1.0 : 0.0);
    cpts.emplace(v.id, Factor(std::move(full), std::move(vals)));
  }

  return StCm(Dag(s.variables(), std::move(edges)), std::move(cpts),
              s.exogenous(), s.shared(), s.ignorable());
}

// Observational-to-causal lift: add a regime parent for each endogenous node
// (or for the listed subset) so interventions can be expressed.
inline Cbn stcm_to_cbn(const StCm& s,
                       std::optional<VarSet> intervenable = std::nullopt) {
  VarSet targets;
  if (intervenable) {
    for (const auto& id : *intervenable) {
      if (!s.is_endogenous(id))
        throw ModelError("intervention target " + id + " must be endogenous");
      targets.insert(id);
    }
  } else {
    for (const Variable& v : s.graph().nodes())
      if (!s.exogenous().count(v.id)) targets.insert(v.id);
  }
  return Cbn::from_observational(s.graph(), s.cpts(), targets);
}

inline Cbn scm_to_cbn(const Scm& s,
                      std::optional<VarSet> intervenable = std::nullopt) {
  return stcm_to_cbn(scm_to_stcm(s), std::move(intervenable));
}

// Twin network: one copy of every shared variable, a mirror copy v' of the
// rest.  Mirror nodes read shared parents directly and mirrored parents
// through their copies.  Counterfactual interventions are applied to the
// mirror at construction: the intervened mirror loses all parents (in
// particular there is no arrow from any exogenous variable into it).
inline Cbn twin_network(const StCm& s, const Assignment& cf_do) {
  for (const auto& [id, v] : cf_do) {
    if (!s.graph().has_node(id)) throw ModelError("unknown variable " + id);
    if (s.shared().count(id))
      throw ModelError("cannot set a counterfactual value for shared variable " +
                       id + "; it is common to both worlds");
    if (!s.is_endogenous(id))
      throw ModelError("counterfactual interventions target endogenous "
                       "variables, not " + id);
    if (v < 0 || v >= s.graph().node(id).card)
      throw ModelError("counterfactual value out of range for " + id);
  }

  std::vector<Variable> nodes = s.graph().nodes();
  std::vector<Edge> edges = s.graph().edges();
  std::map<std::string, Factor> cpts = s.cpts();

  for (const Variable& v : s.graph().nodes()) {
    if (s.shared().count(v.id)) continue;
    Variable m = v;
    m.id = mirror_id(v.id);
    nodes.push_back(m);
    if (cf_do.count(v.id)) {
      cpts.emplace(m.id, Factor::point_mass(m, cf_do.at(v.id)));
      continue;
    }
    std::map<std::string, std::string> remap{{v.id, m.id}};
    for (const auto& p : s.graph().parents(v.id)) {
      std::string from = s.shared().count(p) ? p : mirror_id(p);
      if (!s.shared().count(p)) remap[p] = from;
      edges.push_back({from, m.id, EdgeStyle::solid});
    }
    cpts.emplace(m.id, s.cpts().at(v.id).rename(remap));
  }

  return Cbn(AugmentedDag(Dag(std::move(nodes), std::move(edges))),
             std::move(cpts));
}

// Probability of causation, exactly, from the twin network:
//   P(mirror outcome = 0 | factual evidence, counterfactual intervention).
// `factual` holds the observed event (exposure and outcome); `cf_do` the
// counterfactual settings, keyed by factual variable names.  When the model
// is declared ignorable, the factual exposure is set by intervention rather
// than conditioning (the ratio form); otherwise it stays ordinary evidence.
inline double pc_exact(const StCm& s, const Assignment& factual,
                       const Assignment& cf_do,
                       std::optional<std::string> outcome = std::nullopt) {
  if (cf_do.empty()) throw ModelError("no counterfactual intervention given");
  for (const auto& [id, v] : factual) {
    if (!s.graph().has_node(id)) throw ModelError("unknown variable " + id);
    if (v < 0 || v >= s.graph().node(id).card)
      throw ModelError("factual value out of range for " + id);
  }
  std::string y;
  if (outcome) {
    y = *outcome;
    if (!factual.count(y))
      throw ModelError("outcome " + y + " must appear in the factual event");
  } else {
    for (const auto& [id, v] : factual)
      if (!cf_do.count(id)) {
        if (!y.empty())
          throw ModelError("outcome is ambiguous; name it explicitly");
        y = id;
      }
    if (y.empty()) throw ModelError("factual event has no outcome variable");
  }

  if (s.shared().count(y))
    return factual.at(y) == 0 ? 1.0 : 0.0;  // mirror is the same variable

  Cbn twin = twin_network(s, cf_do);
  Assignment evidence = factual;
  if (s.ignorable()) {
    Assignment set_factual;
    for (const auto& [id, v] : cf_do) {
      auto it = factual.find(id);
      if (it != factual.end()) {
        set_factual[id] = it->second;
        evidence.erase(id);
      }
    }
    if (!set_factual.empty()) twin = mutilate(twin, set_factual);
  }

  Query q;
  q.targets = {mirror_id(y)};
  q.evidence = evidence;
  Distribution d = joint_query(twin, q);
  Assignment probe{{mirror_id(y), 0}};
  return d.prob(probe);
}

inline double pc_exact(const Scm& s, const Assignment& factual,
                       const Assignment& cf_do,
                       std::optional<std::string> outcome = std::nullopt) {
  return pc_exact(scm_to_stcm(s), factual, cf_do, std::move(outcome));
}

// Joint distribution of (X, Y(0), Y(1)) for a deterministic model: solve the
// system once per exogenous configuration under idle, do(x=0), and do(x=1).
struct PotentialOutcomeJoint {
  std::string x, y;
  Factor joint;  // scope {x, y(0), y(1)}

  std::string y0_id() const { return y + "(0)"; }
  std::string y1_id() const { return y + "(1)"; }

  // P(Y(x)=y_val, X=x_val) and friends.
  double joint_prob(int x_val, int y0, int y1) const {
    return joint.at({{x, x_val}, {y0_id(), y0}, {y1_id(), y1}});
  }
  double p_po(int arm, int y_val) const {
    Factor m = joint.marginalize({arm == 0 ? y0_id() : y1_id()});
    return m.values()[static_cast<std::size_t>(y_val)];
  }
};

inline PotentialOutcomeJoint potential_outcomes(const Scm& s,
                                                const std::string& x,
                                                const std::string& y) {
  const Variable& xv = s.variable(x);
  const Variable& yv = s.variable(y);
  if (!s.is_endogenous(x) || !s.is_endogenous(y))
    throw ModelError("potential outcomes need endogenous cause and outcome");
  if (xv.card != 2)
    throw ModelError("potential-outcome pair needs a binary cause");

  Variable y0{y + "(0)", yv.card, VarKind::stochastic};
  Variable y1{y + "(1)", yv.card, VarKind::stochastic};
  Factor acc = Factor::constant({xv, y0, y1}, 0.0);
  std::vector<double> vals = acc.values();

  for_each_exogenous(s, [&](double p, const Assignment& u) {
    int x_idle = solve(s, u).at(x);
    int y_0 = solve(s, u, {{x, 0}}).at(y);
    int y_1 = solve(s, u, {{x, 1}}).at(y);
    Assignment cell{{xv.id, x_idle}, {y0.id, y_0}, {y1.id, y_1}};
    std::vector<int> digits(3);
    for (std::size_t k = 0; k < acc.scope().size(); ++k)
      digits[k] = cell.at(acc.scope()[k].id);
    vals[acc.flat_of(digits)] += p;
  });
  return PotentialOutcomeJoint{x, y, Factor(acc.scope(), std::move(vals))};
}

}  // namespace coelab
