#pragma once

// Synthetic models and forward sampling.  All generation is seed-driven
// through the pinned Rng, so fixtures and property tests replay exactly.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "coelab/cbn.hpp"
#include "coelab/errors.hpp"
#include "coelab/factor.hpp"
#include "coelab/graph.hpp"
#include "coelab/iv.hpp"
#include "coelab/rng.hpp"
#include "coelab/scm.hpp"

namespace coelab {

struct Dataset {
  std::vector<std::string> columns;
  std::vector<std::vector<int>> rows;
  std::vector<double> counts;  // empty means every row counts once
};

struct RandomCbnSpec {
  int num_nodes = 4;       // at most 8
  int max_card = 2;        // at most 4
  double edge_prob = 0.5;
  std::uint64_t seed = 0;
  bool intervenable = true;  // give every node a regime parent
};

namespace detail {

// CPT with flat-Dirichlet columns; scope laid out (parents..., node).
inline Factor random_cpt(Rng& rng, const Variable& node,
                         std::vector<Variable> parents) {
  std::size_t combos = table_size(parents);
  std::vector<double> values;
  values.reserve(combos * static_cast<std::size_t>(node.card));
  for (std::size_t i = 0; i < combos; ++i) {
    std::vector<double> col =
        rng.dirichlet(static_cast<std::size_t>(node.card));
    values.insert(values.end(), col.begin(), col.end());
  }
  parents.push_back(node);
  return Factor(std::move(parents), std::move(values));
}

}  // namespace detail

// Random DAG over nodes V0..Vk with random cardinalities and Dirichlet
// CPTs.  Edges point from lower to higher index.
inline Cbn random_cbn(const RandomCbnSpec& spec) {
  if (spec.num_nodes < 1 || spec.num_nodes > 8)
    throw ModelError("random network size must be 1..8");
  if (spec.max_card < 2 || spec.max_card > 4)
    throw ModelError("random cardinality cap must be 2..4");
  if (spec.edge_prob < 0.0 || spec.edge_prob > 1.0)
    throw ModelError("edge probability must lie in [0, 1]");
  Rng rng(spec.seed);
  std::vector<Variable> nodes;
  for (int i = 0; i < spec.num_nodes; ++i)
    nodes.push_back(Variable{"V" + std::to_string(i),
                             rng.uniform_int(2, spec.max_card),
                             VarKind::stochastic});
  std::vector<Edge> edges;
  std::map<std::string, std::vector<Variable>> parents;
  for (int i = 0; i < spec.num_nodes; ++i)
    for (int j = i + 1; j < spec.num_nodes; ++j)
      if (rng.uniform01() < spec.edge_prob) {
        edges.push_back({nodes[i].id, nodes[j].id, EdgeStyle::solid});
        parents[nodes[j].id].push_back(nodes[i]);
      }
  std::map<std::string, Factor> cpts;
  for (const Variable& v : nodes)
    cpts.emplace(v.id, detail::random_cpt(rng, v, parents[v.id]));
  Dag base(nodes, edges);
  VarSet targets;
  if (spec.intervenable)
    for (const Variable& v : nodes) targets.insert(v.id);
  return Cbn::from_observational(base, cpts, targets);
}

// Exposure-outcome model with a background variable U: U -> Y, X -> Y, and
// (unless ignorable) U -> X.  Used to exercise counterfactual queries.
inline StCm random_exposure_outcome_stcm(std::uint64_t seed, bool ignorable) {
  Rng rng(seed);
  Variable u{"U", rng.uniform_int(2, 4), VarKind::stochastic};
  Variable x{"X", 2, VarKind::stochastic};
  Variable y{"Y", 2, VarKind::stochastic};

  std::vector<Edge> edges{{u.id, y.id, EdgeStyle::solid},
                          {x.id, y.id, EdgeStyle::solid}};
  std::map<std::string, Factor> cpts;
  cpts.emplace(u.id, detail::random_cpt(rng, u, {}));
  if (ignorable) {
    cpts.emplace(x.id, detail::random_cpt(rng, x, {}));
  } else {
    edges.push_back({u.id, x.id, EdgeStyle::solid});
    cpts.emplace(x.id, detail::random_cpt(rng, x, {u}));
  }
  cpts.emplace(y.id, detail::random_cpt(rng, y, {u, x}));
  return StCm(Dag({u, x, y}, edges), std::move(cpts), {"U"}, {"U"},
              ignorable);
}

// Randomized-instrument structural model: Z randomized, X responds to Z and
// a background U, Y responds to X and U.  Perfect compliance forces X = Z.
inline Scm random_iv_scm(std::uint64_t seed, bool perfect_compliance = false) {
  Rng rng(seed);
  int uc = rng.uniform_int(2, 4);
  Variable u{"U", uc, VarKind::stochastic};
  Variable uz{"UZ", 2, VarKind::stochastic};
  Variable z{"Z", 2, VarKind::stochastic};
  Variable x{"X", 2, VarKind::stochastic};
  Variable y{"Y", 2, VarKind::stochastic};

  StructuralEquation ez{"Z", {}, "UZ", {0, 1}};
  std::vector<int> fx;
  for (int zz = 0; zz < 2; ++zz)
    for (int uu = 0; uu < uc; ++uu)
      fx.push_back(perfect_compliance ? zz : rng.uniform_int(0, 1));
  StructuralEquation ex{"X", {"Z"}, "U", fx};
  std::vector<int> fy;
  for (int xx = 0; xx < 2; ++xx)
    for (int uu = 0; uu < uc; ++uu) fy.push_back(rng.uniform_int(0, 1));
  StructuralEquation ey{"Y", {"X"}, "U", fy};

  std::vector<double> wu = rng.dirichlet(static_cast<std::size_t>(uc));
  double theta = 0.2 + 0.6 * rng.uniform01();
  std::vector<double> joint;
  for (int uu = 0; uu < uc; ++uu) {
    joint.push_back(wu[static_cast<std::size_t>(uu)] * (1.0 - theta));
    joint.push_back(wu[static_cast<std::size_t>(uu)] * theta);
  }
  Distribution exo(Factor({u, uz}, std::move(joint)));
  return Scm({u, uz, z, x, y}, {ez, ex, ey}, std::move(exo));
}

// Flat-Dirichlet law over the 16 response types (12 when defier-free).
inline PrincipalStrata random_strata(std::uint64_t seed, bool defier_free) {
  Rng rng(seed);
  PrincipalStrata s;
  if (defier_free) {
    std::vector<double> w = rng.dirichlet(12);
    std::size_t k = 0;
    for (int x0 = 0; x0 < 2; ++x0)
      for (int x1 = 0; x1 < 2; ++x1) {
        if (x0 == 1 && x1 == 0) continue;
        for (int y0 = 0; y0 < 2; ++y0)
          for (int y1 = 0; y1 < 2; ++y1)
            s.q[PrincipalStrata::index(x0, x1, y0, y1)] = w[k++];
      }
  } else {
    std::vector<double> w = rng.dirichlet(16);
    std::copy(w.begin(), w.end(), s.q.begin());
  }
  return s;
}

// Ancestral sampling from the idle-regime joint.  Columns follow the
// topological order; regime variables are not part of the data.
inline Dataset sample(const Cbn& m, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset out;
  // Per node: the idle-regime CPT flattened, with strides for the parent
  // columns (indexed into the output row) and for the node itself.
  struct NodeSampler {
    std::vector<double> table;
    std::vector<std::size_t> parent_cols;
    std::vector<std::size_t> parent_strides;
    std::size_t own_stride = 1;
    int card = 2;
  };
  Assignment idle;
  for (const auto& [fid, target] : m.graph().regime_targets())
    idle[fid] = idle_state(m.dag().node(fid));
  std::map<std::string, std::size_t> col_of;
  for (const auto& id : m.dag().topological_order()) {
    if (m.graph().is_regime(id)) continue;
    col_of[id] = out.columns.size();
    out.columns.push_back(id);
  }
  std::vector<NodeSampler> samplers;
  for (const auto& id : out.columns) {
    Factor f = m.cpt(id).condition(idle);
    NodeSampler s;
    s.table = f.values();
    s.card = m.dag().node(id).card;
    std::size_t stride = 1;
    for (std::size_t k = f.scope().size(); k-- > 0;) {
      const Variable& v = f.scope()[k];
      if (v.id == id) {
        s.own_stride = stride;
      } else {
        s.parent_cols.push_back(col_of.at(v.id));
        s.parent_strides.push_back(stride);
      }
      stride *= static_cast<std::size_t>(v.card);
    }
    samplers.push_back(std::move(s));
  }
  out.rows.reserve(n);
  std::vector<double> weights;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> row(samplers.size(), 0);
    for (std::size_t k = 0; k < samplers.size(); ++k) {
      const NodeSampler& s = samplers[k];
      std::size_t base = 0;
      for (std::size_t p = 0; p < s.parent_cols.size(); ++p)
        base += s.parent_strides[p] *
                static_cast<std::size_t>(row[s.parent_cols[p]]);
      weights.resize(static_cast<std::size_t>(s.card));
      for (int v = 0; v < s.card; ++v)
        weights[static_cast<std::size_t>(v)] =
            s.table[base + s.own_stride * static_cast<std::size_t>(v)];
      row[k] = rng.categorical(weights);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

struct LinearSemSample {
  std::vector<double> z, x, y;
};

// Forward-simulate the two-equation linear model with correlated normal
// disturbances (Cholesky of the residual covariance) and Bernoulli Z.
inline LinearSemSample simulate_linear_sem(const LinearSemParams& p,
                                           std::size_t n, std::uint64_t seed,
                                           double p_z1 = 0.5) {
  p.validate();
  check_probability(p_z1, "P(Z=1)");
  double l11 = std::sqrt(p.var_x);
  double l21 = l11 > 0.0 ? p.cov_xy / l11 : 0.0;
  if (l11 == 0.0 && p.cov_xy != 0.0)
    throw ModelError("zero exposure variance with nonzero covariance");
  double rem = p.var_y - l21 * l21;
  double l22 = rem > 0.0 ? std::sqrt(rem) : 0.0;

  Rng rng(seed);
  LinearSemSample s;
  s.z.reserve(n);
  s.x.reserve(n);
  s.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = rng.uniform01() < p_z1 ? 1.0 : 0.0;
    double n1 = rng.normal();
    double n2 = rng.normal();
    double ux = l11 * n1;
    double uy = l21 * n1 + l22 * n2;
    double x = p.alpha0 + p.alpha1 * z + ux;
    double y = p.beta0 + p.beta1 * x + uy;
    s.z.push_back(z);
    s.x.push_back(x);
    s.y.push_back(y);
  }
  return s;
}

}  // namespace coelab
