#pragma once

// External formats:
//   - model files: JSON, {"version": 1, "type": "cbn" | "scm" | "stcm", ...}
//   - data files: CSV, header of variable names plus an optional "count"
//     column, integer state indices in the body
// plus plug-in estimation of the bound inputs from counted data, with
// optional add-alpha smoothing of the underlying contingency table.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coelab/bounds.hpp"
#include "coelab/cbn.hpp"
#include "coelab/errors.hpp"
#include "coelab/iv.hpp"
#include "coelab/scm.hpp"
#include "coelab/synth.hpp"

namespace coelab {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Model files

struct ModelFile {
  enum class Type { cbn, scm, stcm };
  Type type = Type::cbn;
  std::optional<Cbn> cbn;
  std::optional<Scm> scm;
  std::optional<StCm> stcm;

  // Every model can be queried as a causal Bayesian network.
  Cbn as_cbn() const {
    if (cbn) return *cbn;
    if (stcm) return stcm_to_cbn(*stcm);
    return scm_to_cbn(*scm);
  }

  // Counterfactuals need world-sharing structure, which a plain network
  // does not carry.
  StCm as_stcm() const {
    if (stcm) return *stcm;
    if (scm) return scm_to_stcm(*scm);
    throw ModelError(
        "counterfactual queries need a structural model (type scm or stcm), "
        "not a plain network");
  }
};

namespace detail {

inline const Json& field(const Json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw ModelError("model file missing field '" + key + "'");
  return *it;
}

inline std::vector<Variable> parse_variables(const Json& j) {
  std::vector<Variable> vars;
  for (const Json& v : field(j, "variables")) {
    Variable out;
    out.id = field(v, "name").get<std::string>();
    out.card = field(v, "card").get<int>();
    vars.push_back(std::move(out));
  }
  return vars;
}

inline std::vector<Edge> parse_edges(const Json& j) {
  std::vector<Edge> edges;
  auto it = j.find("edges");
  if (it == j.end()) return edges;
  for (const Json& e : *it) {
    Edge out;
    if (e.is_array()) {
      if (e.size() != 2) throw ModelError("edge arrays must be [from, to]");
      out.from = e[0].get<std::string>();
      out.to = e[1].get<std::string>();
    } else {
      out.from = field(e, "from").get<std::string>();
      out.to = field(e, "to").get<std::string>();
      if (e.contains("style")) {
        std::string s = e["style"].get<std::string>();
        if (s == "dashed")
          out.style = EdgeStyle::dashed;
        else if (s != "solid")
          throw ModelError("edge style must be solid or dashed");
      }
    }
    edges.push_back(std::move(out));
  }
  return edges;
}

// CPT entry {"parents": [...], "table": [...]}: table indexed with the
// listed parents (leftmost slowest) and the node's own value fastest.
inline std::map<std::string, Factor> parse_cpts(const Json& j,
                                                const Dag& graph) {
  std::map<std::string, Factor> cpts;
  for (const auto& [node, entry] : field(j, "cpts").items()) {
    if (!graph.has_node(node))
      throw ModelError("CPT for undeclared variable " + node);
    std::vector<Variable> scope;
    if (entry.contains("parents"))
      for (const Json& p : entry["parents"])
        scope.push_back(graph.node(p.get<std::string>()));
    scope.push_back(graph.node(node));
    std::vector<double> table =
        field(entry, "table").get<std::vector<double>>();
    cpts.emplace(node, Factor(std::move(scope), std::move(table)));
  }
  return cpts;
}

inline VarSet parse_name_set(const Json& j, const std::string& key) {
  VarSet out;
  auto it = j.find(key);
  if (it == j.end()) return out;
  for (const Json& v : *it) out.insert(v.get<std::string>());
  return out;
}

}  // namespace detail

inline ModelFile load_model(const Json& j) {
  if (!j.is_object()) throw ModelError("model file must be a JSON object");
  if (detail::field(j, "version").get<int>() != 1)
    throw ModelError("unsupported model file version");
  std::string type = detail::field(j, "type").get<std::string>();
  std::vector<Variable> vars = detail::parse_variables(j);
  bool ignorable = j.value("ignorable", false);

  ModelFile out;
  if (type == "cbn") {
    out.type = ModelFile::Type::cbn;
    Dag base(vars, detail::parse_edges(j));
    auto cpts = detail::parse_cpts(j, base);
    VarSet targets = detail::parse_name_set(j, "regime_nodes");
    out.cbn = Cbn::from_observational(base, cpts, targets);
  } else if (type == "stcm") {
    out.type = ModelFile::Type::stcm;
    Dag graph(vars, detail::parse_edges(j));
    auto cpts = detail::parse_cpts(j, graph);
    VarSet exo = detail::parse_name_set(j, "exogenous");
    VarSet shared = detail::parse_name_set(j, "shared");
    out.stcm = StCm(std::move(graph), std::move(cpts), std::move(exo),
                    std::move(shared), ignorable);
  } else if (type == "scm") {
    out.type = ModelFile::Type::scm;
    std::vector<StructuralEquation> eqs;
    for (const auto& [node, entry] : detail::field(j, "equations").items()) {
      StructuralEquation e;
      e.node = node;
      if (entry.contains("args"))
        e.args = entry["args"].get<std::vector<std::string>>();
      if (entry.contains("exogenous"))
        e.exogenous = entry["exogenous"].get<std::string>();
      e.table = detail::field(entry, "table").get<std::vector<int>>();
      eqs.push_back(std::move(e));
    }
    const Json& exo = detail::field(j, "exogenous");
    std::vector<Variable> exo_scope;
    std::map<std::string, Variable> by_id;
    for (const Variable& v : vars) by_id.emplace(v.id, v);
    for (const Json& name : detail::field(exo, "vars")) {
      auto it = by_id.find(name.get<std::string>());
      if (it == by_id.end())
        throw ModelError("exogenous variable " + name.get<std::string>() +
                         " not declared");
      exo_scope.push_back(it->second);
    }
    std::vector<double> dist =
        detail::field(exo, "dist").get<std::vector<double>>();
    Distribution exo_dist{Factor(std::move(exo_scope), std::move(dist))};
    out.scm = Scm(std::move(vars), std::move(eqs), std::move(exo_dist),
                  detail::parse_name_set(j, "shared"), ignorable);
  } else {
    throw ModelError("unknown model type '" + type + "'");
  }
  return out;
}

inline ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ModelError("model file " + path + " is not valid JSON: " +
                     e.what());
  }
  return load_model(j);
}

namespace detail {

// CPT entry in file layout: parents lexicographic, node fastest.
inline Json cpt_to_json(const Dag& g, const std::string& node,
                        const Factor& observational) {
  Json entry;
  std::vector<Variable> order;
  for (const Variable& v : observational.scope())
    if (v.id != node) order.push_back(v);
  Json parents = Json::array();
  for (const Variable& v : order) parents.push_back(v.id);
  entry["parents"] = std::move(parents);
  order.push_back(g.node(node));
  std::vector<double> table;
  table.reserve(observational.size());
  Odometer od(order);
  do {
    Assignment a;
    for (std::size_t k = 0; k < order.size(); ++k)
      a[order[k].id] = od.digits()[k];
    table.push_back(observational.at(a));
  } while (od.advance());
  entry["table"] = std::move(table);
  return entry;
}

}  // namespace detail

// Serialize as type "cbn": stochastic skeleton, intervenable targets, and
// observational CPTs (regime branches are reconstructed on load).
inline Json to_json(const Cbn& m) {
  Json j;
  j["version"] = 1;
  j["type"] = "cbn";
  Json vars = Json::array();
  for (const Variable& v : m.dag().nodes())
    if (v.kind == VarKind::stochastic)
      vars.push_back({{"name", v.id}, {"card", v.card}});
  j["variables"] = std::move(vars);
  Json edges = Json::array();
  for (const Edge& e : m.dag().edges()) {
    if (m.graph().is_regime(e.from)) continue;
    edges.push_back({{"from", e.from},
                     {"to", e.to},
                     {"style", e.style == EdgeStyle::dashed ? "dashed"
                                                            : "solid"}});
  }
  j["edges"] = std::move(edges);
  Json regimes = Json::array();
  for (const auto& [fid, target] : m.graph().regime_targets())
    regimes.push_back(target);
  j["regime_nodes"] = std::move(regimes);
  Json cpts;
  Assignment idle;
  for (const auto& [fid, target] : m.graph().regime_targets())
    idle[fid] = idle_state(m.dag().node(fid));
  for (const auto& id : m.stochastic_nodes())
    cpts[id] = detail::cpt_to_json(m.dag(), id, m.cpt(id).condition(idle));
  j["cpts"] = std::move(cpts);
  return j;
}

inline Json to_json(const StCm& m) {
  Json j;
  j["version"] = 1;
  j["type"] = "stcm";
  Json vars = Json::array();
  for (const Variable& v : m.graph().nodes())
    vars.push_back({{"name", v.id}, {"card", v.card}});
  j["variables"] = std::move(vars);
  Json edges = Json::array();
  for (const Edge& e : m.graph().edges())
    edges.push_back({{"from", e.from}, {"to", e.to}});
  j["edges"] = std::move(edges);
  Json cpts;
  for (const auto& [id, f] : m.cpts())
    cpts[id] = detail::cpt_to_json(m.graph(), id, f);
  j["cpts"] = std::move(cpts);
  j["exogenous"] = Json(m.exogenous());
  j["shared"] = Json(m.shared());
  j["ignorable"] = m.ignorable();
  return j;
}

inline Json to_json(const Scm& m) {
  Json j;
  j["version"] = 1;
  j["type"] = "scm";
  Json vars = Json::array();
  for (const Variable& v : m.variables())
    vars.push_back({{"name", v.id}, {"card", v.card}});
  j["variables"] = std::move(vars);
  Json eqs;
  for (const Variable& v : m.variables()) {
    if (!m.is_endogenous(v.id)) continue;
    const StructuralEquation& e = m.equation(v.id);
    Json entry;
    entry["args"] = e.args;
    if (e.exogenous) entry["exogenous"] = *e.exogenous;
    entry["table"] = e.table;
    eqs[v.id] = std::move(entry);
  }
  j["equations"] = std::move(eqs);
  Json exo;
  Json names = Json::array();
  for (const Variable& v : m.exogenous_dist().scope()) names.push_back(v.id);
  exo["vars"] = std::move(names);
  exo["dist"] = m.exogenous_dist().factor().values();
  j["exogenous"] = std::move(exo);
  j["shared"] = Json(m.shared());
  j["ignorable"] = m.ignorable();
  return j;
}

// ---------------------------------------------------------------------------
// Data files

inline Dataset read_csv(std::istream& in) {
  Dataset out;
  std::string line;
  if (!std::getline(in, line)) throw ModelError("data file is empty");
  std::size_t count_col = static_cast<std::size_t>(-1);
  {
    std::stringstream header(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(header, cell, ',')) {
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r'))
        cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      if (cell.empty()) throw ModelError("empty column name in header");
      if (cell == "count") {
        if (count_col != static_cast<std::size_t>(-1))
          throw ModelError("duplicate count column");
        count_col = i;
      } else {
        out.columns.push_back(cell);
      }
      ++i;
    }
  }
  std::size_t width = out.columns.size() +
                      (count_col == static_cast<std::size_t>(-1) ? 0 : 1);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<int> values;
    double count = 1.0;
    std::size_t i = 0;
    while (std::getline(row, cell, ',')) {
      long long v = 0;
      try {
        std::size_t used = 0;
        v = std::stoll(cell, &used);
        while (used < cell.size() &&
               (cell[used] == ' ' || cell[used] == '\r'))
          ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ModelError("line " + std::to_string(line_no) +
                         ": '" + cell + "' is not an integer");
      }
      if (v < 0)
        throw ModelError("line " + std::to_string(line_no) +
                         ": negative value");
      if (i == count_col)
        count = static_cast<double>(v);
      else
        values.push_back(static_cast<int>(v));
      ++i;
    }
    if (i != width)
      throw ModelError("line " + std::to_string(line_no) + " has " +
                       std::to_string(i) + " cells, expected " +
                       std::to_string(width));
    out.rows.push_back(std::move(values));
    if (count_col != static_cast<std::size_t>(-1)) out.counts.push_back(count);
  }
  return out;
}

inline Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open data file " + path);
  return read_csv(in);
}

inline void write_csv(std::ostream& out, const Dataset& d) {
  for (std::size_t i = 0; i < d.columns.size(); ++i) {
    if (i) out << ',';
    out << d.columns[i];
  }
  bool with_counts = !d.counts.empty();
  if (with_counts) out << ",count";
  out << '\n';
  for (std::size_t r = 0; r < d.rows.size(); ++r) {
    for (std::size_t i = 0; i < d.rows[r].size(); ++i) {
      if (i) out << ',';
      out << d.rows[r][i];
    }
    if (with_counts) out << ',' << d.counts[r];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Plug-in estimation from counted data

namespace detail {

inline std::size_t column_of(const Dataset& d, const std::string& name) {
  for (std::size_t i = 0; i < d.columns.size(); ++i)
    if (d.columns[i] == name) return i;
  throw ModelError("data file has no column " + name);
}

inline double row_count(const Dataset& d, std::size_t r) {
  return d.counts.empty() ? 1.0 : d.counts[r];
}

inline void check_binary_column(const Dataset& d, std::size_t col,
                                const std::string& name) {
  for (const auto& row : d.rows)
    if (row[col] < 0 || row[col] > 1)
      throw ModelError("column " + name + " must be binary (0/1)");
}

}  // namespace detail

// Smoothed contingency table over (X, Y); alpha = 0 is the plain plug-in.
inline Margins margins_from_data(const Dataset& d, const std::string& x,
                                 const std::string& y, double alpha = 0.0) {
  std::size_t cx = detail::column_of(d, x), cy = detail::column_of(d, y);
  detail::check_binary_column(d, cx, x);
  detail::check_binary_column(d, cy, y);
  double n[2][2] = {{alpha, alpha}, {alpha, alpha}};
  for (std::size_t r = 0; r < d.rows.size(); ++r)
    n[d.rows[r][cx]][d.rows[r][cy]] += detail::row_count(d, r);
  double n1 = n[1][0] + n[1][1], n0 = n[0][0] + n[0][1];
  if (n1 <= 0.0)
    throw PositivityViolationError("no exposed observations (X=1)");
  if (n0 <= 0.0)
    throw PositivityViolationError("no unexposed observations (X=0)");
  Margins m;
  m.p_y1_x1 = n[1][1] / n1;
  m.p_y1_x0 = n[0][1] / n0;
  m.p_x1 = n1 / (n0 + n1);
  return m;
}

// Strata from the smoothed (S, X, Y) table; stratum levels are 0..max(S).
inline StratifiedData strata_from_data(const Dataset& d, const std::string& s,
                                       const std::string& x,
                                       const std::string& y,
                                       double alpha = 0.0) {
  std::size_t cs = detail::column_of(d, s);
  std::size_t cx = detail::column_of(d, x), cy = detail::column_of(d, y);
  detail::check_binary_column(d, cx, x);
  detail::check_binary_column(d, cy, y);
  int levels = 0;
  for (const auto& row : d.rows) levels = std::max(levels, row[cs] + 1);
  if (levels < 1) throw ModelError("stratum column " + s + " has no data");

  std::vector<std::array<std::array<double, 2>, 2>> n(
      static_cast<std::size_t>(levels), {{{alpha, alpha}, {alpha, alpha}}});
  double total = 0.0;
  for (std::size_t r = 0; r < d.rows.size(); ++r) {
    double c = detail::row_count(d, r);
    n[static_cast<std::size_t>(d.rows[r][cs])][d.rows[r][cx]]
     [d.rows[r][cy]] += c;
  }
  for (const auto& cell : n)
    total += cell[0][0] + cell[0][1] + cell[1][0] + cell[1][1];
  if (total <= 0.0) throw ModelError("data file has no observations");

  StratifiedData out;
  for (const auto& cell : n) {
    double ns = cell[0][0] + cell[0][1] + cell[1][0] + cell[1][1];
    double nx1 = cell[1][0] + cell[1][1], nx0 = cell[0][0] + cell[0][1];
    Stratum row;
    row.p_s = ns / total;
    if (ns > 0.0) {
      row.p_x1_s = nx1 / ns;
      if (nx1 > 0.0) row.p_y1_x1_s = cell[1][1] / nx1;
      if (nx0 <= 0.0 && ns > 0.0)
        throw PositivityViolationError(
            "a stratum of " + s + " has no unexposed observations");
      row.p_y1_x0_s = cell[0][1] / nx0;
    }
    out.strata.push_back(row);
  }
  return out;
}

// Two-stage tables for the mediator bounds: (X, M) and (M, Y).
inline MediatorData mediator_from_data(const Dataset& d, const std::string& x,
                                       const std::string& m,
                                       const std::string& y,
                                       double alpha = 0.0) {
  std::size_t cx = detail::column_of(d, x);
  std::size_t cm = detail::column_of(d, m), cy = detail::column_of(d, y);
  detail::check_binary_column(d, cx, x);
  detail::check_binary_column(d, cm, m);
  detail::check_binary_column(d, cy, y);
  double nxm[2][2] = {{alpha, alpha}, {alpha, alpha}};
  double nmy[2][2] = {{alpha, alpha}, {alpha, alpha}};
  for (std::size_t r = 0; r < d.rows.size(); ++r) {
    double c = detail::row_count(d, r);
    nxm[d.rows[r][cx]][d.rows[r][cm]] += c;
    nmy[d.rows[r][cm]][d.rows[r][cy]] += c;
  }
  MediatorData out;
  for (int v = 0; v < 2; ++v) {
    double nx = nxm[v][0] + nxm[v][1];
    if (nx <= 0.0)
      throw PositivityViolationError("no observations with " + x + "=" +
                                     std::to_string(v));
    double nm = nmy[v][0] + nmy[v][1];
    if (nm <= 0.0)
      throw PositivityViolationError("no observations with " + m + "=" +
                                     std::to_string(v));
    (v == 0 ? out.p_m1_x0 : out.p_m1_x1) = nxm[v][1] / nx;
    (v == 0 ? out.p_y1_m0 : out.p_y1_m1) = nmy[v][1] / nm;
  }
  return out;
}

inline IvData iv_from_data(const Dataset& d, const std::string& z,
                           const std::string& x, const std::string& y,
                           double alpha = 0.0) {
  std::size_t cz = detail::column_of(d, z);
  std::size_t cx = detail::column_of(d, x), cy = detail::column_of(d, y);
  detail::check_binary_column(d, cz, z);
  detail::check_binary_column(d, cx, x);
  detail::check_binary_column(d, cy, y);
  std::array<std::array<std::array<double, 2>, 2>, 2> n{};
  for (std::size_t r = 0; r < d.rows.size(); ++r)
    n[d.rows[r][cz]][d.rows[r][cx]][d.rows[r][cy]] +=
        detail::row_count(d, r);
  return IvData::from_counts(n, alpha);
}

}  // namespace coelab
