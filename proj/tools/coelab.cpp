// Command-line front end.  JSON results on stdout, diagnostics on stderr.
// Exit codes: 0 ok, 2 bad input (parse, schema, model invariant), 3 the
// requested quantity is infeasible or undefined on this data.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coelab/coelab.hpp"

namespace {

using coelab::Json;

// "X=1,Y=0" -> {{"X",1},{"Y",0}}
coelab::Assignment parse_assignment(const std::string& text) {
  coelab::Assignment out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw coelab::ModelError("expected NAME=VALUE, got '" + item + "'");
    std::string name = item.substr(0, eq);
    std::string value = item.substr(eq + 1);
    try {
      std::size_t used = 0;
      int v = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      if (out.count(name))
        throw coelab::ModelError("duplicate assignment for " + name);
      out[name] = v;
    } catch (const coelab::Error&) {
      throw;
    } catch (const std::exception&) {
      throw coelab::ModelError("'" + value + "' is not a state index");
    }
  }
  return out;
}

coelab::VarSet parse_name_list(const std::string& text) {
  coelab::VarSet out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

bool looks_like_json(const std::string& path) {
  return path.size() >= 5 && path.substr(path.size() - 5) == ".json";
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw coelab::ModelError("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw coelab::ModelError(path + " is not valid JSON: " + e.what());
  }
  return j;
}

void emit(const Json& j) { std::cout << j.dump(2) << "\n"; }

Json interval_to_json(const coelab::BoundsInterval& b) {
  Json out;
  out["lower"] = b.lower;
  out["upper"] = b.upper;
  out["method"] = coelab::to_string(b.method);
  Json diag = Json::object();
  for (const auto& [k, v] : b.diagnostics) diag[k] = v;
  out["diagnostics"] = std::move(diag);
  if (!b.per_stratum.empty()) {
    Json rows = Json::array();
    for (const auto& s : b.per_stratum) {
      Json row;
      row["index"] = s.index;
      row["p_y1_x1"] = s.p_y1_x1;
      row["p_y1_x0"] = s.p_y1_x0;
      row["weight"] = s.weight;
      row["rr"] = s.rr;
      row["lower"] = s.lower;
      row["upper"] = s.upper;
      rows.push_back(std::move(row));
    }
    out["per_stratum"] = std::move(rows);
  }
  return out;
}

coelab::Margins margins_from_json(const Json& j) {
  coelab::Margins m;
  if (!j.contains("p_y1_x1") || !j.contains("p_y1_x0"))
    throw coelab::ModelError(
        "margins file needs p_y1_x1 and p_y1_x0 (optionally p_x1, "
        "p_y1_do_x0)");
  m.p_y1_x1 = j["p_y1_x1"].get<double>();
  m.p_y1_x0 = j["p_y1_x0"].get<double>();
  if (j.contains("p_x1")) m.p_x1 = j["p_x1"].get<double>();
  if (j.contains("p_y1_do_x0")) m.p_y1_do_x0 = j["p_y1_do_x0"].get<double>();
  m.validate();
  return m;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("COE_LAB_SEED");
  if (!env || !*env) return 0;
  try {
    std::size_t used = 0;
    std::string text(env);
    unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw coelab::ModelError("COE_LAB_SEED is not an unsigned integer");
  }
}

struct ModelValidateOpts {
  std::string model_path;

  void run() const {
    coelab::ModelFile mf = coelab::load_model_file(model_path);
    Json out;
    out["ok"] = true;
    coelab::Cbn m = mf.as_cbn();
    switch (mf.type) {
      case coelab::ModelFile::Type::cbn: out["type"] = "cbn"; break;
      case coelab::ModelFile::Type::scm: out["type"] = "scm"; break;
      case coelab::ModelFile::Type::stcm: out["type"] = "stcm"; break;
    }
    out["variables"] = static_cast<int>(m.stochastic_nodes().size());
    int solid = 0;
    for (const coelab::Edge& e : m.dag().edges())
      if (!m.graph().is_regime(e.from)) ++solid;
    out["edges"] = solid;
    Json regimes = Json::array();
    for (const auto& [fid, target] : m.graph().regime_targets())
      regimes.push_back(target);
    out["regime_nodes"] = std::move(regimes);
    emit(out);
  }
};

struct QueryOpts {
  std::string model_path;
  std::vector<std::string> targets;
  std::string evidence_text, do_text;

  void run() const {
    coelab::ModelFile mf = coelab::load_model_file(model_path);
    coelab::Cbn m = mf.as_cbn();
    coelab::Assignment dos = parse_assignment(do_text);
    if (!dos.empty()) m = coelab::intervene(m, dos);
    coelab::Query q;
    for (const auto& t : targets) q.targets.insert(t);
    q.evidence = parse_assignment(evidence_text);
    coelab::Distribution d = coelab::joint_query(m, q);

    Json out;
    Json names = Json::array();
    for (const coelab::Variable& v : d.scope()) names.push_back(v.id);
    out["targets"] = std::move(names);
    Json entries = Json::array();
    coelab::detail::Odometer od(d.scope());
    do {
      Json assignment = Json::object();
      coelab::Assignment a;
      for (std::size_t k = 0; k < d.scope().size(); ++k) {
        a[d.scope()[k].id] = od.digits()[k];
        assignment[d.scope()[k].id] = od.digits()[k];
      }
      entries.push_back(
          Json{{"assignment", std::move(assignment)}, {"p", d.prob(a)}});
    } while (od.advance());
    out["entries"] = std::move(entries);
    emit(out);
  }
};

struct PcExactOpts {
  std::string model_path;
  std::string factual_text, cf_text, outcome;

  void run() const {
    coelab::ModelFile mf = coelab::load_model_file(model_path);
    coelab::StCm s = mf.as_stcm();
    std::optional<std::string> out_var;
    if (!outcome.empty()) out_var = outcome;
    double pc = coelab::pc_exact(s, parse_assignment(factual_text),
                                 parse_assignment(cf_text), out_var);
    Json out;
    out["pc"] = pc;
    Json twins = Json::array();
    for (const coelab::Variable& v : s.graph().nodes())
      if (s.is_endogenous(v.id) && !s.shared().count(v.id))
        twins.push_back(coelab::mirror_id(v.id));
    out["twin_nodes"] = std::move(twins);
    emit(out);
  }
};

struct PcBoundsOpts {
  std::string input_path;
  std::string x = "X", y = "Y";
  std::string covariate, mediator, experimental_path;
  double alpha = 0.0;

  void run() const {
    int regimes = (!covariate.empty()) + (!mediator.empty()) +
                  (!experimental_path.empty());
    if (regimes > 1)
      throw coelab::ModelError(
          "choose one of --covariate, --mediator, --experimental");

    bool json_input = looks_like_json(input_path);
    std::optional<coelab::Dataset> data;
    std::optional<coelab::Margins> margins;
    if (json_input) {
      margins = margins_from_json(read_json_file(input_path));
    } else {
      data = coelab::read_csv_file(input_path);
    }

    coelab::BoundsInterval b;
    if (!covariate.empty()) {
      if (!data)
        throw coelab::ModelError("--covariate needs CSV data, not margins");
      b = coelab::pc_bounds_covariate(
          coelab::strata_from_data(*data, covariate, x, y, alpha));
    } else if (!mediator.empty()) {
      if (!data)
        throw coelab::ModelError("--mediator needs CSV data, not margins");
      b = coelab::pc_bounds_mediator(
          coelab::mediator_from_data(*data, x, mediator, y, alpha));
    } else {
      coelab::Margins m =
          margins ? *margins : coelab::margins_from_data(*data, x, y, alpha);
      if (!experimental_path.empty()) {
        Json exp = read_json_file(experimental_path);
        if (!exp.contains("p_y1_do_x0"))
          throw coelab::ModelError(
              "experimental file needs p_y1_do_x0 = P(Y=1 | X set to 0)");
        m.p_y1_do_x0 = exp["p_y1_do_x0"].get<double>();
        b = coelab::pc_bounds_tian_pearl(m);
      } else if (m.p_y1_do_x0) {
        b = coelab::pc_bounds_tian_pearl(m);
      } else {
        b = coelab::pc_bounds_basic(m);
      }
    }
    emit(interval_to_json(b));
  }
};

struct IvOpts {
  std::string data_path;
  std::string z = "Z", x = "X", y = "Y";
  double alpha = 0.0;
  double weak_tol = 0.01;  // counted data, not exact probabilities
  bool monotone = false, availability = false;

  coelab::IvData load() const {
    return coelab::iv_from_data(coelab::read_csv_file(data_path), z, x, y,
                                alpha);
  }

  void run_wald() const {
    coelab::IvData d = load();
    Json out;
    out["wald"] = coelab::wald_ratio(d, weak_tol);
    out["ace_zx"] = d.ace_zx();
    out["ace_zy"] = d.ace_zy();
    emit(out);
  }

  void run_late() const {
    if (monotone == availability)
      throw coelab::ModelError(
          "LATE needs exactly one of --monotone or --availability");
    coelab::IvData d = load();
    auto assumption = monotone ? coelab::IvAssumption::monotone
                               : coelab::IvAssumption::availability;
    Json out;
    out["late"] = coelab::late(d, assumption, weak_tol);
    out["assumption"] = monotone ? "monotone" : "availability";
    out["ace_zx"] = d.ace_zx();
    out["ace_zy"] = d.ace_zy();
    emit(out);
  }

  void run_ace_bounds() const {
    coelab::IvData d = load();
    Json out = interval_to_json(coelab::ace_bounds_lp(d, monotone));
    out["monotone"] = monotone;
    emit(out);
  }
};

struct DsepOpts {
  std::string model_path;
  std::string a, b, given;

  void run() const {
    coelab::ModelFile mf = coelab::load_model_file(model_path);
    coelab::Cbn m = mf.as_cbn();
    bool sep = coelab::d_separated(m.dag(), parse_name_list(a),
                                   parse_name_list(b), parse_name_list(given));
    std::cout << (sep ? "true" : "false") << "\n";
  }
};

struct SimulateOpts {
  std::string model_path, out_path;
  std::int64_t n = 0;
  std::optional<std::uint64_t> seed;

  void run() const {
    coelab::ModelFile mf = coelab::load_model_file(model_path);
    if (n < 0) throw coelab::ModelError("sample count must be nonnegative");
    std::uint64_t s = seed ? *seed : default_seed();
    coelab::Dataset d =
        coelab::sample(mf.as_cbn(), static_cast<std::size_t>(n), s);
    std::ofstream out(out_path);
    if (!out) throw coelab::ModelError("cannot write " + out_path);
    coelab::write_csv(out, d);
    out.flush();
    if (!out) throw coelab::ModelError("write failed for " + out_path);
    Json summary;
    summary["rows"] = n;
    summary["seed"] = s;
    summary["columns"] = d.columns;
    summary["out"] = out_path;
    emit(summary);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal models: queries, counterfactuals, and bounds"};
  app.require_subcommand(1);

  auto model_validate = std::make_shared<ModelValidateOpts>();
  CLI::App* model = app.add_subcommand("model", "model file operations");
  model->require_subcommand(1);
  CLI::App* validate =
      model->add_subcommand("validate", "check a model file and summarize");
  validate->add_option("model", model_validate->model_path, "model JSON file")
      ->required();
  validate->callback([model_validate] { model_validate->run(); });

  auto query = std::make_shared<QueryOpts>();
  CLI::App* q = app.add_subcommand(
      "query", "posterior or interventional distribution over targets");
  q->add_option("model", query->model_path, "model JSON file")->required();
  q->add_option("--target", query->targets, "target variable (repeatable)")
      ->required();
  q->add_option("--evidence", query->evidence_text,
                "observed values, NAME=V,NAME=V");
  q->add_option("--do", query->do_text, "interventions, NAME=V,NAME=V");
  q->callback([query] { query->run(); });

  CLI::App* pc = app.add_subcommand("pc", "probability of causation");
  pc->require_subcommand(1);

  auto pc_exact = std::make_shared<PcExactOpts>();
  CLI::App* pce = pc->add_subcommand(
      "exact", "twin-network counterfactual from a structural model");
  pce->add_option("model", pc_exact->model_path, "model JSON file")
      ->required();
  pce->add_option("--factual", pc_exact->factual_text,
                  "observed event, NAME=V,NAME=V")
      ->required();
  pce->add_option("--counterfactual", pc_exact->cf_text,
                  "counterfactual setting, NAME=V")
      ->required();
  pce->add_option("--outcome", pc_exact->outcome,
                  "outcome variable (default: inferred from --factual)");
  pce->callback([pc_exact] { pc_exact->run(); });

  auto pc_bounds = std::make_shared<PcBoundsOpts>();
  CLI::App* pcb =
      pc->add_subcommand("bounds", "interval bounds from data or margins");
  pcb->add_option("input", pc_bounds->input_path,
                  "CSV data or margins .json file")
      ->required();
  pcb->add_option("--x", pc_bounds->x, "exposure column (default X)");
  pcb->add_option("--y", pc_bounds->y, "outcome column (default Y)");
  pcb->add_option("--covariate", pc_bounds->covariate,
                  "stratify on this column");
  pcb->add_option("--mediator", pc_bounds->mediator,
                  "complete mediator column");
  pcb->add_option("--experimental", pc_bounds->experimental_path,
                  "JSON file with p_y1_do_x0 from experimental data");
  pcb->add_option("--smooth", pc_bounds->alpha,
                  "add-alpha smoothing for counts (default 0)");
  pcb->callback([pc_bounds] { pc_bounds->run(); });

  CLI::App* iv = app.add_subcommand("iv", "instrumental-variable estimands");
  iv->require_subcommand(1);
  auto add_iv_common = [](CLI::App* sub, const std::shared_ptr<IvOpts>& o) {
    sub->add_option("data", o->data_path, "CSV data file")->required();
    sub->add_option("--z", o->z, "instrument column (default Z)");
    sub->add_option("--x", o->x, "exposure column (default X)");
    sub->add_option("--y", o->y, "outcome column (default Y)");
    sub->add_option("--smooth", o->alpha,
                    "add-alpha smoothing for counts (default 0)");
  };

  auto iv_wald = std::make_shared<IvOpts>();
  CLI::App* wald = iv->add_subcommand("wald", "Wald ratio estimate");
  add_iv_common(wald, iv_wald);
  wald->add_option("--weak-tol", iv_wald->weak_tol,
                   "minimum |effect of Z on X| (default 0.01)");
  wald->callback([iv_wald] { iv_wald->run_wald(); });

  auto iv_late = std::make_shared<IvOpts>();
  CLI::App* late =
      iv->add_subcommand("late", "local average treatment effect");
  add_iv_common(late, iv_late);
  late->add_flag("--monotone", iv_late->monotone, "assume no defiers");
  late->add_flag("--availability", iv_late->availability,
                 "assume treatment unavailable when Z=0");
  late->add_option("--weak-tol", iv_late->weak_tol,
                   "minimum |effect of Z on X| (default 0.01)");
  late->callback([iv_late] { iv_late->run_late(); });

  auto iv_ace = std::make_shared<IvOpts>();
  CLI::App* ace = iv->add_subcommand(
      "ace-bounds", "bounds on the average causal effect of X on Y");
  add_iv_common(ace, iv_ace);
  ace->add_flag("--monotone", iv_ace->monotone, "assume no defiers");
  ace->callback([iv_ace] { iv_ace->run_ace_bounds(); });

  auto dsep = std::make_shared<DsepOpts>();
  CLI::App* ds = app.add_subcommand("dsep", "d-separation test");
  ds->add_option("model", dsep->model_path, "model JSON file")->required();
  ds->add_option("--a", dsep->a, "first set, comma-separated")->required();
  ds->add_option("--b", dsep->b, "second set, comma-separated")->required();
  ds->add_option("--given", dsep->given, "conditioning set, comma-separated");
  ds->callback([dsep] { dsep->run(); });

  auto simulate = std::make_shared<SimulateOpts>();
  CLI::App* sim =
      app.add_subcommand("simulate", "draw samples into a CSV file");
  sim->add_option("model", simulate->model_path, "model JSON file")
      ->required();
  sim->add_option("-n,--rows", simulate->n, "number of rows")->required();
  sim->add_option("--seed", simulate->seed,
                  "RNG seed (default: COE_LAB_SEED or 0)");
  sim->add_option("-o,--out", simulate->out_path, "output CSV path")
      ->required();
  sim->callback([simulate] { simulate->run(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const coelab::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    emit(Json{{"error", e.what()}});
    return 2;
  } catch (const coelab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    emit(Json{{"error", e.what()}});
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    emit(Json{{"error", e.what()}});
    return 2;
  }
  return 0;
}
