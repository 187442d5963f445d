#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "coelab/io.hpp"

using namespace coelab;
using Catch::Matchers::WithinAbs;
using nlohmann::json;

namespace {

Cbn confounded_fixture() {
  Variable u{"U", 2}, x{"X", 2}, y{"Y", 2};
  Dag g({u, x, y}, {{"U", "X"}, {"U", "Y"}, {"X", "Y"}});
  std::map<std::string, Factor> cpts;
  cpts.emplace("U", Factor({u}, {0.7, 0.3}));
  cpts.emplace("X", Factor({u, x}, {0.8, 0.2, 0.3, 0.7}));
  cpts.emplace("Y", Factor({u, x, y},
                           {0.9, 0.1, 0.4, 0.6, 0.5, 0.5, 0.1, 0.9}));
  return Cbn::from_observational(std::move(g), std::move(cpts), {"X"});
}

json minimal_cbn_json() {
  return json{{"version", 1},
              {"type", "cbn"},
              {"variables", json::array({{{"name", "X"}, {"card", 2}},
                                         {{"name", "Y"}, {"card", 2}}})},
              {"edges", json::array({json::array({"X", "Y"})})},
              {"cpts",
               {{"X", {{"parents", json::array()},
                       {"table", {0.4, 0.6}}}},
                {"Y", {{"parents", {"X"}},
                       {"table", {0.9, 0.1, 0.2, 0.8}}}}}}};
}

std::string model_path(const std::string& name) {
  return std::string(COELAB_MODELS_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("the example model files load and answer", "[io]") {
  ModelFile iv = load_model_file(model_path("iv_binary.json"));
  REQUIRE(iv.type == ModelFile::Type::cbn);
  Cbn net = iv.as_cbn();
  Query q;
  q.targets = {"Z"};
  CHECK_THAT(joint_query(net, q).prob({{"Z", 1}}), WithinAbs(0.5, 1e-9));
  CHECK(net.graph().regime_of("X").has_value());
  CHECK_THROWS_AS(iv.as_stcm(), ModelError);

  ModelFile obs = load_model_file(model_path("iv_binary_observational.json"));
  Cbn onet = obs.as_cbn();
  CHECK_FALSE(onet.graph().regime_of("X").has_value());
  // Same observational law as the augmented variant.
  Query qy;
  qy.targets = {"Y"};
  qy.evidence = {{"X", 1}};
  CHECK_THAT(joint_query(onet, qy).prob({{"Y", 1}}),
             WithinAbs(joint_query(net, qy).prob({{"Y", 1}}), 1e-9));

  ModelFile conf = load_model_file(model_path("confounded_exposure.json"));
  REQUIRE(conf.type == ModelFile::Type::stcm);
  CHECK_THAT(pc_exact(conf.as_stcm(), {{"X", 1}, {"Y", 1}}, {{"X", 0}}),
             WithinAbs(81.0 / 130.0, 1e-9));

  ModelFile structural = load_model_file(model_path("iv_structural.json"));
  REQUIRE(structural.type == ModelFile::Type::scm);
  REQUIRE(structural.scm.has_value());
  const Scm& s = *structural.scm;
  CHECK_THAT(pc_exact(s, {{"X", 1}, {"Y", 1}}, {{"X", 0}}),
             WithinAbs(7.0 / 13.0, 1e-9));
  PrincipalStrata strata = strata_from_scm(s, "Z", "X", "Y");
  CHECK_THAT(strata.ace_xy(), WithinAbs(0.7, 1e-9));
  CHECK_THAT(strata.late(), WithinAbs(1.0, 1e-9));

  CHECK_THROWS_AS(load_model_file(model_path("does_not_exist.json")), ModelError);
}

TEST_CASE("network round trip through json", "[io]") {
  Cbn m = confounded_fixture();
  json j = to_json(m);
  // The intervenable node is listed, and its incoming arrows are dashed.
  CHECK(j.at("regime_nodes") == json::array({"X"}));
  bool found_dashed = false;
  for (const auto& e : j.at("edges"))
    if (e.at("from") == "U" && e.at("to") == "X")
      found_dashed = e.at("style") == "dashed";
  CHECK(found_dashed);

  Cbn back = load_model(j).as_cbn();
  Query q;
  q.targets = {"Y"};
  q.evidence = {{"X", 1}};
  CHECK_THAT(joint_query(back, q).prob({{"Y", 1}}),
             WithinAbs(joint_query(m, q).prob({{"Y", 1}}), 1e-12));
  CHECK_THAT(interventional_mean(intervene(back, {{"X", 1}}), "X", "Y", 1),
             WithinAbs(0.69, 1e-12));
}

TEST_CASE("structural models round trip through json", "[io]") {
  Variable u{"U", 2}, x{"X", 2}, y{"Y", 2};
  Dag g({u, x, y}, {{"U", "X"}, {"U", "Y"}, {"X", "Y"}});
  std::map<std::string, Factor> cpts;
  cpts.emplace("U", Factor({u}, {0.7, 0.3}));
  cpts.emplace("X", Factor({u, x}, {0.8, 0.2, 0.3, 0.7}));
  cpts.emplace("Y", Factor({u, x, y},
                           {0.9, 0.1, 0.4, 0.6, 0.5, 0.5, 0.1, 0.9}));
  StCm st(std::move(g), std::move(cpts), {"U"}, {"U"}, false);
  StCm st2 = load_model(to_json(st)).as_stcm();
  CHECK(st2.shared() == VarSet{"U"});
  CHECK_FALSE(st2.ignorable());
  CHECK_THAT(pc_exact(st2, {{"X", 1}, {"Y", 1}}, {{"X", 0}}),
             WithinAbs(pc_exact(st, {{"X", 1}, {"Y", 1}}, {{"X", 0}}),
                       1e-12));

  ModelFile structural = load_model_file(model_path("iv_structural.json"));
  json j = to_json(*structural.scm);
  ModelFile back = load_model(j);
  REQUIRE(back.scm.has_value());
  CHECK_THAT(pc_exact(*back.scm, {{"X", 1}, {"Y", 1}}, {{"X", 0}}),
             WithinAbs(7.0 / 13.0, 1e-12));
  Assignment a = solve(*back.scm, {{"U", 1}, {"UZ", 0}});
  CHECK(a.at("X") == 1);
  CHECK(a.at("Y") == 1);
}

TEST_CASE("model schema violations are reported", "[io]") {
  json good = minimal_cbn_json();
  CHECK_NOTHROW(load_model(good));

  json j = good;
  j.erase("version");
  CHECK_THROWS_AS(load_model(j), ModelError);
  j = good;
  j["version"] = 2;
  CHECK_THROWS_AS(load_model(j), ModelError);
  j = good;
  j["type"] = "bayes";
  CHECK_THROWS_AS(load_model(j), ModelError);
  j = good;
  j.erase("variables");
  CHECK_THROWS_AS(load_model(j), ModelError);
  j = good;
  j["edges"] = json::array({json::array({"X", "Y", "Z"})});
  CHECK_THROWS_AS(load_model(j), ModelError);
  j = good;
  j["edges"] = json::array({json::array({"X", "Q"})});
  CHECK_THROWS_AS(load_model(j), ModelError);
  j = good;
  j["cpts"]["Y"]["parents"] = json::array({"Q"});
  CHECK_THROWS_AS(load_model(j), ModelError);
  j = good;
  j["cpts"]["Y"]["table"] = {0.9, 0.1};
  CHECK_THROWS_AS(load_model(j), ModelError);
  j = good;
  j["regime_nodes"] = json::array({"Q"});
  CHECK_THROWS_AS(load_model(j), ModelError);
  j = good;
  j["cpts"].erase("Y");
  CHECK_THROWS_AS(load_model(j), ModelError);
}

TEST_CASE("csv parsing is forgiving about layout, strict about content",
          "[io]") {
  std::istringstream in(
      "x, count ,y\r\n"
      "0, 3, 1\n"
      "\n"
      " 1 ,2,0\r\n"
      "1,1,1\n");
  Dataset d = read_csv(in);
  CHECK(d.columns == std::vector<std::string>({"x", "y"}));
  REQUIRE(d.rows.size() == 3);
  CHECK(d.rows[0] == std::vector<int>({0, 1}));
  CHECK(d.rows[1] == std::vector<int>({1, 0}));
  REQUIRE(d.counts.size() == 3);
  CHECK_THAT(d.counts[0], WithinAbs(3.0, 0.0));
  CHECK_THAT(d.counts[1], WithinAbs(2.0, 0.0));

  std::istringstream plain("a,b\n0,1\n1,0\n");
  Dataset p = read_csv(plain);
  CHECK(p.counts.empty());
  CHECK(p.rows.size() == 2);

  std::istringstream dup("count,count\n1,1\n");
  CHECK_THROWS_AS(read_csv(dup), ModelError);
  std::istringstream ragged("a,b\n0\n");
  CHECK_THROWS_AS(read_csv(ragged), ModelError);
  std::istringstream junk("a,b\n0,frog\n");
  CHECK_THROWS_AS(read_csv(junk), ModelError);
  std::istringstream negative("a,b\n0,-1\n");
  CHECK_THROWS_AS(read_csv(negative), ModelError);
  std::istringstream nothing("");
  CHECK_THROWS_AS(read_csv(nothing), ModelError);

  std::ostringstream out;
  write_csv(out, d);
  std::istringstream back(out.str());
  Dataset d2 = read_csv(back);
  CHECK(d2.columns == d.columns);
  CHECK(d2.rows == d.rows);
  CHECK(d2.counts == d.counts);
}

TEST_CASE("margins are estimated from raw or weighted rows", "[io]") {
  // 40 observations: the late_counts fixture marginalized over z.
  std::istringstream in(
      "x,y,count\n"
      "0,0,14\n"
      "0,1,8\n"
      "1,0,6\n"
      "1,1,12\n");
  Dataset d = read_csv(in);
  Margins m = margins_from_data(d, "x", "y");
  CHECK_THAT(m.p_y1_x1, WithinAbs(12.0 / 18.0, 1e-12));
  CHECK_THAT(m.p_y1_x0, WithinAbs(8.0 / 22.0, 1e-12));
  REQUIRE(m.p_x1.has_value());
  CHECK_THAT(*m.p_x1, WithinAbs(18.0 / 40.0, 1e-12));

  // Smoothing pulls both arms toward one half.
  Margins sm = margins_from_data(d, "x", "y", 2.0);
  CHECK_THAT(sm.p_y1_x1, WithinAbs(14.0 / 22.0, 1e-12));
  CHECK_THAT(sm.p_y1_x0, WithinAbs(10.0 / 26.0, 1e-12));

  std::istringstream unexposed("x,y\n0,0\n0,1\n");
  Dataset u = read_csv(unexposed);
  CHECK_THROWS_AS(margins_from_data(u, "x", "y"), PositivityViolationError);
  CHECK_THROWS_AS(margins_from_data(d, "q", "y"), ModelError);

  std::istringstream wide("x,y\n0,2\n1,1\n");
  Dataset w = read_csv(wide);
  CHECK_THROWS_AS(margins_from_data(w, "x", "y"), ModelError);
}

TEST_CASE("stratified tables from data", "[io]") {
  std::istringstream in(
      "s,x,y,count\n"
      "0,0,0,8\n"
      "0,0,1,2\n"
      "0,1,0,2\n"
      "0,1,1,8\n"
      "1,0,0,5\n"
      "1,0,1,5\n"
      "1,1,0,5\n"
      "1,1,1,5\n");
  Dataset d = read_csv(in);
  StratifiedData sd = strata_from_data(d, "s", "x", "y");
  REQUIRE(sd.strata.size() == 2);
  CHECK_THAT(sd.strata[0].p_s, WithinAbs(0.5, 1e-12));
  CHECK_THAT(sd.strata[0].p_x1_s, WithinAbs(0.5, 1e-12));
  CHECK_THAT(sd.strata[0].p_y1_x1_s, WithinAbs(0.8, 1e-12));
  CHECK_THAT(sd.strata[0].p_y1_x0_s, WithinAbs(0.2, 1e-12));
  CHECK_THAT(sd.strata[1].p_y1_x1_s, WithinAbs(0.5, 1e-12));
  sd.validate();

  // A stratum with no unexposed rows cannot produce conditional rates.
  std::istringstream bad(
      "s,x,y\n"
      "0,0,0\n"
      "0,1,1\n"
      "1,1,1\n");
  Dataset b = read_csv(bad);
  CHECK_THROWS_AS(strata_from_data(b, "s", "x", "y"),
                  PositivityViolationError);
  // ... unless smoothing fills the empty cells.
  CHECK_NOTHROW(strata_from_data(b, "s", "x", "y", 1.0));
}

TEST_CASE("mediator and instrument tables from data", "[io]") {
  std::istringstream in(
      "x,m,y,count\n"
      "0,0,0,7\n"
      "0,0,1,3\n"
      "0,1,1,10\n"
      "1,0,0,5\n"
      "1,1,0,5\n"
      "1,1,1,10\n");
  Dataset d = read_csv(in);
  MediatorData md = mediator_from_data(d, "x", "m", "y");
  CHECK_THAT(md.p_m1_x0, WithinAbs(0.5, 1e-12));
  CHECK_THAT(md.p_m1_x1, WithinAbs(0.75, 1e-12));
  CHECK_THAT(md.p_y1_m0, WithinAbs(0.2, 1e-12));
  CHECK_THAT(md.p_y1_m1, WithinAbs(0.8, 1e-12));

  std::istringstream iv_text(
      "z,x,y,count\n"
      "0,0,0,11\n"
      "0,0,1,5\n"
      "0,1,0,2\n"
      "0,1,1,2\n"
      "1,0,0,3\n"
      "1,0,1,3\n"
      "1,1,0,4\n"
      "1,1,1,10\n");
  Dataset iv = read_csv(iv_text);
  IvData from_csv = iv_from_data(iv, "z", "x", "y");
  CHECK_THAT(from_csv.p_z1, WithinAbs(0.5, 1e-12));
  CHECK_THAT(from_csv.cond[0][0][0], WithinAbs(0.55, 1e-12));
  CHECK_THAT(wald_ratio(from_csv), WithinAbs(0.6, 1e-12));

  // The mediator table needs both mediator arms somewhere in the data.
  std::istringstream stuck(
      "x,m,y\n"
      "0,1,1\n"
      "1,1,0\n");
  Dataset s = read_csv(stuck);
  CHECK_THROWS_AS(mediator_from_data(s, "x", "m", "y"),
                  PositivityViolationError);
}
