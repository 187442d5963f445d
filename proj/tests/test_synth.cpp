#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "coelab/iv.hpp"
#include "coelab/synth.hpp"

using namespace coelab;
using Catch::Matchers::WithinAbs;

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

}  // namespace

TEST_CASE("every primitive draw is pinned to the engine spec", "[synth]") {
  // The generator contract, restated from scratch on a raw mt19937_64.
  std::mt19937_64 raw(42);
  Rng rng(42);
  for (int i = 0; i < 8; ++i) {
    double expected = static_cast<double>(raw() >> 11) * 0x1.0p-53;
    CHECK_THAT(rng.uniform01(), WithinAbs(expected, 0.0));
  }

  std::mt19937_64 raw2(7);
  Rng rng2(7);
  double u = static_cast<double>(raw2() >> 11) * 0x1.0p-53;
  CHECK_THAT(rng2.exponential(), WithinAbs(-std::log1p(-u), 0.0));

  std::mt19937_64 raw3(9);
  Rng rng3(9);
  double u1 = static_cast<double>(raw3() >> 11) * 0x1.0p-53;
  double u2 = static_cast<double>(raw3() >> 11) * 0x1.0p-53;
  double expected_normal = std::sqrt(-2.0 * std::log1p(-u1)) *
                           std::cos(2.0 * 3.141592653589793 * u2);
  CHECK_THAT(rng3.normal(), WithinAbs(expected_normal, 0.0));

  CHECK(Rng(5).next_u64() == std::mt19937_64(5)());
}

TEST_CASE("derived draws behave and validate", "[synth]") {
  Rng rng(123);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> w = rng.dirichlet(4);
    REQUIRE(w.size() == 4);
    double total = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK_THAT(total, WithinAbs(1.0, 1e-12));
  }
  CHECK_THAT(rng.dirichlet(1)[0], WithinAbs(1.0, 1e-12));

  // uniform_int stays inside the inclusive range and reaches both ends.
  bool saw_lo = false, saw_hi = false;
  for (int rep = 0; rep < 2000; ++rep) {
    int v = rng.uniform_int(-2, 3);
    REQUIRE(v >= -2);
    REQUIRE(v <= 3);
    saw_lo = saw_lo || v == -2;
    saw_hi = saw_hi || v == 3;
  }
  CHECK(saw_lo);
  CHECK(saw_hi);
  CHECK(rng.uniform_int(4, 4) == 4);
  CHECK_THROWS_AS(rng.uniform_int(2, 1), ModelError);

  // categorical matches its weights in the long run.
  std::vector<double> weights{1.0, 3.0, 0.0, 4.0};
  std::vector<int> hits(4, 0);
  for (int rep = 0; rep < 40000; ++rep) ++hits[rng.categorical(weights)];
  CHECK(hits[2] == 0);
  CHECK_THAT(hits[0] / 40000.0, WithinAbs(0.125, 0.01));
  CHECK_THAT(hits[1] / 40000.0, WithinAbs(0.375, 0.01));
  CHECK_THAT(hits[3] / 40000.0, WithinAbs(0.5, 0.01));
  CHECK_THROWS_AS(rng.categorical({0.5, -0.1}), ModelError);
  CHECK_THROWS_AS(rng.categorical({0.0, 0.0}), ModelError);

  // normal has roughly standard moments.
  double mean = 0.0, sq = 0.0;
  const int n = 40000;
  for (int rep = 0; rep < n; ++rep) {
    double v = rng.normal();
    mean += v;
    sq += v * v;
  }
  mean /= n;
  sq /= n;
  CHECK_THAT(mean, WithinAbs(0.0, 0.02));
  CHECK_THAT(sq - mean * mean, WithinAbs(1.0, 0.03));
}

TEST_CASE("ancestral sampling respects the model", "[synth]") {
  Cbn m = confounded_fixture();
  Dataset d = sample(m, 1000, 31);
  CHECK(d.columns == std::vector<std::string>({"U", "X", "Y"}));
  CHECK(d.rows.size() == 1000);
  CHECK(d.counts.empty());

  Dataset again = sample(m, 1000, 31);
  CHECK(d.rows == again.rows);
  Dataset other = sample(m, 1000, 32);
  CHECK(d.rows != other.rows);

  CHECK(sample(m, 0, 1).rows.empty());
  CHECK(sample(m, 1, 1).rows.size() == 1);

  // Long-run frequencies approach the joint law.
  Dataset big = sample(m, 100000, 7);
  Query q;
  q.targets = {"U", "X", "Y"};
  Distribution law = joint_query(m, q);
  std::map<std::vector<int>, int> freq;
  for (const auto& row : big.rows) ++freq[row];
  for (int uv = 0; uv < 2; ++uv)
    for (int xv = 0; xv < 2; ++xv)
      for (int yv = 0; yv < 2; ++yv) {
        double want = law.prob({{"U", uv}, {"X", xv}, {"Y", yv}});
        double got = freq[{uv, xv, yv}] / 100000.0;
        INFO("cell " << uv << xv << yv);
        CHECK_THAT(got, WithinAbs(want, 0.01));
      }
}

TEST_CASE("sampling a deterministic chain", "[synth]") {
  Variable x{"X", 2}, y{"Y", 2};
  Dag g({x, y}, {{"X", "Y"}});
  std::map<std::string, Factor> cpts;
  cpts.emplace("X", Factor({x}, {0.0, 1.0}));
  cpts.emplace("Y", Factor({x, y}, {1.0, 0.0, 0.0, 1.0}));
  Cbn m = Cbn::from_observational(std::move(g), std::move(cpts), {});
  Dataset d = sample(m, 50, 3);
  for (const auto& row : d.rows) CHECK(row == std::vector<int>({1, 1}));
}

TEST_CASE("random networks come out well-formed", "[synth]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomCbnSpec spec;
    spec.num_nodes = 5;
    spec.max_card = 3;
    spec.seed = seed;
    Cbn m = random_cbn(spec);
    CHECK(m.stochastic_nodes().size() == 5);
    CHECK(m.graph().regime_of("V0").has_value());
    Query q;
    q.targets = {"V0"};
    CHECK_THAT(joint_query(m, q).factor().total_mass(),
               WithinAbs(1.0, 1e-9));
  }
  RandomCbnSpec obs;
  obs.intervenable = false;
  CHECK_FALSE(random_cbn(obs).graph().regime_of("V0").has_value());

  RandomCbnSpec bad;
  bad.num_nodes = 9;
  CHECK_THROWS_AS(random_cbn(bad), ModelError);
  bad.num_nodes = 0;
  CHECK_THROWS_AS(random_cbn(bad), ModelError);
  RandomCbnSpec bad2;
  bad2.max_card = 5;
  CHECK_THROWS_AS(random_cbn(bad2), ModelError);
  RandomCbnSpec bad3;
  bad3.edge_prob = 1.5;
  CHECK_THROWS_AS(random_cbn(bad3), ModelError);
}

TEST_CASE("random exposure-outcome models honor the ignorability switch",
          "[synth]") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    StCm free = random_exposure_outcome_stcm(seed, true);
    CHECK(free.ignorable());
    CHECK(free.graph().parents("X").empty());
    StCm tied = random_exposure_outcome_stcm(seed, false);
    CHECK_FALSE(tied.ignorable());
    CHECK(tied.graph().parents("X") == std::vector<std::string>{"U"});
    int uc = tied.graph().node("U").card;
    CHECK(uc >= 2);
    CHECK(uc <= 4);
    CHECK(tied.exogenous() == VarSet{"U"});
  }
}

TEST_CASE("random instrument models", "[synth]") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Scm s = random_iv_scm(seed);
    CHECK(s.variable("Z").card == 2);
    CHECK(s.is_endogenous("X"));
    // The law is a proper probability model.
    double total = 0.0;
    for_each_exogenous(s, [&](double p, const Assignment&) { total += p; });
    CHECK_THAT(total, WithinAbs(1.0, 1e-9));

    Scm forced = random_iv_scm(seed, true);
    PrincipalStrata strata = strata_from_scm(forced, "Z", "X", "Y");
    CHECK_THAT(strata.complier_mass(), WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("random principal strata", "[synth]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PrincipalStrata any = random_strata(seed, false);
    any.validate();
    PrincipalStrata clean = random_strata(seed, true);
    clean.validate();
    CHECK_THAT(clean.defier_mass(), WithinAbs(0.0, 1e-15));
  }
  PrincipalStrata a = random_strata(3, false);
  PrincipalStrata b = random_strata(3, false);
  CHECK(a.q == b.q);
}

TEST_CASE("linear system simulation matches its parameters", "[synth]") {
  LinearSemParams p;
  p.alpha0 = 0.5;
  p.alpha1 = 2.0;
  p.beta0 = -1.0;
  p.beta1 = 3.0;
  p.cov_xy = 0.8;
  LinearSemSample s = simulate_linear_sem(p, 30000, 17);
  REQUIRE(s.z.size() == 30000);
  REQUIRE(s.x.size() == 30000);
  REQUIRE(s.y.size() == 30000);

  double zbar = 0.0;
  for (double v : s.z) zbar += v;
  zbar /= 30000.0;
  CHECK_THAT(zbar, WithinAbs(0.5, 0.02));

  CHECK_THAT(ols_slope(s.z, s.x), WithinAbs(2.0, 0.05));
  CHECK_THAT(ols_slope(s.z, s.y), WithinAbs(6.0, 0.15));

  LinearSemSample t = simulate_linear_sem(p, 30000, 17);
  CHECK(s.y == t.y);
  LinearSemSample odd = simulate_linear_sem(p, 30000, 18);
  CHECK(s.y != odd.y);

  // The instrument frequency is adjustable.
  LinearSemSample rare = simulate_linear_sem(p, 30000, 17, 0.1);
  double rbar = 0.0;
  for (double v : rare.z) rbar += v;
  CHECK_THAT(rbar / 30000.0, WithinAbs(0.1, 0.02));
}
