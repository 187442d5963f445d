#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "coelab/iv.hpp"
#include "coelab/synth.hpp"

using namespace coelab;
using Catch::Matchers::WithinAbs;

namespace {

using Counts = std::array<std::array<std::array<double, 2>, 2>, 2>;

// Half compliers, the rest split between never- and always-takers, chosen so
// the complier effect (0.6) separates cleanly from the population effect.
PrincipalStrata late_fixture() {
  PrincipalStrata s;
  s.q[PrincipalStrata::index(0, 1, 0, 0)] = 0.10;
  s.q[PrincipalStrata::index(0, 1, 0, 1)] = 0.30;
  s.q[PrincipalStrata::index(0, 1, 1, 1)] = 0.10;
  s.q[PrincipalStrata::index(0, 0, 0, 0)] = 0.15;
  s.q[PrincipalStrata::index(0, 0, 1, 0)] = 0.15;
  s.q[PrincipalStrata::index(1, 1, 0, 0)] = 0.10;
  s.q[PrincipalStrata::index(1, 1, 0, 1)] = 0.10;
  return s;
}

// The same law as raw counts, n = 40.
Counts late_counts() {
  return {{{{{11, 5}, {2, 2}}}, {{{3, 3}, {4, 10}}}}};
}

// Z = UZ, X = Z or U, Y = X or U with P(U=1) = 0.3, P(UZ=1) = 0.5.
Scm saturating_iv() {
  Variable u{"U", 2}, uz{"UZ", 2}, z{"Z", 2}, x{"X", 2}, y{"Y", 2};
  StructuralEquation ez{"Z", {}, "UZ", {0, 1}};
  StructuralEquation ex{"X", {"Z"}, "U", {0, 1, 1, 1}};
  StructuralEquation ey{"Y", {"X"}, "U", {0, 1, 1, 1}};
  Distribution exo(Factor({u, uz}, {0.35, 0.35, 0.15, 0.15}));
  return Scm({u, uz, z, x, y}, {ez, ex, ey}, exo);
}

}  // namespace

TEST_CASE("instrument data from counts", "[iv]") {
  IvData d = IvData::from_counts(late_counts());
  CHECK_THAT(d.p_z1, WithinAbs(0.5, 1e-15));
  CHECK_THAT(d.cond[0][0][0], WithinAbs(0.55, 1e-15));
  CHECK_THAT(d.cond[0][1][1], WithinAbs(0.10, 1e-15));
  CHECK_THAT(d.cond[1][1][1], WithinAbs(0.50, 1e-15));
  CHECK_THAT(d.p_x1_given_z(0), WithinAbs(0.2, 1e-12));
  CHECK_THAT(d.p_x1_given_z(1), WithinAbs(0.7, 1e-12));
  CHECK_THAT(d.ace_zx(), WithinAbs(0.5, 1e-12));
  CHECK_THAT(d.ace_zy(), WithinAbs(0.3, 1e-12));
  d.validate();

  // Smoothing adds alpha to each of the four cells within an arm.
  IvData sm = IvData::from_counts(late_counts(), 1.0);
  CHECK_THAT(sm.cond[0][0][0], WithinAbs(12.0 / 24.0, 1e-12));
  CHECK_THAT(sm.cond[1][0][0], WithinAbs(4.0 / 24.0, 1e-12));

  Counts neg = late_counts();
  neg[0][1][0] = -1;
  CHECK_THROWS_AS(IvData::from_counts(neg), ModelError);
  CHECK_THROWS_AS(IvData::from_counts(Counts{}), ModelError);
  Counts onearm{};
  onearm[1][0][0] = 5;
  onearm[1][1][1] = 5;
  CHECK_THROWS_AS(IvData::from_counts(onearm), PositivityViolationError);
  // ... unless smoothing fills the empty arm.
  CHECK_NOTHROW(IvData::from_counts(onearm, 0.5));
}

TEST_CASE("wald ratio and its preconditions", "[iv]") {
  IvData d = IvData::from_counts(late_counts());
  CHECK_THAT(wald_ratio(d), WithinAbs(0.6, 1e-12));

  IvData flat = d;
  flat.cond[1] = flat.cond[0];  // instrument does nothing
  CHECK_THROWS_AS(wald_ratio(flat), WeakInstrumentError);

  // The ratio is only interpretable under an explicit assumption.
  CHECK_THROWS_AS(late(d, IvAssumption::none), ModelError);
  CHECK_THAT(late(d, IvAssumption::monotone), WithinAbs(0.6, 1e-12));
  // Availability fails here: one fifth take the exposure without the offer.
  CHECK_THROWS_AS(late(d, IvAssumption::availability), InfeasibleDataError);

  IvData avail;
  avail.cond[0] = {{{0.7, 0.3}, {0.0, 0.0}}};
  avail.cond[1] = {{{0.15, 0.15}, {0.2, 0.5}}};
  CHECK_THAT(late(avail, IvAssumption::availability),
             WithinAbs(0.35 / 0.7, 1e-12));
}

TEST_CASE("principal strata bookkeeping", "[iv]") {
  PrincipalStrata s = late_fixture();
  s.validate();
  CHECK_THAT(s.complier_mass(), WithinAbs(0.5, 1e-12));
  CHECK_THAT(s.defier_mass(), WithinAbs(0.0, 1e-15));
  CHECK_THAT(s.mass([](int x0, int x1, int, int) {
               return x0 == 0 && x1 == 0;
             }),
             WithinAbs(0.3, 1e-12));
  CHECK_THAT(s.ace_zx(), WithinAbs(0.5, 1e-12));
  CHECK_THAT(s.ace_zy(), WithinAbs(0.3, 1e-12));
  CHECK_THAT(s.ace_xy(), WithinAbs(0.25, 1e-12));
  CHECK_THAT(s.late(), WithinAbs(0.6, 1e-12));

  // The implied observational law, and the Wald ratio on it.
  IvData obs = s.observed();
  IvData counts = IvData::from_counts(late_counts());
  for (int z = 0; z < 2; ++z)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y)
        CHECK_THAT(obs.cond[z][x][y], WithinAbs(counts.cond[z][x][y], 1e-12));
  CHECK_THAT(wald_ratio(obs), WithinAbs(0.6, 1e-12));
  // The population effect is a different quantity than the complier effect.
  CHECK(std::fabs(s.ace_xy() - s.late()) > 0.3);

  IvEstimands est = strata_estimands(s);
  CHECK_THAT(est.ace_zx, WithinAbs(0.5, 1e-12));
  CHECK_THAT(est.ace_xy, WithinAbs(0.25, 1e-12));
  REQUIRE(est.late.has_value());
  CHECK_THAT(*est.late, WithinAbs(0.6, 1e-12));
  CHECK_THAT(est.complier_mass, WithinAbs(0.5, 1e-12));

  PrincipalStrata junk;
  junk.q[0] = 0.5;
  CHECK_THROWS_AS(junk.validate(), ModelError);
  junk.q[0] = 1.0;  // all never-takers with Y stuck at 0
  junk.validate();
  CHECK_THROWS_AS(junk.late(), ZeroMassError);
  REQUIRE_FALSE(strata_estimands(junk).late.has_value());
}

TEST_CASE("effect multiplicativity holds for every pure response type",
          "[iv]") {
  for (int x0 = 0; x0 < 2; ++x0)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int y0 = 0; y0 < 2; ++y0)
        for (int y1 = 0; y1 < 2; ++y1) {
          PrincipalStrata s;
          s.q[PrincipalStrata::index(x0, x1, y0, y1)] = 1.0;
          INFO("type " << x0 << x1 << y0 << y1);
          CHECK_THAT(s.ace_zy(), WithinAbs(s.ace_zx() * s.ace_xy(), 1e-15));
        }

  // Mixtures break it: half compliers with no effect, half never-takers
  // whose potential outcomes differ.
  PrincipalStrata mix;
  mix.q[PrincipalStrata::index(0, 1, 0, 0)] = 0.5;
  mix.q[PrincipalStrata::index(0, 0, 0, 1)] = 0.5;
  CHECK_THAT(mix.ace_zy(), WithinAbs(0.0, 1e-15));
  CHECK_THAT(mix.ace_zx() * mix.ace_xy(), WithinAbs(0.25, 1e-12));
}

TEST_CASE("ace bounds from instrument data are sound", "[iv]") {
  IvData obs = late_fixture().observed();
  BoundsInterval plain = ace_bounds_lp(obs);
  CHECK(plain.lower <= 0.25 + 1e-9);
  CHECK(plain.upper >= 0.25 - 1e-9);
  CHECK(plain.diagnostics.at("monotone") == 0.0);

  BoundsInterval mono = ace_bounds_lp(obs, true);
  CHECK(mono.lower <= 0.25 + 1e-9);
  CHECK(mono.upper >= 0.25 - 1e-9);
  CHECK(mono.lower >= plain.lower - 1e-9);
  CHECK(mono.upper <= plain.upper + 1e-9);

  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (bool defier_free : {false, true}) {
      PrincipalStrata s = random_strata(seed, defier_free);
      double truth = s.ace_xy();
      BoundsInterval b = ace_bounds_lp(s.observed(), defier_free);
      INFO("seed " << seed << " defier_free " << defier_free);
      CHECK(b.lower <= truth + 1e-9);
      CHECK(b.upper >= truth - 1e-9);
      CHECK(b.lower >= -1.0 - 1e-9);
      CHECK(b.upper <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("perfect compliance collapses the ace bounds", "[iv]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Scm s = random_iv_scm(seed, true);
    PrincipalStrata strata = strata_from_scm(s, "Z", "X", "Y");
    double truth = strata.ace_xy();
    BoundsInterval b = ace_bounds_lp(strata.observed());
    INFO("seed " << seed);
    CHECK(b.upper - b.lower <= 1e-9);
    CHECK_THAT(b.lower, WithinAbs(truth, 1e-9));
  }
}

TEST_CASE("response types extracted from a structural model", "[iv]") {
  Scm s = saturating_iv();
  PrincipalStrata strata = strata_from_scm(s, "Z", "X", "Y");
  // U = 0 makes a complier whose outcome tracks the exposure; U = 1 makes
  // an always-taker stuck at Y = 1.
  CHECK_THAT(strata.q[PrincipalStrata::index(0, 1, 0, 1)],
             WithinAbs(0.7, 1e-12));
  CHECK_THAT(strata.q[PrincipalStrata::index(1, 1, 1, 1)],
             WithinAbs(0.3, 1e-12));
  CHECK_THAT(strata.complier_mass(), WithinAbs(0.7, 1e-12));
  CHECK_THAT(strata.ace_xy(), WithinAbs(0.7, 1e-12));
  CHECK_THAT(strata.late(), WithinAbs(1.0, 1e-12));

  // A "gene" with no route into the exposure is refused outright.
  Variable u{"U", 2}, g{"G", 2}, x{"X", 2}, y{"Y", 2};
  StructuralEquation eg{"G", {}, "U", {0, 1}};
  StructuralEquation ex{"X", {}, "U", {0, 1}};
  StructuralEquation ey{"Y", {"X"}, "U", {0, 1, 1, 1}};
  Scm gene({u, g, x, y}, {eg, ex, ey},
           Distribution(Factor({u}, {0.5, 0.5})));
  CHECK_THROWS_AS(strata_from_scm(gene, "G", "X", "Y"), ModelError);
  CHECK_THROWS_AS(strata_from_scm(s, "U", "X", "Y"), ModelError);
}

TEST_CASE("exclusion holds iff the instrument moves Y only through X",
          "[iv]") {
  ExclusionReport ok = check_exclusion(saturating_iv(), "Z", "X", "Y");
  CHECK(ok.holds());
  CHECK_THAT(ok.max_violation(), WithinAbs(0.0, 1e-15));

  // Give Y its own ear on the instrument and the check lights up.
  Variable u{"U", 2}, uz{"UZ", 2}, z{"Z", 2}, x{"X", 2}, y{"Y", 2};
  StructuralEquation ez{"Z", {}, "UZ", {0, 1}};
  StructuralEquation ex{"X", {"Z"}, "U", {0, 1, 1, 1}};
  StructuralEquation ey{"Y", {"Z"}, "U", {0, 1, 1, 1}};  // Y = Z or U
  Scm direct({u, uz, z, x, y}, {ez, ex, ey},
             Distribution(Factor({u, uz}, {0.35, 0.35, 0.15, 0.15})));
  ExclusionReport bad = check_exclusion(direct, "Z", "X", "Y");
  CHECK_FALSE(bad.holds());
  // U=0, UZ=1: forcing Z to 0 turns Y off, but holding X at its natural
  // value leaves the live instrument to switch Y back on.
  CHECK_THAT(bad.violation_mass_z0, WithinAbs(0.35, 1e-12));
  CHECK_THAT(bad.violation_mass_z1, WithinAbs(0.35, 1e-12));

  CHECK_THROWS_AS(check_exclusion(saturating_iv(), "Z", "X", "Q"),
                  ModelError);
  CHECK_THROWS_AS(check_exclusion(saturating_iv(), "U", "X", "Y"),
                  ModelError);
}

TEST_CASE("monotonicity deduced from a complete mediator", "[iv]") {
  Variable uz{"UZ", 2}, uw{"UW", 2}, ux{"UX", 2};
  Variable z{"Z", 2}, w{"W", 2}, x{"X", 2}, y{"Y", 2};
  Distribution exo(Factor({uw, ux, uz},
                          {0.125, 0.125, 0.125, 0.125,
                           0.125, 0.125, 0.125, 0.125}));
  StructuralEquation ez{"Z", {}, "UZ", {0, 1}};
  StructuralEquation ew{"W", {"Z"}, "UW", {0, 1, 1, 1}};  // W = Z or UW
  StructuralEquation ex{"X", {"W"}, "UX", {0, 0, 0, 1}};  // X = W and UX
  StructuralEquation ey{"Y", {"X"}, std::nullopt, {0, 1}};
  Scm chain({uz, uw, ux, z, w, x, y}, {ez, ew, ex, ey}, exo);

  MediatorMonotonicityReport rep = monotone_via_mediator(chain, "Z", "W", "X");
  CHECK(rep.complete_mediator);
  CHECK(rep.w_certain_under_z1);
  CHECK(rep.x_zero_under_w0);
  CHECK(rep.implies_monotone());
  // And the conclusion is true: the extracted strata have no defiers.
  CHECK_THAT(strata_from_scm(chain, "Z", "X", "Y").defier_mass(),
             WithinAbs(0.0, 1e-15));

  // A side door from Z to X invalidates the completeness premise.
  StructuralEquation ex2{"X", {"W", "Z"}, std::nullopt, {0, 1, 1, 1}};
  Scm leaky({uz, uw, ux, z, w, x, y}, {ez, ew, ex2, ey}, exo);
  CHECK_FALSE(monotone_via_mediator(leaky, "Z", "W", "X").complete_mediator);

  // W = Z and UW: the offer does not reach everyone.
  StructuralEquation ew2{"W", {"Z"}, "UW", {0, 0, 0, 1}};
  Scm weak_offer({uz, uw, ux, z, w, x, y}, {ez, ew2, ex, ey}, exo);
  MediatorMonotonicityReport r2 = monotone_via_mediator(weak_offer, "Z", "W", "X");
  CHECK(r2.complete_mediator);
  CHECK_FALSE(r2.w_certain_under_z1);
  CHECK_FALSE(r2.implies_monotone());

  // X = W or UX: exposure possible even with the mediator off.
  StructuralEquation ex3{"X", {"W"}, "UX", {0, 1, 1, 1}};
  Scm self_served({uz, uw, ux, z, w, x, y}, {ez, ew, ex3, ey}, exo);
  MediatorMonotonicityReport r3 =
      monotone_via_mediator(self_served, "Z", "W", "X");
  CHECK_FALSE(r3.x_zero_under_w0);
  CHECK_FALSE(r3.implies_monotone());

  CHECK_THROWS_AS(monotone_via_mediator(chain, "UZ", "W", "X"), ModelError);
}

TEST_CASE("linear model: structural slope versus regression slope", "[iv]") {
  LinearSemParams p;
  p.alpha1 = 2.0;
  p.beta1 = 3.0;
  p.cov_xy = 0.8;
  p.validate();
  CHECK_THAT(wald_ratio(p), WithinAbs(3.0, 1e-15));

  LinearSemParams weak = p;
  weak.alpha1 = 0.0;
  CHECK_THROWS_AS(wald_ratio(weak), WeakInstrumentError);
  LinearSemParams bad = p;
  bad.cov_xy = 1.5;
  CHECK_THROWS_AS(bad.validate(), ModelError);

  CHECK_THAT(ols_slope({0, 1, 2, 3}, {1, 3, 5, 7}), WithinAbs(2.0, 1e-12));
  CHECK_THROWS_AS(ols_slope({1, 2}, {1}), ModelError);
  CHECK_THROWS_AS(ols_slope({1, 1, 1}, {1, 2, 3}), ModelError);

  // On simulated data the ratio recovers the structural slope while the
  // naive regression of Y on X absorbs the confounded disturbance.
  LinearSemSample sample = simulate_linear_sem(p, 30000, 11);
  double iv_hat = wald_ratio(sample.z, sample.x, sample.y);
  double ols_hat = ols_slope(sample.x, sample.y);
  CHECK_THAT(iv_hat, WithinAbs(3.0, 0.1));
  CHECK(std::fabs(ols_hat - 3.0) > 0.1);
  CHECK(ols_hat > iv_hat);  // positive residual correlation biases upward

  std::vector<double> flat_z(100, 1.0), xs, ys;
  for (int i = 0; i < 100; ++i) {
    xs.push_back(i);
    ys.push_back(2.0 * i);
  }
  CHECK_THROWS_AS(wald_ratio(flat_z, xs, ys), ModelError);
}
