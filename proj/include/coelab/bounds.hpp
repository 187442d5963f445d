#pragma once

// Interval bounds on the probability of causation
//   PC = P(Y(0) = 0 | X = 1, Y = 1)
// from observational margins, optionally sharpened by covariate strata,
// experimental (interventional) data, or a mediator.  Throughout, X and Y
// are binary; p1 = P(Y=1|X=1), p0 = P(Y=1|X=0).
//
// Parameterization of the joint of (Y(0), Y(1)) among the exposed:
//   tau = p1 - p0,  rho = p1 - (1 - p0),  xi = P(Y(0) != Y(1));
// cells are (1-rho-xi)/2, (xi+tau)/2, (xi-tau)/2, (1+rho-xi)/2 and the
// feasible slack range is |tau| <= xi <= 1 - |rho|.  PC = (xi+tau)/(1+tau+rho)
// is increasing in xi, so the interval endpoints sit at the xi extremes:
//   lower = max{0, 1 - 1/RR},   upper = min{1, (1-p0)/p1},  RR = p1/p0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coelab/errors.hpp"
#include "coelab/factor.hpp"
#include "coelab/lp.hpp"

namespace coelab {

constexpr double kDataConsistencyTol = 1e-6;

// Rounding slack: sums of masses that are exactly 0 or 1 on paper land a
// few ulp outside [0, 1] in floating point and must not be rejected.
inline void check_probability(double p, const std::string& name) {
  if (!(p >= -kZeroMassTol && p <= 1.0 + kZeroMassTol))
    throw ModelError(name + " = " + std::to_string(p) +
                     " is not a probability");
}

// Observational margins for a binary exposure/outcome pair, with optional
// extras used by the experimental-data bounds.
struct Margins {
  double p_y1_x1 = 0.0;               // P(Y=1 | X=1)
  double p_y1_x0 = 0.0;               // P(Y=1 | X=0)
  std::optional<double> p_x1;         // P(X=1)
  std::optional<double> p_y1_do_x0;   // P(Y=1 | X set to 0)

  void validate() const {
    check_probability(p_y1_x1, "P(Y=1|X=1)");
    check_probability(p_y1_x0, "P(Y=1|X=0)");
    if (p_x1) check_probability(*p_x1, "P(X=1)");
    if (p_y1_do_x0) check_probability(*p_y1_do_x0, "P(Y=1|do X=0)");
  }
};

inline std::pair<double, double> tau_rho(const Margins& m) {
  m.validate();
  return {m.p_y1_x1 - m.p_y1_x0, m.p_y1_x1 - (1.0 - m.p_y1_x0)};
}

// The one-parameter family of joints of (Y(0), Y(1)) compatible with fixed
// margins: tau and rho from the margins, xi the unidentified slack.
struct PoJoint {
  double tau = 0.0;
  double rho = 0.0;
  double xi = 0.0;

  double cell(int y0, int y1) const {
    if (y0 == 0 && y1 == 0) return (1.0 - rho - xi) / 2.0;
    if (y0 == 0 && y1 == 1) return (xi + tau) / 2.0;
    if (y0 == 1 && y1 == 0) return (xi - tau) / 2.0;
    return (1.0 + rho - xi) / 2.0;
  }

  bool feasible(double tol = 1e-9) const {
    return xi >= std::fabs(tau) - tol && xi <= 1.0 - std::fabs(rho) + tol;
  }
};

inline PoJoint po_joint(const Margins& m, double xi) {
  auto [tau, rho] = tau_rho(m);
  return PoJoint{tau, rho, xi};
}

// PC of a fully specified joint: (xi + tau) / (1 + tau + rho).
inline double pc_point(const PoJoint& j) {
  if (!j.feasible())
    throw ModelError("joint potential-outcome parameters are infeasible");
  double denom = 1.0 + j.tau + j.rho;
  if (denom <= kZeroMassTol)
    throw ZeroMassError(
        "no exposed positives: probability of causation undefined");
  return (j.xi + j.tau) / denom;
}

enum class BoundsMethod { basic, covariate, tian_pearl, mediator, lp };

inline std::string to_string(BoundsMethod m) {
  switch (m) {
    case BoundsMethod::basic: return "basic";
    case BoundsMethod::covariate: return "covariate";
    case BoundsMethod::tian_pearl: return "tian-pearl";
    case BoundsMethod::mediator: return "mediator";
    case BoundsMethod::lp: return "lp";
  }
  return "unknown";
}

struct StratumDiagnostics {
  std::size_t index = 0;
  double p_y1_x1 = 0.0;
  double p_y1_x0 = 0.0;
  double weight = 0.0;  // P(S=s | X=1)
  double rr = 0.0;
  double lower = 0.0;
  double upper = 1.0;
};

struct BoundsInterval {
  double lower = 0.0;
  double upper = 1.0;
  BoundsMethod method = BoundsMethod::basic;
  std::map<std::string, double> diagnostics;
  std::vector<StratumDiagnostics> per_stratum;
};

inline double risk_ratio(double p1, double p0) {
  if (p0 <= 0.0) return std::numeric_limits<double>::infinity();
  return p1 / p0;
}

inline BoundsInterval pc_bounds_basic(const Margins& m) {
  m.validate();
  double p1 = m.p_y1_x1, p0 = m.p_y1_x0;
  if (p1 <= kZeroMassTol)
    throw ZeroMassError(
        "P(Y=1|X=1) is zero: probability of causation undefined");
  BoundsInterval out;
  out.method = BoundsMethod::basic;
  out.lower = std::max(0.0, (p1 - p0) / p1);
  out.upper = std::min(1.0, (1.0 - p0) / p1);
  auto [tau, rho] = tau_rho(m);
  out.diagnostics["tau"] = tau;
  out.diagnostics["rho"] = rho;
  out.diagnostics["rr"] = risk_ratio(p1, p0);
  return out;
}

// One covariate stratum, with enough of the joint to rebuild margins.
struct Stratum {
  double p_s = 0.0;        // P(S=s)
  double p_x1_s = 0.0;     // P(X=1 | S=s)
  double p_y1_x1_s = 0.0;  // P(Y=1 | X=1, S=s)
  double p_y1_x0_s = 0.0;  // P(Y=1 | X=0, S=s)
};

struct StratifiedData {
  std::vector<Stratum> strata;

  void validate() const {
    if (strata.empty()) throw ModelError("no strata given");
    double total = 0.0;
    for (std::size_t s = 0; s < strata.size(); ++s) {
      const Stratum& r = strata[s];
      std::string tag = " (stratum " + std::to_string(s) + ")";
      check_probability(r.p_s, "P(S=s)" + tag);
      check_probability(r.p_x1_s, "P(X=1|S=s)" + tag);
      check_probability(r.p_y1_x1_s, "P(Y=1|X=1,S=s)" + tag);
      check_probability(r.p_y1_x0_s, "P(Y=1|X=0,S=s)" + tag);
      total += r.p_s;
    }
    if (std::fabs(total - 1.0) > kNormalizationTol)
      throw ModelError("stratum masses sum to " + std::to_string(total));
  }

  double p_x1() const {
    double t = 0.0;
    for (const Stratum& r : strata) t += r.p_s * r.p_x1_s;
    return t;
  }

  // Pooled observational margins (weights P(S=s | X=x)).
  Margins pooled() const {
    double px1 = p_x1();
    if (px1 <= kZeroMassTol)
      throw PositivityViolationError("exposure never occurs in any stratum");
    if (px1 >= 1.0 - kZeroMassTol)
      throw PositivityViolationError("exposure always occurs in every stratum");
    Margins m;
    for (const Stratum& r : strata) {
      m.p_y1_x1 += r.p_y1_x1_s * (r.p_s * r.p_x1_s / px1);
      m.p_y1_x0 += r.p_y1_x0_s * (r.p_s * (1.0 - r.p_x1_s) / (1.0 - px1));
    }
    m.p_x1 = px1;
    return m;
  }

  // Back-door estimate of the interventional P(Y=1 | X set to 0).
  double p_y1_do_x0() const {
    double t = 0.0;
    for (const Stratum& r : strata) t += r.p_y1_x0_s * r.p_s;
    return t;
  }
};

namespace detail {

// Shared stratum walk for the covariate bounds: yields each stratum with
// its weight P(S=s | X=1).  Strata with no mass or no exposure get weight
// zero in every sum, so they are skipped (the bound conditions on X=1).
// Returns the number skipped.
template <typename F>
std::size_t for_each_exposed_stratum(const StratifiedData& d, F&& fn) {
  double px1 = d.p_x1();
  if (px1 <= kZeroMassTol)
    throw PositivityViolationError("exposure never occurs in any stratum");
  std::size_t skipped = 0;
  for (std::size_t s = 0; s < d.strata.size(); ++s) {
    const Stratum& r = d.strata[s];
    if (r.p_s <= kZeroMassTol || r.p_x1_s <= kZeroMassTol) {
      ++skipped;
      continue;
    }
    fn(s, r, r.p_s * r.p_x1_s / px1);
  }
  return skipped;
}

}  // namespace detail

// Basic bounds within a single stratum.
inline BoundsInterval pc_bounds_conditional(const StratifiedData& d,
                                            std::size_t stratum) {
  d.validate();
  if (stratum >= d.strata.size())
    throw ModelError("stratum index out of range");
  const Stratum& r = d.strata[stratum];
  if (r.p_s <= kZeroMassTol)
    throw ZeroMassError("stratum " + std::to_string(stratum) +
                        " has zero mass");
  Margins m;
  m.p_y1_x1 = r.p_y1_x1_s;
  m.p_y1_x0 = r.p_y1_x0_s;
  BoundsInterval out = pc_bounds_basic(m);
  out.diagnostics["stratum"] = static_cast<double>(stratum);
  return out;
}

// Covariate-informed bounds: stratum-wise excess risks averaged with
// weights P(S=s | X=1), normalized by the pooled P(Y=1 | X=1).
inline BoundsInterval pc_bounds_covariate(const StratifiedData& d) {
  d.validate();
  double p1_bar = 0.0;
  detail::for_each_exposed_stratum(
      d, [&](std::size_t, const Stratum& r, double w) {
        p1_bar += r.p_y1_x1_s * w;
      });
  if (p1_bar <= kZeroMassTol)
    throw ZeroMassError(
        "P(Y=1|X=1) is zero: probability of causation undefined");

  BoundsInterval out;
  out.method = BoundsMethod::covariate;
  double lower_sum = 0.0, upper_sum = 0.0;
  std::size_t skipped = detail::for_each_exposed_stratum(
      d, [&](std::size_t s, const Stratum& r, double w) {
        lower_sum += std::max(0.0, r.p_y1_x1_s - r.p_y1_x0_s) * w;
        upper_sum += std::max(0.0, r.p_y1_x1_s - (1.0 - r.p_y1_x0_s)) * w;
        StratumDiagnostics sd;
        sd.index = s;
        sd.p_y1_x1 = r.p_y1_x1_s;
        sd.p_y1_x0 = r.p_y1_x0_s;
        sd.weight = w;
        sd.rr = risk_ratio(r.p_y1_x1_s, r.p_y1_x0_s);
        if (r.p_y1_x1_s > kZeroMassTol) {
          sd.lower = std::max(0.0, (r.p_y1_x1_s - r.p_y1_x0_s) / r.p_y1_x1_s);
          sd.upper = std::min(1.0, (1.0 - r.p_y1_x0_s) / r.p_y1_x1_s);
        }
        out.per_stratum.push_back(sd);
      });
  out.lower = std::clamp(lower_sum / p1_bar, 0.0, 1.0);
  out.upper = std::clamp(1.0 - upper_sum / p1_bar, 0.0, 1.0);
  out.diagnostics["p_y1_x1"] = p1_bar;
  out.diagnostics["strata_skipped"] = static_cast<double>(skipped);
  return out;
}

// Bounds from observational joint + experimental P(Y=1 | X set to 0); no
// ignorability assumed.  Requires p_x1 and p_y1_do_x0 in the margins.
inline BoundsInterval pc_bounds_tian_pearl(const Margins& m) {
  m.validate();
  if (!m.p_x1 || !m.p_y1_do_x0)
    throw ModelError(
        "experimental bounds need P(X=1) and P(Y=1|do X=0) in the margins");
  double p1 = m.p_y1_x1, p0 = m.p_y1_x0;
  double px1 = *m.p_x1, pdo0 = *m.p_y1_do_x0;
  if (px1 <= kZeroMassTol)
    throw ZeroMassError("P(X=1) is zero: probability of causation undefined");
  double pxy11 = p1 * px1;
  if (pxy11 <= kZeroMassTol)
    throw ZeroMassError(
        "P(X=1,Y=1) is zero: probability of causation undefined");

  // The only unidentified one-dimensional quantity: P(Y(0)=1 | X=1).
  // Out of range means the inputs cannot coexist.
  double q = (pdo0 - p0 * (1.0 - px1)) / px1;
  if (q < -kDataConsistencyTol || q > 1.0 + kDataConsistencyTol)
    throw InfeasibleDataError(
        "observational and experimental inputs are inconsistent: implied "
        "P(Y(0)=1|X=1) = " + std::to_string(q));

  double py1 = p1 * px1 + p0 * (1.0 - px1);
  double py0x0 = (1.0 - p0) * (1.0 - px1);
  BoundsInterval out;
  out.method = BoundsMethod::tian_pearl;
  out.lower = std::max(0.0, (py1 - pdo0) / pxy11);
  out.upper = std::min(1.0, ((1.0 - pdo0) - py0x0) / pxy11);
  out.diagnostics["p_y1"] = py1;
  out.diagnostics["p_x1_y1"] = pxy11;
  out.diagnostics["p_y0_given_x1_counterfactual"] = q;
  auto [tau, rho] = tau_rho(m);
  out.diagnostics["tau"] = tau;
  out.diagnostics["rho"] = rho;
  return out;
}

// Side-by-side covariate vs experimental-data bounds on the same stratified
// input.  The experimental quantity is produced by back-door adjustment over
// the strata, so the two routes describe the same world.
struct ComparisonReport {
  BoundsInterval covariate;
  BoundsInterval tian_pearl;
  bool lower_equal = false;
  bool upper_equal = false;
  bool rr_same_side = false;  // every stratum risk difference has one sign
  bool ur_same_side = false;  // every p1(s) - (1 - p0(s)) has one sign
};

inline ComparisonReport compare_bounds(const StratifiedData& d) {
  d.validate();
  ComparisonReport rep;
  rep.covariate = pc_bounds_covariate(d);

  Margins m = d.pooled();
  m.p_y1_do_x0 = d.p_y1_do_x0();
  rep.tian_pearl = pc_bounds_tian_pearl(m);

  bool any_pos = false, any_neg = false, any_pos_u = false, any_neg_u = false;
  detail::for_each_exposed_stratum(
      d, [&](std::size_t, const Stratum& r, double) {
        double diff = r.p_y1_x1_s - r.p_y1_x0_s;
        double udiff = r.p_y1_x1_s - (1.0 - r.p_y1_x0_s);
        if (diff > 0.0) any_pos = true;
        if (diff < 0.0) any_neg = true;
        if (udiff > 0.0) any_pos_u = true;
        if (udiff < 0.0) any_neg_u = true;
      });
  rep.rr_same_side = !(any_pos && any_neg);
  rep.ur_same_side = !(any_pos_u && any_neg_u);
  rep.lower_equal =
      std::fabs(rep.covariate.lower - rep.tian_pearl.lower) <= 1e-9;
  rep.upper_equal =
      std::fabs(rep.covariate.upper - rep.tian_pearl.upper) <= 1e-9;
  return rep;
}

// The experimental-data bounds recovered through the covariate formula: take
// the stratifier to be the (normally latent) binary "desired exposure" D,
// observationally identical to X.  Within D=1 the unexposed-arm outcome rate
// is pinned by the experimental P(Y=1 | X set to 0) via
//   P(Y=1|do X=0) = q·P(X=1) + P(Y=1|X=0)·P(X=0),  q = P(Y(0)=1 | D=1);
// everything else is observational.  Covariate bounds on the result coincide
// with pc_bounds_tian_pearl.
inline StratifiedData desired_exposure_reduction(const Margins& m) {
  m.validate();
  if (!m.p_x1 || !m.p_y1_do_x0)
    throw ModelError(
        "the desired-exposure reduction needs P(X=1) and P(Y=1|do X=0)");
  double px1 = *m.p_x1;
  if (px1 <= kZeroMassTol)
    throw ZeroMassError("P(X=1) is zero: probability of causation undefined");
  double q = (*m.p_y1_do_x0 - m.p_y1_x0 * (1.0 - px1)) / px1;
  if (q < -kDataConsistencyTol || q > 1.0 + kDataConsistencyTol)
    throw InfeasibleDataError(
        "observational and experimental inputs are inconsistent: implied "
        "P(Y(0)=1|D=1) = " + std::to_string(q));
  StratifiedData d;
  d.strata.push_back(Stratum{1.0 - px1, 0.0, 0.0, m.p_y1_x0});
  d.strata.push_back(Stratum{px1, 1.0, m.p_y1_x1, std::clamp(q, 0.0, 1.0)});
  return d;
}

// The LP bound engine with the PC scaling: extremize objective/denominator
// over {q >= 0, Aq = b}.
inline BoundsInterval lp_pc_bounds(const LinearConstraints& lc,
                                   const std::vector<double>& objective,
                                   double denominator = 1.0) {
  if (denominator <= kZeroMassTol)
    throw ZeroMassError("conditioning mass is zero: bound undefined");
  LpSolution sol = lp_extremize(lc, objective);
  BoundsInterval out;
  out.method = BoundsMethod::lp;
  out.lower = sol.min_value / denominator;
  out.upper = sol.max_value / denominator;
  out.diagnostics["vertices"] = static_cast<double>(sol.vertices.size());
  return out;
}

// Complete-mediation data: exposure moves Y only through M.
struct MediatorData {
  double p_m1_x0 = 0.0;  // P(M=1 | X=0)
  double p_m1_x1 = 0.0;  // P(M=1 | X=1)
  double p_y1_m0 = 0.0;  // P(Y=1 | M=0)
  double p_y1_m1 = 0.0;  // P(Y=1 | M=1)

  void validate() const {
    check_probability(p_m1_x0, "P(M=1|X=0)");
    check_probability(p_m1_x1, "P(M=1|X=1)");
    check_probability(p_y1_m0, "P(Y=1|M=0)");
    check_probability(p_y1_m1, "P(Y=1|M=1)");
  }

  // Margins implied by composing the two stages.
  Margins implied_margins() const {
    Margins m;
    m.p_y1_x1 = p_y1_m1 * p_m1_x1 + p_y1_m0 * (1.0 - p_m1_x1);
    m.p_y1_x0 = p_y1_m1 * p_m1_x0 + p_y1_m0 * (1.0 - p_m1_x0);
    return m;
  }
};

namespace detail {

// Vertices of the joint of one potential-outcome pair (A(0), A(1)) with
// fixed margins P(A(0)=1)=q0, P(A(1)=1)=q1.  Variable order:
// (a0,a1) = (0,0), (0,1), (1,0), (1,1).
inline std::vector<std::vector<double>> pair_polytope_vertices(double q0,
                                                               double q1) {
  LinearConstraints lc;
  lc.num_vars = 4;
  lc.rows = {{1, 1, 1, 1},    // total mass
             {0, 0, 1, 1},    // P(A(0)=1)
             {0, 1, 0, 1}};   // P(A(1)=1)
  lc.rhs = {1.0, q0, q1};
  return polytope_vertices(lc);
}

}  // namespace detail

// Mediation bounds.  The unknown is the joint law of the two pair variables
// (M(0),M(1)) and (Y(0),Y(1)); the pairs are independent of one another
// (separate mechanisms), so the joint is a product q = mu ⊗ nu with each
// factor constrained by its observed margins.  The PC numerator
//   N = P(Y(M(1))=1, Y(M(0))=0) = mu01·nu01 + mu10·nu10
// is bilinear, hence extremal over vertex pairs of the two margin polytopes.
inline BoundsInterval pc_bounds_mediator(const MediatorData& d) {
  d.validate();
  Margins implied = d.implied_margins();
  double p1_bar = implied.p_y1_x1;
  if (p1_bar <= kZeroMassTol)
    throw ZeroMassError(
        "implied P(Y=1|X=1) is zero: probability of causation undefined");

  auto mu_vertices = detail::pair_polytope_vertices(d.p_m1_x0, d.p_m1_x1);
  auto nu_vertices = detail::pair_polytope_vertices(d.p_y1_m0, d.p_y1_m1);

  // Index 1 is cell (0,1), index 2 is cell (1,0).
  bool first = true;
  double lo = 0.0, hi = 0.0;
  for (const auto& mu : mu_vertices) {
    for (const auto& nu : nu_vertices) {
      double n = mu[1] * nu[1] + mu[2] * nu[2];
      if (first || n < lo) lo = n;
      if (first || n > hi) hi = n;
      first = false;
    }
  }

  BoundsInterval out;
  out.method = BoundsMethod::mediator;
  out.lower = std::clamp(lo / p1_bar, 0.0, 1.0);
  out.upper = std::clamp(hi / p1_bar, 0.0, 1.0);
  out.diagnostics["tau_m"] = d.p_m1_x1 - d.p_m1_x0;
  out.diagnostics["tau_y"] = d.p_y1_m1 - d.p_y1_m0;
  out.diagnostics["implied_p_y1_x1"] = implied.p_y1_x1;
  out.diagnostics["implied_p_y1_x0"] = implied.p_y1_x0;
  return out;
}

}  // namespace coelab
