#pragma once

// Instrumental-variable estimands on binary (Z, X, Y): intention-to-treat
// contrasts, the Wald ratio, the local average treatment effect under
// monotonicity, principal-strata bookkeeping, and assumption-free ACE
// bounds via the response-type linear program.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coelab/bounds.hpp"
#include "coelab/errors.hpp"
#include "coelab/lp.hpp"
#include "coelab/scm.hpp"

namespace coelab {

constexpr double kExactInstrumentTol = 1e-9;

// Observed law of a randomized-instrument experiment.
struct IvData {
  double p_z1 = 0.5;
  // cond[z][x][y] = P(X=x, Y=y | Z=z)
  std::array<std::array<std::array<double, 2>, 2>, 2> cond{};

  void validate() const {
    check_probability(p_z1, "P(Z=1)");
    for (int z = 0; z < 2; ++z) {
      double total = 0.0;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          check_probability(cond[z][x][y], "P(X,Y|Z)");
          total += cond[z][x][y];
        }
      if (std::fabs(total - 1.0) > kNormalizationTol)
        throw ModelError("P(X,Y|Z=" + std::to_string(z) + ") sums to " +
                         std::to_string(total));
    }
  }

  // Counts n[z][x][y], optionally smoothed by adding alpha to each cell.
  static IvData from_counts(
      const std::array<std::array<std::array<double, 2>, 2>, 2>& n,
      double alpha = 0.0) {
    IvData d;
    double nz[2] = {0.0, 0.0};
    for (int z = 0; z < 2; ++z)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
          if (n[z][x][y] < 0.0) throw ModelError("negative count");
          nz[z] += n[z][x][y];
        }
    double total = nz[0] + nz[1];
    if (total <= 0.0) throw ModelError("no observations");
    for (int z = 0; z < 2; ++z) {
      double denom = nz[z] + 4.0 * alpha;
      if (denom <= 0.0)
        throw PositivityViolationError("no observations with Z=" +
                                       std::to_string(z));
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
          d.cond[z][x][y] = (n[z][x][y] + alpha) / denom;
    }
    d.p_z1 = nz[1] / total;
    return d;
  }

  double p_x1_given_z(int z) const { return cond[z][1][0] + cond[z][1][1]; }
  double p_y1_given_z(int z) const { return cond[z][0][1] + cond[z][1][1]; }

  // Intention-to-treat contrasts.
  double ace_zx() const { return p_x1_given_z(1) - p_x1_given_z(0); }
  double ace_zy() const { return p_y1_given_z(1) - p_y1_given_z(0); }
};

enum class IvAssumption {
  none,          // bounds only
  monotone,      // no defiers, asserted by the analyst
  availability,  // treatment unavailable when Z=0, so X(Z=0)=0 structurally
};

inline void check_availability(const IvData& d) {
  if (d.p_x1_given_z(0) > kDataConsistencyTol)
    throw InfeasibleDataError(
        "availability design asserts X=0 whenever Z=0, but the data show "
        "P(X=1|Z=0) = " + std::to_string(d.p_x1_given_z(0)));
}

// Wald ratio from a binary experiment: the two ITT contrasts divided.
inline double wald_ratio(const IvData& d,
                         double weak_tol = kExactInstrumentTol) {
  d.validate();
  double denom = d.ace_zx();
  if (std::fabs(denom) <= weak_tol)
    throw WeakInstrumentError("first-stage effect " + std::to_string(denom) +
                              " is below the weak-instrument threshold");
  return d.ace_zy() / denom;
}

// LATE = complier average effect; identified by the Wald ratio, but only
// under an explicit no-defier assumption.
inline double late(const IvData& d, IvAssumption assumption,
                   double weak_tol = kExactInstrumentTol) {
  if (assumption == IvAssumption::none)
    throw ModelError(
        "LATE needs an explicit monotonicity (or availability) assumption");
  d.validate();
  if (assumption == IvAssumption::availability) check_availability(d);
  return wald_ratio(d, weak_tol);
}

// Joint law of the response type (X(Z=0), X(Z=1), Y(X=0), Y(X=1)).
struct PrincipalStrata {
  std::array<double, 16> q{};

  static std::size_t index(int x0, int x1, int y0, int y1) {
    return static_cast<std::size_t>(((x0 * 2 + x1) * 2 + y0) * 2 + y1);
  }

  void validate() const {
    double total = 0.0;
    for (double v : q) {
      if (!(v >= 0.0)) throw ModelError("negative principal-stratum mass");
      total += v;
    }
    if (std::fabs(total - 1.0) > kNormalizationTol)
      throw ModelError("principal-stratum masses sum to " +
                       std::to_string(total));
  }

  template <typename Pred>
  double mass(Pred&& pred) const {
    double t = 0.0;
    for (int x0 = 0; x0 < 2; ++x0)
      for (int x1 = 0; x1 < 2; ++x1)
        for (int y0 = 0; y0 < 2; ++y0)
          for (int y1 = 0; y1 < 2; ++y1)
            if (pred(x0, x1, y0, y1)) t += q[index(x0, x1, y0, y1)];
    return t;
  }

  double complier_mass() const {
    return mass([](int x0, int x1, int, int) { return x0 == 0 && x1 == 1; });
  }
  double defier_mass() const {
    return mass([](int x0, int x1, int, int) { return x0 == 1 && x1 == 0; });
  }

  // E of the individual effect of X on Y, and of Z on X / Z on Y.  The
  // individual Z-on-Y effect factors through X: Y(Z=z) = Y(X(Z=z)).
  double ace_xy() const {
    double t = 0.0;
    for (int x0 = 0; x0 < 2; ++x0)
      for (int x1 = 0; x1 < 2; ++x1)
        for (int y0 = 0; y0 < 2; ++y0)
          for (int y1 = 0; y1 < 2; ++y1)
            t += q[index(x0, x1, y0, y1)] * (y1 - y0);
    return t;
  }
  double ace_zx() const {
    double t = 0.0;
    for (int x0 = 0; x0 < 2; ++x0)
      for (int x1 = 0; x1 < 2; ++x1)
        for (int y0 = 0; y0 < 2; ++y0)
          for (int y1 = 0; y1 < 2; ++y1)
            t += q[index(x0, x1, y0, y1)] * (x1 - x0);
    return t;
  }
  double ace_zy() const {
    double t = 0.0;
    for (int x0 = 0; x0 < 2; ++x0)
      for (int x1 = 0; x1 < 2; ++x1)
        for (int y0 = 0; y0 < 2; ++y0)
          for (int y1 = 0; y1 < 2; ++y1) {
            int yz1 = x1 == 1 ? y1 : y0;
            int yz0 = x0 == 1 ? y1 : y0;
            t += q[index(x0, x1, y0, y1)] * (yz1 - yz0);
          }
    return t;
  }

  // Complier average effect.  Undefined (zero conditioning mass) when there
  // are no compliers.
  double late() const {
    double c = complier_mass();
    if (c <= kZeroMassTol)
      throw ZeroMassError("no compliers: LATE undefined");
    double t = 0.0;
    for (int y0 = 0; y0 < 2; ++y0)
      for (int y1 = 0; y1 < 2; ++y1)
        t += q[index(0, 1, y0, y1)] * (y1 - y0);
    return t / c;
  }

  // The observational law the strata imply under consistency.
  IvData observed(double p_z1 = 0.5) const {
    IvData d;
    d.p_z1 = p_z1;
    for (int x0 = 0; x0 < 2; ++x0)
      for (int x1 = 0; x1 < 2; ++x1)
        for (int y0 = 0; y0 < 2; ++y0)
          for (int y1 = 0; y1 < 2; ++y1) {
            double v = q[index(x0, x1, y0, y1)];
            int xz[2] = {x0, x1};
            for (int z = 0; z < 2; ++z) {
              int x = xz[z];
              int y = x == 1 ? y1 : y0;
              d.cond[z][x][y] += v;
            }
          }
    return d;
  }
};

struct IvEstimands {
  double ace_zx = 0.0;
  double ace_zy = 0.0;
  double ace_xy = 0.0;
  std::optional<double> late;  // absent when there are no compliers
  double complier_mass = 0.0;
  double defier_mass = 0.0;
};

inline IvEstimands strata_estimands(const PrincipalStrata& s) {
  s.validate();
  IvEstimands e;
  e.ace_zx = s.ace_zx();
  e.ace_zy = s.ace_zy();
  e.ace_xy = s.ace_xy();
  e.complier_mass = s.complier_mass();
  e.defier_mass = s.defier_mass();
  if (e.complier_mass > kZeroMassTol) e.late = s.late();
  return e;
}

// Extract the response-type law from a deterministic model by solving the
// system under do(Z=z) and do(X=x) for each exogenous configuration.
// Refused when Z has no causal path to X: the notation X(Z=z) is undefined
// for an instrument that is merely associated with the exposure.
inline PrincipalStrata strata_from_scm(const Scm& s, const std::string& z,
                                       const std::string& x,
                                       const std::string& y) {
  for (const auto* v : {&z, &x, &y}) {
    if (!s.is_endogenous(*v))
      throw ModelError("principal strata need endogenous Z, X, Y; " + *v +
                       " is not");
    if (s.variable(*v).card != 2)
      throw ModelError("principal strata need binary variables; " + *v +
                       " is not binary");
  }
  if (!s.graph().descendants(z).count(x))
    throw ModelError("X(Z=z) is undefined: " + z +
                     " has no causal path to " + x);

  PrincipalStrata out;
  for_each_exogenous(s, [&](double p, const Assignment& u) {
    int x0 = solve(s, u, {{z, 0}}).at(x);
    int x1 = solve(s, u, {{z, 1}}).at(x);
    int y0 = solve(s, u, {{x, 0}}).at(y);
    int y1 = solve(s, u, {{x, 1}}).at(y);
    out.q[PrincipalStrata::index(x0, x1, y0, y1)] += p;
  });
  return out;
}

// Exclusion-restriction diagnostic: probability mass on which the direct
// route Y(Z=z) differs from the mediated route Y(X = X(Z=z)).
struct ExclusionReport {
  double violation_mass_z0 = 0.0;
  double violation_mass_z1 = 0.0;
  double max_violation() const {
    return std::max(violation_mass_z0, violation_mass_z1);
  }
  bool holds(double tol = kZeroMassTol) const {
    return max_violation() <= tol;
  }
};

inline ExclusionReport check_exclusion(const Scm& s, const std::string& z,
                                       const std::string& x,
                                       const std::string& y) {
  for (const auto* v : {&z, &x}) {
    if (!s.is_endogenous(*v) || s.variable(*v).card != 2)
      throw ModelError("the exclusion check needs a binary endogenous "
                       "instrument and exposure; " + *v + " does not qualify");
  }
  s.variable(y);  // outcome must at least exist
  if (!s.graph().descendants(z).count(x))
    throw ModelError("X(Z=z) is undefined: " + z +
                     " has no causal path to " + x);
  ExclusionReport rep;
  for_each_exogenous(s, [&](double p, const Assignment& u) {
    for (int zz = 0; zz < 2; ++zz) {
      Assignment under_z = solve(s, u, {{z, zz}});
      int direct = under_z.at(y);
      int mediated = solve(s, u, {{x, under_z.at(x)}}).at(y);
      double& acc = zz == 0 ? rep.violation_mass_z0 : rep.violation_mass_z1;
      if (direct != mediated) acc += p;
    }
  });
  return rep;
}

// Monotonicity deduced from a complete mediator W on the instrument-exposure
// pathway.  If every directed route from the instrument to the exposure runs
// through W, and both P(W(Z=1)=1) = 1 and P(X(W=0)=0) = 1 hold, there can be
// no defiers: X(Z=0)=1 forces W(Z=0)=1=W(Z=1) and hence X(Z=1)=X(Z=0).
// The premises are model-level facts, not data estimates.
struct MediatorMonotonicityReport {
  bool complete_mediator = false;   // every directed Z-to-X path passes W
  bool w_certain_under_z1 = false;  // P(W(Z=1)=1) = 1
  bool x_zero_under_w0 = false;     // P(X(W=0)=0) = 1

  bool implies_monotone() const {
    return complete_mediator && w_certain_under_z1 && x_zero_under_w0;
  }
};

inline MediatorMonotonicityReport monotone_via_mediator(const Scm& s,
                                                        const std::string& z,
                                                        const std::string& w,
                                                        const std::string& x) {
  for (const auto* v : {&z, &w, &x}) {
    if (!s.is_endogenous(*v) || s.variable(*v).card != 2)
      throw ModelError("the mediator deduction needs binary endogenous "
                       "instrument, mediator, and exposure; " + *v +
                       " does not qualify");
  }
  MediatorMonotonicityReport rep;
  std::set<std::string> keep;
  for (const Variable& v : s.graph().nodes())
    if (v.id != w) keep.insert(v.id);
  rep.complete_mediator = !s.graph().induced(keep).descendants(z).count(x);
  rep.w_certain_under_z1 = true;
  rep.x_zero_under_w0 = true;
  for_each_exogenous(s, [&](double, const Assignment& u) {
    if (solve(s, u, {{z, 1}}).at(w) != 1) rep.w_certain_under_z1 = false;
    if (solve(s, u, {{w, 0}}).at(x) != 0) rep.x_zero_under_w0 = false;
  });
  return rep;
}

// Assumption-free (optionally monotone) bounds on the ACE of X on Y from
// instrument data: linear program over the 16 response types, constrained
// to reproduce P(X=x, Y=y | Z=z).
inline BoundsInterval ace_bounds_lp(const IvData& d, bool monotone = false) {
  d.validate();
  LinearConstraints lc;
  lc.num_vars = 16;
  lc.rows.push_back(std::vector<double>(16, 1.0));
  lc.rhs.push_back(1.0);
  for (int z = 0; z < 2; ++z)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) {
        std::vector<double> row(16, 0.0);
        for (int x0 = 0; x0 < 2; ++x0)
          for (int x1 = 0; x1 < 2; ++x1)
            for (int y0 = 0; y0 < 2; ++y0)
              for (int y1 = 0; y1 < 2; ++y1) {
                int xz = z == 0 ? x0 : x1;
                int yz = xz == 1 ? y1 : y0;
                if (xz == x && yz == y)
                  row[PrincipalStrata::index(x0, x1, y0, y1)] = 1.0;
              }
        lc.rows.push_back(std::move(row));
        lc.rhs.push_back(d.cond[z][x][y]);
      }
  if (monotone) {
    for (int y0 = 0; y0 < 2; ++y0)
      for (int y1 = 0; y1 < 2; ++y1) {
        std::vector<double> row(16, 0.0);
        row[PrincipalStrata::index(1, 0, y0, y1)] = 1.0;
        lc.rows.push_back(std::move(row));
        lc.rhs.push_back(0.0);
      }
  }
  std::vector<double> objective(16, 0.0);
  for (int x0 = 0; x0 < 2; ++x0)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int y0 = 0; y0 < 2; ++y0)
        for (int y1 = 0; y1 < 2; ++y1)
          objective[PrincipalStrata::index(x0, x1, y0, y1)] =
              static_cast<double>(y1 - y0);
  BoundsInterval out = lp_pc_bounds(lc, objective, 1.0);
  out.diagnostics["ace_zx"] = d.ace_zx();
  out.diagnostics["ace_zy"] = d.ace_zy();
  out.diagnostics["monotone"] = monotone ? 1.0 : 0.0;
  return out;
}

// Two-equation linear model with correlated disturbances:
//   X = alpha0 + alpha1 Z + U_X,   Y = beta0 + beta1 X + U_Y.
struct LinearSemParams {
  double alpha0 = 0.0, alpha1 = 1.0;
  double beta0 = 0.0, beta1 = 0.0;
  double var_x = 1.0, var_y = 1.0, cov_xy = 0.0;

  void validate() const {
    if (var_x < 0.0 || var_y < 0.0 ||
        var_x * var_y - cov_xy * cov_xy < -1e-12)
      throw ModelError("residual covariance matrix is not positive "
                       "semidefinite");
  }
};

// Exact structural slope; the estimand the Wald ratio recovers.
inline double wald_ratio(const LinearSemParams& p) {
  p.validate();
  if (std::fabs(p.alpha1) <= kExactInstrumentTol)
    throw WeakInstrumentError("instrument does not move the exposure");
  return p.beta1;
}

inline double ols_slope(const std::vector<double>& x,
                        const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ModelError("slope needs two equal-length samples");
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx <= 0.0) throw ModelError("regressor has zero variance");
  return sxy / sxx;
}

// Sample Wald ratio: slope of Y on Z over slope of X on Z.
inline double wald_ratio(const std::vector<double>& z,
                         const std::vector<double>& x,
                         const std::vector<double>& y,
                         double weak_tol = 0.01) {
  double first_stage = ols_slope(z, x);
  if (std::fabs(first_stage) <= weak_tol)
    throw WeakInstrumentError("first-stage slope " +
                              std::to_string(first_stage) +
                              " is below the weak-instrument threshold");
  return ols_slope(z, y) / first_stage;
}

}  // namespace coelab
