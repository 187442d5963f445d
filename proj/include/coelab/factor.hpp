#pragma once

// Discrete factors over named finite variables: the table algebra that
// Bayesian-network inference is built from.  Factors are immutable; every
// operation returns a new value.
//
// Layout convention: a factor's scope is kept sorted lexicographically by
// variable id (constructors re-sort and permute the table as needed), and
// the dense value table is row-major with the LAST scope variable varying
// fastest.  Equality of factors is equality of canonical scope + tables.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "coelab/errors.hpp"

namespace coelab {

enum class VarKind { stochastic, regime };

// A named finite variable.  States are 0..card-1.  Regime variables are the
// non-stochastic intervention indicators: their last state is the idle
// (observational) setting and states 0..card-2 mean "set the target to that
// value".
struct Variable {
  std::string id;
  int card = 2;
  VarKind kind = VarKind::stochastic;

  friend bool operator==(const Variable& a, const Variable& b) {
    return a.id == b.id && a.card == b.card && a.kind == b.kind;
  }
};

// Idle state index of a regime variable.
inline int idle_state(const Variable& regime) { return regime.card - 1; }

// Regime indicator for a stochastic variable: one extra state for idle.
inline std::string regime_id(std::string_view target) {
  return "F_" + std::string(target);
}
inline Variable regime_for(const Variable& target) {
  return Variable{regime_id(target.id), target.card + 1, VarKind::regime};
}

using Assignment = std::map<std::string, int>;
using VarSet = std::set<std::string>;

namespace detail {

inline std::size_t table_size(const std::vector<Variable>& scope) {
  std::size_t n = 1;
  for (const auto& v : scope) n *= static_cast<std::size_t>(v.card);
  return n;
}

// Mixed-radix digit counter over a scope, last digit fastest.
struct Odometer {
  explicit Odometer(const std::vector<Variable>& scope)
      : scope_(&scope), digits_(scope.size(), 0) {}

  const std::vector<int>& digits() const { return digits_; }

  bool advance() {
    for (std::size_t i = digits_.size(); i-- > 0;) {
      if (++digits_[i] < (*scope_)[i].card) return true;
      digits_[i] = 0;
    }
    return false;
  }

 private:
  const std::vector<Variable>* scope_;
  std::vector<int> digits_;
};

}  // namespace detail

class Factor {
 public:
  // Unit factor: empty scope, single value 1.  Multiplicative identity.
  Factor() : values_(1, 1.0) {}

  // Scope in any order, values laid out for that order (last id fastest).
  // The constructor canonicalizes to lexicographic scope order.
  Factor(std::vector<Variable> scope, std::vector<double> values) {
    validate_scope(scope);
    if (values.size() != detail::table_size(scope))
      throw ModelError("factor table size " + std::to_string(values.size()) +
                       " does not match scope size " +
                       std::to_string(detail::table_size(scope)));
    for (double v : values) {
      if (!std::isfinite(v) || v < 0.0)
        throw ModelError("factor values must be finite and nonnegative");
    }
    if (std::is_sorted(scope.begin(), scope.end(), id_less)) {
      scope_ = std::move(scope);
      values_ = std::move(values);
    } else {
      reorder(std::move(scope), std::move(values));
    }
    init_strides();
  }

  static Factor unit() { return Factor(); }

  static Factor constant(std::vector<Variable> scope, double value) {
    std::vector<double> v(detail::table_size(scope), value);
    return Factor(std::move(scope), std::move(v));
  }

  static Factor point_mass(const Variable& var, int state) {
    if (state < 0 || state >= var.card)
      throw ModelError("point mass state out of range for " + var.id);
    std::vector<double> v(static_cast<std::size_t>(var.card), 0.0);
    v[static_cast<std::size_t>(state)] = 1.0;
    return Factor({var}, std::move(v));
  }

  static Factor uniform(const Variable& var) {
    return constant({var}, 1.0 / var.card);
  }

  const std::vector<Variable>& scope() const { return scope_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  bool has(std::string_view id) const { return position(id) < scope_.size(); }

  const Variable& variable(std::string_view id) const {
    std::size_t p = position(id);
    if (p == scope_.size())
      throw ModelError("variable " + std::string(id) + " not in factor scope");
    return scope_[p];
  }

  std::vector<int> digits_of(std::size_t flat) const {
    std::vector<int> d(scope_.size());
    for (std::size_t i = scope_.size(); i-- > 0;) {
      d[i] = static_cast<int>(flat % static_cast<std::size_t>(scope_[i].card));
      flat /= static_cast<std::size_t>(scope_[i].card);
    }
    return d;
  }

  std::size_t flat_of(const std::vector<int>& digits) const {
    std::size_t f = 0;
    for (std::size_t i = 0; i < scope_.size(); ++i)
      f += strides_[i] * static_cast<std::size_t>(digits[i]);
    return f;
  }

  // Value at a full assignment of the scope; extra keys are ignored.
  double at(const Assignment& a) const {
    std::size_t f = 0;
    for (std::size_t i = 0; i < scope_.size(); ++i) {
      auto it = a.find(scope_[i].id);
      if (it == a.end())
        throw ModelError("assignment missing variable " + scope_[i].id);
      check_state(scope_[i], it->second);
      f += strides_[i] * static_cast<std::size_t>(it->second);
    }
    return values_[f];
  }

  double total_mass() const {
    return std::accumulate(values_.begin(), values_.end(), 0.0);
  }

  Factor multiply(const Factor& other) const {
    std::vector<Variable> merged = merge_scopes(scope_, other.scope_);
    Factor out = constant_unchecked(merged, 0.0);
    const auto pa = positions_in(out.scope_, scope_);
    const auto pb = positions_in(out.scope_, other.scope_);
    detail::Odometer od(out.scope_);
    std::size_t f = 0;
    do {
      const auto& d = od.digits();
      out.values_[f++] = values_[project(d, pa, strides_)] *
                         other.values_[project(d, pb, other.strides_)];
    } while (od.advance());
    return out;
  }

  // Sum out everything not in `keep`; keep must be a subset of the scope.
  Factor marginalize(const VarSet& keep) const {
    for (const auto& id : keep) {
      if (!has(id))
        throw ModelError("marginalize: variable " + id + " not in scope");
    }
    std::vector<Variable> kept;
    for (const auto& v : scope_)
      if (keep.count(v.id)) kept.push_back(v);
    Factor out = constant_unchecked(kept, 0.0);
    const auto pk = positions_in(scope_, kept);
    detail::Odometer od(scope_);
    std::size_t f = 0;
    do {
      out.values_[project(od.digits(), pk, out.strides_)] += values_[f++];
    } while (od.advance());
    return out;
  }

  Factor sum_out(std::string_view id) const {
    VarSet keep;
    for (const auto& v : scope_)
      if (v.id != id) keep.insert(v.id);
    if (keep.size() == scope_.size())
      throw ModelError("sum_out: variable " + std::string(id) +
                       " not in scope");
    return marginalize(keep);
  }

  // Slice on the evidence entries whose variables appear in the scope.
  // The sliced variables leave the scope; the table is NOT renormalized.
  Factor condition(const Assignment& evidence) const {
    std::vector<Variable> kept;
    std::vector<int> fixed(scope_.size(), -1);
    bool any = false;
    for (std::size_t i = 0; i < scope_.size(); ++i) {
      auto it = evidence.find(scope_[i].id);
      if (it == evidence.end()) {
        kept.push_back(scope_[i]);
      } else {
        check_state(scope_[i], it->second);
        fixed[i] = it->second;
        any = true;
      }
    }
    if (!any) return *this;
    Factor out = constant_unchecked(kept, 0.0);
    detail::Odometer od(kept);
    std::size_t f = 0;
    std::vector<int> full(scope_.size());
    do {
      const auto& d = od.digits();
      std::size_t k = 0;
      for (std::size_t i = 0; i < scope_.size(); ++i)
        full[i] = fixed[i] >= 0 ? fixed[i] : d[k++];
      out.values_[f++] = values_[flat_of(full)];
    } while (od.advance());
    return out;
  }

  // Rename scope variables (cards and kinds unchanged), re-canonicalizing.
  Factor rename(const std::map<std::string, std::string>& id_map) const {
    std::vector<Variable> scope = scope_;
    for (auto& v : scope) {
      auto it = id_map.find(v.id);
      if (it != id_map.end()) v.id = it->second;
    }
    return Factor(std::move(scope), values_);
  }

  friend bool operator==(const Factor& a, const Factor& b) {
    if (a.scope_.size() != b.scope_.size()) return false;
    for (std::size_t i = 0; i < a.scope_.size(); ++i)
      if (!(a.scope_[i] == b.scope_[i])) return false;
    return a.values_ == b.values_;
  }

 private:
  static bool id_less(const Variable& a, const Variable& b) {
    return a.id < b.id;
  }

  static void check_state(const Variable& v, int state) {
    if (state < 0 || state >= v.card)
      throw ModelError("state " + std::to_string(state) +
                       " out of range for variable " + v.id);
  }

  static void validate_scope(const std::vector<Variable>& scope) {
    std::set<std::string> seen;
    for (const auto& v : scope) {
      if (v.card < 2)
        throw ModelError("variable " + v.id + " must have cardinality >= 2");
      if (!seen.insert(v.id).second)
        throw ModelError("duplicate variable " + v.id + " in factor scope");
    }
  }

  // No re-sorting, no value checks; internal fast path for canonical scopes.
  static Factor constant_unchecked(std::vector<Variable> scope, double value) {
    Factor f;
    f.scope_ = std::move(scope);
    f.values_.assign(detail::table_size(f.scope_), value);
    f.init_strides();
    return f;
  }

  static std::vector<Variable> merge_scopes(const std::vector<Variable>& a,
                                            const std::vector<Variable>& b) {
    std::vector<Variable> merged;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
      if (j == b.size() || (i < a.size() && a[i].id < b[j].id)) {
        merged.push_back(a[i++]);
      } else if (i == a.size() || b[j].id < a[i].id) {
        merged.push_back(b[j++]);
      } else {
        if (a[i].card != b[j].card || a[i].kind != b[j].kind)
          throw ModelError("variable " + a[i].id +
                           " declared with inconsistent cardinality or kind");
        merged.push_back(a[i++]);
        ++j;
      }
    }
    return merged;
  }

  // For each variable of `sub`, its index within `super` (both canonical).
  static std::vector<std::size_t> positions_in(
      const std::vector<Variable>& super, const std::vector<Variable>& sub) {
    std::vector<std::size_t> pos(sub.size());
    std::size_t i = 0;
    for (std::size_t k = 0; k < sub.size(); ++k) {
      while (i < super.size() && super[i].id != sub[k].id) ++i;
      pos[k] = i;
    }
    return pos;
  }

  static std::size_t project(const std::vector<int>& digits,
                             const std::vector<std::size_t>& pos,
                             const std::vector<std::size_t>& strides) {
    std::size_t f = 0;
    for (std::size_t k = 0; k < pos.size(); ++k)
      f += strides[k] * static_cast<std::size_t>(digits[pos[k]]);
    return f;
  }

  void reorder(std::vector<Variable> scope, std::vector<double> values) {
    std::vector<std::size_t> perm(scope.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
      return scope[a].id < scope[b].id;
    });
    scope_.reserve(scope.size());
    for (std::size_t p : perm) scope_.push_back(scope[p]);

    std::vector<std::size_t> in_strides(scope.size());
    std::size_t s = 1;
    for (std::size_t i = scope.size(); i-- > 0;) {
      in_strides[i] = s;
      s *= static_cast<std::size_t>(scope[i].card);
    }
    values_.resize(values.size());
    detail::Odometer od(scope_);
    std::size_t f = 0;
    do {
      const auto& d = od.digits();
      std::size_t in = 0;
      for (std::size_t k = 0; k < perm.size(); ++k)
        in += in_strides[perm[k]] * static_cast<std::size_t>(d[k]);
      values_[f++] = values[in];
    } while (od.advance());
  }

  void init_strides() {
    strides_.resize(scope_.size());
    std::size_t s = 1;
    for (std::size_t i = scope_.size(); i-- > 0;) {
      strides_[i] = s;
      s *= static_cast<std::size_t>(scope_[i].card);
    }
  }

  std::size_t position(std::string_view id) const {
    for (std::size_t i = 0; i < scope_.size(); ++i)
      if (scope_[i].id == id) return i;
    return scope_.size();
  }

  std::vector<Variable> scope_;
  std::vector<std::size_t> strides_;
  std::vector<double> values_;
};

inline bool approx_equal(const Factor& a, const Factor& b, double tol) {
  if (a.scope().size() != b.scope().size()) return false;
  for (std::size_t i = 0; i < a.scope().size(); ++i)
    if (!(a.scope()[i] == b.scope()[i])) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::fabs(a.values()[i] - b.values()[i]) > tol) return false;
  return true;
}

constexpr double kZeroMassTol = 1e-12;
constexpr double kNormalizationTol = 1e-9;

// A factor whose table sums to 1 (within kNormalizationTol).
class Distribution {
 public:
  explicit Distribution(Factor f) : f_(std::move(f)) {
    if (std::fabs(f_.total_mass() - 1.0) > kNormalizationTol)
      throw ModelError("distribution does not sum to 1 (mass " +
                       std::to_string(f_.total_mass()) + ")");
  }

  const Factor& factor() const { return f_; }
  const std::vector<Variable>& scope() const { return f_.scope(); }
  double prob(const Assignment& a) const { return f_.at(a); }

  Distribution marginal(const VarSet& keep) const {
    return Distribution(f_.marginalize(keep));
  }

 private:
  Factor f_;
};

// Rescale to total mass 1.  Throws ZeroMassError when there is (numerically)
// nothing to rescale.
inline Distribution normalize(const Factor& f) {
  double mass = f.total_mass();
  if (mass <= kZeroMassTol)
    throw ZeroMassError("cannot normalize factor with total mass " +
                        std::to_string(mass));
  std::vector<double> v = f.values();
  for (double& x : v) x /= mass;
  return Distribution(Factor(f.scope(), std::move(v)));
}

// E[var] under d, with states read as real values 0,1,2,...
inline double expectation(const Distribution& d, const std::string& var) {
  Factor m = d.factor().marginalize({var});
  double e = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    e += static_cast<double>(i) * m.values()[i];
  return e;
}

}  // namespace coelab
