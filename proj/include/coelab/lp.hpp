#pragma once

// Tiny exact-ish linear programming for probability polytopes:
//   feasible set  {x : A x = b, x >= 0},
// assumed bounded (every use here includes a total-mass row).  Bounds are
// found by exhaustive enumeration of basic feasible solutions; with at most
// ~16 variables this is fast, deterministic, and free of solver tuning.
// Ties are broken by lexicographic basis order.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "coelab/errors.hpp"

namespace coelab {

struct LinearConstraints {
  std::size_t num_vars = 0;
  std::vector<std::vector<double>> rows;  // A, each of length num_vars
  std::vector<double> rhs;                // b
};

struct LpSolution {
  double min_value = 0.0;
  double max_value = 0.0;
  std::vector<double> argmin;
  std::vector<double> argmax;
  std::vector<std::vector<double>> vertices;  // deduplicated
};

namespace detail {

constexpr double kLpPivotTol = 1e-11;
constexpr double kLpFeasTol = 1e-9;

// Forward elimination with partial pivoting on [A|b].  Returns the reduced
// nonzero rows; throws InfeasibleDataError on an inconsistent system.
inline std::vector<std::vector<double>> reduce_system(
    const LinearConstraints& lc) {
  std::size_t m = lc.rows.size(), n = lc.num_vars;
  std::vector<std::vector<double>> t(m, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    if (lc.rows[i].size() != n)
      throw ModelError("constraint row has wrong length");
    for (std::size_t j = 0; j < n; ++j) t[i][j] = lc.rows[i][j];
    t[i][n] = lc.rhs[i];
  }
  std::size_t rank = 0;
  for (std::size_t col = 0; col < n && rank < m; ++col) {
    std::size_t piv = rank;
    for (std::size_t i = rank + 1; i < m; ++i)
      if (std::fabs(t[i][col]) > std::fabs(t[piv][col])) piv = i;
    if (std::fabs(t[piv][col]) < kLpPivotTol) continue;
    std::swap(t[rank], t[piv]);
    for (std::size_t i = rank + 1; i < m; ++i) {
      double f = t[i][col] / t[rank][col];
      if (f == 0.0) continue;
      for (std::size_t j = col; j <= n; ++j) t[i][j] -= f * t[rank][j];
    }
    ++rank;
  }
  for (std::size_t i = rank; i < m; ++i)
    if (std::fabs(t[i][n]) > 1e-8)
      throw InfeasibleDataError(
          "equality constraints are mutually inconsistent");
  t.resize(rank);
  return t;
}

// Solve the square system M y = c by Gaussian elimination; false if singular.
inline bool solve_square(std::vector<std::vector<double>> M,
                         std::vector<double> c, std::vector<double>& y) {
  std::size_t r = M.size();
  for (std::size_t col = 0; col < r; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < r; ++i)
      if (std::fabs(M[i][col]) > std::fabs(M[piv][col])) piv = i;
    if (std::fabs(M[piv][col]) < kLpPivotTol) return false;
    std::swap(M[col], M[piv]);
    std::swap(c[col], c[piv]);
    for (std::size_t i = col + 1; i < r; ++i) {
      double f = M[i][col] / M[col][col];
      if (f == 0.0) continue;
      for (std::size_t j = col; j < r; ++j) M[i][j] -= f * M[col][j];
      c[i] -= f * c[col];
    }
  }
  y.assign(r, 0.0);
  for (std::size_t i = r; i-- > 0;) {
    double s = c[i];
    for (std::size_t j = i + 1; j < r; ++j) s -= M[i][j] * y[j];
    y[i] = s / M[i][i];
  }
  return true;
}

}  // namespace detail

// All vertices of {x : Ax = b, x >= 0}, via basic feasible solutions.
// Throws InfeasibleDataError when the polytope is empty.
inline std::vector<std::vector<double>> polytope_vertices(
    const LinearConstraints& lc) {
  if (lc.rows.size() != lc.rhs.size())
    throw ModelError("constraint matrix and rhs disagree");
  auto reduced = detail::reduce_system(lc);
  std::size_t r = reduced.size(), n = lc.num_vars;
  if (r == 0)
    throw ModelError("vertex enumeration needs at least one constraint");
  if (r > n) r = n;  // cannot happen after reduction, defensive

  std::vector<std::vector<double>> vertices;
  std::vector<std::size_t> basis(r);
  for (std::size_t i = 0; i < r; ++i) basis[i] = i;

  auto try_basis = [&]() {
    std::vector<std::vector<double>> M(r, std::vector<double>(r));
    std::vector<double> c(r);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < r; ++j) M[i][j] = reduced[i][basis[j]];
      c[i] = reduced[i][n];
    }
    std::vector<double> y;
    if (!detail::solve_square(std::move(M), std::move(c), y)) return;
    for (double v : y)
      if (v < -detail::kLpFeasTol) return;
    std::vector<double> x(n, 0.0);
    for (std::size_t j = 0; j < r; ++j)
      x[basis[j]] = y[j] < 0.0 ? 0.0 : y[j];
    for (const auto& seen : vertices) {
      double d = 0.0;
      for (std::size_t k = 0; k < n; ++k) d += std::fabs(seen[k] - x[k]);
      if (d <= 1e-9) return;  // duplicate (degenerate bases)
    }
    vertices.push_back(std::move(x));
  };

  // Lexicographic enumeration of all r-subsets of columns.
  while (true) {
    try_basis();
    std::size_t i = r;
    while (i-- > 0) {
      if (basis[i] < n - (r - i)) {
        ++basis[i];
        for (std::size_t k = i + 1; k < r; ++k) basis[k] = basis[k - 1] + 1;
        break;
      }
      if (i == 0) {
        if (vertices.empty())
          throw InfeasibleDataError("constraint polytope is empty");
        return vertices;
      }
    }
  }
}

// Minimize and maximize the linear objective c·x over the polytope.
inline LpSolution lp_extremize(const LinearConstraints& lc,
                               const std::vector<double>& objective) {
  if (objective.size() != lc.num_vars)
    throw ModelError("objective length does not match variable count");
  LpSolution out;
  out.vertices = polytope_vertices(lc);
  bool first = true;
  for (const auto& v : out.vertices) {
    double val = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) val += objective[k] * v[k];
    if (first || val < out.min_value) {
      out.min_value = val;
      out.argmin = v;
    }
    if (first || val > out.max_value) {
      out.max_value = val;
      out.argmax = v;
    }
    first = false;
  }
  return out;
}

}  // namespace coelab
